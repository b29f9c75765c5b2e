use std::path::Path;

use anyhow::anyhow;
use srl_core::data::serialize_corpus;
use srl_core::model::{DecodeStrategy, OracleSource, ParseSource, PredicateSource, SrlModel};

use super::{read_corpus, require_non_empty, write_file};
use crate::{CliError, CliResult, DecodeArg, PredicateOracleArg};

pub fn run(
    model_path: &Path,
    input: &Path,
    output: &Path,
    parse_oracle: &str,
    predicate_oracle: PredicateOracleArg,
    decode: DecodeArg,
) -> CliResult {
    let model = SrlModel::load(model_path)
        .map_err(|e| CliError::usage(anyhow!("cannot load model {}: {e}", model_path.display())))?;
    let sentences = read_corpus(input, false)?;
    require_non_empty(&sentences, input)?;

    // "model" | "gold" | "external:FILE"
    let external = match parse_oracle {
        "model" | "gold" => None,
        other => match other.strip_prefix("external:") {
            Some(path) => {
                let parses = read_corpus(Path::new(path), true)?;
                if parses.len() != sentences.len() {
                    return Err(CliError::usage(anyhow!(
                        "external parse file has {} sentences, input has {}",
                        parses.len(),
                        sentences.len()
                    )));
                }
                Some(parses)
            }
            None => {
                return Err(CliError::usage(anyhow!(
                    "--parse-oracle must be model, gold or external:FILE, got {other:?}"
                )))
            }
        },
    };

    let predicates = match predicate_oracle {
        PredicateOracleArg::Model => PredicateSource::Model,
        PredicateOracleArg::Gold => PredicateSource::Gold,
    };
    let strategy = match decode {
        DecodeArg::Viterbi => DecodeStrategy::Viterbi,
        DecodeArg::Greedy => DecodeStrategy::Greedy,
    };

    let mut predictions = Vec::with_capacity(sentences.len());
    for (i, sentence) in sentences.iter().enumerate() {
        let parse = match (parse_oracle, &external) {
            ("gold", _) => ParseSource::Gold,
            (_, Some(parses)) => {
                if parses[i].len() != sentence.len() {
                    return Err(CliError::usage(anyhow!(
                        "sentence {i}: external parse has {} tokens, input has {}",
                        parses[i].len(),
                        sentence.len()
                    )));
                }
                ParseSource::External(parses[i].heads.clone())
            }
            _ => ParseSource::Model,
        };
        let oracle = OracleSource { parse, predicates };
        let predicted = model
            .predict(sentence, &oracle, strategy)
            .map_err(|e| CliError::runtime(anyhow!("sentence {i}: {e}")))?;
        predictions.push(predicted);
    }

    write_file(output, &serialize_corpus(&predictions))?;
    println!("wrote {} sentences to {}", predictions.len(), output.display());
    Ok(())
}
