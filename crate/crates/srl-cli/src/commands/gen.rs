use std::path::Path;

use anyhow::{anyhow, Context};
use srl_core::data::serialize_corpus;
use srl_core::synthetic::{generate_corpora, SyntheticGrammarSpec};

use super::write_file;
use crate::{CliError, CliResult};

pub fn run(spec_path: Option<&Path>, out_dir: &Path) -> CliResult {
    let spec: SyntheticGrammarSpec = match spec_path {
        None => SyntheticGrammarSpec::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read spec {}", path.display()))
                .map_err(CliError::usage)?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid spec {}", path.display()))
                .map_err(CliError::usage)?
        }
    };

    let (train, dev, test) =
        generate_corpora(&spec).map_err(|e| CliError::usage(anyhow!(e)))?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .map_err(CliError::usage)?;
    for (name, corpus) in [("train.tsv", &train), ("dev.tsv", &dev), ("test.tsv", &test)] {
        write_file(&out_dir.join(name), &serialize_corpus(corpus))?;
    }
    println!(
        "generated {} train / {} dev / {} test sentences in {}",
        train.len(),
        dev.len(),
        test.len(),
        out_dir.display()
    );
    Ok(())
}
