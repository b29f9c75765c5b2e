use std::collections::BTreeSet;
use std::path::Path;

use anyhow::anyhow;
use srl_core::eval::{default_punctuation, evaluate_corpus, EvalOptions};

use super::{read_corpus, require_non_empty, write_file};
use crate::{CliError, CliResult};

pub fn punctuation_set(arg: Option<&str>) -> BTreeSet<String> {
    match arg {
        None => default_punctuation(),
        Some(list) => list
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string())
            .collect(),
    }
}

pub fn run(
    pred_path: &Path,
    gold_path: &Path,
    json_out: Option<&Path>,
    exclude_v_spans: bool,
    punctuation: Option<&str>,
) -> CliResult {
    // predictions are not constrained to a single root
    let pred = read_corpus(pred_path, true)?;
    let gold = read_corpus(gold_path, false)?;
    require_non_empty(&pred, pred_path)?;
    require_non_empty(&gold, gold_path)?;

    let options = EvalOptions {
        include_v_spans: !exclude_v_spans,
    };
    let report = evaluate_corpus(&pred, &gold, options, &punctuation_set(punctuation))
        .map_err(|e| CliError::usage(anyhow!(e)))?;

    print!("{}", report.headline());
    if let Some(path) = json_out {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::runtime(anyhow!(e)))?;
        write_file(path, &json)?;
        println!("report: {}", path.display());
    }
    Ok(())
}
