pub mod analyze;
pub mod eval;
pub mod gen;
pub mod grad_check;
pub mod predict;
pub mod train;

use std::path::Path;

use anyhow::{anyhow, Context};
use srl_core::data::{parse_corpus_with, ParseOptions, Sentence};

use crate::{CliError, CliResult};

/// Read and parse a corpus file; missing or malformed input is a usage
/// failure (exit 2) with the path in the message.
pub fn read_corpus(path: &Path, allow_any_roots: bool) -> Result<Vec<Sentence>, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::usage)?;
    parse_corpus_with(
        &text,
        ParseOptions { allow_any_roots },
    )
    .with_context(|| format!("malformed corpus {}", path.display()))
    .map_err(CliError::usage)
}

pub fn require_non_empty(corpus: &[Sentence], path: &Path) -> CliResult {
    if corpus.is_empty() {
        return Err(CliError::usage(anyhow!(
            "no sentences in {}",
            path.display()
        )));
    }
    Ok(())
}

pub fn write_file(path: &Path, contents: &str) -> CliResult {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(CliError::runtime)
}
