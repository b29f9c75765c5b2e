use anyhow::anyhow;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srl_core::data::{LabelSpaces, Vocabulary};
use srl_core::encoder::ModelConfig;
use srl_core::model::SrlModel;
use srl_core::synthetic::{generate_corpora, SyntheticGrammarSpec};
use srl_core::train::grad_check_model;

use crate::{CliError, CliResult};

/// The trust anchor: assemble a tiny full model and compare its reverse-
/// mode gradients against central finite differences, element by element.
pub fn run(tokens: usize, step: f64, tolerance: f64, seed: u64) -> CliResult {
    if tokens == 0 {
        return Err(CliError::usage(anyhow!("--tokens must be positive")));
    }
    let spec = SyntheticGrammarSpec {
        train_sentences: 8,
        dev_sentences: 1,
        test_sentences: 1,
        len_min: tokens,
        len_max: tokens,
        seed: seed.wrapping_add(19),
        ..Default::default()
    };
    let (corpus, _, _) = generate_corpora(&spec).map_err(|e| CliError::usage(anyhow!(e)))?;
    let labels = LabelSpaces::build(&corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::init_random(&corpus, 8, &mut rng);
    let config = ModelConfig {
        layers: 2,
        heads: 2,
        d_model: 16,
        d_k: 8,
        d_q: 8,
        d_v: 8,
        d_ff: 32,
        d_embed: 8,
        pos_tap: 0,
        parse_layer: 1,
        d_parse_q: 12,
        d_parse_k: 8,
        d_role: 8,
        dropout: 0.0,
        ..ModelConfig::desk()
    };
    let model =
        SrlModel::init(config, labels, vocab, seed).map_err(|e| CliError::runtime(anyhow!(e)))?;

    let report = grad_check_model(&model, &corpus[0], step, tolerance)
        .map_err(|e| CliError::runtime(anyhow!(e)))?;
    println!(
        "checked {} parameter elements on a {}-token sentence",
        report.elements_checked, tokens
    );
    println!(
        "max relative error {:.3e} (tolerance {:.1e}){}",
        report.max_rel_err,
        report.tol,
        report
            .worst
            .as_ref()
            .map(|(name, idx)| format!(", worst at {name}[{idx}]"))
            .unwrap_or_default()
    );
    if report.passed() {
        println!("PASS");
        Ok(())
    } else {
        Err(CliError::runtime(anyhow!(
            "gradient check failed: max relative error {:.3e} exceeds {:.1e} (finite: {})",
            report.max_rel_err,
            report.tol,
            report.finite
        )))
    }
}
