use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use srl_core::data::{LabelSpaces, Vocabulary};
use srl_core::encoder::ModelConfig;
use srl_core::model::SrlModel;
use srl_core::train::{train, TrainConfig};

use super::{read_corpus, require_non_empty};
use crate::{CliError, CliResult};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default = "ModelConfig::desk")]
    model: ModelConfig,
    #[serde(default = "TrainConfig::desk")]
    train: TrainConfig,
    /// Optional pretrained embedding file ("word v1 .. vd" rows); its
    /// dimension must equal `model.d_embed`.
    #[serde(default)]
    embeddings: Option<String>,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::desk(),
            train: TrainConfig::desk(),
            embeddings: None,
        }
    }
}

pub fn run(
    train_file: &Path,
    dev_file: &Path,
    config_file: Option<&Path>,
    out_dir: &Path,
    seed: Option<u64>,
    max_steps: Option<usize>,
) -> CliResult {
    let mut cfg: FileConfig = match config_file {
        None => FileConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(CliError::usage)?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid config {}", path.display()))
                .map_err(CliError::usage)?
        }
    };
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(m) = max_steps {
        cfg.train.max_steps = m;
    }
    cfg.model
        .validate()
        .map_err(|e| CliError::usage(anyhow!(e)))?;

    let train_corpus = read_corpus(train_file, false)?;
    require_non_empty(&train_corpus, train_file)?;
    let dev_corpus = read_corpus(dev_file, false)?;
    require_non_empty(&dev_corpus, dev_file)?;

    let labels = LabelSpaces::build(&train_corpus);
    let vocab = match &cfg.embeddings {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read embeddings {path}"))
                .map_err(CliError::usage)?;
            let vocab = Vocabulary::load_embeddings(&text)
                .with_context(|| format!("bad embeddings {path}"))
                .map_err(CliError::usage)?;
            if vocab.dim() != cfg.model.d_embed {
                return Err(CliError::usage(anyhow!(
                    "embedding dimension {} does not match model d_embed {}",
                    vocab.dim(),
                    cfg.model.d_embed
                )));
            }
            vocab
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
            Vocabulary::init_random(&train_corpus, cfg.model.d_embed, &mut rng)
        }
    };

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .map_err(CliError::usage)?;

    let mut model = SrlModel::init(cfg.model, labels, vocab, cfg.train.seed)
        .map_err(|e| CliError::runtime(anyhow!(e)))?;

    let metrics_path = out_dir.join("metrics.csv");
    let mut log = BufWriter::new(
        File::create(&metrics_path)
            .with_context(|| format!("cannot create {}", metrics_path.display()))
            .map_err(CliError::runtime)?,
    );
    let outcome = train(&mut model, &train_corpus, &dev_corpus, &cfg.train, &mut log)
        .map_err(|e| CliError::runtime(anyhow!(e)))?;
    drop(log);

    let model_path = out_dir.join("model.json");
    model
        .save(&model_path)
        .map_err(|e| CliError::runtime(anyhow!(e)))?;

    println!(
        "trained {} steps; best dev SRL F1 {:.4} (LAS {:.4}) at step {}",
        outcome.steps_run, outcome.best_dev_f1, outcome.best_dev_las, outcome.best_step
    );
    println!("checkpoint: {}", model_path.display());
    println!("metrics:    {}", metrics_path.display());
    Ok(())
}
