//! `srl`: train, predict, evaluate and analyze the joint syntax/semantics
//! labeler, plus synthetic-corpus generation and gradient verification.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input-validation
//! failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "srl", version, about = "joint POS/predicate/parse/semantic-role labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecodeArg {
    Viterbi,
    Greedy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredicateOracleArg {
    Model,
    Gold,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes a checkpoint and a metrics CSV.
    Train {
        /// Training corpus (column format).
        #[arg(long)]
        train: PathBuf,
        /// Development corpus used for early stopping.
        #[arg(long)]
        dev: PathBuf,
        /// JSON config with "model" and "train" sections; desk-scale
        /// defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for model.json and metrics.csv.
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's step budget.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Annotate a corpus with a trained model.
    Predict {
        /// Checkpoint written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Parse fed to downstream layers: "model", "gold", or
        /// "external:FILE" with one head sequence per input sentence.
        #[arg(long, default_value = "model")]
        parse_oracle: String,
        /// Predicate positions defining the frames.
        #[arg(long, value_enum, default_value_t = PredicateOracleArg::Model)]
        predicate_oracle: PredicateOracleArg,
        #[arg(long, value_enum, default_value_t = DecodeArg::Viterbi)]
        decode: DecodeArg,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Drop V spans from segment scoring.
        #[arg(long)]
        exclude_v_spans: bool,
        /// Comma-separated POS tags treated as punctuation.
        #[arg(long)]
        punctuation: Option<String>,
    },
    /// Error-analysis tables: correction ladder, F1 by length and by
    /// predicate distance, parse-correctness quadrants, decode deltas.
    Analyze {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Second parse source (predictions file) for the quadrant table.
        #[arg(long)]
        alt_parse: Option<PathBuf>,
        /// Greedy-decoded predictions for the decode comparison.
        #[arg(long)]
        greedy_pred: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        exclude_v_spans: bool,
    },
    /// Generate synthetic train/dev/test corpora whose role labels are a
    /// deterministic function of the dependency tree.
    GenSynthetic {
        /// JSON grammar spec; defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Verify model gradients against finite differences on a tiny
    /// assembled model.
    GradCheck {
        #[arg(long, default_value_t = 4)]
        tokens: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 2)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            train,
            dev,
            config,
            out_dir,
            seed,
            max_steps,
        } => commands::train::run(&train, &dev, config.as_deref(), &out_dir, seed, max_steps),
        Command::Predict {
            model,
            input,
            output,
            parse_oracle,
            predicate_oracle,
            decode,
        } => commands::predict::run(
            &model,
            &input,
            &output,
            &parse_oracle,
            predicate_oracle,
            decode,
        ),
        Command::Eval {
            pred,
            gold,
            json,
            exclude_v_spans,
            punctuation,
        } => commands::eval::run(
            &pred,
            &gold,
            json.as_deref(),
            exclude_v_spans,
            punctuation.as_deref(),
        ),
        Command::Analyze {
            pred,
            gold,
            alt_parse,
            greedy_pred,
            out_dir,
            exclude_v_spans,
        } => commands::analyze::run(
            &pred,
            &gold,
            alt_parse.as_deref(),
            greedy_pred.as_deref(),
            &out_dir,
            exclude_v_spans,
        ),
        Command::GenSynthetic { spec, out_dir } => {
            commands::gen::run(spec.as_deref(), &out_dir)
        }
        Command::GradCheck {
            tokens,
            step,
            tolerance,
            seed,
        } => commands::grad_check::run(tokens, step, tolerance, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.code)
        }
    }
}

/// Error carrying its exit code: 2 for usage/validation, 1 for runtime.
pub struct CliError {
    pub code: u8,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn usage(source: anyhow::Error) -> Self {
        Self { code: 2, source }
    }

    pub fn runtime(source: anyhow::Error) -> Self {
        Self { code: 1, source }
    }
}

pub type CliResult = Result<(), CliError>;
