//! The assembled model: parameter initialization, the single encoder pass
//! with its task heads, prediction, and the checkpoint format.

use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, LabelSpaces, Sentence, Vocabulary};
use crate::decode::{self, TransitionModel};
use crate::encoder::{
    self, embed_inputs, encoder_layer, DropoutCtx, EncoderState, ModelConfig, ParseOverride,
};
use crate::params::{Bound, ParamSet};
use crate::syntax::{self, FrameScores, ParseHeadOutput};
use crate::tensor::{Array, Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Config(#[from] encoder::ConfigError),
    #[error("external parse has {got} heads for a {expected}-token sentence")]
    ExternalParseLength { expected: usize, got: usize },
    #[error("model has no transition table; train it or attach one before decoding")]
    MissingTransitions,
    #[error("checkpoint version {0} is not supported (expected {CHECKPOINT_VERSION})")]
    CheckpointVersion(u32),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint encoding: {0}")]
    Encoding(#[from] serde_json::Error),
}

/// Source of the parse fed to downstream layers for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseSource {
    /// The model's own attention rows (soft) and argmax heads.
    Model,
    /// Clamp to the sentence's gold heads.
    Gold,
    /// Clamp to the supplied head sequence.
    External(Vec<usize>),
}

/// Source of the predicate positions that define the semantic frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateSource {
    Model,
    Gold,
}

/// Per-signal oracle selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSource {
    pub parse: ParseSource,
    pub predicates: PredicateSource,
}

impl OracleSource {
    pub fn model() -> Self {
        Self {
            parse: ParseSource::Model,
            predicates: PredicateSource::Model,
        }
    }

    /// Teacher forcing: gold parse and gold predicates downstream.
    pub fn gold() -> Self {
        Self {
            parse: ParseSource::Gold,
            predicates: PredicateSource::Gold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeStrategy {
    Viterbi,
    Greedy,
}

/// Everything one forward pass produces, tied to its tape.
pub struct ForwardPass {
    pub encoder: EncoderState,
    pub parse: ParseHeadOutput,
    /// Attention actually consumed downstream (clamped unless Model).
    pub a_used: Var,
    /// Head assignment used for label scoring and reported in predictions.
    pub head_assignment: Vec<usize>,
    pub label_logits: Var,
    pub joint_logits: Var,
    pub frames: FrameScores,
    /// Number of encoder passes taken for this sentence (always 1: frames
    /// for every predicate are scored from the same encoding).
    pub encoder_invocations: usize,
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: ModelConfig,
    labels: LabelSpaces,
    vocab_tokens: Vec<String>,
    params: ParamSet,
    transitions: Option<TransitionModel>,
}

/// Model = config + label inventories + vocabulary + named parameters.
pub struct SrlModel {
    pub config: ModelConfig,
    pub labels: LabelSpaces,
    pub vocab: Vocabulary,
    pub params: ParamSet,
    pub transitions: Option<TransitionModel>,
}

impl SrlModel {
    /// Initialize parameters: truncated normal scaled by fan-in for
    /// projections, zeros for biases, small random for bilinear forms,
    /// unit gain / zero bias for layer norms. The embedding table is
    /// seeded from the vocabulary and trained like any other parameter.
    pub fn init(
        config: ModelConfig,
        labels: LabelSpaces,
        vocab: Vocabulary,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let c = &config;

        let proj = |p: &mut ParamSet, name: String, rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let std = 1.0 / (rows as f64).sqrt();
            p.insert(name.clone(), Array::randn_truncated(&[rows, cols], std, rng));
            let bias_name = name
                .replace("_w", "_b")
                .replace(".w", ".b");
            p.insert(bias_name, Array::zeros(&[cols]));
        };

        p.insert("embed.table", vocab.embeddings.clone());
        proj(&mut p, "embed.proj_w".into(), vocab.dim(), c.d_model, &mut rng);

        for layer in 1..=c.layers {
            for h in 0..c.heads {
                if layer == c.parse_layer && h == 0 {
                    continue; // slot taken by the parse head
                }
                let prefix = encoder::head_prefix(layer, h);
                proj(&mut p, format!("{prefix}.wq"), c.d_model, c.d_q, &mut rng);
                proj(&mut p, format!("{prefix}.wk"), c.d_model, c.d_k, &mut rng);
                proj(&mut p, format!("{prefix}.wv"), c.d_model, c.d_v, &mut rng);
            }
            proj(&mut p, format!("enc.l{layer}.ff1_w"), c.concat_width(), c.d_ff, &mut rng);
            proj(&mut p, format!("enc.l{layer}.ff2_w"), c.d_ff, c.d_model, &mut rng);
            p.insert(format!("enc.l{layer}.ln_gain"), Array::full(&[c.d_model], 1.0));
            p.insert(format!("enc.l{layer}.ln_bias"), Array::zeros(&[c.d_model]));
        }

        proj(&mut p, "parse.wq".into(), c.d_model, c.d_parse_q, &mut rng);
        proj(&mut p, "parse.wk".into(), c.d_model, c.d_parse_k, &mut rng);
        proj(&mut p, "parse.wv".into(), c.d_model, c.d_v, &mut rng);
        p.insert(
            "parse.u_heads",
            Array::randn_truncated(&[c.d_parse_q, c.d_parse_k], 0.1, &mut rng),
        );

        proj(&mut p, "joint.w".into(), c.d_model, labels.joint_labels.len(), &mut rng);

        let n_dep = labels.deprel_labels.len();
        for l in 0..n_dep {
            p.insert(
                format!("deplabel.u{l}"),
                Array::randn_truncated(&[c.d_parse_q, c.d_parse_k], 0.1, &mut rng),
            );
        }
        p.insert(
            "deplabel.wq",
            Array::randn_truncated(&[c.d_parse_q, n_dep], 0.1, &mut rng),
        );
        p.insert(
            "deplabel.wk",
            Array::randn_truncated(&[c.d_parse_k, n_dep], 0.1, &mut rng),
        );
        p.insert("deplabel.b", Array::zeros(&[n_dep]));

        proj(&mut p, "srl.pred_w".into(), c.d_model, c.d_role, &mut rng);
        proj(&mut p, "srl.role_w".into(), c.d_model, c.d_role, &mut rng);
        let n_roles = labels.role_bio_labels.len();
        for l in 0..n_roles {
            p.insert(
                format!("srl.u{l}"),
                Array::randn_truncated(&[c.d_role, c.d_role], 0.1, &mut rng),
            );
        }
        p.insert("srl.b", Array::zeros(&[n_roles]));

        Ok(Self {
            config,
            labels,
            vocab,
            params: p,
            transitions: None,
        })
    }

    /// Bind the parameters and run one pass; see [`SrlModel::forward_bound`]
    /// for running several sentences against one binding.
    pub fn forward(
        &self,
        tape: &mut Tape,
        sentence: &Sentence,
        oracle: &OracleSource,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Bound, ForwardPass), ModelError> {
        let bound = self.params.bind(tape);
        let fp = self.forward_bound(tape, &bound, sentence, oracle, dropout_rng)?;
        Ok((bound, fp))
    }

    /// One full encoder pass with all task heads against an existing
    /// parameter binding, so a batch shares leaves and gradients
    /// accumulate. Pass a dropout RNG only in training; inference is
    /// deterministic.
    pub fn forward_bound(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        sentence: &Sentence,
        oracle: &OracleSource,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardPass, ModelError> {
        let t = sentence.len();
        if let ParseSource::External(heads) = &oracle.parse {
            if heads.len() != t {
                return Err(ModelError::ExternalParseLength {
                    expected: t,
                    got: heads.len(),
                });
            }
        }
        let cfg = &self.config;
        let mut drop = dropout_rng.map(|rng| DropoutCtx {
            rate: cfg.dropout,
            rng,
        });

        let ids = self.vocab.ids(&sentence.tokens);
        let mut s = embed_inputs(tape, &ids, bound, cfg, &mut drop)?;
        let mut taps = vec![s];
        let mut attentions = Vec::with_capacity(cfg.layers);
        let mut parse: Option<ParseHeadOutput> = None;
        let mut a_used: Option<Var> = None;
        let mut head_assignment: Vec<usize> = Vec::new();

        for layer in 1..=cfg.layers {
            let override_ = if layer == cfg.parse_layer {
                let out = syntax::parse_attention(tape, s, bound)?;
                let (used, heads) = match &oracle.parse {
                    ParseSource::Model => {
                        let heads = tape.value(out.a_parse).argmax_rows();
                        (out.a_parse, heads)
                    }
                    ParseSource::Gold => {
                        let heads = sentence.heads.clone();
                        (syntax::clamp_attention(tape, &heads)?, heads)
                    }
                    ParseSource::External(heads) => {
                        (syntax::clamp_attention(tape, heads)?, heads.clone())
                    }
                };
                head_assignment = heads;
                a_used = Some(used);
                let ov = ParseOverride {
                    a_used: used,
                    v_parse: out.v_parse,
                };
                parse = Some(out);
                Some(ov)
            } else {
                None
            };
            let (next, attn) =
                encoder_layer(tape, s, layer, bound, cfg, override_.as_ref(), &mut drop)?;
            s = next;
            taps.push(s);
            attentions.push(attn);
        }

        let encoder_state = EncoderState { taps, attentions };
        let parse = parse.expect("parse layer ran");
        let a_used = a_used.expect("parse layer ran");

        let joint_logits =
            syntax::joint_pos_predicate(tape, encoder_state.tap(cfg.pos_tap), bound)?;

        let label_logits = syntax::dependency_labels(
            tape,
            parse.q_parse,
            parse.k_parse,
            &head_assignment,
            self.labels.deprel_labels.len(),
            bound,
        )?;

        let predicate_positions = match oracle.predicates {
            PredicateSource::Gold => sentence.predicate_positions(),
            PredicateSource::Model => {
                let argmax = tape.value(joint_logits).argmax_rows();
                argmax
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &l)| {
                        LabelSpaces::split_joint(&self.labels.joint_labels[l])
                            .1
                            .then_some(i)
                    })
                    .collect()
            }
        };

        let frames = syntax::srl_scores(
            tape,
            encoder_state.final_tap(),
            &predicate_positions,
            self.labels.role_bio_labels.len(),
            bound,
        )?;

        Ok(ForwardPass {
            encoder: encoder_state,
            parse,
            a_used,
            head_assignment,
            label_logits,
            joint_logits,
            frames,
            encoder_invocations: 1,
        })
    }

    /// Run inference on one sentence and decode every output signal into a
    /// predicted [`Sentence`] (same tokens, predicted annotations). The
    /// head column reports the oracle-selected assignment, which is what
    /// label scoring and downstream layers consumed.
    pub fn predict(
        &self,
        sentence: &Sentence,
        oracle: &OracleSource,
        strategy: DecodeStrategy,
    ) -> Result<Sentence, ModelError> {
        let tm = self
            .transitions
            .as_ref()
            .ok_or(ModelError::MissingTransitions)?;
        let mut tape = Tape::new();
        let (_, fp) = self.forward(&mut tape, sentence, oracle, None)?;
        let t = sentence.len();

        let joint_argmax = tape.value(fp.joint_logits).argmax_rows();
        let mut pos = Vec::with_capacity(t);
        let mut flags = Vec::with_capacity(t);
        for &l in &joint_argmax {
            let (p, is_pred) = LabelSpaces::split_joint(&self.labels.joint_labels[l]);
            pos.push(p.to_string());
            flags.push(is_pred);
        }
        if oracle.predicates == PredicateSource::Gold {
            flags = sentence.predicate_flags.clone();
        }

        let label_argmax = tape.value(fp.label_logits).argmax_rows();
        let deprels: Vec<String> = label_argmax
            .iter()
            .map(|&l| self.labels.deprel_labels[l].clone())
            .collect();

        let mut frames = Vec::with_capacity(fp.frames.role_logits.len());
        for logits in &fp.frames.role_logits {
            let unary = decode::log_softmax_rows(tape.value(*logits));
            let path = match strategy {
                DecodeStrategy::Viterbi => decode::viterbi_decode(&unary, tm),
                DecodeStrategy::Greedy => decode::greedy_decode(&unary, tm),
            };
            frames.push(decode::tags_of(&path, tm));
        }

        Ok(Sentence {
            tokens: sentence.tokens.clone(),
            pos,
            heads: fp.head_assignment.clone(),
            deprels,
            predicate_flags: flags,
            frames,
        })
    }

    // ── checkpointing ────────────────────────────────────────────────

    pub fn to_json(&self) -> Result<String, ModelError> {
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            labels: self.labels.clone(),
            vocab_tokens: self.vocab.tokens().to_vec(),
            params: self.params.clone(),
            transitions: self.transitions.clone(),
        };
        Ok(serde_json::to_string(&ckpt)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::CheckpointVersion(ckpt.version));
        }
        ckpt.config.validate()?;
        let embeddings = ckpt.params.get("embed.table").clone();
        let vocab = Vocabulary::from_tokens(ckpt.vocab_tokens, embeddings);
        Ok(Self {
            config: ckpt.config,
            labels: ckpt.labels,
            vocab,
            params: ckpt.params,
            transitions: ckpt.transitions,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
