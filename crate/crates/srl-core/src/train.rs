//! Training: the four-term multi-task objective with teacher forcing,
//! Nadam updates under the warmup/decay learning-rate schedule, global
//! gradient clipping, token-budget batching and early stopping.
//!
//! The Nadam update follows the moment-corrected Nesterov formulation
//! with constant first-moment decay:
//!
//! ```text
//! m_t = b1*m_{t-1} + (1-b1)*g      v_t = b2*v_{t-1} + (1-b2)*g^2
//! mhat = b1*m_t/(1-b1^(t+1)) + (1-b1)*g/(1-b1^t)
//! vhat = v_t/(1-b2^t)
//! theta -= lr * mhat / (sqrt(vhat) + eps)
//! ```
//!
//! Accumulators and the per-parameter step count move only when that
//! parameter received a gradient (lazy updates).

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Sentence};
use crate::decode::TransitionModel;
use crate::eval::{self, EvalOptions};
use crate::model::{DecodeStrategy, ForwardPass, ModelError, OracleSource, SrlModel};
use crate::params::{Bound, ParamSet};
use crate::tensor::{Array, Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("training requires gold annotations: {0}")]
    MissingGold(String),
    #[error("learning-rate schedule is undefined at step 0")]
    ZeroStep,
    #[error("non-finite {what} at step {step}; aborting")]
    NonFinite { what: &'static str, step: usize },
    #[error("empty {0} corpus")]
    EmptyCorpus(&'static str),
    #[error("metrics log: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub warmup_steps: usize,
    pub clip_norm: f64,
    /// Batches are packed up to roughly this many tokens.
    pub batch_tokens: usize,
    pub max_steps: usize,
    /// Dev evaluations without improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Full-scale settings: initial rate 0.04, 8000 warmup steps, unit
    /// clipping, ~5000-token batches, beta1 0.9 / beta2 0.98 / eps 1e-12.
    fn default() -> Self {
        Self {
            lr0: 0.04,
            warmup_steps: 8000,
            clip_norm: 1.0,
            batch_tokens: 5000,
            max_steps: 50_000,
            patience: 10,
            eval_every: 500,
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-12,
            seed: 1,
        }
    }
}

impl TrainConfig {
    /// Settings sized for the synthetic corpora used in tests.
    pub fn desk() -> Self {
        Self {
            warmup_steps: 100,
            batch_tokens: 80,
            max_steps: 2000,
            patience: 1_000_000, // effectively off; small runs never plateau cleanly
            eval_every: 200,
            ..Self::default()
        }
    }
}

/// `lr = lr0 * min(step^-0.5, step * warm^-1.5)`: linear ramp over the
/// first `warm` steps, then inverse-square-root decay.
pub fn lr_at(step: usize, lr0: f64, warm: usize) -> Result<f64, TrainError> {
    if step == 0 {
        return Err(TrainError::ZeroStep);
    }
    let s = step as f64;
    let w = warm as f64;
    Ok(lr0 * s.powf(-0.5).min(s * w.powf(-1.5)))
}

/// Scale all gradients so the global L2 norm is at most `clip_norm`.
/// Returns the pre-clip norm.
pub fn clip_gradients(grads: &mut BTreeMap<String, Array>, clip_norm: f64) -> f64 {
    let norm = grads
        .values()
        .flat_map(|g| g.data().iter())
        .map(|&v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        for g in grads.values_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

/// Per-parameter Nadam accumulators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NadamState {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    moments: BTreeMap<String, Moments>,
}

impl NadamState {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            beta1,
            beta2,
            epsilon,
            moments: BTreeMap::new(),
        }
    }

    /// Steps taken for one parameter (0 if it never received a gradient).
    pub fn steps_for(&self, name: &str) -> u64 {
        self.moments.get(name).map_or(0, |m| m.steps)
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.moments.get(name).map(|m| m.m.as_slice())
    }
}

/// Apply one Nadam update. Parameters whose gradient is absent or
/// identically zero are left untouched, accumulators included.
pub fn nadam_step(
    params: &mut ParamSet,
    grads: &BTreeMap<String, Array>,
    state: &mut NadamState,
    lr: f64,
) -> Result<(), TrainError> {
    for (name, grad) in grads {
        if !grad.is_finite() {
            return Err(TrainError::NonFinite {
                what: "gradient",
                step: 0,
            });
        }
        if grad.data().iter().all(|&g| g == 0.0) {
            continue;
        }
        let value = params.get_mut(name);
        let n = value.numel();
        let moments = state.moments.entry(name.clone()).or_insert_with(|| Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
        });
        let t = moments.steps + 1;
        let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
        let bc1_t = 1.0 - b1.powi(t as i32);
        let bc1_next = 1.0 - b1.powi(t as i32 + 1);
        let bc2_t = 1.0 - b2.powi(t as i32);
        for ((theta, g), (m, v)) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(moments.m.iter_mut().zip(moments.v.iter_mut()))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mhat = b1 * *m / bc1_next + (1.0 - b1) * g / bc1_t;
            let vhat = *v / bc2_t;
            *theta -= lr * mhat / (vhat.sqrt() + eps);
        }
        moments.steps = t;
    }
    Ok(())
}

// ── Loss ─────────────────────────────────────────────────────────────

/// The objective's terms as tape variables, each summed over the batch of
/// per-sentence token means.
pub struct LossVars {
    pub srl: Var,
    pub prp: Var,
    pub head: Var,
    pub label: Var,
    pub total: Var,
}

/// The same terms as plain numbers for logging.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossBreakdown {
    pub srl: f64,
    pub prp: f64,
    pub head: f64,
    pub label: f64,
    pub total: f64,
}

/// Loss terms for one sentence under teacher forcing; the forward pass
/// must have been run with gold oracles. Every term is a token mean; the
/// role term sums over the sentence's frames inside the mean.
pub fn sentence_loss(
    tape: &mut Tape,
    model: &SrlModel,
    sentence: &Sentence,
    fp: &ForwardPass,
) -> Result<LossVars, TrainError> {
    sentence
        .validate(true)
        .map_err(TrainError::MissingGold)?;
    let t = sentence.len();
    let inv_t = 1.0 / t as f64;
    let labels = &model.labels;

    // roles: sum over gold frames of per-token CE
    let mut srl_sum: Option<Var> = None;
    for (frame_tags, logits) in sentence.frames.iter().zip(&fp.frames.role_logits) {
        let targets: Vec<usize> = frame_tags
            .iter()
            .map(|tag| labels.role_index(tag))
            .collect::<Result<_, _>>()?;
        let ce = tape.cross_entropy_sum(*logits, &targets)?;
        srl_sum = Some(match srl_sum {
            None => ce,
            Some(acc) => tape.add(acc, ce)?,
        });
    }
    let srl = match srl_sum {
        Some(v) => tape.scale(v, inv_t)?,
        None => tape.leaf(Array::scalar(0.0)),
    };

    let joint_targets: Vec<usize> = (0..t)
        .map(|i| labels.joint_index(&sentence.pos[i], sentence.predicate_flags[i]))
        .collect::<Result<_, _>>()?;
    let prp_ce = tape.cross_entropy_sum(fp.joint_logits, &joint_targets)?;
    let prp = tape.scale(prp_ce, inv_t)?;

    let head_ce = tape.cross_entropy_sum(fp.parse.head_logits, &sentence.heads)?;
    let head = tape.scale(head_ce, inv_t)?;

    let dep_targets: Vec<usize> = sentence
        .deprels
        .iter()
        .map(|d| labels.deprel_index(d))
        .collect::<Result<_, _>>()?;
    let label_ce = tape.cross_entropy_sum(fp.label_logits, &dep_targets)?;
    let label = tape.scale(label_ce, inv_t)?;

    let head_weighted = tape.scale(head, model.config.lambda_head)?;
    let label_weighted = tape.scale(label, model.config.lambda_label)?;
    let a = tape.add(srl, prp)?;
    let b = tape.add(a, head_weighted)?;
    let total = tape.add(b, label_weighted)?;

    Ok(LossVars {
        srl,
        prp,
        head,
        label,
        total,
    })
}

/// Teacher-forced loss over a batch: the sum of per-sentence losses.
/// Parameters are bound once, so gradients accumulate across sentences;
/// the binding is returned for gradient extraction.
pub fn batch_loss(
    tape: &mut Tape,
    model: &SrlModel,
    batch: &[&Sentence],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(Bound, LossVars, LossBreakdown), TrainError> {
    let bound = model.params.bind(tape);
    let mut acc: Option<LossVars> = None;
    for sentence in batch {
        let fp = model.forward_bound(
            tape,
            &bound,
            sentence,
            &OracleSource::gold(),
            dropout_rng.as_deref_mut(),
        )?;
        let loss = sentence_loss(tape, model, sentence, &fp)?;
        acc = Some(match acc {
            None => loss,
            Some(prev) => LossVars {
                srl: tape.add(prev.srl, loss.srl)?,
                prp: tape.add(prev.prp, loss.prp)?,
                head: tape.add(prev.head, loss.head)?,
                label: tape.add(prev.label, loss.label)?,
                total: tape.add(prev.total, loss.total)?,
            },
        });
    }
    let vars = acc.ok_or(TrainError::EmptyCorpus("batch"))?;
    let scalar = |v: Var, tape: &Tape| tape.value(v).data()[0];
    let breakdown = LossBreakdown {
        srl: scalar(vars.srl, tape),
        prp: scalar(vars.prp, tape),
        head: scalar(vars.head, tape),
        label: scalar(vars.label, tape),
        total: scalar(vars.total, tape),
    };
    Ok((bound, vars, breakdown))
}

// ── Batching ─────────────────────────────────────────────────────────

/// Length-sorted buckets packed up to the token budget; every batch holds
/// at least one sentence. Returned as index lists into the corpus.
pub fn pack_batches(corpus: &[Sentence], batch_tokens: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by_key(|&i| (corpus[i].len(), i));
    let mut batches = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut tokens = 0;
    for i in order {
        let t = corpus[i].len();
        if !current.is_empty() && tokens + t > batch_tokens {
            batches.push(std::mem::take(&mut current));
            tokens = 0;
        }
        current.push(i);
        tokens += t;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

// ── Training loop ────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub steps_run: usize,
    pub best_dev_f1: f64,
    pub best_dev_las: f64,
    pub best_step: usize,
}

pub const METRICS_HEADER: &str = "step,lr,srl_loss,prp_loss,head_loss,deplabel_loss,total_loss,dev_srl_f1,dev_uas,dev_las\n";

/// Train in place: estimates the role-transition table from the training
/// corpus, runs teacher-forced Nadam steps, evaluates the dev set every
/// `eval_every` steps and restores the best-dev parameters (SRL F1, ties
/// broken by LAS) before returning. Metrics stream to `log` as CSV.
pub fn train(
    model: &mut SrlModel,
    train_corpus: &[Sentence],
    dev_corpus: &[Sentence],
    tcfg: &TrainConfig,
    log: &mut dyn Write,
) -> Result<TrainOutcome, TrainError> {
    if train_corpus.is_empty() {
        return Err(TrainError::EmptyCorpus("train"));
    }
    if dev_corpus.is_empty() {
        return Err(TrainError::EmptyCorpus("dev"));
    }
    model.transitions = Some(TransitionModel::from_corpus(
        train_corpus,
        &model.labels.role_bio_labels,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let batches = pack_batches(train_corpus, tcfg.batch_tokens);
    let mut state = NadamState::new(tcfg.beta1, tcfg.beta2, tcfg.epsilon);

    let mut best: Option<(f64, f64, usize, ParamSet)> = None;
    let mut evals_since_best = 0usize;
    let mut order: Vec<usize> = Vec::new();
    let mut steps_run = 0;

    log.write_all(METRICS_HEADER.as_bytes())?;

    'steps: for step in 1..=tcfg.max_steps {
        if order.is_empty() {
            order = (0..batches.len()).collect();
            order.shuffle(&mut rng);
        }
        let batch_idx = order.pop().expect("refilled above");
        let batch: Vec<&Sentence> = batches[batch_idx].iter().map(|&i| &train_corpus[i]).collect();

        let mut tape = Tape::new();
        let (bound, loss, breakdown) = {
            let fp_rng = &mut rng;
            batch_loss(&mut tape, model, &batch, Some(fp_rng))?
        };
        if !breakdown.total.is_finite() {
            return Err(TrainError::NonFinite {
                what: "loss",
                step,
            });
        }
        tape.backward(loss.total)?;

        // Gradients keyed by name; parameters missing from the loss path
        // stay absent (lazy rule).
        let mut grads: BTreeMap<String, Array> = BTreeMap::new();
        for (name, &var) in bound.iter() {
            if let Some(g) = tape.grad(var) {
                grads.insert(name.clone(), g);
            }
        }
        clip_gradients(&mut grads, tcfg.clip_norm);
        let lr = lr_at(step, tcfg.lr0, tcfg.warmup_steps)?;
        nadam_step(&mut model.params, &grads, &mut state, lr)
            .map_err(|e| stamp_step(e, step))?;
        steps_run = step;

        let eval_now = step % tcfg.eval_every == 0 || step == tcfg.max_steps;
        if eval_now {
            let (f1, uas, las) = dev_scores(model, dev_corpus)?;
            writeln!(
                log,
                "{step},{lr:.8e},{:.6},{:.6},{:.6},{:.6},{:.6},{f1:.6},{uas:.6},{las:.6}",
                breakdown.srl, breakdown.prp, breakdown.head, breakdown.label, breakdown.total
            )?;
            let improved = match &best {
                None => true,
                Some((bf, bl, _, _)) => f1 > *bf || (f1 == *bf && las > *bl),
            };
            if improved {
                best = Some((f1, las, step, model.params.clone()));
                evals_since_best = 0;
            } else {
                evals_since_best += 1;
                if evals_since_best >= tcfg.patience {
                    break 'steps;
                }
            }
        } else {
            writeln!(
                log,
                "{step},{lr:.8e},{:.6},{:.6},{:.6},{:.6},{:.6},,,",
                breakdown.srl, breakdown.prp, breakdown.head, breakdown.label, breakdown.total
            )?;
        }
    }

    let (best_dev_f1, best_dev_las, best_step, best_params) =
        best.ok_or(TrainError::EmptyCorpus("dev evaluations"))?;
    model.params = best_params;
    Ok(TrainOutcome {
        steps_run,
        best_dev_f1,
        best_dev_las,
        best_step,
    })
}

/// Verify the reverse-mode gradient of the full teacher-forced loss on
/// one sentence against central finite differences, over every parameter
/// element. Dropout is off, so the loss is smooth except at leaky-ReLU
/// kinks, which a random parameter draw avoids.
pub fn grad_check_model(
    model: &SrlModel,
    sentence: &Sentence,
    h: f64,
    tol: f64,
) -> Result<crate::tensor::GradCheckReport, TrainError> {
    let names: Vec<String> = model.params.names().cloned().collect();
    let inputs: Vec<(String, Array)> = model
        .params
        .iter()
        .map(|(n, a)| (n.clone(), a.clone()))
        .collect();
    let f = |tape: &mut Tape, vars: &[Var]| -> Result<Var, TrainError> {
        let bound = Bound::from_vars(&names, vars);
        let fp = model.forward_bound(tape, &bound, sentence, &OracleSource::gold(), None)?;
        let loss = sentence_loss(tape, model, sentence, &fp)?;
        Ok(loss.total)
    };
    crate::tensor::grad_check(&f, &inputs, h, tol)
}

fn dev_scores(model: &SrlModel, dev: &[Sentence]) -> Result<(f64, f64, f64), TrainError> {
    let mut predictions = Vec::with_capacity(dev.len());
    for sentence in dev {
        predictions.push(model.predict(
            sentence,
            &OracleSource::model(),
            DecodeStrategy::Viterbi,
        )?);
    }
    let report = eval::evaluate_corpus(
        &predictions,
        dev,
        EvalOptions::default(),
        &eval::default_punctuation(),
    )?;
    Ok((report.srl.f1(), report.uas(), report.las()))
}

fn stamp_step(e: TrainError, step: usize) -> TrainError {
    match e {
        TrainError::NonFinite { what, .. } => TrainError::NonFinite { what, step },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_corpus;
    use crate::data::LabelSpaces;
    use crate::data::Vocabulary;
    use crate::encoder::ModelConfig;

    #[test]
    fn schedule_matches_formula() {
        // crossover: both branches equal at step == warm
        let at_warm = lr_at(8000, 0.04, 8000).unwrap();
        assert!((at_warm - 0.04 * 8000f64.powf(-0.5)).abs() < 1e-18);
        assert!((at_warm - 4.4721359549995794e-4).abs() < 1e-12);
        let at_one = lr_at(1, 0.04, 8000).unwrap();
        assert!((at_one - 5.5901699437494745e-8).abs() < 1e-18);
        assert!(matches!(lr_at(0, 0.04, 8000), Err(TrainError::ZeroStep)));
    }

    #[test]
    fn schedule_ramps_then_decays() {
        let warm = 500;
        let mut prev = 0.0;
        for step in 1..=warm {
            let lr = lr_at(step, 0.04, warm).unwrap();
            assert!(lr > prev, "not increasing at {step}");
            prev = lr;
        }
        for step in warm + 1..warm + 200 {
            let lr = lr_at(step, 0.04, warm).unwrap();
            assert!(lr < prev, "not decreasing at {step}");
            prev = lr;
        }
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Array::vector(vec![0.3, 0.4]));
        let norm = clip_gradients(&mut grads, 1.0);
        assert!((norm - 0.5).abs() < 1e-12);
        assert_eq!(grads["a"].data(), &[0.3, 0.4]);
    }

    #[test]
    fn clip_rescales_large_gradients() {
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Array::vector(vec![3.0, 4.0]));
        let norm = clip_gradients(&mut grads, 1.0);
        assert!((norm - 5.0).abs() < 1e-12);
        assert!((grads["a"].data()[0] - 0.6).abs() < 1e-12);
        assert!((grads["a"].data()[1] - 0.8).abs() < 1e-12);
        let after = clip_gradients(&mut grads, 1.0);
        assert!(after <= 1.0 + 1e-12);
    }

    /// Straight transcription of the update equations on plain floats,
    /// kept independent of the optimizer implementation.
    fn scalar_nadam_reference(grads: &[f64], b1: f64, b2: f64, eps: f64, lr: f64) -> f64 {
        let (mut theta, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for (i, &g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mhat = b1 * m / (1.0 - b1.powi(t + 1)) + (1.0 - b1) * g / (1.0 - b1.powi(t));
            let vhat = v / (1.0 - b2.powi(t));
            theta -= lr * mhat / (vhat.sqrt() + eps);
        }
        theta
    }

    #[test]
    fn nadam_matches_scalar_reference() {
        let grads = [1.0, -0.5, 0.25, 2.0, -1.5, 0.1];
        let (b1, b2, eps, lr) = (0.9, 0.98, 1e-12, 0.01);
        let expected = scalar_nadam_reference(&grads, b1, b2, eps, lr);

        let mut params = ParamSet::new();
        params.insert("w", Array::scalar(0.0));
        let mut state = NadamState::new(b1, b2, eps);
        for &g in &grads {
            let mut gm = BTreeMap::new();
            gm.insert("w".to_string(), Array::scalar(g));
            nadam_step(&mut params, &gm, &mut state, lr).unwrap();
        }
        assert!((params.get("w").data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn nadam_descends_on_constant_gradient() {
        let mut params = ParamSet::new();
        params.insert("w", Array::scalar(1.0));
        let mut state = NadamState::new(0.9, 0.98, 1e-12);
        let mut prev = 1.0;
        for _ in 0..20 {
            let mut gm = BTreeMap::new();
            gm.insert("w".to_string(), Array::scalar(1.0));
            nadam_step(&mut params, &gm, &mut state, 0.01).unwrap();
            let now = params.get("w").data()[0];
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn lazy_rule_skips_zero_and_absent_gradients() {
        let mut params = ParamSet::new();
        params.insert("a", Array::scalar(1.0));
        params.insert("b", Array::scalar(2.0));
        let mut state = NadamState::new(0.9, 0.98, 1e-12);

        let mut gm = BTreeMap::new();
        gm.insert("a".to_string(), Array::scalar(0.5));
        gm.insert("b".to_string(), Array::scalar(0.0)); // all-zero: untouched
        nadam_step(&mut params, &gm, &mut state, 0.01).unwrap();
        assert_eq!(state.steps_for("a"), 1);
        assert_eq!(state.steps_for("b"), 0);
        assert!(state.first_moment("b").is_none());
        assert_eq!(params.get("b").data()[0], 2.0);

        // absent gradient: untouched as well
        let mut gm2 = BTreeMap::new();
        gm2.insert("a".to_string(), Array::scalar(0.5));
        nadam_step(&mut params, &gm2, &mut state, 0.01).unwrap();
        assert_eq!(state.steps_for("a"), 2);
        assert_eq!(state.steps_for("b"), 0);
    }

    #[test]
    fn nadam_rejects_non_finite_gradient() {
        let mut params = ParamSet::new();
        params.insert("a", Array::scalar(1.0));
        let mut state = NadamState::new(0.9, 0.98, 1e-12);
        let mut gm = BTreeMap::new();
        gm.insert("a".to_string(), Array::scalar(f64::NAN));
        assert!(nadam_step(&mut params, &gm, &mut state, 0.01).is_err());
    }

    #[test]
    fn pack_batches_respects_budget() {
        let corpus = parse_corpus(
            "0\ta\tNN\t1\tdep\tN\n1\tb\tVB\t1\troot\tN\n\n\
             0\tc\tNN\t1\tdep\tN\n1\td\tVB\t1\troot\tN\n2\te\tNN\t1\tdep\tN\n\n\
             0\tf\tVB\t0\troot\tN\n",
        )
        .unwrap();
        // budget below the largest sentence still yields singleton batches
        let batches = pack_batches(&corpus, 2);
        assert_eq!(batches.len(), 3);
        let all: usize = batches.iter().map(|b| b.len()).sum();
        assert_eq!(all, 3);
        // generous budget packs everything together
        let one = pack_batches(&corpus, 100);
        assert_eq!(one.len(), 1);
    }

    // ── losses on a tiny model ───────────────────────────────────────

    fn tiny_setup() -> (SrlModel, Vec<Sentence>) {
        let corpus = parse_corpus(
            "0\tthe\tDT\t1\tdet\tN\tO\n\
             1\tcat\tNN\t2\tnsubj\tN\tB-A0\n\
             2\tsat\tVB\t2\troot\tY\tB-V\n\
             3\tdown\tRB\t2\tadvmod\tN\tO\n",
        )
        .unwrap();
        let labels = LabelSpaces::build(&corpus);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vocab = Vocabulary::init_random(&corpus, 8, &mut rng);
        let cfg = ModelConfig {
            layers: 2,
            heads: 2,
            d_model: 16,
            d_k: 8,
            d_q: 8,
            d_v: 8,
            d_ff: 24,
            d_embed: 8,
            pos_tap: 0,
            parse_layer: 1,
            d_parse_q: 8,
            d_parse_k: 8,
            d_role: 8,
            dropout: 0.0,
            ..ModelConfig::desk()
        };
        let model = SrlModel::init(cfg, labels, vocab, 3).unwrap();
        (model, corpus)
    }

    #[test]
    fn loss_total_is_weighted_sum() {
        let (mut model, corpus) = tiny_setup();
        model.config.lambda_head = 0.7;
        model.config.lambda_label = 1.3;
        let mut tape = Tape::new();
        let batch: Vec<&Sentence> = corpus.iter().collect();
        let (_, _, b) = batch_loss(&mut tape, &model, &batch, None).unwrap();
        let expected = b.srl + b.prp + 0.7 * b.head + 1.3 * b.label;
        assert!((b.total - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_penalties_reduce_total_to_srl_plus_prp() {
        let (mut model, corpus) = tiny_setup();
        model.config.lambda_head = 0.0;
        model.config.lambda_label = 0.0;
        let mut tape = Tape::new();
        let batch: Vec<&Sentence> = corpus.iter().collect();
        let (_, _, b) = batch_loss(&mut tape, &model, &batch, None).unwrap();
        assert!((b.total - (b.srl + b.prp)).abs() < 1e-12);
    }

    #[test]
    fn uniform_model_prp_loss_is_log_joint_size() {
        let (mut model, corpus) = tiny_setup();
        // zero the classifier so every joint label is equally likely
        *model.params.get_mut("joint.w") =
            Array::zeros(model.params.get("joint.w").shape());
        *model.params.get_mut("joint.b") =
            Array::zeros(model.params.get("joint.b").shape());
        let mut tape = Tape::new();
        let (_, fp) = model
            .forward(&mut tape, &corpus[0], &OracleSource::gold(), None)
            .unwrap();
        let loss = sentence_loss(&mut tape, &model, &corpus[0], &fp).unwrap();
        let n_joint = model.labels.joint_labels.len() as f64;
        let prp = tape.value(loss.prp).data()[0];
        assert!((prp - n_joint.ln()).abs() < 1e-12);
    }

    #[test]
    fn sentence_without_frames_contributes_zero_srl() {
        let (model, _) = tiny_setup();
        let no_pred = parse_corpus(
            "0\tthe\tDT\t1\tdet\tN\n1\tcat\tNN\t1\troot\tN\n",
        )
        .unwrap();
        let mut tape = Tape::new();
        let (_, fp) = model
            .forward(&mut tape, &no_pred[0], &OracleSource::gold(), None)
            .unwrap();
        let loss = sentence_loss(&mut tape, &model, &no_pred[0], &fp).unwrap();
        assert_eq!(tape.value(loss.srl).data()[0], 0.0);
        assert!(tape.value(loss.prp).data()[0] > 0.0);
    }

    #[test]
    fn gradient_accumulation_splits_cleanly() {
        // two half-batches vs one full batch: summed gradients agree
        let (model, corpus) = tiny_setup();
        let more = parse_corpus(
            "0\tdogs\tNN\t1\tnsubj\tN\tB-A0\n\
             1\tbark\tVB\t1\troot\tY\tB-V\n",
        )
        .unwrap();
        let grads_for = |batch: Vec<&Sentence>| -> BTreeMap<String, Array> {
            let mut tape = Tape::new();
            let (bound, loss, _) = batch_loss(&mut tape, &model, &batch, None).unwrap();
            tape.backward(loss.total).unwrap();
            bound
                .iter()
                .filter_map(|(n, &v)| tape.grad(v).map(|g| (n.clone(), g)))
                .collect()
        };

        let full = grads_for(vec![&corpus[0], &more[0]]);
        let half_a = grads_for(vec![&corpus[0]]);
        let half_b = grads_for(vec![&more[0]]);

        for (name, g) in &full {
            let za = half_a.get(name);
            let zb = half_b.get(name);
            for (i, &v) in g.data().iter().enumerate() {
                let split = za.map_or(0.0, |a| a.data()[i]) + zb.map_or(0.0, |b| b.data()[i]);
                assert!(
                    (v - split).abs() < 1e-10,
                    "{name}[{i}]: {v} vs {split}"
                );
            }
        }
    }

    #[test]
    fn teacher_forcing_blocks_srl_gradient_into_head_selector() {
        let (model, corpus) = tiny_setup();
        let mut tape = Tape::new();
        let (bound, fp) = model
            .forward(&mut tape, &corpus[0], &OracleSource::gold(), None)
            .unwrap();
        let loss = sentence_loss(&mut tape, &model, &corpus[0], &fp).unwrap();
        let u_heads = bound.var("parse.u_heads");

        tape.backward(loss.srl).unwrap();
        let srl_grad = tape.grad(u_heads);
        assert!(
            srl_grad.map_or(true, |g| g.data().iter().all(|&v| v == 0.0)),
            "role loss leaked into U_heads"
        );

        tape.backward(loss.head).unwrap();
        let head_grad = tape.grad(u_heads).expect("head loss reaches U_heads");
        assert!(head_grad.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn training_loop_runs_and_logs_deterministically() {
        let (model, corpus) = tiny_setup();
        let run = || {
            let mut m = SrlModel::init(
                model.config.clone(),
                model.labels.clone(),
                model.vocab.clone(),
                3,
            )
            .unwrap();
            let tcfg = TrainConfig {
                max_steps: 12,
                eval_every: 6,
                warmup_steps: 10,
                batch_tokens: 10,
                seed: 9,
                ..TrainConfig::default()
            };
            let mut log = Vec::new();
            let outcome = train(&mut m, &corpus, &corpus, &tcfg, &mut log).unwrap();
            (outcome.steps_run, String::from_utf8(log).unwrap())
        };
        let (steps_a, log_a) = run();
        let (steps_b, log_b) = run();
        assert_eq!(steps_a, 12);
        assert_eq!(steps_b, 12);
        assert_eq!(log_a, log_b);
        assert!(log_a.starts_with(METRICS_HEADER));
    }
}
