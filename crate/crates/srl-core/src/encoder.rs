//! Token embedding, sinusoidal positional encoding and the stack of
//! residual multi-head self-attention + feed-forward layers.
//!
//! Layers are numbered 1..=J over tap points `S^(0)..S^(J)`: `S^(0)` is the
//! projected, position-encoded input and `S^(j)` the output of layer `j`.
//! The parse-attention head replaces head 0 of layer `parse_layer` and
//! consumes that layer's input `S^(parse_layer-1)`; the joint POS/predicate
//! classifier reads the tap `S^(pos_tap)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::Bound;
use crate::tensor::{Array, Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid model config: {0}")]
    Invalid(String),
}

/// Architectural hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Encoder depth J.
    pub layers: usize,
    /// Attention heads per layer H (head 0 of `parse_layer` is the parse head).
    pub heads: usize,
    pub d_model: usize,
    pub d_k: usize,
    pub d_q: usize,
    pub d_v: usize,
    pub d_ff: usize,
    pub d_embed: usize,
    /// Tap r feeding the joint POS/predicate classifier.
    pub pos_tap: usize,
    /// Layer p carrying the syntactically-informed head; `pos_tap < parse_layer < layers`.
    pub parse_layer: usize,
    pub d_parse_q: usize,
    pub d_parse_k: usize,
    /// Width of the predicate and role representations.
    pub d_role: usize,
    /// Penalty on the head-prediction loss term.
    pub lambda_head: f64,
    /// Penalty on the dependency-label loss term.
    pub lambda_label: f64,
    pub dropout: f64,
    pub leaky_slope: f64,
    pub ln_eps: f64,
}

impl ModelConfig {
    /// Small configuration used throughout the test suite.
    pub fn desk() -> Self {
        Self {
            layers: 3,
            heads: 4,
            d_model: 64,
            d_k: 16,
            d_q: 16,
            d_v: 16,
            d_ff: 128,
            d_embed: 32,
            pos_tap: 1,
            parse_layer: 2,
            d_parse_q: 32,
            d_parse_k: 16,
            d_role: 32,
            lambda_head: 1.0,
            lambda_label: 1.0,
            dropout: 0.1,
            leaky_slope: 0.1,
            ln_eps: 1e-12,
        }
    }

    /// Full-scale configuration: 8 heads of width 25, 800d feed-forward,
    /// 500/100 parse query/key widths, 200d predicate/role representations.
    /// Tap layers are not pinned by the architecture; the preset places
    /// them mid-stack.
    pub fn full_scale() -> Self {
        Self {
            layers: 10,
            heads: 8,
            d_model: 200,
            d_k: 25,
            d_q: 25,
            d_v: 25,
            d_ff: 800,
            d_embed: 100,
            pos_tap: 5,
            parse_layer: 6,
            d_parse_q: 500,
            d_parse_k: 100,
            d_role: 200,
            lambda_head: 1.0,
            lambda_label: 1.0,
            dropout: 0.1,
            leaky_slope: 0.1,
            ln_eps: 1e-12,
        }
    }

    /// Concatenation width of one layer's attention outputs.
    pub fn concat_width(&self) -> usize {
        self.heads * self.d_v
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::Invalid(m));
        for (name, v) in [
            ("layers", self.layers),
            ("heads", self.heads),
            ("d_model", self.d_model),
            ("d_k", self.d_k),
            ("d_q", self.d_q),
            ("d_v", self.d_v),
            ("d_ff", self.d_ff),
            ("d_embed", self.d_embed),
            ("d_parse_q", self.d_parse_q),
            ("d_parse_k", self.d_parse_k),
            ("d_role", self.d_role),
        ] {
            if v == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        if self.d_model < 2 {
            return err("d_model must be at least 2 for layer normalization".into());
        }
        if self.d_q != self.d_k {
            return err(format!(
                "query and key widths must agree for dot-product attention ({} vs {})",
                self.d_q, self.d_k
            ));
        }
        if !(self.pos_tap < self.parse_layer && self.parse_layer < self.layers) {
            return err(format!(
                "tap ordering violated: need pos_tap < parse_layer < layers, got {} / {} / {}",
                self.pos_tap, self.parse_layer, self.layers
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout must lie in [0,1), got {}", self.dropout));
        }
        if !(0.0 < self.leaky_slope && self.leaky_slope < 1.0) {
            return err(format!("leaky slope must lie in (0,1), got {}", self.leaky_slope));
        }
        if self.ln_eps <= 0.0 {
            return err("layer-norm epsilon must be positive".into());
        }
        Ok(())
    }
}

/// Sinusoidal positional encoding table of shape `[t, d_model]`:
/// `PE(t, 2i) = sin(t / 10000^(2i/d))`, `PE(t, 2i+1) = cos(...)`.
pub fn positional_encoding(t: usize, d_model: usize) -> Array {
    let mut data = vec![0.0; t * d_model];
    for pos in 0..t {
        for i in 0..d_model {
            let freq = 10000f64.powf(-(2.0 * (i / 2) as f64) / d_model as f64);
            let angle = pos as f64 * freq;
            data[pos * d_model + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Array::new(vec![t, d_model], data).expect("dense table")
}

/// Dropout state for one training pass; absent entirely at inference.
pub struct DropoutCtx<'r> {
    pub rate: f64,
    pub rng: &'r mut ChaCha8Rng,
}

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// `1/(1-rate)` so expectations match the no-dropout forward.
pub fn dropout(
    tape: &mut Tape,
    x: Var,
    ctx: &mut Option<DropoutCtx<'_>>,
) -> Result<Var, TensorError> {
    let Some(ctx) = ctx.as_mut() else {
        return Ok(x);
    };
    if ctx.rate == 0.0 {
        return Ok(x);
    }
    let shape = tape.value(x).shape().to_vec();
    let keep = 1.0 - ctx.rate;
    let numel: usize = shape.iter().product();
    let mask_data: Vec<f64> = (0..numel)
        .map(|_| {
            if ctx.rng.gen::<f64>() < ctx.rate {
                0.0
            } else {
                1.0 / keep
            }
        })
        .collect();
    let mask = tape.leaf(Array::new(shape, mask_data)?);
    tape.mul(x, mask)
}

/// `x · w + b` with a broadcast bias row.
pub fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, b)
}

/// State captured from one encoder pass: every tap `S^(0)..S^(J)` plus the
/// per-layer attention matrices actually used (the parse head's slot holds
/// the post-oracle attention).
pub struct EncoderState {
    pub taps: Vec<Var>,
    pub attentions: Vec<Vec<Var>>,
}

impl EncoderState {
    pub fn tap(&self, j: usize) -> Var {
        self.taps[j]
    }

    pub fn final_tap(&self) -> Var {
        *self.taps.last().expect("at least the input tap")
    }
}

/// Word embedding rows, projected to `d_model`, plus positional encoding.
pub fn embed_inputs(
    tape: &mut Tape,
    ids: &[usize],
    bound: &Bound,
    cfg: &ModelConfig,
    drop: &mut Option<DropoutCtx<'_>>,
) -> Result<Var, TensorError> {
    let table = bound.var("embed.table");
    let rows = tape.gather_rows(table, ids)?;
    let projected = linear(tape, rows, bound.var("embed.proj_w"), bound.var("embed.proj_b"))?;
    let pe = tape.leaf(positional_encoding(ids.len(), cfg.d_model));
    let with_pos = tape.add(projected, pe)?;
    dropout(tape, with_pos, drop)
}

/// Scaled dot-product attention for one ordinary head: returns the
/// attended rows `M = A·V` and the attention matrix `A` (pre-dropout).
pub fn attention_head(
    tape: &mut Tape,
    s: Var,
    prefix: &str,
    bound: &Bound,
    cfg: &ModelConfig,
    drop: &mut Option<DropoutCtx<'_>>,
) -> Result<(Var, Var), TensorError> {
    let q = linear(tape, s, bound.var(&format!("{prefix}.wq")), bound.var(&format!("{prefix}.bq")))?;
    let k = linear(tape, s, bound.var(&format!("{prefix}.wk")), bound.var(&format!("{prefix}.bk")))?;
    let v = linear(tape, s, bound.var(&format!("{prefix}.wv")), bound.var(&format!("{prefix}.bv")))?;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scaled = tape.scale(scores, 1.0 / (cfg.d_k as f64).sqrt())?;
    let attn = tape.softmax_rows(scaled)?;
    let attn_dropped = dropout(tape, attn, drop)?;
    let m = tape.matmul(attn_dropped, v)?;
    Ok((m, attn))
}

/// Attention override injected at the parse layer: the (possibly clamped)
/// attention matrix and the parse head's value rows.
pub struct ParseOverride {
    pub a_used: Var,
    pub v_parse: Var,
}

pub fn head_prefix(layer: usize, head: usize) -> String {
    format!("enc.l{layer}.h{head}")
}

/// One residual self-attention + feed-forward layer (`layer` is 1-based).
/// At `parse_layer` the override must be supplied and fills head slot 0;
/// anywhere else supplying it is an error.
pub fn encoder_layer(
    tape: &mut Tape,
    s: Var,
    layer: usize,
    bound: &Bound,
    cfg: &ModelConfig,
    parse: Option<&ParseOverride>,
    drop: &mut Option<DropoutCtx<'_>>,
) -> Result<(Var, Vec<Var>), TensorError> {
    let is_parse_layer = layer == cfg.parse_layer;
    if parse.is_some() != is_parse_layer {
        return Err(TensorError::BadArgument {
            op: "encoder_layer",
            detail: if parse.is_some() {
                format!("parse override supplied at layer {layer}, expected {}", cfg.parse_layer)
            } else {
                format!("layer {layer} is the parse layer but no override was supplied")
            },
        });
    }

    let mut parts: Vec<Var> = Vec::with_capacity(cfg.heads);
    let mut attentions: Vec<Var> = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        if is_parse_layer && h == 0 {
            let ov = parse.expect("checked above");
            // Teacher-forced or injected rows stay exact: no attention
            // dropout on the parse head.
            let m = tape.matmul(ov.a_used, ov.v_parse)?;
            parts.push(m);
            attentions.push(ov.a_used);
        } else {
            let prefix = head_prefix(layer, h);
            let (m, a) = attention_head(tape, s, &prefix, bound, cfg, drop)?;
            parts.push(m);
            attentions.push(a);
        }
    }

    let concat = tape.concat_cols(&parts)?;
    let h1 = linear(
        tape,
        concat,
        bound.var(&format!("enc.l{layer}.ff1_w")),
        bound.var(&format!("enc.l{layer}.ff1_b")),
    )?;
    let a1 = tape.leaky_relu(h1, cfg.leaky_slope)?;
    let h2 = linear(
        tape,
        a1,
        bound.var(&format!("enc.l{layer}.ff2_w")),
        bound.var(&format!("enc.l{layer}.ff2_b")),
    )?;
    let a2 = tape.leaky_relu(h2, cfg.leaky_slope)?;
    let a2 = dropout(tape, a2, drop)?;
    let residual = tape.add(s, a2)?;
    let out = tape.layer_norm(
        residual,
        bound.var(&format!("enc.l{layer}.ln_gain")),
        bound.var(&format!("enc.l{layer}.ln_bias")),
        cfg.ln_eps,
    )?;
    Ok((out, attentions))
}
