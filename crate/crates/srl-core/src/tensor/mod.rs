//! Dense-tensor arithmetic with reverse-mode automatic differentiation.
//!
//! All values are 64-bit. Shapes are restricted to what the model needs
//! (vectors and matrices, no general broadcasting). Gradients are computed
//! by recording primitive operations on a [`Tape`] during the forward pass
//! and replaying the record in reverse.

mod array;
mod check;
mod tape;

pub use array::Array;
pub use check::{grad_check, GradCheckReport};
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("layer_norm over a single feature is degenerate")]
    DegenerateNorm,
    #[error("{op}: index {index} out of range for dimension of size {size}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        size: usize,
    },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },
    #[error("{op}: argument out of range: {detail}")]
    BadArgument { op: &'static str, detail: String },
}
