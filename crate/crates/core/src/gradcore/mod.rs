//! Dense `f64` matrices and a define-by-run reverse-mode tape.
//!
//! The op set is what MLP critics, generators, and the importance-weighted
//! losses need: matrix products, bias broadcast, pointwise nonlinearities,
//! reductions, and a stable log-sum-exp.

mod tape;
mod tensor;

pub mod check;

pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: argument {value} outside the domain")]
    Domain { op: &'static str, value: f64 },
    #[error("{op}: empty tensor")]
    Empty { op: &'static str },
    #[error("backward needs a scalar root, got shape {shape:?}")]
    NonScalarRoot { shape: (usize, usize) },
}
