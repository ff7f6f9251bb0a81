//! Importance-weighted Wasserstein GAN laboratory.
//!
//! The crate is organized bottom-up:
//!
//! - [`gradcore`]: dense `f64` tensors and a reverse-mode tape.
//! - [`netkit`]: MLPs with spectral normalization, RMSProp, seeded init.
//! - [`objectives`]: f-generators, the weighted critic objective, closed-form
//!   KL and χ² importance weights, variational estimators, hinge losses.
//! - [`datasets`]: 2-D synthetic samplers and tabular CSV ingestion.
//! - [`evalkit`]: MMD, KDE negative log-likelihood, density-ratio fields.
//! - [`trainer`]: the alternating critic/generator loop with logging and
//!   checkpoints.
//! - [`cli`]: command-line front end.

pub mod cli;
pub mod datasets;
pub mod evalkit;
pub mod gradcore;
pub mod netkit;
pub mod objectives;
pub mod trainer;

pub mod csvfmt;

pub use gradcore::{GradError, Tape, Tensor, Var};
