//! f-generators, the importance-weighted critic objective
//! `ℓ_f(T, r) = E_Q[f(r)] + E_P[T] − E_Q[r·T]`, its closed-form minimizers
//! over the empirical simplex, the variational estimators it interpolates
//! between, and the hinge losses used for training.
//!
//! All expectations are minibatch means. The simplex constraint
//! `mean(r) = 1` is imposed per minibatch, which biases the weights; that
//! bias is accepted.

mod estimators;
mod fgen;
mod losses;
mod oracle;
mod weights;

use thiserror::Error;

pub use estimators::{
    critic_objective, ell_f, estimator_dv, estimator_ipm, estimator_nwj, estimator_nwj_strict,
    f_divergence_discrete, optimal_weights, ConstraintSet,
};
pub use fgen::FGenerator;
pub use losses::{
    critic_loss, critic_loss_values, fgan_kl_critic_loss, fgan_kl_gen_loss, gen_loss,
    gen_loss_value, kl_weights_on_tape, weighted_fake_scores, HingeVariant, WeightOptions,
};
pub use oracle::{
    project_scaled_simplex, simplex_inner_min_oracle, OracleOptions, OracleResult,
    ORACLE_MAX_BATCH,
};
pub use weights::{chi2_clamp_level, chi2_weights, kl_weights, WeightBatch, SIMPLEX_TOL};

use crate::gradcore::GradError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("p is not absolutely continuous w.r.t. q at support index {index}")]
    AbsoluteContinuity { index: usize },
    #[error("oracle did not converge after {iters} iterations (last change {last_change:e})")]
    NoConvergence { iters: usize, last_change: f64 },
    #[error(transparent)]
    Grad(#[from] GradError),
}
