//! MLP generators and critics, spectral normalization, RMSProp, and seeded
//! initialization.

mod mlp;
mod rmsprop;
mod spectral;

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use mlp::{BoundMlp, DenseLayer, Mlp, SpectralMode};
pub use rmsprop::{RmsProp, RmsPropConfig};
pub use spectral::{power_iterate, sigma_estimate, spectral_normalize, SpectralState, SIGMA_FLOOR};

use crate::csvfmt::{self, CsvError};
use crate::gradcore::{GradError, Tensor};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
}

/// `m × dim` i.i.d. standard normal draws.
pub fn sample_latent<R: Rng>(m: usize, dim: usize, rng: &mut R) -> Tensor {
    let data = (0..m * dim).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(m, dim, data).expect("length matches shape")
}

pub fn save_mlp(net: &Mlp, path: &Path) -> Result<(), NetError> {
    Ok(csvfmt::write_named_tensors(path, &net.named_tensors())?)
}

/// Loads parameters into `net`, whose architecture must match the file.
pub fn load_mlp_into(net: &mut Mlp, path: &Path) -> Result<(), NetError> {
    let named = csvfmt::read_named_tensors(path)?;
    net.load_named_tensors(named)
}
