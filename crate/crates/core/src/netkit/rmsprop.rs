use serde::{Deserialize, Serialize};

use crate::gradcore::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmsPropConfig {
    pub lr: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_rho() -> f64 {
    0.9
}

fn default_eps() -> f64 {
    1e-8
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            lr: 0.2,
            rho: default_rho(),
            eps: default_eps(),
        }
    }
}

/// RMSProp with one second-moment accumulator per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    pub acc: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, params: &[&Tensor]) -> Self {
        let acc = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        RmsProp { config, acc }
    }

    /// `acc ← ρ·acc + (1−ρ)·g²`, `p ← p − lr·g / (√acc + ε)`.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient count mismatch");
        assert_eq!(params.len(), self.acc.len(), "optimizer built for a different network");
        let RmsPropConfig { lr, rho, eps } = self.config;
        for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.acc) {
            assert_eq!(p.shape(), g.shape());
            let pd = p.data_mut();
            for ((pi, &gi), ai) in pd.iter_mut().zip(g.data()).zip(acc.data_mut()) {
                *ai = rho * *ai + (1.0 - rho) * gi * gi;
                *pi -= lr * gi / (ai.sqrt() + eps);
            }
        }
    }
}
