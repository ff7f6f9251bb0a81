use crate::gradcore::Tensor;

/// Floor on the singular-value estimate; keeps an all-zero weight finite.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Persisted left singular vector for power iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub u: Tensor,
    pub n_iters: usize,
}

impl SpectralState {
    /// Starts from the normalized all-ones vector.
    pub fn new(out_dim: usize, n_iters: usize) -> Self {
        let u = Tensor::filled(out_dim, 1, 1.0 / (out_dim as f64).sqrt());
        SpectralState { u, n_iters: n_iters.max(1) }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// `Wᵀu` for `W[out×in]`, `u[out]`.
fn wt_u(w: &Tensor, u: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; w.cols()];
    for (i, &ui) in u.iter().enumerate() {
        for (vj, &wij) in v.iter_mut().zip(w.row(i)) {
            *vj += wij * ui;
        }
    }
    v
}

fn w_v(w: &Tensor, v: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|i| w.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Singular-value estimate `σ = uᵀWv / ‖v‖` with `v = Wᵀu`, i.e. `‖Wᵀu‖`.
pub fn sigma_estimate(w: &Tensor, u: &Tensor) -> f64 {
    let v = wt_u(w, u.data());
    v.iter().map(|x| x * x).sum::<f64>().sqrt().max(SIGMA_FLOOR)
}

/// Runs `iters` power-iteration steps on `W`, updating `u` in place, and
/// returns the resulting σ estimate.
pub fn power_iterate(w: &Tensor, u: &mut Tensor, iters: usize) -> f64 {
    for _ in 0..iters {
        let mut v = wt_u(w, u.data());
        if normalize(&mut v) == 0.0 {
            break;
        }
        let mut next = w_v(w, &v);
        if normalize(&mut next) == 0.0 {
            break;
        }
        u.data_mut().copy_from_slice(&next);
    }
    sigma_estimate(w, u)
}

/// Advances the power iteration and returns `(W/σ, σ)`.
pub fn spectral_normalize(w: &Tensor, state: &mut SpectralState) -> (Tensor, f64) {
    let sigma = power_iterate(w, &mut state.u, state.n_iters);
    (w.scale(1.0 / sigma), sigma)
}
