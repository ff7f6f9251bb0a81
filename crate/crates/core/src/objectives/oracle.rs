//! Brute-force inner minimization of the weighted critic objective over the
//! empirical simplex `{r ≥ 0, mean(r) = 1}` by projected gradient descent.
//!
//! Test-scale only; it exists to verify the closed-form weights.

use super::{estimators::ell_f, FGenerator, ObjectiveError};
use crate::gradcore::Tensor;

/// Batches larger than this are rejected.
pub const ORACLE_MAX_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub max_iters: usize,
    /// Initial step size; adapted by backtracking.
    pub step: f64,
    /// Converged when the unit-step projected gradient `r − P(r − ∇)` is
    /// below this in ∞-norm.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_iters: 200_000,
            step: 1.0,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub r: Tensor,
    pub value: f64,
    pub iters: usize,
}

/// Euclidean projection of `y` onto `{x ≥ 0, Σx = total}`.
pub fn project_scaled_simplex(y: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - total) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// `f(new) − f(old)` without cancellation, so the line search can still
/// tell tiny steps apart near the optimum.
fn f_change(f: FGenerator, old: f64, new: f64) -> f64 {
    let d = new - old;
    match f {
        FGenerator::ChiSq => d * (new + old - 2.0),
        FGenerator::Kl if old > 0.0 && new > 0.0 => d * new.ln() + old * (d / old).ln_1p(),
        FGenerator::Kl => {
            let g = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
            g(new) - g(old)
        }
    }
}

/// Gradient of `Σ f(rᵢ) − Σ rᵢ tᵢ` (the `r`-dependent part of `m · ℓ_f`); KL's `ln r` is floored at `r = 1e-300`.
fn scaled_gradient(f: FGenerator, r: &[f64], t: &[f64]) -> Vec<f64> {
    r.iter()
        .zip(t)
        .map(|(&ri, &ti)| f.derivative(ri.max(1e-300)) - ti)
        .collect()
}

/// Minimizes `ℓ_f(T, r)` over the empirical simplex and returns the
/// minimizer and the objective value there.
pub fn simplex_inner_min_oracle(
    f: FGenerator,
    t_p: &Tensor,
    t_q: &Tensor,
    opts: OracleOptions,
) -> Result<OracleResult, ObjectiveError> {
    let m = t_q.len();
    if m == 0 || m > ORACLE_MAX_BATCH {
        return Err(ObjectiveError::Shape(format!(
            "oracle supports 1..={ORACLE_MAX_BATCH} samples, got {m}"
        )));
    }
    let t = t_q.data();
    let total = m as f64;
    let mut r = vec![1.0; m];
    let mut step = opts.step;
    let mut last_move = f64::INFINITY;

    for iter in 0..opts.max_iters {
        let grad = scaled_gradient(f, &r, t);
        loop {
            let trial: Vec<f64> = r.iter().zip(&grad).map(|(ri, gi)| ri - step * gi).collect();
            let next = project_scaled_simplex(&trial, total);
            let delta: Vec<f64> = next.iter().zip(&r).map(|(a, b)| a - b).collect();
            let lin: f64 = grad.iter().zip(&delta).map(|(g, d)| g * d).sum();
            let sq: f64 = delta.iter().map(|d| d * d).sum();
            let change: f64 = next.iter().zip(&r).zip(t).map(|((&n, &o), &ti)| f_change(f, o, n) - (n - o) * ti).sum();
            let slack = 4.0 * f64::EPSILON * grad.iter().zip(&delta).map(|(g, d)| (g * d).abs()).sum::<f64>();
            if change <= lin + sq / (2.0 * step) + slack {
                last_move = delta.iter().fold(0.0, |a: f64, d| a.max(d.abs()));
                r = next;
                step *= 2.0;
                break;
            }
            step /= 2.0;
            if step < 1e-300 {
                return Err(ObjectiveError::NoConvergence {
                    iters: iter,
                    last_change: last_move,
                });
            }
        }
        let unit: Vec<f64> = r.iter().zip(&scaled_gradient(f, &r, t)).map(|(ri, gi)| ri - gi).collect();
        let stationarity = project_scaled_simplex(&unit, total)
            .iter()
            .zip(&r)
            .fold(0.0, |a: f64, (p, ri)| a.max((p - ri).abs()));
        if stationarity < opts.tol {
            let r = Tensor::column(&r);
            let value = ell_f(f, t_p, t_q, &r)?;
            return Ok(OracleResult { r, value, iters: iter + 1 });
        }
    }
    Err(ObjectiveError::NoConvergence {
        iters: opts.max_iters,
        last_change: last_move,
    })
}
