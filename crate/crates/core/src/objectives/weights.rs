use crate::gradcore::Tensor;

use super::ObjectiveError;

/// Importance weights over a generated minibatch: nonnegative, mean one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightBatch(Tensor);

/// Tolerance on `mean(r) = 1` accepted by [`WeightBatch::new`].
pub const SIMPLEX_TOL: f64 = 1e-9;

impl WeightBatch {
    pub fn new(r: Tensor) -> Result<Self, ObjectiveError> {
        if r.is_empty() || r.cols() != 1 {
            return Err(ObjectiveError::Shape(format!("weights must be m×1, got {:?}", r.shape())));
        }
        if let Some(&bad) = r.data().iter().find(|&&x| !(x >= 0.0)) {
            return Err(ObjectiveError::Domain(format!("negative weight {bad}")));
        }
        if (r.mean() - 1.0).abs() > SIMPLEX_TOL {
            return Err(ObjectiveError::Domain(format!("weights have mean {}", r.mean())));
        }
        Ok(WeightBatch(r))
    }

    pub fn ones(m: usize) -> Self {
        WeightBatch(Tensor::ones(m, 1))
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }
}

fn require_column(t: &Tensor, what: &str) -> Result<(), ObjectiveError> {
    if t.is_empty() || t.cols() != 1 {
        return Err(ObjectiveError::Shape(format!(
            "{what} must be a nonempty m×1 column, got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// `r = e^{T/temp} / mean(e^{T/temp})`, computed through log-sum-exp.
///
/// Minimizes the KL-weighted critic objective over the empirical simplex
/// when `temp = 1`.
pub fn kl_weights(t_q: &Tensor, temp: f64) -> Result<WeightBatch, ObjectiveError> {
    require_column(t_q, "T_Q")?;
    if !(temp > 0.0) {
        return Err(ObjectiveError::Domain(format!("temperature {temp} must be > 0")));
    }
    // Shift by the max first so large scores keep their relative precision.
    let v = t_q.scale(1.0 / temp);
    let top = v.max();
    let shifted = v.map(|x| x - top);
    let log_norm = shifted.logsumexp() - (t_q.len() as f64).ln();
    Ok(WeightBatch(shifted.map(|x| (x - log_norm).exp())))
}

/// Clamp level for χ² weights: the smallest `c` with
/// `mean(max(T, c)) − c ≤ 2`, or `None` when the unclamped weights are
/// already nonnegative.
///
/// `g(c) = mean(max(T, c)) − c` is nonincreasing and piecewise linear with
/// knots at the sorted values, so the knot interval is found by bisection and
/// the root is solved exactly inside it.
pub fn chi2_clamp_level(t_q: &[f64]) -> Option<f64> {
    let m = t_q.len();
    let mut s = t_q.to_vec();
    s.sort_by(f64::total_cmp);
    // suffix[k] = Σ_{i ≥ k} s_i
    let mut suffix = vec![0.0; m + 1];
    for k in (0..m).rev() {
        suffix[k] = suffix[k + 1] + s[k];
    }
    let g_at = |k: usize| (k as f64 * s[k] + suffix[k]) / m as f64 - s[k];
    if g_at(0) <= 2.0 {
        return None;
    }
    // smallest k with g(s_k) ≤ 2; g(s_{m−1}) = 0 so it exists.
    let (mut lo, mut hi) = (0usize, m - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if g_at(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k = hi;
    // On (s_{k−1}, s_k]: g(c) = suffix[k]/m − c·(m − k)/m.
    let c = (suffix[k] - 2.0 * m as f64) / (m - k) as f64;
    Some(c)
}

/// χ² importance weights `(T̂ − mean(T̂) + 2)/2` with `T̂ = max(T, c)`, where
/// `c` is the minimal clamp making every weight nonnegative.
pub fn chi2_weights(t_q: &Tensor) -> Result<WeightBatch, ObjectiveError> {
    require_column(t_q, "T_Q")?;
    let clamped = match chi2_clamp_level(t_q.data()) {
        Some(c) => t_q.map(|x| x.max(c)),
        None => t_q.clone(),
    };
    let mean = clamped.mean();
    Ok(WeightBatch(clamped.map(|x| ((x - mean + 2.0) / 2.0).max(0.0))))
}
