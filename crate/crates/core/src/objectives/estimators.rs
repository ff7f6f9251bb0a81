use serde::{Deserialize, Serialize};

use super::weights::{chi2_weights, kl_weights};
use super::{FGenerator, ObjectiveError};
use crate::gradcore::Tensor;

/// Feasible set for the importance weights in the inner minimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSet {
    /// `r ≡ 1`: the IPM objective.
    Singleton1,
    /// `r ≥ 0`, `mean(r) = 1`.
    SimplexDelta,
    /// `r ≥ 0`: the conjugate (NWJ) objective.
    AllNonneg,
}

fn require_nonempty(t: &Tensor, what: &str) -> Result<(), ObjectiveError> {
    if t.is_empty() {
        return Err(ObjectiveError::Shape(format!("{what} is empty")));
    }
    Ok(())
}

/// `mean(f(r)) + mean(T_P) − mean(r ⊙ T_Q)`.
pub fn ell_f(f: FGenerator, t_p: &Tensor, t_q: &Tensor, r: &Tensor) -> Result<f64, ObjectiveError> {
    require_nonempty(t_p, "T_P")?;
    require_nonempty(t_q, "T_Q")?;
    if r.len() != t_q.len() {
        return Err(ObjectiveError::Shape(format!(
            "{} weights for {} generated samples",
            r.len(),
            t_q.len()
        )));
    }
    let mut penalty = 0.0;
    let mut weighted = 0.0;
    for (&ri, &ti) in r.data().iter().zip(t_q.data()) {
        penalty += f.eval(ri)?;
        weighted += ri * ti;
    }
    let m = t_q.len() as f64;
    Ok(penalty / m + t_p.mean() - weighted / m)
}

/// `mean(T_P) − mean(f*(T_Q))`.
pub fn estimator_nwj(f: FGenerator, t_p: &Tensor, t_q: &Tensor) -> Result<f64, ObjectiveError> {
    require_nonempty(t_p, "T_P")?;
    require_nonempty(t_q, "T_Q")?;
    let conj = t_q.data().iter().map(|&t| f.conjugate(t)).sum::<f64>() / t_q.len() as f64;
    Ok(t_p.mean() - conj)
}

/// [`estimator_nwj`], rejecting critic values where the conjugate's
/// supremum sits on the boundary `u = 0` (χ² with `t < −2`).
pub fn estimator_nwj_strict(f: FGenerator, t_p: &Tensor, t_q: &Tensor) -> Result<f64, ObjectiveError> {
    if let Some(&t) = t_q.data().iter().find(|&&t| !f.in_strict_conjugate_domain(t)) {
        return Err(ObjectiveError::Domain(format!("{t} outside the conjugate domain of {f:?}")));
    }
    estimator_nwj(f, t_p, t_q)
}

/// `mean(T_P) − mean(T_Q)`.
pub fn estimator_ipm(t_p: &Tensor, t_q: &Tensor) -> Result<f64, ObjectiveError> {
    require_nonempty(t_p, "T_P")?;
    require_nonempty(t_q, "T_Q")?;
    Ok(t_p.mean() - t_q.mean())
}

/// `mean(T_P) − log mean(e^{T_Q})`, the KL objective at its optimal weights.
pub fn estimator_dv(t_p: &Tensor, t_q: &Tensor) -> Result<f64, ObjectiveError> {
    require_nonempty(t_p, "T_P")?;
    require_nonempty(t_q, "T_Q")?;
    Ok(t_p.mean() - t_q.logsumexp() + (t_q.len() as f64).ln())
}

/// Minimizing weights of the critic objective over `set`, in closed form.
pub fn optimal_weights(f: FGenerator, set: ConstraintSet, t_q: &Tensor) -> Result<Tensor, ObjectiveError> {
    require_nonempty(t_q, "T_Q")?;
    Ok(match (set, f) {
        (ConstraintSet::Singleton1, _) => Tensor::ones(t_q.rows(), t_q.cols()),
        (ConstraintSet::SimplexDelta, FGenerator::Kl) => kl_weights(t_q, 1.0)?.into_tensor(),
        (ConstraintSet::SimplexDelta, FGenerator::ChiSq) => chi2_weights(t_q)?.into_tensor(),
        (ConstraintSet::AllNonneg, _) => t_q.map(|t| f.derivative_inverse(t)),
    })
}

/// `inf_{r ∈ set} ℓ_f(T, r)` evaluated at the closed-form minimizer.
pub fn critic_objective(
    f: FGenerator,
    set: ConstraintSet,
    t_p: &Tensor,
    t_q: &Tensor,
) -> Result<f64, ObjectiveError> {
    let r = optimal_weights(f, set, t_q)?;
    ell_f(f, t_p, t_q, &r)
}

/// Exact `Σ qᵢ f(pᵢ/qᵢ)` on a finite support.
pub fn f_divergence_discrete(p: &[f64], q: &[f64], f: FGenerator) -> Result<f64, ObjectiveError> {
    if p.len() != q.len() || p.is_empty() {
        return Err(ObjectiveError::Shape(format!("supports of size {} and {}", p.len(), q.len())));
    }
    for (name, d) in [("p", p), ("q", q)] {
        if d.iter().any(|&x| !(x >= 0.0)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(ObjectiveError::Domain(format!("{name} is not a probability vector")));
        }
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if qi == 0.0 {
            if pi > 0.0 {
                return Err(ObjectiveError::AbsoluteContinuity { index: i });
            }
            continue;
        }
        total += qi * f.eval(pi / qi)?;
    }
    Ok(total)
}
