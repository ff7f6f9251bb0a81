use serde::{Deserialize, Serialize};

use super::ObjectiveError;

/// Convex generator `f` with `f(1) = 0`, bundled with `f′`, `(f′)⁻¹`, and the
/// Fenchel conjugate `f*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FGenerator {
    /// `f(u) = u ln u`, `f*(t) = e^{t−1}`.
    Kl,
    /// `f(u) = (u − 1)²`, `f*(t) = t + t²/4` for `t ≥ −2`, else `−1`.
    ChiSq,
}

impl FGenerator {
    pub const ALL: [FGenerator; 2] = [FGenerator::Kl, FGenerator::ChiSq];

    pub fn eval(self, u: f64) -> Result<f64, ObjectiveError> {
        if !(u >= 0.0) {
            return Err(ObjectiveError::Domain(format!("f({u}) needs u ≥ 0")));
        }
        Ok(match self {
            FGenerator::Kl if u == 0.0 => 0.0,
            FGenerator::Kl => u * u.ln(),
            FGenerator::ChiSq => (u - 1.0) * (u - 1.0),
        })
    }

    /// `f′(u)`; `−∞` for KL at `u = 0`.
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            FGenerator::Kl => u.ln() + 1.0,
            FGenerator::ChiSq => 2.0 * (u - 1.0),
        }
    }

    /// `(f′)⁻¹(t)`, clamped to the domain `u ≥ 0`.
    pub fn derivative_inverse(self, t: f64) -> f64 {
        match self {
            FGenerator::Kl => (t - 1.0).exp(),
            FGenerator::ChiSq => (t / 2.0 + 1.0).max(0.0),
        }
    }

    pub fn conjugate(self, t: f64) -> f64 {
        match self {
            FGenerator::Kl => (t - 1.0).exp(),
            FGenerator::ChiSq if t >= -2.0 => t + t * t / 4.0,
            FGenerator::ChiSq => -1.0,
        }
    }

    /// Where the supremum in `f*(t)` is attained at an interior `u > 0`.
    pub fn in_strict_conjugate_domain(self, t: f64) -> bool {
        match self {
            FGenerator::Kl => t.is_finite(),
            FGenerator::ChiSq => t >= -2.0,
        }
    }
}
