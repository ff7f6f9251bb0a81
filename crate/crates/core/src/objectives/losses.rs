//! Training losses recorded on a tape: hinge critic/generator losses with
//! optional KL importance weights, and the conjugate-form KL baseline.

use serde::{Deserialize, Serialize};

use super::ObjectiveError;
use crate::gradcore::{GradError, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HingeVariant {
    /// Unweighted hinge losses.
    Wgan,
    /// Generated-sample scores multiplied by KL importance weights.
    KlWgan,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightOptions {
    /// Weights are computed from `T_Q / temp` and applied to the raw `T_Q`.
    pub temp: f64,
    /// Stop gradients through the weights.
    pub detach: bool,
    /// Replace the weights by ones while keeping the weighted code path.
    pub force_unit: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions {
            temp: 1.0,
            detach: false,
            force_unit: false,
        }
    }
}

/// KL importance weights of a column node, differentiable through
/// `exp(v − logsumexp(v) + ln m)` with `v = T/temp`.
pub fn kl_weights_on_tape(tape: &mut Tape, t_q: Var, temp: f64) -> Result<Var, ObjectiveError> {
    if !(temp > 0.0) {
        return Err(ObjectiveError::Domain(format!("temperature {temp} must be > 0")));
    }
    let (m, cols) = tape.value(t_q).shape();
    let v = tape.scale(t_q, 1.0 / temp);
    let lse = tape.logsumexp(v)?;
    let log_norm = tape.add_scalar(lse, -(m as f64).ln());
    let norm = tape.broadcast(log_norm, m, cols)?;
    let shifted = tape.sub(v, norm)?;
    Ok(tape.exp(shifted))
}

/// `w ⊙ T_Q` with `w` per `variant` and `opts`.
pub fn weighted_fake_scores(
    tape: &mut Tape,
    variant: HingeVariant,
    t_q: Var,
    opts: WeightOptions,
) -> Result<Var, ObjectiveError> {
    match variant {
        HingeVariant::Wgan => Ok(t_q),
        HingeVariant::KlWgan => {
            let w = if opts.force_unit {
                let (r, c) = tape.value(t_q).shape();
                tape.constant(Tensor::ones(r, c))
            } else {
                let w = kl_weights_on_tape(tape, t_q, opts.temp)?;
                if opts.detach {
                    tape.detach(w)
                } else {
                    w
                }
            };
            Ok(tape.mul(t_q, w)?)
        }
    }
}

/// `(mean(relu(1 − T_P)), mean(relu(1 + w ⊙ T_Q)))`.
pub fn critic_loss(
    tape: &mut Tape,
    variant: HingeVariant,
    t_p: Var,
    t_q: Var,
    opts: WeightOptions,
) -> Result<(Var, Var), ObjectiveError> {
    let neg = tape.scale(t_p, -1.0);
    let margin = tape.add_scalar(neg, 1.0);
    let hinge = tape.relu(margin);
    let loss_real = tape.mean(hinge)?;

    let fake = weighted_fake_scores(tape, variant, t_q, opts)?;
    let margin = tape.add_scalar(fake, 1.0);
    let hinge = tape.relu(margin);
    let loss_fake = tape.mean(hinge)?;
    Ok((loss_real, loss_fake))
}

/// `−mean(w ⊙ T_Q)`.
pub fn gen_loss(
    tape: &mut Tape,
    variant: HingeVariant,
    t_q: Var,
    opts: WeightOptions,
) -> Result<Var, ObjectiveError> {
    let fake = weighted_fake_scores(tape, variant, t_q, opts)?;
    let mean = tape.mean(fake)?;
    Ok(tape.scale(mean, -1.0))
}

/// `−(mean(T_P) − mean(e^{T_Q − 1}))`, the negated KL conjugate bound.
pub fn fgan_kl_critic_loss(tape: &mut Tape, t_p: Var, t_q: Var) -> Result<Var, GradError> {
    let real = tape.mean(t_p)?;
    let conj = kl_conjugate_mean(tape, t_q)?;
    let bound = tape.sub(real, conj)?;
    Ok(tape.scale(bound, -1.0))
}

/// `−mean(e^{T_Q − 1})`.
pub fn fgan_kl_gen_loss(tape: &mut Tape, t_q: Var) -> Result<Var, GradError> {
    let conj = kl_conjugate_mean(tape, t_q)?;
    Ok(tape.scale(conj, -1.0))
}

fn kl_conjugate_mean(tape: &mut Tape, t_q: Var) -> Result<Var, GradError> {
    let shifted = tape.add_scalar(t_q, -1.0);
    let e = tape.exp(shifted);
    tape.mean(e)
}

/// Values of [`critic_loss`] for plain critic outputs.
pub fn critic_loss_values(
    variant: HingeVariant,
    t_p: &Tensor,
    t_q: &Tensor,
    temp: f64,
) -> Result<(f64, f64), ObjectiveError> {
    let mut tape = Tape::new();
    let p = tape.constant(t_p.clone());
    let q = tape.constant(t_q.clone());
    let opts = WeightOptions { temp, ..Default::default() };
    let (real, fake) = critic_loss(&mut tape, variant, p, q, opts)?;
    Ok((tape.value(real).item(), tape.value(fake).item()))
}

/// Value of [`gen_loss`] for plain critic outputs.
pub fn gen_loss_value(variant: HingeVariant, t_q: &Tensor, temp: f64) -> Result<f64, ObjectiveError> {
    let mut tape = Tape::new();
    let q = tape.constant(t_q.clone());
    let opts = WeightOptions { temp, ..Default::default() };
    let loss = gen_loss(&mut tape, variant, q, opts)?;
    Ok(tape.value(loss).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::check::{central_difference, relative_error};
    use crate::objectives::weights::kl_weights;

    fn col(v: &[f64]) -> Tensor {
        Tensor::column(v)
    }

    #[test]
    fn hinge_saturation() {
        let (r, f) = critic_loss_values(HingeVariant::Wgan, &col(&[1.0, 3.0]), &col(&[-1.0, -2.0]), 1.0).unwrap();
        assert_eq!((r, f), (0.0, 0.0));
    }

    #[test]
    fn constant_critic_weights_collapse() {
        let tp = col(&[0.2, -0.4]);
        let tq = col(&[0.3; 4]);
        let w = critic_loss_values(HingeVariant::Wgan, &tp, &tq, 1.0).unwrap();
        let k = critic_loss_values(HingeVariant::KlWgan, &tp, &tq, 1.0).unwrap();
        assert_eq!(w, k);
        for c in [-2.0, 0.0, 5.0] {
            let tq = col(&[c; 3]);
            assert_eq!(gen_loss_value(HingeVariant::Wgan, &tq, 1.0).unwrap(), -c);
            assert!((gen_loss_value(HingeVariant::KlWgan, &tq, 1.0).unwrap() + c).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_losses() {
        let (l2, l8) = (2f64.ln(), 8f64.ln());
        let tq = col(&[l2, l2, l8]);
        let (_, fake) = critic_loss_values(HingeVariant::KlWgan, &col(&[0.0]), &tq, 1.0).unwrap();
        let want = ((1.0 + 0.5 * l2) * 2.0 + (1.0 + 2.0 * l8)) / 3.0;
        assert!((fake - want).abs() < 1e-12);
        assert!((fake - 2.6174).abs() < 1e-4);
        let g = gen_loss_value(HingeVariant::KlWgan, &tq, 1.0).unwrap();
        assert!((g + (l2 + 2.0 * l8) / 3.0).abs() < 1e-12);
        assert!((g + 1.6173).abs() < 1e-4);
    }

    #[test]
    fn kl_weighting_favors_larger_scores() {
        let tq = col(&[0.0, 1.0]);
        let kl = gen_loss_value(HingeVariant::KlWgan, &tq, 1.0).unwrap();
        let w = gen_loss_value(HingeVariant::Wgan, &tq, 1.0).unwrap();
        assert!(kl < w);
    }

    #[test]
    fn tape_weights_match_closed_form() {
        let tq = col(&[0.4, -1.3, 2.2, 0.0]);
        for temp in [0.5, 1.0, 3.0] {
            let mut tape = Tape::new();
            let q = tape.constant(tq.clone());
            let w = kl_weights_on_tape(&mut tape, q, temp).unwrap();
            let closed = kl_weights(&tq, temp).unwrap();
            let d = tape.value(w).zip_map(closed.as_tensor(), "t", |a, b| a - b).unwrap();
            assert!(d.norm_inf() < 1e-12);
        }
    }

    #[test]
    fn weighted_loss_gradients_flow_through_weights() {
        let tq = col(&[0.4, -1.3, 2.2, 0.0, -0.5]);
        let tp = col(&[0.1, 0.9]);
        for detach in [false, true] {
            let opts = WeightOptions { temp: 1.5, detach, force_unit: false };
            let mut tape = Tape::new();
            let p = tape.constant(tp.clone());
            let q = tape.leaf(tq.clone());
            let (_, fake) = critic_loss(&mut tape, HingeVariant::KlWgan, p, q, opts).unwrap();
            let g = tape.backward(fake).unwrap().wrt(q);
            let numeric = central_difference(
                |x| {
                    if detach {
                        // weights held at their value at `tq`
                        let w = kl_weights(&tq, 1.5).unwrap();
                        x.data()
                            .iter()
                            .zip(w.data())
                            .map(|(t, w)| (1.0 + t * w).max(0.0))
                            .sum::<f64>()
                            / x.len() as f64
                    } else {
                        critic_loss_values(HingeVariant::KlWgan, &tp, x, 1.5).unwrap().1
                    }
                },
                &tq,
                1e-6,
            );
            assert!(relative_error(&g, &numeric) < 1e-6, "detach={detach}");
        }
    }

    #[test]
    fn fgan_losses() {
        let mut tape = Tape::new();
        let p = tape.constant(col(&[2.0]));
        let q = tape.constant(col(&[0.0]));
        let c = fgan_kl_critic_loss(&mut tape, p, q).unwrap();
        assert!((tape.value(c).item() + 2.0 - (-1f64).exp()).abs() < 1e-12);
        let g = fgan_kl_gen_loss(&mut tape, q).unwrap();
        assert!((tape.value(g).item() + (-1f64).exp()).abs() < 1e-12);
    }
}
