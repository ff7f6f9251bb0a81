//! Finite-difference gradient checking.
//!
//! Only forward evaluations are used here, so the result is independent of
//! the tape's backward rules.

use super::Tensor;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.rows(), x.cols());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// `‖a − b‖₂ / (‖a‖₂ + ‖b‖₂)`, zero when both vanish.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let diff: f64 = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = analytic.norm_l2() + numeric.norm_l2();
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}
