//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls the code paths it is used to check.

#![allow(dead_code)]

use fwgan::gradcore::check::{central_difference, relative_error};
use fwgan::netkit::{sigma_estimate, Mlp, SpectralMode};
use fwgan::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

pub fn column(rng: &mut impl Rng, m: usize, lo: f64, hi: f64) -> Tensor {
    uniform(rng, m, 1, lo, hi)
}

/// Largest singular value of `w` from the eigenvalues of `wᵀw`, found by
/// cyclic Jacobi rotations.
pub fn jacobi_top_singular(w: &Tensor) -> f64 {
    let n = w.cols();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0..w.rows()).map(|k| w.get(k, i) * w.get(k, j)).sum();
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(0.0, f64::max).max(0.0).sqrt()
}

fn gauss(a: &[f64], b: &[f64], h: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-d2 / (2.0 * h * h)).exp()
}

/// Biased squared MMD as a literal triple of double loops.
pub fn naive_mmd2(x: &Tensor, y: &Tensor, h: f64) -> f64 {
    let (n, m) = (x.rows(), y.rows());
    let mut kxx = 0.0;
    for i in 0..n {
        for j in 0..n {
            kxx += gauss(x.row(i), x.row(j), h);
        }
    }
    let mut kyy = 0.0;
    for i in 0..m {
        for j in 0..m {
            kyy += gauss(y.row(i), y.row(j), h);
        }
    }
    let mut kxy = 0.0;
    for i in 0..n {
        for j in 0..m {
            kxy += gauss(x.row(i), y.row(j), h);
        }
    }
    kxx / (n * n) as f64 + kyy / (m * m) as f64 - 2.0 * kxy / (n * m) as f64
}

/// Unstabilized KDE negative log-likelihood.
pub fn naive_kde_nll(gen: &Tensor, val: &Tensor, h: f64) -> f64 {
    let d = gen.cols() as i32;
    let norm = (2.0 * std::f64::consts::PI * h * h).powf(-(d as f64) / 2.0);
    let mut total = 0.0;
    for j in 0..val.rows() {
        let dens: f64 = (0..gen.rows()).map(|i| norm * gauss(val.row(j), gen.row(i), h)).sum::<f64>()
            / gen.rows() as f64;
        total += dens.ln();
    }
    -total / val.rows() as f64
}

/// Finite-difference check of a random spectrally normalized stack with σ
/// held at its current power-iteration estimate. Returns the relative error
/// over all parameter and input gradients of `Σ c ⊙ net(x)`.
pub fn spectral_stack_check(seed: u64, generator_shaped: bool) -> f64 {
    let mut r = rng(seed);
    let depth = r.gen_range(1..=3);
    let (d_in, d_out) = if generator_shaped {
        (r.gen_range(1..=3), r.gen_range(2..=4))
    } else {
        (r.gen_range(2..=5), 1)
    };
    let mut dims = vec![d_in];
    for _ in 0..depth {
        dims.push(r.gen_range(2..=10));
    }
    dims.push(d_out);
    let mut net = Mlp::new(&dims, 0.2, Some(r.gen_range(1..=3))).unwrap();
    net.init_params(&mut r);
    for layer in &mut net.layers {
        // Scale weights away from unit norm so normalization matters.
        let s = r.gen_range(0.3..3.0);
        layer.weight = layer.weight.scale(s);
        layer.bias = uniform(&mut r, layer.bias.rows(), 1, -0.5, 0.5);
    }
    for _ in 0..3 {
        let mut t = Tape::new();
        net.bind(&mut t, SpectralMode::Update).unwrap();
    }
    let m = r.gen_range(1..=6);
    let x = uniform(&mut r, m, d_in, -2.0, 2.0);
    let c = uniform(&mut r, m, d_out, -1.0, 1.0);

    let mut tape = Tape::new();
    let bound = net.bind(&mut tape, SpectralMode::Frozen).unwrap();
    let xv = tape.leaf(x.clone());
    let out = net.forward_on(&mut tape, &bound, xv).unwrap();
    let cv = tape.constant(c.clone());
    let prod = tape.mul(out, cv).unwrap();
    let loss = tape.sum(prod).unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut analytic: Vec<f64> = Vec::new();
    for v in bound.param_vars() {
        analytic.extend_from_slice(grads.wrt(v).data());
    }
    analytic.extend_from_slice(grads.wrt(xv).data());

    // Forward by hand: W/σ with σ fixed, leaky ReLU, linear output.
    let sigmas: Vec<f64> = net
        .layers
        .iter()
        .map(|l| l.spectral.as_ref().map_or(1.0, |s| sigma_estimate(&l.weight, &s.u)))
        .collect();
    let shapes: Vec<((usize, usize), usize)> = net.layers.iter().map(|l| (l.weight.shape(), l.bias.rows())).collect();
    let slope = net.slope;
    let n_x = x.len();
    let eval = |theta: &Tensor| -> f64 {
        let th = theta.data();
        let mut off = 0;
        let mut h: Vec<Vec<f64>> = (0..m).map(|i| th[th.len() - n_x + i * d_in..][..d_in].to_vec()).collect();
        for (li, &((rows, cols), nb)) in shapes.iter().enumerate() {
            let w = &th[off..off + rows * cols];
            off += rows * cols;
            let b = &th[off..off + nb];
            off += nb;
            let last = li + 1 == shapes.len();
            h = h
                .iter()
                .map(|hi| {
                    (0..rows)
                        .map(|o| {
                            let z = (0..cols).map(|k| w[o * cols + k] / sigmas[li] * hi[k]).sum::<f64>() + b[o];
                            if last || z > 0.0 { z } else { slope * z }
                        })
                        .collect()
                })
                .collect();
        }
        h.iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v * c.get(i, j)).sum::<f64>())
            .sum()
    };
    let mut theta = Vec::new();
    for p in net.params() {
        theta.extend_from_slice(p.data());
    }
    theta.extend_from_slice(x.data());
    let theta = Tensor::column(&theta);
    let numeric = central_difference(eval, &theta, 1e-5);
    relative_error(&Tensor::column(&analytic), &numeric)
}
