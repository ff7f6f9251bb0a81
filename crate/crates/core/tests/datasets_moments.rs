use fwgan::datasets::{sample_synthetic, standardize_split, synthetic_moments, SyntheticName, SyntheticSpec};
use fwgan::Tensor;

const N: usize = 100_000;
const SEED_BASE: u64 = 200;

/// Mean of `f` over rows and its Monte-Carlo standard error.
fn mean_and_se(x: &Tensor, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let vals: Vec<f64> = (0..x.rows()).map(|i| f(x.row(i))).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn samplers_match_analytic_moments_within_three_sigma() {
    for (k, name) in SyntheticName::ALL.into_iter().enumerate() {
        let x = sample_synthetic(&SyntheticSpec { name, n_samples: N, seed: SEED_BASE + k as u64 }).unwrap();
        assert_eq!(x.shape(), (N, 2));
        let (mu, cov) = synthetic_moments(name);
        for d in 0..2 {
            let (m, se) = mean_and_se(&x, |r| r[d]);
            assert!((m - mu[d]).abs() <= 3.0 * se, "{name} mean[{d}] {m} vs {} (se {se})", mu[d]);
        }
        // Centered at the analytic mean, E[(a − μa)(b − μb)] is the covariance.
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let (c, se) = mean_and_se(&x, |r| (r[a] - mu[a]) * (r[b] - mu[b]));
            assert!((c - cov[a][b]).abs() <= 3.0 * se, "{name} cov[{a}][{b}] {c} vs {} (se {se})", cov[a][b]);
        }
    }
}

#[test]
fn mog_mean_is_near_origin() {
    let x = sample_synthetic(&SyntheticSpec { name: SyntheticName::Mog, n_samples: N, seed: 0 }).unwrap();
    for d in 0..2 {
        let m = (0..N).map(|i| x.get(i, d)).sum::<f64>() / N as f64;
        assert!(m.abs() < 0.05);
    }
}

#[test]
fn split_is_deterministic_per_seed() {
    let data = Tensor::new(50, 3, (0..150).map(|i| (i as f64).sin()).collect()).unwrap();
    let a = standardize_split(&data, 0.2, 7).unwrap();
    let b = standardize_split(&data, 0.2, 7).unwrap();
    assert_eq!(a.train_idx, b.train_idx);
    assert_eq!(a.valid_idx, b.valid_idx);
    let c = standardize_split(&data, 0.2, 8).unwrap();
    assert_ne!(a.valid_idx, c.valid_idx);
    let mut all: Vec<usize> = a.train_idx.iter().chain(&a.valid_idx).copied().collect();
    all.sort();
    assert_eq!(all, (0..50).collect::<Vec<_>>());
}
