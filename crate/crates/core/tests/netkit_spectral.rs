mod common;

use common::{jacobi_top_singular, rng, spectral_stack_check, uniform};
use fwgan::netkit::{power_iterate, spectral_normalize, SpectralState};
use fwgan::Tensor;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn power_iteration_matches_jacobi_svd() {
    let mut r = rng(11);
    for _ in 0..20 {
        let w = uniform(&mut r, 5, 5, -1.0, 1.0);
        let mut u = SpectralState::new(5, 50).u;
        let sigma = power_iterate(&w, &mut u, 50);
        let exact = jacobi_top_singular(&w);
        assert!((sigma - exact).abs() < 1e-4 * exact.max(1.0), "{sigma} vs {exact}");
    }
}

#[test]
fn jacobi_oracle_on_known_matrix() {
    let w = Tensor::from_rows(&[[3.0, 0.0], [4.0, 5.0]]).unwrap();
    // Singular values of [[3,0],[4,5]] are 3√5 and √5.
    assert!((jacobi_top_singular(&w) - 3.0 * 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn normalized_weight_is_contractive() {
    let mut r = rng(12);
    for trial in 0..10 {
        let (out, inp) = (r.gen_range(2..12), r.gen_range(2..12));
        let w = uniform(&mut r, out, inp, -2.0, 2.0);
        let mut state = SpectralState::new(out, 1);
        // Converge the persisted vector as training would over many steps.
        let mut w_hat = w.clone();
        for _ in 0..50 {
            w_hat = spectral_normalize(&w, &mut state).0;
        }
        for _ in 0..100 {
            let v: Vec<f64> = (0..inp).map(|_| r.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let v = Tensor::column(&v.iter().map(|x| x / norm).collect::<Vec<_>>());
            let y = w_hat.matmul(&v).unwrap();
            assert!(y.norm_l2() <= 1.0 + 1e-3, "trial {trial}: {}", y.norm_l2());
        }
    }
}

#[test]
fn spectral_stacks_pass_gradient_check() {
    for seed in 0..20 {
        let err = spectral_stack_check(seed, seed % 2 == 1);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}
