//! Cross-module identities.

use opiqsdc::rates::{gain, poisson_weight, yield_n, z_error};
use opiqsdc::security::conditional_weights;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

#[test]
fn photon_sum_of_yields_equals_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let u = log_uniform(&mut rng, 1e-3, 1.0);
        let eta = log_uniform(&mut rng, 1e-6, 1.0);
        let p_d = rng.random::<f64>() * 1e-4;
        let q = gain(u, eta, p_d).unwrap();
        let sum: f64 = (0..80).map(|n| poisson_weight(n, 2.0 * u) * yield_n(n, eta, p_d)).sum();
        worst = worst.max((sum - q).abs() / q);
    }
    assert!(worst < 1e-12, "worst relative deviation {worst:e}");
}

#[test]
fn phase_error_matches_conditional_weight_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let u = log_uniform(&mut rng, 1e-3, 1.0);
        let eta = log_uniform(&mut rng, 1e-6, 1.0);
        let p_d = rng.random::<f64>() * 1e-4;
        let vacuum = rng.random::<bool>();
        let ez = z_error(u, eta, p_d, 40, vacuum).unwrap();
        let w = conditional_weights(u, eta, p_d, 40, vacuum).unwrap();
        assert_eq!(ez.to_bits(), w.w_phi_plus.to_bits(), "u={u} eta={eta} p_d={p_d}");
    }
}
