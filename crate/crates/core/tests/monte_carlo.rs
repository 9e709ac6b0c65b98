//! Statistical agreement between the pulse simulator and the analytic model.
//! Tolerances are 4 sigma so that a fixed seed passing here is not luck.

use std::f64::consts::PI;

use opiqsdc::params::{system_transmittance, MisalignmentModel};
use opiqsdc::rates::{gain, x_error, yield_n};
use opiqsdc::sim::{
    compare_with_analytic, interfere_and_detect, prepare_round, run_campaign, CampaignOptions, Detector, Estimate,
};
use opiqsdc::SystemParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn assert_close(est: &Estimate, expected: f64, what: &str) {
    let z = est.z_score(expected);
    assert!(z.abs() < 4.0, "{what}: {} vs {expected} (z = {z:.2}, n = {})", est.value, est.trials);
}

#[test]
fn decoy_gains_follow_the_gain_formula() {
    let params = SystemParams {
        p_multi: 0.5,
        u: 0.5,
        nu1: 0.3,
        nu2: 0.1,
        p_d: 1e-3,
        ..SystemParams::default()
    };
    let d = 10.0;
    let report = run_campaign(&params, d, 3_000_000, 11, 4, CampaignOptions::default()).unwrap();
    let eta = system_transmittance(&params, d).unwrap();
    assert_eq!(report.decoys.len(), 3);
    for decoy in &report.decoys {
        let est = decoy.gain.expect("decoy rounds were kept");
        assert!(est.trials > 10_000);
        assert_close(&est, gain(decoy.intensity, eta, params.p_d).unwrap(), &format!("{:?}", decoy.level));
    }
}

#[test]
fn tagged_yields_follow_yield_n() {
    let params = SystemParams {
        u: 0.5,
        p_d: 1e-3,
        ..SystemParams::default()
    };
    let d = 20.0;
    let options = CampaignOptions { truth_access: true };
    let report = run_campaign(&params, d, 1_000_000, 12, 4, options).unwrap();
    let eta = system_transmittance(&params, d).unwrap();
    let yields = report.yields.expect("truth access tabulates yields");
    for y in yields.iter().take(5) {
        let est = y.estimate.expect("low photon numbers are populated");
        assert_close(&est, yield_n(y.photons, eta, params.p_d), &format!("Y_{}", y.photons));
    }
    // the tagged rounds add up to all coding rounds
    let tagged: u64 = yields.iter().filter_map(|y| y.estimate).map(|e| e.trials).sum();
    assert_eq!(tagged, report.coding_rounds);
}

#[test]
fn qber_tracks_the_misalignment() {
    for (model, delta) in [
        (MisalignmentModel::PhaseRadians, 0.3),
        (MisalignmentModel::Probability, 0.04),
    ] {
        let params = SystemParams {
            misalignment_model: model,
            delta_mis: delta,
            ..SystemParams::default()
        };
        let report = run_campaign(&params, 30.0, 2_000_000, 13, 4, CampaignOptions::default()).unwrap();
        let cmp = compare_with_analytic(&report, &params).unwrap();
        let eta = system_transmittance(&params, 30.0).unwrap();
        let expected = x_error(params.u, eta, params.p_d, params.misalignment()).unwrap();
        assert_eq!(cmp.x_error_analytic, expected);
        assert!(cmp.x_error_z.unwrap().abs() < 4.0, "{model:?}: z = {:?}", cmp.x_error_z);
        assert!(cmp.gain_z.unwrap().abs() < 4.0);
    }
}

#[test]
fn global_phase_shift_leaves_click_statistics_unchanged() {
    let params = SystemParams::default();
    let detector = Detector::new(&params, 0.0).unwrap();
    let n = 400_000;
    let mut counts = [[0u64; 2]; 2];
    for (shifted, row) in counts.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(14 + shifted as u64);
        for _ in 0..n {
            let mut r = prepare_round(&params, &mut rng, None);
            if shifted == 1 {
                r.alice.phase += PI;
                r.bob.phase += PI;
            }
            interfere_and_detect(&mut r, &detector, &mut rng);
            row[0] += u64::from(r.click_c);
            row[1] += u64::from(r.click_d);
        }
    }
    for (port, (&a, &b)) in counts[0].iter().zip(&counts[1]).enumerate() {
        let (a, b) = (a as f64, b as f64);
        let sigma = (a + b).sqrt();
        assert!((a - b).abs() < 4.0 * sigma, "port {port}: {a} vs {b}");
    }
}

#[test]
fn shard_count_does_not_bias_estimates() {
    let params = SystemParams::default();
    let one = run_campaign(&params, 50.0, 1_000_000, 15, 1, CampaignOptions::default()).unwrap();
    let seven = run_campaign(&params, 50.0, 1_000_000, 15, 7, CampaignOptions::default()).unwrap();
    assert_eq!(one.n_pulses, seven.n_pulses);
    assert_ne!(one, seven, "different shard layouts use different streams");
    let (a, b) = (one.gain.unwrap(), seven.gain.unwrap());
    let sigma = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    assert!((a.value - b.value).abs() < 4.0 * sigma);
}
