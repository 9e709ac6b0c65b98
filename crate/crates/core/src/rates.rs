//! Closed-form secrecy rates.
//!
//! OPI-QSDC per-distance quantities follow the symmetric two-arm channel
//! model: gain `Q`, X-basis error `E^X` (dark counts plus misalignment),
//! phase error `E^Z` from the even-photon series, and
//! `R = q·Q_branch·[1 - f·h(E^X) - h(E^Z)]` summed over the two one-click
//! branches. DL04 and MDI-QSDC rates implement the INCUM comparison formulas.

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_probability, Error, Result};
use crate::params::{
    channel_transmittance, system_transmittance, BranchAccounting, MdiTransmittance,
    SystemParams,
};

/// Relative tail allowed when truncating photon-number series.
pub const SERIES_TAIL_TOLERANCE: f64 = 1e-12;

/// Per-distance OPI-QSDC quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    /// Total Alice–Bob distance, km.
    pub d: f64,
    /// Per-arm transmittance including the detector.
    pub eta: f64,
    /// Mode matching rate.
    pub q: f64,
    /// One-click gain.
    pub gain: f64,
    pub ex: f64,
    pub ez: f64,
    /// D0-only branch rate before clipping.
    pub rc: f64,
    /// D1-only branch rate before clipping.
    pub rd: f64,
    /// `max(rc, 0) + max(rd, 0)`, bits per pulse pair.
    pub r: f64,
}

/// Idealised rates for the three protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealRates {
    pub opi: f64,
    pub dl04: f64,
    pub mdi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRates {
    /// `None` where the bound diverges (`eta_c = 1`).
    pub plob: Option<f64>,
    pub opi_ideal: f64,
    pub dl04_ideal: f64,
    pub mdi_ideal: f64,
    pub dl04: f64,
    pub mdi: f64,
}

/// `h(x) = -x log2 x - (1-x) log2 (1-x)` with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("x", x)?;
    Ok(entropy(x))
}

pub(crate) fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// Yield of an `n`-photon state, `1 - (1 - 2 p_d)(1 - eta)^n`.
///
/// Evaluated as `-expm1(n ln(1 - eta) + ln(1 - 2 p_d))` so that small
/// yields keep full relative precision.
pub fn yield_n(n: u32, eta: f64, p_d: f64) -> f64 {
    if n == 0 {
        return 2.0 * p_d;
    }
    if eta >= 1.0 || 2.0 * p_d >= 1.0 {
        return 1.0 - (1.0 - 2.0 * p_d) * (1.0 - eta).powi(n as i32);
    }
    -(n as f64 * (-eta).ln_1p() + (-2.0 * p_d).ln_1p()).exp_m1()
}

/// One-click gain `1 - e^{-2 eta u} + 2 p_d e^{-2 eta u}`.
pub fn gain(u: f64, eta: f64, p_d: f64) -> Result<f64> {
    check_inputs(u, eta, p_d)?;
    let x = -2.0 * eta * u;
    Ok(-x.exp_m1() + 2.0 * p_d * x.exp())
}

fn check_inputs(u: f64, eta: f64, p_d: f64) -> Result<()> {
    check_non_negative("u", u)?;
    check_probability("eta", eta)?;
    check_probability("p_d", p_d)?;
    Ok(())
}

/// Poisson probability mass `e^{-mean} mean^n / n!`.
pub fn poisson_weight(n: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let log_factorial: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * mean.ln() - mean - log_factorial).exp()
}

/// `P(0), ..., P(len - 1)` at the given mean, by forward recursion.
pub(crate) fn poisson_table(mean: f64, len: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(len);
    let mut p = (-mean).exp();
    for k in 0..len {
        if k > 0 {
            p *= mean / k as f64;
        }
        table.push(p);
    }
    table
}

/// Bound on the omitted tail of `sum_n sqrt(P(2n))` for `n > n_max`,
/// relative to `partial`.
pub(crate) fn series_tail(mean: f64, n_max: usize, partial: f64) -> f64 {
    let next = 2 * (n_max + 1);
    let term = poisson_weight(next as u32, mean).sqrt();
    // successive sqrt-weights shrink by mean / sqrt((k+1)(k+2))
    let ratio = mean / (((next + 1) * (next + 2)) as f64).sqrt();
    let bound = if ratio < 1.0 {
        term / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    if bound == 0.0 {
        0.0
    } else if partial > 0.0 {
        bound / partial
    } else {
        f64::INFINITY
    }
}

/// X-basis error `(e^{-2 eta u} / Q) [p_d + 2 eta u s]`, where `s` stands for
/// `sin^2(delta/2)`.
pub fn x_error(u: f64, eta: f64, p_d: f64, misalignment: f64) -> Result<f64> {
    check_probability("misalignment", misalignment)?;
    let q = gain(u, eta, p_d)?;
    if q <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let e = (-2.0 * eta * u).exp();
    Ok(e / q * (p_d + 2.0 * eta * u * misalignment))
}

/// Phase error `(sum_n sqrt(P(2n) Y_2n))^2 / Q`.
///
/// The sum runs over `n = 0..=n_max`, or `1..=n_max` when the vacuum term is
/// excluded.
pub fn z_error(u: f64, eta: f64, p_d: f64, n_max: usize, include_vacuum: bool) -> Result<f64> {
    let q = gain(u, eta, p_d)?;
    if q <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let mean = 2.0 * u;
    let weights = poisson_table(mean, 2 * n_max + 2);
    let start = usize::from(!include_vacuum);
    let sum: f64 = (start..=n_max)
        .map(|n| (weights[2 * n] * yield_n(2 * n as u32, eta, p_d)).sqrt())
        .sum();
    let tail = series_tail(mean, n_max, weights.iter().step_by(2).map(|w| w.sqrt()).sum());
    if tail > SERIES_TAIL_TOLERANCE {
        return Err(Error::TruncationNotConverged { n_max, tail });
    }
    Ok(sum * sum / q)
}

/// Full OPI-QSDC breakdown at total distance `d`.
pub fn secrecy_rate(params: &SystemParams, d: f64) -> Result<RateBreakdown> {
    params.validate()?;
    let eta = system_transmittance(params, d)?;
    let q = params.mode_match_rate();
    let gain = gain(params.u, eta, params.p_d)?;
    let ex = x_error(params.u, eta, params.p_d, params.misalignment())?;
    let ez = z_error(params.u, eta, params.p_d, params.n_max, params.include_vacuum)?;
    let branch_gain = match params.branch_accounting {
        BranchAccounting::SharedGain => gain / 2.0,
        BranchAccounting::PerBranch => gain,
    };
    let rc = q * branch_gain * (1.0 - params.f * entropy(ex) - entropy(ez));
    // D1-only events mirror D0-only events under the symmetric channel model
    let rd = rc;
    Ok(RateBreakdown {
        d,
        eta,
        q,
        gain,
        ex,
        ez,
        rc,
        rd,
        r: rc.max(0.0) + rd.max(0.0),
    })
}

/// Repeaterless bound `-log2(1 - eta_c)`.
pub fn plob_bound(eta_c: f64) -> Result<f64> {
    check_probability("eta_c", eta_c)?;
    if eta_c >= 1.0 {
        return Err(Error::InfiniteBound);
    }
    Ok(-(-eta_c).ln_1p() / std::f64::consts::LN_2)
}

/// `(eta_d sqrt(eta_c), eta_d eta_c^2, (eta_d eta_c)^2)`.
pub fn ideal_rates(eta_d: f64, eta_c: f64) -> IdealRates {
    IdealRates {
        opi: eta_d * eta_c.sqrt(),
        dl04: eta_d * eta_c * eta_c,
        mdi: (eta_d * eta_c).powi(2),
    }
}

/// DL04 with INCUM: `max(Q_B [1 - h(e) - h(2 eps)], 0)`.
pub fn dl04_rate(params: &SystemParams, d: f64) -> Result<f64> {
    let eta_c = channel_transmittance(params.zeta, d)?;
    let (eta_d, p_d) = (params.eta_d, params.p_d);
    let gain_a = eta_d * eta_c + p_d;
    let gain_b = eta_d * eta_c * eta_c + p_d;
    let qber = (params.e_d * eta_d * eta_c * eta_c + params.e_0 * p_d) / gain_b;
    let eps = (params.e_d * eta_d * eta_c + params.e_0 * p_d) / gain_a;
    let rate = gain_b * (1.0 - entropy(qber) - entropy((2.0 * eps).min(1.0)));
    Ok(rate.max(0.0))
}

/// Intermediate quantities of the MDI-QSDC rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdiTerms {
    /// Transmittance substituted into the formulas.
    pub t: f64,
    pub p_hv: f64,
    pub p_hh: f64,
    /// `P12^{-+}` family (also `P12^{+-}`, `P34^{-+}`, `P34^{+-}`).
    pub p12_mp: f64,
    /// `P14^{-+}` family (also `P14^{+-}`, `P23^{-+}`, `P23^{+-}`).
    pub p14_mp: f64,
    /// `P12^{++}` family (also `P34^{++}`, `P12^{--}`, `P34^{--}`).
    pub p12_pp: f64,
    /// `P14^{++}` family (also `P23^{++}`, `P14^{--}`, `P23^{--}`).
    pub p14_pp: f64,
    pub g_x: f64,
    pub g_z: f64,
    pub q_c1: f64,
    pub q_c2: f64,
    pub gain: f64,
    pub qber: f64,
    pub eps_hat: f64,
    pub eps_y: f64,
    /// Unclipped `Q [1 - h(e) - h(eps_y)]`.
    pub capacity: f64,
}

pub fn mdi_terms(params: &SystemParams, d: f64) -> Result<MdiTerms> {
    let eta_c = channel_transmittance(params.zeta, d)?;
    let t = match params.mdi_transmittance {
        MdiTransmittance::Effective => params.eta_d * eta_c,
        MdiTransmittance::Raw => eta_c,
    };
    let p_d = params.p_d;
    let dark = (1.0 - p_d).powi(2);
    let common = (1.0 - t).powi(2) * p_d * p_d * dark + (1.0 - t) * t * p_d * dark;
    let p_hv = common + 0.25 * t * t * dark;
    let p_hh = common + 0.5 * t * t * p_d * dark;
    let p12_mp = common + 0.25 * t * t * p_d * dark;
    let p14_mp = common + 0.25 * t * t * (p_d + 1.0) * dark;
    let p12_pp = common + 0.25 * t * t * (p_d + 1.0) * dark;
    let p14_pp = common + 0.25 * t * t * p_d * dark;

    let g_x = p12_mp + p14_mp + p12_pp + p14_pp;
    let g_y = g_x;
    let g_z = 2.0 * (p_hv + p_hh);
    let q_c1 = t / 3.0 * (g_x + g_z);
    let q_c2 = t + (1.0 - t) * p_d;
    let gain = q_c1 * q_c2;

    // e_edt is taken equal to the intrinsic detector error e_d
    let qber = (params.e_0 * p_d + params.e_d * t) / q_c2;
    // (1,4),(2,3) with ++ and --; (1,2),(3,4) with +- and -+
    let numerator = 4.0 * p14_pp + 4.0 * p12_mp;
    let eps_hat = if g_y > 0.0 { numerator / (4.0 * g_y) } else { 0.0 };
    let eps_y = params.e_d * (1.0 - 2.0 * eps_hat) + eps_hat;
    let capacity = gain * (1.0 - entropy(qber.min(1.0)) - entropy(eps_y.min(1.0)));
    Ok(MdiTerms {
        t,
        p_hv,
        p_hh,
        p12_mp,
        p14_mp,
        p12_pp,
        p14_pp,
        g_x,
        g_z,
        q_c1,
        q_c2,
        gain,
        qber,
        eps_hat,
        eps_y,
        capacity,
    })
}

/// MDI-QSDC with INCUM, clipped at zero.
pub fn mdi_rate(params: &SystemParams, d: f64) -> Result<f64> {
    Ok(mdi_terms(params, d)?.capacity.max(0.0))
}

pub fn comparison_rates(params: &SystemParams, d: f64) -> Result<ComparisonRates> {
    let eta_c = channel_transmittance(params.zeta, d)?;
    let ideal = ideal_rates(params.eta_d, eta_c);
    let plob = match plob_bound(eta_c) {
        Ok(v) => Some(v),
        Err(Error::InfiniteBound) => None,
        Err(e) => return Err(e),
    };
    Ok(ComparisonRates {
        plob,
        opi_ideal: ideal.opi,
        dl04_ideal: ideal.dl04,
        mdi_ideal: ideal.mdi,
        dl04: dl04_rate(params, d)?,
        mdi: mdi_rate(params, d)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MisalignmentModel;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_124_459_132_9).abs() < 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn yield_examples() {
        assert!(rel(yield_n(0, 0.3, 8e-8), 1.6e-7) < 1e-9);
        assert!((yield_n(1, 0.15, 0.0) - 0.15).abs() < 1e-15);
        assert!((yield_n(2, 0.15, 8e-8) - 0.277_500_115_6).abs() < 1e-13);
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain(0.046, 0.0, 0.0).unwrap(), 0.0);
        assert!(rel(gain(0.046, 0.15, 8e-8).unwrap(), 1.370_537_431_218_513_6e-2) < 1e-12);
        assert!((gain(1e6, 0.15, 8e-8).unwrap() - 1.0).abs() < 1e-15);
        assert!(gain(0.046, 1.5, 0.0).is_err());
    }

    #[test]
    fn poisson_examples() {
        assert!(rel(poisson_weight(0, 0.092), 0.912_105_149_545_090_4) < 1e-14);
        assert_eq!(poisson_weight(0, 0.0), 1.0);
        assert_eq!(poisson_weight(3, 0.0), 0.0);
        assert!(poisson_weight(1, 1e-300) < 1e-299);
        let total: f64 = (0..=60).map(|n| poisson_weight(n, 0.092)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_table_matches_direct_weights() {
        let table = poisson_table(0.7, 30);
        for (n, p) in table.iter().enumerate() {
            assert!(rel(*p, poisson_weight(n as u32, 0.7)) < 1e-12);
        }
    }

    #[test]
    fn x_error_examples() {
        assert_eq!(x_error(0.046, 0.15, 0.0, 0.0).unwrap(), 0.0);
        let ex = x_error(0.046, 0.15, 8e-8, 0.015).unwrap();
        assert!(rel(ex, 1.490_232_365_157_321_3e-2) < 1e-12);
        assert!(x_error(1e4, 0.15, 8e-8, 0.015).unwrap() < 1e-100);
        assert_eq!(x_error(0.046, 0.0, 0.0, 0.0), Err(Error::DegenerateChannel));
    }

    #[test]
    fn z_error_examples() {
        // 40-digit series reference
        let with_vac = z_error(0.046, 0.15, 8e-8, 40, true).unwrap();
        assert!(rel(with_vac, 8.570_904_727_737_58e-2) < 1e-11);
        let without = z_error(0.046, 0.15, 8e-8, 40, false).unwrap();
        assert!(rel(without, 8.380_904_900_708_0e-2) < 1e-11);
        let a = z_error(0.046, 0.15, 0.0, 40, true).unwrap();
        let b = z_error(0.046, 0.15, 0.0, 40, false).unwrap();
        assert_eq!(a, b);
        assert!(z_error(1e-9, 0.15, 0.0, 40, true).unwrap() < 1e-8);
    }

    #[test]
    fn z_error_flags_short_truncation() {
        let err = z_error(1.0, 0.15, 8e-8, 2, false).unwrap_err();
        assert!(matches!(err, Error::TruncationNotConverged { n_max: 2, .. }));
        assert!(z_error(1.0, 0.15, 8e-8, 40, false).is_ok());
    }

    #[test]
    fn secrecy_rate_reference_point() {
        let b = secrecy_rate(&SystemParams::default(), 0.0).unwrap();
        assert!(rel(b.r, 7.837_383_192_623_173e-3) < 1e-10);
        assert_eq!(b.r, b.rc.max(0.0) + b.rd.max(0.0));
        let per_branch = SystemParams {
            branch_accounting: BranchAccounting::PerBranch,
            ..SystemParams::default()
        };
        let b2 = secrecy_rate(&per_branch, 0.0).unwrap();
        assert!(rel(b2.r, 2.0 * b.r) < 1e-14);
    }

    #[test]
    fn huge_coding_penalty_kills_rate() {
        let p = SystemParams {
            f: 1e9,
            ..SystemParams::default()
        };
        assert_eq!(secrecy_rate(&p, 0.0).unwrap().r, 0.0);
    }

    #[test]
    fn noiseless_limit() {
        for accounting in [BranchAccounting::SharedGain, BranchAccounting::PerBranch] {
            let p = SystemParams {
                p_d: 0.0,
                delta_mis: 0.0,
                u: 1e-7,
                nu1: 1e-8,
                nu2: 1e-9,
                branch_accounting: accounting,
                ..SystemParams::default()
            };
            let b = secrecy_rate(&p, 0.0).unwrap();
            assert_eq!(b.ex, 0.0);
            let branch = match accounting {
                BranchAccounting::SharedGain => b.gain / 2.0,
                BranchAccounting::PerBranch => b.gain,
            };
            assert!(rel(b.rc, b.q * branch) < 1e-5, "{b:?}");
        }
    }

    #[test]
    fn plob_examples() {
        assert!((plob_bound(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(rel(plob_bound(0.99).unwrap(), 6.643_856_189_774_725) < 1e-14);
        assert_eq!(plob_bound(1.0), Err(Error::InfiniteBound));
        for eta_c in [1e-3, 1e-5, 1e-8] {
            let series = eta_c / std::f64::consts::LN_2;
            assert!(rel(plob_bound(eta_c).unwrap(), series) < 0.01);
        }
    }

    #[test]
    fn ideal_rate_examples() {
        let r = ideal_rates(0.15, 1.0);
        assert_eq!((r.opi, r.dl04), (0.15, 0.15));
        assert!((r.mdi - 0.0225).abs() < 1e-17);
        let r = ideal_rates(1.0, 0.01);
        assert_eq!(r.opi, 0.1);
        assert!((r.dl04 - 1e-4).abs() < 1e-19 && (r.mdi - 1e-4).abs() < 1e-19);
        let r = ideal_rates(0.15, 0.01);
        assert!((r.opi - 0.015).abs() < 1e-17);
        assert!((r.dl04 - 1.5e-5).abs() < 1e-20);
        assert!((r.mdi - 2.25e-6).abs() < 1e-21);
    }

    #[test]
    fn dl04_examples() {
        let noiseless = SystemParams {
            p_d: 0.0,
            e_d: 0.0,
            ..SystemParams::default()
        };
        assert!((dl04_rate(&noiseless, 0.0).unwrap() - 0.15).abs() < 1e-15);
        let r = dl04_rate(&SystemParams::default(), 0.0).unwrap();
        assert!(rel(r, 0.108_899_528_551_252_6) < 1e-12);
        assert_eq!(dl04_rate(&SystemParams::default(), 400.0).unwrap(), 0.0);
    }

    #[test]
    fn mdi_reference_point() {
        let t = mdi_terms(&SystemParams::default(), 0.0).unwrap();
        assert!(rel(t.gain, 1.687_506_885_004_537e-4) < 1e-12);
        assert!(rel(t.eps_hat, 1.893_326_985_976_478e-6) < 1e-10);
        let r = mdi_rate(&SystemParams::default(), 0.0).unwrap();
        assert!(rel(r, 1.349_706_315_220_354_7e-4) < 1e-11);
    }

    #[test]
    fn mdi_without_dark_counts() {
        let p = SystemParams {
            p_d: 0.0,
            ..SystemParams::default()
        };
        for d in [0.0, 10.0, 80.0] {
            let m = mdi_terms(&p, d).unwrap();
            assert_eq!(m.eps_hat, 0.0);
            assert_eq!(m.eps_y, p.e_d);
            let t = m.t;
            assert!(rel(m.q_c1, t.powi(3) / 3.0) < 1e-12);
            assert!(rel(m.gain, t.powi(4) / 3.0) < 1e-12);
        }
        assert_eq!(mdi_rate(&SystemParams::default(), 2000.0).unwrap(), 0.0);
    }

    #[test]
    fn probability_misalignment_raises_x_error_floor() {
        let p = SystemParams {
            misalignment_model: MisalignmentModel::Probability,
            ..SystemParams::default()
        };
        let b = secrecy_rate(&p, 0.0).unwrap();
        assert!((b.ex - 0.0149).abs() < 1e-4);
    }
}
