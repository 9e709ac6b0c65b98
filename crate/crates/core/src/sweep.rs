//! Distance and intensity sweeps.
//!
//! All searches work on the unclipped branch rate `rc`, whose sign change
//! marks the end of positive secrecy, and on `R - PLOB` for the crossing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{channel_transmittance, SystemParams};
use crate::rates::{comparison_rates, plob_bound, secrecy_rate, ComparisonRates, RateBreakdown};

/// Upper end of the default search window, km.
pub const SEARCH_CEILING_KM: f64 = 600.0;
/// Absolute tolerance of every distance bisection, km.
pub const DISTANCE_TOLERANCE_KM: f64 = 1e-6;
const COARSE_POINTS: usize = 50;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// One evaluated distance. `error` is set instead of the rates when the
/// analytic model failed at this point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: f64,
    pub rate: Option<RateBreakdown>,
    pub comparison: Option<ComparisonRates>,
    pub error: Option<String>,
}

impl CurvePoint {
    fn evaluate(params: &SystemParams, d: f64) -> Self {
        let outcome = secrecy_rate(params, d).and_then(|r| Ok((r, comparison_rates(params, d)?)));
        match outcome {
            Ok((rate, comparison)) => Self {
                d,
                rate: Some(rate),
                comparison: Some(comparison),
                error: None,
            },
            Err(e) => Self {
                d,
                rate: None,
                comparison: None,
                error: Some(e.to_string()),
            },
        }
    }

    /// Flat output row; undefined entries are `None`.
    pub fn row(&self) -> CurveRow {
        let rate = self.rate.as_ref();
        let cmp = self.comparison.as_ref();
        let r = rate.map(|r| r.r);
        CurveRow {
            d_km: self.d,
            r,
            log10_r: r.filter(|&v| v > 0.0).map(f64::log10),
            plob: cmp.and_then(|c| c.plob),
            dl04: cmp.map(|c| c.dl04),
            mdi: cmp.map(|c| c.mdi),
            opi_ideal: cmp.map(|c| c.opi_ideal),
            dl04_ideal: cmp.map(|c| c.dl04_ideal),
            mdi_ideal: cmp.map(|c| c.mdi_ideal),
            q: rate.map(|r| r.gain),
            ex: rate.map(|r| r.ex),
            ez: rate.map(|r| r.ez),
        }
    }
}

/// Column layout shared by the CSV and JSON curve files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub d_km: f64,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "log10R")]
    pub log10_r: Option<f64>,
    pub plob: Option<f64>,
    pub dl04: Option<f64>,
    pub mdi: Option<f64>,
    pub opi_ideal: Option<f64>,
    pub dl04_ideal: Option<f64>,
    pub mdi_ideal: Option<f64>,
    #[serde(rename = "Q")]
    pub q: Option<f64>,
    #[serde(rename = "EX")]
    pub ex: Option<f64>,
    #[serde(rename = "EZ")]
    pub ez: Option<f64>,
}

/// `dmin, dmin + step, ...` up to `dmax` inclusive.
pub fn distance_grid(dmin: f64, dmax: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "step",
            value: step,
            reason: "must be positive",
        });
    }
    if !(dmin >= 0.0 && dmax >= dmin && dmax.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dmax",
            value: dmax,
            reason: "need 0 <= dmin <= dmax",
        });
    }
    let count = ((dmax - dmin) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| dmin + i as f64 * step).collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(&bad) = grid.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "d",
            value: bad,
            reason: "distances must be finite and non-negative",
        });
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter {
            name: "d",
            value: w[1],
            reason: "distance grid must be sorted",
        });
    }
    Ok(())
}

/// Evaluates every rate at each grid distance, in grid order.
pub fn rate_curve(params: &SystemParams, grid: &[f64]) -> Result<Vec<CurvePoint>> {
    params.validate()?;
    check_grid(grid)?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(grid.par_iter().map(|&d| CurvePoint::evaluate(params, d)).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(grid.iter().map(|&d| CurvePoint::evaluate(params, d)).collect())
    }
}

/// Bisects a sign change of `f` on `[lo, hi]` (signs must differ).
fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let positive_lo = f(lo)? > 0.0;
    while hi - lo > DISTANCE_TOLERANCE_KM {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? > 0.0) == positive_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Secrecy rate, with a click-free channel counted as zero rate.
fn rate_or_zero(params: &SystemParams, d: f64) -> Result<RateBreakdown> {
    match secrecy_rate(params, d) {
        Err(Error::DegenerateChannel) => Ok(RateBreakdown {
            d,
            eta: 0.0,
            q: params.mode_match_rate(),
            gain: 0.0,
            ex: 0.5,
            ez: 0.5,
            rc: f64::NEG_INFINITY,
            rd: f64::NEG_INFINITY,
            r: 0.0,
        }),
        other => other,
    }
}

fn plob_gap(params: &SystemParams, d: f64) -> Result<f64> {
    let rate = rate_or_zero(params, d)?.r;
    Ok(rate - plob_bound(channel_transmittance(params.zeta, d)?)?)
}

/// First distance in `[lo, hi]` where `R - PLOB` changes sign, located by a
/// 1 km scan and refined by bisection. `None` when there is no sign change.
pub fn find_plob_crossing_in(params: &SystemParams, lo: f64, hi: f64) -> Result<Option<f64>> {
    params.validate()?;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter {
            name: "bracket",
            value: lo,
            reason: "need 0 < lo < hi (PLOB diverges at d = 0)",
        });
    }
    let mut prev_d = lo;
    let start = plob_gap(params, lo)? > 0.0;
    let steps = (hi - lo).ceil() as usize;
    for i in 1..=steps {
        let d = (lo + i as f64).min(hi);
        if (plob_gap(params, d)? > 0.0) != start {
            return bisect(|x| plob_gap(params, x), prev_d, d).map(Some);
        }
        prev_d = d;
    }
    Ok(None)
}

/// Distance beyond which OPI-QSDC beats the repeaterless bound, searched
/// on `[1, 600]` km.
pub fn find_plob_crossing(params: &SystemParams) -> Result<Option<f64>> {
    find_plob_crossing_in(params, 1.0, SEARCH_CEILING_KM)
}

fn branch_rate(params: &SystemParams, d: f64) -> Result<f64> {
    Ok(rate_or_zero(params, d)?.rc)
}

/// Largest distance with positive secrecy rate. `None` when `R(0) <= 0`.
pub fn max_distance(params: &SystemParams) -> Result<Option<f64>> {
    params.validate()?;
    if branch_rate(params, 0.0)? <= 0.0 {
        return Ok(None);
    }
    let mut hi = SEARCH_CEILING_KM;
    while branch_rate(params, hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e5 {
            return Err(Error::InvalidParameter {
                name: "zeta",
                value: params.zeta,
                reason: "rate stays positive beyond 100000 km",
            });
        }
    }
    bisect(|d| branch_rate(params, d), 0.0, hi).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityOptimum {
    pub u_star: f64,
    /// `None` if no intensity in the range gives a positive rate.
    pub d_max: Option<f64>,
    /// Whether the coarse scan was unimodal and golden-section refinement
    /// ran.
    pub refined: bool,
    pub warning: Option<String>,
    /// `(u, max distance)` of the coarse scan; zero where no rate.
    pub coarse: Vec<(f64, f64)>,
}

fn distance_at(params: &SystemParams, u: f64) -> Result<f64> {
    Ok(max_distance(&params.with_u(u))?.unwrap_or(0.0))
}

fn is_unimodal(values: &[f64]) -> bool {
    let peak = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    values[..=peak].windows(2).all(|w| w[1] >= w[0]) && values[peak..].windows(2).all(|w| w[1] <= w[0])
}

/// Intensity maximising the reach, from a 50-point scan of `u_range`
/// refined by golden-section search to `tolerance` in `u`.
pub fn optimize_intensity(params: &SystemParams, u_range: (f64, f64), tolerance: f64) -> Result<IntensityOptimum> {
    let (u_lo, u_hi) = u_range;
    if !(u_lo > 0.0 && u_hi > u_lo && u_hi.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "u_range",
            value: u_lo,
            reason: "need 0 < u_min < u_max",
        });
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tolerance",
            value: tolerance,
            reason: "must be positive",
        });
    }
    let us: Vec<f64> = (0..COARSE_POINTS)
        .map(|i| u_lo + (u_hi - u_lo) * i as f64 / (COARSE_POINTS - 1) as f64)
        .collect();
    let evaluate = |u: &f64| distance_at(params, *u);
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        us.par_iter().map(evaluate).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = us.iter().map(evaluate).collect::<Result<_>>()?;
    let coarse: Vec<(f64, f64)> = us.iter().copied().zip(values.iter().copied()).collect();

    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let to_optimum = |u: f64, d: f64, refined: bool, warning: Option<String>| IntensityOptimum {
        u_star: u,
        d_max: (d > 0.0).then_some(d),
        refined,
        warning,
        coarse: coarse.clone(),
    };
    if values[best] <= 0.0 {
        return Ok(to_optimum(us[best], 0.0, false, Some("no positive rate in range".into())));
    }
    if !is_unimodal(&values) {
        return Ok(to_optimum(
            us[best],
            values[best],
            false,
            Some("coarse scan is not unimodal; returning the grid maximum".into()),
        ));
    }

    let mut a = us[best.saturating_sub(1)];
    let mut b = us[(best + 1).min(us.len() - 1)];
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = distance_at(params, x1)?;
    let mut f2 = distance_at(params, x2)?;
    while b - a > tolerance {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = distance_at(params, x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = distance_at(params, x1)?;
        }
    }
    let (mut u_star, mut d_star) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    // never report worse than the best grid point
    if values[best] > d_star {
        (u_star, d_star) = (us[best], values[best]);
    }
    Ok(to_optimum(u_star, d_star, true, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkCountCurve {
    pub p_d: f64,
    pub points: Vec<CurvePoint>,
    pub plob_crossing: Option<f64>,
    pub max_distance: Option<f64>,
}

/// One rate curve per dark-count probability.
pub fn dark_count_sweep(params: &SystemParams, p_d_list: &[f64], grid: &[f64]) -> Result<Vec<DarkCountCurve>> {
    p_d_list
        .iter()
        .map(|&p_d| {
            let p = params.with_p_d(p_d);
            Ok(DarkCountCurve {
                p_d,
                points: rate_curve(&p, grid)?,
                plob_crossing: find_plob_crossing(&p)?,
                max_distance: max_distance(&p)?,
            })
        })
        .collect()
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Config {
        key: "output".into(),
        reason: e.to_string(),
    }
}

/// CSV with header `d_km,R,log10R,plob,dl04,mdi,opi_ideal,dl04_ideal,
/// mdi_ideal,Q,EX,EZ`; undefined values are empty cells.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for p in points {
        writer.serialize(p.row()).map_err(io_error)?;
    }
    if points.is_empty() {
        writer
            .write_record([
                "d_km", "R", "log10R", "plob", "dl04", "mdi", "opi_ideal", "dl04_ideal", "mdi_ideal", "Q",
                "EX", "EZ",
            ])
            .map_err(io_error)?;
    }
    writer.flush().map_err(io_error)
}

/// JSON array of rows with the CSV column names; undefined values are
/// `null`.
pub fn curve_json(points: &[CurvePoint]) -> Result<String> {
    let rows: Vec<CurveRow> = points.iter().map(CurvePoint::row).collect();
    serde_json::to_string_pretty(&rows).map_err(io_error)
}
