//! WebAssembly bindings behind `www/index.html`.
//!
//! Every export takes the same `key = value` text as the CLI config files and
//! returns a JSON string. The `*_inner` functions carry the logic with plain
//! `String` errors so they can be tested natively.

use opiqsdc::sim::{compare_with_analytic, run_campaign, CampaignOptions};
use opiqsdc::sweep::{distance_grid, max_distance, rate_curve};
use opiqsdc::SystemParams;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Caps that keep a single call from freezing the page.
const MAX_GRID_POINTS: usize = 5_001;
const MAX_SCAN_POINTS: usize = 400;
const MAX_PULSES: u64 = 20_000_000;

fn params(config: &str) -> Result<SystemParams, String> {
    SystemParams::from_config(config).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn rate_curve_inner(config: &str, dmin: f64, dmax: f64, step: f64) -> Result<String, String> {
    let p = params(config)?;
    if step.is_nan() || step <= 0.0 {
        return Err(format!("step must be positive, got {step}"));
    }
    if (dmax - dmin) / step + 1.0 > MAX_GRID_POINTS as f64 {
        return Err(format!("grid too dense: at most {MAX_GRID_POINTS} points"));
    }
    let grid = distance_grid(dmin, dmax, step).map_err(|e| e.to_string())?;
    let points = rate_curve(&p, &grid).map_err(|e| e.to_string())?;
    let rows: Vec<_> = points.iter().map(|pt| pt.row()).collect();
    to_json(&rows)
}

#[derive(Serialize)]
struct ReachPoint {
    u: f64,
    d_max: Option<f64>,
}

pub fn max_distance_vs_intensity_inner(config: &str, umin: f64, umax: f64, points: usize) -> Result<String, String> {
    let p = params(config)?;
    if umin.is_nan() || umax.is_nan() || umin <= 0.0 || umax <= umin {
        return Err(format!("need 0 < umin < umax, got {umin}..{umax}"));
    }
    if !(2..=MAX_SCAN_POINTS).contains(&points) {
        return Err(format!("points must lie in 2..={MAX_SCAN_POINTS}"));
    }
    let scan = (0..points)
        .map(|i| {
            let u = umin + (umax - umin) * i as f64 / (points - 1) as f64;
            let d_max = max_distance(&p.with_u(u)).map_err(|e| e.to_string())?;
            Ok(ReachPoint { u, d_max })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&scan)
}

pub fn simulate_inner(config: &str, distance: f64, pulses: u64, seed: u64) -> Result<String, String> {
    let p = params(config)?;
    if pulses == 0 || pulses > MAX_PULSES {
        return Err(format!("pulses must lie in 1..={MAX_PULSES}"));
    }
    let report = run_campaign(&p, distance, pulses, seed, 1, CampaignOptions::default()).map_err(|e| e.to_string())?;
    let comparison = compare_with_analytic(&report, &p).map_err(|e| e.to_string())?;
    to_json(&serde_json::json!({ "report": report, "comparison": comparison }))
}

/// Rows of the rate-versus-distance table (same fields as the CLI CSV).
#[wasm_bindgen]
pub fn rate_curve_json(config: &str, dmin: f64, dmax: f64, step: f64) -> Result<String, JsError> {
    rate_curve_inner(config, dmin, dmax, step).map_err(|e| JsError::new(&e))
}

/// `[{u, d_max}]` for `points` evenly spaced intensities.
#[wasm_bindgen]
pub fn max_distance_vs_intensity(config: &str, umin: f64, umax: f64, points: usize) -> Result<String, JsError> {
    max_distance_vs_intensity_inner(config, umin, umax, points).map_err(|e| JsError::new(&e))
}

/// Single-stream Monte Carlo run with its analytic comparison.
#[wasm_bindgen]
pub fn simulate_json(config: &str, distance: f64, pulses: u64, seed: u64) -> Result<String, JsError> {
    simulate_inner(config, distance, pulses, seed).map_err(|e| JsError::new(&e))
}

/// Canonical config text with every key at its default.
#[wasm_bindgen]
pub fn default_config() -> String {
    SystemParams::default().to_config()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn curve_has_one_row_per_grid_point() {
        let rows: Value = serde_json::from_str(&rate_curve_inner("", 0.0, 100.0, 10.0).unwrap()).unwrap();
        let rows = rows.as_array().unwrap();
        assert_eq!(rows.len(), 11);
        assert!(rows[0]["plob"].is_null());
        assert!(rows[10]["R"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn config_text_is_honoured() {
        let base: Value = serde_json::from_str(&rate_curve_inner("", 50.0, 50.0, 1.0).unwrap()).unwrap();
        let noisy: Value = serde_json::from_str(&rate_curve_inner("p_d = 1e-5", 50.0, 50.0, 1.0).unwrap()).unwrap();
        assert!(noisy[0]["R"].as_f64().unwrap() < base[0]["R"].as_f64().unwrap());
        let err = rate_curve_inner("zeta = oops", 0.0, 1.0, 1.0).unwrap_err();
        assert!(err.contains("zeta"), "{err}");
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(rate_curve_inner("", 0.0, 10.0, 0.0).is_err());
        assert!(rate_curve_inner("", 0.0, 1e6, 1.0).is_err());
        assert!(rate_curve_inner("", 10.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn intensity_scan_peaks_near_the_optimum() {
        let scan: Value = serde_json::from_str(&max_distance_vs_intensity_inner("", 0.01, 0.1, 19).unwrap()).unwrap();
        let best = scan
            .as_array()
            .unwrap()
            .iter()
            .max_by(|a, b| a["d_max"].as_f64().unwrap_or(0.0).total_cmp(&b["d_max"].as_f64().unwrap_or(0.0)))
            .unwrap();
        assert!((best["u"].as_f64().unwrap() - 0.045).abs() <= 0.0051);
        assert!(max_distance_vs_intensity_inner("", 0.1, 0.01, 5).is_err());
        assert!(max_distance_vs_intensity_inner("", 0.01, 0.1, 1).is_err());
    }

    #[test]
    fn simulation_is_seeded() {
        let a = simulate_inner("", 10.0, 100_000, 3).unwrap();
        assert_eq!(a, simulate_inner("", 10.0, 100_000, 3).unwrap());
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["report"]["n_pulses"], 100_000);
        assert!(v["comparison"]["gain_z"].as_f64().unwrap().abs() < 4.0);
        assert!(simulate_inner("", 10.0, 0, 3).is_err());
    }

    #[test]
    fn default_config_round_trips() {
        assert_eq!(params(&default_config()).unwrap(), SystemParams::default());
    }
}
