//! Shared reporting for the acceptance suite in `tests/acceptance.rs`.
//!
//! Each criterion writes exactly one `PASS`/`FAIL` line straight to stderr,
//! bypassing the test harness's output capture so that the verdicts show up
//! in every `cargo test` log.

use std::io::Write;

/// Writes the verdict line for `label` and returns `pass`.
pub fn verdict(label: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[acceptance] {status} {label}: {detail}");
    pass
}

/// Largest `d` in `[0, hi]` with `f(d) > 0`, by bisection to `tol`.
/// Returns `None` if `f(0) <= 0`; assumes a single sign change.
pub fn reach(mut f: impl FnMut(f64) -> f64, hi: f64, tol: f64) -> Option<f64> {
    if f(0.0) <= 0.0 {
        return None;
    }
    if f(hi) > 0.0 {
        return Some(hi);
    }
    let (mut lo, mut up) = (0.0, hi);
    while up - lo > tol {
        let mid = 0.5 * (lo + up);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Some(0.5 * (lo + up))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reach_of_a_line() {
        let r = reach(|d| 10.0 - d, 100.0, 1e-9).unwrap();
        assert!((r - 10.0).abs() < 1e-8);
        assert_eq!(reach(|d| -d, 100.0, 1e-9), None);
        assert_eq!(reach(|_| 1.0, 100.0, 1e-9), Some(100.0));
    }
}
