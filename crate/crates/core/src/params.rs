//! System parameters and the fibre loss model.
//!
//! Distances are total Alice–Bob distances in km. Charlie sits in the middle,
//! so each arm sees half the loss: the per-arm transmittance including the
//! detector is `eta_d * sqrt(eta_c(d))`.
//!
//! Parameters can be read from a flat `key = value` text file. Every key is
//! the field name of [`SystemParams`]; `#` starts a comment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_non_negative, check_probability, Error, Result};

/// How `delta_mis` enters the formulas that contain `sin^2(delta/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisalignmentModel {
    /// `delta_mis` is a phase mismatch in radians; the error weight is
    /// `sin^2(delta_mis / 2)`.
    PhaseRadians,
    /// `delta_mis` is itself the misalignment error probability.
    Probability,
}

/// How the one-click gain is attributed to the D0-only and D1-only branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchAccounting {
    /// The gain formula counts both detectors; each branch carries half of it.
    SharedGain,
    /// Each branch is credited with the full gain (total rate doubles).
    PerBranch,
}

/// Transmittance substituted for `eta_c` inside the MDI-QSDC gain formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdiTransmittance {
    /// `eta_d * eta_c`.
    Effective,
    /// Bare channel transmittance `eta_c`.
    Raw,
}

/// Phase misalignment applied to simulated pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MisalignmentSim {
    /// A constant offset added to every phase difference.
    FixedOffset,
    /// The same offset with a random sign per round (zero-mean jitter).
    RandomSign,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!(
                        "unknown value `{other}`, expected one of: {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keyword_enum!(MisalignmentModel { PhaseRadians => "phase-radians", Probability => "probability" });
keyword_enum!(BranchAccounting { SharedGain => "shared-gain", PerBranch => "per-branch" });
keyword_enum!(MdiTransmittance { Effective => "effective", Raw => "raw" });
keyword_enum!(MisalignmentSim { FixedOffset => "fixed-offset", RandomSign => "random-sign" });

/// Every constant needed for a run. Defaults reproduce the reference
/// simulation settings (ζ = 0.2 dB/km, η_d = 15 %, p_d = 8e-8, δ = 1.5 %,
/// f = 1.2, u = 0.046).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Fibre attenuation, dB/km.
    pub zeta: f64,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count probability per pulse per detector.
    pub p_d: f64,
    /// Misalignment, interpreted according to `misalignment_model`.
    pub delta_mis: f64,
    pub misalignment_model: MisalignmentModel,
    /// Forward-coding inefficiency, `f >= 1`.
    pub f: f64,
    /// Signal intensity (mean photon number per party).
    pub u: f64,
    /// Probability of choosing the multi-intensity (decoy) mode.
    pub p_multi: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// Number of phase slices used to match decoy phases.
    pub phase_slices: u32,
    /// Intrinsic detector error rate of the comparison protocols.
    pub e_d: f64,
    /// Background error rate of the comparison protocols.
    pub e_0: f64,
    /// Include the vacuum term in the phase-error series.
    pub include_vacuum: bool,
    pub branch_accounting: BranchAccounting,
    pub mdi_transmittance: MdiTransmittance,
    /// Photon-pair truncation of the phase-error series.
    pub n_max: usize,
    /// Fraction of kept coding rounds disclosed for QBER estimation.
    pub sacrifice_fraction: f64,
    pub misalignment_sim: MisalignmentSim,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            zeta: 0.2,
            eta_d: 0.15,
            p_d: 8e-8,
            delta_mis: 0.015,
            misalignment_model: MisalignmentModel::PhaseRadians,
            f: 1.2,
            u: 0.046,
            p_multi: 0.01,
            nu1: 0.01,
            nu2: 0.001,
            phase_slices: 16,
            e_d: 0.013,
            e_0: 0.5,
            include_vacuum: false,
            branch_accounting: BranchAccounting::SharedGain,
            mdi_transmittance: MdiTransmittance::Effective,
            n_max: 40,
            sacrifice_fraction: 0.1,
            misalignment_sim: MisalignmentSim::FixedOffset,
        }
    }
}

/// Names accepted in config files, in canonical order.
pub const CONFIG_KEYS: &[&str] = &[
    "zeta",
    "eta_d",
    "p_d",
    "delta_mis",
    "misalignment_model",
    "f",
    "u",
    "p_multi",
    "nu1",
    "nu2",
    "phase_slices",
    "e_d",
    "e_0",
    "include_vacuum",
    "branch_accounting",
    "mdi_transmittance",
    "n_max",
    "sacrifice_fraction",
    "misalignment_sim",
];

fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("zeta", self.zeta)?;
        check_probability("eta_d", self.eta_d)?;
        if !(0.0..1.0).contains(&self.p_d) {
            return Err(invalid("p_d", self.p_d, "must lie in [0, 1)"));
        }
        check_probability("delta_mis", self.delta_mis.abs()).map_err(|_| {
            invalid("delta_mis", self.delta_mis, "must lie in [0, 1]")
        })?;
        if !(self.f >= 1.0) {
            return Err(invalid("f", self.f, "must be >= 1"));
        }
        if !(self.u > 0.0 && self.u.is_finite()) {
            return Err(invalid("u", self.u, "must be positive"));
        }
        if !(self.p_multi > 0.0 && self.p_multi < 1.0) {
            return Err(invalid("p_multi", self.p_multi, "must lie in (0, 1)"));
        }
        if !(self.nu2 > 0.0) {
            return Err(invalid("nu2", self.nu2, "must be positive"));
        }
        if !(self.nu1 > self.nu2) {
            return Err(invalid("nu1", self.nu1, "must exceed nu2"));
        }
        if !(self.u > self.nu1) {
            return Err(invalid("u", self.u, "must exceed nu1"));
        }
        if self.phase_slices < 2 {
            return Err(invalid(
                "phase_slices",
                self.phase_slices as f64,
                "must be >= 2",
            ));
        }
        check_probability("e_d", self.e_d)?;
        check_probability("e_0", self.e_0)?;
        if self.n_max == 0 {
            return Err(invalid("n_max", 0.0, "must be >= 1"));
        }
        check_probability("sacrifice_fraction", self.sacrifice_fraction)?;
        Ok(())
    }

    /// The value standing in for `sin^2(delta/2)`.
    pub fn misalignment(&self) -> f64 {
        match self.misalignment_model {
            MisalignmentModel::PhaseRadians => (self.delta_mis / 2.0).sin().powi(2),
            MisalignmentModel::Probability => self.delta_mis,
        }
    }

    /// Phase offset `delta` with `sin^2(delta/2)` equal to [`Self::misalignment`].
    pub fn misalignment_phase(&self) -> f64 {
        match self.misalignment_model {
            MisalignmentModel::PhaseRadians => self.delta_mis,
            MisalignmentModel::Probability => 2.0 * self.delta_mis.sqrt().asin(),
        }
    }

    pub fn mode_match_rate(&self) -> f64 {
        1.0 - 2.0 * self.p_multi * (1.0 - self.p_multi)
    }

    /// Copy with `u` replaced. If `u` falls to or below `nu1`, both decoy
    /// intensities are scaled down together so that `nu1 = u / 2`; the
    /// analytic rates do not depend on them.
    pub fn with_u(&self, u: f64) -> Self {
        let mut p = Self { u, ..self.clone() };
        if u > 0.0 && u <= p.nu1 {
            let scale = u / (2.0 * p.nu1);
            p.nu1 *= scale;
            p.nu2 *= scale;
        }
        p
    }

    pub fn with_p_d(&self, p_d: f64) -> Self {
        Self { p_d, ..self.clone() }
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config {
                key: key.to_string(),
                reason: format!("cannot parse `{value}`"),
            })
        }
        fn kw<T: FromStr<Err = String>>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|reason| Error::Config {
                key: key.to_string(),
                reason,
            })
        }
        match key {
            "zeta" => self.zeta = num(key, value)?,
            "eta_d" => self.eta_d = num(key, value)?,
            "p_d" => self.p_d = num(key, value)?,
            "delta_mis" => self.delta_mis = num(key, value)?,
            "misalignment_model" => self.misalignment_model = kw(key, value)?,
            "f" => self.f = num(key, value)?,
            "u" => self.u = num(key, value)?,
            "p_multi" => self.p_multi = num(key, value)?,
            "nu1" => self.nu1 = num(key, value)?,
            "nu2" => self.nu2 = num(key, value)?,
            "phase_slices" => self.phase_slices = num(key, value)?,
            "e_d" => self.e_d = num(key, value)?,
            "e_0" => self.e_0 = num(key, value)?,
            "include_vacuum" => self.include_vacuum = num(key, value)?,
            "branch_accounting" => self.branch_accounting = kw(key, value)?,
            "mdi_transmittance" => self.mdi_transmittance = kw(key, value)?,
            "n_max" => self.n_max = num(key, value)?,
            "sacrifice_fraction" => self.sacrifice_fraction = num(key, value)?,
            "misalignment_sim" => self.misalignment_sim = kw(key, value)?,
            _ => {
                return Err(Error::Config {
                    key: key.to_string(),
                    reason: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Applies a config text on top of `self`. The result is validated, and
    /// validation failures are reported against the offending key.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                reason: format!("line {} is not `key = value`", lineno + 1),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate().map_err(config_error)
    }

    pub fn from_config(text: &str) -> Result<Self> {
        let mut params = Self::default();
        params.apply_config(text)?;
        Ok(params)
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "zeta" => self.zeta.to_string(),
            "eta_d" => self.eta_d.to_string(),
            "p_d" => self.p_d.to_string(),
            "delta_mis" => self.delta_mis.to_string(),
            "misalignment_model" => self.misalignment_model.to_string(),
            "f" => self.f.to_string(),
            "u" => self.u.to_string(),
            "p_multi" => self.p_multi.to_string(),
            "nu1" => self.nu1.to_string(),
            "nu2" => self.nu2.to_string(),
            "phase_slices" => self.phase_slices.to_string(),
            "e_d" => self.e_d.to_string(),
            "e_0" => self.e_0.to_string(),
            "include_vacuum" => self.include_vacuum.to_string(),
            "branch_accounting" => self.branch_accounting.to_string(),
            "mdi_transmittance" => self.mdi_transmittance.to_string(),
            "n_max" => self.n_max.to_string(),
            "sacrifice_fraction" => self.sacrifice_fraction.to_string(),
            "misalignment_sim" => self.misalignment_sim.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Canonical config text; `from_config` of the output reproduces `self`.
    pub fn to_config(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|key| format!("{key} = {}\n", self.value_of(key)))
            .collect()
    }

    /// SHA-256 of the canonical config text, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_config().as_bytes()))
    }
}

fn config_error(err: Error) -> Error {
    match err {
        Error::InvalidParameter {
            name,
            value,
            reason,
        } => Error::Config {
            key: name.to_string(),
            reason: format!("value {value} {reason}"),
        },
        other => other,
    }
}

/// Fibre transmittance `10^(-zeta d / 10)`.
pub fn channel_transmittance(zeta: f64, d: f64) -> Result<f64> {
    check_non_negative("zeta", zeta)?;
    check_non_negative("d", d)?;
    Ok(10f64.powf(-zeta * d / 10.0))
}

/// Per-arm transmittance `eta_d * sqrt(eta_c(d))`, including the detector.
pub fn system_transmittance(params: &SystemParams, d: f64) -> Result<f64> {
    check_probability("eta_d", params.eta_d)?;
    Ok(params.eta_d * channel_transmittance(params.zeta, d)?.sqrt())
}

/// Probability `1 - 2p(1-p)` that both parties pick the same mode.
pub fn mode_match_rate(p: f64) -> Result<f64> {
    check_probability("p_multi", p)?;
    Ok(1.0 - 2.0 * p * (1.0 - p))
}
