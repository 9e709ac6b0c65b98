use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "OPIQSDC_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "opiqsdc", version, about = "Secrecy-rate analytics, pulse simulation and frame coding for one-photon-interference QSDC")]
pub struct Cli {
    /// key=value config file. Falls back to $OPIQSDC_CONFIG, then built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override one config key, e.g. `--param p_d=8e-7`. Repeatable.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    pub params: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

/// A fully resolved invocation. Stored in manifests so `replay` can rerun it.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Rate-versus-distance table with PLOB and comparison protocols (CSV + JSON).
    RateCurve(CurveArgs),
    /// Intensity that maximises the reachable distance.
    OptimizeU(OptimizeArgs),
    /// One rate curve per dark-count probability.
    SweepPd(SweepArgs),
    /// Distance beyond which the secrecy rate beats the PLOB bound.
    PlobCrossing(JsonOut),
    /// Largest distance with a positive secrecy rate.
    MaxDistance(JsonOut),
    /// Monte Carlo pulse campaign compared against the analytic model.
    Simulate(SimulateArgs),
    /// Send a file through the frame pipeline and print the transcript.
    FrameDemo(FrameArgs),
    /// Rerun the invocation recorded in a manifest and check the digests.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 0.0)]
    pub dmin: f64,
    #[arg(long, default_value_t = 500.0)]
    pub dmax: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// CSV path; the JSON copy goes next to it with a `.json` extension.
    #[arg(long, default_value = "rate_curve.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 0.005)]
    pub umin: f64,
    #[arg(long, default_value_t = 0.2)]
    pub umax: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub json: JsonOut,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Comma-separated dark-count probabilities.
    #[arg(long, value_delimiter = ',', default_value = "8e-8,8e-7,4e-6")]
    pub pd: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub dmin: f64,
    #[arg(long, default_value_t = 500.0)]
    pub dmax: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value = "sweep_pd")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct JsonOut {
    /// Also write the JSON result (and a manifest) to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.0)]
    pub distance: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub pulses: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub shards: u32,
    /// Tag photon numbers and report per-photon yields.
    #[arg(long)]
    pub truth_access: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub json: JsonOut,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FrameArgs {
    #[arg(long)]
    pub message_file: PathBuf,
    /// Bit-flip probability of the synthetic channel.
    #[arg(long, default_value_t = 0.0)]
    pub qber: f64,
    #[arg(long, default_value_t = 0.0)]
    pub erasure: f64,
    /// Use the simulated pulse channel at this distance instead.
    #[arg(long)]
    pub pulse_distance: Option<f64>,
    /// Channel uses per LDPC bit of the frame code.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long, default_value = "ldpc")]
    pub fec: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub json: JsonOut,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write the regenerated files here instead of over the originals.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn relocate(path: &Path, dir: &Path) -> PathBuf {
    dir.join(path.file_name().unwrap_or(path.as_os_str()))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RateCurve(_) => "rate-curve",
            Self::OptimizeU(_) => "optimize-u",
            Self::SweepPd(_) => "sweep-pd",
            Self::PlobCrossing(_) => "plob-crossing",
            Self::MaxDistance(_) => "max-distance",
            Self::Simulate(_) => "simulate",
            Self::FrameDemo(_) => "frame-demo",
            Self::Replay(_) => "replay",
        }
    }

    /// Same invocation with every output moved into `dir`.
    pub fn relocated(mut self, dir: &Path) -> Self {
        let json = match &mut self {
            Self::RateCurve(a) => {
                a.out = relocate(&a.out, dir);
                None
            }
            Self::SweepPd(a) => {
                a.out_dir = relocate(&a.out_dir, dir);
                None
            }
            Self::OptimizeU(a) => Some(&mut a.json),
            Self::PlobCrossing(a) | Self::MaxDistance(a) => Some(a),
            Self::Simulate(a) => Some(&mut a.json),
            Self::FrameDemo(a) => Some(&mut a.json),
            Self::Replay(_) => None,
        };
        if let Some(JsonOut { out: Some(path) }) = json {
            *path = relocate(path, dir);
        }
        self
    }
}
