use std::fs;
use std::path::{Path, PathBuf};

use opiqsdc::frame::{
    bits_to_bytes, bytes_to_bits, BitChannel, ChannelSpec, FailureKind, FramePipeline, PipelineConfig,
    PipelineReport, PulseChannel, SyntheticChannel,
};
use opiqsdc::sim::{compare_with_analytic, run_campaign, AnalyticComparison, CampaignOptions, SimReport};
use opiqsdc::sweep::{
    curve_json, dark_count_sweep, distance_grid, find_plob_crossing, max_distance, optimize_intensity, rate_curve,
    write_curve_csv, CurvePoint,
};
use opiqsdc::SystemParams;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Command, CurveArgs, FrameArgs, JsonOut, OptimizeArgs, ReplayArgs, SimulateArgs, SweepArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::{manifest_path, sha256_hex, to_json, write_atomic, FileDigest, Outputs, RunManifest};

/// What a command produced, before the manifest is written.
#[derive(Debug, Default)]
pub struct Run {
    pub stdout: Value,
    pub outputs: Outputs,
    pub inputs: Vec<FileDigest>,
    pub seeds: Vec<u64>,
    /// Where the manifest goes; `None` when nothing was written.
    pub manifest: Option<PathBuf>,
    /// Set when the run completed but its outcome counts as a failure.
    pub failure: Option<String>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_grid(dmin: f64, dmax: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(usage(format!("--step must be positive, got {step}")));
    }
    if !(dmin >= 0.0) || !(dmax >= dmin) || !dmax.is_finite() {
        return Err(usage(format!("need 0 <= dmin <= dmax, got {dmin}..{dmax}")));
    }
    Ok(distance_grid(dmin, dmax, step)?)
}

fn curve_files(points: &[CurvePoint]) -> CliResult<(Vec<u8>, String)> {
    let mut csv = Vec::new();
    write_curve_csv(points, &mut csv)?;
    Ok((csv, curve_json(points)?))
}

fn finish_json<T: Serialize>(run: &mut Run, value: &T, out: &JsonOut) -> CliResult<()> {
    let text = to_json(value);
    if let Some(path) = &out.out {
        run.outputs.write(path, text.as_bytes())?;
        run.manifest = Some(manifest_path(path, false));
    }
    run.stdout = serde_json::to_value(value).expect("result types serialize");
    Ok(())
}

fn rate_curve_cmd(params: &SystemParams, a: &CurveArgs) -> CliResult<Run> {
    let grid = check_grid(a.dmin, a.dmax, a.step)?;
    let json_path = a.out.with_extension("json");
    if json_path == a.out {
        return Err(usage("--out must not end in .json; the JSON copy is written next to it"));
    }
    let points = rate_curve(params, &grid)?;
    let (csv, json_text) = curve_files(&points)?;
    let mut run = Run::default();
    run.outputs.write(&a.out, &csv)?;
    run.outputs.write(&json_path, format!("{json_text}\n").as_bytes())?;
    let manifest = manifest_path(&a.out, false);
    run.stdout = json!({
        "rows": points.len(),
        "failed_points": points.iter().filter(|p| p.error.is_some()).count(),
        "csv": a.out,
        "json": json_path,
        "manifest": manifest,
    });
    run.manifest = Some(manifest);
    Ok(run)
}

fn optimize_cmd(params: &SystemParams, a: &OptimizeArgs) -> CliResult<Run> {
    if !(a.umin > 0.0 && a.umax > a.umin) {
        return Err(usage(format!("need 0 < umin < umax, got {}..{}", a.umin, a.umax)));
    }
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let opt = optimize_intensity(params, (a.umin, a.umax), a.tol)?;
    let mut run = Run::default();
    finish_json(&mut run, &opt, &a.json)?;
    Ok(run)
}

fn sweep_cmd(params: &SystemParams, a: &SweepArgs) -> CliResult<Run> {
    if a.pd.is_empty() {
        return Err(usage("--pd needs at least one value"));
    }
    let grid = check_grid(a.dmin, a.dmax, a.step)?;
    let curves = dark_count_sweep(params, &a.pd, &grid)?;
    let mut run = Run::default();
    let mut summary = Vec::new();
    for curve in &curves {
        let (csv, _) = curve_files(&curve.points)?;
        // names relative to the sweep directory keep the summary relocatable
        let name = format!("curve_pd_{:e}.csv", curve.p_d);
        run.outputs.write(&a.out_dir.join(&name), &csv)?;
        summary.push(json!({
            "p_d": curve.p_d,
            "plob_crossing_km": curve.plob_crossing,
            "max_distance_km": curve.max_distance,
            "csv": name,
        }));
    }
    let summary = Value::Array(summary);
    run.outputs.write(&a.out_dir.join("summary.json"), to_json(&summary).as_bytes())?;
    run.stdout = summary;
    run.manifest = Some(manifest_path(&a.out_dir, true));
    Ok(run)
}

fn crossing_cmd(params: &SystemParams, out: &JsonOut) -> CliResult<Run> {
    let crossing = find_plob_crossing(params)?;
    let mut run = Run::default();
    let value = json!({ "crossing_km": crossing, "include_vacuum": params.include_vacuum });
    finish_json(&mut run, &value, out)?;
    Ok(run)
}

fn max_distance_cmd(params: &SystemParams, out: &JsonOut) -> CliResult<Run> {
    let d = max_distance(params)?;
    let mut run = Run::default();
    finish_json(&mut run, &json!({ "max_distance_km": d, "u": params.u }), out)?;
    Ok(run)
}

#[derive(Serialize)]
struct Simulation {
    report: SimReport,
    comparison: AnalyticComparison,
}

fn simulate_cmd(params: &SystemParams, a: &SimulateArgs) -> CliResult<Run> {
    if a.pulses == 0 {
        return Err(usage("--pulses must be at least 1"));
    }
    if a.shards == 0 {
        return Err(usage("--shards must be at least 1"));
    }
    if !(a.distance >= 0.0) || !a.distance.is_finite() {
        return Err(usage(format!("--distance must be a finite non-negative number, got {}", a.distance)));
    }
    let options = CampaignOptions {
        truth_access: a.truth_access,
    };
    let report = run_campaign(params, a.distance, a.pulses, a.seed, a.shards, options)?;
    let comparison = compare_with_analytic(&report, params)?;
    let mut run = Run {
        seeds: vec![a.seed],
        ..Run::default()
    };
    finish_json(&mut run, &Simulation { report, comparison }, &a.json)?;
    Ok(run)
}

#[derive(Serialize)]
struct Transcript {
    message_bytes: usize,
    message_sha256: String,
    recovered_sha256: String,
    recovered_equal: bool,
    channel: ChannelSpec,
    pipeline: PipelineConfig,
    report: PipelineReport,
}

fn run_pipeline<C: BitChannel>(
    pipeline: &FramePipeline,
    message: &[bool],
    channel: &mut C,
    seed: u64,
) -> CliResult<(Vec<bool>, PipelineReport)> {
    let outcome = pipeline.run(message, channel, seed)?;
    Ok((outcome.message, outcome.report))
}

fn frame_cmd(params: &SystemParams, a: &FrameArgs) -> CliResult<Run> {
    let bytes = fs::read(&a.message_file).map_err(|e| CliError::io(&a.message_file, e))?;
    let message = bytes_to_bits(&bytes);
    let config = PipelineConfig {
        repeat: a.repeat,
        fec: a.fec.clone(),
        f: params.f,
        ..PipelineConfig::default()
    };
    let pipeline = FramePipeline::new(config.clone()).map_err(|e| usage(e.to_string()))?;
    let channel_seed = a.seed.wrapping_add(1);
    let (spec, (recovered, report)) = match a.pulse_distance {
        Some(distance_km) => {
            let mut ch = PulseChannel::new(params, distance_km, channel_seed).map_err(|e| usage(e.to_string()))?;
            (ChannelSpec::Pulse { distance_km }, run_pipeline(&pipeline, &message, &mut ch, a.seed)?)
        }
        None => {
            let mut ch = SyntheticChannel::new(a.qber, a.erasure, channel_seed).map_err(|e| usage(e.to_string()))?;
            let spec = ChannelSpec::Synthetic {
                flip: a.qber,
                erasure: a.erasure,
            };
            (spec, run_pipeline(&pipeline, &message, &mut ch, a.seed)?)
        }
    };
    let recovered_bytes = bits_to_bytes(&recovered);
    let failure = report.failure.as_ref().map(|f| {
        let what = match f.kind {
            FailureKind::Refused => "frame refused",
            FailureKind::Decode => "decode failure",
            FailureKind::FrameLimit => "frame limit reached",
        };
        format!("{what} at frame {}: {}", f.frame, f.message)
    });
    let transcript = Transcript {
        message_bytes: bytes.len(),
        message_sha256: sha256_hex(&bytes),
        recovered_sha256: sha256_hex(&recovered_bytes),
        recovered_equal: recovered == message,
        channel: spec,
        pipeline: config,
        report,
    };
    let mut run = Run {
        seeds: vec![a.seed, channel_seed],
        inputs: vec![FileDigest {
            path: a.message_file.clone(),
            sha256: sha256_hex(&bytes),
        }],
        failure,
        ..Run::default()
    };
    finish_json(&mut run, &transcript, &a.json)?;
    Ok(run)
}

/// Runs one (non-replay) command and writes its manifest.
pub fn execute(command: &Command, params: &SystemParams) -> CliResult<Run> {
    let run = match command {
        Command::RateCurve(a) => rate_curve_cmd(params, a),
        Command::OptimizeU(a) => optimize_cmd(params, a),
        Command::SweepPd(a) => sweep_cmd(params, a),
        Command::PlobCrossing(a) => crossing_cmd(params, a),
        Command::MaxDistance(a) => max_distance_cmd(params, a),
        Command::Simulate(a) => simulate_cmd(params, a),
        Command::FrameDemo(a) => frame_cmd(params, a),
        Command::Replay(_) => Err(usage("replay cannot be nested")),
    }?;
    if let Some(path) = &run.manifest {
        let manifest = RunManifest {
            tool: "opiqsdc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            invocation: command.clone(),
            config: params.to_config(),
            params_digest: params.digest(),
            seeds: run.seeds.clone(),
            inputs: run.inputs.clone(),
            outputs: run.outputs.files.clone(),
        };
        write_atomic(path, to_json(&manifest).as_bytes())?;
    }
    Ok(run)
}

fn check_inputs(inputs: &[FileDigest]) -> CliResult<()> {
    for input in inputs {
        let bytes = fs::read(&input.path).map_err(|e| CliError::io(&input.path, e))?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(CliError::Failed(format!(
                "input {} changed since the manifest was written",
                input.path.display()
            )));
        }
    }
    Ok(())
}

fn file_name(path: &Path) -> &std::ffi::OsStr {
    path.file_name().unwrap_or(path.as_os_str())
}

pub fn replay(a: &ReplayArgs) -> CliResult<Run> {
    let manifest = RunManifest::load(&a.manifest)?;
    let params = SystemParams::from_config(&manifest.config)
        .map_err(|e| usage(format!("manifest config: {e}")))?;
    check_inputs(&manifest.inputs)?;
    let invocation = match &a.out_dir {
        Some(dir) => manifest.invocation.clone().relocated(dir),
        None => manifest.invocation.clone(),
    };
    let rerun = execute(&invocation, &params)?;
    let mut reproduced = rerun.outputs.files.len() == manifest.outputs.len();
    let files: Vec<Value> = manifest
        .outputs
        .iter()
        .zip(&rerun.outputs.files)
        .map(|(old, new)| {
            let same = old.sha256 == new.sha256 && file_name(&old.path) == file_name(&new.path);
            reproduced &= same;
            json!({ "path": new.path, "expected": old.sha256, "actual": new.sha256, "match": same })
        })
        .collect();
    Ok(Run {
        stdout: json!({ "manifest": a.manifest, "command": invocation.name(), "reproduced": reproduced, "files": files }),
        failure: (!reproduced).then(|| "replayed outputs differ from the manifest".to_string()),
        ..Run::default()
    })
}
