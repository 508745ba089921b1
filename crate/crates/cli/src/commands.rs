use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use hvsisp_core::calibration::{calibrate_dark, DarkCalibration, RECOMMENDED_DARK_FRAMES};
use hvsisp_core::color::{decode_image, fit_ccm, luminance, Ccm, FitOptions, PatchColors};
use hvsisp_core::events::{
    activity_map, event_rate, flicker_score, log_intensity, simulate_events, voxelize, DEFAULT_LOG_FLOOR,
};
use hvsisp_core::frame_io::{
    atomic_write, read_checker_annotation, read_events, read_raw, read_rgb_png, write_events, write_raw,
    write_rgb_png, write_voxel, CheckerAnnotation, EventStream, Plane, RgbImage,
};
use hvsisp_core::metrics::{color_accuracy, l1, metric_json, psnr, ssim, temporal_stability};
use hvsisp_core::pipeline::{run_isp, IspConfig, IspInputs};
use hvsisp_core::synth::ChartScene;

use crate::args::*;

/// Bad command-line usage that the core library never sees.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Result of a successful command: JSON payload and human-readable text.
pub struct Output {
    pub json: Value,
    pub text: String,
}

impl Output {
    fn new(json: Value, text: impl Into<String>) -> Self {
        Output { json, text: text.into() }
    }
}

const BUILTIN_REFERENCE: &str = include_str!("../../../data/colorchecker_srgb.json");

fn reading<'a, T>(path: &'a Path, load: impl FnOnce(&'a Path) -> hvsisp_core::Result<T>) -> Result<T> {
    load(path).with_context(|| format!("reading {}", path.display()))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn dispatch(command: Command) -> Result<Output> {
    match command {
        Command::CalibrateDark(a) => calibrate(a),
        Command::Run(a) => run(a),
        Command::CcmFit(a) => ccm_fit(a),
        Command::Events(e) => match e {
            EventsCommand::Voxelize(a) => events_voxelize(a),
            EventsCommand::Simulate(a) => events_simulate(a),
            EventsCommand::Activity(a) => events_activity(a),
            EventsCommand::Rate(a) => events_rate(a),
            EventsCommand::Flicker(a) => events_flicker(a),
        },
        Command::Eval(a) => eval(a),
        Command::Report(r) => match r {
            ReportCommand::ColorAccuracy(a) => report_color_accuracy(a),
            ReportCommand::Stability(a) => report_stability(a),
        },
        Command::Synth(a) => synth(a),
    }
}

fn calibrate(a: CalibrateDarkArgs) -> Result<Output> {
    let frames = a
        .inputs
        .par_iter()
        .map(|p| read_raw(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let run = calibrate_dark(&frames)?;
    run.calibration.write(&a.out)?;
    let mut warnings = run.warnings;
    if frames.len() < RECOMMENDED_DARK_FRAMES && warnings.is_empty() {
        warnings.push(format!("only {} dark frames, {RECOMMENDED_DARK_FRAMES} recommended", frames.len()));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let c = &run.calibration;
    let text = format!(
        "blc {:.3}, fpn over {} rows (max {:.3}) -> {}",
        c.blc,
        c.fpn.len(),
        c.fpn.iter().copied().fold(0.0, f64::max),
        a.out.display()
    );
    Ok(Output::new(
        json!({"out": a.out, "frames": frames.len(), "blc": c.blc, "rows": c.fpn.len(), "warnings": warnings}),
        text,
    ))
}

fn run(a: RunArgs) -> Result<Output> {
    let config = match &a.config {
        Some(p) => reading(p, IspConfig::read)?,
        None => IspConfig::default(),
    };
    let mut inputs = IspInputs::from_config(&config)?;
    if let Some(p) = &a.calib {
        inputs.calibration = Some(reading(p, DarkCalibration::read)?);
    }
    if let Some(p) = &a.reference {
        inputs.reference = Some(reading(p, PatchColors::read_reference)?);
    }
    if let Some(p) = &a.ccm {
        inputs.ccm = Some(reading(p, Ccm::read)?);
    }
    if let Some(p) = &a.checker {
        inputs.annotation = Some(reading(p, read_checker_annotation)?);
    }
    if let Some(p) = &a.events {
        inputs.events = Some(reading(p, read_events)?);
    }
    let raw = reading(&a.raw, read_raw)?;
    let (img, report) = run_isp(&raw, &config, &inputs)?;
    write_rgb_png(&img, &a.out)?;
    if let Some(p) = &a.report {
        atomic_write(p, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    let mut text = format!("stages: {}\n", report.stage_names().join(" -> "));
    if let Some(g) = &report.wb_gains {
        writeln!(text, "wb gains: r={:.6} g={:.6} b={:.6}", g.r, g.g, g.b)?;
    }
    if let Some(m) = &report.ccm {
        writeln!(text, "ccm:")?;
        for row in &m.matrix {
            writeln!(text, "  {:>10.6} {:>10.6} {:>10.6}", row[0], row[1], row[2])?;
        }
    }
    if let Some(f) = &report.ccm_fit {
        writeln!(text, "ccm fit: objective {:.6} -> {:.6}", f.initial_objective, f.final_objective)?;
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    write!(text, "wrote {}", a.out.display())?;
    Ok(Output::new(
        json!({
            "out": a.out,
            "stages": report.stage_names(),
            "wb_gains": report.wb_gains,
            "ccm": report.ccm,
            "ccm_fit": report.ccm_fit,
            "warnings": report.warnings,
        }),
        text,
    ))
}

fn ccm_fit(a: CcmFitArgs) -> Result<Output> {
    let measured = PatchColors::read(&a.measured).with_context(|| format!("reading {}", a.measured.display()))?;
    let reference = reading(&a.reference, PatchColors::read_reference)?;
    let opts = FitOptions {
        white_preserve: a.white_preserve,
        exposure_normalize: !a.no_exposure_normalize,
    };
    let (m, report) = fit_ccm(&measured, &reference, opts)?;
    m.write(&a.out)?;
    let mut text = String::new();
    for row in &m.matrix {
        writeln!(text, "{:>10.6} {:>10.6} {:>10.6}", row[0], row[1], row[2])?;
    }
    write!(
        text,
        "objective {:.6} -> {:.6} after {} iterations ({})",
        report.initial_objective,
        report.final_objective,
        report.iterations,
        if report.converged { "converged" } else { "iteration cap" }
    )?;
    Ok(Output::new(json!({"out": a.out, "ccm": m, "report": report}), text))
}

fn window_of(stream: &EventStream, w: &TimeWindow) -> Result<(u64, u64)> {
    let span = stream.time_span();
    let t0 = w.t0.or(span.map(|s| s.0));
    let t1 = w.t1.or(span.map(|s| s.1 + 1));
    match (t0, t1) {
        (Some(t0), Some(t1)) => Ok((t0, t1)),
        _ => Err(usage("stream is empty; pass --t0 and --t1")),
    }
}

fn events_voxelize(a: VoxelizeArgs) -> Result<Output> {
    let stream = reading(&a.input, read_events)?;
    let (t0, t1) = window_of(&stream, &a.window)?;
    let grid = voxelize(&stream, t0, t1, a.bins)?;
    write_voxel(&grid, &a.out)?;
    let text = format!(
        "{} bins x {}x{} over [{t0}, {t1}), signed mass {:.3} -> {}",
        grid.bins,
        grid.width,
        grid.height,
        grid.total(),
        a.out.display()
    );
    Ok(Output::new(
        json!({"out": a.out, "bins": grid.bins, "width": grid.width, "height": grid.height, "t0": t0, "t1": t1, "total": grid.total()}),
        text,
    ))
}

fn luminance_plane(path: &Path) -> Result<Plane> {
    let img = decode_image(&reading(path, read_rgb_png)?);
    let data = img
        .data()
        .chunks(3)
        .map(|p| luminance([p[0] as f64, p[1] as f64, p[2] as f64]))
        .collect();
    Ok(Plane::new(img.width(), img.height(), data)?)
}

fn events_simulate(a: SimulateArgs) -> Result<Output> {
    let l0 = log_intensity(&luminance_plane(&a.frame0)?, DEFAULT_LOG_FLOOR)?;
    let l1 = log_intensity(&luminance_plane(&a.frame1)?, DEFAULT_LOG_FLOOR)?;
    let stream = simulate_events(&l0, &l1, a.theta, a.t0, a.t1)?;
    write_events(&stream, &a.out)?;
    let text = format!("{} events at θ={} -> {}", stream.len(), a.theta, a.out.display());
    Ok(Output::new(
        json!({"out": a.out, "events": stream.len(), "width": stream.width, "height": stream.height}),
        text,
    ))
}

fn events_activity(a: WindowArgs) -> Result<Output> {
    let stream = reading(&a.input, read_events)?;
    let (t0, t1) = window_of(&stream, &a.window)?;
    let act = activity_map(&stream, t0, t1)?;
    let doc = json!({"width": act.width, "height": act.height, "t0": t0, "t1": t1, "total": act.total(), "counts": act.counts});
    if let Some(p) = &a.out {
        atomic_write(p, serde_json::to_string(&doc)?.as_bytes())?;
    }
    let peak = act.counts.iter().copied().fold(0.0, f64::max);
    let text = format!("{} events over {}x{} in [{t0}, {t1}), busiest pixel {peak}", act.total(), act.width, act.height);
    let json = match &a.out {
        Some(p) => json!({"out": p, "total": act.total(), "t0": t0, "t1": t1}),
        None => doc,
    };
    Ok(Output::new(json, text))
}

fn events_rate(a: RateArgs) -> Result<Output> {
    let stream = reading(&a.input, read_events)?;
    let series = event_rate(&stream, a.bin_width)?;
    let rates = series.rates();
    let mut csv = String::from("t_start_us,count,rate_hz\n");
    for (i, (c, r)) in series.counts.iter().zip(&rates).enumerate() {
        writeln!(csv, "{},{c},{r}", series.t0 + i as u64 * series.bin_width)?;
    }
    let json = match &a.out {
        Some(p) => {
            atomic_write(p, csv.as_bytes())?;
            json!({"out": p, "bins": series.counts.len(), "bin_width": series.bin_width})
        }
        None => json!({"t0": series.t0, "bin_width": series.bin_width, "counts": series.counts, "rates": rates}),
    };
    let text = match &a.out {
        Some(p) => format!("{} bins of {} us -> {}", series.counts.len(), series.bin_width, p.display()),
        None => csv.trim_end().to_string(),
    };
    Ok(Output::new(json, text))
}

fn events_flicker(a: RateArgs) -> Result<Output> {
    let stream = reading(&a.input, read_events)?;
    let report = flicker_score(&stream, a.bin_width)?;
    let doc = serde_json::to_value(&report)?;
    if let Some(p) = &a.out {
        atomic_write(p, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    let text = format!(
        "dominant {:.2} Hz, periodicity {:.4} ({})",
        report.dominant_frequency,
        report.periodicity_score,
        if report.flickering { "flicker" } else { "steady" }
    );
    Ok(Output::new(doc, text))
}

fn eval(a: EvalArgs) -> Result<Output> {
    let names: Vec<&str> = a.metrics.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if let Some(bad) = names.iter().find(|n| !["psnr", "ssim", "l1"].contains(n)) {
        return Err(usage(format!("unknown metric `{bad}` (expected psnr, ssim, l1)")));
    }
    if names.is_empty() {
        return Err(usage("no metrics requested"));
    }
    let pred = reading(&a.pred, read_rgb_png)?;
    let reference = reading(&a.reference, read_rgb_png)?;
    let mut json = serde_json::Map::new();
    let mut text = Vec::new();
    for name in names {
        let v = match name {
            "psnr" => psnr(&pred, &reference, a.peak)?,
            "ssim" => ssim(&pred, &reference)?,
            _ => l1(&pred, &reference)?,
        };
        json.insert(name.to_string(), metric_json(v));
        text.push(format!("{name} {}", if v.is_infinite() { "inf".to_string() } else { format!("{v:.6}") }));
    }
    Ok(Output::new(Value::Object(json), text.join("\n")))
}

#[derive(Deserialize)]
struct ManifestEntry {
    frame: PathBuf,
    annotation: PathBuf,
}

fn load_manifest(path: &Path) -> Result<Vec<(RgbImage, CheckerAnnotation)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    entries
        .par_iter()
        .map(|e| {
            let frame = base.join(&e.frame);
            let ann = base.join(&e.annotation);
            let img = read_rgb_png(&frame).with_context(|| format!("reading {}", frame.display()))?;
            let ann = read_checker_annotation(&ann).with_context(|| format!("reading {}", ann.display()))?;
            Ok((img, ann))
        })
        .collect()
}

fn report_color_accuracy(a: ColorAccuracyArgs) -> Result<Output> {
    let frames = load_manifest(&a.manifest)?;
    let reference = reading(&a.reference, PatchColors::read_reference)?;
    let report = color_accuracy(&frames, &reference, a.window)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    atomic_write(&a.out_csv, &csv)?;
    let summary = json!({"frames": report.frames, "delta_e00": report.delta_e00, "delta_eab": report.delta_eab});
    if let Some(p) = &a.out_json {
        atomic_write(p, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    let (d, e) = (&report.delta_e00, &report.delta_eab);
    let text = format!(
        "{} frames\nΔE00 mean {:.4} median {:.4} mean-of-max {:.4}\nΔEab mean {:.4} median {:.4} mean-of-max {:.4}",
        report.frames, d.mean, d.median, d.mean_of_max, e.mean, e.median, e.mean_of_max
    );
    Ok(Output::new(summary, text))
}

fn report_stability(a: StabilityArgs) -> Result<Output> {
    let frames = load_manifest(&a.manifest)?;
    let report = temporal_stability(&frames, a.window)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    atomic_write(&a.out_csv, &csv)?;
    let per_patch: Vec<Value> = report
        .patches
        .iter()
        .map(|p| json!({"patch": p.patch, "max_diff": p.max_diff}))
        .collect();
    let summary = json!({"frames": report.frames, "max_diff": report.max_diff, "patches": per_patch});
    if let Some(p) = &a.out_json {
        atomic_write(p, serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    let worst = report
        .patches
        .iter()
        .max_by(|x, y| x.max_diff.total_cmp(&y.max_diff))
        .map(|p| p.patch)
        .unwrap_or(0);
    let text = format!(
        "{} frames, max frame-to-frame diff {:.5} (patch {worst})",
        report.frames, report.max_diff
    );
    Ok(Output::new(summary, text))
}

fn synth(a: SynthArgs) -> Result<Output> {
    let reference_text = match &a.reference {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => BUILTIN_REFERENCE.to_string(),
    };
    let reference = PatchColors::reference_from_json(&reference_text)?;
    let mut scene = ChartScene::new(a.width, a.height, reference);
    scene.noise = a.noise;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let dir = &a.out_dir;
    let raw = scene.capture()?;
    write_raw(&raw, dir.join("scene.pgm"))?;
    let darks = scene.dark_frames(a.dark_frames)?;
    for (i, d) in darks.iter().enumerate() {
        write_raw(d, dir.join(format!("dark_{i:02}.pgm")))?;
    }
    let ann = scene.annotation()?;
    atomic_write(&dir.join("checker.json"), ann.to_labelme_json().as_bytes())?;
    atomic_write(&dir.join("reference.json"), reference_text.as_bytes())?;
    write_rgb_png(&hvsisp_core::color::encode_image(&scene.render_linear()), dir.join("target.png"))?;
    let text = format!(
        "{}x{} scene, {} dark frames, annotation and target render -> {}",
        a.width,
        a.height,
        darks.len(),
        dir.display()
    );
    Ok(Output::new(
        json!({"out_dir": dir, "width": a.width, "height": a.height, "dark_frames": darks.len()}),
        text,
    ))
}
