//! Plain-Rust bodies of the browser operations, testable off-wasm.

use serde_json::json;

use hvsisp_core::calibration::DarkCalibration;
use hvsisp_core::color::{
    ciede2000, delta_e_ab, linear_to_lab, srgb_decode, PatchColors, DEFAULT_WINDOW_FRACTION,
};
use hvsisp_core::events::{flicker_score, simulate_events, voxelize, VoxelGrid};
use hvsisp_core::frame_io::Plane;
use hvsisp_core::metrics::color_accuracy;
use hvsisp_core::pipeline::{run_isp, CcmMode, DenoiseMethod, IspConfig, IspInputs};
use hvsisp_core::synth::{modulated_stream, ChartScene};

const REFERENCE: &str = include_str!("../../../data/colorchecker_srgb.json");

pub fn reference() -> PatchColors {
    PatchColors::reference_from_json(REFERENCE).expect("bundled reference chart parses")
}

/// What the ISP panel lets the user toggle.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub width: usize,
    pub height: usize,
    pub noise: f64,
    pub white_balance: bool,
    pub color_correction: bool,
    pub denoise: DenoiseMethod,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            width: 384,
            height: 256,
            noise: 0.0,
            white_balance: true,
            color_correction: true,
            denoise: DenoiseMethod::None,
        }
    }
}

pub struct Rendered {
    pub width: usize,
    pub height: usize,
    pub rgba: Vec<u8>,
    /// JSON: stages, WB gains, CCM, mean ΔE00 against the reference chart.
    pub summary: String,
}

/// Capture a synthetic chart and develop it with the chosen stages.
pub fn render_chart(opts: &RenderOptions) -> Result<Rendered, String> {
    let e = |e: hvsisp_core::Error| e.to_string();
    let mut scene = ChartScene::new(opts.width, opts.height, reference());
    scene.noise = opts.noise;
    let raw = scene.capture().map_err(e)?;
    let ann = scene.annotation().map_err(e)?;

    let mut config = IspConfig::default();
    config.wb.enabled = opts.white_balance;
    config.ccm.mode = if opts.color_correction { CcmMode::Fit } else { CcmMode::Identity };
    config.denoise.method = opts.denoise;
    let inputs = IspInputs {
        calibration: Some(DarkCalibration {
            blc: scene.blc,
            fpn: scene.fpn.clone(),
        }),
        annotation: Some(ann.clone()),
        reference: Some(reference()),
        ..IspInputs::default()
    };
    let (img, report) = run_isp(&raw, &config, &inputs).map_err(e)?;
    let accuracy = color_accuracy(&[(img.clone(), ann)], &reference(), DEFAULT_WINDOW_FRACTION).map_err(e)?;

    let rgba = img
        .data()
        .chunks(3)
        .flat_map(|p| [q(p[0]), q(p[1]), q(p[2]), 255])
        .collect();
    let summary = json!({
        "stages": report.stage_names(),
        "wb_gains": report.wb_gains,
        "ccm": report.ccm.map(|m| m.matrix),
        "mean_delta_e00": accuracy.delta_e00.mean,
        "max_delta_e00": accuracy.delta_e00.mean_of_max,
        "elapsed_ms": report.stages.iter().map(|s| s.elapsed_ms).sum::<f64>(),
    });
    Ok(Rendered {
        width: img.width(),
        height: img.height(),
        rgba,
        summary: summary.to_string(),
    })
}

fn q(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Rate series and periodicity of a light modulated at `freq_hz`.
pub fn flicker(freq_hz: f64, depth: f64, duration_ms: usize) -> Result<String, String> {
    if !(0.0..=1.0).contains(&depth) {
        return Err(format!("modulation depth {depth} must lie in [0, 1]"));
    }
    let base = 60.0;
    let stream = modulated_stream(base, base * depth, freq_hz, duration_ms, 1000).map_err(|e| e.to_string())?;
    let report = flicker_score(&stream, 1000).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = (0..duration_ms)
        .map(|i| stream.window(i as u64 * 1000, (i as u64 + 1) * 1000).len())
        .collect();
    Ok(json!({
        "counts": counts,
        "dominant_frequency": report.dominant_frequency,
        "periodicity_score": report.periodicity_score,
        "flickering": report.flickering,
    })
    .to_string())
}

/// Events from a bright disc moving `shift` pixels to the right, binned into a voxel grid.
pub fn moving_disc_voxels(width: usize, height: usize, shift: f64, theta: f64, bins: usize) -> Result<VoxelGrid, String> {
    let e = |e: hvsisp_core::Error| e.to_string();
    let disc = |cx: f64| {
        let (cy, r) = (height as f64 / 2.0, height.min(width) as f64 / 4.0);
        let data = (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                // soft edge so several thresholds are crossed
                let inside = 1.0 / (1.0 + ((d - r) / 1.5).exp());
                (0.05 + 0.9 * inside).ln()
            })
            .collect();
        Plane::new(width, height, data).map_err(e)
    };
    let cx = width as f64 / 2.0 - shift / 2.0;
    let stream = simulate_events(&disc(cx)?, &disc(cx + shift)?, theta, 0, 10_000).map_err(e)?;
    voxelize(&stream, 0, 10_001, bins).map_err(e)
}

/// ΔE00 and ΔEab between two 8-bit sRGB colors.
pub fn color_difference(a: [u8; 3], b: [u8; 3]) -> String {
    let lab = |c: [u8; 3]| linear_to_lab(c.map(|v| srgb_decode(v as f64 / 255.0)));
    let (la, lb) = (lab(a), lab(b));
    json!({
        "lab1": [la.l, la.a, la.b],
        "lab2": [lb.l, lb.a, lb.b],
        "delta_e00": ciede2000(la, lb),
        "delta_eab": delta_e_ab(la, lb),
    })
    .to_string()
}
