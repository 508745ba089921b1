//! The staged ISP: dark correction, hole fill, demosaic, white balance,
//! highlight clip, denoise, color correction and gamma, in that order.

mod config;
mod denoise;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    CcmConfig, CcmMode, DarkConfig, DemosaicConfig, DenoiseConfig, DenoiseMethod, EventWindowConfig, GammaConfig,
    HighlightConfig, HolesConfig, IspConfig, PatchConfig, WbConfig, WbMode, DEFAULT_ACTIVITY_LAMBDA,
    DEFAULT_DENOISE_SIGMA,
};
pub use denoise::denoise;

use crate::calibration::{apply_dark_correction, DarkCalibration};
use crate::color::{
    apply_ccm, apply_wb, encode_image, estimate_wb, extract_patches, fit_ccm, highlight_clip, patch_centers, Ccm,
    FitOptions, FitReport, PatchColors, WbGains, DEFAULT_WB_EPSILON,
};
use crate::demosaic::{demosaic, event_guided_direction, fill_event_holes, ColorSiteMap, Site};
use crate::error::{Error, Result};
use crate::events::{activity_map, EventActivity};
use crate::frame_io::{CheckerAnnotation, EventStream, QuadBayerFrame, RgbImage};

/// Everything `run_isp` may need besides the RAW frame and the config.
#[derive(Debug, Clone, Default)]
pub struct IspInputs {
    pub calibration: Option<DarkCalibration>,
    pub annotation: Option<CheckerAnnotation>,
    pub events: Option<EventStream>,
    pub reference: Option<PatchColors>,
    pub ccm: Option<Ccm>,
}

impl IspInputs {
    /// Load the calibration, reference chart and CCM files named in `config`.
    pub fn from_config(config: &IspConfig) -> Result<Self> {
        let calibration = config.dark.calibration.as_ref().map(DarkCalibration::read).transpose()?;
        let reference = config.ccm.reference.as_ref().map(PatchColors::read_reference).transpose()?;
        let ccm = config.ccm.file.as_ref().map(Ccm::read).transpose()?;
        Ok(IspInputs {
            calibration,
            reference,
            ccm,
            ..IspInputs::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub mean: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub elapsed_ms: f64,
    pub stats: ChannelStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StageReport {
    pub stages: Vec<StageEntry>,
    pub wb_gains: Option<WbGains>,
    pub ccm: Option<Ccm>,
    pub ccm_fit: Option<FitReport>,
    pub event_window: Option<(u64, u64)>,
    pub warnings: Vec<String>,
}

impl StageReport {
    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.stage.as_str()).collect()
    }
}

struct Accumulator {
    min: [f64; 3],
    max: [f64; 3],
    sum: [f64; 3],
    n: [usize; 3],
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
            sum: [0.0; 3],
            n: [0; 3],
        }
    }

    fn push(&mut self, c: usize, v: f64) {
        self.min[c] = self.min[c].min(v);
        self.max[c] = self.max[c].max(v);
        self.sum[c] += v;
        self.n[c] += 1;
    }

    fn finish(self) -> ChannelStats {
        let fix = |v: f64| if v.is_finite() { v } else { 0.0 };
        ChannelStats {
            min: self.min.map(fix),
            max: self.max.map(fix),
            mean: [0, 1, 2].map(|c| if self.n[c] == 0 { 0.0 } else { self.sum[c] / self.n[c] as f64 }),
        }
    }
}

fn image_stats(img: &RgbImage) -> ChannelStats {
    let mut acc = Accumulator::new();
    for p in img.data().chunks_exact(3) {
        for c in 0..3 {
            acc.push(c, p[c] as f64);
        }
    }
    acc.finish()
}

/// Per-channel statistics of a mosaic over its color sites, normalized to [0, 1].
fn mosaic_stats(frame: &QuadBayerFrame, sites: &ColorSiteMap) -> ChannelStats {
    let max = frame.max_value() as f64;
    let mut acc = Accumulator::new();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            let channel = match sites.site(x, y) {
                Site::Color(c) => c,
                Site::Hole if frame.holes_filled => sites.fill_channel(),
                Site::Hole => continue,
            };
            acc.push(channel.index(), frame.get(x, y) as f64 / max);
        }
    }
    acc.finish()
}

fn activity_window(config: &IspConfig, raw: &QuadBayerFrame, events: &EventStream) -> (u64, u64) {
    let span = events.time_span().map_or((0, 1), |(a, b)| (a, b + 1));
    let exposure = raw.exposure.map(|e| {
        let end = e.frame_start + (raw.height() - 1) as f64 * e.row_readout_delta + e.exposure_time;
        (e.frame_start.max(0.0).floor() as u64, end.max(0.0).ceil() as u64)
    });
    let (d0, d1) = exposure.filter(|(a, b)| b > a).unwrap_or(span);
    let t0 = config.events.t0.unwrap_or(d0);
    let t1 = config.events.t1.unwrap_or(d1).max(t0 + 1);
    (t0, t1)
}

struct Stages<'a> {
    report: &'a mut StageReport,
}

impl Stages<'_> {
    fn record(&mut self, stage: &str, started: Instant, stats: ChannelStats) {
        self.report.stages.push(StageEntry {
            stage: stage.to_string(),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            stats,
        });
    }
}

/// Run the configured ISP stages on one RAW frame.
///
/// The returned image is gamma-encoded sRGB when the gamma stage is enabled
/// and linear otherwise.
pub fn run_isp(raw: &QuadBayerFrame, config: &IspConfig, inputs: &IspInputs) -> Result<(RgbImage, StageReport)> {
    config.validate()?;
    raw.validate()?;
    let mut report = StageReport::default();
    let mut stages = Stages { report: &mut report };
    let sites = ColorSiteMap::from_phase(raw.phase);

    let needs_events = [
        ("holes", config.holes.enabled && config.holes.guided),
        ("demosaic", config.demosaic.guided),
        (
            "denoise",
            config.denoise.event_weighted && config.denoise.method != DenoiseMethod::None,
        ),
    ];
    let activity: Option<EventActivity> = match needs_events.iter().find(|(_, need)| *need) {
        Some((stage, _)) => {
            let events = inputs
                .events
                .as_ref()
                .ok_or_else(|| Error::config(*stage, "event guidance enabled but no event stream supplied"))?;
            if events.width * 2 != raw.width() || events.height * 2 != raw.height() {
                return Err(Error::Shape(format!(
                    "event sensor {}x{} is not half of RAW {}x{}",
                    events.width,
                    events.height,
                    raw.width(),
                    raw.height()
                )));
            }
            let (t0, t1) = activity_window(config, raw, events);
            stages.report.event_window = Some((t0, t1));
            Some(activity_map(events, t0, t1)?)
        }
        None => None,
    };

    let mut frame = raw.clone();
    if config.dark.enabled {
        let t = Instant::now();
        let calib = inputs
            .calibration
            .as_ref()
            .ok_or_else(|| Error::config("dark", "dark correction enabled but no calibration supplied"))?;
        frame = apply_dark_correction(&frame, calib)?;
        stages.record("dark", t, mosaic_stats(&frame, &sites));
    }

    if !frame.holes_filled {
        if config.holes.enabled {
            let t = Instant::now();
            let guide = if config.holes.guided { activity.as_ref() } else { None };
            frame = fill_event_holes(&frame, &sites, guide)?;
            stages.record("holes", t, mosaic_stats(&frame, &sites));
        } else {
            frame.holes_filled = true;
        }
    }

    let t = Instant::now();
    let directions = match (&activity, config.demosaic.guided) {
        (Some(a), true) => Some(event_guided_direction(a, frame.width(), frame.height(), config.demosaic.margin)?),
        _ => None,
    };
    let mut img = demosaic(&frame, &sites, directions.as_ref())?;
    stages.record("demosaic", t, image_stats(&img));

    let centers = || -> Result<_> {
        let ann = inputs
            .annotation
            .as_ref()
            .ok_or_else(|| Error::config("checker", "annotation missing"))?;
        patch_centers(ann)
    };

    if config.wb.enabled {
        let t = Instant::now();
        let gains = match &config.wb.mode {
            WbMode::Fixed { gains } => *gains,
            WbMode::Checker => {
                let c = centers().map_err(|e| match e {
                    Error::Config { .. } => Error::config("wb", "wb.mode=checker requires a checker annotation"),
                    other => other,
                })?;
                estimate_wb(&extract_patches(&img, &c, config.patches.window)?, DEFAULT_WB_EPSILON)?
            }
        };
        img = apply_wb(&img, &gains);
        stages.report.wb_gains = Some(gains);
        stages.record("wb", t, image_stats(&img));
    }

    if config.highlight.enabled {
        let t = Instant::now();
        img = highlight_clip(&img, config.highlight.fraction)?;
        stages.record("highlight", t, image_stats(&img));
    }

    if config.denoise.method != DenoiseMethod::None {
        let t = Instant::now();
        let weight = match (&activity, config.denoise.event_weighted) {
            (Some(a), true) => Some(detail_weight(a, img.width(), img.height(), config.denoise.lambda)),
            _ => None,
        };
        img = denoise(&img, config.denoise.method, config.denoise.sigma, weight.as_deref())?;
        stages.record("denoise", t, image_stats(&img));
    }

    if config.ccm.enabled {
        let t = Instant::now();
        let ccm = match config.ccm.mode {
            CcmMode::Identity => Ccm::IDENTITY,
            CcmMode::File => *inputs
                .ccm
                .as_ref()
                .ok_or_else(|| Error::config("ccm", "ccm.mode=file requires a CCM file"))?,
            CcmMode::Fit => {
                let c = centers().map_err(|e| match e {
                    Error::Config { .. } => Error::config("ccm", "ccm.mode=fit requires a checker annotation"),
                    other => other,
                })?;
                let reference = inputs
                    .reference
                    .as_ref()
                    .ok_or_else(|| Error::config("ccm", "ccm.mode=fit requires reference chart colors"))?;
                let measured = extract_patches(&img, &c, config.patches.window)?;
                let opts = FitOptions {
                    white_preserve: config.ccm.white_preserve,
                    exposure_normalize: config.ccm.exposure_normalize,
                };
                let (m, fit) = fit_ccm(&measured, reference, opts)?;
                stages.report.ccm_fit = Some(fit);
                m
            }
        };
        img = apply_ccm(&img, &ccm);
        stages.report.ccm = Some(ccm);
        stages.record("ccm", t, image_stats(&img));
    }

    if config.gamma.enabled {
        let t = Instant::now();
        img = encode_image(&img);
        stages.record("gamma", t, image_stats(&img));
    }
    Ok((img, report))
}

/// Per-pixel detail-preservation weight `1 − exp(−λ·activity)` at full
/// resolution (activity upsampled by nearest neighbor).
pub fn detail_weight(activity: &EventActivity, width: usize, height: usize, lambda: f64) -> Vec<f32> {
    let coarse: Vec<f32> = activity
        .counts
        .iter()
        .map(|&a| (1.0 - (-lambda * a).exp()) as f32)
        .collect();
    (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| coarse[((y / 2).min(activity.height - 1)) * activity.width + (x / 2).min(activity.width - 1)])
        .collect()
}
