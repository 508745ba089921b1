//! Synthetic ColorChecker captures built by running the ISP backwards, plus
//! synthetic event streams.
//!
//! A target linear sRGB scene is mapped through the inverse color correction
//! and inverse white-balance gains, scaled to the bit depth, mosaicked with
//! event holes, and offset by a black level and per-row fixed pattern.
//! The sensor has unit gain; optional read noise is Gaussian.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::color::{Ccm, PatchColors, WbGains, PATCH_COUNT};
use crate::demosaic::{ColorSiteMap, Site};
use crate::error::{Error, Result};
use crate::frame_io::{CheckerAnnotation, ColorSpace, Event, EventStream, HolePhase, QuadBayerFrame, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct ChartScene {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub phase: HolePhase,
    /// Linear sRGB patch colors the ISP should reproduce.
    pub patches: PatchColors,
    pub background: [f64; 3],
    /// Linear scale applied to the whole scene before capture.
    pub exposure: f64,
    /// Correction the ISP is expected to recover; the sensor applies its inverse.
    pub ccm: Ccm,
    /// White-balance gains the ISP is expected to recover; the sensor divides by them.
    pub gains: WbGains,
    pub blc: f64,
    pub fpn: Vec<f64>,
    /// Read noise standard deviation as a fraction of full scale.
    pub noise: f64,
    pub seed: u64,
}

impl ChartScene {
    /// A noise-free scene with a mild color cast and crosstalk.
    pub fn new(width: usize, height: usize, patches: PatchColors) -> Self {
        ChartScene {
            width,
            height,
            bit_depth: 10,
            phase: HolePhase::default(),
            patches,
            background: [0.02; 3],
            exposure: 0.8,
            ccm: Ccm {
                matrix: [[1.25, -0.15, -0.05], [-0.2, 1.3, -0.2], [-0.05, -0.15, 1.25]],
            },
            gains: WbGains { r: 1.6, g: 1.0, b: 1.4 },
            blc: 64.0,
            fpn: default_fpn(height),
            noise: 0.0,
            seed: 0,
        }
    }

    /// Pixel rectangle `(x0, y0, cell)` of the 6×4 chart grid.
    fn layout(&self) -> (f64, f64, f64) {
        let cell = (self.width as f64 * 0.84 / 6.0).min(self.height as f64 * 0.84 / 4.0).floor();
        let x0 = ((self.width as f64 - 6.0 * cell) / 2.0).floor();
        let y0 = ((self.height as f64 - 4.0 * cell) / 2.0).floor();
        (x0, y0, cell)
    }

    /// Corner-patch annotation in pixel coordinates.
    pub fn annotation(&self) -> Result<CheckerAnnotation> {
        let (x0, y0, cell) = self.layout();
        let center = |r: usize, c: usize| [x0 + (c as f64 + 0.5) * cell - 0.5, y0 + (r as f64 + 0.5) * cell - 0.5];
        CheckerAnnotation::new(center(0, 0), center(0, 5), center(3, 0), center(3, 5), self.width, self.height)
    }

    /// The target scene in linear sRGB.
    pub fn render_linear(&self) -> RgbImage {
        let (x0, y0, cell) = self.layout();
        let inset = (cell * 0.12).round();
        let mut img = RgbImage::filled(self.width, self.height, self.background.map(|v| v as f32), ColorSpace::Linear);
        for p in 0..PATCH_COUNT {
            let (r, c) = (p / 6, p % 6);
            let px0 = (x0 + c as f64 * cell + inset) as usize;
            let py0 = (y0 + r as f64 * cell + inset) as usize;
            let px1 = (x0 + (c + 1) as f64 * cell - inset) as usize;
            let py1 = (y0 + (r + 1) as f64 * cell - inset) as usize;
            let color = self.patches.colors()[p].map(|v| v as f32);
            for y in py0..py1.min(self.height) {
                for x in px0..px1.min(self.width) {
                    img.set_pixel(x, y, color);
                }
            }
        }
        img
    }

    fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 || self.width % 2 != 0 || self.height % 2 != 0 {
            return Err(Error::Range(format!("scene {}x{} must be even and at least 16x16", self.width, self.height)));
        }
        if self.fpn.len() != self.height {
            return Err(Error::Shape(format!("fpn has {} rows, scene has {}", self.fpn.len(), self.height)));
        }
        if !(self.exposure > 0.0 && self.noise >= 0.0 && self.blc >= 0.0) {
            return Err(Error::Range("exposure must be > 0, noise and blc >= 0".into()));
        }
        self.gains.validate()
    }

    /// Per-pixel sensor response before quantization, in [0, 1] units.
    fn sensor_color(&self, inverse: &Ccm, rgb: [f32; 3]) -> [f64; 3] {
        let lin = rgb.map(|v| v as f64 * self.exposure);
        let raw = inverse.apply(lin);
        let g = self.gains.as_array();
        [0, 1, 2].map(|c| raw[c] / g[c])
    }

    /// The RAW capture of the scene.
    pub fn capture(&self) -> Result<QuadBayerFrame> {
        self.validate()?;
        let inv = nalgebra::Matrix3::from_fn(|i, j| self.ccm.matrix[i][j])
            .try_inverse()
            .ok_or_else(|| Error::Range("scene CCM is singular".into()))?;
        let inverse = Ccm {
            matrix: [0, 1, 2].map(|i| [0, 1, 2].map(|j| inv[(i, j)])),
        };
        let scene = self.render_linear();
        let sites = ColorSiteMap::from_phase(self.phase);
        let max = ((1u32 << self.bit_depth) - 1) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise * max).map_err(|e| Error::Range(e.to_string()))?;
        let mut data = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let signal = match sites.site(x, y) {
                    Site::Color(c) => self.sensor_color(&inverse, scene.pixel(x, y))[c.index()].max(0.0) * max,
                    Site::Hole => 0.0,
                };
                let n = if self.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                data.push((signal + n + self.blc + self.fpn[y]).round().clamp(0.0, max) as u16);
            }
        }
        QuadBayerFrame::new(self.width, self.height, self.bit_depth, data, self.phase)
    }

    /// Dark frames with the scene's black level, fixed pattern and read noise.
    pub fn dark_frames(&self, count: usize) -> Result<Vec<QuadBayerFrame>> {
        self.validate()?;
        let max = ((1u32 << self.bit_depth) - 1) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_da4c);
        let noise = Normal::new(0.0, self.noise * max).map_err(|e| Error::Range(e.to_string()))?;
        (0..count)
            .map(|_| {
                let data = (0..self.width * self.height)
                    .map(|i| {
                        let n = if self.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                        (self.blc + self.fpn[i / self.width] + n).round().clamp(0.0, max) as u16
                    })
                    .collect();
                QuadBayerFrame::new(self.width, self.height, self.bit_depth, data, self.phase)
            })
            .collect()
    }
}

/// Smooth non-negative per-row offsets of a few counts.
pub fn default_fpn(height: usize) -> Vec<f64> {
    (0..height).map(|r| (3.0 + 2.0 * (r as f64 * 0.37).sin()).round()).collect()
}

/// Single-pixel stream whose count in bin `i` is `round(base + amplitude·sin(2π·f·t_i))`,
/// with events spread evenly inside each bin.
pub fn modulated_stream(base: f64, amplitude: f64, freq_hz: f64, bins: usize, bin_width: u64) -> Result<EventStream> {
    if bin_width == 0 || base < amplitude.abs() {
        return Err(Error::Range("need bin_width > 0 and base >= |amplitude|".into()));
    }
    let mut events = Vec::new();
    for i in 0..bins {
        let t_sec = i as f64 * bin_width as f64 * 1e-6;
        let count = (base + amplitude * (2.0 * std::f64::consts::PI * freq_hz * t_sec).sin()).round() as u64;
        for k in 0..count {
            events.push(Event {
                t: i as u64 * bin_width + k * bin_width / count,
                x: 0,
                y: 0,
                p: if k % 2 == 0 { 1 } else { -1 },
            });
        }
    }
    EventStream::new(1, 1, events)
}
