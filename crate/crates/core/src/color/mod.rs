//! Colorimetry: CIELAB conversion, color differences, white balance, gamma
//! and highlight handling. Patch extraction and CCM fitting live in submodules.

mod ccm;
mod patches;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{atomic_write, ColorSpace, RgbImage};

pub use ccm::{apply_ccm, fit_ccm, Ccm, FitOptions, FitReport, FitStart, MAX_FIT_ITERATIONS};
pub use patches::{extract_patches, patch_centers, DEFAULT_WINDOW_FRACTION};

/// Number of patches on a ColorChecker chart.
pub const PATCH_COUNT: usize = 24;
/// 1-based index of the neutral patch that anchors white balance.
pub const WB_PATCH: usize = 21;
pub const DEFAULT_WB_EPSILON: f64 = 1e-4;
pub const DEFAULT_SATURATION_FRACTION: f64 = 0.95;

/// Linear sRGB (D65) to CIE XYZ, rows indexed by output.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124, 0.3576, 0.1805],
    [0.2126, 0.7152, 0.0722],
    [0.0193, 0.1192, 0.9505],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    #[serde(rename = "L")]
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        LabColor { l, a, b }
    }
}

/// 24 linear RGB triplets in ColorChecker row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct PatchColors([[f64; 3]; PATCH_COUNT]);

impl TryFrom<Vec<[f64; 3]>> for PatchColors {
    type Error = Error;

    fn try_from(v: Vec<[f64; 3]>) -> Result<Self> {
        PatchColors::new(v)
    }
}

impl From<PatchColors> for Vec<[f64; 3]> {
    fn from(p: PatchColors) -> Self {
        p.0.to_vec()
    }
}

impl PatchColors {
    pub fn new(colors: Vec<[f64; 3]>) -> Result<Self> {
        let n = colors.len();
        let arr: [[f64; 3]; PATCH_COUNT] = colors
            .try_into()
            .map_err(|_| Error::Invariant(format!("expected {PATCH_COUNT} patches, got {n}")))?;
        let p = PatchColors(arr);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.0.iter().enumerate() {
            if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Invariant(format!("patch {} = {c:?} must be finite and >= 0", i + 1)));
            }
        }
        Ok(())
    }

    pub fn colors(&self) -> &[[f64; 3]; PATCH_COUNT] {
        &self.0
    }

    /// Patch by 1-based index.
    pub fn patch(&self, index: usize) -> [f64; 3] {
        self.0[index - 1]
    }

    pub fn map(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self> {
        PatchColors::new(self.0.iter().map(|&c| f(c)).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), serde_json::to_string_pretty(self)?.as_bytes())
    }

    /// Parse a reference chart stored as encoded sRGB and decode it to linear.
    pub fn reference_from_json(text: &str) -> Result<Self> {
        let encoded: Vec<[f64; 3]> = serde_json::from_str(text)?;
        if let Some(v) = encoded.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Range(format!("reference value {v} outside [0, 1]")));
        }
        PatchColors::new(encoded.iter().map(|c| c.map(srgb_decode)).collect())
    }

    pub fn read_reference(path: impl AsRef<Path>) -> Result<Self> {
        Self::reference_from_json(&std::fs::read_to_string(path)?)
    }
}

/// Green-anchored per-channel white-balance multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WbGains {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl WbGains {
    pub const UNIT: WbGains = WbGains { r: 1.0, g: 1.0, b: 1.0 };

    pub fn new(r: f64, b: f64) -> Result<Self> {
        let gains = WbGains { r, g: 1.0, b };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        if !([self.r, self.g, self.b].iter().all(|v| v.is_finite() && *v > 0.0) && self.g == 1.0) {
            return Err(Error::Invariant(format!("invalid gains {self:?}: need all > 0 and g == 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

pub fn estimate_wb(patches: &PatchColors, epsilon: f64) -> Result<WbGains> {
    let [r, g, b] = patches.patch(WB_PATCH);
    if let Some((name, v)) = [("R", r), ("G", g), ("B", b)].into_iter().find(|(_, v)| *v <= epsilon) {
        return Err(Error::Illuminant(format!(
            "patch {WB_PATCH} channel {name} = {v} is at or below {epsilon}"
        )));
    }
    WbGains::new(g / r, g / b)
}

pub fn apply_wb(img: &RgbImage, gains: &WbGains) -> RgbImage {
    let k = gains.as_array().map(|v| v as f32);
    img.map_pixels(img.space, |p| [0, 1, 2].map(|c| (p[c] * k[c]).clamp(0.0, 1.0)))
}

/// Pixels with any channel at or above `fraction` become pure white.
pub fn highlight_clip(img: &RgbImage, fraction: f64) -> Result<RgbImage> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("highlight", format!("saturation fraction {fraction} not in (0, 1]")));
    }
    let t = fraction as f32;
    Ok(img.map_pixels(img.space, |p| if p.iter().any(|&v| v >= t) { [1.0; 3] } else { p }))
}

pub fn srgb_encode(x: f64) -> f64 {
    if x <= 0.0031308 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_decode(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Gamma-encode a linear image (values clamped to [0, 1] first).
pub fn encode_image(img: &RgbImage) -> RgbImage {
    img.map_pixels(ColorSpace::Srgb, |p| p.map(|v| srgb_encode(v.clamp(0.0, 1.0) as f64) as f32))
}

pub fn decode_image(img: &RgbImage) -> RgbImage {
    img.map_pixels(ColorSpace::Linear, |p| p.map(|v| srgb_decode(v.clamp(0.0, 1.0) as f64) as f32))
}

pub fn linear_to_xyz(rgb: [f64; 3]) -> [f64; 3] {
    RGB_TO_XYZ.map(|row| row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2])
}

/// Relative luminance of a linear sRGB triplet.
pub fn luminance(rgb: [f64; 3]) -> f64 {
    linear_to_xyz(rgb)[1]
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn linear_to_lab(rgb: [f64; 3]) -> LabColor {
    let xyz = linear_to_xyz(rgb);
    let white = linear_to_xyz([1.0; 3]);
    let [fx, fy, fz] = [0, 1, 2].map(|i| lab_f(xyz[i] / white[i]));
    LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

pub fn delta_e_ab(p: LabColor, q: LabColor) -> f64 {
    ((p.l - q.l).powi(2) + (p.a - q.a).powi(2) + (p.b - q.b).powi(2)).sqrt()
}

/// CIEDE2000 color difference with unit weighting factors.
pub fn ciede2000(p: LabColor, q: LabColor) -> f64 {
    const POW25_7: f64 = 6_103_515_625.0;
    let c_bar = (p.a.hypot(p.b) + q.a.hypot(q.b)) / 2.0;
    let c7 = c_bar.powi(7);
    let g = 0.5 * (1.0 - (c7 / (c7 + POW25_7)).sqrt());

    let prime = |c: LabColor| {
        let a = (1.0 + g) * c.a;
        let chroma = a.hypot(c.b);
        let hue = if a == 0.0 && c.b == 0.0 {
            0.0
        } else {
            c.b.atan2(a).to_degrees().rem_euclid(360.0)
        };
        (chroma, hue)
    };
    let (c1, h1) = prime(p);
    let (c2, h2) = prime(q);

    let dl = q.l - p.l;
    let dc = c2 - c1;
    let chroma_product = c1 * c2;
    let dh = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2 - h1;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh_big = 2.0 * chroma_product.sqrt() * (dh.to_radians() / 2.0).sin();

    let l_mean = (p.l + q.l) / 2.0;
    let c_mean = (c1 + c2) / 2.0;
    let h_mean = if chroma_product == 0.0 {
        h1 + h2
    } else if (h1 - h2).abs() <= 180.0 {
        (h1 + h2) / 2.0
    } else if h1 + h2 < 360.0 {
        (h1 + h2 + 360.0) / 2.0
    } else {
        (h1 + h2 - 360.0) / 2.0
    };

    let cosd = |deg: f64| deg.to_radians().cos();
    let t = 1.0 - 0.17 * cosd(h_mean - 30.0) + 0.24 * cosd(2.0 * h_mean) + 0.32 * cosd(3.0 * h_mean + 6.0)
        - 0.20 * cosd(4.0 * h_mean - 63.0);
    let d_theta = 30.0 * (-((h_mean - 275.0) / 25.0).powi(2)).exp();
    let cm7 = c_mean.powi(7);
    let r_c = 2.0 * (cm7 / (cm7 + POW25_7)).sqrt();
    let l50 = (l_mean - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * c_mean;
    let s_h = 1.0 + 0.015 * c_mean * t;
    let r_t = -(2.0 * d_theta).to_radians().sin() * r_c;

    let (tl, tc, th) = (dl / s_l, dc / s_c, dh_big / s_h);
    (tl * tl + tc * tc + th * th + r_t * tc * th).max(0.0).sqrt()
}
