//! Image-quality metrics and ColorChecker-based color evaluation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::color::{
    ciede2000, decode_image, delta_e_ab, encode_image, extract_patches, linear_to_lab, patch_centers, PatchColors,
    PATCH_COUNT,
};
use crate::error::{Error, Result};
use crate::frame_io::{CheckerAnnotation, ColorSpace, RgbImage};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_shape(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "images are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &RgbImage, b: &RgbImage, peak: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Range(format!("peak {peak} must be > 0")));
    }
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / n;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    })
}

pub fn l1(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_shape(a, b)?;
    let n = a.data().len() as f64;
    Ok(a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).abs()).sum::<f64>() / n)
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable "valid" Gaussian filtering of a single plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity over all fully-contained 11×11 Gaussian
/// windows, computed per channel and averaged. Dynamic range is 1.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_shape(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Shape(format!("{w}x{h} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let k = gaussian_kernel();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let per_channel: Vec<f64> = (0..3)
        .into_par_iter()
        .map(|c| {
            let x: Vec<f64> = a.data().iter().skip(c).step_by(3).map(|&v| v as f64).collect();
            let y: Vec<f64> = b.data().iter().skip(c).step_by(3).map(|&v| v as f64).collect();
            let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
            let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
            let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, w, h, &k));
            let n = mx.len();
            let total: f64 = (0..n)
                .map(|i| {
                    let (ux, uy) = (mx[i], my[i]);
                    let vx = sxx[i] - ux * ux;
                    let vy = syy[i] - uy * uy;
                    let cov = sxy[i] - ux * uy;
                    ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
                })
                .sum();
            total / n as f64
        })
        .collect();
    Ok(per_channel.iter().sum::<f64>() / 3.0)
}

/// Metric value for JSON output; infinities become the string `"inf"`.
pub fn metric_json(v: f64) -> serde_json::Value {
    if v.is_infinite() {
        serde_json::Value::String(if v > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        serde_json::json!(v)
    }
}

pub fn serialize_metric<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    metric_json(*v).serialize(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchError {
    pub frame: usize,
    /// 1-based ColorChecker index.
    pub patch: usize,
    pub delta_e00: f64,
    pub delta_eab: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean: f64,
    pub median: f64,
    pub mean_of_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorAccuracyReport {
    pub frames: usize,
    pub rows: Vec<PatchError>,
    pub delta_e00: Aggregates,
    pub delta_eab: Aggregates,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Aggregate per-frame error lists: overall mean and median, and the mean
/// over frames of each frame's worst patch.
pub fn aggregate(per_frame: &[Vec<f64>]) -> Aggregates {
    let mut all: Vec<f64> = per_frame.iter().flatten().copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let mean_of_max = per_frame
        .iter()
        .map(|f| f.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / per_frame.len() as f64;
    Aggregates {
        mean,
        median: median(&mut all),
        mean_of_max,
    }
}

fn linear(img: &RgbImage) -> RgbImage {
    match img.space {
        ColorSpace::Srgb => decode_image(img),
        ColorSpace::Linear => img.clone(),
    }
}

fn encoded(img: &RgbImage) -> RgbImage {
    match img.space {
        ColorSpace::Srgb => img.clone(),
        ColorSpace::Linear => encode_image(img),
    }
}

/// Per-patch ΔE00 and ΔEab of each frame's chart against the reference.
pub fn color_accuracy(
    frames: &[(RgbImage, CheckerAnnotation)],
    reference: &PatchColors,
    window_fraction: f64,
) -> Result<ColorAccuracyReport> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("color accuracy needs at least one frame".into()));
    }
    let ref_lab: Vec<_> = reference.colors().iter().map(|&c| linear_to_lab(c)).collect();
    let per_frame: Vec<Vec<PatchError>> = frames
        .par_iter()
        .enumerate()
        .map(|(i, (img, ann))| {
            let patches = extract_patches(&linear(img), &patch_centers(ann)?, window_fraction)?;
            Ok(patches
                .colors()
                .iter()
                .zip(&ref_lab)
                .enumerate()
                .map(|(p, (&rgb, &r))| {
                    let lab = linear_to_lab(rgb);
                    PatchError {
                        frame: i,
                        patch: p + 1,
                        delta_e00: ciede2000(lab, r),
                        delta_eab: delta_e_ab(lab, r),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let de00: Vec<Vec<f64>> = per_frame.iter().map(|f| f.iter().map(|e| e.delta_e00).collect()).collect();
    let deab: Vec<Vec<f64>> = per_frame.iter().map(|f| f.iter().map(|e| e.delta_eab).collect()).collect();
    Ok(ColorAccuracyReport {
        frames: frames.len(),
        rows: per_frame.into_iter().flatten().collect(),
        delta_e00: aggregate(&de00),
        delta_eab: aggregate(&deab),
    })
}

impl ColorAccuracyReport {
    /// One CSV row per frame-patch pair.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSeries {
    pub patch: usize,
    /// Encoded sRGB patch mean per frame.
    pub values: Vec<[f64; 3]>,
    /// Largest |v(t+1) − v(t)| over channels and frames.
    pub max_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub frames: usize,
    pub patches: Vec<PatchSeries>,
    pub max_diff: f64,
}

impl StabilityReport {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame", "patch", "r", "g", "b"]).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for s in &self.patches {
            for (t, v) in s.values.iter().enumerate() {
                w.write_record([t.to_string(), s.patch.to_string(), v[0].to_string(), v[1].to_string(), v[2].to_string()])
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Frame-to-frame fluctuation of every patch's encoded sRGB mean.
pub fn temporal_stability(frames: &[(RgbImage, CheckerAnnotation)], window_fraction: f64) -> Result<StabilityReport> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "temporal stability needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let per_frame: Vec<PatchColors> = frames
        .par_iter()
        .map(|(img, ann)| extract_patches(&encoded(img), &patch_centers(ann)?, window_fraction))
        .collect::<Result<_>>()?;
    let patches: Vec<PatchSeries> = (0..PATCH_COUNT)
        .map(|p| {
            let values: Vec<[f64; 3]> = per_frame.iter().map(|f| f.colors()[p]).collect();
            let max_diff = values
                .windows(2)
                .flat_map(|w| (0..3).map(move |c| (w[1][c] - w[0][c]).abs()))
                .fold(0.0, f64::max);
            PatchSeries {
                patch: p + 1,
                values,
                max_diff,
            }
        })
        .collect();
    let max_diff = patches.iter().map(|p| p.max_diff).fold(0.0, f64::max);
    Ok(StabilityReport {
        frames: frames.len(),
        patches,
        max_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::srgb_decode;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, f: impl Fn(usize) -> f32) -> RgbImage {
        RgbImage::new(w, h, (0..w * h * 3).map(f).collect(), ColorSpace::Srgb).unwrap()
    }

    fn offset(a: &RgbImage, d: f32) -> RgbImage {
        RgbImage::new(a.width(), a.height(), a.data().iter().map(|v| v + d).collect(), a.space).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = img(16, 16, |i| (i % 7) as f32 * 0.1);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let d1 = psnr(&a, &offset(&a, 0.1), 1.0).unwrap();
        assert!((d1 - 20.0).abs() < 1e-4, "{d1}");
        let half = img(16, 16, |_| 0.0);
        let d = psnr(&half, &img(16, 16, |_| 0.5), 1.0).unwrap();
        assert!((d - 6.020599913279624).abs() < 1e-9);
        assert!(matches!(psnr(&a, &img(8, 8, |_| 0.0), 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn inf_serializes_as_string() {
        assert_eq!(metric_json(f64::INFINITY), serde_json::json!("inf"));
        assert_eq!(metric_json(1.5), serde_json::json!(1.5));
    }

    #[test]
    fn ssim_cases() {
        let a = img(20, 20, |i| ((i * 31) % 17) as f32 / 17.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let c = img(20, 20, |_| 0.5);
        let neg = RgbImage::new(20, 20, c.data().iter().map(|v| 1.0 - v).collect(), ColorSpace::Srgb).unwrap();
        assert_eq!(ssim(&c, &neg).unwrap(), 1.0);
        let lo = img(20, 20, |_| 0.3);
        let hi = img(20, 20, |_| 0.7);
        let (x, y) = (0.3f32 as f64, 0.7f32 as f64);
        let want = (2.0 * x * y + 1e-4) / (x * x + y * y + 1e-4);
        assert!((ssim(&lo, &hi).unwrap() - want).abs() < 1e-9);
        assert!(matches!(ssim(&img(10, 30, |_| 0.0), &img(10, 30, |_| 0.0)), Err(Error::Shape(_))));
    }

    #[test]
    fn l1_cases() {
        let a = img(4, 4, |i| i as f32 / 48.0);
        assert_eq!(l1(&a, &a).unwrap(), 0.0);
        assert!((l1(&a, &offset(&a, 0.1)).unwrap() - 0.1).abs() < 1e-6);
    }

    fn chart(step: usize, fill: impl Fn(usize) -> [f32; 3]) -> (RgbImage, CheckerAnnotation) {
        let (w, h) = (6 * step, 4 * step);
        let mut im = RgbImage::filled(w, h, [0.0; 3], ColorSpace::Srgb);
        for y in 0..h {
            for x in 0..w {
                im.set_pixel(x, y, fill((y / step) * 6 + x / step));
            }
        }
        let c = step as f64 / 2.0 - 0.5;
        let s = step as f64;
        let ann = CheckerAnnotation::new([c, c], [c + 5.0 * s, c], [c, c + 3.0 * s], [c + 5.0 * s, c + 3.0 * s], w, h).unwrap();
        (im, ann)
    }

    fn encoded_ref(i: usize) -> [f32; 3] {
        [0.1 + i as f32 * 0.03, 0.5, 0.9 - i as f32 * 0.03]
    }

    fn reference() -> PatchColors {
        PatchColors::new((0..24).map(|i| encoded_ref(i).map(|v| srgb_decode(v as f64))).collect()).unwrap()
    }

    #[test]
    fn exact_render_has_zero_error() {
        let frames = vec![chart(16, encoded_ref), chart(16, encoded_ref)];
        let r = color_accuracy(&frames, &reference(), 0.25).unwrap();
        assert_eq!(r.rows.len(), 48);
        assert!(r.rows.iter().all(|e| e.delta_e00 < 1e-4 && e.delta_eab < 1e-4));
    }

    #[test]
    fn single_perturbed_patch_is_the_max() {
        let frames = vec![chart(16, |i| if i == 4 { [0.3, 0.6, 0.2] } else { encoded_ref(i) })];
        let r = color_accuracy(&frames, &reference(), 0.25).unwrap();
        let worst = r.rows.iter().max_by(|a, b| a.delta_e00.total_cmp(&b.delta_e00)).unwrap();
        assert_eq!(worst.patch, 5);
        assert!((r.delta_e00.mean_of_max - worst.delta_e00).abs() < 1e-12);
    }

    #[test]
    fn aggregates_by_hand() {
        let a = aggregate(&[vec![1.0, 2.0, 6.0], vec![3.0, 4.0, 5.0]]);
        assert_eq!(a.mean, 3.5);
        assert_eq!(a.median, 3.5);
        assert_eq!(a.mean_of_max, 5.5);
        assert_eq!(aggregate(&[vec![1.0, 9.0, 2.0]]).median, 2.0);
    }

    #[test]
    fn stability_cases() {
        let still = vec![chart(16, encoded_ref); 3];
        let r = temporal_stability(&still, 0.25).unwrap();
        assert_eq!(r.max_diff, 0.0);
        assert!(r.patches.iter().all(|p| p.values.len() == 3));

        let bright = chart(16, |i| if i == 4 { encoded_ref(i).map(|v| v + 0.02) } else { encoded_ref(i) });
        let pair = vec![chart(16, encoded_ref), bright];
        let r = temporal_stability(&pair, 0.25).unwrap();
        assert!((r.patches[4].max_diff - 0.02).abs() < 1e-6);
        assert!(r.patches.iter().enumerate().all(|(i, p)| i == 4 || p.max_diff == 0.0));
        let reversed: Vec<_> = pair.into_iter().rev().collect();
        assert_eq!(temporal_stability(&reversed, 0.25).unwrap().max_diff, r.max_diff);
        assert!(matches!(temporal_stability(&still[..1], 0.25), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn csv_has_one_row_per_pair() {
        let r = color_accuracy(&[chart(16, encoded_ref)], &reference(), 0.25).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 25);
        assert!(text.starts_with("frame,patch,delta_e00,delta_eab\n"));
    }

    fn arb_img() -> impl Strategy<Value = RgbImage> {
        prop::collection::vec(0.0f32..1.0, 12 * 12 * 3).prop_map(|d| RgbImage::new(12, 12, d, ColorSpace::Srgb).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ssim_reflexive_symmetric(a in arb_img(), b in arb_img()) {
            prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
            prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn l1_triangle(a in arb_img(), b in arb_img(), c in arb_img()) {
            prop_assert!(l1(&a, &c).unwrap() <= l1(&a, &b).unwrap() + l1(&b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn psnr_falls_with_noise(a in arb_img(), amp in 0.01f32..0.2) {
            let pattern = |i: usize| if i % 2 == 0 { 1.0f32 } else { -1.0 };
            let noisy = |k: f32| RgbImage::new(12, 12, a.data().iter().enumerate().map(|(i, v)| v + k * pattern(i)).collect(), ColorSpace::Srgb).unwrap();
            prop_assert!(psnr(&a, &noisy(amp), 1.0).unwrap() > psnr(&a, &noisy(amp * 1.5), 1.0).unwrap());
        }

        #[test]
        fn mean_below_mean_of_max(perturb in prop::collection::vec(0.0f32..0.3, 24)) {
            let frames = vec![chart(12, encoded_ref), chart(12, |i| encoded_ref(i).map(|v| (v + perturb[i]).min(1.0)))];
            let r = color_accuracy(&frames, &reference(), 0.25).unwrap();
            prop_assert!(r.delta_e00.mean <= r.delta_e00.mean_of_max + 1e-12);
            prop_assert!(r.delta_eab.mean <= r.delta_eab.mean_of_max + 1e-12);
        }
    }
}
