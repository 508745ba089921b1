use rayon::prelude::*;

use super::config::DenoiseMethod;
use crate::error::{Error, Result};
use crate::frame_io::RgbImage;

const BILATERAL_RADIUS: isize = 3;
const BILATERAL_SPATIAL_SIGMA: f32 = 3.0;
const NLM_PATCH_RADIUS: isize = 1;
const NLM_SEARCH_RADIUS: isize = 5;

/// Spatial denoising with an optional per-pixel detail-preservation map.
///
/// Where `weight` is given the result is `w·img + (1 − w)·denoised`, so
/// `w = 1` keeps the input untouched.
pub fn denoise(img: &RgbImage, method: DenoiseMethod, sigma: f64, weight: Option<&[f32]>) -> Result<RgbImage> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::config("denoise", format!("sigma {sigma} must be finite and >= 0")));
    }
    let n = img.width() * img.height();
    if let Some(w) = weight {
        if w.len() != n {
            return Err(Error::Shape(format!("weight map has {} entries, image has {n} pixels", w.len())));
        }
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Range("weight map values must lie in [0, 1]".into()));
        }
    }
    if sigma == 0.0 || method == DenoiseMethod::None {
        return Ok(img.clone());
    }
    let mut out = match method {
        DenoiseMethod::Bilateral => bilateral(img, sigma as f32),
        DenoiseMethod::Nlm => nlm(img, sigma as f32),
        DenoiseMethod::None => unreachable!(),
    };
    if let Some(w) = weight {
        out.data_mut()
            .par_chunks_mut(3)
            .zip(img.data().par_chunks(3))
            .zip(w.par_iter())
            .for_each(|((o, i), &k)| {
                for c in 0..3 {
                    o[c] = k * i[c] + (1.0 - k) * o[c];
                }
            });
    }
    Ok(out)
}

fn bilateral(img: &RgbImage, sigma_r: f32) -> RgbImage {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.data();
    let side = (2 * BILATERAL_RADIUS + 1) as usize;
    let spatial: Vec<f32> = (-BILATERAL_RADIUS..=BILATERAL_RADIUS)
        .flat_map(|dy| (-BILATERAL_RADIUS..=BILATERAL_RADIUS).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f32) / (2.0 * BILATERAL_SPATIAL_SIGMA * BILATERAL_SPATIAL_SIGMA)).exp())
        .collect();
    let inv_range = 1.0 / (2.0 * sigma_r * sigma_r);
    let mut out = vec![0f32; src.len()];
    out.par_chunks_mut(3 * w as usize).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        let (y0, y1) = ((y - BILATERAL_RADIUS).max(0), (y + BILATERAL_RADIUS).min(h - 1));
        for x in 0..w {
            let (x0, x1) = ((x - BILATERAL_RADIUS).max(0), (x + BILATERAL_RADIUS).min(w - 1));
            let p = ((y * w + x) * 3) as usize;
            let (r0, g0, b0) = (src[p], src[p + 1], src[p + 2]);
            let mut acc = [0f32; 3];
            let mut norm = 0f32;
            for ny in y0..=y1 {
                let srow = ((ny - y + BILATERAL_RADIUS) as usize) * side;
                for nx in x0..=x1 {
                    let q = ((ny * w + nx) * 3) as usize;
                    let (r, g, b) = (src[q], src[q + 1], src[q + 2]);
                    let d = (r - r0) * (r - r0) + (g - g0) * (g - g0) + (b - b0) * (b - b0);
                    let k = spatial[srow + (nx - x + BILATERAL_RADIUS) as usize] * (-d * inv_range).exp();
                    acc[0] += k * r;
                    acc[1] += k * g;
                    acc[2] += k * b;
                    norm += k;
                }
            }
            let o = (x * 3) as usize;
            for c in 0..3 {
                row[o + c] = acc[c] / norm;
            }
        }
    });
    RgbImage::new(img.width(), img.height(), out, img.space).expect("bilateral output keeps geometry")
}

fn nlm(img: &RgbImage, h_param: f32) -> RgbImage {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let src = img.data();
    let at = |x: isize, y: isize, c: usize| src[((y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) * 3) as usize + c];
    let patch_len = ((2 * NLM_PATCH_RADIUS + 1) * (2 * NLM_PATCH_RADIUS + 1) * 3) as f32;
    let inv_h2 = 1.0 / (h_param * h_param);
    let mut out = vec![0f32; src.len()];
    out.par_chunks_mut(3 * w as usize).enumerate().for_each(|(y, row)| {
        let y = y as isize;
        for x in 0..w {
            let mut acc = [0f32; 3];
            let mut norm = 0f32;
            for sy in (y - NLM_SEARCH_RADIUS).max(0)..=(y + NLM_SEARCH_RADIUS).min(h - 1) {
                for sx in (x - NLM_SEARCH_RADIUS).max(0)..=(x + NLM_SEARCH_RADIUS).min(w - 1) {
                    let mut d = 0f32;
                    for py in -NLM_PATCH_RADIUS..=NLM_PATCH_RADIUS {
                        for px in -NLM_PATCH_RADIUS..=NLM_PATCH_RADIUS {
                            for c in 0..3 {
                                let diff = at(x + px, y + py, c) - at(sx + px, sy + py, c);
                                d += diff * diff;
                            }
                        }
                    }
                    let k = (-(d / patch_len) * inv_h2).exp();
                    for c in 0..3 {
                        acc[c] += k * at(sx, sy, c);
                    }
                    norm += k;
                }
            }
            let o = (x * 3) as usize;
            for c in 0..3 {
                row[o + c] = acc[c] / norm;
            }
        }
    });
    RgbImage::new(img.width(), img.height(), out, img.space).expect("nlm output keeps geometry")
}
