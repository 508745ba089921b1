//! wasm-bindgen exports for the static demo page in `www/`.

pub mod demo;

use hvsisp_core::pipeline::DenoiseMethod;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct ChartRender {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    summary: String,
}

#[wasm_bindgen]
impl ChartRender {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// RGBA bytes ready for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

/// Capture and develop a synthetic ColorChecker. `denoise` is `none`, `bilateral` or `nlm`.
#[wasm_bindgen]
pub fn render_chart(
    width: usize,
    height: usize,
    noise: f64,
    white_balance: bool,
    color_correction: bool,
    denoise: &str,
) -> Result<ChartRender, JsError> {
    let denoise = DenoiseMethod::parse(denoise).map_err(|e| JsError::new(&e.to_string()))?;
    let opts = demo::RenderOptions {
        width,
        height,
        noise,
        white_balance,
        color_correction,
        denoise,
    };
    let r = demo::render_chart(&opts).map_err(|e| JsError::new(&e))?;
    Ok(ChartRender {
        width: r.width,
        height: r.height,
        rgba: r.rgba,
        summary: r.summary,
    })
}

/// JSON with per-millisecond event counts and the flicker report.
#[wasm_bindgen]
pub fn flicker(freq_hz: f64, depth: f64, duration_ms: usize) -> Result<String, JsError> {
    demo::flicker(freq_hz, depth, duration_ms).map_err(|e| JsError::new(&e))
}

/// Voxel values in `[bin][y][x]` order for a disc moving `shift` pixels.
#[wasm_bindgen]
pub fn moving_disc_voxels(width: usize, height: usize, shift: f64, theta: f64, bins: usize) -> Result<Vec<f32>, JsError> {
    demo::moving_disc_voxels(width, height, shift, theta, bins)
        .map(|g| g.values)
        .map_err(|e| JsError::new(&e))
}

/// JSON with both Lab values, ΔE00 and ΔEab.
#[wasm_bindgen]
pub fn color_difference(r1: u8, g1: u8, b1: u8, r2: u8, g2: u8, b2: u8) -> String {
    demo::color_difference([r1, g1, b1], [r2, g2, b2])
}
