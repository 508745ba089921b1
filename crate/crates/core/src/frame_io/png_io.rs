use std::path::Path;

use super::{atomic_write, ColorSpace, RgbImage};
use crate::error::{Error, Result};

/// `round(clamp(s, 0, 1) * 255)`; NaN has no defined byte.
pub fn quantize(sample: f32) -> Result<u8> {
    if sample.is_nan() {
        return Err(Error::Range("NaN sample cannot be quantized".into()));
    }
    Ok((sample.clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// 8-bit RGB PNG of an sRGB-encoded image.
pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let bytes = img.data().iter().map(|&s| quantize(s)).collect::<Result<Vec<u8>>>()?;
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    Ok(out)
}

pub fn write_rgb_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_png(img)?;
    atomic_write(path.as_ref(), &bytes)
}

/// Decode an 8-bit gray/RGB/RGBA PNG into an sRGB-tagged image in `[0, 1]`.
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| Error::Parse(format!("png: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Parse(format!("png: {e}")))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::Parse(format!("unsupported png color type {other:?}"))),
    };
    let mut data = Vec::with_capacity(3 * w * h);
    for px in buf[..info.buffer_size()].chunks_exact(channels) {
        let rgb = if channels < 3 { [px[0]; 3] } else { [px[0], px[1], px[2]] };
        data.extend(rgb.iter().map(|&b| b as f32 / 255.0));
    }
    RgbImage::new(w, h, data, ColorSpace::Srgb)
}

pub fn read_rgb_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_png(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        assert_eq!(quantize(1.0).unwrap(), 255);
        assert_eq!(quantize(0.5).unwrap(), 128);
        assert_eq!(quantize(0.0).unwrap(), 0);
        assert_eq!(quantize(-3.0).unwrap(), 0);
        assert_eq!(quantize(7.0).unwrap(), 255);
        assert!(matches!(quantize(f32::NAN), Err(Error::Range(_))));
    }

    #[test]
    fn quantization_error_bound() {
        for i in 0..=10_000 {
            let s = i as f32 / 10_000.0;
            let q = quantize(s).unwrap() as f32 / 255.0;
            assert!((q - s).abs() <= 1.0 / 510.0 + 1e-7, "{s}");
        }
    }

    #[test]
    fn black_image_round_trips() {
        let img = RgbImage::filled(3, 2, [0.0; 3], ColorSpace::Srgb);
        let back = decode_png(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn nan_pixel_rejected() {
        let mut img = RgbImage::filled(1, 1, [0.2; 3], ColorSpace::Srgb);
        img.data_mut()[1] = f32::NAN;
        assert!(matches!(encode_png(&img), Err(Error::Range(_))));
    }
}
