//! Data carriers for RAW mosaics, RGB images and event streams, plus the
//! bit-exact file formats used to move them between tools.
//!
//! | format | byte order | contents |
//! |--------|------------|----------|
//! | 16-bit binary PGM (`P5`) | big-endian | [`QuadBayerFrame`] |
//! | `EVT1` / CSV | little-endian | [`EventStream`] |
//! | `VOX1` | little-endian | [`VoxelGrid`](crate::events::VoxelGrid) |
//! | PNG, 8 bit/channel | - | encoded [`RgbImage`] |
//! | LabelMe JSON | - | [`CheckerAnnotation`] |

mod annotation;
mod event_file;
mod png_io;
mod raw;
mod voxel_file;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotation::{parse_checker_annotation, read_checker_annotation, CheckerAnnotation, CornerLabel};
pub use event_file::{decode_events, encode_events, read_events, read_events_csv, write_events, write_events_csv};
pub use png_io::{decode_png, encode_png, read_rgb_png, write_rgb_png};
pub use raw::{decode_raw, encode_raw, read_raw, write_raw};
pub use voxel_file::{decode_voxel, encode_voxel, read_voxel, write_voxel};

/// Position of the event-pixel hole inside every 2×2 block.
///
/// The discriminant is the phase number used in file headers:
/// `0` top-left, `1` top-right, `2` bottom-left, `3` bottom-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum HolePhase {
    TopLeft = 0,
    TopRight = 1,
    BottomLeft = 2,
    #[default]
    BottomRight = 3,
}

impl HolePhase {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(HolePhase::TopLeft),
            1 => Ok(HolePhase::TopRight),
            2 => Ok(HolePhase::BottomLeft),
            3 => Ok(HolePhase::BottomRight),
            other => Err(Error::Range(format!("pattern phase {other} not in 0..=3"))),
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    /// `(dx, dy)` of the hole within its block.
    pub fn offset(self) -> (usize, usize) {
        let i = self as usize;
        (i % 2, i / 2)
    }
}

/// Rolling-shutter timing attached to a frame. All values in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureMeta {
    pub frame_start: f64,
    /// Offset between the exposure start of consecutive RAW rows.
    pub row_readout_delta: f64,
    pub exposure_time: f64,
}

impl ExposureMeta {
    pub fn new(frame_start: f64, row_readout_delta: f64, exposure_time: f64) -> Result<Self> {
        let meta = ExposureMeta {
            frame_start,
            row_readout_delta,
            exposure_time,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_start.is_finite() && self.row_readout_delta.is_finite() && self.exposure_time.is_finite()) {
            return Err(Error::Invariant("exposure metadata must be finite".into()));
        }
        if self.exposure_time <= 0.0 {
            return Err(Error::Invariant(format!("exposure_time {} must be > 0", self.exposure_time)));
        }
        if self.row_readout_delta < 0.0 {
            return Err(Error::Invariant(format!(
                "row_readout_delta {} must be >= 0",
                self.row_readout_delta
            )));
        }
        Ok(())
    }
}

/// Single-channel quad-Bayer mosaic with one event-pixel hole per 2×2 block.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadBayerFrame {
    width: usize,
    height: usize,
    bit_depth: u8,
    data: Vec<u16>,
    pub phase: HolePhase,
    pub exposure: Option<ExposureMeta>,
    /// Set once the event-pixel holes carry interpolated color values.
    pub holes_filled: bool,
}

impl QuadBayerFrame {
    pub fn new(width: usize, height: usize, bit_depth: u8, data: Vec<u16>, phase: HolePhase) -> Result<Self> {
        let frame = QuadBayerFrame {
            width,
            height,
            bit_depth,
            data,
            phase,
            exposure: None,
            holes_filled: false,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn filled(width: usize, height: usize, bit_depth: u8, value: u16, phase: HolePhase) -> Result<Self> {
        Self::new(width, height, bit_depth, vec![value; width * height], phase)
    }

    pub fn with_exposure(mut self, exposure: ExposureMeta) -> Result<Self> {
        exposure.validate()?;
        self.exposure = Some(exposure);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width % 2 != 0 || self.height % 2 != 0 {
            return Err(Error::Invariant(format!(
                "frame geometry {}x{} must be non-empty and even in both axes",
                self.width, self.height
            )));
        }
        if !(1..=16).contains(&self.bit_depth) {
            return Err(Error::Invariant(format!("bit depth {} not in 1..=16", self.bit_depth)));
        }
        if self.data.len() != self.width * self.height {
            return Err(Error::Invariant(format!(
                "data length {} != {}x{}",
                self.data.len(),
                self.width,
                self.height
            )));
        }
        let limit = self.max_value() as u32;
        if let Some((i, v)) = self.data.iter().enumerate().find(|(_, &v)| v as u32 > limit) {
            return Err(Error::Range(format!(
                "sample {v} at index {i} exceeds {}-bit range",
                self.bit_depth
            )));
        }
        if let Some(e) = &self.exposure {
            e.validate()?;
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// `2^bit_depth - 1`.
    pub fn max_value(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    pub fn is_hole(&self, x: usize, y: usize) -> bool {
        let (hx, hy) = self.phase.offset();
        x % 2 == hx && y % 2 == hy
    }

    /// Replace the sample buffer, keeping geometry and metadata.
    pub fn with_data(&self, data: Vec<u16>) -> Result<Self> {
        let out = QuadBayerFrame {
            width: self.width,
            height: self.height,
            bit_depth: self.bit_depth,
            data,
            phase: self.phase,
            exposure: self.exposure,
            holes_filled: self.holes_filled,
        };
        out.validate()?;
        Ok(out)
    }

    pub(crate) fn same_geometry(&self, other: &QuadBayerFrame) -> bool {
        self.width == other.width && self.height == other.height && self.bit_depth == other.bit_depth
    }
}

/// Whether RGB samples are linear light or sRGB-encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorSpace {
    Linear,
    Srgb,
}

/// Interleaved three-channel image with samples nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
    pub space: ColorSpace,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>, space: ColorSpace) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::Invariant(format!(
                "rgb data length {} != 3x{}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Range(format!("non-finite sample at index {i}")));
        }
        Ok(RgbImage {
            width,
            height,
            data,
            space,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3], space: ColorSpace) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        RgbImage {
            width,
            height,
            data,
            space,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_shape(&self, other: &RgbImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Apply `f` to every pixel, producing a new image in `space`.
    pub fn map_pixels(&self, space: ColorSpace, f: impl Fn([f32; 3]) -> [f32; 3] + Sync) -> RgbImage {
        use rayon::prelude::*;
        let mut data = self.data.clone();
        data.par_chunks_mut(3).for_each(|px| {
            let out = f([px[0], px[1], px[2]]);
            px.copy_from_slice(&out);
        });
        RgbImage {
            width: self.width,
            height: self.height,
            data,
            space,
        }
    }
}

/// One-channel real-valued image (luminance, log intensity, weights, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Invariant(format!(
                "plane data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// One event record. `t` in microseconds, `p` in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

/// Time-ordered events together with the event-sensor geometry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventStream {
    pub width: usize,
    pub height: usize,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: usize, height: usize, events: Vec<Event>) -> Result<Self> {
        let stream = EventStream { width, height, events };
        stream.validate()?;
        Ok(stream)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        EventStream {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width > u16::MAX as usize + 1 || self.height > u16::MAX as usize + 1 {
            return Err(Error::Range(format!(
                "event geometry {}x{} exceeds 16-bit coordinates",
                self.width, self.height
            )));
        }
        let mut prev = 0u64;
        for (i, e) in self.events.iter().enumerate() {
            if e.p != 1 && e.p != -1 {
                return Err(Error::Range(format!("event {i}: polarity {} not in {{-1, 1}}", e.p)));
            }
            if e.x as usize >= self.width || e.y as usize >= self.height {
                return Err(Error::Range(format!(
                    "event {i}: ({}, {}) outside {}x{}",
                    e.x, e.y, self.width, self.height
                )));
            }
            if e.t < prev {
                return Err(Error::Order(format!("event {i}: t={} after t={prev}", e.t)));
            }
            prev = e.t;
        }
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `(first t, last t)` or `None` for an empty stream.
    pub fn time_span(&self) -> Option<(u64, u64)> {
        Some((self.events.first()?.t, self.events.last()?.t))
    }

    /// Events with `t0 <= t < t1`; uses the sort order for the lookup.
    pub fn window(&self, t0: u64, t1: u64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < t0);
        let hi = self.events.partition_point(|e| e.t < t1).max(lo);
        &self.events[lo..hi]
    }
}

/// Write `bytes` to a sibling temp file and rename it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let perms = std::fs::metadata(path)
            .map(|m| m.permissions())
            .unwrap_or_else(|_| std::fs::Permissions::from_mode(0o644));
        tmp.as_file().set_permissions(perms)?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
