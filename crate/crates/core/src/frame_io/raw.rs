//! 16-bit binary PGM container for RAW mosaics.
//!
//! ```text
//! P5
//! # hvs bit_depth=10 phase=3 [filled=1]
//! # hvs exposure frame_start=0 row_readout_delta=10 exposure_time=1000   (optional)
//! <width> <height>
//! 65535
//! <width*height big-endian u16 samples>
//! ```

use std::path::Path;

use super::{atomic_write, ExposureMeta, HolePhase, QuadBayerFrame};
use crate::error::{Error, Result};

const DEFAULT_BIT_DEPTH: u8 = 10;
const MAXVAL: u32 = 65535;

pub fn read_raw(path: impl AsRef<Path>) -> Result<QuadBayerFrame> {
    let bytes = std::fs::read(path)?;
    decode_raw(&bytes)
}

pub fn write_raw(frame: &QuadBayerFrame, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_raw(frame)?;
    atomic_write(path.as_ref(), &bytes)
}

pub fn encode_raw(frame: &QuadBayerFrame) -> Result<Vec<u8>> {
    frame.validate()?;
    let mut header = format!(
        "P5\n# hvs bit_depth={} phase={}{}\n",
        frame.bit_depth(),
        frame.phase.index(),
        if frame.holes_filled { " filled=1" } else { "" }
    );
    if let Some(e) = &frame.exposure {
        header.push_str(&format!(
            "# hvs exposure frame_start={} row_readout_delta={} exposure_time={}\n",
            e.frame_start, e.row_readout_delta, e.exposure_time
        ));
    }
    header.push_str(&format!("{} {}\n{MAXVAL}\n", frame.width(), frame.height()));
    let mut out = Vec::with_capacity(header.len() + 2 * frame.data().len());
    out.extend_from_slice(header.as_bytes());
    for &v in frame.data() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    Ok(out)
}

#[derive(Default)]
struct HvsMeta {
    bit_depth: Option<u8>,
    phase: Option<u8>,
    filled: Option<u8>,
    frame_start: Option<f64>,
    row_readout_delta: Option<f64>,
    exposure_time: Option<f64>,
}

impl HvsMeta {
    fn absorb_comment(&mut self, comment: &str) -> Result<()> {
        let mut words = comment.split_whitespace();
        if words.next() != Some("hvs") {
            return Ok(());
        }
        for word in words {
            let Some((key, value)) = word.split_once('=') else {
                continue;
            };
            let bad = || Error::Parse(format!("bad value in `{key}={value}`"));
            match key {
                "bit_depth" => self.bit_depth = Some(value.parse().map_err(|_| bad())?),
                "phase" => self.phase = Some(value.parse().map_err(|_| bad())?),
                "filled" => self.filled = Some(value.parse().map_err(|_| bad())?),
                "frame_start" => self.frame_start = Some(value.parse().map_err(|_| bad())?),
                "row_readout_delta" => self.row_readout_delta = Some(value.parse().map_err(|_| bad())?),
                "exposure_time" => self.exposure_time = Some(value.parse().map_err(|_| bad())?),
                _ => {}
            }
        }
        Ok(())
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    meta: HvsMeta,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    let start = self.pos + 1;
                    let end = self.bytes[start..]
                        .iter()
                        .position(|&b| b == b'\n')
                        .map_or(self.bytes.len(), |i| start + i);
                    let text = std::str::from_utf8(&self.bytes[start..end])
                        .map_err(|_| Error::Parse("non-UTF-8 header comment".into()))?;
                    self.meta.absorb_comment(text)?;
                    self.pos = end;
                }
                _ => return Ok(()),
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space_and_comments()?;
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Parse("non-ASCII PGM header".into()))
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Parse(format!("PGM {what} `{tok}` is not a number")))
    }
}

pub fn decode_raw(bytes: &[u8]) -> Result<QuadBayerFrame> {
    let mut cur = HeaderCursor {
        bytes,
        pos: 0,
        meta: HvsMeta::default(),
    };
    let magic = cur.token()?;
    if magic != "P5" {
        return Err(Error::Parse(format!("expected P5 magic, found `{magic}`")));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval != MAXVAL {
        return Err(Error::Parse(format!("maxval {maxval} unsupported, expected {MAXVAL}")));
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::Parse("missing whitespace after maxval".into())),
    }
    let body = &bytes[cur.pos..];
    let expected = 2 * width * height;
    if body.len() != expected {
        return Err(Error::Parse(format!(
            "raster has {} bytes, expected {expected} for {width}x{height}",
            body.len()
        )));
    }
    let data: Vec<u16> = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();

    let meta = cur.meta;
    let bit_depth = meta.bit_depth.unwrap_or(DEFAULT_BIT_DEPTH);
    if !(1..=16).contains(&bit_depth) {
        return Err(Error::Parse(format!("bit_depth {bit_depth} not in 1..=16")));
    }
    let phase = HolePhase::from_index(meta.phase.unwrap_or(HolePhase::default().index()))
        .map_err(|e| Error::Parse(e.to_string()))?;
    let mut frame = QuadBayerFrame::new(width, height, bit_depth, data, phase)?;
    frame.holes_filled = meta.filled.unwrap_or(0) != 0;
    match (meta.frame_start, meta.row_readout_delta, meta.exposure_time) {
        (Some(s), Some(d), Some(e)) => frame = frame.with_exposure(ExposureMeta::new(s, d, e)?)?,
        (None, None, None) => {}
        _ => return Err(Error::Parse("incomplete `hvs exposure` comment".into())),
    }
    Ok(frame)
}
