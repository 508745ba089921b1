//! `EVT1` binary and CSV event containers.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! "EVT1" | u16 version=1 | u16 width | u16 height | u64 count      (18 bytes)
//! count × { u64 t_us | u16 x | u16 y | i8 p | u8 pad=0 }          (14 bytes each)
//! ```
//!
//! The CSV mirror starts with an optional `# width=<w> height=<h>` line,
//! then the header `t_us,x,y,p` and one event per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{atomic_write, Event, EventStream};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EVT1";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 18;
const RECORD_LEN: usize = 14;

/// Reads either format; `.csv` files (case-insensitive) go through the CSV parser.
pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    if is_csv(path) {
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse("event CSV is not UTF-8".into()))?;
        read_events_csv(&text)
    } else {
        decode_events(&bytes)
    }
}

pub fn write_events(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_csv(path) {
        write_events_csv(stream)?.into_bytes()
    } else {
        encode_events(stream)?
    };
    atomic_write(path, &bytes)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn geometry_u16(stream: &EventStream) -> Result<(u16, u16)> {
    let w = u16::try_from(stream.width)
        .map_err(|_| Error::Range(format!("width {} does not fit the EVT1 header", stream.width)))?;
    let h = u16::try_from(stream.height)
        .map_err(|_| Error::Range(format!("height {} does not fit the EVT1 header", stream.height)))?;
    Ok((w, h))
}

pub fn encode_events(stream: &EventStream) -> Result<Vec<u8>> {
    stream.validate()?;
    let (w, h) = geometry_u16(stream)?;
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p as u8);
        out.push(0);
    }
    Ok(out)
}

pub fn decode_events(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!("EVT1 header needs {HEADER_LEN} bytes, got {}", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Parse("bad magic, expected EVT1".into()));
    }
    let le16 = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let version = le16(4);
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported EVT1 version {version}")));
    }
    let width = le16(6) as usize;
    let height = le16(8) as usize;
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    let expected = (count as usize)
        .checked_mul(RECORD_LEN)
        .ok_or_else(|| Error::Parse("event count overflows".into()))?;
    if body.len() != expected {
        return Err(Error::Parse(format!(
            "EVT1 body has {} bytes, expected {expected} for {count} records",
            body.len()
        )));
    }
    let events = body
        .chunks_exact(RECORD_LEN)
        .map(|r| Event {
            t: u64::from_le_bytes(r[0..8].try_into().unwrap()),
            x: u16::from_le_bytes([r[8], r[9]]),
            y: u16::from_le_bytes([r[10], r[11]]),
            p: r[12] as i8,
        })
        .collect();
    EventStream::new(width, height, events)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRecord {
    t_us: u64,
    x: u16,
    y: u16,
    p: i8,
}

/// Serialize to the CSV mirror, geometry line included.
pub fn write_events_csv(stream: &EventStream) -> Result<String> {
    stream.validate()?;
    let mut body = csv::Writer::from_writer(Vec::new());
    for e in stream.events() {
        body.serialize(CsvRecord {
            t_us: e.t,
            x: e.x,
            y: e.y,
            p: e.p,
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    if stream.is_empty() {
        body.write_record(["t_us", "x", "y", "p"])
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let body = body.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = format!("# width={} height={}\n", stream.width, stream.height);
    out.push_str(std::str::from_utf8(&body).expect("csv writer emits UTF-8"));
    Ok(out)
}

/// Parse the CSV mirror. Without the geometry line, width/height are taken
/// as one past the largest coordinate seen.
pub fn read_events_csv(text: &str) -> Result<EventStream> {
    let mut geometry = None;
    let mut rest = text;
    if let Some(stripped) = text.strip_prefix('#') {
        let (line, tail) = stripped.split_once('\n').unwrap_or((stripped, ""));
        rest = tail;
        let mut w = None;
        let mut h = None;
        for word in line.split_whitespace() {
            match word.split_once('=') {
                Some(("width", v)) => w = v.trim().parse::<usize>().ok(),
                Some(("height", v)) => h = v.trim().parse::<usize>().ok(),
                _ => {}
            }
        }
        match (w, h) {
            (Some(w), Some(h)) => geometry = Some((w, h)),
            _ => return Err(Error::Parse(format!("bad geometry line `#{line}`"))),
        }
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rest.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_us", "x", "y", "p"] {
        return Err(Error::Parse(format!("expected header t_us,x,y,p, found {:?}", headers)));
    }
    let mut events = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let rec: CsvRecord = row
            .deserialize(Some(&headers))
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
        events.push(Event {
            t: rec.t_us,
            x: rec.x,
            y: rec.y,
            p: rec.p,
        });
    }
    let (width, height) = geometry.unwrap_or_else(|| {
        let w = events.iter().map(|e| e.x as usize + 1).max().unwrap_or(0);
        let h = events.iter().map(|e| e.y as usize + 1).max().unwrap_or(0);
        (w, h)
    });
    EventStream::new(width, height, events)
}
