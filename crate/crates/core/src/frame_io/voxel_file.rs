//! `VOX1`: magic, u16 bins, u16 height, u16 width, then `f32` values in
//! `[bin][y][x]` order. Everything little-endian.

use std::path::Path;

use super::atomic_write;
use crate::error::{Error, Result};
use crate::events::VoxelGrid;

const MAGIC: &[u8; 4] = b"VOX1";
const HEADER_LEN: usize = 10;

pub fn encode_voxel(grid: &VoxelGrid) -> Result<Vec<u8>> {
    let dim = |v: usize, what: &str| {
        u16::try_from(v).map_err(|_| Error::Range(format!("voxel {what} {v} does not fit u16")))
    };
    let (b, h, w) = (dim(grid.bins, "bins")?, dim(grid.height, "height")?, dim(grid.width, "width")?);
    if let Some(i) = grid.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Range(format!("non-finite voxel value at index {i}")));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * grid.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&b.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    for v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_voxel(bytes: &[u8]) -> Result<VoxelGrid> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Parse("bad magic, expected VOX1".into()));
    }
    let le16 = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
    let (bins, height, width) = (le16(4), le16(6), le16(8));
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * bins * height * width {
        return Err(Error::Parse(format!(
            "VOX1 body has {} bytes, expected {} for {bins}x{height}x{width}",
            body.len(),
            4 * bins * height * width
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    VoxelGrid::from_values(bins, height, width, values)
}

pub fn write_voxel(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), &encode_voxel(grid)?)
}

pub fn read_voxel(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    decode_voxel(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let grid = VoxelGrid::from_values(2, 1, 3, vec![0.0, 1.0, -1.0, 0.5, 0.25, 2.0]).unwrap();
        let bytes = encode_voxel(&grid).unwrap();
        assert_eq!(&bytes[..10], b"VOX1\x02\x00\x01\x00\x03\x00");
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 10 + 24);
    }

    #[test]
    fn truncated_body_rejected() {
        let grid = VoxelGrid::zeros(1, 2, 2);
        let mut bytes = encode_voxel(&grid).unwrap();
        bytes.pop();
        assert!(matches!(decode_voxel(&bytes), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(bins in 1usize..4, h in 1usize..6, w in 1usize..6, seed in prop::collection::vec(-1e6f32..1e6, 0..1)) {
            let n = bins * h * w;
            let base = seed.first().copied().unwrap_or(0.37);
            let values: Vec<f32> = (0..n).map(|i| base * (i as f32 + 1.0).sin()).collect();
            let grid = VoxelGrid::from_values(bins, h, w, values).unwrap();
            let back = decode_voxel(&encode_voxel(&grid).unwrap()).unwrap();
            prop_assert_eq!(back.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            grid.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!((back.bins, back.height, back.width), (bins, h, w));
        }
    }
}
