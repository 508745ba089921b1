//! Global black level and per-row fixed-pattern offsets from dark frames.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{atomic_write, QuadBayerFrame};

/// Fewer dark frames than this still calibrate, but with a warning.
pub const RECOMMENDED_DARK_FRAMES: usize = 5;

/// Black level plus horizontal fixed-pattern vector, both in sensor counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkCalibration {
    pub blc: f64,
    pub fpn: Vec<f64>,
}

impl DarkCalibration {
    /// Calibration that changes nothing.
    pub fn zero(height: usize) -> Self {
        DarkCalibration {
            blc: 0.0,
            fpn: vec![0.0; height],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blc.is_finite() && self.blc >= 0.0) {
            return Err(Error::Invariant(format!("blc {} must be finite and >= 0", self.blc)));
        }
        if let Some((r, v)) = self.fpn.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Invariant(format!("fpn[{r}] = {v} must be finite and >= 0")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let calib: DarkCalibration = serde_json::from_str(text)?;
        calib.validate()?;
        Ok(calib)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        atomic_write(path.as_ref(), text.as_bytes())
    }
}

/// Outcome of [`calibrate_dark`]; `warnings` is empty for a well-sampled run.
#[derive(Debug, Clone, PartialEq)]
pub struct DarkCalibrationRun {
    pub calibration: DarkCalibration,
    pub warnings: Vec<String>,
}

/// Average the dark frames, take the minimum of the average as the black
/// level, and record each row's mean residual above it.
pub fn calibrate_dark(frames: &[QuadBayerFrame]) -> Result<DarkCalibrationRun> {
    let first = frames
        .first()
        .ok_or_else(|| Error::EmptyInput("calibrate_dark needs at least one dark frame".into()))?;
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_geometry(first)) {
        return Err(Error::Shape(format!(
            "dark frame {i} is {}x{}@{}bit, frame 0 is {}x{}@{}bit",
            f.width(),
            f.height(),
            f.bit_depth(),
            first.width(),
            first.height(),
            first.bit_depth()
        )));
    }
    let (w, h) = (first.width(), first.height());
    let n = frames.len() as f64;

    // integer sums keep the average independent of frame order
    let mut sums = vec![0u64; w * h];
    for f in frames {
        sums.par_iter_mut().zip(f.data().par_iter()).for_each(|(s, &v)| *s += v as u64);
    }
    let avg: Vec<f64> = sums.iter().map(|&s| s as f64 / n).collect();
    let blc = avg.iter().copied().fold(f64::INFINITY, f64::min);
    let fpn = avg
        .par_chunks(w)
        .map(|row| {
            let sum: f64 = row.iter().map(|v| v - blc).sum();
            (sum / w as f64).max(0.0)
        })
        .collect::<Vec<_>>();
    debug_assert_eq!(fpn.len(), h);

    let mut warnings = Vec::new();
    if frames.len() < RECOMMENDED_DARK_FRAMES {
        let msg = format!(
            "only {} dark frame(s); at least {RECOMMENDED_DARK_FRAMES} recommended",
            frames.len()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(DarkCalibrationRun {
        calibration: DarkCalibration { blc, fpn },
        warnings,
    })
}

/// `out = max(0, round(in - blc - fpn[y]))`.
pub fn apply_dark_correction(frame: &QuadBayerFrame, calib: &DarkCalibration) -> Result<QuadBayerFrame> {
    if calib.fpn.len() != frame.height() {
        return Err(Error::Shape(format!(
            "fpn has {} rows, frame has {}",
            calib.fpn.len(),
            frame.height()
        )));
    }
    let w = frame.width();
    let mut out = vec![0u16; frame.data().len()];
    out.par_chunks_mut(w)
        .zip(frame.data().par_chunks(w))
        .zip(calib.fpn.par_iter())
        .for_each(|((dst, src), &row_offset)| {
            let offset = calib.blc + row_offset;
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = (s as f64 - offset).round().max(0.0) as u16;
            }
        });
    frame.with_data(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::HolePhase;
    use proptest::prelude::*;

    fn frame(w: usize, h: usize, data: Vec<u16>) -> QuadBayerFrame {
        QuadBayerFrame::new(w, h, 10, data, HolePhase::BottomRight).unwrap()
    }

    #[test]
    fn uniform_frame() {
        let run = calibrate_dark(&[frame(4, 4, vec![64; 16])]).unwrap();
        assert_eq!(run.calibration.blc, 64.0);
        assert!(run.calibration.fpn.iter().all(|&v| v == 0.0));
        assert_eq!(run.warnings.len(), 1);
    }

    #[test]
    fn frames_are_averaged() {
        let run = calibrate_dark(&[frame(2, 2, vec![62; 4]), frame(2, 2, vec![66; 4])]).unwrap();
        assert_eq!(run.calibration, DarkCalibration { blc: 64.0, fpn: vec![0.0, 0.0] });
    }

    #[test]
    fn row_offsets() {
        let run = calibrate_dark(&[frame(2, 2, vec![70, 70, 64, 64])]).unwrap();
        assert_eq!(run.calibration, DarkCalibration { blc: 64.0, fpn: vec![6.0, 0.0] });
    }

    #[test]
    fn five_frames_no_warning() {
        let frames = vec![frame(2, 2, vec![64; 4]); 5];
        assert!(calibrate_dark(&frames).unwrap().warnings.is_empty());
    }

    #[test]
    fn empty_and_mixed_inputs() {
        assert!(matches!(calibrate_dark(&[]), Err(Error::EmptyInput(_))));
        let err = calibrate_dark(&[frame(2, 2, vec![0; 4]), frame(4, 2, vec![0; 8])]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn correction_arithmetic() {
        let calib = DarkCalibration { blc: 64.0, fpn: vec![2.0, 2.0] };
        let out = apply_dark_correction(&frame(2, 2, vec![100, 10, 66, 67]), &calib).unwrap();
        assert_eq!(out.data(), &[34, 0, 0, 1]);
    }

    #[test]
    fn fractional_offsets_round() {
        let calib = DarkCalibration { blc: 10.0, fpn: vec![0.4, 0.6] };
        let out = apply_dark_correction(&frame(2, 2, vec![20, 20, 20, 20]), &calib).unwrap();
        assert_eq!(out.data(), &[10, 10, 9, 9]);
    }

    #[test]
    fn height_mismatch() {
        let calib = DarkCalibration { blc: 0.0, fpn: vec![0.0; 3] };
        assert!(matches!(
            apply_dark_correction(&frame(2, 2, vec![0; 4]), &calib),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn json_shape() {
        let calib = DarkCalibration { blc: 64.0, fpn: vec![1.5, 0.0] };
        let text = serde_json::to_string(&calib).unwrap();
        assert_eq!(text, r#"{"blc":64.0,"fpn":[1.5,0.0]}"#);
        assert_eq!(DarkCalibration::from_json(&text).unwrap(), calib);
        assert!(DarkCalibration::from_json(r#"{"blc":-1,"fpn":[]}"#).is_err());
    }

    fn arb_frame() -> impl Strategy<Value = QuadBayerFrame> {
        (1usize..4, 1usize..4)
            .prop_flat_map(|(bw, bh)| {
                let n = 4 * bw * bh;
                (Just(2 * bw), Just(2 * bh), prop::collection::vec(0u16..1024, n))
            })
            .prop_map(|(w, h, data)| frame(w, h, data))
    }

    proptest! {
        #[test]
        fn correction_bounded(f in arb_frame(), blc in 0.0f64..200.0, row in 0.0f64..50.0) {
            let calib = DarkCalibration { blc, fpn: vec![row; f.height()] };
            let out = apply_dark_correction(&f, &calib).unwrap();
            prop_assert!(out.data().iter().zip(f.data()).all(|(o, i)| o <= i));
        }

        #[test]
        fn zero_calibration_is_identity(f in arb_frame()) {
            let out = apply_dark_correction(&f, &DarkCalibration::zero(f.height())).unwrap();
            prop_assert_eq!(&out, &f);
            prop_assert_eq!(apply_dark_correction(&out, &DarkCalibration::zero(f.height())).unwrap(), out);
        }

        #[test]
        fn permutation_invariant(a in arb_frame(), seed in any::<u64>()) {
            let b = a.with_data(a.data().iter().map(|v| (v + (seed % 7) as u16) % 1024).collect()).unwrap();
            let c = a.with_data(a.data().iter().rev().copied().collect()).unwrap();
            let forward = calibrate_dark(&[a.clone(), b.clone(), c.clone()]).unwrap().calibration;
            let shuffled = calibrate_dark(&[c, a, b]).unwrap().calibration;
            prop_assert_eq!(forward, shuffled);
        }
    }

    #[test]
    fn statistical_recovery() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let (w, h) = (64, 32);
        let true_blc = 64.0;
        let true_fpn: Vec<f64> = (0..h).map(|r| 3.0 + 2.0 * ((r as f64) * 0.7).sin()).collect();
        let noise = Normal::new(0.0, 2.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let frames: Vec<_> = (0..50)
            .map(|_| {
                let data = (0..w * h)
                    .map(|i| {
                        let v: f64 = true_blc + true_fpn[i / w] + noise.sample(&mut rng);
                        v.round().clamp(0.0, 1023.0) as u16
                    })
                    .collect();
                frame(w, h, data)
            })
            .collect();
        let calib = calibrate_dark(&frames).unwrap().calibration;
        // blc is the min of the averaged frame and absorbs the smallest row offset
        let min_fpn = true_fpn.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((calib.blc - (true_blc + min_fpn)).abs() < 1.0, "blc {}", calib.blc);
        for (r, (&got, &want)) in calib.fpn.iter().zip(&true_fpn).enumerate() {
            let recovered = calib.blc + got;
            assert!((recovered - (true_blc + want)).abs() < 1.0, "row {r}: {recovered} vs {}", true_blc + want);
        }
    }
}
