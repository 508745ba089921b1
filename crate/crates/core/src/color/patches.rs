use super::{PatchColors, PATCH_COUNT};
use crate::error::{Error, Result};
use crate::frame_io::{CheckerAnnotation, RgbImage};

/// Patch window side as a fraction of the center spacing.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.25;
const MIN_WINDOW: usize = 3;
const ROWS: usize = 4;
const COLS: usize = 6;

/// Centers of all 24 patches, bilinearly interpolated from the four
/// labelled corner patches; brown, cyan, white and black sit at
/// (row 1, col 1), (row 1, col 6), (row 4, col 1) and (row 4, col 6).
pub fn patch_centers(ann: &CheckerAnnotation) -> Result<[[f64; 2]; PATCH_COUNT]> {
    ann.validate()?;
    let mut out = [[0.0; 2]; PATCH_COUNT];
    for r in 0..ROWS {
        let v = r as f64 / (ROWS - 1) as f64;
        for c in 0..COLS {
            let u = c as f64 / (COLS - 1) as f64;
            out[r * COLS + c] = [0, 1].map(|k| {
                (1.0 - u) * (1.0 - v) * ann.brown[k] + u * (1.0 - v) * ann.cyan[k] + (1.0 - u) * v * ann.white[k]
                    + u * v * ann.black[k]
            });
        }
    }
    Ok(out)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Smaller of the mean row-wise and column-wise neighbour distances.
fn center_spacing(centers: &[[f64; 2]; PATCH_COUNT]) -> f64 {
    let at = |r: usize, c: usize| centers[r * COLS + c];
    let along_rows = (0..ROWS)
        .flat_map(|r| (0..COLS - 1).map(move |c| (r, c)))
        .map(|(r, c)| dist(at(r, c), at(r, c + 1)))
        .sum::<f64>()
        / (ROWS * (COLS - 1)) as f64;
    let along_cols = (0..ROWS - 1)
        .flat_map(|r| (0..COLS).map(move |c| (r, c)))
        .map(|(r, c)| dist(at(r, c), at(r + 1, c)))
        .sum::<f64>()
        / ((ROWS - 1) * COLS) as f64;
    along_rows.min(along_cols)
}

/// Side length of the square averaging window for a given set of centers.
pub(crate) fn window_side(centers: &[[f64; 2]; PATCH_COUNT], fraction: f64) -> usize {
    ((fraction * center_spacing(centers)).round() as usize).max(MIN_WINDOW)
}

/// Mean color in a square window around each center, clipped to the image.
pub fn extract_patches(img: &RgbImage, centers: &[[f64; 2]; PATCH_COUNT], window_fraction: f64) -> Result<PatchColors> {
    if !(window_fraction > 0.0 && window_fraction.is_finite()) {
        return Err(Error::config("patches", format!("window fraction {window_fraction} must be > 0")));
    }
    let (w, h) = (img.width(), img.height());
    let side = window_side(centers, window_fraction);
    let mut colors = Vec::with_capacity(PATCH_COUNT);
    for (i, &[cx, cy]) in centers.iter().enumerate() {
        if !(cx >= 0.0 && cy >= 0.0 && cx < w as f64 && cy < h as f64) {
            return Err(Error::Range(format!("patch {} center ({cx}, {cy}) outside {w}x{h} image", i + 1)));
        }
        let span = |c: f64, limit: usize| {
            let start = (c - (side as f64 - 1.0) / 2.0).round() as isize;
            let lo = start.max(0) as usize;
            let hi = ((start + side as isize).max(0) as usize).min(limit);
            (lo, hi.max(lo + 1).min(limit))
        };
        let (x0, x1) = span(cx, w);
        let (y0, y1) = span(cy, h);
        let mut sum = [0f64; 3];
        for y in y0..y1 {
            for x in x0..x1 {
                let p = img.pixel(x, y);
                for c in 0..3 {
                    sum[c] += p[c] as f64;
                }
            }
        }
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        colors.push(sum.map(|s| s / n));
    }
    PatchColors::new(colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_io::ColorSpace;

    fn grid_annotation(x0: f64, y0: f64, step: f64, w: usize, h: usize) -> CheckerAnnotation {
        CheckerAnnotation::new(
            [x0, y0],
            [x0 + 5.0 * step, y0],
            [x0, y0 + 3.0 * step],
            [x0 + 5.0 * step, y0 + 3.0 * step],
            w,
            h,
        )
        .unwrap()
    }

    #[test]
    fn rectangle_gives_lattice() {
        let c = patch_centers(&grid_annotation(10.0, 20.0, 1.0, 40, 40)).unwrap();
        for r in 0..4 {
            for col in 0..6 {
                assert!(dist(c[r * 6 + col], [10.0 + col as f64, 20.0 + r as f64]) < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_follows_labels() {
        let base = grid_annotation(0.0, 0.0, 10.0, 200, 200);
        // rotate by 90 degrees about (100, 100): (x, y) -> (200 - y, x)
        let rot = |p: [f64; 2]| [200.0 - p[1], p[0]];
        let rotated = CheckerAnnotation::new(rot(base.brown), rot(base.cyan), rot(base.white), rot(base.black), 200, 200).unwrap();
        let a = patch_centers(&base).unwrap();
        let b = patch_centers(&rotated).unwrap();
        for i in 0..PATCH_COUNT {
            let want = rot(a[i]);
            assert!(dist(want, b[i]) < 1e-12, "patch {i}: {:?} vs {:?}", b[i], want);
        }
    }

    #[test]
    fn coincident_corners_rejected() {
        let mut ann = grid_annotation(0.0, 0.0, 10.0, 100, 100);
        ann.cyan = ann.brown;
        assert!(matches!(patch_centers(&ann), Err(Error::Annotation(_))));
    }

    #[test]
    fn constant_image_patches() {
        let img = RgbImage::filled(64, 48, [0.2, 0.4, 0.6], ColorSpace::Linear);
        let c = patch_centers(&grid_annotation(6.0, 6.0, 10.0, 64, 48)).unwrap();
        let p = extract_patches(&img, &c, DEFAULT_WINDOW_FRACTION).unwrap();
        for col in p.colors() {
            for (got, want) in col.iter().zip([0.2f32, 0.4, 0.6]) {
                assert!((got - want as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rendered_fills_are_recovered() {
        let step = 20usize;
        let mut img = RgbImage::filled(6 * step, 4 * step, [0.0; 3], ColorSpace::Linear);
        let fill = |i: usize| [i as f32 / 30.0, 0.5, 1.0 - i as f32 / 30.0];
        for y in 0..4 * step {
            for x in 0..6 * step {
                img.set_pixel(x, y, fill((y / step) * 6 + x / step));
            }
        }
        let half = step as f64 / 2.0 - 0.5;
        let c = patch_centers(&grid_annotation(half, half, step as f64, 6 * step, 4 * step)).unwrap();
        let p = extract_patches(&img, &c, DEFAULT_WINDOW_FRACTION).unwrap();
        for i in 0..PATCH_COUNT {
            for k in 0..3 {
                assert!((p.colors()[i][k] - fill(i)[k] as f64).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn straddling_window_is_area_weighted() {
        // window side round(0.25 * 20) = 5, centered at x = 10 covers x 8..13
        let mut img = RgbImage::filled(120, 80, [0.0; 3], ColorSpace::Linear);
        for y in 0..80 {
            for x in 10..120 {
                img.set_pixel(x, y, [1.0; 3]);
            }
        }
        let c = patch_centers(&grid_annotation(10.0, 10.0, 20.0, 120, 80)).unwrap();
        assert_eq!(window_side(&c, DEFAULT_WINDOW_FRACTION), 5);
        let p = extract_patches(&img, &c, DEFAULT_WINDOW_FRACTION).unwrap();
        assert!((p.patch(1)[0] - 3.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn window_clamped_at_border_and_minimum() {
        let img = RgbImage::filled(20, 20, [0.5; 3], ColorSpace::Linear);
        let c = patch_centers(&grid_annotation(0.0, 0.0, 2.0, 20, 20)).unwrap();
        assert_eq!(window_side(&c, DEFAULT_WINDOW_FRACTION), 3);
        let p = extract_patches(&img, &c, DEFAULT_WINDOW_FRACTION).unwrap();
        assert!((p.patch(1)[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn center_outside_image() {
        let img = RgbImage::filled(20, 20, [0.5; 3], ColorSpace::Linear);
        let mut c = patch_centers(&grid_annotation(0.0, 0.0, 2.0, 20, 20)).unwrap();
        c[23] = [25.0, 3.0];
        assert!(matches!(extract_patches(&img, &c, DEFAULT_WINDOW_FRACTION), Err(Error::Range(_))));
    }
}
