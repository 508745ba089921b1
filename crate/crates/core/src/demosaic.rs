//! Event-hole filling and edge-aware reconstruction of full RGB from the
//! quad-Bayer mosaic.
//!
//! Every 2×2 block carries one R, one G and one B site plus one event-pixel
//! hole. Holes are first filled with an estimate of the *fill channel* (G by
//! default), after which the mosaic is a period-2 color filter array and each
//! missing channel is interpolated horizontally or vertically, picking the
//! direction with the smaller Hamilton–Adams style gradient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventActivity;
use crate::frame_io::{ColorSpace, HolePhase, QuadBayerFrame, RgbImage};

/// Default relative margin for [`event_guided_direction`].
pub const DEFAULT_DIRECTION_MARGIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    R = 0,
    G = 1,
    B = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Site {
    Color(Channel),
    Hole,
}

/// Channel assignment of the four positions of a 2×2 block, indexed
/// `(y % 2) * 2 + x % 2`, plus the channel that hole sites are filled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorSiteMap {
    sites: [Site; 4],
    fill: Channel,
}

impl ColorSiteMap {
    /// R, G, B placed in raster order on the three non-hole positions; holes filled as G.
    ///
    /// For the default phase this is R top-left, G top-right, B bottom-left.
    pub fn from_phase(phase: HolePhase) -> Self {
        let hole = phase.index() as usize;
        let mut colors = Channel::ALL.into_iter();
        let sites = std::array::from_fn(|i| {
            if i == hole {
                Site::Hole
            } else {
                Site::Color(colors.next().expect("three color sites"))
            }
        });
        ColorSiteMap {
            sites,
            fill: Channel::G,
        }
    }

    pub fn new(sites: [Site; 4], fill: Channel) -> Result<Self> {
        let holes = sites.iter().filter(|s| **s == Site::Hole).count();
        if holes != 1 {
            return Err(Error::Invariant(format!("site map needs exactly one hole, found {holes}")));
        }
        for c in Channel::ALL {
            if !sites.contains(&Site::Color(c)) {
                return Err(Error::Invariant(format!("site map lacks a {c:?} site")));
            }
        }
        Ok(ColorSiteMap { sites, fill })
    }

    pub fn fill_channel(&self) -> Channel {
        self.fill
    }

    pub fn site(&self, x: usize, y: usize) -> Site {
        self.sites[(y % 2) * 2 + x % 2]
    }

    fn site_i(&self, x: isize, y: isize) -> Site {
        self.sites[(y.rem_euclid(2) * 2 + x.rem_euclid(2)) as usize]
    }

    /// Channel carried by `(x, y)` once holes are filled.
    pub fn channel_at(&self, x: isize, y: isize) -> Channel {
        match self.site_i(x, y) {
            Site::Color(c) => c,
            Site::Hole => self.fill,
        }
    }

    pub fn hole_phase(&self) -> HolePhase {
        let i = self.sites.iter().position(|s| *s == Site::Hole).expect("validated");
        HolePhase::from_index(i as u8).expect("index < 4")
    }
}

/// Preferred interpolation axis at one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Horizontal,
    Vertical,
    None,
}

/// Full-resolution per-pixel [`Direction`] preferences.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Direction>,
}

impl DirectionField {
    pub fn get(&self, x: usize, y: usize) -> Direction {
        self.data[y * self.width + x]
    }
}

fn check_half_resolution(activity: &EventActivity, width: usize, height: usize) -> Result<()> {
    if activity.width * 2 != width || activity.height * 2 != height {
        return Err(Error::Shape(format!(
            "event activity {}x{} is not half of frame {}x{}",
            activity.width, activity.height, width, height
        )));
    }
    Ok(())
}

/// Central-difference gradient of the activity counts; one-sided at borders.
fn activity_gradient(activity: &EventActivity, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (activity.width, activity.height);
    let at = |x: usize, y: usize| activity.counts[y * w + x];
    let diff = |lo: f64, hi: f64, span: usize| if span == 0 { 0.0 } else { (hi - lo) / span as f64 };
    let (x0, x1) = (x.saturating_sub(1), (x + 1).min(w - 1));
    let (y0, y1) = (y.saturating_sub(1), (y + 1).min(h - 1));
    (diff(at(x0, y), at(x1, y), x1 - x0), diff(at(x, y0), at(x, y1), y1 - y0))
}

/// Per-pixel axis preference from the event-activity gradient.
///
/// Where `|∂E/∂x|` exceeds `|∂E/∂y|` by more than `margin` of the larger of the
/// two, the edge runs vertically and vertical interpolation is preferred (and
/// vice versa). Activity is half resolution and is upsampled by nearest neighbor.
pub fn event_guided_direction(
    activity: &EventActivity,
    frame_width: usize,
    frame_height: usize,
    margin: f64,
) -> Result<DirectionField> {
    check_half_resolution(activity, frame_width, frame_height)?;
    let coarse: Vec<Direction> = (0..activity.height)
        .flat_map(|y| (0..activity.width).map(move |x| (x, y)))
        .map(|(x, y)| {
            let (gx, gy) = activity_gradient(activity, x, y);
            let (ax, ay) = (gx.abs(), gy.abs());
            let m = ax.max(ay);
            if m == 0.0 {
                Direction::None
            } else if ax - ay > margin * m {
                Direction::Vertical
            } else if ay - ax > margin * m {
                Direction::Horizontal
            } else {
                Direction::None
            }
        })
        .collect();
    let data = (0..frame_height)
        .flat_map(|y| (0..frame_width).map(move |x| (x, y)))
        .map(|(x, y)| coarse[(y / 2) * activity.width + x / 2])
        .collect();
    Ok(DirectionField {
        width: frame_width,
        height: frame_height,
        data,
    })
}

/// Weighted mean of `(dx, dy, value)` samples. Without a gradient every sample
/// counts equally; with one, a sample at unit direction `u` gets weight
/// `exp(-(|u_x|·|∂E/∂x| + |u_y|·|∂E/∂y|))`, so samples across strong activity
/// edges are suppressed.
pub(crate) fn guided_mean(samples: &[(isize, isize, f64)], gradient: Option<(f64, f64)>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(dx, dy, v) in samples {
        let w = match gradient {
            None => 1.0,
            Some((gx, gy)) => {
                let len = ((dx * dx + dy * dy) as f64).sqrt();
                let along = (dx.abs() as f64 * gx.abs() + dy.abs() as f64 * gy.abs()) / len;
                (-along).exp()
            }
        };
        num += w * v;
        den += w;
    }
    if den > 0.0 && den.is_finite() {
        num / den
    } else {
        // every sample fully suppressed; fall back to the plain mean
        samples.iter().map(|s| s.2).sum::<f64>() / samples.len() as f64
    }
}

/// Offsets to fill-channel sites within Chebyshev distance 2, grouped by
/// increasing Euclidean distance.
fn fill_offsets(sites: &ColorSiteMap, hx: isize, hy: isize) -> Vec<Vec<(isize, isize)>> {
    let mut offsets: Vec<(isize, isize)> = (-2..=2)
        .flat_map(|dy| (-2..=2).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| (dx, dy) != (0, 0))
        .filter(|&(dx, dy)| sites.site_i(hx + dx, hy + dy) == Site::Color(sites.fill))
        .collect();
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    let mut groups: Vec<Vec<(isize, isize)>> = Vec::new();
    for o in offsets {
        match groups.last_mut() {
            Some(g) if g[0].0 * g[0].0 + g[0].1 * g[0].1 == o.0 * o.0 + o.1 * o.1 => g.push(o),
            _ => groups.push(vec![o]),
        }
    }
    groups
}

/// Replace every event-pixel hole with the (optionally event-weighted) mean of
/// the nearest in-bounds fill-channel sites.
pub fn fill_event_holes(
    frame: &QuadBayerFrame,
    sites: &ColorSiteMap,
    guide: Option<&EventActivity>,
) -> Result<QuadBayerFrame> {
    if sites.hole_phase() != frame.phase {
        return Err(Error::Invariant(format!(
            "site map hole {:?} disagrees with frame phase {:?}",
            sites.hole_phase(),
            frame.phase
        )));
    }
    if let Some(g) = guide {
        check_half_resolution(g, frame.width(), frame.height())?;
    }
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let (px, py) = frame.phase.offset();
    let groups = fill_offsets(sites, px as isize, py as isize);
    let src = frame.data();
    let mut out = src.to_vec();
    out.par_chunks_mut(w as usize).enumerate().for_each(|(y, row)| {
        if y % 2 != py {
            return;
        }
        let y = y as isize;
        let mut samples = Vec::with_capacity(8);
        for x in (px as isize..w).step_by(2) {
            samples.clear();
            for group in &groups {
                samples.extend(group.iter().filter_map(|&(dx, dy)| {
                    let (nx, ny) = (x + dx, y + dy);
                    (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| (dx, dy, src[(ny * w + nx) as usize] as f64))
                }));
                if !samples.is_empty() {
                    break;
                }
            }
            if samples.is_empty() {
                continue;
            }
            let gradient = guide.map(|g| activity_gradient(g, x as usize / 2, y as usize / 2));
            row[x as usize] = guided_mean(&samples, gradient).round() as u16;
        }
    });
    let mut filled = frame.with_data(out)?;
    filled.holes_filled = true;
    Ok(filled)
}

/// Reconstruct linear RGB in `[0, 1]` from a hole-filled mosaic.
///
/// Native samples pass through exactly. A missing channel available along
/// both axes is interpolated along the axis with the smaller gradient
/// (`|c(-1) - c(+1)| + |2v(0) - v(-2) - v(+2)|`), averaging both on a tie,
/// unless `directions` pins the axis. Channels available along one axis use
/// it; otherwise the diagonal neighbors are averaged.
pub fn demosaic(frame: &QuadBayerFrame, sites: &ColorSiteMap, directions: Option<&DirectionField>) -> Result<RgbImage> {
    if !frame.holes_filled {
        return Err(Error::Precondition("demosaic requires a hole-filled mosaic".into()));
    }
    if sites.hole_phase() != frame.phase {
        return Err(Error::Invariant(format!(
            "site map hole {:?} disagrees with frame phase {:?}",
            sites.hole_phase(),
            frame.phase
        )));
    }
    if let Some(d) = directions {
        if d.width != frame.width() || d.height != frame.height() {
            return Err(Error::Shape(format!(
                "direction field {}x{} vs frame {}x{}",
                d.width,
                d.height,
                frame.width(),
                frame.height()
            )));
        }
    }
    let (w, h) = (frame.width(), frame.height());
    let max = frame.max_value() as f64;
    let v: Vec<f64> = frame.data().iter().map(|&s| s as f64 / max).collect();
    let mut data = vec![0f32; 3 * w * h];
    data.par_chunks_mut(3 * w).enumerate().for_each(|(y, row)| {
        let ctx = Interp {
            v: &v,
            w: w as isize,
            h: h as isize,
            sites,
        };
        for x in 0..w {
            let pinned = directions.map_or(Direction::None, |d| d.get(x, y));
            let px = ctx.pixel(x as isize, y as isize, pinned);
            row[3 * x..3 * x + 3].copy_from_slice(&px.map(|c| c as f32));
        }
    });
    RgbImage::new(w, h, data, ColorSpace::Linear)
}

struct Interp<'a> {
    v: &'a [f64],
    w: isize,
    h: isize,
    sites: &'a ColorSiteMap,
}

impl Interp<'_> {
    fn at(&self, x: isize, y: isize) -> Option<f64> {
        (x >= 0 && y >= 0 && x < self.w && y < self.h).then(|| self.v[(y * self.w + x) as usize])
    }

    fn mean(vals: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
        let (sum, n) = vals.into_iter().flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Gradient along `(dx, dy)`: first difference of the target channel plus
    /// second difference of the native channel.
    fn gradient(&self, x: isize, y: isize, dx: isize, dy: isize) -> f64 {
        let first = match (self.at(x - dx, y - dy), self.at(x + dx, y + dy)) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => 0.0,
        };
        let center = self.v[(y * self.w + x) as usize];
        let second = match (self.at(x - 2 * dx, y - 2 * dy), self.at(x + 2 * dx, y + 2 * dy)) {
            (Some(a), Some(b)) => (2.0 * center - a - b).abs(),
            (Some(a), None) | (None, Some(a)) => 2.0 * (center - a).abs(),
            (None, None) => 0.0,
        };
        first + second
    }

    fn pixel(&self, x: isize, y: isize, pinned: Direction) -> [f64; 3] {
        let own = self.sites.channel_at(x, y);
        let mut out = [0.0; 3];
        out[own.index()] = self.v[(y * self.w + x) as usize];
        for c in Channel::ALL {
            if c == own {
                continue;
            }
            let horizontal = (self.sites.channel_at(x + 1, y) == c)
                .then(|| Self::mean([self.at(x - 1, y), self.at(x + 1, y)]))
                .flatten();
            let vertical = (self.sites.channel_at(x, y + 1) == c)
                .then(|| Self::mean([self.at(x, y - 1), self.at(x, y + 1)]))
                .flatten();
            out[c.index()] = match (horizontal, vertical) {
                (Some(hv), Some(vv)) => match pinned {
                    Direction::Horizontal => hv,
                    Direction::Vertical => vv,
                    Direction::None => {
                        let gh = self.gradient(x, y, 1, 0);
                        let gv = self.gradient(x, y, 0, 1);
                        if gh < gv {
                            hv
                        } else if gv < gh {
                            vv
                        } else {
                            0.5 * (hv + vv)
                        }
                    }
                },
                (Some(hv), None) => hv,
                (None, Some(vv)) => vv,
                (None, None) => Self::mean([
                    self.at(x - 1, y - 1),
                    self.at(x + 1, y - 1),
                    self.at(x - 1, y + 1),
                    self.at(x + 1, y + 1),
                ])
                .unwrap_or(0.0),
            };
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_sites() -> ColorSiteMap {
        ColorSiteMap::from_phase(HolePhase::BottomRight)
    }

    fn filled(w: usize, h: usize, data: Vec<u16>) -> QuadBayerFrame {
        let mut f = QuadBayerFrame::new(w, h, 10, data, HolePhase::BottomRight).unwrap();
        f.holes_filled = true;
        f
    }

    #[test]
    fn default_layout() {
        let s = default_sites();
        assert_eq!(s.site(0, 0), Site::Color(Channel::R));
        assert_eq!(s.site(1, 0), Site::Color(Channel::G));
        assert_eq!(s.site(0, 1), Site::Color(Channel::B));
        assert_eq!(s.site(1, 1), Site::Hole);
        assert_eq!(s.site(3, 5), Site::Hole);
        assert_eq!(s.channel_at(1, 1), Channel::G);
    }

    #[test]
    fn every_phase_has_one_hole_per_block() {
        for p in 0..4 {
            let s = ColorSiteMap::from_phase(HolePhase::from_index(p).unwrap());
            let holes = (0..2).flat_map(|y| (0..2).map(move |x| (x, y))).filter(|&(x, y)| s.site(x, y) == Site::Hole).count();
            assert_eq!(holes, 1);
            assert_eq!(s.hole_phase().index(), p);
        }
        assert!(ColorSiteMap::new([Site::Hole, Site::Hole, Site::Color(Channel::R), Site::Color(Channel::G)], Channel::G).is_err());
    }

    #[test]
    fn constant_mosaic_fills_with_constant() {
        let f = QuadBayerFrame::filled(8, 6, 10, 321, HolePhase::BottomRight).unwrap();
        let out = fill_event_holes(&f, &default_sites(), None).unwrap();
        assert!(out.holes_filled);
        assert!(out.data().iter().all(|&v| v == 321));
    }

    #[test]
    fn hole_takes_mean_of_nearest_fill_sites() {
        // hole (1,1): nearest G sites are (1,0) and (1,2)
        let mut data = vec![0u16; 16];
        data[1] = 10;
        data[2 * 4 + 1] = 20;
        let f = QuadBayerFrame::new(4, 4, 10, data, HolePhase::BottomRight).unwrap();
        let out = fill_event_holes(&f, &default_sites(), None).unwrap();
        assert_eq!(out.get(1, 1), 15);
        // bottom edge hole (1,3): only (1,2) is in bounds
        assert_eq!(out.get(1, 3), 20);
    }

    #[test]
    fn guided_stencil_prefers_low_gradient_axis() {
        // horizontal neighbors 10, vertical neighbors 30; activity varies only along y
        let stencil = [(-1, 0, 10.0), (1, 0, 10.0), (0, -1, 30.0), (0, 1, 30.0)];
        assert_eq!(guided_mean(&stencil, None), 20.0);
        let fill = guided_mean(&stencil, Some((0.0, 50.0)));
        // closed form: (2·10 + 2·30·e^-50) / (2 + 2·e^-50)
        let e = (-50f64).exp();
        assert!((fill - (20.0 + 60.0 * e) / (2.0 + 2.0 * e)).abs() < 1e-12);
        assert!((fill - 10.0).abs() < 1e-9);
        assert_eq!(guided_mean(&stencil, Some((0.0, 0.0))), 20.0);
    }

    #[test]
    fn guided_fill_on_diagonal_layout() {
        // hole top-right: G sits bottom-left, so a hole's nearest G sites are its four diagonals
        let sites = ColorSiteMap::from_phase(HolePhase::TopRight);
        assert_eq!(sites.site(0, 1), Site::Color(Channel::G));
        let (w, h) = (8, 8);
        let mut data = vec![0u16; w * h];
        // hole (3,2) has G diagonals (2,1),(4,1),(2,3),(4,3)
        for (x, y, v) in [(2, 1, 100), (4, 1, 100), (2, 3, 300), (4, 3, 300)] {
            data[y * w + x] = v;
        }
        let f = QuadBayerFrame::new(w, h, 10, data, HolePhase::TopRight).unwrap();
        let plain = fill_event_holes(&f, &sites, None).unwrap();
        assert_eq!(plain.get(3, 2), 200);
        let zero = EventActivity::zeros(4, 4, 0, 1);
        assert_eq!(fill_event_holes(&f, &sites, Some(&zero)).unwrap(), plain);
    }

    #[test]
    fn guide_with_wrong_resolution() {
        let f = QuadBayerFrame::filled(8, 8, 10, 0, HolePhase::BottomRight).unwrap();
        let bad = EventActivity::zeros(3, 4, 0, 1);
        assert!(matches!(fill_event_holes(&f, &default_sites(), Some(&bad)), Err(Error::Shape(_))));
    }

    #[test]
    fn constant_channels_are_exact() {
        let (w, h) = (8, 8);
        let s = default_sites();
        let data = (0..w * h)
            .map(|i| match s.channel_at((i % w) as isize, (i / w) as isize) {
                Channel::R => 200,
                Channel::G => 500,
                Channel::B => 300,
            })
            .collect();
        let img = demosaic(&filled(w, h, data), &s, None).unwrap();
        let expect = [200.0 / 1023.0, 500.0 / 1023.0, 300.0 / 1023.0].map(|v: f64| v as f32);
        for y in 0..h {
            for x in 0..w {
                assert_eq!(img.pixel(x, y), expect);
            }
        }
    }

    #[test]
    fn zero_mosaic() {
        let img = demosaic(&filled(4, 4, vec![0; 16]), &default_sites(), None).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unfilled_mosaic_rejected() {
        let f = QuadBayerFrame::filled(4, 4, 10, 0, HolePhase::BottomRight).unwrap();
        assert!(matches!(demosaic(&f, &default_sites(), None), Err(Error::Precondition(_))));
    }

    /// Bilinear reference: native value, else mean of same-channel 4-neighbors,
    /// else mean of same-channel diagonals.
    fn bilinear_oracle(v: &[f64], w: usize, h: usize, s: &ColorSiteMap, c: Channel) -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let idx = (y as usize) * w + x as usize;
                if s.channel_at(x, y) == c {
                    out[idx] = v[idx];
                    continue;
                }
                let pick = |offs: &[(isize, isize)]| {
                    let vals: Vec<f64> = offs
                        .iter()
                        .map(|&(dx, dy)| (x + dx, y + dy))
                        .filter(|&(nx, ny)| nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize)
                        .filter(|&(nx, ny)| s.channel_at(nx, ny) == c)
                        .map(|(nx, ny)| v[ny as usize * w + nx as usize])
                        .collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                };
                out[idx] = pick(&[(-1, 0), (1, 0), (0, -1), (0, 1)])
                    .or_else(|| pick(&[(-1, -1), (1, -1), (-1, 1), (1, 1)]))
                    .unwrap();
            }
        }
        out
    }

    #[test]
    fn green_impulse_matches_bilinear_oracle() {
        let (w, h) = (6, 6);
        let s = default_sites();
        let mut data = vec![0u16; w * h];
        data[2 * w + 3] = 1023; // G site (3, 2)
        let img = demosaic(&filled(w, h, data.clone()), &s, None).unwrap();
        let v: Vec<f64> = data.iter().map(|&d| d as f64 / 1023.0).collect();
        let oracle = bilinear_oracle(&v, w, h, &s, Channel::G);
        for (x, y) in [(2, 2), (4, 2), (3, 1), (3, 3)] {
            assert_eq!(img.pixel(x, y)[1] as f64, oracle[y * w + x] as f32 as f64, "({x},{y})");
        }
        assert_eq!(img.pixel(2, 2)[1], 0.5);
        for y in 0..h {
            for x in 0..w {
                assert!((img.pixel(x, y)[1] as f64 - oracle[y * w + x]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn direction_from_step_edges() {
        // 5x5 activity with a vertical step edge between columns 1 and 2
        let mut counts = vec![0.0; 25];
        for y in 0..5 {
            for x in 2..5 {
                counts[y * 5 + x] = 10.0;
            }
        }
        let act = EventActivity::new(5, 5, counts, 0, 1).unwrap();
        let field = event_guided_direction(&act, 10, 10, DEFAULT_DIRECTION_MARGIN).unwrap();
        // at activity column 1 and 2: |dE/dx| = 5, |dE/dy| = 0
        assert_eq!(field.get(2, 4), Direction::Vertical);
        assert_eq!(field.get(5, 0), Direction::Vertical);
        // far from the edge the gradient vanishes
        assert_eq!(field.get(9, 9), Direction::None);

        let zero = EventActivity::zeros(5, 5, 0, 1);
        let field = event_guided_direction(&zero, 10, 10, 0.2).unwrap();
        assert!(field.data.iter().all(|&d| d == Direction::None));
        let uniform = EventActivity::new(5, 5, vec![3.0; 25], 0, 1).unwrap();
        let field = event_guided_direction(&uniform, 10, 10, 0.2).unwrap();
        assert!(field.data.iter().all(|&d| d == Direction::None));
        assert!(matches!(event_guided_direction(&zero, 10, 12, 0.2), Err(Error::Shape(_))));
    }

    #[test]
    fn horizontal_step_prefers_horizontal() {
        let counts = (0..25).map(|i| if i / 5 >= 2 { 8.0 } else { 0.0 }).collect();
        let act = EventActivity::new(5, 5, counts, 0, 1).unwrap();
        let field = event_guided_direction(&act, 10, 10, 0.2).unwrap();
        assert_eq!(field.get(0, 3), Direction::Horizontal);
    }

    fn arb_mosaic() -> impl Strategy<Value = QuadBayerFrame> {
        (1usize..5, 1usize..5)
            .prop_flat_map(|(bw, bh)| (Just(2 * bw), Just(2 * bh), prop::collection::vec(0u16..512, 4 * bw * bh)))
            .prop_map(|(w, h, data)| filled(w, h, data.into_iter().map(|v| 2 * v).collect()))
    }

    proptest! {
        #[test]
        fn native_samples_pass_through(f in arb_mosaic()) {
            let s = default_sites();
            let img = demosaic(&f, &s, None).unwrap();
            for y in 0..f.height() {
                for x in 0..f.width() {
                    let c = s.channel_at(x as isize, y as isize);
                    prop_assert_eq!(img.pixel(x, y)[c.index()], (f.get(x, y) as f64 / 1023.0) as f32);
                }
            }
            prop_assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn halving_the_mosaic_halves_the_output(f in arb_mosaic()) {
            let s = default_sites();
            let half = f.with_data(f.data().iter().map(|v| v / 2).collect()).unwrap();
            let a = demosaic(&f, &s, None).unwrap();
            let b = demosaic(&half, &s, None).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x * 0.5 - y).abs() <= 1e-7);
            }
        }

        #[test]
        fn zero_gradient_guide_matches_unguided(f in arb_mosaic()) {
            let s = default_sites();
            let act = EventActivity::new(f.width() / 2, f.height() / 2, vec![2.0; f.width() * f.height() / 4], 0, 1).unwrap();
            let field = event_guided_direction(&act, f.width(), f.height(), 0.2).unwrap();
            prop_assert_eq!(demosaic(&f, &s, Some(&field)).unwrap(), demosaic(&f, &s, None).unwrap());
        }
    }
}
