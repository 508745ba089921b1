//! Event-stream analytics and the two-frame event generation model.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{Event, EventStream, ExposureMeta, Plane};

/// Default floor applied before taking the log of an intensity image.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-3;
/// Default bin width for [`flicker_score`], in microseconds.
pub const DEFAULT_FLICKER_BIN_US: u64 = 1000;
/// Minimum number of rate bins [`flicker_score`] accepts.
pub const MIN_FLICKER_BINS: usize = 20;
/// Periodicity score above which a stream is reported as flickering.
pub const FLICKER_THRESHOLD: f64 = 0.3;

/// `[bin][y][x]` tensor of bilinearly binned event polarities.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub bins: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

impl VoxelGrid {
    pub fn zeros(bins: usize, height: usize, width: usize) -> Self {
        VoxelGrid {
            bins,
            height,
            width,
            values: vec![0.0; bins * height * width],
        }
    }

    pub fn from_values(bins: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != bins * height * width {
            return Err(Error::Invariant(format!(
                "voxel values {} != {bins}x{height}x{width}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Range(format!("non-finite voxel value at index {i}")));
        }
        Ok(VoxelGrid {
            bins,
            height,
            width,
            values,
        })
    }

    pub fn get(&self, bin: usize, y: usize, x: usize) -> f32 {
        self.values[(bin * self.height + y) * self.width + x]
    }

    pub fn bin(&self, bin: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.values[bin * n..(bin + 1) * n]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }
}

/// Per-pixel event counts (either polarity) over `[t0, t1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventActivity {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<f64>,
    pub t0: u64,
    pub t1: u64,
}

impl EventActivity {
    pub fn new(width: usize, height: usize, counts: Vec<f64>, t0: u64, t1: u64) -> Result<Self> {
        if counts.len() != width * height {
            return Err(Error::Invariant(format!("activity counts {} != {width}x{height}", counts.len())));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Range("activity counts must be finite and >= 0".into()));
        }
        if t1 <= t0 {
            return Err(Error::Range(format!("activity window [{t0}, {t1}) is empty")));
        }
        Ok(EventActivity {
            width,
            height,
            counts,
            t0,
            t1,
        })
    }

    pub fn zeros(width: usize, height: usize, t0: u64, t1: u64) -> Self {
        EventActivity {
            width,
            height,
            counts: vec![0.0; width * height],
            t0,
            t1,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.counts[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlickerReport {
    pub dominant_frequency: f64,
    pub periodicity_score: f64,
    pub bin_width: u64,
    pub flickering: bool,
}

/// Global event counts in consecutive bins starting at the first event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub t0: u64,
    pub bin_width: u64,
    pub counts: Vec<u64>,
}

impl RateSeries {
    /// Events per second in each bin.
    pub fn rates(&self) -> Vec<f64> {
        let secs = self.bin_width as f64 * 1e-6;
        self.counts.iter().map(|&c| c as f64 / secs).collect()
    }
}

fn check_window(t0: u64, t1: u64) -> Result<()> {
    if t1 <= t0 {
        return Err(Error::config("events", format!("window [{t0}, {t1}) must have t1 > t0")));
    }
    Ok(())
}

/// Bin events in `[t0, t1)` into `bins` temporal slices, splitting each
/// polarity linearly between the two nearest bin centers.
pub fn voxelize(stream: &EventStream, t0: u64, t1: u64, bins: usize) -> Result<VoxelGrid> {
    if bins == 0 {
        return Err(Error::config("voxelize", "bins must be >= 1"));
    }
    check_window(t0, t1)?;
    let (h, w) = (stream.height, stream.width);
    let mut acc = vec![0f64; bins * h * w];
    let span = (t1 - t0) as f64;
    let bin_len = span / bins as f64;
    for e in stream.window(t0, t1) {
        let pixel = e.y as usize * w + e.x as usize;
        let p = e.p as f64;
        // position relative to bin centers: center i sits at u = i
        let u = (e.t - t0) as f64 / bin_len - 0.5;
        let lo = u.floor();
        let frac = u - lo;
        let lo = lo as isize;
        if lo < 0 {
            acc[pixel] += p;
        } else if lo as usize >= bins - 1 {
            acc[(bins - 1) * h * w + pixel] += p;
        } else {
            let lo = lo as usize;
            acc[lo * h * w + pixel] += p * (1.0 - frac);
            acc[(lo + 1) * h * w + pixel] += p * frac;
        }
    }
    Ok(VoxelGrid {
        bins,
        height: h,
        width: w,
        values: acc.into_iter().map(|v| v as f32).collect(),
    })
}

/// `ln(max(img, floor))`.
pub fn log_intensity(img: &Plane, floor: f64) -> Result<Plane> {
    if !(floor > 0.0) {
        return Err(Error::config("log_intensity", format!("floor {floor} must be > 0")));
    }
    Ok(Plane {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v.max(floor).ln()).collect(),
    })
}

/// Stateless two-frame contrast-threshold model: each pixel emits
/// `floor(|ΔL| / θ)` events of polarity `sign(ΔL)`, uniformly spaced in `(t0, t1]`.
pub fn simulate_events(l0: &Plane, l1: &Plane, threshold: f64, t0: u64, t1: u64) -> Result<EventStream> {
    if !(threshold > 0.0) {
        return Err(Error::config("simulate", format!("threshold {threshold} must be > 0")));
    }
    check_window(t0, t1)?;
    if l0.width != l1.width || l0.height != l1.height || l0.data.len() != l1.data.len() {
        return Err(Error::Shape(format!(
            "log frames {}x{} and {}x{} differ",
            l0.width, l0.height, l1.width, l1.height
        )));
    }
    if l0.data.iter().chain(&l1.data).any(|v| !v.is_finite()) {
        return Err(Error::Range("log intensities must be finite".into()));
    }
    let span = t1 - t0;
    let mut events = Vec::new();
    for (i, (a, b)) in l0.data.iter().zip(&l1.data).enumerate() {
        let delta = b - a;
        let n = (delta.abs() / threshold).floor() as u64;
        if n == 0 {
            continue;
        }
        let p = if delta > 0.0 { 1 } else { -1 };
        let (x, y) = ((i % l0.width) as u16, (i / l0.width) as u16);
        for k in 1..=n {
            let t = t0 + ((k as u128 * span as u128) / n as u128) as u64;
            events.push(Event { t, x, y, p });
        }
    }
    // stable sort keeps raster order among equal timestamps
    events.sort_by_key(|e| e.t);
    EventStream::new(l0.width, l0.height, events)
}

/// Number of events per pixel in `[t0, t1)`.
pub fn activity_map(stream: &EventStream, t0: u64, t1: u64) -> Result<EventActivity> {
    check_window(t0, t1)?;
    let mut counts = vec![0f64; stream.width * stream.height];
    for e in stream.window(t0, t1) {
        counts[e.y as usize * stream.width + e.x as usize] += 1.0;
    }
    EventActivity::new(stream.width, stream.height, counts, t0, t1)
}

/// Event counts in bins of `bin_width` microseconds spanning the stream.
pub fn event_rate(stream: &EventStream, bin_width: u64) -> Result<RateSeries> {
    if bin_width == 0 {
        return Err(Error::config("rate", "bin width must be > 0"));
    }
    let Some((first, last)) = stream.time_span() else {
        return Ok(RateSeries {
            t0: 0,
            bin_width,
            counts: Vec::new(),
        });
    };
    let n = ((last - first) / bin_width + 1) as usize;
    let mut counts = vec![0u64; n];
    for e in stream.events() {
        counts[((e.t - first) / bin_width) as usize] += 1;
    }
    Ok(RateSeries {
        t0: first,
        bin_width,
        counts,
    })
}

/// Spectral periodicity of the global event rate.
///
/// The mean-subtracted bin counts are Fourier transformed; the strongest
/// non-DC bin gives the dominant frequency, and its share of the total
/// non-DC magnitude is the periodicity score.
pub fn flicker_score(stream: &EventStream, bin_width: u64) -> Result<FlickerReport> {
    let series = event_rate(stream, bin_width)?;
    let n = series.counts.len();
    if n < MIN_FLICKER_BINS {
        return Err(Error::InsufficientData(format!(
            "stream spans {n} bins of {bin_width} us, need at least {MIN_FLICKER_BINS}"
        )));
    }
    let mean = series.counts.iter().sum::<u64>() as f64 / n as f64;
    let mut buf: Vec<Complex<f64>> = series.counts.iter().map(|&c| Complex::new(c as f64 - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mags: Vec<f64> = buf[1..=half].iter().map(|c| c.norm()).collect();
    let total: f64 = mags.iter().sum();
    let (peak_k, peak) = mags
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, &m)| if m > best.1 { (i + 1, m) } else { best });
    // relative to the series length, residue of the mean subtraction is noise
    let score = if total > 1e-9 * n as f64 { peak / total } else { 0.0 };
    let dominant_frequency = if score > 0.0 {
        peak_k as f64 * 1e6 / (n as f64 * bin_width as f64)
    } else {
        0.0
    };
    Ok(FlickerReport {
        dominant_frequency,
        periodicity_score: score,
        bin_width,
        flickering: score > FLICKER_THRESHOLD,
    })
}

/// Exposure window of RAW row `r`: `(start, start + exposure)` with
/// `start = frame_start + r · row_readout_delta`.
pub fn row_exposure_window(meta: &ExposureMeta, row: usize) -> (f64, f64) {
    let start = meta.frame_start + row as f64 * meta.row_readout_delta;
    (start, start + meta.exposure_time)
}

/// Events on the event row covering RAW row `row` (`row / 2`) whose
/// timestamps fall in that row's half-open exposure window.
pub fn events_in_row_exposure(stream: &EventStream, meta: &ExposureMeta, row: usize) -> Vec<Event> {
    let (start, end) = row_exposure_window(meta, row);
    let event_row = row / 2;
    // first integer timestamp >= start, first >= end
    let lo = start.max(0.0).ceil() as u64;
    let hi = if end <= 0.0 { 0 } else { end.ceil() as u64 };
    stream
        .window(lo, hi)
        .iter()
        .filter(|e| e.y as usize == event_row)
        .copied()
        .collect()
}

/// `20 · log10(i_max / i_min)`.
pub fn dynamic_range_db(i_max: f64, i_min: f64) -> Result<f64> {
    if !(i_min > 0.0 && i_max > i_min && i_max.is_finite()) {
        return Err(Error::Range(format!("need i_max > i_min > 0, got {i_max} / {i_min}")));
    }
    Ok(20.0 * (i_max / i_min).log10())
}

/// `1 / Δt` for a sampling interval in seconds.
pub fn temporal_resolution_hz(dt_seconds: f64) -> Result<f64> {
    if !(dt_seconds > 0.0 && dt_seconds.is_finite()) {
        return Err(Error::Range(format!("sampling interval {dt_seconds} must be > 0")));
    }
    Ok(1.0 / dt_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(t: u64, x: u16, y: u16, p: i8) -> Event {
        Event { t, x, y, p }
    }

    #[test]
    fn empty_stream_voxelizes_to_zero() {
        let g = voxelize(&EventStream::empty(3, 2), 0, 100, 4).unwrap();
        assert_eq!((g.bins, g.height, g.width), (4, 2, 3));
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert!(matches!(voxelize(&EventStream::empty(3, 2), 0, 100, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn midway_event_splits_evenly() {
        // 4 bins over [0, 400): centers 50, 150, 250, 350
        let s = EventStream::new(2, 2, vec![ev(200, 1, 0, 1)]).unwrap();
        let g = voxelize(&s, 0, 400, 4).unwrap();
        assert_eq!(g.get(1, 0, 1), 0.5);
        assert_eq!(g.get(2, 0, 1), 0.5);
        assert_eq!(g.total(), 1.0);
    }

    #[test]
    fn edge_half_bins_go_to_end_bins() {
        let s = EventStream::new(1, 1, vec![ev(10, 0, 0, -1), ev(390, 0, 0, 1), ev(400, 0, 0, 1)]).unwrap();
        let g = voxelize(&s, 0, 400, 4).unwrap();
        assert_eq!(g.values, vec![-1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn simulate_floor_rule() {
        let theta = 0.2;
        let l0 = Plane::filled(3, 1, 0.0);
        let l1 = Plane::new(3, 1, vec![2.5 * theta, -1.2 * theta, 0.5 * theta]).unwrap();
        let s = simulate_events(&l0, &l1, theta, 0, 1000).unwrap();
        let at = |x: u16| s.events().iter().filter(|e| e.x == x).collect::<Vec<_>>();
        assert_eq!(at(0).len(), 2);
        assert!(at(0).iter().all(|e| e.p == 1));
        assert_eq!(at(1).len(), 1);
        assert_eq!(at(1)[0].p, -1);
        assert!(at(2).is_empty());
        assert_eq!(at(0).iter().map(|e| e.t).collect::<Vec<_>>(), vec![500, 1000]);
        assert_eq!(at(1)[0].t, 1000);
    }

    #[test]
    fn simulate_identical_frames_is_silent() {
        let l = Plane::new(2, 2, vec![0.1, -3.0, 2.0, 0.0]).unwrap();
        assert!(simulate_events(&l, &l, 0.1, 0, 10).unwrap().is_empty());
        assert!(matches!(simulate_events(&l, &l, 0.0, 0, 10), Err(Error::Config { .. })));
    }

    #[test]
    fn log_intensity_floor() {
        let img = Plane::new(3, 1, vec![1.0, std::f64::consts::E * 1e-3, 0.0]).unwrap();
        let l = log_intensity(&img, 1e-3).unwrap();
        assert_eq!(l.data[0], 0.0);
        assert!((l.data[1] - (std::f64::consts::E * 1e-3).ln()).abs() < 1e-15);
        assert_eq!(l.data[2], (1e-3f64).ln());
    }

    #[test]
    fn activity_counts() {
        let s = EventStream::new(3, 2, vec![ev(1, 2, 1, 1), ev(2, 2, 1, -1), ev(3, 2, 1, 1), ev(50, 0, 0, 1)]).unwrap();
        let a = activity_map(&s, 0, 10).unwrap();
        assert_eq!(a.get(2, 1), 3.0);
        assert_eq!(a.total(), 3.0);
        assert_eq!(activity_map(&s, 100, 200).unwrap().total(), 0.0);
        assert_eq!(activity_map(&EventStream::empty(3, 2), 0, 5).unwrap().total(), 0.0);
    }

    #[test]
    fn rate_of_even_stream() {
        let events = (0..1000).map(|t| ev(t, 0, 0, 1)).collect();
        let s = EventStream::new(1, 1, events).unwrap();
        let r = event_rate(&s, 100).unwrap();
        assert_eq!(r.counts, vec![100; 10]);
        assert!((r.rates()[0] - 1e6).abs() < 1e-6);
        assert!(event_rate(&EventStream::empty(1, 1), 100).unwrap().counts.is_empty());
        let one = EventStream::new(1, 1, vec![ev(77, 0, 0, 1)]).unwrap();
        assert_eq!(event_rate(&one, 100).unwrap().counts, vec![1]);
    }

    /// Stream whose per-millisecond event count follows `count(i)`.
    pub(crate) fn stream_from_counts(count: impl Fn(usize) -> u64, bins: usize) -> EventStream {
        let mut events = Vec::new();
        for i in 0..bins {
            let c = count(i);
            for k in 0..c {
                events.push(ev(i as u64 * 1000 + k * 1000 / c.max(1), 0, 0, 1));
            }
        }
        EventStream::new(1, 1, events).unwrap()
    }

    #[test]
    fn flicker_detects_100hz() {
        let s = stream_from_counts(
            |i| (50.0 + 40.0 * (2.0 * std::f64::consts::PI * 100.0 * i as f64 * 1e-3).sin()).round() as u64,
            500,
        );
        let r = flicker_score(&s, 1000).unwrap();
        assert!((r.dominant_frequency - 100.0).abs() <= 2.0, "{r:?}");
        assert!(r.periodicity_score > 0.3 && r.flickering);
    }

    #[test]
    fn flicker_constant_rate() {
        let s = stream_from_counts(|_| 40, 500);
        let r = flicker_score(&s, 1000).unwrap();
        assert!(r.periodicity_score < 0.05 && !r.flickering, "{r:?}");
    }

    #[test]
    fn flicker_needs_twenty_bins() {
        let s = stream_from_counts(|_| 3, 10);
        assert!(matches!(flicker_score(&s, 1000), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn row_windows() {
        let meta = ExposureMeta::new(0.0, 10.0, 1000.0).unwrap();
        assert_eq!(row_exposure_window(&meta, 5), (50.0, 1050.0));
        let global = ExposureMeta::new(7.0, 0.0, 100.0).unwrap();
        assert_eq!(row_exposure_window(&global, 0), row_exposure_window(&global, 999));
    }

    #[test]
    fn row_exposure_boundaries() {
        let meta = ExposureMeta::new(0.0, 10.0, 1000.0).unwrap();
        // RAW row 5 -> event row 2, window [50, 1050)
        let s = EventStream::new(4, 4, vec![ev(49, 0, 2, 1), ev(50, 1, 2, 1), ev(60, 1, 1, 1), ev(1049, 2, 2, -1), ev(1050, 3, 2, 1)]).unwrap();
        let got = events_in_row_exposure(&s, &meta, 5);
        assert_eq!(got.iter().map(|e| e.t).collect::<Vec<_>>(), vec![50, 1049]);
        assert!(events_in_row_exposure(&EventStream::empty(4, 4), &meta, 5).is_empty());
    }

    #[test]
    fn sensor_formulas() {
        assert!((dynamic_range_db(1e6, 1.0).unwrap() - 120.0).abs() < 1e-12);
        assert!((dynamic_range_db(1000.0, 1.0).unwrap() - 60.0).abs() < 1e-12);
        assert!((temporal_resolution_hz(1.25e-3).unwrap() - 800.0).abs() < 1e-9);
        assert!(matches!(dynamic_range_db(1.0, 0.0), Err(Error::Range(_))));
        assert!(matches!(dynamic_range_db(1.0, 2.0), Err(Error::Range(_))));
        assert!(matches!(temporal_resolution_hz(0.0), Err(Error::Range(_))));
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        prop::collection::vec((0u64..10_000, 0u16..8, 0u16..6, any::<bool>()), 0..200).prop_map(|raw| {
            let mut events: Vec<Event> = raw.into_iter().map(|(t, x, y, b)| ev(t, x, y, if b { 1 } else { -1 })).collect();
            events.sort_by_key(|e| e.t);
            EventStream::new(8, 6, events).unwrap()
        })
    }

    proptest! {
        #[test]
        fn voxel_mass_is_conserved(s in arb_stream(), t0 in 0u64..5000, len in 1u64..6000, bins in 1usize..9) {
            let t1 = t0 + len;
            let g = voxelize(&s, t0, t1, bins).unwrap();
            let oracle: i64 = s.events().iter().filter(|e| e.t >= t0 && e.t < t1).map(|e| e.p as i64).sum();
            prop_assert!((g.total() - oracle as f64).abs() <= 1e-6 * (oracle.unsigned_abs() as f64).max(1.0));
        }

        #[test]
        fn activity_total_is_window_count(s in arb_stream(), t0 in 0u64..5000, len in 1u64..6000) {
            let a = activity_map(&s, t0, t0 + len).unwrap();
            let n = s.events().iter().filter(|e| e.t >= t0 && e.t < t0 + len).count();
            prop_assert_eq!(a.total(), n as f64);
        }

        #[test]
        fn exposure_length_is_row_independent(start in -1e6f64..1e6, delta in 0.0f64..100.0, exp in 1e-3f64..1e5, r in 0usize..5000) {
            let meta = ExposureMeta::new(start, delta, exp).unwrap();
            let (a, b) = row_exposure_window(&meta, r);
            prop_assert!(((b - a) - exp).abs() <= 1e-9 * exp.max(start.abs() + delta * r as f64));
        }

        #[test]
        fn flicker_shift_invariant(phase in 0usize..10) {
            let f = |i: usize| (50.0 + 40.0 * (2.0 * std::f64::consts::PI * 100.0 * (i + phase) as f64 * 1e-3).sin()).round() as u64;
            let base = flicker_score(&stream_from_counts(|i| f(i), 500), 1000).unwrap();
            let shifted = flicker_score(&stream_from_counts(|i| f(i + 3), 500), 1000).unwrap();
            prop_assert!((base.periodicity_score - shifted.periodicity_score).abs() < 0.02);
        }
    }
}
