use std::path::Path;

use nalgebra::{DMatrix, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::{ciede2000, linear_to_lab, luminance, LabColor, PatchColors, PATCH_COUNT, WB_PATCH};
use crate::error::{Error, Result};
use crate::frame_io::{atomic_write, RgbImage};

pub const MAX_FIT_ITERATIONS: usize = 2000;
const SPREAD_TOLERANCE: f64 = 1e-6;
const SIMPLEX_STEP: f64 = 0.05;

/// 3×3 color correction matrix applied to row-vector pixels: `out = rgb · M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ccm {
    pub matrix: [[f64; 3]; 3],
}

impl Ccm {
    pub const IDENTITY: Ccm = Ccm {
        matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn new(matrix: [[f64; 3]; 3]) -> Result<Self> {
        let m = Ccm { matrix };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("CCM entries must be finite".into()));
        }
        Ok(())
    }

    pub fn apply(&self, rgb: [f64; 3]) -> [f64; 3] {
        let m = &self.matrix;
        [0, 1, 2].map(|j| rgb[0] * m[0][j] + rgb[1] * m[1][j] + rgb[2] * m[2][j])
    }

    /// Image of the unit white `(1, 1, 1)`, i.e. the column sums.
    pub fn white_response(&self) -> [f64; 3] {
        self.apply([1.0; 3])
    }

    pub fn scaled(&self, k: f64) -> Ccm {
        Ccm {
            matrix: self.matrix.map(|row| row.map(|v| v * k)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Ccm = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), serde_json::to_string_pretty(self)?.as_bytes())
    }
}

pub fn apply_ccm(img: &RgbImage, ccm: &Ccm) -> RgbImage {
    let m = ccm.matrix.map(|row| row.map(|v| v as f32));
    img.map_pixels(img.space, |p| {
        [0, 1, 2].map(|j| (p[0] * m[0][j] + p[1] * m[1][j] + p[2] * m[2][j]).clamp(0.0, 1.0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Constrain `(1, 1, 1) · M` to stay neutral.
    pub white_preserve: bool,
    /// Scale measured patches so patch 21 matches the reference luminance.
    pub exposure_normalize: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            white_preserve: false,
            exposure_normalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStart {
    LeastSquares,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean ΔE00 of the least-squares initialization.
    pub initial_objective: f64,
    pub identity_objective: f64,
    pub final_objective: f64,
    pub start: FitStart,
    pub iterations: usize,
    pub converged: bool,
    /// Corrected colors are clamped to [0, 1] before comparison.
    pub clamped: bool,
    pub exposure_scale: f64,
    pub white_preserve: bool,
}

struct Objective {
    measured: Vec<[f64; 3]>,
    reference: Vec<LabColor>,
    white_preserve: bool,
}

impl Objective {
    fn params_len(&self) -> usize {
        if self.white_preserve {
            6
        } else {
            9
        }
    }

    fn to_params(&self, m: &Ccm) -> Vec<f64> {
        m.matrix.iter().flatten().take(self.params_len()).copied().collect()
    }

    fn to_ccm(&self, x: &[f64]) -> Ccm {
        let mut matrix = [[0.0; 3]; 3];
        for (i, v) in x.iter().enumerate() {
            matrix[i / 3][i % 3] = *v;
        }
        if self.white_preserve {
            for j in 0..3 {
                matrix[2][j] = 1.0 - matrix[0][j] - matrix[1][j];
            }
        }
        Ccm { matrix }
    }

    fn eval_ccm(&self, m: &Ccm) -> f64 {
        let total: f64 = self
            .measured
            .iter()
            .zip(&self.reference)
            .map(|(&rgb, &lab)| ciede2000(linear_to_lab(m.apply(rgb).map(|v| v.clamp(0.0, 1.0))), lab))
            .sum();
        total / self.measured.len() as f64
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_ccm(&self.to_ccm(x))
    }
}

/// Least-squares `M` minimizing `‖A·M − B‖`, optionally with unit column sums.
fn least_squares(measured: &[[f64; 3]], reference: &[[f64; 3]], white_preserve: bool) -> Option<Ccm> {
    let n = measured.len();
    let a = DMatrix::from_fn(n, 3, |i, j| measured[i][j]);
    let b = DMatrix::from_fn(n, 3, |i, j| reference[i][j]);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * &b;
    let mut matrix = [[0.0; 3]; 3];
    if white_preserve {
        // KKT system per column: [AᵀA 1; 1ᵀ 0] [m; λ] = [Aᵀb; 1]
        let mut kkt = Matrix4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                kkt[(i, j)] = ata[(i, j)];
            }
            kkt[(i, 3)] = 1.0;
            kkt[(3, i)] = 1.0;
        }
        let lu = kkt.lu();
        for j in 0..3 {
            let rhs = Vector4::new(atb[(0, j)], atb[(1, j)], atb[(2, j)], 1.0);
            let sol = lu.solve(&rhs)?;
            for i in 0..3 {
                matrix[i][j] = sol[i];
            }
        }
    } else {
        let sol = ata.lu().solve(&atb)?;
        for i in 0..3 {
            for j in 0..3 {
                matrix[i][j] = sol[(i, j)];
            }
        }
    }
    let m = Ccm { matrix };
    m.validate().ok().map(|_| m)
}

struct NelderMeadResult {
    best: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: Vec<f64>, max_iter: usize, tol: f64) -> Result<NelderMeadResult> {
    let n = start.len();
    let check = |v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Fit("objective evaluated to a non-finite value".into()))
        }
    };
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let mut p = start.clone();
        p[i] += if p[i] != 0.0 { SIMPLEX_STEP * p[i].abs().max(1.0) } else { SIMPLEX_STEP };
        simplex.push(p);
    }
    let mut values = simplex.iter().map(|p| check(f(p))).collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0;
    let mut converged = false;

    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    while iterations < max_iter {
        // stable sort keeps ties in insertion order, so runs are reproducible
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        if values[worst] - values[best] < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                *c += v / n as f64;
            }
        }
        let reflected = combine(&centroid, &simplex[worst], -1.0);
        let fr = check(f(&reflected))?;
        if fr < values[best] {
            let expanded = combine(&centroid, &simplex[worst], -2.0);
            let fe = check(f(&expanded))?;
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[worst] {
            let p = combine(&centroid, &reflected, 0.5);
            let v = check(f(&p))?;
            (p, v)
        } else {
            let p = combine(&centroid, &simplex[worst], 0.5);
            let v = check(f(&p))?;
            (p, v)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            simplex[i] = combine(&anchor, &simplex[i], 0.5);
            values[i] = check(f(&simplex[i]))?;
        }
    }
    let best = (0..=n).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    Ok(NelderMeadResult {
        best: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    })
}

/// Fit a CCM minimizing the mean CIEDE2000 between corrected measured
/// patches and the reference chart.
///
/// The search starts from the better of the least-squares solution and the
/// identity, so the final objective never exceeds either.
pub fn fit_ccm(measured: &PatchColors, reference: &PatchColors, opts: FitOptions) -> Result<(Ccm, FitReport)> {
    measured.validate()?;
    reference.validate()?;
    let exposure_scale = if opts.exposure_normalize {
        let (lm, lr) = (luminance(measured.patch(WB_PATCH)), luminance(reference.patch(WB_PATCH)));
        if !(lm > 0.0) {
            return Err(Error::Illuminant(format!(
                "patch {WB_PATCH} luminance {lm} cannot anchor exposure normalization"
            )));
        }
        lr / lm
    } else {
        1.0
    };
    let scaled: Vec<[f64; 3]> = measured.colors().iter().map(|c| c.map(|v| v * exposure_scale)).collect();
    let objective = Objective {
        measured: scaled.clone(),
        reference: reference.colors().iter().map(|&c| linear_to_lab(c)).collect(),
        white_preserve: opts.white_preserve,
    };
    debug_assert_eq!(objective.measured.len(), PATCH_COUNT);

    let identity_objective = objective.eval_ccm(&Ccm::IDENTITY);
    let ls = least_squares(&scaled, reference.colors(), opts.white_preserve);
    let initial_objective = ls.map_or(f64::INFINITY, |m| objective.eval_ccm(&m));
    if !identity_objective.is_finite() {
        return Err(Error::Fit("objective at identity is not finite".into()));
    }
    let (start, start_ccm) = match ls {
        Some(m) if initial_objective <= identity_objective => (FitStart::LeastSquares, m),
        _ => (FitStart::Identity, Ccm::IDENTITY),
    };
    let result = nelder_mead(
        |x| objective.eval(x),
        objective.to_params(&start_ccm),
        MAX_FIT_ITERATIONS,
        SPREAD_TOLERANCE,
    )?;
    let fitted = objective.to_ccm(&result.best);
    let report = FitReport {
        initial_objective: if initial_objective.is_finite() { initial_objective } else { identity_objective },
        identity_objective,
        final_objective: result.value,
        start,
        iterations: result.iterations,
        converged: result.converged,
        clamped: true,
        exposure_scale,
        white_preserve: opts.white_preserve,
    };
    Ok((fitted.scaled(exposure_scale), report))
}
