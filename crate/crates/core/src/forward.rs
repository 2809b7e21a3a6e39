//! Radiographic measurement chain and the inverse-Abel baseline.
//!
//! Each row of a central slice is treated as the radial profile of an
//! axisymmetric object about the vertical center line. The discrete Abel
//! operator integrates the kernel `r / sqrt(r^2 - y^2)` exactly over every
//! annular cell (piecewise-constant density per cell), which makes it an
//! upper-triangular matrix with a positive diagonal per half-row: exactly
//! invertible by back substitution.

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::{DensityTimeSeries, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamConfig {
    #[serde(rename = "I0")]
    pub i0: f64,
    /// Mass attenuation coefficient.
    pub xi: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { i0: 1.0, xi: 1e-2 }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0 && self.xi > 0.0) {
            return Err(Error::Invalid("beam needs I0 > 0 and xi > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatterConfig {
    /// Nominal scatter scaling.
    pub beta0: f64,
    /// Fractional half-range of the per-frame scaling around `beta0`.
    pub beta_variation: f64,
    /// Gaussian kernel standard deviation, pixels.
    pub sigma: f64,
    /// Variance of the additive Gaussian noise.
    pub noise_var: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            beta_variation: 0.05,
            sigma: 2.0,
            noise_var: 0.0,
        }
    }
}

impl ScatterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 >= 0.0
            && (0.0..1.0).contains(&self.beta_variation)
            && self.sigma > 0.0
            && self.noise_var >= 0.0)
        {
            return Err(Error::Invalid(format!("invalid scatter config {self:?}")));
        }
        Ok(())
    }
}

/// Areal densities (density x cm) of one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct ArealImage {
    pub values: Array2<f64>,
    pub dx: f64,
}

/// Direct, scatter and measured transmissions of a whole series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiographSeries {
    pub direct: Array3<f64>,
    pub scatter: Array3<f64>,
    pub measured: Array3<f64>,
    pub betas: Vec<f64>,
    pub beam: BeamConfig,
    pub scatter_config: ScatterConfig,
    pub seed: u64,
}

/// Per-row discrete Abel operator for slices of a fixed width.
#[derive(Clone, Debug)]
pub struct AbelOperator {
    width: usize,
    dx: f64,
    /// Upper-triangular `n x n` matrix over the half-profile, row-major.
    matrix: Vec<f64>,
    n: usize,
}

impl AbelOperator {
    /// For even widths the axis sits between columns `W/2 - 1` and `W/2`
    /// and radius index `k` is column `W/2 + k`. For odd widths the axis is
    /// the center column `(W-1)/2`, which is radius index 0.
    pub fn new(width: usize, dx: f64) -> Self {
        assert!(width > 0 && dx > 0.0);
        let odd = width % 2 == 1;
        let n = width.div_ceil(2);
        // Cell boundaries and ray positions in units of dx.
        let (lower, upper, ray): (Vec<f64>, Vec<f64>, Vec<f64>) = (0..n)
            .map(|k| {
                let k = k as f64;
                if odd {
                    ((k - 0.5).max(0.0), k + 0.5, k)
                } else {
                    (k, k + 1.0, k + 0.5)
                }
            })
            .fold((vec![], vec![], vec![]), |(mut a, mut b, mut c), (l, u, y)| {
                a.push(l);
                b.push(u);
                c.push(y);
                (a, b, c)
            });
        let mut matrix = vec![0.0; n * n];
        for j in 0..n {
            let y2 = ray[j] * ray[j];
            for k in j..n {
                let lo = lower[k].max(ray[j]);
                matrix[j * n + k] = 2.0 * dx * ((upper[k] * upper[k] - y2).sqrt() - (lo * lo - y2).max(0.0).sqrt());
            }
        }
        Self {
            width,
            dx,
            matrix,
            n,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Column of radius index `k` on the right half.
    #[inline]
    fn column(&self, k: usize) -> usize {
        self.width / 2 + k
    }

    /// Right-half radial profile of one row (the slice is assumed symmetric).
    fn profile(&self, row: &[f64]) -> Vec<f64> {
        (0..self.n).map(|k| row[self.column(k)]).collect()
    }

    fn mirror_into(&self, half: &[f64], row: &mut [f64]) {
        for (k, &v) in half.iter().enumerate() {
            let c = self.column(k);
            row[c] = v;
            row[self.width - 1 - c] = v;
        }
    }

    pub fn project_row(&self, row: &[f64]) -> Vec<f64> {
        let rho = self.profile(row);
        let proj: Vec<f64> = (0..self.n)
            .map(|j| (j..self.n).map(|k| self.matrix[j * self.n + k] * rho[k]).sum())
            .collect();
        let mut out = vec![0.0; self.width];
        self.mirror_into(&proj, &mut out);
        out
    }

    pub fn invert_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let p = self.profile(row);
        let mut rho = vec![0.0; self.n];
        for j in (0..self.n).rev() {
            let diag = self.matrix[j * self.n + j];
            if !(diag > 0.0) {
                return Err(Error::Singular(format!("Abel matrix has zero pivot at radius index {j}")));
            }
            let tail: f64 = (j + 1..self.n).map(|k| self.matrix[j * self.n + k] * rho[k]).sum();
            rho[j] = (p[j] - tail) / diag;
        }
        let mut out = vec![0.0; self.width];
        self.mirror_into(&rho, &mut out);
        Ok(out)
    }

    pub fn project(&self, slice: ArrayView2<f64>) -> ArealImage {
        let mut values = Array2::zeros(slice.raw_dim());
        for (src, mut dst) in slice.axis_iter(Axis(0)).zip(values.axis_iter_mut(Axis(0))) {
            let row: Vec<f64> = src.iter().copied().collect();
            for (d, v) in dst.iter_mut().zip(self.project_row(&row)) {
                *d = v;
            }
        }
        ArealImage { values, dx: self.dx }
    }

    pub fn invert(&self, areal: &ArealImage) -> Result<Array2<f64>> {
        if areal.values.ncols() != self.width {
            return Err(Error::Shape(format!(
                "areal image width {} does not match operator width {}",
                areal.values.ncols(),
                self.width
            )));
        }
        let mut out = Array2::zeros(areal.values.raw_dim());
        for (src, mut dst) in areal.values.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            let row: Vec<f64> = src.iter().copied().collect();
            for (d, v) in dst.iter_mut().zip(self.invert_row(&row)?) {
                *d = v;
            }
        }
        Ok(out)
    }
}

/// Row-wise Abel projection of a central slice.
pub fn abel_project(slice: ArrayView2<f64>, dx: f64) -> ArealImage {
    AbelOperator::new(slice.ncols(), dx).project(slice)
}

/// Inverse of [`abel_project`].
pub fn inverse_abel(areal: &ArealImage) -> Result<Array2<f64>> {
    AbelOperator::new(areal.values.ncols(), areal.dx).invert(areal)
}

/// Beer-Lambert direct transmission `I0 exp(-xi * areal)`.
pub fn transmission(areal: &ArealImage, beam: &BeamConfig) -> Array2<f64> {
    areal.values.mapv(|a| beam.i0 * (-beam.xi * a).exp())
}

/// Normalized 1-D Gaussian kernel truncated at radius `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let w: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn convolve_1d(line: &[f64], kernel: &[f64], out: &mut [f64]) {
    let radius = (kernel.len() / 2) as isize;
    let n = line.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = kernel
            .iter()
            .enumerate()
            .map(|(k, &w)| w * line[reflect(i as isize + k as isize - radius, n)])
            .sum();
    }
}

/// Separable Gaussian blur with reflecting boundaries.
pub fn gaussian_convolve(image: ArrayView2<f64>, sigma: f64) -> Array2<f64> {
    let kernel = gaussian_kernel(sigma);
    let (h, w) = image.dim();
    let mut tmp = Array2::zeros((h, w));
    let mut buf = vec![0.0; w];
    for (src, mut dst) in image.axis_iter(Axis(0)).zip(tmp.axis_iter_mut(Axis(0))) {
        let line: Vec<f64> = src.iter().copied().collect();
        convolve_1d(&line, &kernel, &mut buf);
        dst.iter_mut().zip(&buf).for_each(|(d, &v)| *d = v);
    }
    let mut out = Array2::zeros((h, w));
    let mut buf = vec![0.0; h];
    for (src, mut dst) in tmp.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
        let line: Vec<f64> = src.iter().copied().collect();
        convolve_1d(&line, &kernel, &mut buf);
        dst.iter_mut().zip(&buf).for_each(|(d, &v)| *d = v);
    }
    out
}

/// Direct radiographs of every frame of a (normalized) series, in physical units.
pub fn direct_radiographs(series: &DensityTimeSeries, beam: &BeamConfig) -> Array3<f64> {
    let op = AbelOperator::new(series.grid.n_cells, series.grid.dx);
    let mut out = Array3::zeros(series.frames.raw_dim());
    for (frame, mut dst) in series.frames.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let raw = frame.mapv(|v| v * series.norm_factor);
        dst.assign(&transmission(&op.project(raw.view()), beam));
    }
    out
}

/// `m_t = d_t + beta_t G[d_t] + n_t` with `beta_t ~ U[beta0 (1 - v), beta0 (1 + v)]` per frame.
pub fn corrupt(direct: &Array3<f64>, beam: &BeamConfig, cfg: &ScatterConfig, seed: u64) -> Result<RadiographSeries> {
    cfg.validate()?;
    beam.validate()?;
    if direct.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("direct radiograph contains non-finite values".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if cfg.noise_var > 0.0 {
        Some(Normal::new(0.0, cfg.noise_var.sqrt()).map_err(|e| Error::Invalid(e.to_string()))?)
    } else {
        None
    };
    let mut scatter = Array3::zeros(direct.raw_dim());
    let mut measured = Array3::zeros(direct.raw_dim());
    let mut betas = Vec::with_capacity(direct.len_of(Axis(0)));
    for t in 0..direct.len_of(Axis(0)) {
        let d = direct.index_axis(Axis(0), t);
        let lo = cfg.beta0 * (1.0 - cfg.beta_variation);
        let hi = cfg.beta0 * (1.0 + cfg.beta_variation);
        let beta = if hi > lo { rng.random_range(lo..=hi) } else { cfg.beta0 };
        let s = gaussian_convolve(d, cfg.sigma);
        let mut m = &d + &(&s * beta);
        if let Some(normal) = &noise {
            m.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
        scatter.index_axis_mut(Axis(0), t).assign(&s);
        measured.index_axis_mut(Axis(0), t).assign(&m);
        betas.push(beta);
    }
    Ok(RadiographSeries {
        direct: direct.clone(),
        scatter,
        measured,
        betas,
        beam: *beam,
        scatter_config: *cfg,
        seed,
    })
}

pub const DEFAULT_CLAMP_EPS: f64 = 1e-6;

/// Baseline reconstruction that ignores scatter and noise: clamp, take
/// `-ln(m / I0) / xi`, invert the Abel transform, normalize and clip.
pub fn reconstruct_density(
    measured: &Array3<f64>,
    beam: &BeamConfig,
    grid: GridSpec,
    norm_factor: f64,
    clamp_eps: f64,
) -> Result<DensityTimeSeries> {
    if !(clamp_eps > 0.0) {
        return Err(Error::Invalid("clamp_eps must be positive".into()));
    }
    beam.validate()?;
    let op = AbelOperator::new(measured.len_of(Axis(2)), grid.dx);
    let floor = clamp_eps * beam.i0;
    let mut frames = Array3::zeros(measured.raw_dim());
    for (m, mut dst) in measured.axis_iter(Axis(0)).zip(frames.axis_iter_mut(Axis(0))) {
        let areal = ArealImage {
            values: m.mapv(|v| {
                // NaN measurements fall through to the clamp floor as well.
                let v = if v >= floor { v } else { floor };
                -(v / beam.i0).ln() / beam.xi
            }),
            dx: grid.dx,
        };
        let rho = op.invert(&areal)?;
        dst.assign(&rho.mapv(|v| v.clamp(0.0, norm_factor) / norm_factor));
    }
    Ok(DensityTimeSeries::new(frames, grid, norm_factor))
}

/// Baseline reconstruction of a radiograph series.
pub fn reconstruct_series(
    radiographs: &RadiographSeries,
    grid: GridSpec,
    norm_factor: f64,
    clamp_eps: f64,
) -> Result<DensityTimeSeries> {
    reconstruct_density(&radiographs.measured, &radiographs.beam, grid, norm_factor, clamp_eps)
}
