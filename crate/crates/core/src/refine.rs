//! Mass + anisotropic-TV refinement of a density series, solved with RMSprop.

use ndarray::{Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::DensityTimeSeries;
use crate::training::{mass_weights, masses_flat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Data fidelity weight.
    pub lambda0: f64,
    /// Mass fidelity weight.
    pub lambda1: f64,
    /// Total-variation weight.
    pub lambda2: f64,
    pub step_size: f64,
    pub max_iters: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    /// Target mass of every frame.
    pub true_masses: Vec<f64>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            lambda0: 5.0,
            lambda1: 100.0,
            lambda2: 1e-4,
            step_size: 1e-5,
            max_iters: 7000,
            rmsprop_decay: 0.99,
            rmsprop_eps: 1e-8,
            true_masses: Vec::new(),
        }
    }
}

impl RefineConfig {
    /// Settings of the classical mass + TV denoiser (no data term).
    pub fn classical(true_masses: Vec<f64>) -> Self {
        Self {
            lambda0: 0.0,
            lambda1: 100.0,
            lambda2: 1e-4,
            max_iters: 10_000,
            true_masses,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.lambda0, self.lambda1, self.lambda2].iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Invalid("refinement weights must be nonnegative".into()));
        }
        if !(self.step_size > 0.0) || self.max_iters == 0 {
            return Err(Error::Invalid("step_size and max_iters must be positive".into()));
        }
        if !((0.0..1.0).contains(&self.rmsprop_decay) && self.rmsprop_eps > 0.0) {
            return Err(Error::Invalid("need 0 <= rmsprop_decay < 1 and rmsprop_eps > 0".into()));
        }
        Ok(())
    }
}

/// Sum of absolute differences between vertically and horizontally adjacent entries.
pub fn tva_norm(x: ArrayView2<f64>) -> f64 {
    let (h, w) = x.dim();
    let mut total = 0.0;
    for i in 0..h {
        for j in 0..w {
            if i + 1 < h {
                total += (x[[i + 1, j]] - x[[i, j]]).abs();
            }
            if j + 1 < w {
                total += (x[[i, j + 1]] - x[[i, j]]).abs();
            }
        }
    }
    total
}

/// Objective value split into its weighted terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub total: f64,
    pub data: f64,
    pub mass: f64,
    pub tv: f64,
}

struct Problem<'a> {
    shape: [usize; 3],
    anchor: &'a [f64],
    anchor_norm: f64,
    weights: Vec<f64>,
    grid: crate::phantom::GridSpec,
    cfg: &'a RefineConfig,
}

impl<'a> Problem<'a> {
    fn new(anchor: &'a DensityTimeSeries, anchor_flat: &'a [f64], shape: [usize; 3], cfg: &'a RefineConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.lambda1 > 0.0 && cfg.true_masses.len() != shape[0] {
            return Err(Error::Shape(format!(
                "{} target masses supplied for {} frames",
                cfg.true_masses.len(),
                shape[0]
            )));
        }
        let anchor_norm = anchor_flat.iter().map(|v| v * v).sum::<f64>().sqrt();
        if cfg.lambda0 > 0.0 && !(anchor_norm > 0.0) {
            return Err(Error::Invalid("anchor has zero norm but lambda0 > 0".into()));
        }
        Ok(Self {
            shape,
            anchor: anchor_flat,
            anchor_norm,
            weights: mass_weights(shape[2], &anchor.grid),
            grid: anchor.grid,
            cfg,
        })
    }

    /// Objective at `x`; accumulates a subgradient into `grad` when given.
    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> Objective {
        let cfg = self.cfg;
        let [_, h, w] = self.shape;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }

        let mut data = 0.0;
        if cfg.lambda0 > 0.0 {
            let r = x.iter().zip(self.anchor).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            data = cfg.lambda0 * r / self.anchor_norm;
            if let (Some(g), true) = (grad.as_deref_mut(), r > 0.0) {
                let k = cfg.lambda0 / (self.anchor_norm * r);
                g.iter_mut().zip(x.iter().zip(self.anchor)).for_each(|(g, (a, b))| *g += k * (a - b));
            }
        }

        let mut mass = 0.0;
        if cfg.lambda1 > 0.0 {
            let dm: Vec<f64> = masses_flat(x, self.shape, &self.grid)
                .iter()
                .zip(&cfg.true_masses)
                .map(|(m, t)| m - t)
                .collect();
            let n = dm.iter().map(|v| v * v).sum::<f64>().sqrt();
            mass = cfg.lambda1 * n;
            if let (Some(g), true) = (grad.as_deref_mut(), n > 0.0) {
                for (t, frame) in g.chunks_mut(h * w).enumerate() {
                    let k = cfg.lambda1 * dm[t] / n;
                    for row in frame.chunks_mut(w) {
                        row.iter_mut().zip(&self.weights).for_each(|(v, wt)| *v += k * wt);
                    }
                }
            }
        }

        let mut tv = 0.0;
        if cfg.lambda2 > 0.0 {
            let sign = |d: f64| if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
            // Adjacent pairs as (first, second) flat offsets within a frame.
            let pairs = (0..h.saturating_sub(1) * w)
                .map(|k| (k, k + w))
                .chain((0..h).flat_map(|i| (0..w.saturating_sub(1)).map(move |j| (i * w + j, i * w + j + 1))));
            let pairs: Vec<(usize, usize)> = pairs.collect();
            for (t, f) in x.chunks(h * w).enumerate() {
                match grad.as_deref_mut() {
                    Some(g) => {
                        let g = &mut g[t * h * w..(t + 1) * h * w];
                        for &(a, b) in &pairs {
                            let d = f[b] - f[a];
                            tv += d.abs();
                            let s = cfg.lambda2 * sign(d);
                            g[b] += s;
                            g[a] -= s;
                        }
                    }
                    None => tv += pairs.iter().map(|&(a, b)| (f[b] - f[a]).abs()).sum::<f64>(),
                }
            }
            tv *= cfg.lambda2;
        }
        Objective {
            total: data + mass + tv,
            data,
            mass,
            tv,
        }
    }
}

fn check_shapes(rho: &DensityTimeSeries, anchor: &DensityTimeSeries) -> Result<[usize; 3]> {
    if rho.shape() != anchor.shape() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", rho.shape(), anchor.shape())));
    }
    Ok(anchor.shape())
}

/// Weighted objective of `rho` with data term anchored at `anchor`.
pub fn refine_objective(rho: &DensityTimeSeries, anchor: &DensityTimeSeries, cfg: &RefineConfig) -> Result<Objective> {
    let shape = check_shapes(rho, anchor)?;
    let a = anchor.as_flat();
    let p = Problem::new(anchor, &a, shape, cfg)?;
    Ok(p.eval(&rho.as_flat(), None))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineResult {
    /// Best iterate found.
    pub series: DensityTimeSeries,
    pub objective: Objective,
    pub initial: Objective,
    /// Iteration that produced the best iterate (0 is the initial point).
    pub best_iter: usize,
}

/// Minimizes the refinement objective from `init` (default: the anchor) and
/// returns the lowest-objective iterate visited.
pub fn refine(anchor: &DensityTimeSeries, cfg: &RefineConfig, init: Option<&DensityTimeSeries>) -> Result<RefineResult> {
    let start = init.unwrap_or(anchor);
    let shape = check_shapes(start, anchor)?;
    let a = anchor.as_flat();
    let problem = Problem::new(anchor, &a, shape, cfg)?;

    let mut x = start.as_flat();
    let mut grad = vec![0.0; x.len()];
    let mut sq = vec![0.0; x.len()];
    let initial = problem.eval(&x, Some(&mut grad));
    if !initial.total.is_finite() {
        return Err(Error::Divergence("refinement objective is non-finite at the initial point".into()));
    }
    let (mut best, mut best_x, mut best_iter) = (initial, x.clone(), 0);
    for it in 1..=cfg.max_iters {
        for ((xi, gi), si) in x.iter_mut().zip(&grad).zip(sq.iter_mut()) {
            *si = cfg.rmsprop_decay * *si + (1.0 - cfg.rmsprop_decay) * gi * gi;
            *xi -= cfg.step_size * gi / (si.sqrt() + cfg.rmsprop_eps);
        }
        let obj = problem.eval(&x, Some(&mut grad));
        if !obj.total.is_finite() {
            return Err(Error::Divergence(format!("refinement objective became non-finite at iteration {it}")));
        }
        if obj.total < best.total {
            best = obj;
            best_x.copy_from_slice(&x);
            best_iter = it;
        }
    }
    let frames = Array3::from_shape_vec(start.frames.raw_dim(), best_x).expect("shape preserved");
    Ok(RefineResult {
        series: start.with_frames(frames),
        objective: best,
        initial,
        best_iter,
    })
}

/// Mass + TV denoising started from, and without a data term towards, `noisy`.
pub fn classical_denoise(noisy: &DensityTimeSeries, true_masses: &[f64]) -> Result<RefineResult> {
    refine(noisy, &RefineConfig::classical(true_masses.to_vec()), Some(noisy))
}

/// Per-frame TV of a series, summed.
pub fn series_tv(series: &DensityTimeSeries) -> f64 {
    series.frames.axis_iter(Axis(0)).map(tva_norm).sum()
}
