use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::{DensityTimeSeries, GridSpec};
use crate::training::mass_of;

/// `|clean - est|_p / |clean|_p` over the whole stack, `p` in {1, 2}.
pub fn normalized_lp_error(clean: &DensityTimeSeries, est: &DensityTimeSeries, p: u32) -> Result<f64> {
    if clean.shape() != est.shape() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", clean.shape(), est.shape())));
    }
    let (num, den) = match p {
        1 => (
            clean.frames.iter().zip(&est.frames).map(|(a, b)| (a - b).abs()).sum::<f64>(),
            clean.frames.iter().map(|a| a.abs()).sum::<f64>(),
        ),
        2 => (
            clean.frames.iter().zip(&est.frames).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            clean.frames.iter().map(|a| a * a).sum::<f64>().sqrt(),
        ),
        _ => return Err(Error::Invalid(format!("unsupported norm order {p}"))),
    };
    if !(den > 0.0) {
        return Err(Error::Invalid("clean series has zero norm".into()));
    }
    Ok(num / den)
}

/// Mean over frames of `|M(est_t) - M(clean_t)| / M(clean_t)`.
pub fn relative_mass_error(clean: &DensityTimeSeries, est: &DensityTimeSeries) -> Result<f64> {
    if clean.shape() != est.shape() {
        return Err(Error::Shape(format!("shapes {:?} and {:?} differ", clean.shape(), est.shape())));
    }
    let (mc, me) = (mass_of(clean), mass_of(est));
    if mc.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::Invalid("clean series has a frame without mass".into()));
    }
    Ok(mc.iter().zip(&me).map(|(c, e)| (e - c).abs() / c).sum::<f64>() / mc.len() as f64)
}

/// Horizontal line through the center (row `floor(H / 2)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineProfile {
    pub row: usize,
    /// Physical x coordinate of every column.
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn line_profile(frame: ArrayView2<f64>, grid: &GridSpec) -> LineProfile {
    let (h, w) = frame.dim();
    let row = h / 2;
    LineProfile {
        row,
        x: (0..w).map(|j| (j as f64 + 0.5 - w as f64 / 2.0) * grid.dx).collect(),
        values: frame.row(row).to_vec(),
    }
}

/// Box-plot and whisker statistics of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("no values to summarize".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            n,
            mean,
            std,
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[n - 1],
        })
    }
}
