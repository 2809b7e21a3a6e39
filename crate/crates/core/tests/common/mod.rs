#![allow(dead_code)]

pub mod grad;

use dyntomo::nn::ParamStore;
use ndarray::Array2;
use dyntomo::phantom::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-3;

/// Shape of the reduced finite-difference instances.
pub const TINY: [usize; 3] = [4, 16, 16];

pub fn tiny_grid() -> GridSpec {
    GridSpec::spanning(16, 11.0)
}

pub fn random_batch(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..len).map(|_| rng.random_range(0.05..0.95)).collect()).collect()
}

/// Result of comparing an analytic gradient with central differences.
#[derive(Debug)]
pub struct FdReport {
    pub checked: usize,
    /// Probes whose step straddled an activation kink.
    pub kinks: usize,
    pub worst_rel: f64,
    pub worst_index: usize,
}

fn set(store: &mut ParamStore, mut idx: usize, v: f32) -> f32 {
    for t in &mut store.tensors {
        if idx < t.data.len() {
            let old = t.data[idx];
            t.data[idx] = v;
            return old;
        }
        idx -= t.data.len();
    }
    panic!("index out of range");
}

/// Indices spread over every tensor of the store: the first entry of each
/// tensor plus `extra` random ones.
pub fn probe_indices(store: &ParamStore, extra: usize, seed: u64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut offset = 0;
    for t in &store.tensors {
        out.push(offset);
        offset += t.data.len();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.extend((0..extra).map(|_| rng.random_range(0..offset)));
    out.sort_unstable();
    out.dedup();
    out
}

fn central(s: &mut ParamStore, i: usize, base: f64, h: f64, f: &impl Fn(&ParamStore) -> f64) -> (f64, f64, f64) {
    let up = (base + h) as f32;
    let dn = (base - h) as f32;
    set(s, i, up);
    let fu = f(s);
    set(s, i, dn);
    let fdn = f(s);
    set(s, i, base as f32);
    ((fu - fdn) / (up as f64 - dn as f64), fu, fdn)
}

/// Central differences of `f` over the store parameters at `indices`.
/// Parameters are stored as `f32`, so the realized steps are measured after
/// rounding. Where the one-sided slopes disagree a leaky-ReLU kink lies inside
/// the step and the function is only piecewise smooth on it; those probes are
/// re-measured with a ten times smaller step.
pub fn fd_check(store: &ParamStore, analytic: &[f64], indices: &[usize], f: impl Fn(&ParamStore) -> f64) -> FdReport {
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let mut s = store.clone();
    let f0 = f(store);
    let flat = store.flatten();
    let (mut worst, mut kinks) = ((0.0, 0), 0);
    for &i in indices {
        let base = flat[i];
        let (fd, fu, fdn) = central(&mut s, i, base, FD_STEP, &f);
        let right = (fu - f0) / FD_STEP;
        let left = (f0 - fdn) / FD_STEP;
        let mut err = rel(fd, analytic[i]);
        if err > FD_REL_TOL && rel(left, right) > 2.0 * FD_REL_TOL {
            kinks += 1;
            err = rel(central(&mut s, i, base, FD_STEP / 10.0, &f).0, analytic[i]);
        }
        if err > worst.0 {
            worst = (err, i);
        }
    }
    FdReport {
        checked: indices.len(),
        kinks,
        worst_rel: worst.0,
        worst_index: worst.1,
    }
}

/// Disc of radius `radius` and density `rho0` centered on the slice, each
/// pixel taking the value at its center.
pub fn disc_slice(n: usize, dx: f64, radius: f64, rho0: f64) -> Array2<f64> {
    let g = GridSpec { n_cells: n, dx };
    Array2::from_shape_fn((n, n), |(i, j)| {
        if g.x_center(j).hypot(g.y_center(i)) < radius {
            rho0
        } else {
            0.0
        }
    })
}

/// Smooth axisymmetric blob centered on the axis at height `y0`.
pub fn blob_slice(n: usize, dx: f64, y0: f64, width: f64, amp: f64) -> Array2<f64> {
    let g = GridSpec { n_cells: n, dx };
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (x, y) = (g.x_center(j), g.y_center(i) - y0);
        amp * (-(x * x + y * y) / (2.0 * width * width)).exp()
    })
}

/// Line integral along z at lateral offset `x` through the body obtained by
/// revolving one slice row (even width) about the vertical axis, by the
/// midpoint rule with `samples` points over the full domain.
pub fn revolved_line_integral(row: &[f64], dx: f64, x: f64, samples: usize) -> f64 {
    let half = row.len() / 2;
    let extent = half as f64 * dx;
    let h = 2.0 * extent / samples as f64;
    (0..samples)
        .map(|s| {
            let z = -extent + (s as f64 + 0.5) * h;
            let k = (x.hypot(z) / dx).floor() as usize;
            if k < half {
                row[half + k]
            } else {
                0.0
            }
        })
        .sum::<f64>()
        * h
}

pub fn rel_l2(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.into_iter().zip(b) {
        num += (x - y) * (x - y);
        den += y * y;
    }
    (num / den).sqrt()
}
