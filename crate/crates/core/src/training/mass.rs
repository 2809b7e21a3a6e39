use ndarray::{ArrayView2, Axis};

use crate::phantom::{DensityTimeSeries, GridSpec};

/// Revolved mass of one central slice. Each half-plane revolved about the
/// axis sweeps the whole volume, so the two halves are averaged:
/// `sum rho[i, j] * pi |x_j| * dx^2` over the full row, where `x_j` is the
/// signed distance of column `j` from the symmetry axis.
pub fn mass_of_frame(frame: ArrayView2<f64>, grid: &GridSpec) -> f64 {
    let w = mass_weights(frame.ncols(), grid);
    // Same summation order as `masses_flat`, so both agree bit for bit.
    let mut total = 0.0;
    for row in frame.rows() {
        for (v, wt) in row.iter().zip(&w) {
            total += v * wt;
        }
    }
    total
}

/// Per-column weight `pi |x_j| dx^2` of a row of width `width`.
pub fn mass_weights(width: usize, grid: &GridSpec) -> Vec<f64> {
    let dx = grid.dx;
    (0..width)
        .map(|j| {
            let x = (j as f64 + 0.5 - width as f64 / 2.0) * dx;
            std::f64::consts::PI * x.abs() * dx * dx
        })
        .collect()
}

/// Mass of every frame.
pub fn mass_of(series: &DensityTimeSeries) -> Vec<f64> {
    series
        .frames
        .axis_iter(Axis(0))
        .map(|f| mass_of_frame(f, &series.grid))
        .collect()
}

/// Masses of a flat `T x H x W` buffer.
pub fn masses_flat(data: &[f64], shape: [usize; 3], grid: &GridSpec) -> Vec<f64> {
    let w = mass_weights(shape[2], grid);
    data.chunks(shape[1] * shape[2])
        .map(|frame| {
            let mut total = 0.0;
            for row in frame.chunks(shape[2]) {
                for (v, wt) in row.iter().zip(&w) {
                    total += v * wt;
                }
            }
            total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use std::f64::consts::PI;

    #[test]
    fn zero_frame_has_zero_mass() {
        let g = GridSpec::spanning(16, 1.0);
        assert_eq!(mass_of_frame(Array2::zeros((16, 16)).view(), &g), 0.0);
    }

    #[test]
    fn mass_is_homogeneous() {
        let g = GridSpec::spanning(16, 2.0);
        let f = Array2::from_shape_fn((16, 16), |(i, j)| ((i * 3 + j) % 7) as f64 / 7.0);
        let a = mass_of_frame(f.view(), &g);
        let b = mass_of_frame((&f * 2.5).view(), &g);
        assert!((b - 2.5 * a).abs() <= 1e-12 * b.abs());
    }

    #[test]
    fn rasterized_sphere_matches_analytic_volume() {
        let g = GridSpec::spanning(128, 11.0);
        let (r, rho0) = (8.0, 0.3);
        let f = Array2::from_shape_fn((128, 128), |(i, j)| {
            let (x, y) = (g.x_center(j), g.y_center(i));
            if x * x + y * y <= r * r { rho0 } else { 0.0 }
        });
        let m = mass_of_frame(f.view(), &g);
        let exact = 4.0 / 3.0 * PI * r.powi(3) * rho0;
        assert!(((m - exact) / exact).abs() <= 0.02, "{m} vs {exact}");
    }
}
