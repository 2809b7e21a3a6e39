//! Surrogate imploding-shell density phantoms.
//!
//! A spherical shell with a perturbed inner interface implodes kinematically,
//! then rebounds after a collapse time while the interface perturbation grows
//! and a reflected shock compresses the core. Each frame is the central slice
//! through the axisymmetric 3-D field (symmetry axis vertical), rescaled so
//! the revolved mass matches frame 0 exactly.

use ndarray::{Array2, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::mass_of_frame;

/// Mie-Grüneisen equation-of-state parameters, CGS units throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EosParams {
    /// Reference density, g/cc.
    pub rho0: f64,
    /// Reference temperature, eV.
    #[serde(rename = "T0")]
    pub t0: f64,
    /// Sound speed, cm/s.
    pub cs: f64,
    #[serde(rename = "Gamma0")]
    pub gamma0: f64,
    pub s1: f64,
    /// Specific heat, erg/(g eV).
    #[serde(rename = "cV")]
    pub cv: f64,
}

impl Default for EosParams {
    fn default() -> Self {
        Self::tantalum()
    }
}

impl EosParams {
    /// Tantalum, first column of the tabulated parameter matrix.
    pub fn tantalum() -> Self {
        Self {
            rho0: 16.65,
            t0: 0.0253,
            cs: 339_000.0,
            gamma0: 1.6,
            s1: 1.32,
            cv: 1.6e10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.cv > 0.0 && self.s1 > 0.0) {
            return Err(Error::Invalid("EOS needs rho0 > 0, cV > 0, s1 > 0".into()));
        }
        Ok(())
    }
}

/// Tabulated EOS variations (c_s, s1, Gamma0, c_V) and shell speeds.
pub mod table {
    pub const V_IMPL: [f64; 5] = [950.0, 943.35, 946.20, 959.50, 954.75];
    pub const GAMMA0: [f64; 5] = [1.6, 1.7, 1.76, 1.568, 1.472];
    pub const S1: [f64; 3] = [1.32, 1.464, 1.342];
    pub const CS: [f64; 4] = [339_000.0, 372_900.0, 305_100.0, 355_000.0];
    pub const CV: [f64; 3] = [1.6e10, 1.76e10, 1.44e10];
    pub const T0: f64 = 0.0253;
    pub const RHO0: f64 = 16.65;
}

/// Mie-Grüneisen pressure (erg/cc) at compression `chi = 1 - rho0/rho` and temperature `temp` (eV).
pub fn eos_pressure(params: &EosParams, chi: f64, temp: f64) -> Result<f64> {
    if chi >= 1.0 || params.s1 * chi >= 1.0 {
        return Err(Error::Domain(format!(
            "compression {chi} reaches the Hugoniot singularity 1/s1 = {}",
            1.0 / params.s1
        )));
    }
    let denom = (1.0 - params.s1 * chi).powi(2);
    let cold = params.rho0 * params.cs * params.cs * chi * (1.0 - 0.5 * params.gamma0 * chi) / denom;
    let thermal = params.gamma0 * params.rho0 * params.cv * (temp - params.t0);
    Ok(cold + thermal)
}

/// Point on the perturbed interface: `X = R cos t + d sin(k t)`, `Y = R sin t + d sin(k t)`.
pub fn perturbed_interface(radius: f64, delta: f64, kappa: u32, theta: f64) -> (f64, f64) {
    let bump = delta * (kappa as f64 * theta).sin();
    (radius * theta.cos() + bump, radius * theta.sin() + bump)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShellSpec {
    /// Inner radius, cm.
    pub r_in: f64,
    /// Outer radius, cm.
    pub r_out: f64,
    /// Implosion speed, m/s (positive, applied inward).
    pub v_impl: f64,
    /// Interface perturbation magnitude, cm.
    pub delta: f64,
    /// Interface perturbation wavenumber.
    pub kappa: u32,
    /// Shell density, g/cc.
    pub rho_nominal: f64,
}

impl Default for ShellSpec {
    fn default() -> Self {
        Self {
            r_in: 8.0,
            r_out: 10.0,
            v_impl: 943.0,
            delta: 0.2,
            kappa: 4,
            rho_nominal: 16.65,
        }
    }
}

impl ShellSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_in > 0.0 && self.r_in < self.r_out) {
            return Err(Error::Invalid(format!("need 0 < r_in < r_out, got {} / {}", self.r_in, self.r_out)));
        }
        if !(self.delta >= 0.0 && self.rho_nominal > 0.0 && self.v_impl >= 0.0) {
            return Err(Error::Invalid("need delta >= 0, v_impl >= 0, rho_nominal > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Pixels per side.
    pub n_cells: usize,
    /// Cell size, cm.
    pub dx: f64,
}

impl Default for GridSpec {
    /// 64 x 64 cells spanning a half-width of 11 cm.
    fn default() -> Self {
        Self::spanning(64, 11.0)
    }
}

impl GridSpec {
    pub fn spanning(n_cells: usize, r_domain: f64) -> Self {
        Self {
            n_cells,
            dx: 2.0 * r_domain / n_cells as f64,
        }
    }

    /// Half-width of the domain, cm.
    pub fn r_domain(&self) -> f64 {
        self.n_cells as f64 * self.dx / 2.0
    }

    /// Signed horizontal offset of column `j`'s center from the symmetry axis.
    #[inline]
    pub fn x_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5 - self.n_cells as f64 / 2.0) * self.dx
    }

    /// Signed vertical offset of row `i`'s center from the domain center (up positive).
    #[inline]
    pub fn y_center(&self, i: usize) -> f64 {
        (self.n_cells as f64 / 2.0 - i as f64 - 0.5) * self.dx
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells == 0 || self.n_cells % 16 != 0 {
            return Err(Error::Invalid(format!("n_cells must be a positive multiple of 16, got {}", self.n_cells)));
        }
        if self.dx <= 0.0 {
            return Err(Error::Invalid("dx must be positive".into()));
        }
        Ok(())
    }
}

pub const DEFAULT_FRAME_TIMES: [f64; 8] = [37.0, 37.6, 38.1, 38.7, 39.3, 39.9, 40.4, 41.0];
pub const DEFAULT_NORM_FACTOR: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesSpec {
    /// Frame timestamps, ms.
    pub frame_times: Vec<f64>,
    /// Density normalization constant, g/cc.
    pub norm_factor: f64,
}

impl Default for SeriesSpec {
    fn default() -> Self {
        Self {
            frame_times: DEFAULT_FRAME_TIMES.to_vec(),
            norm_factor: DEFAULT_NORM_FACTOR,
        }
    }
}

impl SeriesSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frame_times.len() < 2 {
            return Err(Error::Invalid("a series needs at least two frames".into()));
        }
        if self.frame_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("frame_times must be strictly increasing".into()));
        }
        if !(self.norm_factor > 0.0) {
            return Err(Error::Invalid("norm_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Constants of the surrogate implosion/rebound law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsSpec {
    /// Time at which the shell sits at its initial radii, ms.
    pub t_start: f64,
    /// Time the implosion stops and the rebound begins, ms.
    pub t_collapse: f64,
    /// Radial displacement (cm) per (m/s of v_impl) per ms.
    pub velocity_scale: f64,
    /// Rebound speed of the inner interface as a fraction of the implosion speed.
    pub rebound_fraction: f64,
    /// Perturbation growth rate `g` after collapse, 1/ms.
    pub growth_rate: f64,
    /// Speed of the reflected core shock as a multiple of the implosion speed.
    pub shock_fraction: f64,
    /// Density multiplier inside the shocked core.
    pub core_compression: f64,
    /// Density of the gas filling the shell, g/cc.
    pub fill_density: f64,
    /// Relative half-range of the per-series random jitter of fill and core densities.
    pub jitter: f64,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        Self {
            t_start: 37.0,
            t_collapse: 39.3,
            velocity_scale: 0.0022,
            rebound_fraction: 0.5,
            growth_rate: 1.5,
            shock_fraction: 1.0,
            core_compression: 3.0,
            fill_density: 0.5,
            jitter: 0.2,
        }
    }
}

/// Everything needed to regenerate a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub shell: ShellSpec,
    pub grid: GridSpec,
    pub series: SeriesSpec,
    pub dynamics: DynamicsSpec,
    pub eos: EosParams,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            shell: ShellSpec::default(),
            grid: GridSpec::default(),
            series: SeriesSpec::default(),
            dynamics: DynamicsSpec::default(),
            eos: EosParams::tantalum(),
        }
    }
}

/// Provenance attached to a generated series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTag {
    pub config: PhantomConfig,
    pub seed: u64,
}

/// `T x H x W` stack of normalized central slices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTimeSeries {
    pub frames: Array3<f64>,
    pub grid: GridSpec,
    pub norm_factor: f64,
    pub spec_tag: Option<SeriesTag>,
}

impl DensityTimeSeries {
    pub fn new(frames: Array3<f64>, grid: GridSpec, norm_factor: f64) -> Self {
        Self {
            frames,
            grid,
            norm_factor,
            spec_tag: None,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.frames.shape();
        [s[0], s[1], s[2]]
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len_of(Axis(0))
    }

    /// Same grid and metadata, different values.
    pub fn with_frames(&self, frames: Array3<f64>) -> Self {
        Self {
            frames,
            grid: self.grid,
            norm_factor: self.norm_factor,
            spec_tag: self.spec_tag.clone(),
        }
    }

    /// Values as one contiguous row-major slice.
    pub fn as_flat(&self) -> Vec<f64> {
        self.frames.iter().copied().collect()
    }
}

/// Instantaneous geometry of the shell.
#[derive(Clone, Copy, Debug)]
struct ShellState {
    r_in: f64,
    r_out: f64,
    delta: f64,
    core_radius: f64,
}

fn shell_state(shell: &ShellSpec, dynamics: &DynamicsSpec, t: f64) -> ShellState {
    let u = shell.v_impl * dynamics.velocity_scale;
    let shell_volume = shell.r_out.powi(3) - shell.r_in.powi(3);
    let tc = dynamics.t_collapse;
    let r_collapse = shell.r_in - u * (tc - dynamics.t_start);
    let (r_in, delta, core_radius) = if t <= tc {
        (shell.r_in - u * (t - dynamics.t_start), shell.delta, 0.0)
    } else {
        let dt = t - tc;
        (
            r_collapse + dynamics.rebound_fraction * u * dt,
            shell.delta * (1.0 + dynamics.growth_rate * dt),
            dynamics.shock_fraction * u * dt,
        )
    };
    ShellState {
        r_in,
        r_out: (r_in.max(0.0).powi(3) + shell_volume).cbrt(),
        delta,
        core_radius,
    }
}

/// Inner interface radius at polar angle `phi`, measured from the horizontal
/// axis on the right half of the slice.
fn inner_boundary(state: &ShellState, kappa: u32, phi: f64) -> f64 {
    let (x, y) = perturbed_interface(state.r_in, state.delta, kappa, phi);
    x.hypot(y)
}

fn rasterize(grid: &GridSpec, shell: &ShellSpec, state: &ShellState, fill: f64, core: f64) -> Array2<f64> {
    let n = grid.n_cells;
    Array2::from_shape_fn((n, n), |(i, j)| {
        // Sampling through |x| mirrors the slice about the symmetry axis exactly.
        let x = grid.x_center(j).abs();
        let y = grid.y_center(i);
        let r = x.hypot(y);
        if r >= state.r_out {
            0.0
        } else if r < state.core_radius {
            core
        } else if r < inner_boundary(state, shell.kappa, y.atan2(x)) {
            fill
        } else {
            shell.rho_nominal
        }
    })
}

/// Generates a normalized, mass-conserving series.
pub fn generate_series(config: &PhantomConfig, seed: u64) -> Result<DensityTimeSeries> {
    let PhantomConfig {
        shell,
        grid,
        series,
        dynamics,
        eos,
    } = config;
    shell.validate()?;
    grid.validate()?;
    series.validate()?;
    eos.validate()?;
    if shell.r_out >= grid.r_domain() {
        return Err(Error::Geometry(format!(
            "outer radius {} does not fit the {} cm half-width",
            shell.r_out,
            grid.r_domain()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = || 1.0 + dynamics.jitter * rng.random_range(-1.0..=1.0);
    let fill = dynamics.fill_density * jitter();
    let core = fill * dynamics.core_compression * jitter();

    let n = grid.n_cells;
    let t_count = series.frame_times.len();
    let mut raw = Array3::<f64>::zeros((t_count, n, n));
    for (k, &t) in series.frame_times.iter().enumerate() {
        let state = shell_state(shell, dynamics, t);
        let reach = state.delta * std::f64::consts::SQRT_2;
        if state.r_in - reach <= 0.0 || state.core_radius >= state.r_in - reach {
            return Err(Error::Geometry(format!(
                "inner interface collapses through the axis at t = {t} ms (r_in = {:.4} cm)",
                state.r_in
            )));
        }
        if state.r_out >= grid.r_domain() {
            return Err(Error::Geometry(format!("shell leaves the grid at t = {t} ms")));
        }
        raw.index_axis_mut(Axis(0), k).assign(&rasterize(grid, shell, &state, fill, core));
    }

    let m0 = mass_of_frame(raw.index_axis(Axis(0), 0), grid);
    if !(m0 > 0.0) {
        return Err(Error::Geometry("initial frame has no mass".into()));
    }
    for mut frame in raw.axis_iter_mut(Axis(0)).skip(1) {
        let m = mass_of_frame(frame.view(), grid);
        frame *= m0 / m;
    }
    if raw.iter().any(|&v| v > series.norm_factor) {
        return Err(Error::Invalid(format!(
            "rescaled density exceeds the normalization factor {}; clipping would break mass conservation",
            series.norm_factor
        )));
    }
    let mut out = normalize_series(raw, series.norm_factor, *grid);
    out.spec_tag = Some(SeriesTag {
        config: config.clone(),
        seed,
    });
    Ok(out)
}

/// Per-series variation used when building datasets: shell speed and EOS
/// drawn from the tabulated values, perturbation and inner radius uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub base: PhantomConfig,
    pub r_in_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub kappa_range: (u32, u32),
    /// Shell thickness, cm.
    pub thickness: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            base: PhantomConfig::default(),
            r_in_range: (8.0, 8.5),
            delta_range: (0.05, 0.2),
            kappa_range: (2, 6),
            thickness: 2.0,
        }
    }
}

impl DatasetSpec {
    /// Config and generation seed of series `index`.
    pub fn sample(&self, seed: u64, index: usize) -> (PhantomConfig, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64 + 1);
        let pick = |rng: &mut ChaCha8Rng, xs: &[f64]| xs[rng.random_range(0..xs.len())];
        let mut cfg = self.base.clone();
        cfg.shell.r_in = rng.random_range(self.r_in_range.0..=self.r_in_range.1);
        cfg.shell.r_out = cfg.shell.r_in + self.thickness;
        cfg.shell.delta = rng.random_range(self.delta_range.0..=self.delta_range.1);
        cfg.shell.kappa = rng.random_range(self.kappa_range.0..=self.kappa_range.1);
        cfg.shell.v_impl = pick(&mut rng, &table::V_IMPL);
        cfg.eos.cs = pick(&mut rng, &table::CS);
        cfg.eos.s1 = pick(&mut rng, &table::S1);
        cfg.eos.gamma0 = pick(&mut rng, &table::GAMMA0);
        cfg.eos.cv = pick(&mut rng, &table::CV);
        (cfg, rng.random())
    }

    /// `count` series starting at index `first`.
    pub fn generate(&self, seed: u64, first: usize, count: usize) -> Result<Vec<DensityTimeSeries>> {
        (first..first + count)
            .map(|i| {
                let (cfg, s) = self.sample(seed, i);
                generate_series(&cfg, s)
            })
            .collect()
    }
}

/// Maps each value `v` to `min(v, norm_factor) / norm_factor`.
pub fn normalize_series(raw: Array3<f64>, norm_factor: f64, grid: GridSpec) -> DensityTimeSeries {
    let frames = raw.mapv_into(|v| v.min(norm_factor) / norm_factor);
    DensityTimeSeries::new(frames, grid, norm_factor)
}

/// Back to g/cc.
pub fn denormalize(series: &DensityTimeSeries) -> Array3<f64> {
    series.frames.mapv(|v| v * series.norm_factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::mass_of;
    use std::f64::consts::PI;

    #[test]
    fn eos_reference_state_is_zero() {
        let p = EosParams::tantalum();
        assert_eq!(eos_pressure(&p, 0.0, p.t0).unwrap(), 0.0);
    }

    #[test]
    fn eos_thermal_term_from_tabulated_values() {
        let p = EosParams::tantalum();
        let v = eos_pressure(&p, 0.0, p.t0 + 1.0).unwrap();
        assert!((v - 4.2624e11).abs() / 4.2624e11 < 1e-12, "{v}");
    }

    #[test]
    fn eos_hugoniot_singularity_is_a_domain_error() {
        let p = EosParams::tantalum();
        assert!(matches!(eos_pressure(&p, 1.0 / 1.32, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eos_pressure(&p, 0.9, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn eos_increases_with_temperature() {
        let p = EosParams::tantalum();
        let a = eos_pressure(&p, 0.1, 0.5).unwrap();
        let b = eos_pressure(&p, 0.1, 0.6).unwrap();
        assert!(b > a);
    }

    #[test]
    fn interface_examples() {
        let (x, y) = perturbed_interface(8.0, 0.0, 5, PI / 3.0);
        assert!((x - 4.0).abs() < 1e-12 && (y - 8.0 * (PI / 3.0).sin()).abs() < 1e-12);
        let (x, y) = perturbed_interface(8.0, 0.2, 2, 0.0);
        assert_eq!((x, y), (8.0, 0.0));
        let (x, y) = perturbed_interface(8.0, 0.2, 2, PI / 2.0);
        assert!(x.abs() < 1e-12 && (y - 8.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_examples() {
        let grid = GridSpec::default();
        let raw = Array3::from_shape_vec((1, 1, 2), vec![16.65, 100.0]).unwrap();
        let s = normalize_series(raw, 50.0, grid);
        assert!((s.frames[[0, 0, 0]] - 0.333).abs() < 1e-15);
        assert_eq!(s.frames[[0, 0, 1]], 1.0);
        let raw = Array3::from_shape_vec((1, 1, 3), vec![0.0, 16.65, 50.0]).unwrap();
        let back = denormalize(&normalize_series(raw.clone(), 50.0, grid));
        for (a, b) in back.iter().zip(raw.iter()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
        }
    }

    #[test]
    fn static_shell_frames_are_identical() {
        let mut cfg = PhantomConfig::default();
        cfg.shell.v_impl = 0.0;
        cfg.shell.delta = 0.0;
        let s = generate_series(&cfg, 11).unwrap();
        let f0 = s.frames.index_axis(Axis(0), 0);
        for f in s.frames.axis_iter(Axis(0)) {
            assert_eq!(f, f0);
        }
    }

    #[test]
    fn generated_series_conserve_mass_and_stay_in_range() {
        for seed in 0..4 {
            let s = generate_series(&PhantomConfig::default(), seed).unwrap();
            let m = mass_of(&s);
            for mt in &m {
                assert!(((mt - m[0]) / m[0]).abs() <= 1e-6);
            }
            assert!(s.frames.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_series(&PhantomConfig::default(), 5).unwrap();
        let b = generate_series(&PhantomConfig::default(), 5).unwrap();
        assert_eq!(a.frames, b.frames);
    }

    #[test]
    fn frames_are_mirror_symmetric() {
        let s = generate_series(&PhantomConfig::default(), 3).unwrap();
        let n = s.grid.n_cells;
        for f in s.frames.axis_iter(Axis(0)) {
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(f[[i, j]], f[[i, n - 1 - j]]);
                }
            }
        }
    }

    #[test]
    fn runaway_collapse_is_a_geometry_error() {
        let mut cfg = PhantomConfig::default();
        cfg.shell.v_impl = 5000.0;
        assert!(matches!(generate_series(&cfg, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn shell_outside_grid_is_rejected() {
        let mut cfg = PhantomConfig::default();
        cfg.grid = GridSpec::spanning(64, 9.0);
        assert!(matches!(generate_series(&cfg, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn dataset_series_vary_and_stay_valid() {
        let spec = DatasetSpec::default();
        let a = spec.generate(3, 0, 6).unwrap();
        assert_ne!(a[0].frames, a[1].frames);
        let b = spec.generate(3, 4, 2).unwrap();
        assert_eq!(a[4], b[0]);
        for s in &a {
            let m = mass_of(s);
            assert!(m.iter().all(|v| ((v - m[0]) / m[0]).abs() <= 1e-6));
        }
    }
}
