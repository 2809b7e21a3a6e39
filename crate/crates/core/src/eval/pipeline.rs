//! Experiment orchestration: simulate, corrupt, reconstruct, denoise,
//! refine and score every test series, then aggregate per method.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::metrics::{normalized_lp_error, relative_mass_error, SummaryStats};
use super::store::load_checkpoint;
use crate::error::{Error, Result};
use crate::forward::{corrupt, direct_radiographs, reconstruct_series, BeamConfig, ScatterConfig, DEFAULT_CLAMP_EPS};
use crate::phantom::{DatasetSpec, DensityTimeSeries};
use crate::refine::{classical_denoise, refine, RefineConfig};
use crate::training::{mass_of, Checkpoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "noisy")]
    Noisy,
    #[serde(rename = "classical")]
    Classical,
    #[serde(rename = "supervised")]
    Supervised,
    #[serde(rename = "supervised+pp")]
    SupervisedPp,
    #[serde(rename = "wgan-sup")]
    WganSup,
    #[serde(rename = "wgan-sup+pp")]
    WganSupPp,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Noisy,
        Method::Classical,
        Method::Supervised,
        Method::SupervisedPp,
        Method::WganSup,
        Method::WganSupPp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Noisy => "noisy",
            Method::Classical => "classical",
            Method::Supervised => "supervised",
            Method::SupervisedPp => "supervised+pp",
            Method::WganSup => "wgan-sup",
            Method::WganSupPp => "wgan-sup+pp",
        }
    }

    /// Name usable inside file names.
    pub fn file_stem(self) -> String {
        self.name().replace('+', "_")
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown method `{s}`")))
    }

    fn network(self) -> Option<Network> {
        match self {
            Method::Supervised | Method::SupervisedPp => Some(Network::Supervised),
            Method::WganSup | Method::WganSupPp => Some(Network::WganSup),
            _ => None,
        }
    }

    fn refined(self) -> bool {
        matches!(self, Method::SupervisedPp | Method::WganSupPp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Network {
    Supervised,
    WganSup,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointPaths {
    pub supervised: Option<PathBuf>,
    pub wgan_sup: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentManifest {
    pub dataset: DatasetSpec,
    pub dataset_seed: u64,
    /// Index of the first test series in the dataset stream.
    pub test_first: usize,
    pub test_count: usize,
    pub beam: BeamConfig,
    pub scatter: ScatterConfig,
    /// Series `i` is corrupted with seed `corrupt_seed + i`.
    pub corrupt_seed: u64,
    pub clamp_eps: f64,
    pub methods: Vec<Method>,
    pub checkpoints: CheckpointPaths,
    /// Post-processing settings; target masses come from the clean series.
    pub refine: RefineConfig,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            dataset_seed: 0,
            test_first: 48,
            test_count: 16,
            beam: BeamConfig::default(),
            scatter: ScatterConfig::default(),
            corrupt_seed: 1000,
            clamp_eps: DEFAULT_CLAMP_EPS,
            methods: vec![Method::Noisy],
            checkpoints: CheckpointPaths::default(),
            refine: RefineConfig::default(),
        }
    }
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Checks settings and that every referenced checkpoint exists.
    pub fn validate(&self) -> Result<()> {
        if self.test_count == 0 || self.methods.is_empty() {
            return Err(Error::Invalid("manifest needs at least one test series and one method".into()));
        }
        if !(self.clamp_eps > 0.0) {
            return Err(Error::Invalid("clamp_eps must be positive".into()));
        }
        self.beam.validate()?;
        self.scatter.validate()?;
        self.refine.validate()?;
        for m in &self.methods {
            let path = match m.network() {
                Some(Network::Supervised) => &self.checkpoints.supervised,
                Some(Network::WganSup) => &self.checkpoints.wgan_sup,
                None => continue,
            };
            match path {
                None => return Err(Error::Invalid(format!("method `{}` needs a checkpoint path", m.name()))),
                Some(p) if !p.is_file() => {
                    return Err(Error::Invalid(format!("checkpoint {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Trained networks available to a run.
#[derive(Clone, Debug, Default)]
pub struct Models {
    pub supervised: Option<Checkpoint>,
    pub wgan_sup: Option<Checkpoint>,
}

impl Models {
    pub fn load(paths: &CheckpointPaths) -> Result<Self> {
        let load = |p: &Option<PathBuf>| p.as_deref().map(load_checkpoint).transpose();
        Ok(Self {
            supervised: load(&paths.supervised)?,
            wgan_sup: load(&paths.wgan_sup)?,
        })
    }

    fn get(&self, n: Network) -> Result<&Checkpoint> {
        match n {
            Network::Supervised => self.supervised.as_ref(),
            Network::WganSup => self.wgan_sup.as_ref(),
        }
        .ok_or_else(|| Error::Invalid(format!("no {n:?} checkpoint loaded")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: Method,
    pub series_id: usize,
    pub nl2: f64,
    pub nl1: f64,
    pub rel_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub nl2: SummaryStats,
    pub nl1: SummaryStats,
    pub rel_mass: SummaryStats,
}

/// Clean, measured and estimated series of one test case, kept for plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct Showcase {
    pub series_id: usize,
    pub clean: DensityTimeSeries,
    pub measured: Array3<f64>,
    pub clamp_eps: f64,
    pub estimates: Vec<(Method, DensityTimeSeries)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    /// Ordered by method (manifest order), then series id.
    pub rows: Vec<MetricRow>,
    pub summaries: Vec<MethodSummary>,
    pub showcase: Option<Showcase>,
}

/// Clean test series and the noisy reconstruction of each.
pub fn test_cases(m: &ExperimentManifest) -> Result<Vec<(usize, DensityTimeSeries, DensityTimeSeries, Array3<f64>)>> {
    let clean = m
        .dataset
        .generate(m.dataset_seed, m.test_first, m.test_count)
        .map_err(|e| Error::stage("simulate", e))?;
    clean
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let id = m.test_first + k;
            let direct = direct_radiographs(&c, &m.beam);
            let rad = corrupt(&direct, &m.beam, &m.scatter, m.corrupt_seed.wrapping_add(id as u64))
                .map_err(|e| Error::stage("corrupt", e))?;
            let noisy =
                reconstruct_series(&rad, c.grid, c.norm_factor, m.clamp_eps).map_err(|e| Error::stage("reconstruct", e))?;
            Ok((id, c, noisy, rad.measured))
        })
        .collect()
}

/// Runs the manifest with already-loaded networks.
pub fn run_pipeline_with(m: &ExperimentManifest, models: &Models) -> Result<Report> {
    let mut methods: Vec<Method> = Vec::new();
    for &x in &m.methods {
        if !methods.contains(&x) {
            methods.push(x);
        }
    }
    let mut per_method: Vec<Vec<MetricRow>> = vec![Vec::new(); methods.len()];
    let mut showcase = None;
    for (id, clean, noisy, measured) in test_cases(m)? {
        let masses = mass_of(&clean);
        let mut denoised: Vec<(Network, DensityTimeSeries)> = Vec::new();
        let mut estimates = Vec::new();
        for (k, &method) in methods.iter().enumerate() {
            let est = match (method, method.network()) {
                (Method::Noisy, _) => noisy.clone(),
                (Method::Classical, _) => {
                    classical_denoise(&noisy, &masses).map_err(|e| Error::stage("refine", e))?.series
                }
                (_, Some(net)) => {
                    let base = match denoised.iter().find(|(n, _)| *n == net) {
                        Some((_, s)) => s.clone(),
                        None => {
                            let s = models.get(net)?.denoise(&noisy).map_err(|e| Error::stage("denoise", e))?;
                            denoised.push((net, s.clone()));
                            s
                        }
                    };
                    if method.refined() {
                        let cfg = RefineConfig {
                            true_masses: masses.clone(),
                            ..m.refine.clone()
                        };
                        refine(&base, &cfg, None).map_err(|e| Error::stage("refine", e))?.series
                    } else {
                        base
                    }
                }
                _ => unreachable!("every method is covered"),
            };
            let row = (|| -> Result<MetricRow> {
                Ok(MetricRow {
                    method,
                    series_id: id,
                    nl2: normalized_lp_error(&clean, &est, 2)?,
                    nl1: normalized_lp_error(&clean, &est, 1)?,
                    rel_mass: relative_mass_error(&clean, &est)?,
                })
            })()
            .map_err(|e| Error::stage("evaluate", e))?;
            per_method[k].push(row);
            estimates.push((method, est));
        }
        if showcase.is_none() {
            showcase = Some(Showcase {
                series_id: id,
                clean,
                measured,
                clamp_eps: m.clamp_eps,
                estimates,
            });
        }
    }
    let mut summaries = Vec::new();
    for (k, rows) in per_method.iter_mut().enumerate() {
        rows.sort_by_key(|r| r.series_id);
        let col = |f: fn(&MetricRow) -> f64| SummaryStats::of(&rows.iter().map(f).collect::<Vec<_>>());
        summaries.push(MethodSummary {
            method: methods[k],
            nl2: col(|r| r.nl2)?,
            nl1: col(|r| r.nl1)?,
            rel_mass: col(|r| r.rel_mass)?,
        });
    }
    Ok(Report {
        rows: per_method.into_iter().flatten().collect(),
        summaries,
        showcase,
    })
}

/// Validates the manifest, loads its checkpoints and runs it.
pub fn run_pipeline(m: &ExperimentManifest) -> Result<Report> {
    m.validate()?;
    let models = Models::load(&m.checkpoints).map_err(|e| Error::stage("load", e))?;
    run_pipeline_with(m, &models)
}

/// Nine significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

fn stats_cells(s: &SummaryStats) -> String {
    [s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max].map(fmt_num).join(",")
}

pub const STATS_HEADER: &str = "mean,std,min,q1,median,q3,max";

/// `series_id,nl2,nl1,rel_mass` for one method.
pub fn method_csv(report: &Report, method: Method) -> String {
    let mut out = String::from("series_id,nl2,nl1,rel_mass\n");
    for r in report.rows.iter().filter(|r| r.method == method) {
        let _ = writeln!(out, "{},{},{},{}", r.series_id, fmt_num(r.nl2), fmt_num(r.nl1), fmt_num(r.rel_mass));
    }
    out
}

/// One row per (method, metric) with the box-plot statistics.
pub fn summary_csv(report: &Report) -> String {
    let mut out = format!("method,metric,n,{STATS_HEADER}\n");
    for s in &report.summaries {
        for (name, st) in [("nl2", &s.nl2), ("nl1", &s.nl1), ("rel_mass", &s.rel_mass)] {
            let _ = writeln!(out, "{},{},{},{}", s.method.name(), name, st.n, stats_cells(st));
        }
    }
    out
}

/// Writes `metrics_<method>.csv` for every method and `summary.csv`.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for s in &report.summaries {
        let p = dir.join(format!("metrics_{}.csv", s.method.file_stem()));
        std::fs::write(&p, method_csv(report, s.method))?;
        written.push(p);
    }
    let p = dir.join("summary.csv");
    std::fs::write(&p, summary_csv(report))?;
    written.push(p);
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub beta0_values: Vec<f64>,
    pub noise_vars: Vec<f64>,
    pub methods: Vec<Method>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beta0_values.is_empty() || self.noise_vars.is_empty() || self.methods.is_empty() {
            return Err(Error::Invalid("sweep lists must be nonempty".into()));
        }
        Ok(())
    }

    /// Manifest of one grid cell.
    pub fn cell_manifest(&self, base: &ExperimentManifest, beta0: f64, noise_var: f64) -> ExperimentManifest {
        let mut m = base.clone();
        m.scatter.beta0 = beta0;
        m.scatter.noise_var = noise_var;
        m.methods = self.methods.clone();
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta0: f64,
    pub noise_var: f64,
    pub summaries: Vec<MethodSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn cell(&self, beta0: f64, noise_var: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.beta0 == beta0 && c.noise_var == noise_var)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("beta0,noise_var,method,n,nl2_mean,nl2_std,nl1_mean,nl1_std,rel_mass_mean,rel_mass_std\n");
        for c in &self.cells {
            for s in &c.summaries {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_num(c.beta0),
                    fmt_num(c.noise_var),
                    s.method.name(),
                    s.nl2.n,
                    [s.nl2.mean, s.nl2.std, s.nl1.mean, s.nl1.std, s.rel_mass.mean, s.rel_mass.std].map(fmt_num).join(",")
                );
            }
        }
        out
    }
}

/// Runs every (noise, beta0) cell with the same networks.
pub fn sweep_with(spec: &SweepSpec, base: &ExperimentManifest, models: &Models) -> Result<SweepReport> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &noise_var in &spec.noise_vars {
        for &beta0 in &spec.beta0_values {
            let m = spec.cell_manifest(base, beta0, noise_var);
            let report = run_pipeline_with(&m, models)?;
            cells.push(SweepCell {
                beta0,
                noise_var,
                summaries: report.summaries,
            });
        }
    }
    Ok(SweepReport { cells })
}

pub fn sweep(spec: &SweepSpec, base: &ExperimentManifest) -> Result<SweepReport> {
    spec.validate()?;
    for &n in &spec.noise_vars {
        for &b in &spec.beta0_values {
            spec.cell_manifest(base, b, n).validate()?;
        }
    }
    let models = Models::load(&base.checkpoints).map_err(|e| Error::stage("load", e))?;
    sweep_with(spec, base, &models)
}
