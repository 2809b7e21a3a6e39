//! One line per acceptance criterion and a nonzero exit if any fails.
//! Criteria 7 and 8 train real networks and dominate the runtime.
//!
//! Runs without the libtest harness so the lines are always shown. Accepts
//! libtest-style name filters and `--skip`.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{blob_slice, disc_slice, random_batch, rel_l2, revolved_line_integral};
use dyntomo::eval::{
    normalized_lp_error, read_checkpoint, relative_mass_error, run_pipeline_with, summary_csv, sweep_with,
    test_cases, write_checkpoint, ExperimentManifest, Method, Models, SweepSpec, TensorContainer,
};
use dyntomo::forward::{abel_project, corrupt, direct_radiographs, inverse_abel, reconstruct_series, ScatterConfig};
use dyntomo::phantom::{generate_series, DatasetSpec, GridSpec, PhantomConfig};
use dyntomo::refine::{classical_denoise, refine, RefineConfig};
use dyntomo::training::{mass_of, mass_of_frame, train, Checkpoint, SeriesPair, TrainConfig};
use dyntomo::wasserstein::{dual_estimate, gradient_penalty, w1_exact_1d, EmpiricalDist1D, LinearCritic};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Ledger {
    results: Vec<(usize, bool)>,
}

impl Ledger {
    fn run(&mut self, n: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let got = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let over = budget.is_some_and(|b| took > b);
        let pass = got.pass && !over;
        let budget_note = match (budget, over) {
            (Some(b), true) => format!(", over the {:.0} s budget", b.as_secs_f64()),
            _ => String::new(),
        };
        println!(
            "criterion {n} ({name}): {} {} [{:.1} s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            got.detail,
            took.as_secs_f64()
        );
        self.results.push((n, pass));
    }
}

fn forward_fidelity() -> Outcome {
    let g = GridSpec::spanning(64, 11.0);
    let (radius, rho0) = (7.0, 16.65);
    let slice = disc_slice(64, g.dx, radius, rho0);
    let proj = abel_project(slice.view(), g.dx).values;
    let mut worst: f64 = 0.0;
    for i in 0..64 {
        let row: Vec<f64> = slice.row(i).to_vec();
        for j in 0..64 {
            let (x, y) = (g.x_center(j), g.y_center(i));
            if x.hypot(y) <= radius - 2.0 * g.dx {
                let oracle = revolved_line_integral(&row, g.dx, x.abs(), 1000);
                worst = worst.max((proj[[i, j]] - oracle).abs() / oracle);
            }
        }
    }
    let mut round_trip: f64 = 0.0;
    for (y0, width, amp) in [(0.5, 3.0, 1.0), (-2.0, 2.5, 20.0), (1.0, 4.0, 0.3)] {
        let blob = blob_slice(64, g.dx, y0, width, amp);
        let back = inverse_abel(&abel_project(blob.view(), g.dx)).unwrap();
        let inner = |a: &Array2<f64>| a.slice(ndarray::s![.., 2..62]).iter().copied().collect::<Vec<_>>();
        round_trip = round_trip.max(rel_l2(inner(&back), inner(&blob)));
    }
    outcome(
        worst <= 0.02 && round_trip <= 1e-2,
        format!("disc worst rel error {worst:.2e} (<= 2e-2), blob round trip {round_trip:.2e} (<= 1e-2)"),
    )
}

fn clean_identity() -> Outcome {
    let beam = Default::default();
    let clean = ScatterConfig { beta0: 0.0, noise_var: 0.0, ..ScatterConfig::default() };
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let (cfg, seed) = DatasetSpec::default().sample(0, i);
        let s = generate_series(&cfg, seed).unwrap();
        let rad = corrupt(&direct_radiographs(&s, &beam), &beam, &clean, 1).unwrap();
        let rec = reconstruct_series(&rad, s.grid, s.norm_factor, 1e-6).unwrap();
        worst = worst.max(normalized_lp_error(&s, &rec, 2).unwrap());
    }
    outcome(worst <= 2e-2, format!("worst nl2 {worst:.2e} over 3 series (<= 2e-2)"))
}

fn wasserstein_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let mut draw = || EmpiricalDist1D::new((0..n).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        let (a, b) = (draw(), draw());
        let knots: Vec<(f64, f64)> =
            (0..rng.random_range(1..6)).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(-1.0..=1.0))).collect();
        let offset = rng.random_range(-3.0..3.0);
        // Convex combination of 1-Lipschitz pieces, plus a constant.
        let f = |x: f64| offset + knots.iter().map(|&(k, s)| s * (x - k).abs()).sum::<f64>() / knots.len() as f64;
        let w1 = w1_exact_1d(&a, &b).unwrap();
        worst_gap = worst_gap.max(dual_estimate(f, &a, &b) - w1);
        worst_gap = worst_gap.max(dual_estimate(|x| x, &a, &b).abs() - w1);
    }
    let mut worst_pen: f64 = 0.0;
    for _ in 0..20 {
        let dim = rng.random_range(1..8);
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let eta = rng.random_range(0.1..20.0);
        let batch = |rng: &mut ChaCha8Rng| (0..3).map(|_| (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect()).collect::<Vec<Vec<f64>>>();
        let (real, fake) = (batch(&mut rng), batch(&mut rng));
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let pen = gradient_penalty(&LinearCritic { w, b: 0.5 }, &real, &fake, eta, 9).unwrap();
        worst_pen = worst_pen.max((pen.value - eta * (norm - 1.0).powi(2)).abs());
    }
    outcome(
        worst_gap <= 1e-9 && worst_pen <= 1e-9,
        format!("max(dual - W1) {worst_gap:.2e} (<= 1e-9), penalty closed-form error {worst_pen:.2e} (<= 1e-9)"),
    )
}

fn gradients() -> Outcome {
    let reports = common::grad::all();
    let failed: Vec<&str> = reports.iter().filter(|(_, r)| !r.passes()).map(|(n, _)| *n).collect();
    let worst = reports.iter().map(|(_, r)| r.worst_rel).fold(0.0, f64::max);
    let probes: usize = reports.iter().map(|(_, r)| r.checked).sum();
    let detail = format!("{} scenarios, {probes} probes, worst rel error {worst:.2e} (<= 1e-3)", reports.len());
    if failed.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; failing: {}", failed.join(", ")))
    }
}

fn mass_functional() -> Outcome {
    let g = GridSpec::spanning(128, 11.0);
    let (r, rho0) = (8.0, 0.3);
    let sphere = Array2::from_shape_fn((128, 128), |(i, j)| if g.x_center(j).hypot(g.y_center(i)) <= r { rho0 } else { 0.0 });
    let exact = 4.0 / 3.0 * PI * r.powi(3) * rho0;
    let sphere_err = ((mass_of_frame(sphere.view(), &g) - exact) / exact).abs();
    let mut drift: f64 = 0.0;
    for i in 0..6 {
        let (cfg, seed) = DatasetSpec::default().sample(0, i);
        let m = mass_of(&generate_series(&cfg, seed).unwrap());
        drift = m.iter().fold(drift, |d, mt| d.max(((mt - m[0]) / m[0]).abs()));
    }
    outcome(
        sphere_err <= 0.02 && drift <= 1e-6,
        format!("sphere rel error {sphere_err:.2e} (<= 2e-2), worst frame mass drift {drift:.2e} (<= 1e-6)"),
    )
}

fn small_dataset() -> DatasetSpec {
    serde_json::from_value(json!({ "base": { "grid": { "n_cells": 32, "dx": 0.6875 } } })).unwrap()
}

fn refinement_contracts() -> Outcome {
    let m = ExperimentManifest { dataset: small_dataset(), test_first: 0, test_count: 16, ..ExperimentManifest::default() };
    let mut improved = 0;
    let mut monotone = true;
    let cases = test_cases(&m).unwrap();
    for (_, clean, noisy, _) in &cases {
        let masses = mass_of(clean);
        let c = classical_denoise(noisy, &masses).unwrap();
        let r = refine(noisy, &RefineConfig { max_iters: 500, true_masses: masses, ..RefineConfig::default() }, None).unwrap();
        monotone &= c.objective.total <= c.initial.total && r.objective.total <= r.initial.total;
        if relative_mass_error(clean, &c.series).unwrap() < relative_mass_error(clean, noisy).unwrap() {
            improved += 1;
        }
    }
    outcome(
        monotone && improved == cases.len(),
        format!(
            "objective never increased: {monotone}; classical lowered mass error on {improved}/{} series",
            cases.len()
        ),
    )
}

/// Surrogate split shared by criteria 7 and 8: series 0..40 train, 40..48
/// validate, 48..64 test, all at the default 64x64x8 size with beta0 = 1.
fn split(first: usize, count: usize) -> Vec<SeriesPair> {
    let m = ExperimentManifest { test_first: first, test_count: count, ..ExperimentManifest::default() };
    test_cases(&m).unwrap().into_iter().map(|(_, clean, noisy, _)| SeriesPair { noisy, clean }).collect()
}

fn acceptance_train_config(supervised_only: bool) -> TrainConfig {
    TrainConfig { supervised_only, epochs: 10, lr_g: 1e-3, lr_d: 5e-4, lambda_mass: 1.0, seed: 0, ..TrainConfig::default() }
}

fn mean_nl2(pairs: &[SeriesPair]) -> f64 {
    pairs.iter().map(|p| normalized_lp_error(&p.clean, &p.noisy, 2).unwrap()).sum::<f64>() / pairs.len() as f64
}

fn end_to_end(models: &mut Models) -> Outcome {
    let (train_set, val_set) = (split(0, 40), split(40, 8));
    let val_noisy = mean_nl2(&val_set);
    let (sup, _) = train(&train_set, &val_set, &acceptance_train_config(true)).unwrap();
    models.supervised = Some(sup);
    let test = ExperimentManifest { methods: vec![Method::Noisy, Method::Supervised], ..ExperimentManifest::default() };
    let report = run_pipeline_with(&test, models).unwrap();
    let (noisy, denoised) = (report.summaries[0].nl2.mean, report.summaries[1].nl2.mean);
    let sup_ok = denoised <= 0.5 * noisy;
    let wgan = train(&train_set, &val_set, &acceptance_train_config(false));
    let wgan_detail = match &wgan {
        Ok((ck, _)) => format!("WGAN-Sup best val nl2 {:.4} vs noisy val {val_noisy:.4}", ck.val_score),
        Err(e) => format!("WGAN-Sup failed: {e}"),
    };
    let wgan_ok = wgan.as_ref().is_ok_and(|(ck, _)| ck.val_score <= val_noisy);
    models.wgan_sup = wgan.ok().map(|(ck, _)| ck);
    outcome(
        sup_ok && wgan_ok,
        format!("supervised test nl2 {denoised:.4} vs noisy {noisy:.4} (ratio {:.3} <= 0.5); {wgan_detail}", denoised / noisy),
    )
}

fn generalization(models: &Models) -> Outcome {
    if models.supervised.is_none() || models.wgan_sup.is_none() {
        return outcome(false, "needs both networks from criterion 7");
    }
    let base = ExperimentManifest { test_first: 48, test_count: 4, ..ExperimentManifest::default() };
    let betas = [1e-4, 1e-2, 1e-1, 1.0, 10f64.sqrt()];
    let pp = [Method::SupervisedPp, Method::WganSupPp];
    let spec = SweepSpec { beta0_values: betas.to_vec(), noise_vars: vec![0.0, 1e-4], methods: [&[Method::Noisy][..], &pp].concat() };
    let report = sweep_with(&spec, &base, models).unwrap();
    let mut problems = Vec::new();
    for &nv in &spec.noise_vars {
        let nl2: Vec<f64> = betas.iter().map(|&b| report.cell(b, nv).unwrap().summaries[0].nl2.mean).collect();
        if nl2.windows(2).any(|w| w[1] < w[0]) {
            problems.push(format!("noisy nl2 not monotone at noise {nv}: {nl2:?}"));
        }
    }
    let mut worst_ratio: f64 = 0.0;
    for cell in &report.cells {
        let noisy = cell.summaries[0].rel_mass.mean;
        for s in &cell.summaries[1..] {
            worst_ratio = worst_ratio.max(s.rel_mass.mean / noisy);
            if s.rel_mass.mean > noisy {
                problems.push(format!(
                    "{} mass error {:.3e} > noisy {noisy:.3e} at beta0 {}, noise {}",
                    s.method.name(),
                    s.rel_mass.mean,
                    cell.beta0,
                    cell.noise_var
                ));
            }
        }
    }
    let detail = format!("{} cells, worst refined/noisy mass error ratio {worst_ratio:.3}", report.cells.len());
    if problems.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; {}", problems.join("; ")))
    }
}

fn tiny_pairs() -> Vec<SeriesPair> {
    let m = ExperimentManifest { dataset: small_dataset(), test_first: 0, test_count: 3, ..ExperimentManifest::default() };
    test_cases(&m).unwrap().into_iter().map(|(_, clean, noisy, _)| SeriesPair { noisy, clean }).collect()
}

fn checkpoint_round_trip(ck: &Checkpoint) -> bool {
    let mut bytes = Vec::new();
    write_checkpoint(ck, &mut bytes).unwrap();
    let back = read_checkpoint(&mut bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_checkpoint(&back, &mut again).unwrap();
    back == *ck && again == bytes
}

fn determinism() -> Outcome {
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let cfg = PhantomConfig::default();
    checks.push(("simulate", generate_series(&cfg, 4).unwrap() == generate_series(&cfg, 4).unwrap()));
    let s = generate_series(&cfg, 4).unwrap();
    let beam = Default::default();
    let noisy_cfg = ScatterConfig { noise_var: 1e-4, ..ScatterConfig::default() };
    let direct = direct_radiographs(&s, &beam);
    let (ra, rb) = (corrupt(&direct, &beam, &noisy_cfg, 8).unwrap(), corrupt(&direct, &beam, &noisy_cfg, 8).unwrap());
    checks.push(("corrupt", ra == rb));
    let rec = |r| reconstruct_series(r, s.grid, s.norm_factor, 1e-6).unwrap();
    checks.push(("reconstruct", rec(&ra) == rec(&rb)));

    let pairs = tiny_pairs();
    let tcfg = TrainConfig {
        epochs: 2,
        lr_g: 1e-3,
        lr_d: 5e-4,
        lambda_mass: 1.0,
        generator_levels: 2,
        generator_base_channels: 2,
        discriminator_blocks: Some(5),
        seed: 6,
        ..TrainConfig::default()
    };
    let (ta, tb) = (train(&pairs[..2], &pairs[2..], &tcfg).unwrap(), train(&pairs[..2], &pairs[2..], &tcfg).unwrap());
    checks.push(("train", ta == tb));
    let rcfg = RefineConfig { max_iters: 200, true_masses: mass_of(&pairs[0].clean), ..RefineConfig::default() };
    checks.push(("refine", refine(&pairs[0].noisy, &rcfg, None).unwrap() == refine(&pairs[0].noisy, &rcfg, None).unwrap()));
    let m = ExperimentManifest {
        dataset: small_dataset(),
        test_count: 2,
        methods: vec![Method::Noisy, Method::Supervised, Method::SupervisedPp],
        refine: RefineConfig { max_iters: 50, ..RefineConfig::default() },
        ..ExperimentManifest::default()
    };
    let models = Models { supervised: Some(ta.0.clone()), wgan_sup: None };
    let csv = |m: &ExperimentManifest| summary_csv(&run_pipeline_with(m, &models).unwrap());
    checks.push(("evaluate", csv(&m) == csv(&m)));

    let mut containers = true;
    for (k, shape) in [vec![5, 7], vec![2, 3, 4], vec![2, 2, 3, 5]].into_iter().enumerate() {
        let n = shape.iter().product();
        let data = random_batch(1, n, k as u64).remove(0).iter().map(|v| (v * 1e4 - 3e3) as f32).collect();
        let c = TensorContainer::new(shape, data).unwrap();
        let bytes = c.to_bytes().unwrap();
        let back = TensorContainer::from_bytes(&bytes).unwrap();
        containers &= back == c && back.to_bytes().unwrap() == bytes;
    }
    checks.push(("tensor container", containers));
    checks.push(("checkpoint", checkpoint_round_trip(&ta.0)));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        outcome(true, format!("{} stages and round trips identical", checks.len()))
    } else {
        outcome(false, format!("differs: {}", failed.join(", ")))
    }
}

/// Mirrors libtest's filtering for a single test called `acceptance`.
fn selected() -> bool {
    let mut args = std::env::args().skip(1);
    let (mut filters, mut skips) = (Vec::new(), Vec::new());
    while let Some(a) = args.next() {
        match a.as_str() {
            "--skip" => skips.extend(args.next()),
            "--list" => {
                println!("acceptance: test");
                return false;
            }
            a if a.starts_with('-') => {}
            a => filters.push(a.to_string()),
        }
    }
    let name = "acceptance";
    (filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())))
        && !skips.iter().any(|s| name.contains(s.as_str()))
}

fn main() -> ExitCode {
    if !selected() {
        return ExitCode::SUCCESS;
    }
    let secs = Duration::from_secs;
    let mut ledger = Ledger { results: Vec::new() };
    ledger.run(1, "forward-model fidelity", Some(secs(5)), forward_fidelity);
    ledger.run(2, "clean-pipeline identity", Some(secs(10)), clean_identity);
    ledger.run(3, "Wasserstein machinery", None, wasserstein_machinery);
    ledger.run(4, "gradient correctness", Some(secs(60)), gradients);
    ledger.run(5, "mass functional", None, mass_functional);
    ledger.run(6, "refinement contracts", Some(secs(300)), refinement_contracts);
    let mut models = Models::default();
    ledger.run(7, "end-to-end learning", Some(secs(1800)), || end_to_end(&mut models));
    ledger.run(8, "generalization sweep", None, || generalization(&models));
    ledger.run(9, "determinism and serialization", None, determinism);
    let failed: Vec<usize> = ledger.results.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    println!("acceptance: {}/{} criteria pass", ledger.results.len() - failed.len(), ledger.results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
