use std::path::{Path, PathBuf};

use dyntomo::eval::{
    emit_plots, history_csv, load_checkpoint, load_radiographs, load_series, run_pipeline, save_checkpoint,
    save_radiographs, save_series, summary_csv, sweep as run_sweep, write_report, ExperimentManifest, SweepSpec,
};
use dyntomo::forward::{corrupt as corrupt_series, direct_radiographs, reconstruct_series, BeamConfig, ScatterConfig};
use dyntomo::phantom::{generate_series, DatasetSpec};
use dyntomo::refine::{refine as refine_series, RefineConfig};
use dyntomo::training::{denoise_with, mass_of, train_with, SeriesPair, TrainConfig};
use dyntomo::{Error, Result};
use serde_json::json;

use crate::inputs::{collect, matching, read_json, read_json_or_default, stem, trailing_index, write_json, Kind};
use crate::{
    CorruptArgs, DenoiseArgs, EvaluateArgs, PlotArgs, ReconstructArgs, RefineArgs, SimulateArgs, SweepArgs, TrainArgs,
};

fn out_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p)?;
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let spec: DatasetSpec = read_json_or_default(a.config.as_deref())?;
    if a.count == 0 {
        return Err(Error::Invalid("--count must be positive".into()));
    }
    out_dir(&a.out)?;
    write_json(&spec, &a.out.join("dataset.json"))?;
    for i in a.first..a.first + a.count {
        let (cfg, seed) = spec.sample(a.seed, i);
        let series = generate_series(&cfg, seed)?;
        save_series(&series, &a.out.join(format!("series_{i:04}.dwt")))?;
    }
    write_json(
        &json!({"command": "simulate", "seed": a.seed, "first": a.first, "count": a.count}),
        &a.out.join("run.json"),
    )?;
    println!("wrote {} series to {}", a.count, a.out.display());
    Ok(())
}

pub fn corrupt(a: CorruptArgs) -> Result<()> {
    let beam: BeamConfig = read_json_or_default(a.beam.as_deref())?;
    let scatter: ScatterConfig = read_json_or_default(a.scatter.as_deref())?;
    beam.validate()?;
    scatter.validate()?;
    let inputs = collect(&a.input, Kind::Series)?;
    out_dir(&a.out)?;
    write_json(&beam, &a.out.join("beam.json"))?;
    write_json(&scatter, &a.out.join("scatter.json"))?;
    for (k, path) in inputs.iter().enumerate() {
        let name = stem(path, Kind::Series);
        let index = trailing_index(&name).unwrap_or(k as u64);
        let series = load_series(path)?;
        let direct = direct_radiographs(&series, &beam);
        let rad = corrupt_series(&direct, &beam, &scatter, a.seed.wrapping_add(index))?;
        save_radiographs(&rad, series.grid, series.norm_factor, &a.out.join(format!("{name}.rad.dwt")))?;
    }
    write_json(&json!({"command": "corrupt", "seed": a.seed}), &a.out.join("run.json"))?;
    println!("wrote {} radiograph series to {}", inputs.len(), a.out.display());
    Ok(())
}

pub fn reconstruct(a: ReconstructArgs) -> Result<()> {
    if !(a.clamp_eps > 0.0) {
        return Err(Error::Invalid("--clamp-eps must be positive".into()));
    }
    let inputs = collect(&a.input, Kind::Radiographs)?;
    out_dir(&a.out)?;
    for path in &inputs {
        let (rad, grid, nf) = load_radiographs(path)?;
        let series = reconstruct_series(&rad, grid, nf, a.clamp_eps)?;
        save_series(&series, &a.out.join(format!("{}.dwt", stem(path, Kind::Radiographs))))?;
    }
    write_json(&json!({"command": "reconstruct", "clamp_eps": a.clamp_eps}), &a.out.join("run.json"))?;
    println!("wrote {} series to {}", inputs.len(), a.out.display());
    Ok(())
}

/// Pairs every clean series with the noisy series of the same file name.
fn load_pairs(clean: &Path, noisy: &Path) -> Result<Vec<SeriesPair>> {
    collect(&[clean.to_path_buf()], Kind::Series)?
        .iter()
        .map(|c| {
            let name = c.file_name().expect("collected files have names");
            let n = matching(noisy, &name.to_string_lossy())?;
            Ok(SeriesPair {
                noisy: load_series(&n)?,
                clean: load_series(c)?,
            })
        })
        .collect()
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = read_json_or_default(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let train_set = load_pairs(&a.train_clean, &a.train_noisy)?;
    let val_set = load_pairs(&a.val_clean, &a.val_noisy)?;
    out_dir(&a.out)?;
    write_json(&cfg, &a.out.join("train.json"))?;
    let (best, history) = train_with(&train_set, &val_set, &cfg, |ckpt, h| {
        save_checkpoint(ckpt, &a.out.join(format!("checkpoint_epoch{}.dwck", ckpt.epoch)))?;
        eprintln!("epoch {} val_nl2 {:.6}", ckpt.epoch, h.val_nl2[ckpt.epoch]);
        Ok(())
    })?;
    save_checkpoint(&best, &a.out.join("best.dwck"))?;
    std::fs::write(a.out.join("history.csv"), history_csv(&history))?;
    println!("best epoch {} val_nl2 {:.6}", best.epoch, best.val_score);
    Ok(())
}

pub fn denoise(a: DenoiseArgs) -> Result<()> {
    if !a.checkpoint.is_file() {
        return Err(Error::Invalid(format!("{} does not exist", a.checkpoint.display())));
    }
    let inputs = collect(&a.input, Kind::Series)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let gen = ckpt.generator()?;
    out_dir(&a.out)?;
    for path in &inputs {
        let series = load_series(path)?;
        let out = denoise_with(&gen, &ckpt.generator, &series)?;
        save_series(&out, &a.out.join(path.file_name().expect("collected files have names")))?;
    }
    write_json(
        &json!({"command": "denoise", "checkpoint": a.checkpoint, "epoch": ckpt.epoch}),
        &a.out.join("run.json"),
    )?;
    println!("denoised {} series into {}", inputs.len(), a.out.display());
    Ok(())
}

pub fn refine(a: RefineArgs) -> Result<()> {
    let mut cfg = if a.classical { RefineConfig::classical(Vec::new()) } else { RefineConfig::default() };
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut cfg.lambda0, a.lambda0);
    set(&mut cfg.lambda1, a.lambda1);
    set(&mut cfg.lambda2, a.lambda2);
    set(&mut cfg.step_size, a.step_size);
    set(&mut cfg.rmsprop_decay, a.rmsprop_decay);
    set(&mut cfg.rmsprop_eps, a.rmsprop_eps);
    if let Some(n) = a.max_iters {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    let anchors = collect(&a.anchor, Kind::Series)?;
    if anchors.len() > 1 && !a.clean.is_dir() {
        return Err(Error::Invalid("--clean must be a directory when refining several series".into()));
    }
    out_dir(&a.out)?;
    write_json(&cfg, &a.out.join("refine.json"))?;
    let mut log = String::from("file,initial,objective,best_iter\n");
    for path in &anchors {
        let name = path.file_name().expect("collected files have names").to_string_lossy().into_owned();
        let anchor = load_series(path)?;
        let clean = load_series(&matching(&a.clean, &name)?)?;
        let init = a.init.as_deref().map(|d| matching(d, &name).and_then(|p| load_series(&p))).transpose()?;
        let run = RefineConfig {
            true_masses: mass_of(&clean),
            ..cfg.clone()
        };
        let r = refine_series(&anchor, &run, init.as_ref())?;
        save_series(&r.series, &a.out.join(&name))?;
        log.push_str(&format!("{name},{:.8e},{:.8e},{}\n", r.initial.total, r.objective.total, r.best_iter));
    }
    std::fs::write(a.out.join("refine_log.csv"), log)?;
    println!("refined {} series into {}", anchors.len(), a.out.display());
    Ok(())
}

/// Reads a manifest, resolving relative checkpoint paths against its directory.
fn load_manifest(path: &Path, seed: Option<u64>) -> Result<ExperimentManifest> {
    let mut m: ExperimentManifest = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut Option<PathBuf>| {
        if let Some(q) = p.as_mut().filter(|q| q.is_relative()) {
            *q = base.join(&*q);
        }
    };
    resolve(&mut m.checkpoints.supervised);
    resolve(&mut m.checkpoints.wgan_sup);
    if let Some(s) = seed {
        m.corrupt_seed = s;
    }
    m.validate()?;
    Ok(m)
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let m = load_manifest(&a.manifest, a.seed)?;
    let report = run_pipeline(&m)?;
    out_dir(&a.out)?;
    write_json(&m, &a.out.join("manifest.json"))?;
    write_report(&report, &a.out)?;
    print!("{}", summary_csv(&report));
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let m = load_manifest(&a.manifest, a.seed)?;
    let spec: SweepSpec = read_json(&a.sweep)?;
    let report = run_sweep(&spec, &m)?;
    out_dir(&a.out)?;
    write_json(&m, &a.out.join("manifest.json"))?;
    write_json(&spec, &a.out.join("sweep_spec.json"))?;
    write_json(&report, &a.out.join("sweep.json"))?;
    let csv = report.to_csv();
    std::fs::write(a.out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn plot(a: PlotArgs) -> Result<()> {
    let m = load_manifest(&a.manifest, a.seed)?;
    let report = run_pipeline(&m)?;
    out_dir(&a.out)?;
    write_json(&m, &a.out.join("manifest.json"))?;
    let files = emit_plots(&report, &a.out)?;
    println!("wrote {} plot files to {}", files.len(), a.out.display());
    Ok(())
}
