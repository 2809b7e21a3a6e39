use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, ParamStore};
use crate::phantom::{DensityTimeSeries, GridSpec};

use super::adam::Adam;
use super::loss::{d_loss, g_loss, GLossWeights};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_init: f64,
    /// Multiplicative decay of lambda per epoch.
    pub lambda_decay: f64,
    pub lambda_mass: f64,
    /// Measure the mass mismatch relative to the clean masses.
    pub relative_mass: bool,
    /// Gradient-penalty weight.
    pub eta: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_momentum: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Generator and critic updates per mini-batch.
    pub gd_ratio: [usize; 2],
    pub supervised_only: bool,
    pub seed: u64,
    pub generator_levels: usize,
    pub generator_base_channels: usize,
    /// Keep only the first `n` critic conv blocks (small inputs).
    pub discriminator_blocks: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_init: 0.99,
            lambda_decay: 0.97,
            lambda_mass: 10.0,
            relative_mass: true,
            eta: 10.0,
            lr_g: 2e-6,
            lr_d: 1e-6,
            adam_momentum: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 2,
            epochs: 10,
            gd_ratio: [1, 1],
            supervised_only: false,
            seed: 0,
            generator_levels: 4,
            generator_base_channels: 8,
            discriminator_blocks: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.lr_g, self.lr_d, self.adam_eps, self.lambda_decay];
        if rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Invalid("learning rates, adam_eps and lambda_decay must be positive".into()));
        }
        if !(self.lambda_init > 0.0 && self.lambda_init <= 1.0) {
            return Err(Error::Invalid(format!("lambda_init must lie in (0, 1], got {}", self.lambda_init)));
        }
        if !(self.lambda_mass >= 0.0 && self.eta >= 0.0) {
            return Err(Error::Invalid("lambda_mass and eta must be nonnegative".into()));
        }
        if !((0.0..1.0).contains(&self.adam_momentum) && (0.0..1.0).contains(&self.adam_beta2)) {
            return Err(Error::Invalid("Adam moment coefficients must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.gd_ratio.contains(&0) {
            return Err(Error::Invalid("batch_size, epochs and gd_ratio entries must be positive".into()));
        }
        Ok(())
    }

    pub fn loss_weights(&self, lambda: f64) -> GLossWeights {
        GLossWeights {
            lambda,
            lambda_mass: self.lambda_mass,
            relative_mass: self.relative_mass,
        }
    }

    pub fn generator_config(&self, shape: [usize; 3]) -> GeneratorConfig {
        GeneratorConfig {
            levels: self.generator_levels,
            base_channels: self.generator_base_channels,
            input_shape: shape,
        }
    }

    pub fn discriminator_config(&self, shape: [usize; 3]) -> DiscriminatorConfig {
        let cfg = DiscriminatorConfig::new(shape);
        match self.discriminator_blocks {
            Some(n) => cfg.with_blocks(n),
            None => cfg,
        }
    }
}

/// Supervised weight for `epoch` (0-based).
pub fn lambda_schedule(cfg: &TrainConfig, epoch: usize) -> f64 {
    if cfg.supervised_only {
        1.0
    } else {
        cfg.lambda_init * cfg.lambda_decay.powi(epoch as i32)
    }
}

/// Noisy input and its clean target.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPair {
    pub noisy: DensityTimeSeries,
    pub clean: DensityTimeSeries,
}

/// Trained weights and where they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub generator_config: GeneratorConfig,
    pub discriminator_config: DiscriminatorConfig,
    #[serde(skip)]
    pub generator: ParamStore,
    #[serde(skip)]
    pub discriminator: ParamStore,
    pub grid: GridSpec,
    pub seed: u64,
    /// 0-based epoch after which the weights were taken.
    pub epoch: usize,
    pub val_score: f64,
}

impl Checkpoint {
    pub fn generator(&self) -> Result<Generator> {
        Generator::for_store(self.generator_config.clone(), &self.generator)
    }

    /// Denoises one series.
    pub fn denoise(&self, series: &DensityTimeSeries) -> Result<DensityTimeSeries> {
        let gen = self.generator()?;
        denoise_with(&gen, &self.generator, series)
    }
}

pub fn denoise_with(gen: &Generator, store: &ParamStore, series: &DensityTimeSeries) -> Result<DensityTimeSeries> {
    if series.shape() != gen.cfg.input_shape {
        return Err(Error::Shape(format!(
            "series shape {:?} does not match the generator's {:?}",
            series.shape(),
            gen.cfg.input_shape
        )));
    }
    let y = gen.forward_with::<f32>(store, &series.as_flat())?;
    let frames = ndarray::Array3::from_shape_vec(series.frames.raw_dim(), y).expect("generator preserves shape");
    Ok(series.with_frames(frames))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// `None` when the critic was not updated (pure supervised training).
    pub loss_d: Option<f64>,
    pub loss_g_total: f64,
    pub loss_g_sup: f64,
    pub loss_g_adv: f64,
    pub loss_g_mass: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    /// Mean validation normalized l2 after every epoch.
    pub val_nl2: Vec<f64>,
    pub selected_epoch: usize,
    pub d_steps: usize,
    pub g_steps: usize,
}

impl TrainHistory {
    /// Mean supervised loss over the steps of `epoch`.
    pub fn epoch_supervised(&self, epoch: usize) -> f64 {
        let v: Vec<f64> = self.steps.iter().filter(|s| s.epoch == epoch).map(|s| s.loss_g_sup).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn nl2(clean: &[f64], est: &[f64]) -> f64 {
    let num: f64 = clean.iter().zip(est).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = clean.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}

fn validation_score(gen: &Generator, store: &ParamStore, val: &[SeriesPair]) -> Result<f64> {
    let mut total = 0.0;
    for pair in val {
        let y = gen.forward_with::<f32>(store, &pair.noisy.as_flat())?;
        total += nl2(&pair.clean.as_flat(), &y);
    }
    Ok(total / val.len() as f64)
}

fn finite_or_diverged(values: &[f64], what: &str, step: usize, epoch: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence(format!("{what} became non-finite at step {step} (epoch {epoch}): {values:?}")))
    }
}

/// Stream-separated seed for the penalty interpolates of one step.
fn step_seed(seed: u64, step: usize, sub: usize) -> u64 {
    seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((sub as u64) << 56)
}

/// Alternating critic/generator training with per-epoch validation.
/// `on_epoch` sees the checkpoint of every epoch.
pub fn train_with(
    train_set: &[SeriesPair],
    val_set: &[SeriesPair],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&Checkpoint, &TrainHistory) -> Result<()>,
) -> Result<(Checkpoint, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Invalid("training and validation sets must be nonempty".into()));
    }
    let shape = train_set[0].clean.shape();
    let grid = train_set[0].clean.grid;
    for p in train_set.iter().chain(val_set) {
        if p.clean.shape() != shape || p.noisy.shape() != shape {
            return Err(Error::Shape("all series must share one shape".into()));
        }
    }
    let (gen, mut g_store) = Generator::new(cfg.generator_config(shape), cfg.seed)?;
    let (disc, mut d_store) = Discriminator::new(cfg.discriminator_config(shape), cfg.seed.wrapping_add(1))?;
    let mut adam_g = Adam::new(g_store.numel(), cfg.lr_g, cfg.adam_momentum, cfg.adam_beta2, cfg.adam_eps);
    let mut adam_d = Adam::new(d_store.numel(), cfg.lr_d, cfg.adam_momentum, cfg.adam_beta2, cfg.adam_eps);

    let noisy: Vec<Vec<f64>> = train_set.iter().map(|p| p.noisy.as_flat()).collect();
    let clean: Vec<Vec<f64>> = train_set.iter().map(|p| p.clean.as_flat()).collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut history = TrainHistory::default();
    let mut best: Option<Checkpoint> = None;
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let lambda = lambda_schedule(cfg, epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb: Vec<Vec<f64>> = batch.iter().map(|&i| noisy[i].clone()).collect();
            let cb: Vec<Vec<f64>> = batch.iter().map(|&i| clean[i].clone()).collect();

            let mut loss_d = None;
            if lambda < 1.0 {
                for k in 0..cfg.gd_ratio[1] {
                    let fake: Vec<Vec<f64>> =
                        xb.iter().map(|x| gen.forward_with::<f32>(&g_store, x)).collect::<Result<_>>()?;
                    let d = d_loss(&disc, &d_store, &fake, &cb, cfg.eta, step_seed(cfg.seed, step, k))?;
                    finite_or_diverged(&[d.value], "critic loss", step, epoch)?;
                    adam_d.step(&mut d_store, &d.grad);
                    history.d_steps += 1;
                    loss_d = Some(d.value);
                }
            }
            let mut last = None;
            for _ in 0..cfg.gd_ratio[0] {
                let g = g_loss::<f32>(&gen, &g_store, &disc, &d_store, &xb, &cb, cfg.loss_weights(lambda), &grid)?;
                finite_or_diverged(&[g.total, g.supervised, g.adversarial, g.mass], "generator loss", step, epoch)?;
                adam_g.step(&mut g_store, &g.grad);
                history.g_steps += 1;
                last = Some(g);
            }
            if !(g_store.all_finite() && d_store.all_finite()) {
                return Err(Error::Divergence(format!("parameters became non-finite at step {step} (epoch {epoch})")));
            }
            let g = last.expect("at least one generator update");
            history.steps.push(StepRecord {
                step,
                epoch,
                loss_d,
                loss_g_total: g.total,
                loss_g_sup: g.supervised,
                loss_g_adv: g.adversarial,
                loss_g_mass: g.mass,
            });
            step += 1;
        }
        let score = validation_score(&gen, &g_store, val_set)?;
        finite_or_diverged(&[score], "validation score", step, epoch)?;
        history.val_nl2.push(score);
        let ckpt = Checkpoint {
            generator_config: gen.cfg.clone(),
            discriminator_config: disc.cfg.clone(),
            generator: g_store.clone(),
            discriminator: d_store.clone(),
            grid,
            seed: cfg.seed,
            epoch,
            val_score: score,
        };
        if best.as_ref().is_none_or(|b| score < b.val_score) {
            history.selected_epoch = epoch;
            best = Some(ckpt.clone());
        }
        on_epoch(&ckpt, &history)?;
    }
    Ok((best.expect("at least one epoch"), history))
}

pub fn train(train_set: &[SeriesPair], val_set: &[SeriesPair], cfg: &TrainConfig) -> Result<(Checkpoint, TrainHistory)> {
    train_with(train_set, val_set, cfg, |_, _| Ok(()))
}
