//! Finite-difference scenarios on the reduced 1x4x16x16 networks.

use dyntomo::nn::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, ParamStore, Volume};
use dyntomo::training::{d_loss, g_loss, GLossWeights};
use dyntomo::wasserstein::{gradient_penalty, NetworkCritic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fd_check, probe_indices, random_batch, tiny_grid, FdReport, FD_REL_TOL, TINY};

pub const LEN: usize = TINY[0] * TINY[1] * TINY[2];
const PROBES: usize = 40;

/// Six-block table truncated to the four blocks a 16x16 input supports.
pub fn critic() -> (Discriminator, ParamStore) {
    Discriminator::new(DiscriminatorConfig::new(TINY).with_blocks(4), 11).unwrap()
}

/// Small generator whose output conv is randomized so every parameter matters.
pub fn generator() -> (Generator, ParamStore) {
    let cfg = GeneratorConfig {
        levels: 2,
        base_channels: 2,
        input_shape: TINY,
    };
    let (g, mut store) = Generator::new(cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for name in Generator::output_param_names() {
        for v in &mut store.get_mut(name).unwrap().data {
            *v = rng.random_range(-0.3..0.3);
        }
    }
    (g, store)
}

pub fn critic_forward() -> FdReport {
    let (d, store) = critic();
    let x = &random_batch(1, LEN, 1)[0];
    let (_, _, grads) = d.score_and_input_grad(&store.materialize(), x);
    let idx = probe_indices(&store, PROBES, 2);
    fd_check(&store, &grads.concat(), &idx, |s| d.forward::<f64>(&s.materialize(), x).0)
}

pub fn generator_forward() -> FdReport {
    let (g, store) = generator();
    let x = random_batch(1, LEN, 4).remove(0);
    let w = random_batch(1, LEN, 5).remove(0);
    let p = store.materialize::<f64>();
    let (_, cache) = g.net_forward(&p, &x);
    let grads = g.net_backward(&p, &cache, &Volume::from_data(1, TINY, w.clone()));
    let idx = probe_indices(&store, PROBES, 6);
    fd_check(&store, &grads.concat(), &idx, |s| {
        let y = g.forward_with::<f64>(s, &x).unwrap();
        y.iter().zip(&w).map(|(a, b)| a * b).sum()
    })
}

pub fn penalty() -> FdReport {
    let (d, store) = critic();
    let real = random_batch(2, LEN, 7);
    let fake = random_batch(2, LEN, 8);
    let pen = gradient_penalty(&NetworkCritic::new(&d, &store), &real, &fake, 10.0, 3).unwrap();
    let idx = probe_indices(&store, PROBES, 9);
    fd_check(&store, &pen.param_grad, &idx, |s| {
        gradient_penalty(&NetworkCritic::new(&d, s), &real, &fake, 10.0, 3).unwrap().value
    })
}

pub fn critic_loss() -> FdReport {
    let (d, store) = critic();
    let real = random_batch(2, LEN, 10);
    let fake = random_batch(2, LEN, 11);
    let loss = d_loss(&d, &store, &fake, &real, 10.0, 4).unwrap();
    let idx = probe_indices(&store, PROBES, 12);
    fd_check(&store, &loss.grad, &idx, |s| d_loss(&d, s, &fake, &real, 10.0, 4).unwrap().value)
}

pub fn generator_loss(weights: GLossWeights, seed: u64) -> FdReport {
    let (g, gs) = generator();
    let (d, ds) = critic();
    let noisy = random_batch(2, LEN, seed);
    let clean = random_batch(2, LEN, seed + 1);
    let grid = tiny_grid();
    let loss = g_loss::<f64>(&g, &gs, &d, &ds, &noisy, &clean, weights, &grid).unwrap();
    let idx = probe_indices(&gs, PROBES, seed + 2);
    fd_check(&gs, &loss.grad, &idx, |s| {
        g_loss::<f64>(&g, s, &d, &ds, &noisy, &clean, weights, &grid).unwrap().total
    })
}

pub const HYBRID: GLossWeights = GLossWeights {
    lambda: 0.6,
    lambda_mass: 1.0,
    relative_mass: true,
};

pub const SUPERVISED: GLossWeights = GLossWeights {
    lambda: 1.0,
    lambda_mass: 10.0,
    relative_mass: false,
};

/// Every scenario, labelled.
pub fn all() -> Vec<(&'static str, FdReport)> {
    vec![
        ("critic forward", critic_forward()),
        ("generator forward", generator_forward()),
        ("gradient penalty", penalty()),
        ("critic loss", critic_loss()),
        ("generator loss (hybrid)", generator_loss(HYBRID, 20)),
        ("generator loss (supervised)", generator_loss(SUPERVISED, 30)),
    ]
}

impl FdReport {
    /// Within tolerance, with kinks a small minority of the probes.
    pub fn passes(&self) -> bool {
        self.worst_rel <= FD_REL_TOL && self.kinks * 10 <= self.checked
    }
}
