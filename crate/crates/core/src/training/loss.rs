use crate::error::{Error, Result};
use crate::nn::{Discriminator, Generator, ParamStore, Scalar, Volume};
use crate::phantom::GridSpec;
use crate::wasserstein::{gradient_penalty, NetworkCritic};

use super::mass::mass_weights;

/// Critic loss and its parameter gradient (flat, store order).
#[derive(Clone, Debug, PartialEq)]
pub struct DLoss {
    pub value: f64,
    /// `mean D(fake) - mean D(real)`.
    pub critic_gap: f64,
    pub penalty: f64,
    pub grad: Vec<f64>,
}

fn check_batches(a: &[Vec<f64>], b: &[Vec<f64>], len: usize) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Shape(format!("batch sizes {} and {} must match and be nonzero", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|x| x.len() != len) {
        return Err(Error::Shape(format!("every sample must have {len} values")));
    }
    Ok(())
}

/// `E D(fake) - E D(real) + eta E (|grad D(x_hat)| - 1)^2`.
pub fn d_loss(
    disc: &Discriminator,
    store: &ParamStore,
    fake: &[Vec<f64>],
    real: &[Vec<f64>],
    eta: f64,
    seed: u64,
) -> Result<DLoss> {
    check_batches(fake, real, disc.input_len())?;
    let critic = NetworkCritic::new(disc, store);
    let p = critic.params();
    let batch = fake.len() as f64;
    let mut grad = vec![0.0; store.numel()];
    let mut gap = 0.0;
    for (x, sign) in fake.iter().map(|x| (x, 1.0)).chain(real.iter().map(|x| (x, -1.0))) {
        let (s, cache) = disc.forward(p, x);
        let (_, g) = disc.backward(p, &cache, sign / batch);
        gap += sign * s / batch;
        grad.iter_mut().zip(g.iter().flatten()).for_each(|(a, b)| *a += b);
    }
    let pen = gradient_penalty(&critic, real, fake, eta, seed)?;
    grad.iter_mut().zip(&pen.param_grad).for_each(|(a, b)| *a += b);
    Ok(DLoss {
        value: gap + pen.value,
        critic_gap: gap,
        penalty: pen.value,
        grad,
    })
}

/// Term weights of the generator loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GLossWeights {
    /// Supervised weight; the adversarial term gets `1 - lambda`.
    pub lambda: f64,
    pub lambda_mass: f64,
    /// Divide each sample's mass mismatch by `|M(clean)|` so the term is
    /// independent of grid units.
    pub relative_mass: bool,
}

/// Generator loss components (unweighted) and the gradient of the weighted total.
#[derive(Clone, Debug, PartialEq)]
pub struct GLoss {
    pub total: f64,
    /// Mean over the batch of `|clean - G(noisy)| / |clean|`.
    pub supervised: f64,
    /// `E D(clean) - E D(G(noisy))`, i.e. the negated critic gap without the penalty.
    pub adversarial: f64,
    /// Mean over the batch of the l2 norm of the per-frame mass differences
    /// (relative to the clean masses' norm when so configured).
    pub mass: f64,
    pub lambda: f64,
    pub lambda_mass: f64,
    pub grad: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
}

impl GLoss {
    pub fn weighted_sum(&self) -> f64 {
        self.lambda * self.supervised + (1.0 - self.lambda) * self.adversarial + self.lambda_mass * self.mass
    }
}

/// Hybrid generator loss. The generator runs in compute type `S`; the
/// critic always runs in `f64`. The gradient penalty does not enter.
#[allow(clippy::too_many_arguments)]
pub fn g_loss<S: Scalar>(
    gen: &Generator,
    g_store: &ParamStore,
    disc: &Discriminator,
    d_store: &ParamStore,
    noisy: &[Vec<f64>],
    clean: &[Vec<f64>],
    weights: GLossWeights,
    grid: &GridSpec,
) -> Result<GLoss> {
    let GLossWeights {
        lambda,
        lambda_mass,
        relative_mass,
    } = weights;
    let shape = gen.cfg.input_shape;
    let len: usize = shape.iter().product();
    check_batches(noisy, clean, len)?;
    if disc.input_len() != len {
        return Err(Error::Shape("generator and critic input shapes differ".into()));
    }
    if !(0.0..=1.0).contains(&lambda) || !(lambda_mass >= 0.0) {
        return Err(Error::Invalid(format!("need 0 <= lambda <= 1 and lambda_mass >= 0, got {lambda}, {lambda_mass}")));
    }
    let batch = noisy.len() as f64;
    let pg = g_store.materialize::<S>();
    let pd = d_store.materialize::<f64>();
    let mw = mass_weights(shape[2], grid);
    let frame = shape[1] * shape[2];

    let mut grads = g_store.zeros_like::<f64>();
    let (mut sup, mut adv, mut mass) = (0.0, 0.0, 0.0);
    let mut outputs = Vec::with_capacity(noisy.len());
    for (x, c) in noisy.iter().zip(clean) {
        let xs: Vec<S> = x.iter().map(|&v| S::from_f64(v)).collect();
        let (net, cache) = gen.net_forward(&pg, &xs);
        let y: Vec<f64> = x.iter().zip(&net.data).map(|(a, b)| a + b.re()).collect();
        let mut dy = vec![0.0; len];

        let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(c_norm > 0.0) {
            return Err(Error::Invalid("clean sample has zero norm".into()));
        }
        let r_norm = c.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        sup += r_norm / c_norm / batch;
        if r_norm > 0.0 {
            let k = lambda / (batch * c_norm * r_norm);
            dy.iter_mut().zip(y.iter().zip(c)).for_each(|(d, (a, b))| *d += k * (a - b));
        }

        let frame_mass = |f: &[f64]| f.iter().enumerate().map(|(k, v)| v * mw[k % shape[2]]).sum::<f64>();
        let dm: Vec<f64> = y.chunks(frame).zip(c.chunks(frame)).map(|(fy, fc)| frame_mass(fy) - frame_mass(fc)).collect();
        let scale = if relative_mass {
            let m = c.chunks(frame).map(|f| frame_mass(f).powi(2)).sum::<f64>().sqrt();
            if !(m > 0.0) {
                return Err(Error::Invalid("clean sample has zero mass".into()));
            }
            1.0 / m
        } else {
            1.0
        };
        let dm_norm = dm.iter().map(|v| v * v).sum::<f64>().sqrt();
        mass += scale * dm_norm / batch;
        if dm_norm > 0.0 && lambda_mass > 0.0 {
            for (t, fd) in dy.chunks_mut(frame).enumerate() {
                let k = lambda_mass * scale * dm[t] / (dm_norm * batch);
                fd.iter_mut().enumerate().for_each(|(i, d)| *d += k * mw[i % shape[2]]);
            }
        }

        let (s_fake, cache_d) = disc.forward(&pd, &y);
        let (s_real, _) = disc.forward(&pd, c);
        adv += (s_real - s_fake) / batch;
        if lambda < 1.0 {
            let (dx, _) = disc.backward(&pd, &cache_d, -(1.0 - lambda) / batch);
            dy.iter_mut().zip(&dx).for_each(|(d, g)| *d += g);
        }

        let dvol = Volume::from_data(1, shape, dy.iter().map(|&v| S::from_f64(v)).collect());
        let g = gen.net_backward(&pg, &cache, &dvol);
        for (acc, gt) in grads.iter_mut().zip(&g) {
            acc.iter_mut().zip(gt).for_each(|(a, b)| *a += b.re());
        }
        outputs.push(y);
    }
    let mut out = GLoss {
        total: 0.0,
        supervised: sup,
        adversarial: adv,
        mass,
        lambda,
        lambda_mass,
        grad: grads.into_iter().flatten().collect(),
        outputs,
    };
    out.total = out.weighted_sum();
    Ok(out)
}
