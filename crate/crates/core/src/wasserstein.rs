//! Exact 1-D earth-mover distance, the Kantorovich-Rubinstein dual estimate
//! and the critic gradient penalty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Discriminator, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDist1D {
    samples: Vec<f64>,
}

impl EmpiricalDist1D {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Invalid("empirical distribution needs at least one sample".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("empirical samples must be finite".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        s
    }
}

/// W1 between two equal-size, equal-weight empirical distributions on the line.
pub fn w1_exact_1d(a: &EmpiricalDist1D, b: &EmpiricalDist1D) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("sample counts differ: {} vs {}", a.len(), b.len())));
    }
    let (a, b) = (a.sorted(), b.sorted());
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// `mean_a f - mean_b f`.
pub fn dual_estimate(critic: impl Fn(f64) -> f64, a: &EmpiricalDist1D, b: &EmpiricalDist1D) -> f64 {
    let mean = |d: &EmpiricalDist1D| d.samples.iter().map(|&x| critic(x)).sum::<f64>() / d.len() as f64;
    mean(a) - mean(b)
}

/// A differentiable critic on flat inputs.
pub trait Critic {
    fn input_len(&self) -> usize;
    fn n_params(&self) -> usize;
    /// Score and gradient with respect to the input.
    fn score_and_input_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
    /// `sum_i v_i d2D/(dx_i dtheta_j)` for every parameter `j`.
    fn mixed_derivative(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
}

/// `D(x) = w . x + b`, parameters ordered `[w..., b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCritic {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Critic for LinearCritic {
    fn input_len(&self) -> usize {
        self.w.len()
    }

    fn n_params(&self) -> usize {
        self.w.len() + 1
    }

    fn score_and_input_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let s = self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b;
        (s, self.w.clone())
    }

    fn mixed_derivative(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut d = v.to_vec();
        d.push(0.0);
        d
    }
}

/// The convolutional critic evaluated in `f64`.
pub struct NetworkCritic<'a> {
    net: &'a Discriminator,
    store: &'a ParamStore,
    params: Vec<Vec<f64>>,
}

impl<'a> NetworkCritic<'a> {
    pub fn new(net: &'a Discriminator, store: &'a ParamStore) -> Self {
        Self {
            net,
            store,
            params: store.materialize(),
        }
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn net(&self) -> &Discriminator {
        self.net
    }
}

impl Critic for NetworkCritic<'_> {
    fn input_len(&self) -> usize {
        self.net.input_len()
    }

    fn n_params(&self) -> usize {
        self.store.numel()
    }

    fn score_and_input_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (s, dx, _) = self.net.score_and_input_grad(&self.params, x);
        (s, dx)
    }

    fn mixed_derivative(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.net.mixed_input_param_derivative(self.store, x, v)
    }
}

/// Penalty value and its gradient with respect to the critic parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyTerm {
    pub value: f64,
    pub param_grad: Vec<f64>,
    /// Input-gradient norm at every interpolate.
    pub grad_norms: Vec<f64>,
}

/// Interpolation weights `u ~ U[0, 1)`, one per pair.
pub fn interpolation_weights(pairs: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs).map(|_| rng.random::<f64>()).collect()
}

/// `eta * mean((|grad_x D(x_hat)| - 1)^2)` at `x_hat = u real + (1 - u) fake`.
pub fn gradient_penalty<C: Critic + ?Sized>(
    critic: &C,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    eta: f64,
    seed: u64,
) -> Result<PenaltyTerm> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::Shape(format!("batch sizes {} and {} must match and be nonzero", real.len(), fake.len())));
    }
    if !(eta >= 0.0) {
        return Err(Error::Invalid("eta must be nonnegative".into()));
    }
    let n = critic.input_len();
    if real.iter().chain(fake).any(|x| x.len() != n) {
        return Err(Error::Shape(format!("every sample must have {n} values")));
    }
    let u = interpolation_weights(real.len(), seed);
    let batch = real.len() as f64;
    let mut value = 0.0;
    let mut param_grad = vec![0.0; critic.n_params()];
    let mut grad_norms = Vec::with_capacity(real.len());
    for ((r, f), &u) in real.iter().zip(fake).zip(&u) {
        let x: Vec<f64> = r.iter().zip(f).map(|(a, b)| u * a + (1.0 - u) * b).collect();
        let (_, g) = critic.score_and_input_grad(&x);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        value += (norm - 1.0).powi(2);
        grad_norms.push(norm);
        if eta > 0.0 && norm > 0.0 {
            // d|g|/dtheta = (g / |g|) . dg/dtheta
            let dir: Vec<f64> = g.iter().map(|v| v / norm).collect();
            let mixed = critic.mixed_derivative(&x, &dir);
            let k = eta * 2.0 * (norm - 1.0) / batch;
            param_grad.iter_mut().zip(&mixed).for_each(|(p, m)| *p += k * m);
        }
    }
    Ok(PenaltyTerm {
        value: eta * value / batch,
        param_grad,
        grad_norms,
    })
}
