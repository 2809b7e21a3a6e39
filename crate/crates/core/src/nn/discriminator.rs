//! Convolutional critic: six conv/instance-norm/leaky-ReLU blocks, four
//! shrinking dense layers, a scalar head and a sigmoid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{BlockCache, DenseLayer, NormConvBlock};
use super::generator::check_layout;
use super::layers::{leaky_relu, leaky_relu_backward, sigmoid, Conv3d};
use super::params::ParamStore;
use super::scalar::{Dual, Scalar};
use super::tensor::Volume;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
}

/// The six-block table: blocks 1, 2, 4, 6 use kernel (3,4,4) / stride (1,2,2),
/// blocks 3 and 5 use kernel (4,4,4) / stride (2,2,2).
pub fn default_conv_blocks() -> Vec<ConvBlockSpec> {
    let a = ConvBlockSpec {
        kernel: [3, 4, 4],
        stride: [1, 2, 2],
    };
    let b = ConvBlockSpec {
        kernel: [4, 4, 4],
        stride: [2, 2, 2],
    };
    vec![a, a, b, a, b, a]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// `(T, H, W)` of one series.
    pub input_shape: [usize; 3],
    pub first_out_channels: usize,
    pub conv_blocks: Vec<ConvBlockSpec>,
    pub padding: usize,
    pub leaky_slope_conv: f64,
    pub leaky_slope_dense: f64,
    pub dense_layers: usize,
    /// Each dense layer's width is `floor(dense_shrink * previous)`.
    pub dense_shrink: f64,
}

impl DiscriminatorConfig {
    pub fn new(input_shape: [usize; 3]) -> Self {
        Self {
            input_shape,
            first_out_channels: 4,
            conv_blocks: default_conv_blocks(),
            padding: 1,
            leaky_slope_conv: 0.2,
            leaky_slope_dense: 0.01,
            dense_layers: 4,
            dense_shrink: 0.75,
        }
    }

    /// A truncated table (the first `n` blocks) for inputs too small for all six.
    pub fn with_blocks(mut self, n: usize) -> Self {
        self.conv_blocks.truncate(n);
        self
    }

    fn convs(&self) -> Vec<Conv3d> {
        let p = self.padding;
        let mut cin = 1;
        let mut cout = self.first_out_channels;
        self.conv_blocks
            .iter()
            .map(|b| {
                let c = Conv3d::new(cin, cout, b.kernel, b.stride, [p, p, p]);
                cin = cout;
                cout *= 2;
                c
            })
            .collect()
    }

    /// `(channels, [T, H, W])` after every conv block, in order.
    pub fn block_trace(&self) -> Result<Vec<(usize, [usize; 3])>> {
        let mut dims = self.input_shape;
        let mut trace = Vec::new();
        for (i, conv) in self.convs().iter().enumerate() {
            dims = conv.out_dims(dims).ok_or_else(|| {
                Error::Shape(format!("discriminator block {} underflows on input {:?}", i + 1, dims))
            })?;
            trace.push((conv.cout, dims));
        }
        Ok(trace)
    }

    /// Widths of the flattened features followed by every dense layer.
    pub fn dense_widths(&self) -> Result<Vec<usize>> {
        let trace = self.block_trace()?;
        let (c, d) = trace
            .last()
            .copied()
            .unwrap_or((1, self.input_shape));
        let mut widths = vec![c * d[0] * d[1] * d[2]];
        for _ in 0..self.dense_layers {
            let next = (self.dense_shrink * *widths.last().unwrap() as f64).floor() as usize;
            if next == 0 {
                return Err(Error::Shape("dense stack shrinks to zero width".into()));
            }
            widths.push(next);
        }
        Ok(widths)
    }

    pub fn validate(&self) -> Result<()> {
        if self.first_out_channels == 0 {
            return Err(Error::Invalid("first_out_channels must be positive".into()));
        }
        self.dense_widths().map(|_| ())
    }
}

#[derive(Clone, Debug)]
pub struct Discriminator {
    pub cfg: DiscriminatorConfig,
    blocks: Vec<NormConvBlock>,
    dense: Vec<DenseLayer>,
    head: DenseLayer,
}

#[derive(Clone, Debug)]
pub struct DiscriminatorCache<S> {
    blocks: Vec<BlockCache<S>>,
    last_dims: (usize, [usize; 3]),
    dense_in: Vec<Vec<S>>,
    dense_pre: Vec<Vec<S>>,
    head_in: Vec<S>,
    score: S,
}

impl Discriminator {
    pub fn new(cfg: DiscriminatorConfig, seed: u64) -> Result<(Self, ParamStore)> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let blocks = cfg
            .convs()
            .into_iter()
            .enumerate()
            .map(|(i, c)| NormConvBlock::register(&mut store, &format!("block{}", i + 1), c, cfg.leaky_slope_conv, &mut rng))
            .collect();
        let widths = cfg.dense_widths()?;
        let dense = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer::register(&mut store, &format!("dense{}", i + 1), w[0], w[1], &mut rng))
            .collect();
        let head = DenseLayer::register(&mut store, "head", *widths.last().unwrap(), 1, &mut rng);
        Ok((
            Self {
                cfg,
                blocks,
                dense,
                head,
            },
            store,
        ))
    }

    pub fn for_store(cfg: DiscriminatorConfig, store: &ParamStore) -> Result<Self> {
        let (d, fresh) = Self::new(cfg, 0)?;
        check_layout(&fresh, store)?;
        Ok(d)
    }

    pub fn input_len(&self) -> usize {
        self.cfg.input_shape.iter().product()
    }

    pub fn forward<S: Scalar>(&self, p: &[Vec<S>], x: &[S]) -> (S, DiscriminatorCache<S>) {
        let mut h = Volume::from_data(1, self.cfg.input_shape, x.to_vec());
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (next, c) = b.forward(p, h);
            blocks.push(c);
            h = next;
        }
        let last_dims = (h.channels, h.dims);
        let mut v = h.data;
        let mut dense_in = Vec::with_capacity(self.dense.len());
        let mut dense_pre = Vec::with_capacity(self.dense.len());
        for d in &self.dense {
            let pre = d.forward(p, &v);
            let next = leaky_relu(&pre, self.cfg.leaky_slope_dense);
            dense_in.push(v);
            dense_pre.push(pre);
            v = next;
        }
        let z = self.head.forward(p, &v)[0];
        let score = sigmoid(z);
        (
            score,
            DiscriminatorCache {
                blocks,
                last_dims,
                dense_in,
                dense_pre,
                head_in: v,
                score,
            },
        )
    }

    /// Backpropagates `dscore` (upstream gradient of the sigmoid output).
    /// Returns the input gradient and the per-tensor parameter gradients.
    pub fn backward<S: Scalar>(&self, p: &[Vec<S>], cache: &DiscriminatorCache<S>, dscore: S) -> (Vec<S>, Vec<Vec<S>>) {
        let mut grads: Vec<Vec<S>> = p.iter().map(|t| vec![S::zero(); t.len()]).collect();
        let s = cache.score;
        let dz = dscore * s * (S::one() - s);
        let mut dv = self.head.backward(p, &cache.head_in, &[dz], &mut grads);
        for (i, d) in self.dense.iter().enumerate().rev() {
            let dpre = leaky_relu_backward(&cache.dense_pre[i], &dv, self.cfg.leaky_slope_dense);
            dv = d.backward(p, &cache.dense_in[i], &dpre, &mut grads);
        }
        let (c, dims) = cache.last_dims;
        let mut dh = Volume::from_data(c, dims, dv);
        for (i, b) in self.blocks.iter().enumerate().rev() {
            dh = b.backward(p, &cache.blocks[i], &dh, &mut grads, true).unwrap();
        }
        (dh.data, grads)
    }

    /// Score and its gradient with respect to the input.
    pub fn score_and_input_grad(&self, p: &[Vec<f64>], x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let (s, cache) = self.forward(p, x);
        let (dx, grads) = self.backward(p, &cache, 1.0);
        (s, dx, grads)
    }

    /// Mixed second derivative `sum_i v_i d2D/(dx_i dtheta)` for every
    /// parameter, obtained by running the backward pass in dual arithmetic
    /// with input tangent `v`.
    pub fn mixed_input_param_derivative(&self, store: &ParamStore, x: &[f64], v: &[f64]) -> Vec<f64> {
        let p = store.materialize::<Dual>();
        let xd: Vec<Dual> = x.iter().zip(v).map(|(&a, &b)| Dual::new(a, b)).collect();
        let (_, cache) = self.forward(&p, &xd);
        let (_, grads) = self.backward(&p, &cache, Dual::from_f64(1.0));
        grads.iter().flat_map(|g| g.iter().map(|d| d.eps)).collect()
    }
}
