//! Residual 3-D U-Net denoiser.
//!
//! Each encoder level is conv(3x3x3, pad 1) -> instance norm -> leaky ReLU,
//! followed by a strided (1,2,2) convolution that halves the spatial axes only.
//! The decoder mirrors it with (1,2,2) transposed convolutions and skip
//! concatenation, and a 1x1x1 convolution maps back to one channel. The
//! network output is added to the input (global residual), so a zero final
//! convolution makes the generator the identity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{BlockCache, ConvLayer, NormConvBlock, UpConvLayer};
use super::layers::{leaky_relu, leaky_relu_backward, Conv3d};
use super::params::ParamStore;
use super::scalar::Scalar;
use super::tensor::Volume;
use crate::error::{Error, Result};

pub const GENERATOR_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub levels: usize,
    pub base_channels: usize,
    /// `(T, H, W)` of one series.
    pub input_shape: [usize; 3],
}

impl GeneratorConfig {
    pub fn new(input_shape: [usize; 3]) -> Self {
        Self {
            levels: 4,
            base_channels: 8,
            input_shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [t, h, w] = self.input_shape;
        let f = 1usize << self.levels;
        if self.levels == 0 || self.base_channels == 0 {
            return Err(Error::Invalid("generator needs at least one level and one channel".into()));
        }
        if t < 2 {
            return Err(Error::Shape(format!("generator needs T >= 2, got {t}")));
        }
        if h == 0 || w == 0 || h % f != 0 || w % f != 0 {
            return Err(Error::Shape(format!(
                "spatial dims {h}x{w} must be positive multiples of 2^{} = {f}",
                self.levels
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub cfg: GeneratorConfig,
    enc: Vec<NormConvBlock>,
    down: Vec<ConvLayer>,
    bottleneck: NormConvBlock,
    up: Vec<UpConvLayer>,
    dec: Vec<NormConvBlock>,
    out: ConvLayer,
}

/// Activations retained for the backward pass.
#[derive(Clone, Debug)]
pub struct GeneratorCache<S> {
    enc: Vec<BlockCache<S>>,
    skips: Vec<Volume<S>>,
    down_pre: Vec<Volume<S>>,
    bottleneck: BlockCache<S>,
    up_in: Vec<Volume<S>>,
    dec: Vec<BlockCache<S>>,
    out_in: Volume<S>,
}

const DOWN: [usize; 3] = [1, 2, 2];

impl Generator {
    /// Builds the layer graph and a freshly initialized parameter store.
    pub fn new(cfg: GeneratorConfig, seed: u64) -> Result<(Self, ParamStore)> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let ch = |l: usize| cfg.base_channels << l;
        let k3 = [3, 3, 3];
        let mut enc = Vec::new();
        let mut down = Vec::new();
        for l in 0..cfg.levels {
            let cin = if l == 0 { 1 } else { ch(l - 1) };
            enc.push(NormConvBlock::register(
                &mut store,
                &format!("enc{l}"),
                Conv3d::new(cin, ch(l), k3, [1, 1, 1], [1, 1, 1]),
                GENERATOR_SLOPE,
                &mut rng,
            ));
            down.push(ConvLayer::register(
                &mut store,
                &format!("down{l}"),
                Conv3d::new(ch(l), ch(l), DOWN, DOWN, [0, 0, 0]),
                &mut rng,
                false,
            ));
        }
        let deepest = ch(cfg.levels - 1);
        let bottleneck = NormConvBlock::register(
            &mut store,
            "bottleneck",
            Conv3d::new(deepest, 2 * deepest, k3, [1, 1, 1], [1, 1, 1]),
            GENERATOR_SLOPE,
            &mut rng,
        );
        let mut up = Vec::new();
        let mut dec = Vec::new();
        for l in (0..cfg.levels).rev() {
            let cin = if l == cfg.levels - 1 { 2 * deepest } else { ch(l + 1) };
            up.push(UpConvLayer::register(&mut store, &format!("up{l}"), cin, ch(l), DOWN, &mut rng));
            dec.push(NormConvBlock::register(
                &mut store,
                &format!("dec{l}"),
                Conv3d::new(2 * ch(l), ch(l), k3, [1, 1, 1], [1, 1, 1]),
                GENERATOR_SLOPE,
                &mut rng,
            ));
        }
        // Stored deepest-first above; index by level from here on.
        up.reverse();
        dec.reverse();
        let out = ConvLayer::register(
            &mut store,
            "out",
            Conv3d::new(ch(0), 1, [1, 1, 1], [1, 1, 1], [0, 0, 0]),
            &mut rng,
            true,
        );
        Ok((
            Self {
                cfg,
                enc,
                down,
                bottleneck,
                up,
                dec,
                out,
            },
            store,
        ))
    }

    /// Rebuild the layer graph for an existing store (e.g. a loaded checkpoint).
    pub fn for_store(cfg: GeneratorConfig, store: &ParamStore) -> Result<Self> {
        let (g, fresh) = Self::new(cfg, 0)?;
        check_layout(&fresh, store)?;
        Ok(g)
    }

    /// Names of the final 1x1x1 projection's parameters.
    pub fn output_param_names() -> [&'static str; 2] {
        ["out.weight", "out.bias"]
    }

    /// Residual branch `net(x)` for a `T x H x W` input.
    pub fn net_forward<S: Scalar>(&self, p: &[Vec<S>], x: &[S]) -> (Volume<S>, GeneratorCache<S>) {
        let mut h = Volume::from_data(1, self.cfg.input_shape, x.to_vec());
        let mut enc = Vec::with_capacity(self.cfg.levels);
        let mut skips = Vec::with_capacity(self.cfg.levels);
        let mut down_pre = Vec::with_capacity(self.cfg.levels);
        for l in 0..self.cfg.levels {
            let (s, c) = self.enc[l].forward(p, h);
            enc.push(c);
            let pre = self.down[l].forward(p, &s);
            h = Volume::from_data(pre.channels, pre.dims, leaky_relu(&pre.data, GENERATOR_SLOPE));
            skips.push(s);
            down_pre.push(pre);
        }
        let (mut h, bottleneck) = self.bottleneck.forward(p, h);
        let mut up_in: Vec<Volume<S>> = Vec::with_capacity(self.cfg.levels);
        let mut dec: Vec<BlockCache<S>> = Vec::with_capacity(self.cfg.levels);
        for l in (0..self.cfg.levels).rev() {
            let u = self.up[l].forward(p, &h, skips[l].dims);
            up_in.push(h);
            let (next, c) = self.dec[l].forward(p, u.concat(&skips[l]));
            dec.push(c);
            h = next;
        }
        up_in.reverse();
        dec.reverse();
        let y = self.out.forward(p, &h);
        (
            y,
            GeneratorCache {
                enc,
                skips,
                down_pre,
                bottleneck,
                up_in,
                dec,
                out_in: h,
            },
        )
    }

    /// Parameter gradients of `<dy, net(x)>`. The input gradient is not needed
    /// anywhere in training, so it is not computed.
    pub fn net_backward<S: Scalar>(&self, p: &[Vec<S>], cache: &GeneratorCache<S>, dy: &Volume<S>) -> Vec<Vec<S>> {
        let mut grads: Vec<Vec<S>> = p.iter().map(|t| vec![S::zero(); t.len()]).collect();
        let mut dh = self.out.backward(p, &cache.out_in, dy, &mut grads, true).unwrap();
        let mut dskips = Vec::with_capacity(self.cfg.levels);
        for l in 0..self.cfg.levels {
            let dcat = self.dec[l].backward(p, &cache.dec[l], &dh, &mut grads, true).unwrap();
            let c = self.cfg.base_channels << l;
            let (du, ds) = dcat.split(c);
            dskips.push(ds);
            dh = self.up[l].backward(p, &cache.up_in[l], &du, &mut grads);
        }
        let mut dx = self.bottleneck.backward(p, &cache.bottleneck, &dh, &mut grads, true).unwrap();
        for l in (0..self.cfg.levels).rev() {
            let dpre = Volume::from_data(
                dx.channels,
                dx.dims,
                leaky_relu_backward(&cache.down_pre[l].data, &dx.data, GENERATOR_SLOPE),
            );
            let mut ds = self.down[l].backward(p, &cache.skips[l], &dpre, &mut grads, true).unwrap();
            ds.add_assign(&dskips[l]);
            match self.enc[l].backward(p, &cache.enc[l], &ds, &mut grads, l > 0) {
                Some(d) => dx = d,
                None => break,
            }
        }
        grads
    }

    /// `x + net(x)` evaluated with compute type `S`; the residual sum is formed in `f64`.
    pub fn forward_with<S: Scalar>(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        let [t, h, w] = self.cfg.input_shape;
        if x.len() != t * h * w {
            return Err(Error::Shape(format!("generator input has {} values, expected {t}x{h}x{w}", x.len())));
        }
        let p = store.materialize::<S>();
        let xs: Vec<S> = x.iter().map(|&v| S::from_f64(v)).collect();
        let (y, _) = self.net_forward(&p, &xs);
        Ok(x.iter().zip(&y.data).map(|(&a, b)| a + b.re()).collect())
    }
}

/// Checks that `store` has exactly the tensors (names and shapes) of `expected`.
pub(crate) fn check_layout(expected: &ParamStore, store: &ParamStore) -> Result<()> {
    if expected.len() != store.len() {
        return Err(Error::Shape(format!(
            "parameter store has {} tensors, architecture needs {}",
            store.len(),
            expected.len()
        )));
    }
    for (a, b) in expected.tensors.iter().zip(&store.tensors) {
        if a.name != b.name || a.shape != b.shape || b.data.len() != a.data.len() {
            return Err(Error::Shape(format!(
                "parameter `{}` {:?} does not match expected `{}` {:?}",
                b.name, b.shape, a.name, a.shape
            )));
        }
    }
    Ok(())
}
