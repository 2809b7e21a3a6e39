//! Parameterized layers that own their slots in a [`ParamStore`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    channel_sums, instance_norm_backward, instance_norm_forward, leaky_relu, leaky_relu_backward, Conv3d, Dense,
    NormCache,
};
use super::params::{ParamStore, ParamTensor};
use super::scalar::Scalar;
use super::tensor::Volume;

fn uniform_fill(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f32> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound) as f32).collect()
}

fn conv_shape(conv: &Conv3d) -> Vec<usize> {
    vec![conv.cout, conv.cin, conv.kernel[0], conv.kernel[1], conv.kernel[2]]
}

/// Convolution plus bias, no normalization or activation.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub conv: Conv3d,
    pub w: usize,
    pub b: usize,
}

impl ConvLayer {
    pub fn register(store: &mut ParamStore, name: &str, conv: Conv3d, rng: &mut ChaCha8Rng, zero: bool) -> Self {
        let mut w = ParamTensor::zeros(format!("{name}.weight"), conv_shape(&conv));
        if !zero {
            w.data = uniform_fill(rng, conv.weight_len(), conv.fan_in());
        }
        let w = store.push(w);
        let b = store.push(ParamTensor::zeros(format!("{name}.bias"), vec![conv.cout]));
        Self { conv, w, b }
    }

    pub fn forward<S: Scalar>(&self, p: &[Vec<S>], x: &Volume<S>) -> Volume<S> {
        self.conv.forward(&p[self.w], Some(&p[self.b]), x)
    }

    pub fn backward<S: Scalar>(
        &self,
        p: &[Vec<S>],
        x: &Volume<S>,
        dy: &Volume<S>,
        grads: &mut [Vec<S>],
        need_dx: bool,
    ) -> Option<Volume<S>> {
        self.conv.backward_weight(x, dy, &mut grads[self.w]);
        channel_sums(dy, &mut grads[self.b]);
        need_dx.then(|| self.conv.backward_input(&p[self.w], dy, x.dims))
    }
}

/// Transposed convolution, the adjoint of `conv` (whose `cin` is this layer's
/// output channel count and `cout` its input channel count).
#[derive(Clone, Debug)]
pub struct UpConvLayer {
    pub conv: Conv3d,
    pub w: usize,
    pub b: usize,
}

impl UpConvLayer {
    pub fn register(store: &mut ParamStore, name: &str, cin: usize, cout: usize, factor: [usize; 3], rng: &mut ChaCha8Rng) -> Self {
        let conv = Conv3d::new(cout, cin, factor, factor, [0, 0, 0]);
        let fan_in = cin * factor.iter().product::<usize>();
        let mut w = ParamTensor::zeros(format!("{name}.weight"), conv_shape(&conv));
        w.data = uniform_fill(rng, conv.weight_len(), fan_in);
        let w = store.push(w);
        let b = store.push(ParamTensor::zeros(format!("{name}.bias"), vec![cout]));
        Self { conv, w, b }
    }

    pub fn forward<S: Scalar>(&self, p: &[Vec<S>], x: &Volume<S>, out_dims: [usize; 3]) -> Volume<S> {
        let mut y = self.conv.backward_input(&p[self.w], x, out_dims);
        for c in 0..y.channels {
            let bv = p[self.b][c];
            for v in y.channel_mut(c) {
                *v += bv;
            }
        }
        y
    }

    pub fn backward<S: Scalar>(&self, p: &[Vec<S>], x: &Volume<S>, dy: &Volume<S>, grads: &mut [Vec<S>]) -> Volume<S> {
        self.conv.backward_weight(dy, x, &mut grads[self.w]);
        channel_sums(dy, &mut grads[self.b]);
        self.conv.forward(&p[self.w], None, dy)
    }
}

/// Convolution, instance normalization, leaky ReLU.
#[derive(Clone, Debug)]
pub struct NormConvBlock {
    pub layer: ConvLayer,
    pub gain: usize,
    pub offset: usize,
    pub slope: f64,
}

#[derive(Clone, Debug)]
pub struct BlockCache<S> {
    pub input: Volume<S>,
    pub norm: NormCache<S>,
    pub pre: Volume<S>,
}

impl NormConvBlock {
    pub fn register(store: &mut ParamStore, name: &str, conv: Conv3d, slope: f64, rng: &mut ChaCha8Rng) -> Self {
        let layer = ConvLayer::register(store, &format!("{name}.conv"), conv, rng, false);
        let gain = store.push(ParamTensor::filled(format!("{name}.norm.gain"), vec![conv.cout], 1.0));
        let offset = store.push(ParamTensor::zeros(format!("{name}.norm.offset"), vec![conv.cout]));
        Self {
            layer,
            gain,
            offset,
            slope,
        }
    }

    pub fn forward<S: Scalar>(&self, p: &[Vec<S>], x: Volume<S>) -> (Volume<S>, BlockCache<S>) {
        let z = self.layer.forward(p, &x);
        let (pre, norm) = instance_norm_forward(&z, &p[self.gain], &p[self.offset]);
        let out = Volume::from_data(pre.channels, pre.dims, leaky_relu(&pre.data, self.slope));
        (out, BlockCache { input: x, norm, pre })
    }

    pub fn backward<S: Scalar>(
        &self,
        p: &[Vec<S>],
        cache: &BlockCache<S>,
        dy: &Volume<S>,
        grads: &mut [Vec<S>],
        need_dx: bool,
    ) -> Option<Volume<S>> {
        let dpre = Volume::from_data(dy.channels, dy.dims, leaky_relu_backward(&cache.pre.data, &dy.data, self.slope));
        let (dgain, doffset) = two_mut(grads, self.gain, self.offset);
        let dz = instance_norm_backward(&cache.norm, &p[self.gain], &dpre, dgain, doffset);
        self.layer.backward(p, &cache.input, &dz, grads, need_dx)
    }
}

/// Fully connected layer with weights `[out][in]`.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub dense: Dense,
    pub w: usize,
    pub b: usize,
}

impl DenseLayer {
    pub fn register(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w = ParamTensor::zeros(format!("{name}.weight"), vec![outputs, inputs]);
        w.data = uniform_fill(rng, inputs * outputs, inputs);
        let w = store.push(w);
        let b = store.push(ParamTensor::zeros(format!("{name}.bias"), vec![outputs]));
        Self {
            dense: Dense { inputs, outputs },
            w,
            b,
        }
    }

    pub fn forward<S: Scalar>(&self, p: &[Vec<S>], x: &[S]) -> Vec<S> {
        self.dense.forward(&p[self.w], &p[self.b], x)
    }

    pub fn backward<S: Scalar>(&self, p: &[Vec<S>], x: &[S], dy: &[S], grads: &mut [Vec<S>]) -> Vec<S> {
        let (dw, db) = two_mut(grads, self.w, self.b);
        self.dense.backward(&p[self.w], x, dy, dw, db)
    }
}

/// Disjoint mutable borrows of two gradient buffers.
pub(crate) fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}
