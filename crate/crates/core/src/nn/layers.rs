//! Differentiable building blocks with explicit forward and backward passes.
//!
//! Every routine is generic over [`Scalar`], so the same code serves fast
//! `f32` training, `f64` gradient checks and `Dual` mixed second derivatives.

use super::scalar::Scalar;
use super::tensor::Volume;

/// Output length of a strided, zero-padded window: `floor((n + 2p - k) / s) + 1`.
/// `None` when the window no longer fits.
pub fn conv_out_len(n: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let span = n + 2 * pad;
    if span < kernel || n == 0 {
        None
    } else {
        Some((span - kernel) / stride + 1)
    }
}

/// Geometry of a 3-D convolution. Weights are `[cout][cin][kt][kh][kw]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv3d {
    pub cin: usize,
    pub cout: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl Conv3d {
    pub fn new(cin: usize, cout: usize, kernel: [usize; 3], stride: [usize; 3], pad: [usize; 3]) -> Self {
        Self {
            cin,
            cout,
            kernel,
            stride,
            pad,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.kernel.iter().product::<usize>()
    }

    pub fn fan_in(&self) -> usize {
        self.cin * self.kernel.iter().product::<usize>()
    }

    pub fn out_dims(&self, dims: [usize; 3]) -> Option<[usize; 3]> {
        Some([
            conv_out_len(dims[0], self.kernel[0], self.stride[0], self.pad[0])?,
            conv_out_len(dims[1], self.kernel[1], self.stride[1], self.pad[1])?,
            conv_out_len(dims[2], self.kernel[2], self.stride[2], self.pad[2])?,
        ])
    }

    fn taps(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Visits every contiguous run of output positions along `w` that a given
    /// (cin, tap) pair touches. The callback receives the im2col row index
    /// `ci * taps + tap`, the output position of the run start, the matching
    /// input offset, and the run length; input indices advance by `stride[2]`.
    fn for_each_run(&self, in_dims: [usize; 3], out_dims: [usize; 3], mut f: impl FnMut(usize, usize, usize, usize)) {
        let [kt_n, kh_n, kw_n] = self.kernel;
        let [st, sh, sw] = self.stride;
        let [pt, ph, pw] = self.pad;
        let in_vox = in_dims[0] * in_dims[1] * in_dims[2];
        let valid = |o: usize, k: usize, s: usize, p: usize, n: usize| {
            let i = (o * s + k) as isize - p as isize;
            (i >= 0 && (i as usize) < n).then_some(i as usize)
        };
        // Valid output range along w for each kw tap.
        let w_ranges: Vec<(usize, usize)> = (0..kw_n)
            .map(|kw| {
                let hits: Vec<usize> = (0..out_dims[2]).filter(|&ow| valid(ow, kw, sw, pw, in_dims[2]).is_some()).collect();
                match (hits.first(), hits.last()) {
                    (Some(&lo), Some(&hi)) => (lo, hi + 1),
                    _ => (0, 0),
                }
            })
            .collect();
        for ci in 0..self.cin {
            for kt in 0..kt_n {
                for kh in 0..kh_n {
                    for (kw, &(lo, hi)) in w_ranges.iter().enumerate() {
                        if lo >= hi {
                            continue;
                        }
                        let row = ci * kt_n * kh_n * kw_n + (kt * kh_n + kh) * kw_n + kw;
                        for ot in 0..out_dims[0] {
                            let Some(it) = valid(ot, kt, st, pt, in_dims[0]) else { continue };
                            for oh in 0..out_dims[1] {
                                let Some(ih) = valid(oh, kh, sh, ph, in_dims[1]) else { continue };
                                let out_pos = (ot * out_dims[1] + oh) * out_dims[2] + lo;
                                let in_off = ci * in_vox + (it * in_dims[1] + ih) * in_dims[2] + lo * sw + kw - pw;
                                f(row, out_pos, in_off, hi - lo);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Unfolds `x` into a `(cin * taps) x positions` matrix.
    fn im2col<S: Scalar>(&self, x: &Volume<S>, out_dims: [usize; 3]) -> Vec<S> {
        let positions = out_dims.iter().product::<usize>();
        let mut col = vec![S::zero(); self.cin * self.taps() * positions];
        let sw = self.stride[2];
        self.for_each_run(x.dims, out_dims, |row, pos, xo, n| {
            let dst = &mut col[row * positions + pos..row * positions + pos + n];
            if sw == 1 {
                dst.copy_from_slice(&x.data[xo..xo + n]);
            } else {
                for (j, d) in dst.iter_mut().enumerate() {
                    *d = x.data[xo + j * sw];
                }
            }
        });
        col
    }

    /// Adjoint of [`Conv3d::im2col`]: scatter-adds columns back into a volume.
    fn col2im<S: Scalar>(&self, col: &[S], in_dims: [usize; 3], out_dims: [usize; 3]) -> Volume<S> {
        let positions = out_dims.iter().product::<usize>();
        let mut x = Volume::zeros(self.cin, in_dims);
        let sw = self.stride[2];
        self.for_each_run(in_dims, out_dims, |row, pos, xo, n| {
            let src = &col[row * positions + pos..row * positions + pos + n];
            if sw == 1 {
                for (d, &v) in x.data[xo..xo + n].iter_mut().zip(src) {
                    *d += v;
                }
            } else {
                for (j, &v) in src.iter().enumerate() {
                    x.data[xo + j * sw] += v;
                }
            }
        });
        x
    }

    /// `y = conv(x, w) + b`.
    pub fn forward<S: Scalar>(&self, weight: &[S], bias: Option<&[S]>, x: &Volume<S>) -> Volume<S> {
        assert_eq!(x.channels, self.cin, "conv input channels");
        let out_dims = self.out_dims(x.dims).expect("conv window underflow");
        let positions = out_dims.iter().product::<usize>();
        let rows = self.cin * self.taps();
        let col = self.im2col(x, out_dims);
        let mut y = Volume::zeros(self.cout, out_dims);
        S::gemm_acc(self.cout, rows, positions, weight, [rows, 1], &col, [positions, 1], &mut y.data, [positions, 1]);
        if let Some(b) = bias {
            for co in 0..self.cout {
                let bv = b[co];
                for v in y.channel_mut(co) {
                    *v += bv;
                }
            }
        }
        y
    }

    /// Adjoint of [`Conv3d::forward`] with respect to its input.
    pub fn backward_input<S: Scalar>(&self, weight: &[S], dy: &Volume<S>, in_dims: [usize; 3]) -> Volume<S> {
        assert_eq!(dy.channels, self.cout);
        let positions = dy.voxels();
        let rows = self.cin * self.taps();
        let mut dcol = vec![S::zero(); rows * positions];
        S::gemm_acc(rows, self.cout, positions, weight, [1, rows], &dy.data, [positions, 1], &mut dcol, [positions, 1]);
        self.col2im(&dcol, in_dims, dy.dims)
    }

    /// Gradient with respect to the weights, accumulated into `dw`.
    pub fn backward_weight<S: Scalar>(&self, x: &Volume<S>, dy: &Volume<S>, dw: &mut [S]) {
        let positions = dy.voxels();
        let rows = self.cin * self.taps();
        let col = self.im2col(x, dy.dims);
        S::gemm_acc(self.cout, positions, rows, &dy.data, [positions, 1], &col, [1, positions], dw, [rows, 1]);
    }
}

/// Per-channel sum of a volume, i.e. the bias gradient.
pub fn channel_sums<S: Scalar>(dy: &Volume<S>, db: &mut [S]) {
    for (c, slot) in db.iter_mut().enumerate().take(dy.channels) {
        *slot += dy.channel(c).iter().copied().sum::<S>();
    }
}

pub const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Cached statistics of an instance-normalization forward pass.
#[derive(Clone, Debug)]
pub struct NormCache<S> {
    pub xhat: Volume<S>,
    pub inv_std: Vec<S>,
}

/// Per-sample, per-channel normalization over all voxels with affine gain and offset.
pub fn instance_norm_forward<S: Scalar>(x: &Volume<S>, gain: &[S], offset: &[S]) -> (Volume<S>, NormCache<S>) {
    let n = x.voxels();
    let inv_n = S::from_f64(1.0 / n as f64);
    let mut xhat = Volume::zeros(x.channels, x.dims);
    let mut y = Volume::zeros(x.channels, x.dims);
    let mut inv_std = Vec::with_capacity(x.channels);
    for c in 0..x.channels {
        let xc = x.channel(c);
        let mean = xc.iter().copied().sum::<S>() * inv_n;
        let var = xc.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() * inv_n;
        let is = S::one() / (var + S::from_f64(INSTANCE_NORM_EPS)).sqrt();
        inv_std.push(is);
        let (g, o) = (gain[c], offset[c]);
        for ((h, yv), &v) in xhat.channel_mut(c).iter_mut().zip(y.channel_mut(c)).zip(xc) {
            *h = (v - mean) * is;
            *yv = *h * g + o;
        }
    }
    (y, NormCache { xhat, inv_std })
}

/// Returns `dx` and accumulates gain/offset gradients.
pub fn instance_norm_backward<S: Scalar>(
    cache: &NormCache<S>,
    gain: &[S],
    dy: &Volume<S>,
    dgain: &mut [S],
    doffset: &mut [S],
) -> Volume<S> {
    let n = dy.voxels();
    let inv_n = S::from_f64(1.0 / n as f64);
    let mut dx = Volume::zeros(dy.channels, dy.dims);
    for c in 0..dy.channels {
        let dyc = dy.channel(c);
        let xh = cache.xhat.channel(c);
        let mut sum_dy = S::zero();
        let mut sum_dy_xh = S::zero();
        for (&g, &h) in dyc.iter().zip(xh) {
            sum_dy += g;
            sum_dy_xh += g * h;
        }
        dgain[c] += sum_dy_xh;
        doffset[c] += sum_dy;
        let k = gain[c] * cache.inv_std[c];
        let mean_dy = sum_dy * inv_n;
        let mean_dy_xh = sum_dy_xh * inv_n;
        for ((d, &g), &h) in dx.channel_mut(c).iter_mut().zip(dyc).zip(xh) {
            *d = k * (g - mean_dy - h * mean_dy_xh);
        }
    }
    dx
}

#[inline]
pub fn leaky_relu<S: Scalar>(x: &[S], slope: f64) -> Vec<S> {
    let a = S::from_f64(slope);
    x.iter().map(|&v| if v.re() > 0.0 { v } else { v * a }).collect()
}

/// Backward through a leaky ReLU given its pre-activation input.
#[inline]
pub fn leaky_relu_backward<S: Scalar>(pre: &[S], dy: &[S], slope: f64) -> Vec<S> {
    let a = S::from_f64(slope);
    pre.iter()
        .zip(dy)
        .map(|(&v, &g)| if v.re() > 0.0 { g } else { g * a })
        .collect()
}

/// Fully connected map `y = W x + b` with `W` stored `[out][in]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn forward<S: Scalar>(&self, w: &[S], b: &[S], x: &[S]) -> Vec<S> {
        (0..self.outputs)
            .map(|o| {
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                row.iter().zip(x).map(|(&a, &v)| a * v).sum::<S>() + b[o]
            })
            .collect()
    }

    /// Returns `dx`; accumulates weight and bias gradients.
    pub fn backward<S: Scalar>(&self, w: &[S], x: &[S], dy: &[S], dw: &mut [S], db: &mut [S]) -> Vec<S> {
        let mut dx = vec![S::zero(); self.inputs];
        for (o, &g) in dy.iter().enumerate() {
            db[o] += g;
            let row = &w[o * self.inputs..(o + 1) * self.inputs];
            let drow = &mut dw[o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                drow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }
}

#[inline]
pub fn sigmoid<S: Scalar>(z: S) -> S {
    if z.re() >= 0.0 {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}
