//! Numeric element types the network layers are generic over.
//!
//! `f32` is the fast training type, `f64` the gradient-checking type, and
//! [`Dual`] carries a forward-mode tangent through an entire forward and
//! reverse pass. Running backprop in `Dual` arithmetic with an input tangent
//! `v` yields, in the tangent part of every parameter gradient, the mixed
//! second derivative `sum_i v_i d2D/dx_i dtheta`. The critic's gradient
//! penalty is differentiated with respect to its parameters that way.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Default
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// Real (primal) part, used for branch decisions such as ReLU masks.
    fn re(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }

    #[inline]
    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }

    /// `C += A * B` for an `m x k` matrix `A` and `k x n` matrix `B`, each given
    /// with explicit (row, column) element strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm_acc(m: usize, k: usize, n: usize, a: &[Self], sa: [usize; 2], b: &[Self], sb: [usize; 2], c: &mut [Self], sc: [usize; 2]) {
        check_gemm(m, k, n, a.len(), sa, b.len(), sb, c.len(), sc);
        for i in 0..m {
            for p in 0..k {
                let av = a[i * sa[0] + p * sa[1]];
                if av == Self::zero() {
                    continue;
                }
                for j in 0..n {
                    c[i * sc[0] + j * sc[1]] += av * b[p * sb[0] + j * sb[1]];
                }
            }
        }
    }
}

/// Bounds check shared by the GEMM implementations; the BLAS-style kernels
/// below read through raw pointers.
#[allow(clippy::too_many_arguments)]
#[inline]
fn check_gemm(m: usize, k: usize, n: usize, la: usize, sa: [usize; 2], lb: usize, sb: [usize; 2], lc: usize, sc: [usize; 2]) {
    let last = |r: usize, c: usize, s: [usize; 2]| if r == 0 || c == 0 { 0 } else { (r - 1) * s[0] + (c - 1) * s[1] + 1 };
    assert!(last(m, k, sa) <= la, "gemm: A out of bounds");
    assert!(last(k, n, sb) <= lb, "gemm: B out of bounds");
    assert!(last(m, n, sc) <= lc, "gemm: C out of bounds");
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn gemm_acc(m: usize, k: usize, n: usize, a: &[Self], sa: [usize; 2], b: &[Self], sb: [usize; 2], c: &mut [Self], sc: [usize; 2]) {
        check_gemm(m, k, n, a.len(), sa, b.len(), sb, c.len(), sc);
        if m == 0 || n == 0 || k == 0 {
            return;
        }
        // SAFETY: every index touched lies within the slices (checked above).
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0,
                a.as_ptr(), sa[0] as isize, sa[1] as isize,
                b.as_ptr(), sb[0] as isize, sb[1] as isize,
                1.0,
                c.as_mut_ptr(), sc[0] as isize, sc[1] as isize,
            );
        }
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn re(self) -> f64 {
        self as f64
    }
    #[inline]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f32::exp(self)
    }

    fn gemm_acc(m: usize, k: usize, n: usize, a: &[Self], sa: [usize; 2], b: &[Self], sb: [usize; 2], c: &mut [Self], sc: [usize; 2]) {
        check_gemm(m, k, n, a.len(), sa, b.len(), sb, c.len(), sc);
        if m == 0 || n == 0 || k == 0 {
            return;
        }
        // SAFETY: every index touched lies within the slices (checked above).
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0,
                a.as_ptr(), sa[0] as isize, sa[1] as isize,
                b.as_ptr(), sb[0] as isize, sb[1] as isize,
                1.0,
                c.as_mut_ptr(), sc[0] as isize, sc[1] as isize,
            );
        }
    }
}

/// First-order dual number `re + eps * e` with `e^2 = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.re;
        Dual::new(self.re * inv, (self.eps * o.re - self.re * o.eps) * inv * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, o: Dual) {
        self.re += o.re;
        self.eps += o.eps;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, o: Dual) {
        self.re -= o.re;
        self.eps -= o.eps;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, o: Dual) {
        *self = *self * o;
    }
}

impl Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::default(), |a, b| a + b)
    }
}

impl Scalar for Dual {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (2.0 * s))
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }
}
