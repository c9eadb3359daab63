//! Dense row-major kernels shared by the forward and backward passes.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of a model: `f32` for training, `f64` for
/// gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `out (m x n) += a (m x k) * b (k x n)`.
pub fn matmul_acc<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (r, &s) in a[i * k..(i + 1) * k].iter().enumerate() {
            if s == T::zero() {
                continue;
            }
            let brow = &b[r * n..(r + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += s * bv;
            }
        }
    }
}

/// `out (m x n) += a^T * b` with `a: k x m`, `b: k x n`.
pub fn matmul_at_b_acc<T: Real>(a: &[T], b: &[T], k: usize, m: usize, n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for r in 0..k {
        let brow = &b[r * n..(r + 1) * n];
        for (i, &s) in a[r * m..(r + 1) * m].iter().enumerate() {
            if s == T::zero() {
                continue;
            }
            for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                *o += s * bv;
            }
        }
    }
}

/// `out (m x n) += a * b^T` with `a: m x k`, `b: n x k`.
pub fn matmul_a_bt_acc<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn transpose<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

/// `x (rows x cols) * w (cols x out) + bias`.
pub fn affine<T: Real>(
    x: &[T],
    w: &[T],
    bias: &[T],
    rows: usize,
    cols: usize,
    out_cols: usize,
) -> Vec<T> {
    let mut out = Vec::with_capacity(rows * out_cols);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    matmul_acc(x, w, rows, cols, out_cols, &mut out);
    out
}

/// Column sums of a `rows x cols` matrix, accumulated into `out`.
pub fn col_sum_acc<T: Real>(x: &[T], cols: usize, out: &mut [T]) {
    for row in x.chunks_exact(cols) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Per-row statistics kept for the layer-norm backward pass.
#[derive(Debug, Clone)]
pub struct NormCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub fn layer_norm<T: Real>(x: &[T], gain: &[T], bias: &[T], cols: usize) -> (Vec<T>, NormCache<T>) {
    let rows = x.len() / cols;
    let n = T::of(cols as f64);
    let eps = T::of(LAYER_NORM_EPS);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let rs = T::one() / (var + eps).sqrt();
        rstd.push(rs);
        for c in 0..cols {
            let h = (row[c] - mean) * rs;
            xhat[r * cols + c] = h;
            y[r * cols + c] = gain[c] * h + bias[c];
        }
    }
    (y, NormCache { xhat, rstd })
}

/// Returns `dx`; accumulates gain/bias gradients.
pub fn layer_norm_backward<T: Real>(
    dy: &[T],
    cache: &NormCache<T>,
    gain: &[T],
    cols: usize,
    dgain: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let n = T::of(cols as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); cols];
    for (r, &rs) in cache.rstd.iter().enumerate() {
        let dyr = &dy[r * cols..(r + 1) * cols];
        let xh = &cache.xhat[r * cols..(r + 1) * cols];
        let mut mean_d = T::zero();
        let mut mean_dx = T::zero();
        for c in 0..cols {
            dgain[c] += dyr[c] * xh[c];
            dbias[c] += dyr[c];
            dxhat[c] = dyr[c] * gain[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xh[c];
        }
        mean_d = mean_d / n;
        mean_dx = mean_dx / n;
        for c in 0..cols {
            dx[r * cols + c] = rs * (dxhat[c] - mean_d - xh[c] * mean_dx);
        }
    }
    dx
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu<T: Real>(u: T) -> T {
    let inner = T::of(GELU_K) * (u + T::of(GELU_C) * u * u * u);
    T::of(0.5) * u * (T::one() + inner.tanh())
}

pub fn gelu_grad<T: Real>(u: T) -> T {
    let k = T::of(GELU_K);
    let c = T::of(GELU_C);
    let t = (k * (u + c * u * u * u)).tanh();
    let half = T::of(0.5);
    half * (T::one() + t) + half * u * (T::one() - t * t) * k * (T::one() + T::of(3.0) * c * u * u)
}

/// Numerically stable softmax in place over the entries where `allowed` is set;
/// the rest become zero.
pub fn masked_softmax<T: Real>(row: &mut [T], allowed: &[bool]) {
    let max = row
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .fold(T::neg_infinity(), |m, (&v, _)| m.max(v));
    let mut sum = T::zero();
    for (v, &a) in row.iter_mut().zip(allowed) {
        *v = if a { (*v - max).exp() } else { T::zero() };
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}
