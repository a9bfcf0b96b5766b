//! Vector kernels in which every scalar operation is rounded to a format.
//!
//! The public functions take binary64 slices plus a [`FloatFormat`]; inputs
//! are rounded into the format on entry and results are returned in binary64.
//! Sparse products accumulate each row sequentially in stored column order.
//! Dot products and norms use pairwise summation, which keeps every partial
//! sum in the working format without the stagnation a running sum suffers
//! in binary16.

use crate::error::{GadiError, Result};
use crate::linalg::SparseMatrix;
use crate::precision::{round_to, FloatFormat, Real, RoundingStats};

pub(crate) fn to_real<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::from_f64(v)).collect()
}

pub(crate) fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64()).collect()
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(GadiError::DimensionMismatch(format!("{what}: length {got}, expected {want}")));
    }
    Ok(())
}

/// `y = A x` with products and running sums rounded to `T`.
#[inline]
pub(crate) fn csr_matvec<T: Real>(a: &SparseMatrix, values: &[T], x: &[T], y: &mut [T]) {
    let row_ptr = a.row_ptr();
    let cols = a.col_idx();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = T::ZERO;
        for k in row_ptr[i]..row_ptr[i + 1] {
            acc = acc + values[k] * x[cols[k]];
        }
        *yi = acc;
    }
}

/// `s = b - A x` entirely in `T`.
#[inline]
pub(crate) fn csr_residual<T: Real>(a: &SparseMatrix, values: &[T], x: &[T], b: &[T], s: &mut [T]) {
    let row_ptr = a.row_ptr();
    let cols = a.col_idx();
    for (i, si) in s.iter_mut().enumerate() {
        let mut acc = T::ZERO;
        for k in row_ptr[i]..row_ptr[i + 1] {
            acc = acc + values[k] * x[cols[k]];
        }
        *si = b[i] - acc;
    }
}

fn pairwise<T: Real>(n: usize, term: &impl Fn(usize) -> T, lo: usize) -> T {
    if n <= 8 {
        let mut acc = T::ZERO;
        for i in lo..lo + n {
            acc = acc + term(i);
        }
        return acc;
    }
    let half = n / 2;
    pairwise(half, term, lo) + pairwise(n - half, term, lo + half)
}

pub(crate) fn dot_typed<T: Real>(x: &[T], y: &[T]) -> T {
    pairwise(x.len(), &|i| x[i] * y[i], 0)
}

/// Max-scaled two-norm: `m * sqrt(sum((x_i / m)^2))`, every step in `T`.
pub(crate) fn norm2_typed<T: Real>(x: &[T]) -> T {
    let m = x.iter().fold(T::ZERO, |acc, v| if v.abs() > acc { v.abs() } else { acc });
    if m == T::ZERO || !m.is_finite() {
        return m;
    }
    let sum = pairwise(
        x.len(),
        &|i| {
            let q = x[i] / m;
            q * q
        },
        0,
    );
    m * T::from_f64(sum.to_f64().sqrt())
}

macro_rules! dispatch {
    ($fmt:expr, $f:ident ( $($arg:expr),* )) => {
        match $fmt {
            $crate::precision::FloatFormat::Half => $f::<$crate::precision::Half>($($arg),*),
            $crate::precision::FloatFormat::Single => $f::<f32>($($arg),*),
            $crate::precision::FloatFormat::Double => $f::<f64>($($arg),*),
        }
    };
}
pub(crate) use dispatch;

fn matvec_impl<T: Real>(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let values: Vec<T> = to_real(a.values());
    let xt: Vec<T> = to_real(x);
    let mut y = vec![T::ZERO; a.n_rows()];
    csr_matvec(a, &values, &xt, &mut y);
    to_f64(&y)
}

/// Sparse matrix-vector product in `fmt`.
pub fn matvec(a: &SparseMatrix, x: &[f64], fmt: FloatFormat) -> Result<Vec<f64>> {
    matvec_tracked(a, x, fmt, &mut RoundingStats::new())
}

pub fn matvec_tracked(a: &SparseMatrix, x: &[f64], fmt: FloatFormat, stats: &mut RoundingStats) -> Result<Vec<f64>> {
    check_len("matvec", x.len(), a.n_cols())?;
    let y = dispatch!(fmt, matvec_impl(a, x));
    stats.add_ops(fmt, 2 * a.nnz() as u64);
    stats.observe_output(&y, fmt);
    Ok(y)
}

fn residual_impl<T: Real>(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let values: Vec<T> = to_real(a.values());
    let xt: Vec<T> = to_real(x);
    let bt: Vec<T> = to_real(b);
    let mut s = vec![T::ZERO; a.n_rows()];
    csr_residual(a, &values, &xt, &bt, &mut s);
    to_f64(&s)
}

/// Two-stage residual: `s = b - A x` in `u_f`, then rounded to `u_r`.
pub fn residual(a: &SparseMatrix, x: &[f64], b: &[f64], u_f: FloatFormat, u_r: FloatFormat) -> Result<Vec<f64>> {
    residual_tracked(a, x, b, u_f, u_r, &mut RoundingStats::new())
}

pub fn residual_tracked(
    a: &SparseMatrix,
    x: &[f64],
    b: &[f64],
    u_f: FloatFormat,
    u_r: FloatFormat,
    stats: &mut RoundingStats,
) -> Result<Vec<f64>> {
    check_len("residual x", x.len(), a.n_cols())?;
    check_len("residual b", b.len(), a.n_rows())?;
    let s = dispatch!(u_f, residual_impl(a, x, b));
    stats.add_ops(u_f, (2 * a.nnz() + a.n_rows()) as u64);
    stats.observe_output(&s, u_f);
    Ok(round_vector_tracked(&s, u_r, stats))
}

/// Round a vector into `fmt`, counting range events.
pub fn round_vector_tracked(s: &[f64], fmt: FloatFormat, stats: &mut RoundingStats) -> Vec<f64> {
    if fmt == FloatFormat::Double {
        return s.to_vec();
    }
    s.iter()
        .map(|&v| {
            let r = round_to(v, fmt);
            stats.observe(v, r, fmt);
            r
        })
        .collect()
}

fn dot_impl<T: Real>(x: &[f64], y: &[f64]) -> f64 {
    dot_typed::<T>(&to_real(x), &to_real(y)).to_f64()
}

pub fn dot(x: &[f64], y: &[f64], fmt: FloatFormat) -> Result<f64> {
    check_len("dot", y.len(), x.len())?;
    Ok(dispatch!(fmt, dot_impl(x, y)))
}

fn norm2_impl<T: Real>(x: &[f64]) -> f64 {
    norm2_typed::<T>(&to_real(x)).to_f64()
}

pub fn norm2(x: &[f64], fmt: FloatFormat) -> f64 {
    dispatch!(fmt, norm2_impl(x))
}

fn axpy_impl<T: Real>(alpha: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    let a = T::from_f64(alpha);
    x.iter().zip(y).map(|(&xi, &yi)| (T::from_f64(yi) + a * T::from_f64(xi)).to_f64()).collect()
}

/// `alpha * x + y` in `fmt`.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64], fmt: FloatFormat) -> Result<Vec<f64>> {
    check_len("axpy", y.len(), x.len())?;
    Ok(dispatch!(fmt, axpy_impl(alpha, x, y)))
}

/// Binary64 two-norm without rounding, used for stopping tests.
pub fn norm2_f64(x: &[f64]) -> f64 {
    norm2_typed::<f64>(x)
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_identity_and_tridiagonal() {
        let i3 = SparseMatrix::identity(3);
        assert_eq!(matvec(&i3, &[1.0, 2.0, 3.0], FloatFormat::Half).unwrap(), vec![1.0, 2.0, 3.0]);
        let t = SparseMatrix::tridiagonal(3, -1.0, 2.0, -1.0);
        assert_eq!(matvec(&t, &[1.0; 3], FloatFormat::Double).unwrap(), vec![1.0, 0.0, 1.0]);
        assert!(matvec(&t, &[1.0; 2], FloatFormat::Double).is_err());
    }

    #[test]
    fn matvec_overflows_in_half() {
        let t: Vec<_> = (0..5000).map(|j| (0, j, 100.0)).collect();
        let mut t2 = t.clone();
        t2.push((1, 0, 1.0));
        let a = SparseMatrix::from_triplets(2, 5000, &t2).unwrap();
        let mut stats = RoundingStats::new();
        let y = matvec_tracked(&a, &vec![1.0; 5000], FloatFormat::Half, &mut stats).unwrap();
        assert_eq!(y[0], f64::INFINITY);
        assert_eq!(y[1], 1.0);
        assert_eq!(stats.overflow_count, 1);
        // binary64 has no trouble
        assert_eq!(matvec(&a, &vec![1.0; 5000], FloatFormat::Double).unwrap()[0], 500000.0);
    }

    #[test]
    fn residual_zero_at_exact_solution() {
        let t = SparseMatrix::tridiagonal(5, -1.0, 4.0, -2.0);
        let x = vec![1.0; 5];
        let b = t.mul_vec(&x);
        let r = residual(&t, &x, &b, FloatFormat::Double, FloatFormat::Double).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let id = SparseMatrix::identity(3);
        let b = [0.1, 1e5, -3.3];
        let r = residual(&id, &[0.0; 3], &b, FloatFormat::Half, FloatFormat::Half).unwrap();
        let expect: Vec<f64> = b.iter().map(|&v| round_to(v, FloatFormat::Half)).collect();
        assert_eq!(r, expect);
    }

    #[test]
    fn norms_and_dots() {
        assert_eq!(norm2(&[3.0, 4.0], FloatFormat::Double), 5.0);
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0], FloatFormat::Half).unwrap(), 0.0);
        // sum of squares is 1e6, far beyond binary16 range
        let v = vec![10.0; 10_000];
        let n = norm2(&v, FloatFormat::Half);
        assert!((n - 1000.0).abs() <= 1000.0 * 4.0 * FloatFormat::Half.unit_roundoff(), "{n}");
        assert_eq!(norm2(&[0.0; 4], FloatFormat::Half), 0.0);
        assert_eq!(norm2_f64(&[1e200, 1e200]), 2f64.sqrt() * 1e200);
    }

    #[test]
    fn axpy_rounds() {
        let y = axpy(0.25, &[1.0], &[1024.0], FloatFormat::Half).unwrap();
        assert_eq!(y, vec![1024.0]);
        let y = axpy(0.25, &[1.0], &[1024.0], FloatFormat::Single).unwrap();
        assert_eq!(y, vec![1024.25]);
    }
}
