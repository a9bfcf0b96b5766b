//! Singular-value extremes and spectral radii.

use nalgebra::linalg::Schur;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GadiError, Result};
use crate::linalg::{norm2_f64, BandLu, DenseMatrix, SparseMatrix};

/// Largest order densified for exact SVD / eigenvalue oracles.
pub const DENSE_CAP: usize = 1024;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 200_000;

/// `(sigma_max, sigma_min)` of a square matrix.
pub fn sigma_extremes(a: &SparseMatrix) -> Result<(f64, f64)> {
    sigma_extremes_with_cap(a, DENSE_CAP)
}

/// [`sigma_extremes`] with an explicit densification threshold.
///
/// Up to `dense_cap` this is a dense binary64 SVD. Above it, `sigma_max`
/// comes from power iteration on `A^T A` and `sigma_min` from inverse power
/// iteration using binary64 banded LU factors of `A` and `A^T`.
pub fn sigma_extremes_with_cap(a: &SparseMatrix, dense_cap: usize) -> Result<(f64, f64)> {
    if !a.is_square() {
        return Err(GadiError::DimensionMismatch("sigma_extremes of non-square matrix".into()));
    }
    let n = a.n_rows();
    if n == 0 {
        return Err(GadiError::DimensionMismatch("empty matrix".into()));
    }
    if n <= dense_cap {
        let sv = a.to_dense().to_nalgebra().singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        return Ok((max, min));
    }
    let at = a.transpose();
    let sigma_max = power_iteration(n, |v| at.mul_vec(&a.mul_vec(v)))?.sqrt();
    let lu = BandLu::<f64>::factor(a).map_err(singular)?;
    let lut = BandLu::<f64>::factor(&at).map_err(singular)?;
    let inv = power_iteration(n, |v| {
        let mut w = v.to_vec();
        lut.solve_in_place(&mut w);
        lu.solve_in_place(&mut w);
        w
    })?;
    Ok((sigma_max, 1.0 / inv.sqrt()))
}

fn singular(e: GadiError) -> GadiError {
    match e {
        GadiError::SingularInPrecision { .. } => GadiError::SingularMatrix,
        other => other,
    }
}

fn start_vector(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm2_f64(&v);
    v.into_iter().map(|x| x / nv).collect()
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator.
fn power_iteration(n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> Result<f64> {
    let mut v = start_vector(n);
    let mut prev = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = apply(&v);
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let nw = norm2_f64(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (rayleigh - prev).abs() <= POWER_TOL * rayleigh.abs() {
            return Ok(rayleigh);
        }
        prev = rayleigh;
    }
    Err(GadiError::IterationLimit(format!("power iteration did not settle in {POWER_MAX_ITERS} steps")))
}

/// Largest eigenvalue modulus of a dense matrix via real Schur form.
pub fn spectral_radius(t: &DenseMatrix) -> Result<f64> {
    if t.n_rows() != t.n_cols() {
        return Err(GadiError::DimensionMismatch("spectral radius of non-square matrix".into()));
    }
    let schur = Schur::try_new(t.to_nalgebra(), 1e-14, 100_000)
        .ok_or_else(|| GadiError::IterationLimit("Schur decomposition".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Estimate `rho(T) = lim ||T^k v||^(1/k)` for an operator given by its action.
///
/// The asymptotic rate is averaged over the second half of `iters` steps, with
/// renormalisation every step.
pub fn spectral_radius_estimate(n: usize, iters: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> f64 {
    let mut v = start_vector(n);
    let mut log_growth = 0.0;
    let burn_in = iters / 2;
    for k in 0..iters {
        let w = apply(&v);
        let nw = norm2_f64(&w);
        if nw == 0.0 {
            return 0.0;
        }
        if k >= burn_in {
            log_growth += nw.ln();
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    (log_growth / (iters - burn_in) as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sigma_of_simple_matrices() {
        let (mx, mn) = sigma_extremes(&SparseMatrix::identity(5)).unwrap();
        assert!((mx - 1.0).abs() < 1e-14 && (mn - 1.0).abs() < 1e-14);
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let (mx, mn) = sigma_extremes(&SparseMatrix::diagonal(&d)).unwrap();
        assert!((mx - 10.0).abs() < 1e-12 && (mn - 1.0).abs() < 1e-12);
        let t = SparseMatrix::tridiagonal(4, -1.0, 2.0, -1.0);
        let (mx, mn) = sigma_extremes(&t).unwrap();
        let c = (PI / 5.0).cos();
        assert!((mx - (2.0 + 2.0 * c)).abs() < 1e-12);
        assert!((mn - (2.0 - 2.0 * c)).abs() < 1e-12);
    }

    #[test]
    fn iterative_path_matches_dense() {
        let t = SparseMatrix::tridiagonal(40, -1.0, 2.5, -0.7);
        let dense = sigma_extremes_with_cap(&t, 100).unwrap();
        let iter = sigma_extremes_with_cap(&t, 10).unwrap();
        assert!((dense.0 - iter.0).abs() / dense.0 < 1e-8, "{dense:?} {iter:?}");
        assert!((dense.1 - iter.1).abs() / dense.1 < 1e-8, "{dense:?} {iter:?}");
    }

    #[test]
    fn singular_detected_on_iterative_path() {
        // odd-order skew tridiagonal is singular
        let s = SparseMatrix::tridiagonal(5, 1.0, 0.0, -1.0);
        assert_eq!(sigma_extremes_with_cap(&s, 2), Err(GadiError::SingularMatrix));
    }

    #[test]
    fn spectral_radius_examples() {
        let d = DenseMatrix::from_row_major(2, 2, vec![0.5, 0.0, 0.0, -0.9]).unwrap();
        assert!((spectral_radius(&d).unwrap() - 0.9).abs() < 1e-14);
        assert_eq!(spectral_radius(&DenseMatrix::zeros(3, 3)).unwrap(), 0.0);
        // rotation scaled by 0.8 has complex eigenvalues of modulus 0.8
        let r = DenseMatrix::from_row_major(2, 2, vec![0.0, -0.8, 0.8, 0.0]).unwrap();
        assert!((spectral_radius(&r).unwrap() - 0.8).abs() < 1e-14);
        let est = spectral_radius_estimate(2, 400, |v| r.mul_vec(v));
        assert!((est - 0.8).abs() < 1e-6);
    }
}
