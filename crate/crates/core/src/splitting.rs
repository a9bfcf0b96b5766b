//! Splittings `A = M + N`, the shifted pair `H = aI + M`, `S = aI + N`, and
//! the condition quantities that drive the choice of shift.

use serde::{Deserialize, Serialize};

use crate::error::{GadiError, Result};
use crate::linalg::{sigma_extremes, SparseMatrix};
use crate::precision::FloatFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// Symmetric / skew-symmetric parts.
    Hss,
    /// User-supplied `(M, N)`.
    Explicit,
    /// Sylvester coefficient pair `(A, B)`.
    SylvesterAb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splitting {
    pub m: SparseMatrix,
    pub n: SparseMatrix,
    pub kind: SplitKind,
}

impl Splitting {
    /// Explicit splitting; `m + n` must reproduce `a` to one binary64 ulp.
    pub fn explicit(a: &SparseMatrix, m: SparseMatrix, n: SparseMatrix) -> Result<Self> {
        let sum = m.add(&n)?;
        if sum.n_rows() != a.n_rows() || sum.n_cols() != a.n_cols() {
            return Err(GadiError::DimensionMismatch("splitting does not match A".into()));
        }
        let diff = sum.linear_combination(1.0, a, -1.0)?;
        for (i, j, d) in diff.iter() {
            let scale = a.get(i, j).abs().max(f64::MIN_POSITIVE);
            if d.abs() > scale * f64::EPSILON {
                return Err(GadiError::Parameter(format!("M + N differs from A at ({i}, {j})")));
            }
        }
        Ok(Self { m, n, kind: SplitKind::Explicit })
    }

    pub fn dim(&self) -> usize {
        self.m.n_rows()
    }
}

/// `M = (A + A^T)/2`, `N = (A - A^T)/2`.
pub fn hss_split(a: &SparseMatrix) -> Result<Splitting> {
    if !a.is_square() {
        return Err(GadiError::DimensionMismatch("HSS split of non-square matrix".into()));
    }
    let at = a.transpose();
    let m = a.linear_combination(0.5, &at, 0.5)?;
    let n = a.linear_combination(0.5, &at, -0.5)?;
    Ok(Splitting { m, n, kind: SplitKind::Hss })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedPair {
    pub h: SparseMatrix,
    pub s: SparseMatrix,
    pub alpha: f64,
    pub omega: f64,
    /// `(2 - omega) * alpha`.
    pub p: f64,
}

pub fn check_parameters(alpha: f64, omega: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(GadiError::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if !(0.0..2.0).contains(&omega) {
        return Err(GadiError::Parameter(format!("omega must lie in [0, 2), got {omega}")));
    }
    Ok(())
}

pub fn regularize(s: &Splitting, alpha: f64, omega: f64) -> Result<RegularizedPair> {
    check_parameters(alpha, omega)?;
    Ok(RegularizedPair {
        h: s.m.shift_diagonal(alpha)?,
        s: s.n.shift_diagonal(alpha)?,
        alpha,
        omega,
        p: (2.0 - omega) * alpha,
    })
}

/// `(alpha + sigma_max(U)) / (alpha + sigma_min(U))`.
///
/// This equals `kappa_2(alpha I + U)` only for symmetric positive
/// semidefinite `U`; other inputs are rejected.
pub fn kappa2_shifted(u: &SparseMatrix, alpha: f64) -> Result<f64> {
    if alpha < 0.0 {
        return Err(GadiError::Parameter(format!("alpha must be non-negative, got {alpha}")));
    }
    if !u.is_symmetric() {
        return Err(GadiError::Parameter("kappa2_shifted needs a symmetric matrix".into()));
    }
    let (smax, smin) = sigma_extremes(u)?;
    Ok((alpha + smax) / (alpha + smin))
}

/// Singular-value extremes of both halves of a splitting, computed once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpectrum {
    pub m_max: f64,
    pub m_min: f64,
    pub n_max: f64,
    pub n_min: f64,
}

impl SplitSpectrum {
    pub fn of(s: &Splitting) -> Result<Self> {
        let (m_max, m_min) = extremes_allow_singular(&s.m)?;
        let (n_max, n_min) = extremes_allow_singular(&s.n)?;
        Ok(Self { m_max, m_min, n_max, n_min })
    }

    pub fn kappa_hat(&self, alpha: f64) -> f64 {
        let num = 4.0 * alpha * alpha + alpha * (self.m_max + self.n_max);
        let den = alpha * alpha + alpha * (self.m_min + self.n_min) + self.m_min * self.n_min;
        num / den
    }
}

// A zero matrix or odd-order skew part is singular; sigma_min = 0 is legal here.
fn extremes_allow_singular(u: &SparseMatrix) -> Result<(f64, f64)> {
    if u.nnz() == 0 {
        return Ok((0.0, 0.0));
    }
    match sigma_extremes(u) {
        Err(GadiError::SingularMatrix) => {
            let (smax, _) = sigma_extremes(&u.matmul(&u.transpose())?)?;
            Ok((smax.sqrt(), 0.0))
        }
        other => other,
    }
}

/// Closed-form composite condition quantity of the pair `(H, S)`.
pub fn kappa_hat(s: &Splitting, alpha: f64) -> Result<f64> {
    check_parameters(alpha, 0.0)?;
    Ok(SplitSpectrum::of(s)?.kappa_hat(alpha))
}

/// `kappa_2` of `U` before and after rounding its entries to `fmt`.
/// A downcast that makes the matrix singular reports `inf`.
pub fn downcast_condition_check(u: &SparseMatrix, fmt: FloatFormat) -> Result<(f64, f64)> {
    let (bmax, bmin) = sigma_extremes(u)?;
    let before = bmax / bmin;
    let after = match sigma_extremes(&u.rounded(fmt)) {
        Ok((amax, amin)) if amin > 0.0 => amax / amin,
        Ok(_) | Err(GadiError::SingularMatrix) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok((before, after))
}
