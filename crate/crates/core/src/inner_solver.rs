//! Inner solves with the shifted operators, carried out entirely in the
//! refinement precision.

use serde::{Deserialize, Serialize};

use crate::error::{GadiError, Result};
use crate::linalg::kernels::{csr_matvec, dispatch, dot_typed, to_f64, to_real};
use crate::linalg::{BandLu, SparseMatrix};
use crate::precision::{FloatFormat, Half, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    LuDirect,
    Cg,
    Gmres,
}

impl std::str::FromStr for InnerMethod {
    type Err = GadiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lu" | "lu_direct" | "direct" => Ok(InnerMethod::LuDirect),
            "cg" => Ok(InnerMethod::Cg),
            "gmres" => Ok(InnerMethod::Gmres),
            other => Err(GadiError::Parse(format!("unknown inner method `{other}`"))),
        }
    }
}

/// Reference norm for the Krylov stopping test `||rhs - A z|| <= eps * ref`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerTolerance {
    /// The first outer residual, cached for the whole solve.
    InitialResidual,
    /// The right-hand side of the current inner system.
    CurrentRhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverSpec {
    pub method: InnerMethod,
    pub tol_epsilon: f64,
    pub max_inner_iters: usize,
    /// GMRES restart length.
    pub restart: usize,
    pub tolerance_reference: InnerTolerance,
}

impl Default for InnerSolverSpec {
    fn default() -> Self {
        Self {
            method: InnerMethod::LuDirect,
            tol_epsilon: 1e-2,
            max_inner_iters: 1000,
            restart: 30,
            tolerance_reference: InnerTolerance::InitialResidual,
        }
    }
}

impl InnerSolverSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tol_epsilon.is_nan() || self.tol_epsilon <= 0.0 {
            return Err(GadiError::Parameter("inner tolerance must be positive".into()));
        }
        if self.max_inner_iters == 0 || self.restart == 0 {
            return Err(GadiError::Parameter("inner iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// A banded LU factorization held in its working format.
#[derive(Debug, Clone, PartialEq)]
pub enum Factorization {
    Half(BandLu<Half>),
    Single(BandLu<f32>),
    Double(BandLu<f64>),
}

pub fn factorize(a: &SparseMatrix, fmt: FloatFormat) -> Result<Factorization> {
    Ok(match fmt {
        FloatFormat::Half => Factorization::Half(BandLu::factor(a)?),
        FloatFormat::Single => Factorization::Single(BandLu::factor(a)?),
        FloatFormat::Double => Factorization::Double(BandLu::factor(a)?),
    })
}

fn solve_with<T: Real>(lu: &BandLu<T>, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x: Vec<T> = to_real(rhs);
    lu.solve_in_place(&mut x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GadiError::OverflowDetected(format!("{} triangular solve", T::FORMAT)));
    }
    Ok(to_f64(&x))
}

impl Factorization {
    pub fn format(&self) -> FloatFormat {
        match self {
            Factorization::Half(_) => FloatFormat::Half,
            Factorization::Single(_) => FloatFormat::Single,
            Factorization::Double(_) => FloatFormat::Double,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Factorization::Half(f) => f.dim(),
            Factorization::Single(f) => f.dim(),
            Factorization::Double(f) => f.dim(),
        }
    }

    /// `(perm, L, U)` with `A[perm[i], :] = (LU)[i, :]`.
    pub fn explicit_factors(&self) -> (Vec<usize>, SparseMatrix, SparseMatrix) {
        match self {
            Factorization::Half(f) => f.explicit_factors(),
            Factorization::Single(f) => f.explicit_factors(),
            Factorization::Double(f) => f.explicit_factors(),
        }
    }
}

/// Forward and back substitution in the factorization's format.
pub fn solve_factored(f: &Factorization, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != f.dim() {
        return Err(GadiError::DimensionMismatch(format!("rhs length {} for order {}", rhs.len(), f.dim())));
    }
    match f {
        Factorization::Half(lu) => solve_with(lu, rhs),
        Factorization::Single(lu) => solve_with(lu, rhs),
        Factorization::Double(lu) => solve_with(lu, rhs),
    }
}

/// Outcome of a Krylov solve that may have stopped short of the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub residual: f64,
    pub converged: bool,
}

/// CG or restarted GMRES with every kernel operation in `fmt`.
///
/// Stops once the binary64 norm of the (recurred, `fmt`-valued) residual is at
/// most `spec.tol_epsilon * stop_norm`.
pub fn krylov_solve(
    a: &SparseMatrix,
    rhs: &[f64],
    spec: &InnerSolverSpec,
    fmt: FloatFormat,
    stop_norm: f64,
) -> Result<(Vec<f64>, usize)> {
    let out = krylov_outcome(a, rhs, spec, fmt, stop_norm)?;
    if !out.converged {
        return Err(GadiError::InnerStagnation { iters: out.iters, residual: out.residual });
    }
    Ok((out.x, out.iters))
}

pub(crate) fn krylov_outcome(
    a: &SparseMatrix,
    rhs: &[f64],
    spec: &InnerSolverSpec,
    fmt: FloatFormat,
    stop_norm: f64,
) -> Result<KrylovOutcome> {
    spec.validate()?;
    if !a.is_square() || rhs.len() != a.n_rows() {
        return Err(GadiError::DimensionMismatch("krylov operator and rhs".into()));
    }
    let tol = spec.tol_epsilon * stop_norm;
    let out = match spec.method {
        InnerMethod::Cg => dispatch!(fmt, cg(a, rhs, tol, spec.max_inner_iters)),
        InnerMethod::Gmres => dispatch!(fmt, gmres(a, rhs, tol, spec.max_inner_iters, spec.restart)),
        InnerMethod::LuDirect => {
            return Err(GadiError::Parameter("krylov_solve called with lu_direct".into()));
        }
    };
    if out.x.iter().any(|v| !v.is_finite()) {
        return Err(GadiError::OverflowDetected(format!("{fmt} {:?} iterate", spec.method)));
    }
    Ok(out)
}

fn norm_f64<T: Real>(v: &[T]) -> f64 {
    let w = to_f64(v);
    crate::linalg::norm2_f64(&w)
}

fn cg<T: Real>(a: &SparseMatrix, rhs: &[f64], tol: f64, max_iters: usize) -> KrylovOutcome {
    let n = rhs.len();
    let vals: Vec<T> = to_real(a.values());
    let mut x = vec![T::ZERO; n];
    let mut r: Vec<T> = to_real(rhs);
    let mut p = r.clone();
    let mut q = vec![T::ZERO; n];
    let mut rr = dot_typed(&r, &r);
    let mut res = norm_f64(&r);
    let mut iters = 0;
    while res > tol && iters < max_iters {
        csr_matvec(a, &vals, &p, &mut q);
        let pq = dot_typed(&p, &q);
        if pq == T::ZERO || !pq.is_finite() {
            break;
        }
        let step = rr / pq;
        for i in 0..n {
            x[i] = x[i] + step * p[i];
            r[i] = r[i] - step * q[i];
        }
        let rr_new = dot_typed(&r, &r);
        iters += 1;
        res = norm_f64(&r);
        if !res.is_finite() || rr == T::ZERO {
            break;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    KrylovOutcome { x: to_f64(&x), iters, residual: res, converged: res <= tol }
}

fn givens<T: Real>(f: T, g: T) -> (T, T) {
    if g == T::ZERO {
        return (T::ONE, T::ZERO);
    }
    let r = T::from_f64((f.to_f64() * f.to_f64() + g.to_f64() * g.to_f64()).sqrt());
    (f / r, g / r)
}

fn gmres<T: Real>(a: &SparseMatrix, rhs: &[f64], tol: f64, max_iters: usize, restart: usize) -> KrylovOutcome {
    let n = rhs.len();
    let vals: Vec<T> = to_real(a.values());
    let b: Vec<T> = to_real(rhs);
    let mut x = vec![T::ZERO; n];
    let mut iters = 0;
    let mut ax = vec![T::ZERO; n];
    let mut r = b.clone();
    let mut res = norm_f64(&r);
    while res > tol && iters < max_iters {
        let beta = T::from_f64(res);
        let mut basis: Vec<Vec<T>> = vec![r.iter().map(|&v| v / beta).collect()];
        let mut h: Vec<Vec<T>> = Vec::new();
        let mut cs: Vec<(T, T)> = Vec::new();
        let mut g = vec![beta];
        let mut w = vec![T::ZERO; n];
        let mut inner_res = res;
        while basis.len() <= restart && iters < max_iters && inner_res > tol {
            let j = basis.len() - 1;
            csr_matvec(a, &vals, &basis[j], &mut w);
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot_typed(&w, v);
                for (wk, &vk) in w.iter_mut().zip(v) {
                    *wk = *wk - hij * vk;
                }
                col.push(hij);
            }
            let hnext = T::from_f64(norm_f64(&w));
            col.push(hnext);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (u, v) = (col[i], col[i + 1]);
                col[i] = c * u + s * v;
                col[i + 1] = c * v - s * u;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = T::ZERO;
            let gj = g[j];
            g[j] = c * gj;
            g.push(-(s * gj));
            cs.push((c, s));
            h.push(col);
            iters += 1;
            inner_res = g[j + 1].to_f64().abs();
            if hnext == T::ZERO || !hnext.is_finite() {
                break;
            }
            basis.push(w.iter().map(|&v| v / hnext).collect());
        }
        // back substitution on the triangular Hessenberg factor
        let k = h.len();
        let mut y = vec![T::ZERO; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for jj in i + 1..k {
                acc = acc - h[jj][i] * y[jj];
            }
            y[i] = acc / h[i][i];
        }
        for (jj, yj) in y.iter().enumerate() {
            for (xi, &vi) in x.iter_mut().zip(&basis[jj]) {
                *xi = *xi + *yj * vi;
            }
        }
        csr_matvec(a, &vals, &x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let new_res = norm_f64(&r);
        if !new_res.is_finite() || new_res >= res && k == 0 {
            res = new_res;
            break;
        }
        res = new_res;
    }
    KrylovOutcome { x: to_f64(&x), iters, residual: res, converged: res <= tol }
}
