//! The mixed-precision GADI refinement loop, the binary64 two-half-step
//! reference iteration and the dense iteration matrix.
//!
//! One outer step of the refinement loop is
//!
//! ```text
//! r = fl_ur(b - A x)          residual formed in u_f, stored in u_r
//! (aI + M) z = r              solved in u_r
//! (aI + N) y = fl_ur(p z)     p = (2 - w) a, solved in u_r
//! x = fl_u(x + y)
//! ```
//!
//! Multiplying out shows this correction form has the same iteration matrix
//! as the two-half-step recurrence, `I - p (HS)^{-1} A`.

use serde::{Deserialize, Serialize};

use crate::error::{GadiError, Result};
use crate::inner_solver::{
    factorize, krylov_outcome, solve_factored, Factorization, InnerMethod, InnerSolverSpec, InnerTolerance,
};
use crate::linalg::kernels::{residual_tracked, round_vector_tracked};
use crate::linalg::{norm2_f64, norm_inf, BandLu, DenseMatrix, SparseMatrix};
use crate::precision::{round_to, FloatFormat, RoundingStats};
use crate::splitting::{check_parameters, regularize, RegularizedPair, Splitting};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GadiConfig {
    pub alpha: f64,
    pub omega: f64,
    /// Stop once `||r_k||^2 <= xi * ||r_0||^2`.
    pub xi: f64,
    pub u_r: FloatFormat,
    pub u: FloatFormat,
    pub u_f: FloatFormat,
    pub inner: InnerSolverSpec,
    pub max_outer_iters: usize,
    pub divergence_factor: f64,
    /// Consecutive outer steps with a bitwise unchanged iterate before the
    /// run is declared stagnant. Zero disables the check.
    pub stagnation_window: usize,
    /// Outer steps that must at least halve the best relative residual seen
    /// before them; otherwise the run has reached its floor and is declared
    /// stagnant. Zero disables the check.
    pub plateau_window: usize,
    /// Scale each residual by a power of two so its largest entry is near
    /// one before rounding to `u_r`. Off by default. The scaling is exact, so
    /// it changes results only where `u_r` would underflow or overflow.
    pub residual_scaling: bool,
}

/// Default squared tolerance for a given working precision.
pub fn default_xi(u: FloatFormat) -> f64 {
    match u {
        FloatFormat::Double => 1e-26,
        FloatFormat::Single => 1e-8,
        FloatFormat::Half => 1e-4,
    }
}

impl GadiConfig {
    /// Defaults for everything but the shift and the precision triple.
    pub fn new(alpha: f64, u_r: FloatFormat, u: FloatFormat, u_f: FloatFormat) -> Self {
        Self {
            alpha,
            omega: 1.0,
            xi: default_xi(u),
            u_r,
            u,
            u_f,
            inner: InnerSolverSpec::default(),
            max_outer_iters: 20_000,
            divergence_factor: 1e6,
            stagnation_window: 20,
            plateau_window: 1000,
            residual_scaling: false,
        }
    }

    pub fn uniform(alpha: f64, fmt: FloatFormat) -> Self {
        Self::new(alpha, fmt, fmt, fmt)
    }

    pub fn validate(&self) -> Result<()> {
        check_parameters(self.alpha, self.omega)?;
        if self.xi.is_nan() || self.xi <= 0.0 {
            return Err(GadiError::Parameter(format!("xi must be positive, got {}", self.xi)));
        }
        let (u, uf, ur) = (self.u.unit_roundoff(), self.u_f.unit_roundoff(), self.u_r.unit_roundoff());
        if !(u <= uf && uf <= ur) {
            return Err(GadiError::Parameter(format!(
                "precisions must satisfy u <= u_f <= u_r (got u={}, u_f={}, u_r={})",
                self.u, self.u_f, self.u_r
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(GadiError::Parameter("max_outer_iters must be at least 1".into()));
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Diverged,
    OverflowDetected,
    SingularInPrecision,
    /// The iterate stopped changing, or the residual stopped improving,
    /// before the tolerance was met.
    Stagnated,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub outer_iters: usize,
    /// `||r_k|| / ||r_0||`, starting with `1.0`.
    pub rel_residual_history: Vec<f64>,
    pub final_rres: f64,
    pub inner_iter_totals: usize,
    /// Inner Krylov solves that hit their iteration cap.
    pub inner_stagnations: usize,
    pub rounding: RoundingStats,
    pub message: Option<String>,
}

impl SolveReport {
    fn new() -> Self {
        Self {
            status: SolveStatus::MaxIters,
            outer_iters: 0,
            rel_residual_history: vec![1.0],
            final_rres: 1.0,
            inner_iter_totals: 0,
            inner_stagnations: 0,
            rounding: RoundingStats::new(),
            message: None,
        }
    }

    fn finish(mut self, status: SolveStatus, message: Option<String>) -> Self {
        self.status = status;
        self.message = message;
        self.outer_iters = self.rel_residual_history.len() - 1;
        self.final_rres = *self.rel_residual_history.last().expect("history is never empty");
        self
    }
}

/// Result of one inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub x: Vec<f64>,
    pub iters: usize,
    pub stagnated: bool,
}

/// The two shifted solves of one outer step, prepared for a fixed shift.
pub trait InnerStage {
    fn solve_h(&self, rhs: &[f64], stop_norm: f64) -> Result<InnerSolution>;
    fn solve_s(&self, rhs: &[f64], stop_norm: f64) -> Result<InnerSolution>;
}

/// A linear system the refinement loop can drive.
pub trait GadiSystem {
    fn dim(&self) -> usize;

    /// `b - A x` with the product and subtraction in `u_f`.
    fn residual(&self, x: &[f64], b: &[f64], u_f: FloatFormat, stats: &mut RoundingStats) -> Result<Vec<f64>>;

    /// Factor or otherwise prepare `aI + M` and `aI + N` in `fmt`.
    fn inner_stage<'a>(
        &'a self,
        alpha: f64,
        omega: f64,
        fmt: FloatFormat,
        spec: &InnerSolverSpec,
    ) -> Result<Box<dyn InnerStage + 'a>>;
}

/// An assembled sparse matrix together with its splitting.
#[derive(Debug, Clone, Copy)]
pub struct SparseSystem<'a> {
    pub a: &'a SparseMatrix,
    pub split: &'a Splitting,
}

impl<'a> SparseSystem<'a> {
    pub fn new(a: &'a SparseMatrix, split: &'a Splitting) -> Result<Self> {
        if !a.is_square() || split.dim() != a.n_rows() || split.n.n_rows() != a.n_rows() {
            return Err(GadiError::DimensionMismatch("matrix and splitting orders differ".into()));
        }
        Ok(Self { a, split })
    }
}

enum ShiftedSolver {
    Direct(Factorization),
    Krylov(SparseMatrix, InnerMethod),
}

struct SparseStage {
    h: ShiftedSolver,
    s: ShiftedSolver,
    fmt: FloatFormat,
    spec: InnerSolverSpec,
}

impl SparseStage {
    fn solve(&self, which: &ShiftedSolver, rhs: &[f64], stop_norm: f64) -> Result<InnerSolution> {
        match which {
            ShiftedSolver::Direct(f) => Ok(InnerSolution { x: solve_factored(f, rhs)?, iters: 0, stagnated: false }),
            ShiftedSolver::Krylov(m, method) => {
                let spec = InnerSolverSpec { method: *method, ..self.spec };
                let reference = match self.spec.tolerance_reference {
                    InnerTolerance::InitialResidual => stop_norm,
                    InnerTolerance::CurrentRhs => norm2_f64(rhs),
                };
                let out = krylov_outcome(m, rhs, &spec, self.fmt, reference)?;
                Ok(InnerSolution { x: out.x, iters: out.iters, stagnated: !out.converged })
            }
        }
    }
}

impl InnerStage for SparseStage {
    fn solve_h(&self, rhs: &[f64], stop_norm: f64) -> Result<InnerSolution> {
        self.solve(&self.h, rhs, stop_norm)
    }

    fn solve_s(&self, rhs: &[f64], stop_norm: f64) -> Result<InnerSolution> {
        self.solve(&self.s, rhs, stop_norm)
    }
}

impl GadiSystem for SparseSystem<'_> {
    fn dim(&self) -> usize {
        self.a.n_rows()
    }

    fn residual(&self, x: &[f64], b: &[f64], u_f: FloatFormat, stats: &mut RoundingStats) -> Result<Vec<f64>> {
        residual_tracked(self.a, x, b, u_f, u_f, stats)
    }

    fn inner_stage<'a>(
        &'a self,
        alpha: f64,
        omega: f64,
        fmt: FloatFormat,
        spec: &InnerSolverSpec,
    ) -> Result<Box<dyn InnerStage + 'a>> {
        let RegularizedPair { h, s, .. } = regularize(self.split, alpha, omega)?;
        let prepare = |m: SparseMatrix| -> Result<ShiftedSolver> {
            Ok(match spec.method {
                InnerMethod::LuDirect => ShiftedSolver::Direct(factorize(&m, fmt)?),
                // CG needs a symmetric operator; a nonsymmetric one goes to GMRES.
                InnerMethod::Cg if !m.is_symmetric() => ShiftedSolver::Krylov(m, InnerMethod::Gmres),
                method => ShiftedSolver::Krylov(m, method),
            })
        };
        let (h, s) = (prepare(h)?, prepare(s)?);
        Ok(Box::new(SparseStage { h, s, fmt, spec: *spec }))
    }
}

/// Run the mixed-precision refinement loop from `x0`.
///
/// Every failure mode after argument validation is reported through
/// [`SolveReport::status`]; only invalid arguments return `Err`.
pub fn gadi_ir_solve<S: GadiSystem + ?Sized>(
    system: &S,
    b: &[f64],
    cfg: &GadiConfig,
    x0: &[f64],
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let n = system.dim();
    if b.len() != n || x0.len() != n {
        return Err(GadiError::DimensionMismatch(format!("system order {n}, b {}, x0 {}", b.len(), x0.len())));
    }
    let mut report = SolveReport::new();
    let mut x: Vec<f64> = x0.iter().map(|&v| round_to(v, cfg.u)).collect();
    let (mut r, mut scale) = rounded_residual(system, &x, b, cfg, &mut report.rounding)?;
    let r0 = norm2_f64(&r) / scale;
    if !r0.is_finite() {
        return Ok((x, report.finish(SolveStatus::OverflowDetected, Some("initial residual".into()))));
    }
    if r0 == 0.0 {
        return Ok((x, report.finish(SolveStatus::Converged, None)));
    }
    let stage = match system.inner_stage(cfg.alpha, cfg.omega, cfg.u_r, &cfg.inner) {
        Ok(stage) => stage,
        Err(e) => return stopped(x, report, e),
    };
    let p = round_to((2.0 - cfg.omega) * cfg.alpha, cfg.u_r);
    let target = r0 * r0 * cfg.xi;
    let mut unchanged = 0usize;
    let mut best_before_window = f64::INFINITY;

    loop {
        let nr = norm2_f64(&r) / scale;
        if nr * nr <= target {
            return Ok((x, report.finish(SolveStatus::Converged, None)));
        }
        if report.rel_residual_history.len() > cfg.max_outer_iters {
            return Ok((x, report.finish(SolveStatus::MaxIters, None)));
        }

        let z = match stage.solve_h(&r, r0 * scale) {
            Ok(z) => z,
            Err(e) => return stopped(x, report, e),
        };
        let pz: Vec<f64> = z.x.iter().map(|&v| round_to(p * v, cfg.u_r)).collect();
        report.rounding.add_ops(cfg.u_r, pz.len() as u64);
        let y = match stage.solve_s(&pz, r0 * scale) {
            Ok(y) => y,
            Err(e) => return stopped(x, report, e),
        };
        report.inner_iter_totals += z.iters + y.iters;
        report.inner_stagnations += z.stagnated as usize + y.stagnated as usize;

        let mut changed = false;
        for (xi, &yi) in x.iter_mut().zip(&y.x) {
            let next = round_to(*xi + yi / scale, cfg.u);
            changed |= next != *xi;
            *xi = next;
        }
        report.rounding.add_ops(cfg.u, n as u64);
        if x.iter().any(|v| !v.is_finite()) {
            report.rel_residual_history.push(f64::INFINITY);
            return Ok((x, report.finish(SolveStatus::OverflowDetected, Some("non-finite iterate".into()))));
        }

        (r, scale) = rounded_residual(system, &x, b, cfg, &mut report.rounding)?;
        let rel = norm2_f64(&r) / scale / r0;
        report.rel_residual_history.push(rel);
        if !rel.is_finite() {
            return Ok((x, report.finish(SolveStatus::OverflowDetected, Some("non-finite residual".into()))));
        }
        if rel > cfg.divergence_factor {
            return Ok((x, report.finish(SolveStatus::Diverged, None)));
        }
        unchanged = if changed { 0 } else { unchanged + 1 };
        if cfg.stagnation_window > 0 && unchanged >= cfg.stagnation_window && rel * rel > cfg.xi {
            return Ok((x, report.finish(SolveStatus::Stagnated, None)));
        }
        let hist = &report.rel_residual_history;
        let w = cfg.plateau_window;
        if w > 0 && hist.len() > w {
            best_before_window = best_before_window.min(hist[hist.len() - 1 - w]);
            let recent = hist[hist.len() - w..].iter().copied().fold(f64::INFINITY, f64::min);
            if recent > 0.5 * best_before_window {
                let msg = format!("no progress in {w} steps");
                return Ok((x, report.finish(SolveStatus::Stagnated, Some(msg))));
            }
        }
    }
}

/// `fl_ur(sigma (b - A x))` and the power of two `sigma` (one unless
/// scaling is enabled).
fn rounded_residual<S: GadiSystem + ?Sized>(
    system: &S,
    x: &[f64],
    b: &[f64],
    cfg: &GadiConfig,
    stats: &mut RoundingStats,
) -> Result<(Vec<f64>, f64)> {
    let mut s = system.residual(x, b, cfg.u_f, stats)?;
    let mut scale = 1.0;
    if cfg.residual_scaling {
        let m = norm_inf(&s);
        if m > 0.0 && m.is_finite() {
            scale = 2f64.powi(-m.log2().floor() as i32);
            s.iter_mut().for_each(|v| *v *= scale);
        }
    }
    Ok((round_vector_tracked(&s, cfg.u_r, stats), scale))
}

/// Numerical failures end the run with a status; bad configurations are
/// returned as errors.
fn stopped(x: Vec<f64>, report: SolveReport, e: GadiError) -> Result<(Vec<f64>, SolveReport)> {
    match e {
        GadiError::Parameter(_) | GadiError::DimensionMismatch(_) | GadiError::Parse(_) => Err(e),
        _ => {
            let status = status_of(&e);
            Ok((x, report.finish(status, Some(e.to_string()))))
        }
    }
}

fn status_of(e: &GadiError) -> SolveStatus {
    match e {
        GadiError::SingularInPrecision { .. } | GadiError::SingularMatrix => SolveStatus::SingularInPrecision,
        GadiError::InnerStagnation { .. } => SolveStatus::Stagnated,
        _ => SolveStatus::OverflowDetected,
    }
}

/// Uniform binary64 GADI via its two half-steps:
///
/// ```text
/// (aI + M) x_half = (aI - N) x + b
/// (aI + N) x_next = (N - (1 - w) a I) x + (2 - w) a x_half
/// ```
///
/// Stops once `||b - A x|| <= tol * ||b - A x0||`.
#[allow(clippy::too_many_arguments)]
pub fn gadi_reference_solve(
    a: &SparseMatrix,
    b: &[f64],
    s: &Splitting,
    alpha: f64,
    omega: f64,
    tol: f64,
    max_iters: usize,
    x0: &[f64],
) -> Result<(Vec<f64>, SolveReport)> {
    SparseSystem::new(a, s)?;
    let n = a.n_rows();
    if b.len() != n || x0.len() != n {
        return Err(GadiError::DimensionMismatch("reference solve vectors".into()));
    }
    let pair = regularize(s, alpha, omega)?;
    let mut report = SolveReport::new();
    let mut x = x0.to_vec();
    let residual = |x: &[f64]| -> Vec<f64> { a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let r0 = norm2_f64(&residual(&x));
    if r0 == 0.0 {
        return Ok((x, report.finish(SolveStatus::Converged, None)));
    }
    let (hf, sf) = match (BandLu::<f64>::factor(&pair.h), BandLu::<f64>::factor(&pair.s)) {
        (Ok(h), Ok(s)) => (h, s),
        (Err(e), _) | (_, Err(e)) => return stopped(x, report, e),
    };
    let shift = (1.0 - omega) * alpha;
    loop {
        let rel = *report.rel_residual_history.last().unwrap();
        if rel <= tol {
            return Ok((x, report.finish(SolveStatus::Converged, None)));
        }
        if report.rel_residual_history.len() > max_iters {
            return Ok((x, report.finish(SolveStatus::MaxIters, None)));
        }
        let nx = s.n.mul_vec(&x);
        let mut half: Vec<f64> = (0..n).map(|i| alpha * x[i] - nx[i] + b[i]).collect();
        hf.solve_in_place(&mut half);
        let mut next: Vec<f64> = (0..n).map(|i| nx[i] - shift * x[i] + pair.p * half[i]).collect();
        sf.solve_in_place(&mut next);
        x = next;
        let rel = norm2_f64(&residual(&x)) / r0;
        report.rel_residual_history.push(rel);
        if !rel.is_finite() {
            return Ok((x, report.finish(SolveStatus::OverflowDetected, None)));
        }
        if rel > 1e6 {
            return Ok((x, report.finish(SolveStatus::Diverged, None)));
        }
    }
}

/// `T = (aI + N)^{-1} (aI + M)^{-1} (a^2 I + M N - (1 - w) a A)`, dense.
pub fn iteration_matrix(a: &SparseMatrix, s: &Splitting, alpha: f64, omega: f64) -> Result<DenseMatrix> {
    SparseSystem::new(a, s)?;
    let n = a.n_rows();
    if n > crate::linalg::DENSE_CAP {
        return Err(GadiError::Parameter(format!("order {n} exceeds the dense limit")));
    }
    let pair = regularize(s, alpha, omega)?;
    let h_inv = pair.h.to_dense().inverse()?;
    let s_inv = pair.s.to_dense().inverse()?;
    let mn = s.m.to_dense().matmul(&s.n.to_dense())?;
    let core = DenseMatrix::identity(n).linear_combination(alpha * alpha, &mn, 1.0).linear_combination(
        1.0,
        &a.to_dense(),
        -(1.0 - omega) * alpha,
    );
    s_inv.matmul(&h_inv.matmul(&core)?)
}
