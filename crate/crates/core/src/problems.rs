//! Test-problem generators: a 3D convection-diffusion operator and a
//! continuous Sylvester equation, both with all-ones exact solutions.

use std::str::FromStr;

use crate::error::{GadiError, Result};
use crate::gadi::{gadi_ir_solve, GadiConfig, GadiSystem, InnerSolution, InnerStage, SolveReport, SparseSystem};
use crate::inner_solver::{factorize, solve_factored, Factorization, InnerMethod, InnerSolverSpec};
use crate::linalg::kernels::{dispatch, to_f64, to_real};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::precision::{FloatFormat, Real, RoundingStats};
use crate::splitting::{check_parameters, hss_split, SplitKind, Splitting};

/// Centered-difference convection-diffusion on the unit cube, `n` interior
/// points per direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvDiff3DSpec {
    pub n: usize,
}

impl ConvDiff3DSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(GadiError::Parameter(format!("convdiff3d needs n >= 2, got {n}")));
        }
        Ok(Self { n })
    }

    pub fn r(&self) -> f64 {
        1.0 / (2.0 * self.n as f64 + 2.0)
    }

    /// `(t1, t2, t3)`: diagonal, sub- and super-diagonal of the `x` factor.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        let r = self.r();
        (6.0, -1.0 - r, -1.0 + r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    pub a: SparseMatrix,
    pub x_exact: Vec<f64>,
    pub b: Vec<f64>,
}

/// `A = Tx ⊗ I ⊗ I + I ⊗ Ty ⊗ I + I ⊗ I ⊗ Tz`, `x = ones`, `b = A x`.
pub fn build_convdiff3d(spec: ConvDiff3DSpec) -> LinearProblem {
    let n = spec.n;
    let (t1, t2, t3) = spec.coefficients();
    let tx = SparseMatrix::tridiagonal(n, t2, t1, t3);
    let ty = SparseMatrix::tridiagonal(n, t2, 0.0, t3);
    let id = SparseMatrix::identity(n);
    let id2 = SparseMatrix::identity(n * n);
    let a = tx
        .kron(&id2)
        .add(&id.kron(&ty).kron(&id))
        .and_then(|m| m.add(&id2.kron(&ty)))
        .expect("conforming Kronecker terms");
    let x_exact = vec![1.0; n * n * n];
    let b = a.mul_vec(&x_exact);
    LinearProblem { a, x_exact, b }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SylvesterSpec {
    pub n: usize,
    pub r: f64,
}

impl SylvesterSpec {
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n < 2 {
            return Err(GadiError::Parameter(format!("sylvester needs n >= 2, got {n}")));
        }
        if r.is_nan() || r <= 0.0 {
            return Err(GadiError::Parameter(format!("sylvester needs r > 0, got {r}")));
        }
        Ok(Self { n, r })
    }
}

/// `A X + X B + C = 0` with `X = ones`.
#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterProblem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub c_rhs: DenseMatrix,
    pub x_exact: DenseMatrix,
}

impl SylvesterProblem {
    /// `F = -C = A X + X B`, column-major, as the right-hand side of the
    /// vectorized system.
    pub fn rhs_vec(&self) -> Vec<f64> {
        let (m, n) = (self.c_rhs.n_rows(), self.c_rhs.n_cols());
        let mut f = Vec::with_capacity(m * n);
        for j in 0..n {
            for i in 0..m {
                f.push(-self.c_rhs.get(i, j));
            }
        }
        f
    }

    pub fn operator(&self) -> Result<SylvesterOperator> {
        SylvesterOperator::new(self.a.clone(), self.b.clone())
    }
}

/// `A = B = Tridiag(-1, 2, -1) + 2 r Tridiag(0.5, 0, -0.5) + 100/(n+1)^2 I`,
/// with tridiagonals written (sub, diag, super).
pub fn build_sylvester(spec: SylvesterSpec) -> SylvesterProblem {
    let n = spec.n;
    let shift = 100.0 / ((n + 1) * (n + 1)) as f64;
    let lap = SparseMatrix::tridiagonal(n, -1.0, 2.0, -1.0);
    let conv = SparseMatrix::tridiagonal(n, 0.5, 0.0, -0.5);
    let a = lap
        .linear_combination(1.0, &conv, 2.0 * spec.r)
        .and_then(|m| m.shift_diagonal(shift))
        .expect("conforming tridiagonals");
    let b = a.clone();
    let x_exact = DenseMatrix::from_fn(n, n, |_, _| 1.0);
    let ax = a.to_dense().matmul(&x_exact).expect("square");
    let xb = x_exact.matmul(&b.to_dense()).expect("square");
    let c_rhs = ax.linear_combination(-1.0, &xb, -1.0);
    SylvesterProblem { a, b, c_rhs, x_exact }
}

/// `vec(X) -> vec(A X + X B)` on column-major `vec`, with the splitting
/// `M = I ⊗ A`, `N = B^T ⊗ I`. Kronecker products are never formed.
#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterOperator {
    a: SparseMatrix,
    b: SparseMatrix,
    bt: SparseMatrix,
}

impl SylvesterOperator {
    pub fn new(a: SparseMatrix, b: SparseMatrix) -> Result<Self> {
        if !a.is_square() || !b.is_square() {
            return Err(GadiError::DimensionMismatch("Sylvester coefficients must be square".into()));
        }
        let bt = b.transpose();
        Ok(Self { a, b, bt })
    }

    /// Rows of `X` (order of `A`) and columns (order of `B`).
    pub fn shape(&self) -> (usize, usize) {
        (self.a.n_rows(), self.b.n_rows())
    }

    pub fn kind(&self) -> SplitKind {
        SplitKind::SylvesterAb
    }

    /// `vec(A X + X B)` in binary64.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = self.shape();
        if x.len() != m * n {
            return Err(GadiError::DimensionMismatch(format!("vec length {} for {m}x{n}", x.len())));
        }
        let mut y = vec![0.0; m * n];
        self.apply_typed::<f64>(&to_real(self.a.values()), &to_real(self.bt.values()), x, None, &mut y);
        Ok(y)
    }

    /// The splitting of the vectorized operator, assembled explicitly for
    /// small checks.
    pub fn explicit_splitting(&self) -> Splitting {
        let (m, n) = self.shape();
        let big_m = SparseMatrix::identity(n).kron(&self.a);
        let big_n = self.bt.kron(&SparseMatrix::identity(m));
        Splitting { m: big_m, n: big_n, kind: SplitKind::SylvesterAb }
    }

    /// Entry `(i, j)` of `f - A X - X B`, or of `A X + X B` when `f` is
    /// absent, accumulated in `T`: first along row `i` of `A`, then along
    /// column `j` of `B`.
    fn apply_typed<T: Real>(&self, av: &[T], btv: &[T], x: &[T], f: Option<&[T]>, out: &mut [T]) {
        let (m, n) = self.shape();
        let (arp, aci) = (self.a.row_ptr(), self.a.col_idx());
        let (brp, bci) = (self.bt.row_ptr(), self.bt.col_idx());
        for j in 0..n {
            let xj = &x[j * m..(j + 1) * m];
            for i in 0..m {
                let mut acc = T::ZERO;
                for k in arp[i]..arp[i + 1] {
                    acc = acc + av[k] * xj[aci[k]];
                }
                for k in brp[j]..brp[j + 1] {
                    acc = acc + x[bci[k] * m + i] * btv[k];
                }
                out[j * m + i] = match f {
                    Some(f) => f[j * m + i] - acc,
                    None => acc,
                };
            }
        }
    }

    fn residual_impl<T: Real>(&self, x: &[f64], f: &[f64]) -> Vec<f64> {
        let xt: Vec<T> = to_real(x);
        let ft: Vec<T> = to_real(f);
        let mut out = vec![T::ZERO; x.len()];
        self.apply_typed(&to_real(self.a.values()), &to_real(self.bt.values()), &xt, Some(&ft), &mut out);
        to_f64(&out)
    }
}

struct SylvesterStage {
    m: usize,
    n: usize,
    /// `aI + A`, applied to columns.
    col: Factorization,
    /// `aI + B^T`, applied to rows.
    row: Factorization,
}

impl InnerStage for SylvesterStage {
    fn solve_h(&self, rhs: &[f64], _stop_norm: f64) -> Result<InnerSolution> {
        let mut out = Vec::with_capacity(rhs.len());
        for col in rhs.chunks(self.m) {
            out.extend(solve_factored(&self.col, col)?);
        }
        Ok(InnerSolution { x: out, iters: 0, stagnated: false })
    }

    fn solve_s(&self, rhs: &[f64], _stop_norm: f64) -> Result<InnerSolution> {
        let (m, n) = (self.m, self.n);
        let mut out = vec![0.0; m * n];
        let mut row = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                row[j] = rhs[j * m + i];
            }
            let y = solve_factored(&self.row, &row)?;
            for j in 0..n {
                out[j * m + i] = y[j];
            }
        }
        Ok(InnerSolution { x: out, iters: 0, stagnated: false })
    }
}

impl GadiSystem for SylvesterOperator {
    fn dim(&self) -> usize {
        let (m, n) = self.shape();
        m * n
    }

    fn residual(&self, x: &[f64], b: &[f64], u_f: FloatFormat, stats: &mut RoundingStats) -> Result<Vec<f64>> {
        if x.len() != self.dim() || b.len() != self.dim() {
            return Err(GadiError::DimensionMismatch("Sylvester residual".into()));
        }
        let s = dispatch!(u_f, residual_impl_for(self, x, b));
        let (m, n) = self.shape();
        stats.add_ops(u_f, (2 * (n * self.a.nnz() + m * self.b.nnz()) + m * n) as u64);
        stats.observe_output(&s, u_f);
        Ok(s)
    }

    fn inner_stage<'a>(
        &'a self,
        alpha: f64,
        omega: f64,
        fmt: FloatFormat,
        spec: &InnerSolverSpec,
    ) -> Result<Box<dyn InnerStage + 'a>> {
        check_parameters(alpha, omega)?;
        if spec.method != InnerMethod::LuDirect {
            return Err(GadiError::Parameter("the Sylvester operator supports only lu_direct inner solves".into()));
        }
        let (m, n) = self.shape();
        let col = factorize(&self.a.shift_diagonal(alpha)?, fmt)?;
        let row = factorize(&self.bt.shift_diagonal(alpha)?, fmt)?;
        Ok(Box::new(SylvesterStage { m, n, col, row }))
    }
}

fn residual_impl_for<T: Real>(op: &SylvesterOperator, x: &[f64], f: &[f64]) -> Vec<f64> {
    op.residual_impl::<T>(x, f)
}

/// A problem addressed by a spec string such as `convdiff3d:n=16` or
/// `sylvester:n=64,r=0.1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemSpec {
    ConvDiff3D(ConvDiff3DSpec),
    Sylvester(SylvesterSpec),
}

impl FromStr for ProblemSpec {
    type Err = GadiError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut n = None;
        let mut r = None;
        for kv in args.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| GadiError::Parse(format!("expected key=value in `{kv}`")))?;
            match k.trim() {
                "n" => n = Some(v.trim().parse::<usize>().map_err(|e| GadiError::Parse(format!("n: {e}")))?),
                "r" => r = Some(v.trim().parse::<f64>().map_err(|e| GadiError::Parse(format!("r: {e}")))?),
                other => return Err(GadiError::Parse(format!("unknown problem key `{other}`"))),
            }
        }
        match name.trim() {
            "convdiff3d" => {
                if r.is_some() {
                    return Err(GadiError::Parse("convdiff3d takes no `r`".into()));
                }
                Ok(ProblemSpec::ConvDiff3D(ConvDiff3DSpec::new(n.unwrap_or(16))?))
            }
            "sylvester" => Ok(ProblemSpec::Sylvester(SylvesterSpec::new(n.unwrap_or(64), r.unwrap_or(0.1))?)),
            other => Err(GadiError::Parse(format!("unknown problem `{other}`"))),
        }
    }
}

impl std::fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemSpec::ConvDiff3D(s) => write!(f, "convdiff3d:n={}", s.n),
            ProblemSpec::Sylvester(s) => write!(f, "sylvester:n={},r={}", s.n, s.r),
        }
    }
}

impl ProblemSpec {
    /// Order of the (vectorized) linear system.
    pub fn order(&self) -> usize {
        match self {
            ProblemSpec::ConvDiff3D(s) => s.n.pow(3),
            ProblemSpec::Sylvester(s) => s.n * s.n,
        }
    }

    pub fn instantiate(&self) -> Result<Instance> {
        Ok(match *self {
            ProblemSpec::ConvDiff3D(spec) => {
                let problem = build_convdiff3d(spec);
                let split = hss_split(&problem.a)?;
                Instance::Linear { problem, split }
            }
            ProblemSpec::Sylvester(spec) => {
                let problem = build_sylvester(spec);
                let op = problem.operator()?;
                let rhs = problem.rhs_vec();
                Instance::Sylvester { problem, op, rhs }
            }
        })
    }
}

/// A generated problem ready to solve.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Instance {
    Linear { problem: LinearProblem, split: Splitting },
    Sylvester { problem: SylvesterProblem, op: SylvesterOperator, rhs: Vec<f64> },
}

impl Instance {
    pub fn rhs(&self) -> &[f64] {
        match self {
            Instance::Linear { problem, .. } => &problem.b,
            Instance::Sylvester { rhs, .. } => rhs,
        }
    }

    /// Exact solution, column-major for the matrix equation.
    pub fn exact_solution(&self) -> Vec<f64> {
        match self {
            Instance::Linear { problem, .. } => problem.x_exact.clone(),
            Instance::Sylvester { problem, .. } => vec![1.0; problem.x_exact.n_rows() * problem.x_exact.n_cols()],
        }
    }

    pub fn solve(&self, cfg: &GadiConfig, x0: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        match self {
            Instance::Linear { problem, split } => {
                let system = SparseSystem::new(&problem.a, split)?;
                gadi_ir_solve(&system, &problem.b, cfg, x0)
            }
            Instance::Sylvester { op, rhs, .. } => gadi_ir_solve(op, rhs, cfg, x0),
        }
    }

    /// Coefficient matrix and splitting, assembled explicitly.
    pub fn explicit(&self) -> Result<(SparseMatrix, Splitting)> {
        match self {
            Instance::Linear { problem, split } => Ok((problem.a.clone(), split.clone())),
            Instance::Sylvester { op, .. } => {
                let s = op.explicit_splitting();
                Ok((s.m.add(&s.n)?, s))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convdiff_small_structure() {
        let p = build_convdiff3d(ConvDiff3DSpec::new(2).unwrap());
        assert_eq!(p.a.n_rows(), 8);
        for i in 0..8 {
            assert_eq!(p.a.get(i, i), 6.0);
        }
        let r = 1.0 / 6.0;
        // neighbours in the fastest (z) direction
        assert_eq!(p.a.get(1, 0), -1.0 - r);
        assert_eq!(p.a.get(0, 1), -1.0 + r);
        assert_eq!(p.a.get(4, 0), -1.0 - r);
        assert_eq!(p.a.get(0, 4), -1.0 + r);
        let n = 5;
        let p = build_convdiff3d(ConvDiff3DSpec::new(n).unwrap());
        assert_eq!(p.a.nnz(), 7 * n * n * n - 6 * n * n);
        let centre = 2 * n * n + 2 * n + 2;
        assert!(p.b[centre].abs() < 1e-15);
    }

    #[test]
    fn sylvester_small_assembly() {
        let p = build_sylvester(SylvesterSpec::new(2, 1.0).unwrap());
        let d = 2.0 + 100.0 / 9.0;
        assert_eq!(p.a.get(0, 0), d);
        assert_eq!(p.a.get(1, 0), 0.0);
        assert_eq!(p.a.get(0, 1), -2.0);
        let op = p.operator().unwrap();
        let x = vec![1.0; 4];
        let f = op.apply(&x).unwrap();
        assert_eq!(f, p.rhs_vec());
    }

    #[test]
    fn identity_sylvester_doubles() {
        let op = SylvesterOperator::new(SparseMatrix::identity(3), SparseMatrix::identity(3)).unwrap();
        let x: Vec<f64> = (0..9).map(|v| v as f64).collect();
        let y = op.apply(&x).unwrap();
        assert_eq!(y, x.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
    }

    #[test]
    fn parse_problem_specs() {
        assert_eq!(
            "convdiff3d:n=32".parse::<ProblemSpec>().unwrap(),
            ProblemSpec::ConvDiff3D(ConvDiff3DSpec { n: 32 })
        );
        assert_eq!(
            "sylvester:n=64,r=0.1".parse::<ProblemSpec>().unwrap(),
            ProblemSpec::Sylvester(SylvesterSpec { n: 64, r: 0.1 })
        );
        assert!("poisson:n=3".parse::<ProblemSpec>().is_err());
        assert!("convdiff3d:n=1".parse::<ProblemSpec>().is_err());
        assert!("convdiff3d:m=4".parse::<ProblemSpec>().is_err());
    }

    #[test]
    fn half_residual_of_sylvester_at_zero() {
        let p = build_sylvester(SylvesterSpec::new(4, 0.1).unwrap());
        let op = p.operator().unwrap();
        let f = p.rhs_vec();
        let mut st = RoundingStats::new();
        let r = op.residual(&[0.0; 16], &f, FloatFormat::Half, &mut st).unwrap();
        for (ri, fi) in r.iter().zip(&f) {
            assert_eq!(*ri, crate::precision::round_to(*fi, FloatFormat::Half));
        }
    }
}
