//! Mixed-precision GADI: an alternating-direction implicit iteration for
//! `A x = b` with iterative refinement across three emulated IEEE formats.
//!
//! The residual is formed in precision `u_f`, the two shifted inner systems
//! are solved in `u_r`, and the solution is accumulated in `u`.
//!
//! ```
//! use gadi::prelude::*;
//!
//! let p = build_convdiff3d(ConvDiff3DSpec::new(4).unwrap());
//! let split = hss_split(&p.a).unwrap();
//! let system = SparseSystem::new(&p.a, &split).unwrap();
//! let cfg = GadiConfig::new(0.5, FloatFormat::Single, FloatFormat::Double, FloatFormat::Double);
//! let (x, report) = gadi_ir_solve(&system, &p.b, &cfg, &vec![0.0; p.b.len()]).unwrap();
//! assert!(report.status.is_converged());
//! assert!((x[0] - 1.0).abs() < 1e-10);
//! ```

pub mod bounds;
pub mod cli;
pub mod error;
pub mod gadi;
pub mod gpr;
pub mod inner_solver;
pub mod linalg;
pub mod precision;
pub mod problems;
pub mod splitting;

pub use error::{GadiError, Result};

pub mod prelude {
    pub use crate::bounds::{predict, BoundConstants, BoundReport};
    pub use crate::error::{GadiError, Result};
    pub use crate::gadi::{
        gadi_ir_solve, gadi_reference_solve, iteration_matrix, GadiConfig, GadiSystem, SolveReport, SolveStatus,
        SparseSystem,
    };
    pub use crate::gpr::{GprModel, TrainingPair, TrainingSet};
    pub use crate::inner_solver::{InnerMethod, InnerSolverSpec};
    pub use crate::linalg::{DenseMatrix, SparseMatrix};
    pub use crate::precision::{round_to, FloatFormat, RoundingStats};
    pub use crate::problems::{
        build_convdiff3d, build_sylvester, ConvDiff3DSpec, Instance, ProblemSpec, SylvesterOperator, SylvesterSpec,
    };
    pub use crate::splitting::{hss_split, kappa_hat, regularize, Splitting};
}
