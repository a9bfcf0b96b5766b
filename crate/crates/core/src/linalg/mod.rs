//! Sparse and small dense linear algebra.

pub mod band;
mod dense;
pub mod kernels;
pub mod mtx;
mod sparse;
pub mod spectral;

pub use band::BandLu;
pub use dense::DenseMatrix;
pub use kernels::{axpy, dot, matvec, norm2, norm2_f64, norm_inf, residual};
pub use sparse::SparseMatrix;
pub use spectral::{sigma_extremes, spectral_radius, DENSE_CAP};
