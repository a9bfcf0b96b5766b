//! Banded LU factorization with partial pivoting, generic over the working
//! format.
//!
//! Row interchanges follow the LINPACK/LAPACK `gbtf2` convention: multipliers
//! stay attached to the row they were computed for and the interchanges are
//! replayed, interleaved with the multiplier updates, during the forward
//! solve. Pivoting can widen the upper band from `ku` to `kl + ku`.

use crate::error::{GadiError, Result};
use crate::linalg::SparseMatrix;
use crate::precision::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U` actually filled, at most the original `ku`
    /// plus `kl`.
    ku: usize,
    pivots: Vec<usize>,
    /// Multipliers, `kl` per column, column-major.
    lower: Vec<T>,
    /// Strict upper part of `U`, `ku` per column, column-major; entry
    /// `t` of column `j` is `U[j - ku + t][j]`.
    upper: Vec<T>,
    diag: Vec<T>,
}

impl<T: Real> BandLu<T> {
    /// Factor `a` after rounding its entries into `T`.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(GadiError::DimensionMismatch("LU of non-square matrix".into()));
        }
        let n = a.n_rows();
        let (kl, ku0) = a.bandwidths();
        let ku = (kl + ku0).min(n.saturating_sub(1));
        // row i holds columns [i - kl, i + ku] at offset (j + kl - i)
        let w = kl + ku + 1;
        let mut data = vec![T::ZERO; n * w];
        for (i, j, v) in a.iter() {
            data[i * w + j + kl - i] = T::from_f64(v);
        }
        let mut pivots = vec![0usize; n];
        // furthest column touched by any row eliminated so far
        let mut reach = 0usize;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[k * w + kl].abs();
            for i in k + 1..=last_row {
                let v = data[i * w + k + kl - i].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !best.is_finite() {
                return Err(GadiError::OverflowDetected(format!("LU pivot column {k}")));
            }
            if best == T::ZERO {
                return Err(GadiError::SingularInPrecision { step: k, format: T::FORMAT.name() });
            }
            pivots[k] = p;
            reach = reach.max((p + ku0).min(n - 1));
            let last_col = reach.max(k);
            if p != k {
                for j in k..=last_col {
                    data.swap(k * w + j + kl - k, p * w + j + kl - p);
                }
            }
            let width = last_col - k;
            let (head, tail) = data.split_at_mut((k + 1) * w);
            let pivot_row = &head[k * w + kl..k * w + kl + 1 + width];
            let pivot = pivot_row[0];
            for i in k + 1..=last_row {
                let row = &mut tail[(i - k - 1) * w..(i - k) * w];
                let at_k = k + kl - i;
                let l = row[at_k] / pivot;
                row[at_k] = l;
                if l == T::ZERO {
                    continue;
                }
                for (dst, &src) in row[at_k + 1..at_k + 1 + width].iter_mut().zip(&pivot_row[1..]) {
                    *dst = *dst - l * src;
                }
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GadiError::OverflowDetected("LU factors".into()));
        }
        // Without interchanges the fill stops at the original upper band;
        // store only what the factorization actually touched.
        let mut ku_used = 0;
        for i in 0..n {
            for d in (ku_used + 1..=ku.min(n - 1 - i)).rev() {
                if data[i * w + kl + d] != T::ZERO {
                    ku_used = d;
                    break;
                }
            }
        }
        let ku = ku_used;
        let mut lower = vec![T::ZERO; n * kl];
        let mut upper = vec![T::ZERO; n * ku];
        let mut diag = vec![T::ZERO; n];
        for k in 0..n {
            diag[k] = data[k * w + kl];
            for t in 0..kl {
                let i = k + 1 + t;
                if i < n {
                    lower[k * kl + t] = data[i * w + k + kl - i];
                }
            }
            for t in 0..ku {
                // row i = k - ku + t, column k
                if k + t >= ku {
                    let i = k + t - ku;
                    upper[k * ku + t] = data[i * w + k + kl - i];
                }
            }
        }
        Ok(Self { n, kl, ku, pivots, lower, upper, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Overwrite `b` with `A^{-1} b`, all arithmetic in `T`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == T::ZERO {
                continue;
            }
            let m = kl.min(n - 1 - k);
            let l = &self.lower[k * kl..k * kl + m];
            for (bi, &li) in b[k + 1..k + 1 + m].iter_mut().zip(l) {
                *bi = *bi - li * bk;
            }
        }
        for j in (0..n).rev() {
            let xj = b[j] / self.diag[j];
            b[j] = xj;
            if xj == T::ZERO {
                continue;
            }
            let top = j.saturating_sub(ku);
            let col = &self.upper[j * ku + (top + ku - j)..j * ku + ku];
            for (bi, &ui) in b[top..j].iter_mut().zip(col) {
                *bi = *bi - ui * xj;
            }
        }
    }

    /// Explicit `(perm, L, U)` with `A[perm[i], :] = (L U)[i, :]`, in binary64.
    pub fn explicit_factors(&self) -> (Vec<usize>, SparseMatrix, SparseMatrix) {
        let n = self.n;
        let mut perm: Vec<usize> = (0..n).collect();
        // multipliers per elimination step, indexed by current position
        let mut lcols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for k in 0..n {
            let p = self.pivots[k];
            perm.swap(k, p);
            for col in lcols.iter_mut() {
                for e in col.iter_mut() {
                    if e.0 == k {
                        e.0 = p;
                    } else if e.0 == p {
                        e.0 = k;
                    }
                }
            }
            let m = self.kl.min(n - 1 - k);
            lcols.push((0..m).map(|t| (k + 1 + t, self.lower[k * self.kl + t].to_f64())).collect());
        }
        let mut lt = Vec::new();
        for (k, col) in lcols.iter().enumerate() {
            lt.push((k, k, 1.0));
            for &(i, v) in col {
                if v != 0.0 {
                    lt.push((i, k, v));
                }
            }
        }
        let mut ut = Vec::new();
        for j in 0..n {
            ut.push((j, j, self.diag[j].to_f64()));
            for t in 0..self.ku {
                if j + t >= self.ku {
                    let v = self.upper[j * self.ku + t].to_f64();
                    if v != 0.0 {
                        ut.push((j + t - self.ku, j, v));
                    }
                }
            }
        }
        let l = SparseMatrix::from_triplets(n, n, &lt).expect("in range");
        let u = SparseMatrix::from_triplets(n, n, &ut).expect("in range");
        (perm, l, u)
    }
}
