use std::collections::BTreeMap;

use crate::error::{GadiError, Result};
use crate::linalg::DenseMatrix;
use crate::precision::{round_to, FloatFormat};

/// Real CSR matrix with binary64 master storage.
///
/// Column indices are strictly increasing within each row and no structural
/// duplicates are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from raw CSR arrays, validating every structural invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 {
            return Err(GadiError::DimensionMismatch("row_ptr length or origin".into()));
        }
        if col_idx.len() != values.len() || row_ptr[n_rows] != values.len() {
            return Err(GadiError::DimensionMismatch("nnz does not match row_ptr".into()));
        }
        for i in 0..n_rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(GadiError::Parse(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(GadiError::Parse(format!("row {i} columns not strictly increasing")));
            }
            if cols.last().is_some_and(|&c| c >= n_cols) {
                return Err(GadiError::Parse(format!("row {i} column out of range")));
            }
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_rows];
        for &(i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(GadiError::DimensionMismatch(format!("entry ({i}, {j}) outside {n_rows}x{n_cols}")));
            }
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        Ok(Self::from_row_maps(n_rows, n_cols, rows))
    }

    fn from_row_maps(n_rows: usize, n_cols: usize, rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self { n_rows: n, n_cols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: d.to_vec() }
    }

    /// `Tridiag(sub, diag, sup)` of order `n`; zero diagonals are not stored.
    pub fn tridiagonal(n: usize, sub: f64, diag: f64, sup: f64) -> Self {
        let mut t = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 && sub != 0.0 {
                t.push((i, i - 1, sub));
            }
            if diag != 0.0 {
                t.push((i, i, diag));
            }
            if i + 1 < n && sup != 0.0 {
                t.push((i, i + 1, sup));
            }
        }
        Self::from_triplets(n, n, &t).expect("indices in range")
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: vec![], values: vec![] }
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..d.n_rows() {
            for j in 0..d.n_cols() {
                let v = d.get(i, j);
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(d.n_rows(), d.n_cols(), &t).expect("indices in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.iter() {
            let dst = next[j];
            col_idx[dst] = i;
            values[dst] = v;
            next[j] += 1;
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, row_ptr, col_idx, values }
    }

    /// `a * self + b * other` on the union pattern. Explicit zeros produced by
    /// cancellation are dropped.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(GadiError::DimensionMismatch("matrix shapes differ".into()));
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.n_rows {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let (j, v) = if q >= c2.len() || (p < c1.len() && c1[p] < c2[q]) {
                    p += 1;
                    (c1[p - 1], a * v1[p - 1])
                } else if p >= c1.len() || c2[q] < c1[p] {
                    q += 1;
                    (c2[q - 1], b * v2[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (c1[p - 1], a * v1[p - 1] + b * v2[q - 1])
                };
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + shift * I` with every diagonal position stored, even when the
    /// shifted value is zero.
    pub fn shift_diagonal(&self, shift: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(GadiError::DimensionMismatch("shift of non-square matrix".into()));
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + self.n_rows);
        let mut values = Vec::with_capacity(self.nnz() + self.n_rows);
        row_ptr.push(0);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut placed = false;
            for (&j, &v) in cols.iter().zip(vals) {
                if !placed && j >= i {
                    if j == i {
                        col_idx.push(i);
                        values.push(v + shift);
                        placed = true;
                        continue;
                    }
                    col_idx.push(i);
                    values.push(shift);
                    placed = true;
                }
                col_idx.push(j);
                values.push(v);
            }
            if !placed {
                col_idx.push(i);
                values.push(shift);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values })
    }

    /// Copy with every stored value rounded to `fmt`.
    pub fn rounded(&self, fmt: FloatFormat) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = round_to(*v, fmt));
        out
    }

    /// Lower and upper bandwidths `(kl, ku)`.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for (i, j, _) in self.iter() {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        (kl, ku)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Binary64 product in stored column order.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).fold(0.0, |acc, (&j, &v)| acc + v * x[j])
            })
            .collect()
    }

    /// `self^T x` in binary64.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows, "matvec dimension mismatch");
        let mut y = vec![0.0; self.n_cols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    /// Sparse product `self * other` in binary64.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(GadiError::DimensionMismatch("matmul inner dimensions".into()));
        }
        let rows = (0..self.n_rows)
            .map(|i| {
                let mut acc = BTreeMap::new();
                let (cols, vals) = self.row(i);
                for (&k, &a) in cols.iter().zip(vals) {
                    let (c2, v2) = other.row(k);
                    for (&j, &b) in c2.iter().zip(v2) {
                        *acc.entry(j).or_insert(0.0) += a * b;
                    }
                }
                acc
            })
            .collect();
        Ok(Self::from_row_maps(self.n_rows, other.n_cols, rows))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (m, n) = (other.n_rows, other.n_cols);
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.iter() {
            for (k, l, b) in other.iter() {
                t.push((i * m + k, j * n + l, a * b));
            }
        }
        Self::from_triplets(self.n_rows * m, self.n_cols * n, &t).expect("indices in range")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d.set(i, j, v);
        }
        d
    }
}
