#![allow(dead_code)]

use gadi::linalg::SparseMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sparse `A` whose symmetric part is positive definite: a strictly
/// diagonally dominant symmetric part plus an arbitrary skew part.
pub fn random_positive_real(n: usize, density: f64, rng: &mut ChaCha8Rng) -> SparseMatrix {
    let mut sym = vec![0.0; n * n];
    let mut skew = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                let v: f64 = rng.random_range(-1.0..1.0);
                sym[i * n + j] = v;
                sym[j * n + i] = v;
            }
            if rng.random_bool(density) {
                let v: f64 = rng.random_range(-2.0..2.0);
                skew[i * n + j] = v;
                skew[j * n + i] = -v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| sym[i * n + j].abs()).sum();
        sym[i * n + i] = off + rng.random_range(0.1..2.0);
    }
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = sym[i * n + j] + skew[i * n + j];
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

/// Dense LU solve through nalgebra.
pub fn dense_solve(a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
    let n = a.n_rows();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in a.iter() {
        m[(i, j)] = v;
    }
    m.lu().solve(&DVector::from_column_slice(b)).expect("nonsingular").as_slice().to_vec()
}

pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den
}

/// Round a binary64 value to an IEEE binary format with `p` significand bits
/// (hidden bit included) and exponent range `[emin, emax]`, working only on
/// integer bit fields. Returns the result as binary64.
pub fn bit_round(x: f64, p: u32, emin: i32, emax: i32) -> f64 {
    let bits = x.to_bits();
    let sign = bits >> 63;
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0x7ff {
        return x;
    }
    if biased == 0 && frac == 0 {
        return x;
    }
    // value = sig * 2^(e - 52) with sig holding 53 bits for normal inputs.
    let (sig, e) = if biased == 0 { (frac, -1022) } else { (frac | (1u64 << 52), biased - 1023) };
    let lead = 63 - sig.leading_zeros() as i32;
    let top = e - 52 + lead;
    // Exponent of the last kept bit.
    let q = (top.max(emin)) - (p as i32 - 1);
    let shift = q - (e - 52);
    let mut m;
    let mut q = q;
    if shift <= 0 {
        m = sig << (-shift) as u32;
    } else if shift >= 64 {
        m = 0;
    } else {
        let s = shift as u32;
        m = sig >> s;
        let rem = sig & ((1u64 << s) - 1);
        let half = 1u64 << (s - 1);
        if rem > half || (rem == half && m & 1 == 1) {
            m += 1;
        }
    }
    if m == 1u64 << p {
        m >>= 1;
        q += 1;
    }
    let sgn = if sign == 1 { -1.0 } else { 1.0 };
    if m == 0 {
        return sgn * 0.0;
    }
    if q + (63 - m.leading_zeros() as i32) > emax {
        return sgn * f64::INFINITY;
    }
    sgn * (m as f64) * 2f64.powi(q)
}

pub fn oracle_single(x: f64) -> f64 {
    bit_round(x, 24, -126, 127)
}

pub fn oracle_half(x: f64) -> f64 {
    bit_round(x, 11, -14, 15)
}

/// A random finite binary64 number drawn across many binades.
pub fn wide_f64(rng: &mut ChaCha8Rng, min_exp: i32, max_exp: i32) -> f64 {
    let m: f64 = rng.random_range(1.0..2.0);
    let e = rng.random_range(min_exp..=max_exp);
    let s = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
    s * m * 2f64.powi(e)
}
