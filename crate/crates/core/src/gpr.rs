//! Shift prediction from problem size.
//!
//! Small instances are solved for a range of shifts to find the one with the
//! fewest outer steps; a Gaussian process on `ln(size)` then extrapolates
//! that shift to larger instances.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GadiError, Result};
use crate::gadi::{gadi_ir_solve, GadiConfig, SparseSystem};
use crate::precision::FloatFormat;
use crate::problems::{build_convdiff3d, ConvDiff3DSpec};
use crate::splitting::hss_split;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    /// Order of the linear system.
    pub size_n: usize,
    pub alpha_opt: f64,
    pub iters_at_opt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub pairs: Vec<TrainingPair>,
    pub generation_precision: FloatFormat,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    n: usize,
    alpha: f64,
    iters: usize,
    precision: FloatFormat,
}

impl TrainingSet {
    pub fn new(generation_precision: FloatFormat) -> Self {
        Self { pairs: Vec::new(), generation_precision }
    }

    /// Append a pair; sizes must stay strictly increasing.
    pub fn push(&mut self, pair: TrainingPair) -> Result<()> {
        if !(pair.alpha_opt > 0.0 && pair.alpha_opt.is_finite()) {
            return Err(GadiError::Parameter(format!("training alpha must be positive, got {}", pair.alpha_opt)));
        }
        if let Some(last) = self.pairs.last() {
            if pair.size_n <= last.size_n {
                return Err(GadiError::Parameter(format!(
                    "training sizes must increase: {} after {}",
                    pair.size_n, last.size_n
                )));
            }
        }
        self.pairs.push(pair);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for p in &self.pairs {
            let row =
                CsvRow { n: p.size_n, alpha: p.alpha_opt, iters: p.iters_at_opt, precision: self.generation_precision };
            out.serialize(row).map_err(|e| GadiError::Io(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = csv::Reader::from_reader(r);
        let mut set: Option<TrainingSet> = None;
        for row in rows.deserialize::<CsvRow>() {
            let row = row.map_err(|e| GadiError::Parse(e.to_string()))?;
            let set = set.get_or_insert_with(|| TrainingSet::new(row.precision));
            if row.precision != set.generation_precision {
                return Err(GadiError::Parse("mixed generation precisions in one training set".into()));
            }
            set.push(TrainingPair { size_n: row.n, alpha_opt: row.alpha, iters_at_opt: row.iters })?;
        }
        set.ok_or_else(|| GadiError::Parse("empty training set".into()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub signal_var: f64,
    pub length_scale: f64,
    pub noise_var: f64,
}

impl Hyperparameters {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.signal_var) && ok(self.length_scale) && ok(self.noise_var) {
            Ok(())
        } else {
            Err(GadiError::Parameter(format!("kernel hyperparameters must be positive: {self:?}")))
        }
    }

    fn kernel(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.length_scale;
        self.signal_var * (-0.5 * d * d).exp()
    }
}

/// Gaussian process regression of shift against `ln(size)` with a constant
/// prior mean equal to the average target.
#[derive(Debug, Clone)]
pub struct GprModel {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    hyper: Hyperparameters,
    prior_mean: f64,
    chol: Cholesky<f64, nalgebra::Dyn>,
    weights: DVector<f64>,
    log_marginal_likelihood: f64,
    alpha_floor: f64,
}

const JITTER_TRIES: usize = 6;

impl GprModel {
    /// Fit with hyperparameters chosen by log marginal likelihood over the
    /// grid `signal_var in {0.1, 1, 10} s^2`, `length_scale in {0.5, 1, 2} R`,
    /// `noise_var in {1e-6, 1e-4, 1e-2} s^2`, where `s^2` is the target
    /// variance and `R` the input range. Ties keep the first grid point.
    pub fn fit(ts: &TrainingSet) -> Result<Self> {
        let (x, y) = Self::data(ts)?;
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
        // constant targets still need a usable scale
        let s2 = var.max((1e-3 * mean).powi(2)).max(f64::MIN_POSITIVE);
        let range = x[x.len() - 1] - x[0];
        let mut best: Option<GprModel> = None;
        for sf in [0.1, 1.0, 10.0] {
            for ls in [0.5, 1.0, 2.0] {
                for sn in [1e-6, 1e-4, 1e-2] {
                    let h = Hyperparameters { signal_var: sf * s2, length_scale: ls * range, noise_var: sn * s2 };
                    let Ok(m) = Self::build(x.clone(), y.clone(), h) else { continue };
                    if best.as_ref().is_none_or(|b| m.log_marginal_likelihood > b.log_marginal_likelihood) {
                        best = Some(m);
                    }
                }
            }
        }
        best.ok_or_else(|| GadiError::Fit("no grid point gave a positive definite kernel matrix".into()))
    }

    /// Fit with fixed hyperparameters.
    pub fn fit_with(ts: &TrainingSet, hyper: Hyperparameters) -> Result<Self> {
        let (x, y) = Self::data(ts)?;
        Self::build(x, y, hyper)
    }

    fn data(ts: &TrainingSet) -> Result<(Vec<f64>, Vec<f64>)> {
        if ts.len() < 3 {
            return Err(GadiError::Fit(format!("need at least 3 training pairs, got {}", ts.len())));
        }
        let x = ts.pairs.iter().map(|p| (p.size_n as f64).ln()).collect();
        let y = ts.pairs.iter().map(|p| p.alpha_opt).collect();
        Ok((x, y))
    }

    fn build(inputs: Vec<f64>, targets: Vec<f64>, hyper: Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        let n = inputs.len();
        let prior_mean = targets.iter().sum::<f64>() / n as f64;
        let k = DMatrix::from_fn(n, n, |i, j| hyper.kernel(inputs[i], inputs[j]));
        let mut jitter = 0.0;
        let mut chol = None;
        for t in 0..=JITTER_TRIES {
            let mut kn = k.clone();
            for i in 0..n {
                kn[(i, i)] += hyper.noise_var + jitter;
            }
            if let Some(c) = Cholesky::new(kn) {
                chol = Some(c);
                break;
            }
            jitter = hyper.signal_var * 1e-12 * 10f64.powi(t as i32);
        }
        let chol = chol.ok_or_else(|| GadiError::Fit("kernel matrix not positive definite after jitter".into()))?;
        let centered = DVector::from_iterator(n, targets.iter().map(|v| v - prior_mean));
        let weights = chol.solve(&centered);
        let log_det: f64 = chol.l_dirty().diagonal().iter().take(n).map(|d| d.ln()).sum::<f64>() * 2.0;
        let log_marginal_likelihood =
            -0.5 * centered.dot(&weights) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        let alpha_floor = targets.iter().copied().fold(f64::INFINITY, f64::min) / 10.0;
        Ok(Self { inputs, targets, hyper, prior_mean, chol, weights, log_marginal_likelihood, alpha_floor })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        self.hyper
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    pub fn training_targets(&self) -> &[f64] {
        &self.targets
    }

    /// Posterior mean and standard deviation of the latent function at a
    /// system order. The mean is clamped to a tenth of the smallest training
    /// shift.
    pub fn predict_alpha(&self, size_n: usize) -> (f64, f64) {
        let (mean, std) = self.posterior((size_n as f64).ln());
        (mean.max(self.alpha_floor), std)
    }

    fn posterior(&self, x: f64) -> (f64, f64) {
        let n = self.inputs.len();
        let ks = DVector::from_iterator(n, self.inputs.iter().map(|&xi| self.hyper.kernel(x, xi)));
        let mean = self.prior_mean + ks.dot(&self.weights);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("cholesky factor is nonsingular");
        let var = (self.hyper.signal_var - v.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }
}

/// Extend a training set with model predictions at new system orders.
pub fn retrain_extend(m: &GprModel, ts: &TrainingSet, new_sizes: &[usize]) -> Result<TrainingSet> {
    let mut merged: Vec<TrainingPair> = ts.pairs.clone();
    for &size_n in new_sizes {
        let (alpha_opt, _) = m.predict_alpha(size_n);
        merged.push(TrainingPair { size_n, alpha_opt, iters_at_opt: 0 });
    }
    merged.sort_by_key(|p| p.size_n);
    let mut out = TrainingSet::new(ts.generation_precision);
    for p in merged {
        out.push(p)?;
    }
    Ok(out)
}

/// Minimize an outer-step count over `ln(alpha)` on `[lo, hi]` with at most
/// `budget` evaluations.
///
/// `iterations(alpha, cutoff)` returns `None` when the solve at `alpha` does
/// not converge. `cutoff` is the best count found so far; a solve that has
/// not converged after that many steps cannot win and may give up. A coarse
/// logarithmic scan locates the best cell and golden section refines inside
/// its neighbours. Ties go to the smaller shift.
pub fn alpha_bisection<F>(mut iterations: F, lo: f64, hi: f64, budget: usize) -> Result<(f64, usize)>
where
    F: FnMut(f64, Option<usize>) -> Option<usize>,
{
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(GadiError::Parameter(format!("bad alpha bracket [{lo}, {hi}]")));
    }
    if budget < 3 {
        return Err(GadiError::Parameter(format!("alpha search needs a budget of at least 3, got {budget}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut best: Option<(usize, f64)> = None;
    let mut eval = |t: f64, best: &mut Option<(usize, f64)>| -> f64 {
        let alpha = t.exp();
        match iterations(alpha, best.map(|(k, _)| k)) {
            Some(k) => {
                if best.is_none_or(|(bk, ba)| k < bk || (k == bk && alpha < ba)) {
                    *best = Some((k, alpha));
                }
                k as f64
            }
            None => f64::INFINITY,
        }
    };

    // The scan stops once two points past the best are worse: the count is
    // assumed unimodal in ln(alpha).
    let coarse = (budget / 2).clamp(3, 11);
    let grid: Vec<f64> = (0..coarse).map(|i| a + (b - a) * i as f64 / (coarse - 1) as f64).collect();
    let mut values: Vec<f64> = Vec::with_capacity(coarse);
    let mut i_best = 0;
    for &t in &grid {
        let v = eval(t, &mut best);
        values.push(v);
        let i = values.len() - 1;
        if v < values[i_best] {
            i_best = i;
        }
        if best.is_some() && i >= i_best + 2 && values[i - 1] > values[i_best] && v > values[i_best] {
            break;
        }
    }
    if best.is_none() {
        return Err(GadiError::NoConvergentAlpha { lo, hi });
    }
    let mut left = grid[i_best.saturating_sub(1)];
    let mut right = grid[(i_best + 1).min(coarse - 1)];

    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut remaining = budget - values.len();
    if remaining >= 2 {
        let mut c = right - g * (right - left);
        let mut d = left + g * (right - left);
        let mut fc = eval(c, &mut best);
        let mut fd = eval(d, &mut best);
        remaining -= 2;
        while remaining > 0 {
            if fc <= fd {
                right = d;
                d = c;
                fd = fc;
                c = right - g * (right - left);
                fc = eval(c, &mut best);
            } else {
                left = c;
                c = d;
                fc = fd;
                d = left + g * (right - left);
                fd = eval(d, &mut best);
            }
            remaining -= 1;
        }
    }
    let (k, alpha) = best.expect("checked above");
    Ok((alpha, k))
}

/// Settings for generating training pairs on the convection-diffusion family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearch {
    pub lo: f64,
    pub hi: f64,
    pub budget: usize,
    /// Squared relative tolerance of every training solve.
    pub xi: f64,
    /// Solves needing more outer steps count as non-convergent.
    pub max_outer_iters: usize,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        Self { lo: 1e-3, hi: 1e2, budget: 20, xi: 1e-8, max_outer_iters: 500 }
    }
}

/// Best shift for the `n`-per-direction convection-diffusion instance,
/// solved uniformly in `fmt`.
pub fn convdiff_alpha_opt(n: usize, fmt: FloatFormat, search: &AlphaSearch) -> Result<TrainingPair> {
    let p = build_convdiff3d(ConvDiff3DSpec::new(n)?);
    let split = hss_split(&p.a)?;
    let system = SparseSystem::new(&p.a, &split)?;
    let x0 = vec![0.0; p.b.len()];
    let (alpha_opt, iters_at_opt) = alpha_bisection(
        |alpha, cutoff| {
            let mut cfg = GadiConfig::uniform(alpha, fmt);
            cfg.xi = search.xi;
            cfg.max_outer_iters = cutoff.map_or(search.max_outer_iters, |c| c.min(search.max_outer_iters));
            let (_, rep) = gadi_ir_solve(&system, &p.b, &cfg, &x0).ok()?;
            rep.status.is_converged().then_some(rep.outer_iters)
        },
        search.lo,
        search.hi,
        search.budget,
    )?;
    Ok(TrainingPair { size_n: p.b.len(), alpha_opt, iters_at_opt })
}

/// Training pairs for several per-direction grid sizes. Sizes are solved
/// concurrently; the result is ordered by size.
pub fn convdiff_training_set(per_direction: &[usize], fmt: FloatFormat, search: &AlphaSearch) -> Result<TrainingSet> {
    let mut sizes = per_direction.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let pairs: Vec<TrainingPair> =
        sizes.par_iter().map(|&n| convdiff_alpha_opt(n, fmt, search)).collect::<Result<_>>()?;
    let mut ts = TrainingSet::new(fmt);
    for p in pairs {
        ts.push(p)?;
    }
    Ok(ts)
}
