//! A-priori forward and backward error factors of the refinement loop.
//!
//! Each step satisfies
//!
//! ```text
//! ||x - x_{k+1}|| <= alpha_F ||x - x_k|| + beta_F ||x||
//! ||b - A x_{k+1}|| / (||A|| ||x_{k+1}||) <= alpha_B ||b - A x_k|| / (||A|| ||x_k||) + beta_B
//! ```
//!
//! so a rate factor below one predicts convergence and
//! `beta_F / (1 - alpha_F)` bounds the attainable forward accuracy. The
//! default constants are deliberately pessimistic.

use serde::{Deserialize, Serialize};

use crate::error::{GadiError, Result};
use crate::gadi::iteration_matrix;
use crate::linalg::spectral::spectral_radius_estimate;
use crate::linalg::{sigma_extremes, spectral_radius, BandLu, SparseMatrix, DENSE_CAP};
use crate::precision::FloatFormat;
use crate::splitting::{check_parameters, regularize, SplitSpectrum, Splitting};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Contraction bound of the exact iteration.
    pub lambda: f64,
    /// Aggregate inner-solve perturbation for the forward bound.
    pub theta: f64,
    /// Aggregate inner-solve perturbation for the backward bound.
    pub eta: f64,
    /// Bound on `||x_k|| / ||x_{k+1}||`.
    pub gamma: f64,
    /// Update-rounding constant.
    pub phi2_of_n: f64,
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda, self.theta, self.eta, self.gamma, self.phi2_of_n];
        if all.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(GadiError::Parameter(format!("bound constants must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// Unit roundoffs of a precision triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roundoffs {
    pub u_r: f64,
    pub u: f64,
    pub u_f: f64,
}

impl Roundoffs {
    pub fn of(u_r: FloatFormat, u: FloatFormat, u_f: FloatFormat) -> Self {
        Self { u_r: u_r.unit_roundoff(), u: u.unit_roundoff(), u_f: u_f.unit_roundoff() }
    }

    pub fn exact() -> Self {
        Self { u_r: 0.0, u: 0.0, u_f: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub alpha_f: f64,
    pub beta_f: f64,
    pub alpha_b: f64,
    pub beta_b: f64,
    pub limiting_accuracy: f64,
    pub predicts_convergence: bool,
    pub kappa_hat: f64,
    pub constants: BoundConstants,
}

/// `(alpha_F, beta_F)`.
pub fn forward_factors(kappa_hat: f64, eps: Roundoffs, omega: f64, c: &BoundConstants) -> (f64, f64) {
    let Roundoffs { u_r, u, u_f } = eps;
    let w = 2.0 - omega;
    let k = kappa_hat;
    let phi2 = c.phi2_of_n;
    let alpha_f = c.lambda
        + w * c.theta * k
        + phi2 * u
        + 4.0 * w * phi2 * k * u * (1.0 + u_r) * (1.0 + u_f)
        + 4.0 * w * k * u_r
        + 4.0 * w * (1.0 + u_r) * u_f * k;
    let beta_f = phi2 * u + 4.0 * w * phi2 * k * u * (1.0 + u_r) * u_f + 8.0 * w * (1.0 + u_r) * u_f * k;
    (alpha_f, beta_f)
}

/// `(alpha_B, beta_B)`.
pub fn backward_factors(kappa_hat: f64, eps: Roundoffs, omega: f64, c: &BoundConstants) -> (f64, f64) {
    let Roundoffs { u_r, u, u_f } = eps;
    let w = 2.0 - omega;
    let k = kappa_hat;
    let phi2 = c.phi2_of_n;
    let g = c.gamma;
    let alpha_b = g * (c.lambda + w * c.eta * k + 4.0 * w * k * u_r + 4.0 * w * k * (1.0 + u_r) * u_f);
    let beta_b =
        8.0 * w * g * k * (1.0 + u_r) * u_f + phi2 * g * u + phi2 / (1.0 - phi2 * u) * u * (1.0 + (1.0 + phi2 * u) * g);
    (alpha_b, beta_b)
}

pub fn report(kappa_hat: f64, eps: Roundoffs, omega: f64, c: &BoundConstants) -> Result<BoundReport> {
    c.validate()?;
    check_parameters(1.0, omega)?;
    let (alpha_f, beta_f) = forward_factors(kappa_hat, eps, omega, c);
    let (alpha_b, beta_b) = backward_factors(kappa_hat, eps, omega, c);
    let limiting_accuracy = if alpha_f < 1.0 { beta_f / (1.0 - alpha_f) } else { f64::INFINITY };
    Ok(BoundReport {
        alpha_f,
        beta_f,
        alpha_b,
        beta_b,
        limiting_accuracy,
        predicts_convergence: alpha_f < 1.0 && alpha_b < 1.0,
        kappa_hat,
        constants: *c,
    })
}

/// `phi k u / (1 - phi k u)`, infinite once the denominator vanishes.
fn solve_perturbation(phi: f64, kappa: f64, u: f64) -> f64 {
    let t = phi * kappa * u;
    if t >= 1.0 {
        f64::INFINITY
    } else {
        t / (1.0 - t)
    }
}

const GAMMA_DEFAULT: f64 = 1.1;
const RHO_ESTIMATE_STEPS: usize = 2000;

/// Default constants for a concrete splitting and shift.
///
/// `lambda` is the spectral radius of the exact iteration (dense up to
/// [`DENSE_CAP`], power-iteration estimate beyond). `theta = eta = j + l + j l`
/// with `j`, `l` the inner-solve perturbations of `H` and `S` at `phi(n) = n`,
/// `gamma = 1.1` and `phi2(n) = n`.
pub fn default_constants(
    a: &SparseMatrix,
    s: &Splitting,
    alpha: f64,
    omega: f64,
    u_r: FloatFormat,
) -> Result<BoundConstants> {
    let n = a.n_rows();
    let pair = regularize(s, alpha, omega)?;
    let lambda = if n <= DENSE_CAP {
        spectral_radius(&iteration_matrix(a, s, alpha, omega)?)?
    } else {
        let hf = BandLu::<f64>::factor(&pair.h).map_err(|_| GadiError::SingularMatrix)?;
        let sf = BandLu::<f64>::factor(&pair.s).map_err(|_| GadiError::SingularMatrix)?;
        spectral_radius_estimate(n, RHO_ESTIMATE_STEPS, |e| {
            let mut w = a.mul_vec(e);
            hf.solve_in_place(&mut w);
            sf.solve_in_place(&mut w);
            e.iter().zip(&w).map(|(ei, wi)| ei - pair.p * wi).collect()
        })
    };
    let kappa = |m: &SparseMatrix| -> Result<f64> {
        let (hi, lo) = sigma_extremes(m)?;
        Ok(hi / lo)
    };
    let phi = n as f64;
    let ur = u_r.unit_roundoff();
    let j = solve_perturbation(phi, kappa(&pair.h)?, ur);
    let l = solve_perturbation(phi, kappa(&pair.s)?, ur);
    let theta = j + l + j * l;
    Ok(BoundConstants { lambda, theta, eta: theta, gamma: GAMMA_DEFAULT, phi2_of_n: phi })
}

/// Compose the closed-form shift condition quantity with both bounds.
pub fn predict(
    s: &Splitting,
    alpha: f64,
    omega: f64,
    precisions: (FloatFormat, FloatFormat, FloatFormat),
    c: &BoundConstants,
) -> Result<BoundReport> {
    check_parameters(alpha, omega)?;
    let kh = SplitSpectrum::of(s)?.kappa_hat(alpha);
    let (u_r, u, u_f) = precisions;
    report(kh, Roundoffs::of(u_r, u, u_f), omega, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(lambda: f64) -> BoundConstants {
        BoundConstants { lambda, theta: 0.0, eta: 0.0, gamma: 1.0, phi2_of_n: 0.0 }
    }

    #[test]
    fn exact_arithmetic_reduces_to_lambda() {
        let (af, bf) = forward_factors(7.0, Roundoffs::exact(), 1.0, &consts(0.3));
        assert_eq!((af, bf), (0.3, 0.0));
        let (ab, _) = backward_factors(7.0, Roundoffs::exact(), 1.0, &consts(0.3));
        assert_eq!(ab, 0.3);
    }

    #[test]
    fn hand_evaluated_factors() {
        let eps = Roundoffs { u_r: 2f64.powi(-11), u: 2f64.powi(-53), u_f: 2f64.powi(-53) };
        let expect = 0.5 + 16.0 * 2f64.powi(-11) + 16.0 * (1.0 + 2f64.powi(-11)) * 2f64.powi(-53);
        let (af, _) = forward_factors(4.0, eps, 1.0, &consts(0.5));
        let (ab, _) = backward_factors(4.0, eps, 1.0, &consts(0.5));
        assert!((af - expect).abs() < 1e-15);
        assert!((ab - expect).abs() < 1e-15);
        assert!((af - 0.5078).abs() < 1e-4);
    }

    #[test]
    fn limiting_accuracy_infinite_when_rate_exceeds_one() {
        let r =
            report(1e6, Roundoffs::of(FloatFormat::Half, FloatFormat::Double, FloatFormat::Double), 1.0, &consts(0.9))
                .unwrap();
        assert!(!r.predicts_convergence);
        assert_eq!(r.limiting_accuracy, f64::INFINITY);
        assert!(report(1.0, Roundoffs::exact(), 1.0, &consts(-0.1)).is_err());
    }
}
