//! Python bindings.
//!
//! ```python
//! import gadi_py as g
//! x, rep = g.solve("convdiff3d:n=8", alpha=0.5, prec="half,double,double")
//! rep.status, rep.final_rres
//! ```

use std::collections::BTreeMap;

use gadi::bounds::{default_constants, predict};
use gadi::cli::Triple;
use gadi::gadi::{default_xi, GadiConfig, SolveReport};
use gadi::gpr::{convdiff_training_set, AlphaSearch, GprModel, TrainingPair, TrainingSet};
use gadi::inner_solver::InnerMethod;
use gadi::precision::FloatFormat;
use gadi::problems::ProblemSpec;
use gadi::GadiError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: GadiError) -> PyErr {
    match e {
        GadiError::Parse(_) | GadiError::Parameter(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn format(name: &str) -> PyResult<FloatFormat> {
    name.parse().map_err(err)
}

/// Round a value to the nearest number in `half`, `single` or `double`.
#[pyfunction]
fn round_to(x: f64, fmt: &str) -> PyResult<f64> {
    Ok(gadi::precision::round_to(x, format(fmt)?))
}

#[pyfunction]
fn unit_roundoff(fmt: &str) -> PyResult<f64> {
    Ok(format(fmt)?.unit_roundoff())
}

/// Outcome of one solve.
#[pyclass(name = "SolveReport", frozen, get_all)]
struct PyReport {
    status: String,
    converged: bool,
    outer_iters: usize,
    final_rres: f64,
    rel_residual_history: Vec<f64>,
    inner_iter_totals: usize,
    overflow_count: u64,
    underflow_to_zero_count: u64,
    subnormal_count: u64,
    message: Option<String>,
}

impl From<SolveReport> for PyReport {
    fn from(r: SolveReport) -> Self {
        PyReport {
            status: format!("{:?}", r.status),
            converged: r.status.is_converged(),
            outer_iters: r.outer_iters,
            final_rres: r.final_rres,
            inner_iter_totals: r.inner_iter_totals,
            overflow_count: r.rounding.overflow_count,
            underflow_to_zero_count: r.rounding.underflow_to_zero_count,
            subnormal_count: r.rounding.subnormal_count,
            message: r.message,
            rel_residual_history: r.rel_residual_history,
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(status={}, outer_iters={}, final_rres={:.3e})",
            self.status, self.outer_iters, self.final_rres
        )
    }
}

fn config(
    alpha: f64,
    prec: &str,
    omega: f64,
    xi: Option<f64>,
    inner: &str,
    max_iters: Option<usize>,
    residual_scaling: bool,
) -> PyResult<GadiConfig> {
    let t: Triple = prec.parse().map_err(err)?;
    let mut cfg = GadiConfig::new(alpha, t.u_r, t.u, t.u_f);
    cfg.omega = omega;
    cfg.xi = xi.unwrap_or_else(|| default_xi(t.u));
    cfg.inner.method = inner.parse::<InnerMethod>().map_err(err)?;
    if let Some(m) = max_iters {
        cfg.max_outer_iters = m;
    }
    cfg.residual_scaling = residual_scaling;
    Ok(cfg)
}

/// Solve a named test problem from a zero start; returns `(x, report)`.
#[pyfunction]
#[pyo3(signature = (problem, alpha, prec="double,double,double", omega=1.0, xi=None, inner="lu", max_iters=None, residual_scaling=false))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &str,
    alpha: f64,
    prec: &str,
    omega: f64,
    xi: Option<f64>,
    inner: &str,
    max_iters: Option<usize>,
    residual_scaling: bool,
) -> PyResult<(Vec<f64>, PyReport)> {
    let spec: ProblemSpec = problem.parse().map_err(err)?;
    let cfg = config(alpha, prec, omega, xi, inner, max_iters, residual_scaling)?;
    let (x, r) =
        py.detach(|| spec.instantiate().and_then(|inst| inst.solve(&cfg, &vec![0.0; spec.order()]))).map_err(err)?;
    Ok((x, r.into()))
}

/// Exact solution of a named test problem.
#[pyfunction]
fn exact_solution(problem: &str) -> PyResult<Vec<f64>> {
    let spec: ProblemSpec = problem.parse().map_err(err)?;
    Ok(spec.instantiate().map_err(err)?.exact_solution())
}

/// A-priori error-bound factors as a dict.
#[pyfunction]
#[pyo3(signature = (problem, alpha, prec="half,double,double", omega=1.0))]
fn bounds(py: Python<'_>, problem: &str, alpha: f64, prec: &str, omega: f64) -> PyResult<BTreeMap<&'static str, f64>> {
    let spec: ProblemSpec = problem.parse().map_err(err)?;
    let t: Triple = prec.parse().map_err(err)?;
    let rep = py
        .detach(|| {
            let inst = spec.instantiate()?;
            let (a, split) = inst.explicit()?;
            let c = default_constants(&a, &split, alpha, omega, t.u_r)?;
            predict(&split, alpha, omega, (t.u_r, t.u, t.u_f), &c)
        })
        .map_err(err)?;
    Ok(BTreeMap::from([
        ("alpha_f", rep.alpha_f),
        ("beta_f", rep.beta_f),
        ("alpha_b", rep.alpha_b),
        ("beta_b", rep.beta_b),
        ("limiting_accuracy", rep.limiting_accuracy),
        ("kappa_hat", rep.kappa_hat),
        ("predicts_convergence", if rep.predicts_convergence { 1.0 } else { 0.0 }),
    ]))
}

/// Gaussian-process regression of the optimal shift against system order.
#[pyclass(name = "GprModel", frozen)]
struct PyGpr {
    model: GprModel,
    training: TrainingSet,
}

#[pymethods]
impl PyGpr {
    /// Fit to `(order, alpha)` pairs with strictly increasing orders.
    #[new]
    #[pyo3(signature = (pairs, precision="double"))]
    fn new(pairs: Vec<(usize, f64)>, precision: &str) -> PyResult<Self> {
        let mut training = TrainingSet::new(format(precision)?);
        for (size_n, alpha_opt) in pairs {
            training.push(TrainingPair { size_n, alpha_opt, iters_at_opt: 0 }).map_err(err)?;
        }
        let model = GprModel::fit(&training).map_err(err)?;
        Ok(PyGpr { model, training })
    }

    /// Generate a convection-diffusion training set by shift search and fit.
    #[staticmethod]
    #[pyo3(signature = (sizes, precision="double"))]
    fn train(py: Python<'_>, sizes: Vec<usize>, precision: &str) -> PyResult<Self> {
        let fmt = format(precision)?;
        let training = py.detach(|| convdiff_training_set(&sizes, fmt, &AlphaSearch::default())).map_err(err)?;
        let model = GprModel::fit(&training).map_err(err)?;
        Ok(PyGpr { model, training })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let training = TrainingSet::load(path.as_ref()).map_err(err)?;
        let model = GprModel::fit(&training).map_err(err)?;
        Ok(PyGpr { model, training })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.training.save(path.as_ref()).map_err(err)
    }

    /// `(alpha, std)` at a system order.
    fn predict(&self, order: usize) -> (f64, f64) {
        self.model.predict_alpha(order)
    }

    /// Training pairs as `(order, alpha, iterations)`.
    fn pairs(&self) -> Vec<(usize, f64, usize)> {
        self.training.pairs.iter().map(|p| (p.size_n, p.alpha_opt, p.iters_at_opt)).collect()
    }

    fn hyperparameters(&self) -> (f64, f64, f64) {
        let h = self.model.hyperparameters();
        (h.signal_var, h.length_scale, h.noise_var)
    }
}

#[pymodule]
fn gadi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(round_to, m)?)?;
    m.add_function(wrap_pyfunction!(unit_roundoff, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(exact_solution, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyGpr>()?;
    Ok(())
}
