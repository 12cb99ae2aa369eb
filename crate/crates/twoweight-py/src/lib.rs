//! Python bindings: measures, the transform, condition constants, the Cantor pair and the
//! batch driver.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use twoweight::cantor::{self, SigmaVariant};
use twoweight::cli::{self, CliError, ExperimentConfig, Subcommand};
use twoweight::conditions::{self, A2Half};
use twoweight::dyadic::{self, DyadicInterval, GridParam, Window};
use twoweight::functionals::{self, PoissonVariant};
use twoweight::haar::{self, StepFunction};
use twoweight::measure::{Closure, Interval, Measure};
use twoweight::transform::{self, Direction, TruncationProfile};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn interval(iv: (f64, f64)) -> PyResult<Interval> {
    Interval::new(iv.0, iv.1).map_err(value_err)
}

fn family(items: Vec<(f64, f64)>) -> PyResult<Vec<Interval>> {
    items.into_iter().map(interval).collect()
}

fn truncation(eps: Option<f64>) -> PyResult<Option<TruncationProfile>> {
    eps.map(TruncationProfile::new).transpose().map_err(value_err)
}

fn direction(name: &str) -> PyResult<Direction> {
    match name {
        "forward" => Ok(Direction::Forward),
        "dual" => Ok(Direction::Dual),
        other => Err(PyValueError::new_err(format!("direction must be 'forward' or 'dual', got {other:?}"))),
    }
}

fn to_python(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Finite positive measure: point masses `(x, m)` plus uniform segments `(a, b, density)`.
#[pyclass(name = "Measure", module = "twoweight_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMeasure {
    inner: Measure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    #[pyo3(signature = (atoms=Vec::new(), segments=Vec::new()))]
    fn new(atoms: Vec<(f64, f64)>, segments: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        Ok(PyMeasure { inner: Measure::new(atoms, segments).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMeasure { inner: serde_json::from_str(text).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("measures serialize")
    }

    /// Mass of `[left, right]`; endpoints are excluded when `closed` is false.
    #[pyo3(signature = (left, right, closed=true))]
    fn mass(&self, left: f64, right: f64, closed: bool) -> PyResult<f64> {
        let c = if closed { Closure::CLOSED } else { Closure::OPEN };
        Ok(self.inner.mass(&interval((left, right))?, c))
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    #[getter]
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.atoms().iter().map(|a| (a.position, a.mass)).collect()
    }

    #[getter]
    fn segments(&self) -> Vec<(f64, f64, f64)> {
        self.inner.segments().iter().map(|s| (s.left, s.right, s.density)).collect()
    }

    /// `∫ dμ(y) / (x - y)`, optionally with a smooth truncation of width `truncation`.
    #[pyo3(signature = (x, truncation=None))]
    fn hilbert(&self, x: f64, truncation: Option<f64>) -> PyResult<f64> {
        transform::hilbert_at_point(&self.inner, x, self::truncation(truncation)?).map_err(runtime_err)
    }

    /// Restriction to `[left, right]`, or to its complement.
    #[pyo3(signature = (left, right, complement=false))]
    fn restrict(&self, left: f64, right: f64, complement: bool) -> PyResult<Self> {
        Ok(PyMeasure { inner: self.inner.restrict(&interval((left, right))?, complement) })
    }

    fn affine_pushforward(&self, scale: f64, shift: f64) -> PyResult<Self> {
        Ok(PyMeasure { inner: self.inner.affine_pushforward(scale, shift).map_err(value_err)? })
    }

    fn scaled(&self, factor: f64) -> Self {
        PyMeasure { inner: self.inner.scaled(factor) }
    }

    fn __add__(&self, other: &PyMeasure) -> Self {
        PyMeasure { inner: self.inner.sum(&other.inner) }
    }

    fn __repr__(&self) -> String {
        format!("Measure(atoms={}, segments={})", self.inner.atoms().len(), self.inner.segments().len())
    }
}

/// Poisson average `P(I, μ)` of the standard kernel.
#[pyfunction]
fn poisson(interval: (f64, f64), measure: &PyMeasure) -> PyResult<f64> {
    Ok(functionals::poisson(&self::interval(interval)?, &measure.inner, PoissonVariant::Standard))
}

/// Energy `E(I, μ)`; raises when the interval carries no mass.
#[pyfunction]
fn energy(interval: (f64, f64), measure: &PyMeasure) -> PyResult<f64> {
    functionals::energy(&self::interval(interval)?, &measure.inner).map_err(runtime_err)
}

/// `∫ H(σ) dω` for measures with separated supports (or a truncated kernel).
#[pyfunction]
#[pyo3(signature = (sigma, omega, truncation=None))]
fn interaction(sigma: &PyMeasure, omega: &PyMeasure, truncation: Option<f64>) -> PyResult<f64> {
    transform::interaction(&sigma.inner, &omega.inner, self::truncation(truncation)?).map_err(runtime_err)
}

/// Solves `Hω(z) = target` on a gap of the support of `ω`.
#[pyfunction]
fn solve_on_gap(omega: &PyMeasure, gap: (f64, f64), target: f64) -> PyResult<f64> {
    transform::solve_on_gap(&omega.inner, &interval(gap)?, target).map_err(runtime_err)
}

/// `√ max_I P(I,ω) P(I,σ)` over the family.
#[pyfunction]
fn a2(omega: &PyMeasure, sigma: &PyMeasure, family: Vec<(f64, f64)>) -> PyResult<f64> {
    let fam = self::family(family)?;
    Ok(conditions::a2_constant(&omega.inner, &sigma.inner, &fam, A2Half::Both).map_err(runtime_err)?.value)
}

/// Testing constant and the witnessing interval.
#[pyfunction]
#[pyo3(signature = (omega, sigma, family, direction="forward", truncation=None))]
fn testing(
    omega: &PyMeasure,
    sigma: &PyMeasure,
    family: Vec<(f64, f64)>,
    direction: &str,
    truncation: Option<f64>,
) -> PyResult<(f64, Option<(f64, f64)>)> {
    let fam = self::family(family)?;
    let rep = conditions::testing_report(&omega.inner, &sigma.inner, &fam, self::direction(direction)?, self::truncation(truncation)?)
        .map_err(runtime_err)?;
    let witness = match rep.witness {
        conditions::Witness::Interval { interval } => Some((interval.left(), interval.right())),
        _ => None,
    };
    Ok((rep.value, witness))
}

fn window(depth: u32, n_min: i32, n_max: i32, seed: Option<u64>) -> PyResult<Window> {
    let grid = match seed {
        Some(s) => GridParam::random(n_min, n_max, s),
        None => GridParam::standard(n_min, n_max),
    }
    .map_err(value_err)?;
    Window::new(grid, DyadicInterval { scale: 0, index: 0 }, depth).map_err(value_err)
}

/// Whether `J = (scale, index)` of the unshifted grid is r-good against the grid drawn from `seed`.
#[pyfunction]
#[pyo3(signature = (scale, index, r, eps, seed, n_min=-16, n_max=4))]
fn is_r_good(scale: i32, index: i64, r: u32, eps: f64, seed: u64, n_min: i32, n_max: i32) -> PyResult<bool> {
    let a = GridParam::standard(n_min, n_max).map_err(value_err)?;
    let b = GridParam::random(n_min, n_max, seed).map_err(value_err)?;
    Ok(dyadic::is_r_good(DyadicInterval { scale, index }, &a, &b, r, eps).map_err(value_err)?.good)
}

/// Monte-Carlo bad probability `(estimate, stderr)` of `J = (scale, index)`.
#[pyfunction]
#[pyo3(signature = (scale, index, r, eps, trials, seed, n_min=-16, n_max=4))]
fn bad_probability(
    scale: i32,
    index: i64,
    r: u32,
    eps: f64,
    trials: u64,
    seed: u64,
    n_min: i32,
    n_max: i32,
) -> PyResult<(f64, f64)> {
    let a = GridParam::standard(n_min, n_max).map_err(value_err)?;
    let est = dyadic::estimate_bad_probability(DyadicInterval { scale, index }, &a, (n_min, n_max), r, eps, trials, seed)
        .map_err(value_err)?;
    Ok((est.estimate, est.stderr))
}

/// Haar coefficients of a function given by its leaf values on the window `[0,1)` of
/// `depth` generations, as `((scale, index), coefficient)` pairs, plus the mean.
#[pyfunction]
#[pyo3(signature = (leaf_values, sigma, depth, seed=None))]
fn haar_coefficients(
    leaf_values: Vec<f64>,
    sigma: &PyMeasure,
    depth: u32,
    seed: Option<u64>,
) -> PyResult<(Vec<((i32, i64), f64)>, f64)> {
    let w = window(depth, -(depth as i32) - 12, 4, seed)?;
    let f = StepFunction::from_leaves(&w, leaf_values).map_err(value_err)?;
    let c = haar::analyze(&f, &sigma.inner, &w);
    Ok((c.entries.iter().map(|(d, v)| ((d.scale, d.index), *v)).collect(), c.mean))
}

/// The level-`depth` approximation of the Cantor measure.
#[pyfunction]
fn cantor_omega(depth: u32) -> PyResult<PyMeasure> {
    Ok(PyMeasure { inner: cantor::build_omega(depth).map_err(value_err)? })
}

/// Gap-supported atomic measure; `variant` is `center`, `zero` or `level`.
#[pyfunction]
#[pyo3(signature = (depth, variant="zero", surrogate_depth=None))]
fn cantor_sigma(depth: u32, variant: &str, surrogate_depth: Option<u32>) -> PyResult<PyMeasure> {
    let v: SigmaVariant = serde_json::from_value(serde_json::Value::String(variant.into())).map_err(value_err)?;
    let b = cantor::build_sigma(depth, v, surrogate_depth.unwrap_or(depth + 6)).map_err(runtime_err)?;
    Ok(PyMeasure { inner: b.measure })
}

#[pyfunction]
fn epsilon_zero() -> f64 {
    cantor::epsilon_zero()
}

/// Full finite-depth report on the Cantor pair, as nested dicts and lists.
#[pyfunction]
#[pyo3(signature = (depth, surrogate_depth=None))]
fn counterexample_report(py: Python<'_>, depth: u32, surrogate_depth: Option<u32>) -> PyResult<Py<PyAny>> {
    let r = cantor::counterexample_report(depth, surrogate_depth.unwrap_or(depth + 6), cantor::Sections::ALL)
        .map_err(runtime_err)?;
    to_python(py, &r)
}

#[pyfunction]
fn blowup_rate_check(py: Python<'_>, depth: u32, c: f64) -> PyResult<Py<PyAny>> {
    to_python(py, &cantor::blowup_rate_check(depth, c).map_err(value_err)?)
}

/// Runs a batch subcommand from a JSON config; returns `{file name: contents}` and warnings.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_json: &str, subcommand: &str) -> PyResult<(Bound<'py, PyDict>, Vec<String>)> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(value_err)?;
    let sub = match subcommand {
        "conditions" => Subcommand::Conditions,
        "decompose" => Subcommand::Decompose,
        "cantor" => Subcommand::Cantor,
        "goodbad" => Subcommand::Goodbad,
        "testing" => Subcommand::Testing,
        other => return Err(PyValueError::new_err(format!("unknown subcommand {other:?}"))),
    };
    let out = py.detach(|| cli::run(&cfg, sub)).map_err(|e| match e {
        CliError::Numerical(_) => runtime_err(e),
        _ => value_err(e),
    })?;
    let files = PyDict::new(py);
    for f in out.files {
        files.set_item(f.name, f.contents)?;
    }
    Ok((files, out.warnings))
}

#[pymodule]
fn twoweight_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(poisson, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(interaction, m)?)?;
    m.add_function(wrap_pyfunction!(solve_on_gap, m)?)?;
    m.add_function(wrap_pyfunction!(a2, m)?)?;
    m.add_function(wrap_pyfunction!(testing, m)?)?;
    m.add_function(wrap_pyfunction!(is_r_good, m)?)?;
    m.add_function(wrap_pyfunction!(bad_probability, m)?)?;
    m.add_function(wrap_pyfunction!(haar_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(cantor_omega, m)?)?;
    m.add_function(wrap_pyfunction!(cantor_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_zero, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_report, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_rate_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
