//! Python bindings. Configs, test functions and reports cross the boundary
//! as plain dicts and lists through their JSON forms.

use std::path::PathBuf;

use harnack_lab::cli::{build_report, run_experiment, ExperimentConfig, RunMode};
use harnack_lab::coupling::CouplingKind;
use harnack_lab::estimate::{
    density_histogram, mc_semigroup, sample_coupled, weight_moment, Scenario, SpaceTimeFn, TestFunction,
};
use harnack_lab::verify::{self, CheckName, KappaSource, ShiftVariant, VerifyContext};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A JSON string passes through; anything else goes through `json.dumps`.
fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_str(&json_text(obj)?).map_err(err)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn coupling(kind: &str, x: Vec<f64>, y: Vec<f64>) -> PyResult<CouplingKind> {
    match kind {
        "harnack" => Ok(CouplingKind::Harnack { x, y }),
        "shift" => Ok(CouplingKind::Shift { x, y }),
        other => Err(err(format!("coupling must be `harnack` or `shift`, got `{other}`"))),
    }
}

fn variant(v: &str) -> PyResult<ShiftVariant> {
    match v {
        "i" => Ok(ShiftVariant::I),
        "ii" => Ok(ShiftVariant::Ii),
        other => Err(err(format!("variant must be `i` or `ii`, got `{other}`"))),
    }
}

fn mode(m: &str) -> PyResult<RunMode> {
    Ok(match m {
        "full" | "run" => RunMode::Full,
        "hypotheses" => RunMode::Hypotheses,
        "kappa" | "estimate-kappa" => RunMode::Kappa,
        "sweep" => RunMode::Sweep,
        check => RunMode::Verify(check.parse::<CheckName>().map_err(err)?),
    })
}

/// Experiment configuration as read by the `harnack-lab` binary.
#[pyclass(name = "Experiment")]
struct PyExperiment {
    cfg: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    /// Build from a dict or a JSON string.
    #[new]
    fn new(config: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self {
            cfg: ExperimentConfig::from_json(&json_text(config)?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            cfg: ExperimentConfig::load(&path).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.cfg.to_json().map_err(err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.cfg.seed = seed;
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.cfg.n_samples
    }

    #[setter]
    fn set_n_samples(&mut self, n: usize) -> PyResult<()> {
        if n == 0 {
            return Err(err("n_samples must be positive"));
        }
        self.cfg.n_samples = n;
        Ok(())
    }

    fn scenario(&self) -> PyResult<PyScenario> {
        Ok(PyScenario {
            inner: self.cfg.scenario().map_err(err)?,
        })
    }

    /// Report dict for `mode` (`full`, `hypotheses`, `kappa`, `sweep` or a
    /// check name) without writing files.
    #[pyo3(signature = (mode = "full"))]
    fn report<'py>(&self, py: Python<'py>, mode: &str) -> PyResult<Bound<'py, PyAny>> {
        let m = self::mode(mode)?;
        let cfg = self.cfg.clone();
        let r = py.detach(|| build_report(&cfg, m)).map_err(err)?;
        to_py(py, &r)
    }

    /// Run and write output files into `out` (default: the configured
    /// directory). Returns `(exit_status, [paths])`.
    #[pyo3(signature = (mode = "full", out = None))]
    fn run(&self, py: Python<'_>, mode: &str, out: Option<PathBuf>) -> PyResult<(i32, Vec<PathBuf>)> {
        let m = self::mode(mode)?;
        let mut cfg = self.cfg.clone();
        if let Some(o) = out {
            cfg.output_dir = o;
        }
        let o = py.detach(|| run_experiment(&cfg, m)).map_err(err)?;
        Ok((o.exit_status, o.files))
    }
}

/// Drift, diffusion, time grid, sample count and seed.
#[pyclass(name = "Scenario")]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self { inner: from_py(spec)? })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            inner: self.inner.clone().with_seed(seed),
        }
    }

    fn with_samples(&self, n: usize) -> Self {
        Self {
            inner: self.inner.clone().with_samples(n),
        }
    }

    /// Monte Carlo estimate of `P_T f(x)` as a dict.
    fn semigroup<'py>(&self, py: Python<'py>, f: &Bound<'py, PyAny>, x: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let f: TestFunction = from_py(f)?;
        let s = &self.inner;
        let e = py.detach(|| mc_semigroup(&f, s, &x)).map_err(err)?;
        to_py(py, &e)
    }

    /// Log Girsanov weights of `n_samples` coupled pairs.
    fn log_weights(&self, py: Python<'_>, kind: &str, x: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
        let k = coupling(kind, x, y)?;
        let s = &self.inner;
        let b = py.detach(|| sample_coupled(s, &k)).map_err(err)?;
        Ok(b.log_weights)
    }

    /// `E R^{p/(p-1)}` as a dict.
    fn weight_moment<'py>(
        &self,
        py: Python<'py>,
        kind: &str,
        x: Vec<f64>,
        y: Vec<f64>,
        p: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let k = coupling(kind, x, y)?;
        let s = &self.inner;
        let e = py.detach(|| weight_moment(s, &k, p)).map_err(err)?;
        to_py(py, &e)
    }

    /// One-dimensional terminal density histogram as a dict.
    fn density<'py>(&self, py: Python<'py>, x: Vec<f64>, lo: f64, hi: f64, bins: usize) -> PyResult<Bound<'py, PyAny>> {
        let s = &self.inner;
        let h = py.detach(|| density_histogram(s, &x, lo, hi, bins)).map_err(err)?;
        to_py(py, &h)
    }
}

/// Runs individual checks on a scenario with a fixed Krylov constant.
#[pyclass(name = "Verifier")]
struct PyVerifier {
    ctx: VerifyContext,
}

#[pymethods]
impl PyVerifier {
    #[new]
    #[pyo3(signature = (scenario, kappa, estimated = false))]
    fn new(scenario: &PyScenario, kappa: f64, estimated: bool) -> PyResult<Self> {
        let source = if estimated {
            KappaSource::Estimated
        } else {
            KappaSource::Given
        };
        Ok(Self {
            ctx: VerifyContext::new(scenario.inner.clone(), kappa, source).map_err(err)?,
        })
    }

    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.ctx.constants().map_err(err)?)
    }

    fn harnack<'py>(
        &self,
        py: Python<'py>,
        f: &Bound<'py, PyAny>,
        x: Vec<f64>,
        y: Vec<f64>,
        p: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f: TestFunction = from_py(f)?;
        let r = py
            .detach(|| verify::check_harnack(&self.ctx, &f, &x, &y, p))
            .map_err(err)?;
        to_py(py, &r)
    }

    fn weight_moment_bound<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        y: Vec<f64>,
        p: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let r = py
            .detach(|| verify::check_weight_moment_bound(&self.ctx, &x, &y, p))
            .map_err(err)?;
        to_py(py, &r)
    }

    #[pyo3(signature = (f, x, y, coupling = "harnack"))]
    fn girsanov_consistency<'py>(
        &self,
        py: Python<'py>,
        f: &Bound<'py, PyAny>,
        x: Vec<f64>,
        y: Vec<f64>,
        coupling: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f: TestFunction = from_py(f)?;
        let k = self::coupling(coupling, x, y)?;
        let r = py
            .detach(|| verify::check_girsanov_consistency(&self.ctx, &f, &k))
            .map_err(err)?;
        to_py(py, &r)
    }

    fn shift_log_harnack<'py>(
        &self,
        py: Python<'py>,
        f: &Bound<'py, PyAny>,
        variant: &str,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f: TestFunction = from_py(f)?;
        let v = self::variant(variant)?;
        let r = py
            .detach(|| verify::check_shift_log_harnack(&self.ctx, &f, v, &x, &y))
            .map_err(err)?;
        to_py(py, &r)
    }

    fn shift_harnack<'py>(
        &self,
        py: Python<'py>,
        f: &Bound<'py, PyAny>,
        variant: &str,
        p: f64,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f: TestFunction = from_py(f)?;
        let v = self::variant(variant)?;
        let r = py
            .detach(|| verify::check_shift_harnack(&self.ctx, &f, v, p, &x, &y))
            .map_err(err)?;
        to_py(py, &r)
    }

    /// `g` is a space-time function dict: `{"start", "end", "spatial"}`.
    fn krylov<'py>(&self, py: Python<'py>, g: &Bound<'py, PyAny>, x: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let g: SpaceTimeFn = from_py(g)?;
        let drift = &self.ctx.scenario.drift;
        let e = harnack_lab::estimate::KrylovExponents::from_drift_exponents(drift.p(), drift.q(), drift.dim())
            .map_err(err)?;
        let r = py.detach(|| verify::check_krylov(&self.ctx, &g, &x, e)).map_err(err)?;
        to_py(py, &r)
    }

    fn variance_gradient<'py>(
        &self,
        py: Python<'py>,
        f: &Bound<'py, PyAny>,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f: TestFunction = from_py(f)?;
        let r = py
            .detach(|| verify::check_variance_gradient(&self.ctx, &f, &x, &y))
            .map_err(err)?;
        to_py(py, &r)
    }
}

/// `(1 - (2p+2) beta r^2 / (p-1)^2)^{-(p-1)/2}`, infinite past the threshold.
#[pyfunction]
fn harnack_factor(p: f64, beta: f64, displacement: f64) -> PyResult<f64> {
    verify::harnack_factor(p, beta, displacement).map_err(err)
}

#[pyfunction]
fn beta_constant(horizon: f64, k_lq_norm: f64, delta: f64, kappa: f64) -> PyResult<f64> {
    verify::beta_constant(horizon, k_lq_norm, delta, kappa).map_err(err)
}

#[pyfunction]
fn derive_seed(master: u64, label: &str) -> u64 {
    harnack_lab::seeding::derive_seed(master, label)
}

#[pymodule]
fn harnack_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyExperiment>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyVerifier>()?;
    m.add_function(wrap_pyfunction!(harnack_factor, m)?)?;
    m.add_function(wrap_pyfunction!(beta_constant, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
