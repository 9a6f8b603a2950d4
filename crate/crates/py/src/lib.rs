use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use conekit::config::{Command, RunConfig};
use conekit::curvature::{curvature_at, fit_blowup_rate, log_radii, RateQuantity};
use conekit::holder::{cone_disc_points, holder_seminorm, ConeDistance, DistanceConvention, GridFunction};
use conekit::model_geometry::{BaseMetric, CorrectionSign, DomainSpec, HermitianWeight, MetricField};
use conekit::runner::{holder_function, run, RunOptions};
use conekit::solver::{build_rhs, newton_solve, SolveOptions, SourceSpec};
use conekit::symbolic::analyze_curvature;
use conekit::ConeError;

fn err(e: ConeError) -> PyErr {
    match e {
        ConeError::InvalidParams(_) | ConeError::InvalidDomain(_) | ConeError::UnknownCatalog { .. } | ConeError::Config(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_sign(sign: &str) -> PyResult<CorrectionSign> {
    match sign {
        "subtract" => Ok(CorrectionSign::Subtract),
        "add" => Ok(CorrectionSign::Add),
        _ => Err(PyValueError::new_err(format!("sign must be 'subtract' or 'add', got '{sign}'"))),
    }
}

/// Scalar parameters of the metric family.
#[pyclass(name = "ConeParams", module = "pyconekit", skip_from_py_object)]
#[derive(Clone)]
struct PyConeParams {
    inner: conekit::model_geometry::ConeParams,
}

#[pymethods]
impl PyConeParams {
    #[new]
    #[pyo3(signature = (tau, tau_prime, a_coef=1.0, c_coef=0.0, epsilon=0.0, mu=0.0))]
    fn new(tau: f64, tau_prime: f64, a_coef: f64, c_coef: f64, epsilon: f64, mu: f64) -> PyResult<Self> {
        let p = conekit::model_geometry::ConeParams::new(tau, tau_prime, a_coef, c_coef, epsilon)
            .map_err(err)?
            .with_mu(mu);
        p.validate().map_err(err)?;
        Ok(Self { inner: p })
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn tau_prime(&self) -> f64 {
        self.inner.tau_prime
    }

    #[getter]
    fn c_coef(&self) -> f64 {
        self.inner.c_coef
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    fn with_epsilon(&self, epsilon: f64) -> PyResult<Self> {
        let p = self.inner.with_epsilon(epsilon);
        p.validate().map_err(err)?;
        Ok(Self { inner: p })
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ConeParams(tau={}, tau_prime={}, a_coef={}, c_coef={}, epsilon={}, mu={})",
            p.tau, p.tau_prime, p.a_coef, p.c_coef, p.epsilon, p.mu
        )
    }
}

/// Reference metric on the model domain with a catalog weight and a flat base.
#[pyclass(name = "ReferenceMetric", module = "pyconekit")]
struct PyReferenceMetric {
    inner: conekit::model_geometry::ReferenceMetric,
}

#[pymethods]
impl PyReferenceMetric {
    #[new]
    #[pyo3(signature = (params, dim=1, weight="unit", base_scale=1.0, sign="subtract", period=1.0))]
    fn new(params: PyRef<'_, PyConeParams>, dim: usize, weight: &str, base_scale: f64, sign: &str, period: f64) -> PyResult<Self> {
        let w = HermitianWeight::from_catalog(weight, period).map_err(err)?;
        let m = conekit::model_geometry::ReferenceMetric::new(params.inner, w, BaseMetric::scaled_flat(dim, base_scale))
            .map_err(err)?
            .with_sign(parse_sign(sign)?);
        Ok(Self { inner: m })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Metric matrix at `point` as nested lists of complex numbers.
    fn metric(&self, point: Vec<Complex64>) -> PyResult<Vec<Vec<Complex64>>> {
        let g = self.inner.metric_unchecked(&point).map_err(err)?;
        Ok((0..g.nrows()).map(|a| (0..g.ncols()).map(|b| g[(a, b)]).collect()).collect())
    }

    /// Curvature summary at `point`.
    fn curvature<'py>(&self, py: Python<'py>, point: Vec<Complex64>) -> PyResult<Bound<'py, PyDict>> {
        let s = curvature_at(&self.inner, &point).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("normalized_bisectional", s.normalized_bisectional)?;
        d.set_item("component_1111", s.component(0, 0, 0, 0))?;
        d.set_item("frame_pairs", s.frame_pairs.clone())?;
        d.set_item("condition_number", s.condition_number)?;
        d.set_item("ill_conditioned", s.ill_conditioned)?;
        Ok(d)
    }

    /// Log-log fit of `quantity` ("normalized", "component", "mixed") over
    /// `count` radii from `r_max` down to `r_min`.
    #[pyo3(signature = (quantity="normalized", r_max=0.1, r_min=0.001, count=13, theta=0.3))]
    fn fit_blowup_rate<'py>(
        &self,
        py: Python<'py>,
        quantity: &str,
        r_max: f64,
        r_min: f64,
        count: usize,
        theta: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let q = match quantity {
            "normalized" => RateQuantity::Normalized,
            "component" => RateQuantity::Component,
            "mixed" => RateQuantity::Mixed,
            _ => return Err(PyValueError::new_err(format!("unknown quantity '{quantity}'"))),
        };
        let fit = fit_blowup_rate(&self.inner, q, &log_radii(r_max, r_min, count), theta).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("exponent", fit.exponent)?;
        d.set_item("coefficient", fit.coefficient)?;
        d.set_item("residual", fit.residual)?;
        d.set_item("radii", fit.radii)?;
        d.set_item("values", fit.values)?;
        d.set_item("all_positive", fit.all_positive)?;
        Ok(d)
    }

    /// Solve the Dirichlet problem with a catalog source on the radial
    /// (`dim = 1`) grid; returns the potential and the solve report.
    #[pyo3(signature = (source="bump", rho_max=1.0, radial_points=32))]
    fn solve<'py>(&self, py: Python<'py>, source: &str, rho_max: f64, radial_points: usize) -> PyResult<Bound<'py, PyDict>> {
        if self.inner.dim() != 1 {
            return Err(PyValueError::new_err("solve is exposed for dim = 1"));
        }
        let p = self.inner.params;
        let d = DomainSpec::model(1, p.tau, 0.0, rho_max, radial_points);
        let field = MetricField::from_reference(&self.inner, &d).map_err(err)?;
        let spec = SourceSpec::from_catalog(source).map_err(err)?;
        let raw = spec.sample(&d, p.epsilon).map_err(err)?;
        let s = build_rhs(&raw, &field, false).map_err(err)?;
        let (phi, rep) = newton_solve(&p, &field, &s, &SolveOptions::default(), None).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("rho", d.radial_nodes())?;
        out.set_item("phi", phi.values)?;
        out.set_item("iterations", rep.iterations)?;
        out.set_item("residual", rep.residual)?;
        out.set_item("phi_sup", rep.monitor.phi_sup)?;
        out.set_item("sup_trace", rep.monitor.sup_trace)?;
        Ok(out)
    }
}

/// Exact cancellation and leading-coefficient analysis.
#[pyfunction]
#[pyo3(signature = (sign="subtract"))]
fn symbolic_verify<'py>(py: Python<'py>, sign: &str) -> PyResult<Bound<'py, PyDict>> {
    let a = analyze_curvature(parse_sign(sign)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("cancellation_exact", a.cancellation_exact)?;
    d.set_item("cancelled_coefficient", a.cancelled_coefficient)?;
    d.set_item("leading_exponent", a.leading_exponent)?;
    d.set_item("leading_coefficient", a.leading_coefficient)?;
    d.set_item("matches_expected", a.matches_expected)?;
    d.set_item("sign_on_region", a.sign_on_region)?;
    Ok(d)
}

/// Hölder seminorm of a catalog function ("r2tau", "re_z", "phase") on the
/// unit cone disc.
#[pyfunction]
#[pyo3(signature = (function, tau, alpha=1.0, radial=32, angular=16, convention="xi_map"))]
fn holder<'py>(
    py: Python<'py>,
    function: &str,
    tau: f64,
    alpha: f64,
    radial: usize,
    angular: usize,
    convention: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let conv = match convention {
        "xi_map" => DistanceConvention::XiMap,
        "uniformization" => DistanceConvention::Uniformization,
        _ => return Err(PyValueError::new_err(format!("unknown convention '{convention}'"))),
    };
    let f = holder_function(function, tau).map_err(err)?;
    let dist = ConeDistance::new(tau, conv).map_err(err)?;
    let g = GridFunction::from_fn(cone_disc_points(tau, radial, angular), &f);
    let r = holder_seminorm(&g, alpha, &dist, u64::MAX, 1).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sup", r.sup)?;
    d.set_item("seminorm", r.seminorm)?;
    d.set_item("total", r.total)?;
    d.set_item("pairs_checked", r.pairs_checked)?;
    Ok(d)
}

/// Run a CLI command from a config file; returns `(exit_code, report_json)`.
#[pyfunction]
#[pyo3(signature = (command, config, out=None, seed=None, workers=1))]
fn run_config(command: &str, config: std::path::PathBuf, out: Option<std::path::PathBuf>, seed: Option<u64>, workers: usize) -> PyResult<(i32, String)> {
    let cmd = <Command as clap::ValueEnum>::from_str(command, false).map_err(PyValueError::new_err)?;
    let cfg = RunConfig::load(&config).map_err(err)?;
    let opts = RunOptions {
        out,
        seed,
        workers,
        ..RunOptions::default()
    };
    let o = run(&cfg, cmd, &opts).map_err(err)?;
    Ok((o.exit_code(), o.report.to_string()))
}

#[pymodule]
fn pyconekit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConeParams>()?;
    m.add_class::<PyReferenceMetric>()?;
    m.add_function(wrap_pyfunction!(symbolic_verify, m)?)?;
    m.add_function(wrap_pyfunction!(holder, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
