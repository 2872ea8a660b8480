//! Python bindings: scenes, expressions and the verification operations.
//!
//! The module mirrors the CLI surface: load or build a scene, then ask for
//! validation, residual reports, spectra, geodesics, conservation and
//! brackets. Reports come back as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};

use pqproj_core::catalog;
use pqproj_core::error::Error;
use pqproj_core::expr::ScalarExpr;
use pqproj_core::geometry::{integrate_geodesic, GeodesicState, Termination};
use pqproj_core::integrals::{self, IntegralSpec, PhasePoint};
use pqproj_core::sampling::sample_box;
use pqproj_core::scene::{self, EquationTag, PQScene};
use pqproj_core::scene_file::SceneFile;
use pqproj_core::spectra;
use pqproj_core::tol;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py_report<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value)
        .map_err(|e| PyValueError::new_err(format!("serialization: {e}")))?;
    json_to_py(py, &json)
}

fn matrix_to_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn parse_equation(eq: &str) -> PyResult<EquationTag> {
    Ok(match eq {
        "main" => EquationTag::Main,
        "pqproj" => EquationTag::PqProj,
        "projective" => EquationTag::Projective,
        "hprojective" => EquationTag::HProjective,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown equation `{other}`; expected main, pqproj, projective or hprojective"
            )))
        }
    })
}

/// A parsed scalar expression over named chart coordinates.
#[pyclass(name = "Expr")]
struct PyExpr {
    inner: ScalarExpr,
}

#[pymethods]
impl PyExpr {
    /// Evaluate at a point.
    fn eval(&self, point: Vec<f64>) -> PyResult<f64> {
        self.inner.eval(&point).map_err(py_err)
    }

    /// Gradient at a point by forward-mode dual numbers.
    fn grad(&self, point: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.eval_jet(&point).map_err(py_err)?.grad)
    }

    #[getter]
    fn coords(&self) -> Vec<String> {
        self.inner.coords().to_vec()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({})", self.inner)
    }
}

/// Parse an expression against a list of coordinate names.
#[pyfunction]
fn parse_expr(text: &str, coords: Vec<String>) -> PyResult<PyExpr> {
    Ok(PyExpr { inner: pqproj_core::expr::parse_expr(text, &coords).map_err(py_err)? })
}

/// Names of the catalog scenes, positive and negative.
#[pyfunction]
fn catalog_names() -> Vec<String> {
    let mut names = vec![
        "affine".to_string(),
        "affine_m3".to_string(),
        "dini".to_string(),
        "sphere".to_string(),
        "cp1".to_string(),
    ];
    names.extend(catalog::negative_scenes().into_iter().map(|(n, _, _)| n));
    names
}

/// A validated metric-pair scene on a box chart.
#[pyclass(name = "Scene")]
struct PyScene {
    inner: PQScene,
}

#[pymethods]
impl PyScene {
    /// Load from scene-file JSON text.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file = SceneFile::from_json(text).map_err(py_err)?;
        Ok(PyScene { inner: file.to_scene().map_err(py_err)? })
    }

    /// Load from a scene file on disk.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Self::from_json(&text)
    }

    /// Build a named catalog scene (admission gates re-run; negative scenes
    /// are returned un-gated).
    #[staticmethod]
    fn catalog(name: &str) -> PyResult<Self> {
        let file = catalog::scene_file_by_name(name).map_err(py_err)?;
        Ok(PyScene { inner: file.to_scene().map_err(py_err)? })
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.inner.name.clone()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn coords(&self) -> Vec<String> {
        self.inner.coords.clone()
    }

    #[getter]
    fn domain(&self) -> Vec<(f64, f64)> {
        self.inner.chart.intervals().to_vec()
    }

    fn to_json(&self) -> String {
        SceneFile::from_scene(&self.inner).to_json()
    }

    /// Check the algebraic structure conditions at sampled points.
    #[pyo3(signature = (samples = tol::DEFAULT_SAMPLES, seed = tol::DEFAULT_SEED))]
    fn validate<'py>(
        &self,
        py: Python<'py>,
        samples: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let report = scene::validate_scene(&self.inner, samples, seed).map_err(py_err)?;
        to_py_report(py, &report)
    }

    /// Residual report for one defining equation
    /// ("main", "pqproj", "projective" or "hprojective").
    #[pyo3(signature = (eq = "main", samples = tol::DEFAULT_SAMPLES, seed = tol::DEFAULT_SEED))]
    fn residual_report<'py>(
        &self,
        py: Python<'py>,
        eq: &str,
        samples: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let tag = parse_equation(eq)?;
        let report = scene::residual_report(&self.inner, tag, samples, seed, tol::RESIDUAL_TOL)
            .map_err(py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("equation", tag.as_str())?;
        dict.set_item("samples", report.samples.len())?;
        dict.set_item("max_relative", report.max_relative)?;
        dict.set_item("mean_relative", report.mean_relative)?;
        dict.set_item("tolerance", report.tolerance)?;
        dict.set_item("passed", report.passed)?;
        Ok(dict.into_any())
    }

    /// Structural classification verdict with named evidence.
    #[pyo3(signature = (samples = tol::DEFAULT_SAMPLES, seed = tol::DEFAULT_SEED))]
    fn classify<'py>(
        &self,
        py: Python<'py>,
        samples: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let classification =
            spectra::classify_pair(&self.inner, samples, seed).map_err(py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("verdict", classification.verdict.as_str())?;
        dict.set_item("evidence", to_py_report(py, &classification.evidence)?)?;
        Ok(dict.into_any())
    }

    /// The pair tensor A at a point, as nested lists.
    fn a_matrix(&self, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_to_rows(&self.inner.a_value_at(&point).map_err(py_err)?))
    }

    /// The vector field driving the PDE right-hand side.
    fn lambda_vec(&self, point: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.lambda_at(&point).map_err(py_err)?.iter().cloned().collect())
    }

    /// The 1-form recovered from Lambda.
    fn phi(&self, point: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.phi_at(&point).map_err(py_err)?.iter().cloned().collect())
    }

    /// Sorted eigenvalues of A, g-orthonormal eigenvectors (columns) and
    /// (value, multiplicity) clusters at a point.
    fn spectrum<'py>(&self, py: Python<'py>, point: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let spec = spectra::eigen_at(&self.inner, &point).map_err(py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("eigenvalues", spec.eigenvalues.clone())?;
        dict.set_item("eigenvectors", matrix_to_rows(&spec.eigenvectors))?;
        let clusters: Vec<(f64, usize)> = spec
            .clusters
            .iter()
            .map(|c| (c.value, c.multiplicity))
            .collect();
        dict.set_item("clusters", clusters)?;
        Ok(dict.into_any())
    }

    /// g-gradient of a simple eigenvalue branch.
    fn eigenvalue_gradient(&self, point: Vec<f64>, branch: usize) -> PyResult<Vec<f64>> {
        Ok(spectra::eigenvalue_gradient_at(&self.inner, &point, branch)
            .map_err(py_err)?
            .iter()
            .cloned()
            .collect())
    }

    /// Integrate a geodesic of g; returns times, positions, velocities and
    /// the termination reason.
    #[pyo3(signature = (x0, v0, duration = 1.0, h = tol::DEFAULT_STEP))]
    fn geodesic<'py>(
        &self,
        py: Python<'py>,
        x0: Vec<f64>,
        v0: Vec<f64>,
        duration: f64,
        h: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let init = GeodesicState { x: x0, v: v0 };
        let traj = integrate_geodesic(&self.inner.g, &self.inner.chart, &init, duration, h)
            .map_err(py_err)?;
        let dict = PyDict::new(py);
        let times: Vec<f64> = traj.samples.iter().map(|(t, _)| *t).collect();
        let xs: Vec<Vec<f64>> = traj.samples.iter().map(|(_, s)| s.x.clone()).collect();
        let vs: Vec<Vec<f64>> = traj.samples.iter().map(|(_, s)| s.v.clone()).collect();
        dict.set_item("t", times)?;
        dict.set_item("x", xs)?;
        dict.set_item("v", vs)?;
        dict.set_item(
            "termination",
            match traj.termination {
                Termination::TimeElapsed => "time-elapsed",
                Termination::LeftDomain => "left-domain",
            },
        )?;
        Ok(dict.into_any())
    }

    /// The quadratic integral F_t at (point, tangent vector X).
    fn f_t(&self, t: f64, x_vec: Vec<f64>, point: Vec<f64>) -> PyResult<f64> {
        integrals::f_t_at(&self.inner, t, &x_vec, &point).map_err(py_err)
    }

    /// The smooth eigenframe tensor of the c-cluster, as nested lists.
    fn t_tensor(&self, c: f64, k: usize, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(matrix_to_rows(
            &integrals::t_tensor_at(&self.inner, c, k, &point).map_err(py_err)?,
        ))
    }

    /// Pointwise regularized integral (requires k = 1 - eps).
    fn f_c_regularized(
        &self,
        c: f64,
        k: usize,
        x_vec: Vec<f64>,
        point: Vec<f64>,
    ) -> PyResult<f64> {
        integrals::f_c_regularized_at(&self.inner, c, k, &x_vec, &point).map_err(py_err)
    }

    /// Exponent diagnostic: arbitrary k drives the value to zero or infinity
    /// approaching the eigenvalue level set.
    fn f_c_exponent_diag(
        &self,
        c: f64,
        k: usize,
        x_vec: Vec<f64>,
        point: Vec<f64>,
    ) -> PyResult<f64> {
        integrals::f_c_exponent_diag_at(&self.inner, c, k, &x_vec, &point).map_err(py_err)
    }

    /// Drift report for the integral family along one geodesic.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (t_values, x0, v0, duration = 1.0, h = tol::DEFAULT_STEP, regularized = None))]
    fn conservation<'py>(
        &self,
        py: Python<'py>,
        t_values: Vec<f64>,
        x0: Vec<f64>,
        v0: Vec<f64>,
        duration: f64,
        h: f64,
        regularized: Option<(f64, usize)>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mut specs: Vec<IntegralSpec> =
            t_values.iter().map(|&t| IntegralSpec::plain(t)).collect();
        if let Some((c, k)) = regularized {
            specs.push(IntegralSpec::regularized(c, k).map_err(py_err)?);
        }
        let init = GeodesicState { x: x0, v: v0 };
        let traj = integrate_geodesic(&self.inner.g, &self.inner.chart, &init, duration, h)
            .map_err(py_err)?;
        let report = integrals::conservation_report(&self.inner, &traj, &specs).map_err(py_err)?;
        to_py_report(py, &report)
    }

    /// Canonical Poisson bracket of F~_t and F~_s at a phase point.
    fn poisson_bracket(&self, t: f64, s: f64, x: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
        integrals::poisson_bracket_at(&self.inner, t, s, &PhasePoint { x, p }).map_err(py_err)
    }

    /// Seeded low-discrepancy sample of the domain box.
    #[pyo3(signature = (n = tol::DEFAULT_SAMPLES, seed = tol::DEFAULT_SEED))]
    fn sample_points(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        sample_box(&self.inner.chart, n, seed)
    }
}

#[pymodule]
fn pqproj(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyExpr>()?;
    m.add_function(wrap_pyfunction!(parse_expr, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add("RESIDUAL_TOL", tol::RESIDUAL_TOL)?;
    m.add("DRIFT_TOL", tol::DRIFT_TOL)?;
    m.add("BRACKET_TOL", tol::BRACKET_TOL)?;
    Ok(())
}
