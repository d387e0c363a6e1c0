//! Python bindings: double numbers as a class, everything else as functions
//! returning plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyType;
use serde::Serialize;
use slag_core::dnum::{Component, DNumber as Core};
use slag_core::lin::{self, RMat};
use slag_core::planes::{self, Picture};
use slag_core::transport::{self, CostFunction, Density1D};
use slag_core::{holo2d, PlaneBasis, SlagError, DEFAULT_TOL};

fn err(e: SlagError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hand a serializable report to Python through its own `json` module.
fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn square(rows: &[Vec<f64>]) -> PyResult<RMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(lin::from_rows(rows))
}

fn plane_from(columns: Vec<Vec<f64>>) -> PyResult<PlaneBasis> {
    let k = columns.len();
    if k == 0 || columns.iter().any(|c| c.len() != 2 * k) {
        return Err(PyValueError::new_err(
            "expected n columns of length 2n, ordered x1..xn then y1..yn",
        ));
    }
    let cols = RMat::from_fn(2 * k, k, |i, j| columns[j][i]);
    PlaneBasis::new(cols).map_err(err)
}

fn picture(name: &str) -> PyResult<Picture> {
    match name {
        "x" => Ok(Picture::X),
        "null" => Ok(Picture::Null),
        _ => Err(PyValueError::new_err("picture must be \"x\" or \"null\"")),
    }
}

/// A double number `re + τ·im` with `τ² = 1`.
#[pyclass(frozen, skip_from_py_object, name = "DNumber", module = "slag_py")]
#[derive(Clone, Copy)]
struct PyDNumber(Core);

#[pymethods]
impl PyDNumber {
    #[new]
    #[pyo3(signature = (re, im = 0.0))]
    fn new(re: f64, im: f64) -> Self {
        PyDNumber(Core::new(re, im))
    }

    /// Build `u·e + v·ē` from null coordinates.
    #[classmethod]
    fn from_null(_cls: &Bound<'_, PyType>, u: f64, v: f64) -> Self {
        PyDNumber(Core::from_null(u, v))
    }

    #[getter]
    fn re(&self) -> f64 {
        self.0.re
    }

    #[getter]
    fn im(&self) -> f64 {
        self.0.im
    }

    fn null(&self) -> (f64, f64) {
        self.0.null()
    }

    fn conj(&self) -> Self {
        PyDNumber(self.0.conj())
    }

    fn quad(&self) -> f64 {
        self.0.quad()
    }

    fn component(&self) -> &'static str {
        match self.0.component() {
            Component::Positive => "positive",
            Component::Negative => "negative",
            Component::TauPositive => "tau_positive",
            Component::TauNegative => "tau_negative",
            Component::Null => "null",
        }
    }

    /// `None` on the null cone.
    fn inverse(&self) -> Option<Self> {
        self.0.inverse().map(PyDNumber)
    }

    fn exp(&self) -> Self {
        PyDNumber(self.0.exp())
    }

    fn log(&self) -> PyResult<Self> {
        self.0
            .log()
            .map(PyDNumber)
            .map_err(|c| PyValueError::new_err(format!("no logarithm on the {c:?} component")))
    }

    fn __add__(&self, o: &Self) -> Self {
        PyDNumber(self.0 + o.0)
    }

    fn __sub__(&self, o: &Self) -> Self {
        PyDNumber(self.0 - o.0)
    }

    fn __mul__(&self, o: &Self) -> Self {
        PyDNumber(self.0 * o.0)
    }

    fn __neg__(&self) -> Self {
        PyDNumber(-self.0)
    }

    fn __eq__(&self, o: &Self) -> bool {
        self.0 == o.0
    }

    fn __repr__(&self) -> String {
        format!("DNumber({}, {})", self.0.re, self.0.im)
    }
}

/// Predicates, `dz` and calibration data of the plane spanned by `columns`.
#[pyfunction]
#[pyo3(signature = (columns, tol = DEFAULT_TOL))]
fn analyze_plane<'py>(
    py: Python<'py>,
    columns: Vec<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &planes::analyze_plane(&plane_from(columns)?, tol))
}

#[pyfunction]
fn dz(columns: Vec<Vec<f64>>) -> PyResult<PyDNumber> {
    Ok(PyDNumber(planes::dz_of(plane_from(columns)?.columns())))
}

#[pyfunction]
fn canonical_angles<'py>(py: Python<'py>, columns: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &planes::canonical_angles(&plane_from(columns)?).map_err(err)?,
    )
}

/// Graph predicates for `y = Ax` (`picture="x"`) or `v = Bu` (`picture="null"`).
#[pyfunction]
#[pyo3(signature = (matrix, picture = "x", tol = DEFAULT_TOL))]
fn graph_tests<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<f64>>,
    picture: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &planes::graph_tests(self::picture(picture)?, &square(&matrix)?, tol),
    )
}

#[pyfunction]
fn cayley_graph(matrix: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let b = planes::cayley_graph(&square(&matrix)?).map_err(err)?;
    Ok(lin::to_rows(&b))
}

#[pyfunction]
#[pyo3(signature = (n, count, seed = 0, eps = 1e-9))]
fn sample_mealy<'py>(
    py: Python<'py>,
    n: usize,
    count: usize,
    seed: u64,
    eps: f64,
) -> PyResult<Bound<'py, PyAny>> {
    if n == 0 {
        return Err(PyValueError::new_err("n must be positive"));
    }
    let r = py.detach(|| planes::sample_mealy(n, count, seed, eps));
    to_py(py, &r)
}

/// Monotone rearrangement between densities sampled uniformly on `[lo, hi]`.
#[pyfunction]
#[pyo3(signature = (source, target, tol = DEFAULT_TOL))]
fn ot_1d<'py>(
    py: Python<'py>,
    source: (f64, f64, Vec<f64>),
    target: (f64, f64, Vec<f64>),
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let rho = Density1D::new(source.0, source.1, source.2).map_err(err)?;
    let rho_t = Density1D::new(target.0, target.1, target.2).map_err(err)?;
    to_py(py, &transport::ot_1d(&rho, &rho_t, tol))
}

/// Exact matching of two equal-size point clouds under the quadratic cost.
#[pyfunction]
fn ot_discrete<'py>(
    py: Python<'py>,
    mu: Vec<Vec<f64>>,
    nu: Vec<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let dim = mu.first().map_or(1, Vec::len);
    let plan = transport::ot_discrete(&mu, &nu, &CostFunction::quadratic(dim)).map_err(err)?;
    to_py(py, &plan)
}

/// The complex line of slope `a + ib` carried to `D²`, checked both ways.
#[pyfunction]
#[pyo3(signature = (a, b, tol = DEFAULT_TOL))]
fn plane_correspondence<'py>(
    py: Python<'py>,
    a: f64,
    b: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &holo2d::plane_correspondence(a, b, tol))
}

#[pymodule]
fn slag_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDNumber>()?;
    m.add("DEFAULT_TOL", DEFAULT_TOL)?;
    m.add_function(wrap_pyfunction!(analyze_plane, m)?)?;
    m.add_function(wrap_pyfunction!(dz, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_angles, m)?)?;
    m.add_function(wrap_pyfunction!(graph_tests, m)?)?;
    m.add_function(wrap_pyfunction!(cayley_graph, m)?)?;
    m.add_function(wrap_pyfunction!(sample_mealy, m)?)?;
    m.add_function(wrap_pyfunction!(ot_1d, m)?)?;
    m.add_function(wrap_pyfunction!(ot_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(plane_correspondence, m)?)?;
    Ok(())
}
