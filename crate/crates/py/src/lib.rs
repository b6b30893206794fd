//! Python bindings: piecewise-linear paths, affine connection fields,
//! holonomy, the finite-difference derivative operators, and the seeded
//! identity suite. Matrices cross the boundary as nested lists of complex
//! numbers; directions and points as lists of floats.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use loopcalc_core::calculus::{
    connection_derivative, loop_derivative, mandelstam_derivative, section_derivative, ArcSection,
    DerivativeResult, FdScheme, HolonomyFunctional, Section, Stencil, TransportSection,
};
use loopcalc_core::formats;
use loopcalc_core::gauge::{CMatrix, ConnectionField, GroupTag, IntegratorOptions};
use loopcalc_core::paths::{self, Loop, Path, Point};
use loopcalc_core::verify::{self, RandomSpec, SuiteTolerances};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(coords: Vec<f64>) -> PyResult<Point> {
    Point::new(coords).map_err(value_err)
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(PyValueError::new_err(
            "matrix rows must be nonempty and equal length",
        ));
    }
    Ok(CMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
}

fn scheme_from(eps_list: Option<Vec<f64>>, stencil: &str, richardson: bool) -> PyResult<FdScheme> {
    let mut scheme = FdScheme::default();
    if let Some(list) = eps_list {
        scheme.eps_list = list;
    }
    scheme.stencil = match stencil {
        "central" => Stencil::Central,
        "forward" => Stencil::Forward,
        other => return Err(PyValueError::new_err(format!("unknown stencil {other:?}"))),
    };
    scheme.richardson = richardson;
    scheme.validate().map_err(value_err)?;
    Ok(scheme)
}

fn integrator(steps: usize, reunitarize: bool) -> PyResult<IntegratorOptions> {
    if steps == 0 {
        return Err(PyValueError::new_err("steps must be at least 1"));
    }
    Ok(IntegratorOptions {
        steps_per_segment: steps,
        reunitarize,
    })
}

type DeriveTuple = (Vec<Vec<Complex64>>, f64, f64);

fn derive_tuple(d: DerivativeResult) -> DeriveTuple {
    (matrix_rows(&d.value), d.est_order, d.est_error)
}

/// Piecewise-linear path through explicit vertices.
#[pyclass(name = "Path", from_py_object)]
#[derive(Clone)]
struct PyPath {
    inner: Path,
}

#[pymethods]
impl PyPath {
    #[new]
    #[pyo3(signature = (base, vertices=Vec::new()))]
    fn new(base: Vec<f64>, vertices: Vec<Vec<f64>>) -> PyResult<Self> {
        let base = point(base)?;
        let vertices = vertices.into_iter().map(point).collect::<PyResult<_>>()?;
        Ok(PyPath {
            inner: Path::new(base, vertices).map_err(value_err)?,
        })
    }

    /// Parse the line-oriented path file format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyPath {
            inner: formats::parse_path(text).map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        formats::write_path(&self.inner)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn base(&self) -> Vec<f64> {
        self.inner.base().coords().to_vec()
    }

    #[getter]
    fn vertices(&self) -> Vec<Vec<f64>> {
        self.inner
            .vertices()
            .iter()
            .map(|p| p.coords().to_vec())
            .collect()
    }

    #[getter]
    fn endpoint(&self) -> Vec<f64> {
        self.inner.endpoint().coords().to_vec()
    }

    fn compose(&self, other: &PyPath) -> PyResult<Self> {
        Ok(PyPath {
            inner: self.inner.compose(&other.inner).map_err(value_err)?,
        })
    }

    fn inverse(&self) -> Self {
        PyPath {
            inner: self.inner.inverse(),
        }
    }

    /// Canonical form modulo retraces and collinear splits.
    fn reduce(&self) -> Self {
        PyPath {
            inner: self.inner.reduce(),
        }
    }

    fn thin_equal(&self, other: &PyPath) -> PyResult<bool> {
        self.inner.thin_equal(&other.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Path(dim={}, vertices={}, endpoint={:?})",
            self.inner.dim(),
            self.inner.vertices().len(),
            self.inner.endpoint().coords()
        )
    }
}

/// Oriented parallelogram loop at `x` spanned by `e1 * u` and `e2 * v`.
#[pyfunction]
fn parallelogram(x: Vec<f64>, u: Vec<f64>, v: Vec<f64>, e1: f64, e2: f64) -> PyResult<PyPath> {
    let x = point(x)?;
    let l = paths::parallelogram(&x, &u, &v, e1, e2).map_err(value_err)?;
    Ok(PyPath {
        inner: l.into_path(),
    })
}

/// Affine connection field `A_mu(x) = C_mu + sum_nu D_mu_nu x^nu`.
#[pyclass(name = "ConnectionField")]
struct PyConnectionField {
    inner: ConnectionField,
}

fn group_tag(group: &str) -> PyResult<GroupTag> {
    match group {
        "u1" => Ok(GroupTag::U1),
        "su2" => Ok(GroupTag::Su2),
        other => {
            let mut it = other.split_whitespace();
            if let (Some("gl"), Some(d), None) = (it.next(), it.next(), it.next()) {
                let d: usize = d.parse().map_err(|_| value_err("bad gl dimension"))?;
                return Ok(GroupTag::Gl(d));
            }
            Err(PyValueError::new_err(format!(
                "unknown group {other:?}; expected 'u1', 'su2', or 'gl <d>'"
            )))
        }
    }
}

#[pymethods]
impl PyConnectionField {
    /// Build from explicit coefficient matrices; `constant[m]` is `C_{m+1}`
    /// and `linear[m][n]` is `D_{m+1,n+1}`.
    #[new]
    fn new(
        group: &str,
        dim: usize,
        constant: Vec<Vec<Vec<Complex64>>>,
        linear: Vec<Vec<Vec<Vec<Complex64>>>>,
    ) -> PyResult<Self> {
        let constant = constant
            .into_iter()
            .map(matrix_from_rows)
            .collect::<PyResult<_>>()?;
        let linear = linear
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(matrix_from_rows)
                    .collect::<PyResult<_>>()
            })
            .collect::<PyResult<_>>()?;
        let inner =
            ConnectionField::new(group_tag(group)?, dim, constant, linear).map_err(value_err)?;
        Ok(PyConnectionField { inner })
    }

    #[staticmethod]
    fn zero(group: &str, dim: usize) -> PyResult<Self> {
        let inner = ConnectionField::zero(group_tag(group)?, dim).map_err(value_err)?;
        Ok(PyConnectionField { inner })
    }

    /// Uniform field of strength `b` on the plane in the symmetric gauge.
    #[staticmethod]
    fn reference_u1(b: f64) -> Self {
        PyConnectionField {
            inner: ConnectionField::reference_u1(b),
        }
    }

    /// The shipped non-abelian affine field on R^3.
    #[staticmethod]
    fn reference_su2() -> Self {
        PyConnectionField {
            inner: ConnectionField::reference_su2(),
        }
    }

    /// Parse the line-oriented field file format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyConnectionField {
            inner: formats::parse_field(text).map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        formats::write_field(&self.inner)
    }

    #[getter]
    fn group(&self) -> String {
        self.inner.group().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `A_mu(x)` for 1-based `mu`.
    fn eval_field(&self, x: Vec<f64>, mu: usize) -> PyResult<Vec<Vec<Complex64>>> {
        let x = point(x)?;
        Ok(matrix_rows(
            &self.inner.eval_field(&x, mu).map_err(value_err)?.0,
        ))
    }

    /// `F_mu_nu(x)` for 1-based indices.
    fn field_strength(&self, x: Vec<f64>, mu: usize, nu: usize) -> PyResult<Vec<Vec<Complex64>>> {
        let x = point(x)?;
        Ok(matrix_rows(
            &self.inner.field_strength(&x, mu, nu).map_err(value_err)?.0,
        ))
    }

    /// Ordered exponential of the field along the path.
    #[pyo3(signature = (path, steps=64, reunitarize=true))]
    fn holonomy(
        &self,
        path: &PyPath,
        steps: usize,
        reunitarize: bool,
    ) -> PyResult<Vec<Vec<Complex64>>> {
        let opts = integrator(steps, reunitarize)?;
        let h = self.inner.holonomy(&path.inner, &opts).map_err(value_err)?;
        Ok(matrix_rows(h.matrix()))
    }

    fn __repr__(&self) -> String {
        format!(
            "ConnectionField(group={:?}, dim={})",
            self.inner.group().to_string(),
            self.inner.dim()
        )
    }
}

/// Endpoint-extension derivative of the holonomy along `v`; returns
/// `(matrix, est_order, est_error)`.
#[pyfunction]
#[pyo3(signature = (field, path, v, eps_list=None, stencil="central", richardson=true, steps=64))]
#[allow(clippy::too_many_arguments)]
fn mandelstam(
    field: &PyConnectionField,
    path: &PyPath,
    v: Vec<f64>,
    eps_list: Option<Vec<f64>>,
    stencil: &str,
    richardson: bool,
    steps: usize,
) -> PyResult<DeriveTuple> {
    let scheme = scheme_from(eps_list, stencil, richardson)?;
    let opts = integrator(steps, true)?;
    let f = HolonomyFunctional::new(&field.inner, opts);
    let d = mandelstam_derivative(&f, &path.inner, &v, &scheme).map_err(value_err)?;
    Ok(derive_tuple(d))
}

fn build_section(path: &Path, kind: &str, radius: f64) -> PyResult<Box<dyn Section>> {
    match kind {
        "transport" => Ok(Box::new(
            TransportSection::new(path.clone(), radius).map_err(value_err)?,
        )),
        "arc" => Ok(Box::new(
            ArcSection::between(path.base().clone(), path.endpoint().clone(), radius)
                .map_err(value_err)?,
        )),
        other => Err(PyValueError::new_err(format!("unknown section {other:?}"))),
    }
}

/// Vertical derivative along axis `mu` (1-based) of the section through the
/// path's endpoint; returns `(matrix, est_order, est_error)`.
#[pyfunction]
#[pyo3(signature = (field, path, mu, section="transport", eps_list=None, stencil="central", richardson=true, steps=64))]
#[allow(clippy::too_many_arguments)]
fn connection(
    field: &PyConnectionField,
    path: &PyPath,
    mu: usize,
    section: &str,
    eps_list: Option<Vec<f64>>,
    stencil: &str,
    richardson: bool,
    steps: usize,
) -> PyResult<DeriveTuple> {
    let scheme = scheme_from(eps_list, stencil, richardson)?;
    let opts = integrator(steps, true)?;
    let f = HolonomyFunctional::new(&field.inner, opts);
    let sec = build_section(&path.inner, section, 1.0 + scheme.max_eps())?;
    let d = connection_derivative(&f, sec.as_ref(), mu, &scheme).map_err(value_err)?;
    Ok(derive_tuple(d))
}

/// Full section derivative along `v`; returns `(matrix, est_order,
/// est_error)`.
#[pyfunction]
#[pyo3(signature = (field, path, v, section="arc", eps_list=None, stencil="central", richardson=true, steps=64))]
#[allow(clippy::too_many_arguments)]
fn section_deriv(
    field: &PyConnectionField,
    path: &PyPath,
    v: Vec<f64>,
    section: &str,
    eps_list: Option<Vec<f64>>,
    stencil: &str,
    richardson: bool,
    steps: usize,
) -> PyResult<DeriveTuple> {
    let scheme = scheme_from(eps_list, stencil, richardson)?;
    let opts = integrator(steps, true)?;
    let f = HolonomyFunctional::new(&field.inner, opts);
    let sec = build_section(&path.inner, section, 1.0 + scheme.max_eps())?;
    let d = section_derivative(&f, sec.as_ref(), &v, &scheme).map_err(value_err)?;
    Ok(derive_tuple(d))
}

/// Parallelogram-insertion second derivative conjugated by `pi`, applied to
/// the loop `gamma` (constant loop when omitted); returns `(matrix,
/// est_order, est_error)`.
#[pyfunction]
#[pyo3(signature = (field, pi, u, v, gamma=None, eps_list=None, stencil="central", richardson=true, steps=64))]
#[allow(clippy::too_many_arguments)]
fn loop_deriv(
    field: &PyConnectionField,
    pi: &PyPath,
    u: Vec<f64>,
    v: Vec<f64>,
    gamma: Option<PyPath>,
    eps_list: Option<Vec<f64>>,
    stencil: &str,
    richardson: bool,
    steps: usize,
) -> PyResult<DeriveTuple> {
    let scheme = scheme_from(eps_list, stencil, richardson)?;
    let opts = integrator(steps, true)?;
    let f = HolonomyFunctional::new(&field.inner, opts);
    let gamma = match gamma {
        Some(g) => Loop::new(g.inner).map_err(value_err)?,
        None => Loop::constant(pi.inner.base().clone()),
    };
    let d = loop_derivative(&f, &pi.inner, &gamma, &u, &v, &scheme).map_err(value_err)?;
    Ok(derive_tuple(d))
}

/// Run the seeded identity suite; returns a dict with `records` (one dict
/// per identity), `notes`, `pass`, and the CSV `report`.
#[pyfunction]
#[pyo3(signature = (field, seed=0, trials=10, tolerances=None))]
fn run_identity_suite<'py>(
    py: Python<'py>,
    field: &PyConnectionField,
    seed: u64,
    trials: usize,
    tolerances: Option<std::collections::HashMap<String, f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut tols = SuiteTolerances::default();
    if let Some(overrides) = tolerances {
        let mut keys: Vec<_> = overrides.into_iter().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        for (k, v) in keys {
            tols.set(&k, v).map_err(value_err)?;
        }
    }
    let spec = RandomSpec::new(seed, field.inner.dim());
    let report = verify::run_identity_suite(
        &field.inner,
        &spec,
        &FdScheme::default(),
        &IntegratorOptions::default(),
        &tols,
        trials,
    )
    .map_err(value_err)?;

    let out = PyDict::new(py);
    let records = PyList::empty(py);
    for r in &report.records {
        let row = PyDict::new(py);
        row.set_item("name", &r.name)?;
        row.set_item("samples", r.samples)?;
        row.set_item("max_error", r.max_error)?;
        row.set_item("mean_error", r.mean_error)?;
        row.set_item("observed_order", r.observed_order)?;
        row.set_item("tolerance", r.tolerance)?;
        row.set_item("pass", r.pass)?;
        records.append(row)?;
    }
    out.set_item("records", records)?;
    out.set_item("notes", report.notes.clone())?;
    out.set_item("pass", report.pass)?;
    out.set_item("report", formats::write_report(&report))?;
    Ok(out)
}

#[pymodule]
fn loopcalc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPath>()?;
    m.add_class::<PyConnectionField>()?;
    m.add_function(wrap_pyfunction!(parallelogram, m)?)?;
    m.add_function(wrap_pyfunction!(mandelstam, m)?)?;
    m.add_function(wrap_pyfunction!(connection, m)?)?;
    m.add_function(wrap_pyfunction!(section_deriv, m)?)?;
    m.add_function(wrap_pyfunction!(loop_deriv, m)?)?;
    m.add_function(wrap_pyfunction!(run_identity_suite, m)?)?;
    Ok(())
}
