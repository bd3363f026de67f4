//! Python bindings for `bk-core`.
//!
//! Scalars cross the boundary as strings (`"p/q"` or decimal) so no precision is lost.
//! `precision=None` selects the exact rational backend.

use bk_core::asymptotics::{asymptotics_report, boundary_profile};
use bk_core::balancing::{self, conjecture_scan, default_residual_grid, default_scan_grid, iterate, normalize_lambda};
use bk_core::geometry::{balanced_check, balanced_grid};
use bk_core::moments::{moment_table, weighted_moment_table};
use bk_core::rug::Rational;
use bk_core::{
    parse_rational, ArithOp, Backend, IterateOptions, MultiIndex, PotentialProfile, RadialWeight, Scalar,
    TruncatedSeries,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: bk_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn backend(precision: Option<u32>) -> PyResult<Backend> {
    match precision {
        None => Ok(Backend::Exact),
        Some(bits) => Backend::float(bits).map_err(err),
    }
}

fn rational(s: &str) -> PyResult<Rational> {
    parse_rational(s).ok_or_else(|| PyValueError::new_err(format!("not a rational number: {s:?}")))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn weight(s: &Series) -> PyResult<RadialWeight> {
    RadialWeight::new(s.inner.clone()).map_err(err)
}

/// Truncated multivariate power series.
#[pyclass(name = "Series", module = "bkpy", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Series {
    inner: TruncatedSeries,
}

#[pymethods]
impl Series {
    /// `coeffs` is a list of `(exponents, value)` pairs with values as strings.
    #[new]
    #[pyo3(signature = (n_vars, order, coeffs, precision=None))]
    fn new(n_vars: usize, order: u32, coeffs: Vec<(Vec<u32>, String)>, precision: Option<u32>) -> PyResult<Self> {
        let inner = TruncatedSeries::make(n_vars, order, &coeffs, backend(precision)?).map_err(err)?;
        Ok(Self { inner })
    }

    /// `1 - x_1 - ... - x_n` at the given truncation order.
    #[staticmethod]
    #[pyo3(signature = (n_vars, order, precision=None))]
    fn hyperbolic(n_vars: usize, order: u32, precision: Option<u32>) -> PyResult<Self> {
        let one = Scalar::one(backend(precision)?);
        Ok(Self {
            inner: TruncatedSeries::simplex_linear(n_vars, order, one),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: TruncatedSeries::from_json_str(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    #[getter]
    fn order(&self) -> u32 {
        self.inner.order()
    }

    #[getter]
    fn is_exact(&self) -> bool {
        self.inner.backend().is_exact()
    }

    fn coeff(&self, exponents: Vec<u32>) -> String {
        self.inner.coeff(&MultiIndex::new(exponents)).to_repr_string()
    }

    /// Nonzero terms as `(exponents, value)` in graded order.
    fn terms(&self) -> Vec<(Vec<u32>, String)> {
        self.inner
            .terms()
            .map(|(i, c)| (i.exponents().to_vec(), c.to_repr_string()))
            .collect()
    }

    #[pyo3(signature = (precision=None))]
    fn to_backend(&self, precision: Option<u32>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.to_backend(backend(precision)?),
        })
    }

    fn __add__(&self, other: &Series) -> PyResult<Self> {
        self.arith(ArithOp::Add, other)
    }

    fn __sub__(&self, other: &Series) -> PyResult<Self> {
        self.arith(ArithOp::Sub, other)
    }

    fn __mul__(&self, other: &Series) -> PyResult<Self> {
        self.arith(ArithOp::Mul, other)
    }

    /// `f^p` truncated at `order`; `p` is a rational string.
    fn power(&self, p: &str, order: u32) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.power(&rational(p)?, order).map_err(err)?,
        })
    }

    fn log(&self, order: u32) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.log(order).map_err(err)?,
        })
    }

    /// Value at `point` with its tail bound: `(value, tail, tail_valid)`.
    fn eval(&self, point: Vec<String>) -> PyResult<(String, f64, bool)> {
        let b = self.inner.backend();
        let x = point
            .iter()
            .map(|p| Scalar::parse(p, b).map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
        let e = self.inner.eval(&x).map_err(err)?;
        Ok((e.value.to_repr_string(), e.tail.value, e.tail.valid))
    }

    fn __repr__(&self) -> String {
        format!(
            "Series(n_vars={}, order={}, terms={})",
            self.inner.n_vars(),
            self.inner.order(),
            self.inner.terms().count()
        )
    }
}

impl Series {
    fn arith(&self, op: ArithOp, other: &Series) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.arith(op, &other.inner).map_err(err)?,
        })
    }
}

/// Disk moments `int_0^1 f(t) t^j dt` for `j <= max_order`.
#[pyfunction]
fn moments(f: &Series, max_order: u32) -> PyResult<Vec<String>> {
    let table = moment_table(&weight(f)?, max_order).map_err(err)?;
    Ok((0..=max_order)
        .map(|j| table.get_j(j).map(|v| v.to_repr_string()).unwrap_or_default())
        .collect())
}

/// Simplex moments `I_J(alpha)` as a list of `(J, value)`.
#[pyfunction]
fn weighted_moments(f: &Series, alpha: &str, n: usize, max_order: u32) -> PyResult<Vec<(Vec<u32>, String)>> {
    let table = weighted_moment_table(&weight(f)?, &rational(alpha)?, n, max_order).map_err(err)?;
    Ok(table
        .entries()
        .map(|(j, v)| (j.exponents().to_vec(), v.to_repr_string()))
        .collect())
}

/// Balancing residual of `f` on the default grid; `lam=None` normalizes at the origin.
#[pyfunction]
#[pyo3(signature = (f, order, alpha="3", lam=None, tol=1e-6))]
fn residual(py: Python<'_>, f: &Series, order: u32, alpha: &str, lam: Option<&str>, tol: f64) -> PyResult<Py<PyAny>> {
    let w = weight(f)?;
    let n = w.n_vars();
    let table = weighted_moment_table(&w, &rational(alpha)?, n, order).map_err(err)?;
    let lambda = match lam {
        Some(s) => Scalar::parse(s, w.backend()).map_err(err)?,
        None => normalize_lambda(&w, &table).map_err(err)?,
    };
    let report = balancing::residual(&w, &lambda, &table, &default_residual_grid(n), order, tol).map_err(err)?;
    to_py(py, &report)
}

/// Damped balancing iteration in disk mode; returns the trace.
#[pyfunction]
#[pyo3(signature = (f0, order=80, theta="1/2", maxiter=200, tol=1e-6, alpha="3", precision=256))]
#[allow(clippy::too_many_arguments)]
fn iterate_disk(
    py: Python<'_>,
    f0: &Series,
    order: u32,
    theta: &str,
    maxiter: usize,
    tol: f64,
    alpha: &str,
    precision: u32,
) -> PyResult<Py<PyAny>> {
    let b = backend(Some(precision))?;
    let mut opts = IterateOptions::disk(order);
    opts.theta = rational(theta)?;
    opts.maxiter = maxiter;
    opts.tol = tol;
    opts.alpha = rational(alpha)?;
    opts.backend = b;
    if opts.alpha == 3 {
        opts.reference = Some(RadialWeight::hyperbolic(order, Backend::Exact));
    }
    let f = RadialWeight::new(f0.inner.to_backend(b)).map_err(err)?;
    let trace = py.detach(|| iterate(&f, &opts)).map_err(err)?;
    to_py(py, &trace)
}

/// Derivatives of `f` at `x = 1` up to `k_max`.
#[pyfunction]
#[pyo3(signature = (f, k_max=3))]
fn boundary_derivatives(f: &Series, k_max: u32) -> PyResult<Vec<String>> {
    let p = boundary_profile(&weight(f)?, k_max, 0.0).map_err(err)?;
    Ok(p.derivatives.iter().map(Scalar::to_repr_string).collect())
}

/// Boundary profile, `a_j` sequence and decay fit.
#[pyfunction]
#[pyo3(signature = (f, k_max=3, jmax=100, tol=1e-6))]
fn asymptotics(py: Python<'_>, f: &Series, k_max: u32, jmax: u32, tol: f64) -> PyResult<Py<PyAny>> {
    let report = asymptotics_report(&weight(f)?, k_max, jmax, tol).map_err(err)?;
    to_py(py, &report)
}

/// Residual of the simplex identity for `f = 1 - x_1 - ... - x_n`, `lambda = 1`.
#[pyfunction]
#[pyo3(signature = (n, alpha, degree, precision=256, tol=1e-6))]
fn scan(py: Python<'_>, n: usize, alpha: &str, degree: u32, precision: u32, tol: f64) -> PyResult<Py<PyAny>> {
    let b = backend(Some(precision))?;
    let a = rational(alpha)?;
    let report = py
        .detach(|| conjecture_scan(n, &a, degree, &default_scan_grid(n), b, tol))
        .map_err(err)?;
    to_py(py, &report)
}

/// Gauge drift of `log K - alpha * Phi` for the potential `-log h`.
#[pyfunction]
#[pyo3(signature = (h, alpha, jmax=400, precision=256))]
fn balanced(py: Python<'_>, h: &Series, alpha: &str, jmax: u32, precision: u32) -> PyResult<Py<PyAny>> {
    let b = backend(Some(precision))?;
    let w = RadialWeight::new(h.inner.to_backend(b)).map_err(err)?;
    let profile = PotentialProfile::new(w, rational(alpha)?).map_err(err)?;
    let diag = py
        .detach(|| balanced_check(&profile, &balanced_grid(), jmax))
        .map_err(err)?;
    to_py(py, &diag)
}

#[pymodule]
fn bkpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Series>()?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_moments, m)?)?;
    m.add_function(wrap_pyfunction!(residual, m)?)?;
    m.add_function(wrap_pyfunction!(iterate_disk, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_derivatives, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotics, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(balanced, m)?)?;
    Ok(())
}
