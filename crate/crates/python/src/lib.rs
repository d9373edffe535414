//! Python bindings. Symbols are wrapped as `Symbol`; reports come back as
//! plain dicts decoded from the same JSON the command line writes.

use hardy_factor::beurling::{self, ExtractOptions};
use hardy_factor::completion::{self, CompletionError, CompletionProblem};
use hardy_factor::hardy::{DegreeWindow, MultiIndex, OperatorSymbol};
use hardy_factor::linalg::CMat;
use hardy_factor::reports::{self, Command, Format, RunManifest};
use hardy_factor::subspace::{doubly_commuting_test, submodule_span};
use hardy_factor::wire::SymbolWire;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(hardy_factor, StageError, PyException, "A pipeline stage failed; `args` is (stage, name, message).");

fn value_err(e: hardy_factor::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix_rows(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: usize, cols: usize, data: &[Vec<Complex64>]) -> PyResult<CMat> {
    if data.len() != rows || data.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("coefficient must be {rows}x{cols}")));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| data[i][j]))
}

/// Matrix polynomial `Σ A_k z^k` with complex `rows x cols` coefficients.
#[pyclass(name = "Symbol", module = "hardy_factor", frozen)]
struct PySymbol {
    inner: OperatorSymbol,
}

#[pymethods]
impl PySymbol {
    /// `terms` is a list of `(exponent, matrix)` pairs, matrices as nested
    /// lists of complex numbers.
    #[new]
    fn new(n: usize, rows: usize, cols: usize, terms: Vec<(Vec<u32>, Vec<Vec<Complex64>>)>) -> PyResult<Self> {
        let d = terms.iter().flat_map(|(k, _)| k.iter().copied()).max().unwrap_or(0);
        let window = DegreeWindow::new(n, d).map_err(value_err)?;
        let mut s = OperatorSymbol::zero(&window, rows, cols);
        for (k, m) in &terms {
            let k = MultiIndex::new(k.clone()).map_err(value_err)?;
            if k.len() != n {
                return Err(PyValueError::new_err(format!("exponent needs {n} entries")));
            }
            s.add_term(&k, &matrix_from_rows(rows, cols, m)?).map_err(value_err)?;
        }
        Ok(Self { inner: s })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let wire: SymbolWire = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner: wire.to_symbol().map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&SymbolWire::from(&self.inner)).expect("symbols serialize")
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.inner.degree()
    }

    fn terms(&self) -> Vec<(Vec<u32>, Vec<Vec<Complex64>>)> {
        self.inner.terms().map(|(k, m)| (k.entries().to_vec(), matrix_rows(m))).collect()
    }

    fn evaluate(&self, z: Vec<Complex64>) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(matrix_rows(&self.inner.evaluate(&z).map_err(value_err)?))
    }

    fn __matmul__(&self, other: &PySymbol) -> PyResult<Self> {
        Ok(Self { inner: self.inner.mul(&other.inner).map_err(value_err)? })
    }

    /// Product with every `z_i^{d+1}` dropped.
    fn mul_truncated(&self, other: &PySymbol, d: u32) -> PyResult<Self> {
        Ok(Self { inner: self.inner.mul_truncated(&other.inner, d).map_err(value_err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Symbol(n={}, {}x{}, degree={}, terms={})",
            self.inner.n(),
            self.inner.rows(),
            self.inner.cols(),
            self.inner.degree(),
            self.inner.term_count()
        )
    }
}

fn column_span(symbol: &OperatorSymbol, d: u32) -> PyResult<hardy_factor::subspace::SubspaceBasis> {
    let window = DegreeWindow::new(symbol.n(), d).map_err(value_err)?;
    let cols = symbol.with_window_degree(d).map_err(value_err)?.columns();
    submodule_span(&cols, &window).map_err(value_err)
}

/// Commutator report of the submodule generated by the columns of `symbol`.
#[pyfunction]
#[pyo3(signature = (symbol, degree, tolerance = 1e-8))]
fn commutator_report<'py>(py: Python<'py>, symbol: &PySymbol, degree: u32, tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
    let s = column_span(&symbol.inner, degree)?;
    to_py(py, &doubly_commuting_test(&s, tolerance).map_err(value_err)?)
}

/// Inner symbol of the submodule generated by the columns of `symbol`, with
/// its innerness certificate and range distance.
#[pyfunction]
#[pyo3(signature = (symbol, degree, torus_grid = beurling::DEFAULT_TORUS_GRID))]
fn extract_inner<'py>(
    py: Python<'py>,
    symbol: &PySymbol,
    degree: u32,
    torus_grid: usize,
) -> PyResult<(PySymbol, Bound<'py, PyDict>)> {
    let s = column_span(&symbol.inner, degree)?;
    let opts = ExtractOptions { torus_grid, ..ExtractOptions::default() };
    let ex = beurling::extract_inner_with(&s, &opts).map_err(value_err)?;
    let info = PyDict::new(py);
    info.set_item("certificate", to_py(py, &ex.certificate)?)?;
    info.set_item("commutator", to_py(py, &ex.commutator)?)?;
    info.set_item("rangeDistance", ex.range_distance)?;
    Ok((PySymbol { inner: ex.theta }, info))
}

/// Completes the column `f` with left inverse `g` on the window of degree
/// `degree`. Raises `StageError` when a stage fails.
#[pyfunction]
#[pyo3(signature = (f, g, degree, seed = 1, torus_grid = beurling::DEFAULT_TORUS_GRID))]
fn complete<'py>(
    py: Python<'py>,
    f: &PySymbol,
    g: &PySymbol,
    degree: u32,
    seed: u64,
    torus_grid: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let window = DegreeWindow::new(f.inner.n(), degree).map_err(value_err)?;
    let mut p = CompletionProblem::new(f.inner.clone(), g.inner.clone(), window).map_err(value_err)?;
    p.seed = seed;
    p.torus_grid = torus_grid;
    match completion::complete(&p) {
        Ok(r) => to_py(py, &r),
        Err(e) => {
            let (stage, name) = CompletionError::stage(&e);
            Err(StageError::new_err((stage, name, e.to_string())))
        }
    }
}

#[pyfunction]
#[pyo3(signature = (g, samples = completion::DEFAULT_RANK_SAMPLES, seed = 1))]
fn local_rank<'py>(py: Python<'py>, g: &PySymbol, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &completion::local_rank(&g.inner, samples, seed).map_err(value_err)?)
}

#[pyfunction]
fn random_inner_symbol(seed: u64) -> PySymbol {
    PySymbol { inner: hardy_factor::random::random_inner_symbol(seed) }
}

/// `(f, g)` of the exponential example, truncated at `degree`.
#[pyfunction]
#[pyo3(signature = (degree = 8))]
fn exponential_problem(degree: u32) -> PyResult<(PySymbol, PySymbol)> {
    let p = hardy_factor::random::exponential_problem(degree).map_err(value_err)?;
    Ok((PySymbol { inner: p.f }, PySymbol { inner: p.g }))
}

/// Runs a command-line subcommand in process; returns `(exit_code, report)`.
#[pyfunction]
#[pyo3(signature = (command, input = None, degree = None, tolerance = None, seed = None, torus_grid = None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    input: Option<std::path::PathBuf>,
    degree: Option<u32>,
    tolerance: Option<f64>,
    seed: Option<u64>,
    torus_grid: Option<usize>,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let cmd: Command = serde_json::from_value(serde_json::Value::String(command.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown command {command:?}")))?;
    let mut m = RunManifest::new(cmd);
    m.input_path = input;
    m.format = Format::Json;
    m.overrides.degree = degree;
    m.overrides.tolerance = tolerance;
    m.overrides.seed = seed;
    m.overrides.torus_grid = torus_grid;
    let report = py.detach(|| reports::execute(&m));
    Ok((report.exit_code(), to_py(py, &report)?))
}

#[pymodule(name = "hardy_factor")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", reports::VERSION)?;
    m.add("StageError", m.py().get_type::<StageError>())?;
    m.add_class::<PySymbol>()?;
    m.add_function(wrap_pyfunction!(commutator_report, m)?)?;
    m.add_function(wrap_pyfunction!(extract_inner, m)?)?;
    m.add_function(wrap_pyfunction!(complete, m)?)?;
    m.add_function(wrap_pyfunction!(local_rank, m)?)?;
    m.add_function(wrap_pyfunction!(random_inner_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_problem, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
