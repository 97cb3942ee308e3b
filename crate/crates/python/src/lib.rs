//! Python bindings: spectra, filter banks, cascade sampling and the
//! certification pipeline. Reports cross the boundary as JSON text.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use numra::cascade::cascade_scaling;
use numra::certify::{certify as run_certify, CertifyOptions};
use numra::filterbank::{self, check_pr as run_check_pr, pr_grid};
use numra::{Error, Grid, TranslationIndex};

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.code());
    match e.exit_code() {
        2 => PyValueError::new_err(msg),
        3 => PyIOError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

#[pyclass(name = "Spectrum", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PySpectrum(numra::Spectrum);

#[pymethods]
impl PySpectrum {
    #[new]
    #[pyo3(signature = (N, r))]
    #[allow(non_snake_case)]
    fn new(N: i64, r: i64) -> PyResult<Self> {
        numra::Spectrum::new(N, r).map(PySpectrum).map_err(|e| to_py(e.into()))
    }

    #[getter]
    #[allow(non_snake_case)]
    fn N(&self) -> i64 {
        self.0.N()
    }

    #[getter]
    fn r(&self) -> i64 {
        self.0.r()
    }

    #[getter]
    fn dilation(&self) -> i64 {
        self.0.dilation()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.0.channels()
    }

    /// `rk/N + 2n`.
    fn lambda_value(&self, k: u8, n: i64) -> PyResult<f64> {
        if k > 1 {
            return Err(PyValueError::new_err("k must be 0 or 1"));
        }
        Ok(self.0.lambda_value(TranslationIndex::new(k, n)))
    }

    fn enumerate_lambda(&self, lo: f64, hi: f64) -> Vec<(u8, i64, f64)> {
        self.0.enumerate_lambda(lo, hi).into_iter().map(|(t, v)| (t.k, t.n, v)).collect()
    }

    fn gamma_indicator(&self, xi: f64) -> bool {
        self.0.gamma_indicator(xi)
    }

    fn tiling_multiplicity(&self, p: i64, q: i64) -> PyResult<u32> {
        if q <= 0 {
            return Err(PyValueError::new_err("q must be positive"));
        }
        Ok(self.0.tiling_multiplicity(p, q))
    }

    /// `max |G − I|` of the exponential Gram matrix over `|n| ≤ window`.
    fn gram_deviation(&self, window: i64) -> f64 {
        self.0.gram_matrix(window).max_deviation_from_identity()
    }

    fn __repr__(&self) -> String {
        format!("Spectrum(N={}, r={})", self.0.N(), self.0.r())
    }
}

#[pyclass(name = "FilterBank", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFilterBank(numra::FilterBank);

#[pymethods]
impl PyFilterBank {
    #[staticmethod]
    fn haar() -> Self {
        PyFilterBank(filterbank::haar_bank())
    }

    #[staticmethod]
    fn shannon(spectrum: &PySpectrum) -> Self {
        PyFilterBank(filterbank::shannon_bank(&spectrum.0))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        numra::FilterBank::load(&path).map(PyFilterBank).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        numra::FilterBank::from_json(text).map(PyFilterBank).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(to_py)
    }

    #[getter]
    fn spectrum(&self) -> PySpectrum {
        PySpectrum(self.0.spectrum())
    }

    #[getter]
    fn digest(&self) -> String {
        self.0.digest()
    }

    fn is_self_dual(&self) -> bool {
        self.0.is_self_dual()
    }

    fn swapped(&self) -> Self {
        PyFilterBank(self.0.swapped())
    }

    /// `(max deviation, pass)` of the perfect-reconstruction identity on
    /// `per_unit` points per unit over one period.
    #[pyo3(signature = (per_unit = 64, tol = 1e-12))]
    fn check_pr(&self, per_unit: i64, tol: f64) -> PyResult<(f64, bool)> {
        let grid = pr_grid(&self.0.spectrum(), per_unit);
        let c = run_check_pr(&self.0, &grid, tol).map_err(to_py)?;
        Ok((c.entry.max_deviation, c.entry.pass))
    }
}

/// Samples `(ξ, φ̂(ξ))` of the truncated cascade product on `[-omega, omega]`.
#[pyfunction]
#[pyo3(signature = (bank, omega = 8.0, step = 1.0 / 256.0, levels = 30))]
fn cascade(bank: &PyFilterBank, omega: f64, step: f64, levels: u32) -> PyResult<Vec<(f64, Complex64)>> {
    let s = bank.0.spectrum();
    let grid = Grid::new(omega, step).map_err(to_py)?;
    let phi = cascade_scaling(&bank.0.synthesis()[0], &s, levels, grid).map_err(to_py)?;
    Ok(phi.samples().iter().enumerate().map(|(i, z)| (grid.xi(i), *z)).collect())
}

/// Runs the certification pipeline; `options` is a JSON object of overrides.
/// Returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (bank, options = None))]
fn certify(py: Python<'_>, bank: &PyFilterBank, options: Option<&str>) -> PyResult<String> {
    let opts: CertifyOptions = match options {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => CertifyOptions::default(),
    };
    let bank = bank.0.clone();
    let run = py.detach(move || run_certify(&bank, &opts));
    serde_json::to_string(&run.report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(signature = (N, r))]
#[allow(non_snake_case)]
fn validate_spectrum(N: i64, r: i64) -> PyResult<PySpectrum> {
    PySpectrum::new(N, r)
}

#[pymodule]
pub fn numra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyFilterBank>()?;
    m.add_function(wrap_pyfunction!(validate_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(cascade, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    Ok(())
}
