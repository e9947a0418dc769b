//! Python bindings. Matrices cross the boundary as nested lists of
//! `complex`; failures raise `ValueError`.

use chanlaw_core::harness::{self, ReportFormat};
use chanlaw_core::matcore::{self, ComplexMatrix, DensityMatrix};
use chanlaw_core::metrics::evaluate_full;
use chanlaw_core::perturb::{self, PredictorOrder, PredictorOutput, Steps};
use chanlaw_core::{AveragingSpec, ControlVector, FluctuationModel, MetricsReport, ParamChannel};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMatrix> {
    let dim = rows.len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    ComplexMatrix::new(dim, rows.into_iter().flatten().collect()).map_err(err)
}

fn to_density(rows: Vec<Vec<Complex64>>) -> PyResult<DensityMatrix> {
    DensityMatrix::new(to_matrix(rows)?).map_err(err)
}

fn to_rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    m.entries().chunks(m.dim()).map(|r| r.to_vec()).collect()
}

fn averaging(method: &str, order: usize, samples: usize, seed: u64) -> PyResult<AveragingSpec> {
    match method {
        "gauss_hermite" => Ok(AveragingSpec::gauss_hermite(order)),
        "monte_carlo" => Ok(AveragingSpec::monte_carlo(samples, seed)),
        "affine_exact" => Ok(AveragingSpec::AffineExact),
        other => Err(PyValueError::new_err(format!(
            "unknown averaging method `{other}` (expected gauss_hermite, monte_carlo or affine_exact)"
        ))),
    }
}

/// A channel T(ρ, λ) with a fixed number of real controls.
#[pyclass(name = "Channel", frozen)]
struct PyChannel(ParamChannel);

#[pymethods]
impl PyChannel {
    /// Single-qubit ion-trap gate with controls (theta, phi).
    #[staticmethod]
    fn ion_trap() -> Self {
        Self(ParamChannel::ion_trap())
    }

    /// Pauli channel with baseline probabilities (p_I, p_X, p_Y, p_Z).
    #[staticmethod]
    #[pyo3(signature = (p, strict = false))]
    fn depolarizing(p: [f64; 4], strict: bool) -> PyResult<Self> {
        ParamChannel::depolarizing_with_mode(p, strict)
            .map(Self)
            .map_err(err)
    }

    /// exp(iλH) ρ exp(−iλH) for a Hermitian generator H.
    #[staticmethod]
    fn unitary_generator(h: Vec<Vec<Complex64>>) -> PyResult<Self> {
        ParamChannel::unitary_generator(to_matrix(h)?)
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().name()
    }

    #[getter]
    fn arity(&self) -> usize {
        self.0.arity()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Channel output for a density matrix and control vector.
    fn apply(&self, rho: Vec<Vec<Complex64>>, controls: Vec<f64>) -> PyResult<Vec<Vec<Complex64>>> {
        let rho = to_density(rho)?;
        let lambda = ControlVector::new(controls).map_err(err)?;
        self.0
            .apply(&rho, &lambda)
            .map(|m| to_rows(&m))
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel(kind={:?}, arity={}, dim={})",
            self.kind(),
            self.arity(),
            self.dim()
        )
    }
}

/// Control fluctuations δλ.
#[pyclass(name = "Noise", frozen)]
struct PyNoise(FluctuationModel);

#[pymethods]
impl PyNoise {
    /// Gaussian with mean vector and row-major covariance.
    #[staticmethod]
    fn gaussian(mean: Vec<f64>, covariance: Vec<f64>) -> PyResult<Self> {
        FluctuationModel::gaussian(mean, covariance)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn independent_gaussian(std: Vec<f64>) -> PyResult<Self> {
        FluctuationModel::independent_gaussian(&std)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn uniform(mean: Vec<f64>, std: Vec<f64>) -> PyResult<Self> {
        FluctuationModel::uniform(mean, &std).map(Self).map_err(err)
    }

    #[staticmethod]
    fn deterministic_shift(mean: Vec<f64>) -> PyResult<Self> {
        FluctuationModel::deterministic_shift(mean)
            .map(Self)
            .map_err(err)
    }

    fn with_scale(&self, scale: f64) -> PyResult<Self> {
        self.0.with_scale(scale).map(Self).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().name()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale()
    }

    fn __repr__(&self) -> String {
        format!(
            "Noise(kind={:?}, dim={}, scale={})",
            self.kind(),
            self.0.dim(),
            self.scale()
        )
    }
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("p0", r.p0)?;
    d.set_item("p", r.p)?;
    d.set_item("f", r.f)?;
    d.set_item("residual", r.residual)?;
    d.set_item("trace_defect", r.trace_defect)?;
    d.set_item("stderr_p", r.stderr_p)?;
    d.set_item("stderr_f", r.stderr_f)?;
    d.set_item("spread", r.spread)?;
    d.set_item("method", r.method)?;
    Ok(d)
}

fn predictor_dict<'py>(py: Python<'py>, out: &PredictorOutput) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("p0", out.p0)?;
    d.set_item("p_pred", out.p_pred)?;
    d.set_item("f_pred", out.f_pred)?;
    d.set_item("correction", out.correction_term)?;
    d.set_item(
        "order",
        match out.order {
            PredictorOrder::First => 1,
            PredictorOrder::Second => 2,
        },
    )?;
    Ok(d)
}

/// Density matrix for a Bloch vector with |v| ≤ 1.
#[pyfunction]
fn bloch_to_density(v: [f64; 3]) -> PyResult<Vec<Vec<Complex64>>> {
    matcore::bloch_to_density(v)
        .map(|r| to_rows(r.matrix()))
        .map_err(err)
}

/// tr ρ².
#[pyfunction]
fn purity(rho: Vec<Vec<Complex64>>) -> PyResult<f64> {
    Ok(matcore::purity(&to_density(rho)?))
}

/// P0, P, F and the residual F − (P + P0)/2 from one averaging pass.
#[pyfunction]
#[pyo3(signature = (channel, rho, controls, noise, method = "gauss_hermite", order = 20, samples = 100_000, seed = 0, with_matrices = false))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    channel: &PyChannel,
    rho: Vec<Vec<Complex64>>,
    controls: Vec<f64>,
    noise: &PyNoise,
    method: &str,
    order: usize,
    samples: usize,
    seed: u64,
    with_matrices: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let rho = to_density(rho)?;
    let lambda = ControlVector::new(controls).map_err(err)?;
    let spec = averaging(method, order, samples, seed)?;
    let e = py
        .detach(|| evaluate_full(&channel.0, &rho, &lambda, &noise.0, &spec))
        .map_err(err)?;
    let d = report_dict(py, &e.report)?;
    if with_matrices {
        d.set_item("output", to_rows(&e.output))?;
        d.set_item("averaged", to_rows(&e.averaged))?;
    }
    Ok(d)
}

/// Generic finite-difference predictor.
#[pyfunction]
#[pyo3(signature = (channel, rho, controls, noise, h1 = perturb::DEFAULT_H1, h2 = perturb::DEFAULT_H2))]
fn predict<'py>(
    py: Python<'py>,
    channel: &PyChannel,
    rho: Vec<Vec<Complex64>>,
    controls: Vec<f64>,
    noise: &PyNoise,
    h1: f64,
    h2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let rho = to_density(rho)?;
    let lambda = ControlVector::new(controls).map_err(err)?;
    let steps = Steps {
        first: h1,
        second: h2,
    };
    let out = perturb::predict(&channel.0, &rho, &lambda, &noise.0, steps).map_err(err)?;
    predictor_dict(py, &out)
}

/// Closed-form ion-trap predictor for zero-mean noise.
#[pyfunction]
fn ion_trap_predict<'py>(
    py: Python<'py>,
    rho: Vec<Vec<Complex64>>,
    theta: f64,
    phi: f64,
    noise: &PyNoise,
) -> PyResult<Bound<'py, PyDict>> {
    let out = perturb::ion_trap_predict(&to_density(rho)?, theta, phi, &noise.0).map_err(err)?;
    predictor_dict(py, &out)
}

/// Depolarizing predictor for a mean probability shift.
#[pyfunction]
fn depolarizing_predict<'py>(
    py: Python<'py>,
    rho: Vec<Vec<Complex64>>,
    p: [f64; 4],
    mean_shift: [f64; 4],
) -> PyResult<Bound<'py, PyDict>> {
    let out = perturb::depolarizing_predict(&to_density(rho)?, p, mean_shift).map_err(err)?;
    predictor_dict(py, &out)
}

/// Runs a sweep described by config text and returns the rendered report.
#[pyfunction]
#[pyo3(signature = (config, format = None))]
fn run_sweep(py: Python<'_>, config: &str, format: Option<&str>) -> PyResult<String> {
    let cfg = harness::parse_config(config).map_err(err)?;
    let format = match format {
        Some(f) => f.parse::<ReportFormat>().map_err(PyValueError::new_err)?,
        None => cfg.format,
    };
    let report = py.detach(|| harness::run_sweep(&cfg)).map_err(err)?;
    Ok(report.render(format))
}

#[pymodule]
fn chanlaw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_class::<PyNoise>()?;
    m.add_function(wrap_pyfunction!(bloch_to_density, m)?)?;
    m.add_function(wrap_pyfunction!(purity, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(ion_trap_predict, m)?)?;
    m.add_function(wrap_pyfunction!(depolarizing_predict, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
