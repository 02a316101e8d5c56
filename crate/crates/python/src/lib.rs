//! Python bindings for the `qsgain` certification toolkit.
//!
//! Matrices cross the boundary as lists of rows of Python complex numbers.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qsgain::linalg::CMatrix;
use qsgain::smallgain::{compute_f, hinf_norm, Verdict};
use qsgain::{io, moments, opa, CertifyOptions};

fn py_err(e: qsgain::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix(name: &str, data: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let r = data.len();
    let c = data.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || data.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err(format!("{name}: expected a non-empty rectangular matrix")));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| data[i][j]))
}

/// A validated linear quantum plant in doubled-up form.
#[pyclass(name = "Model", module = "qsgain", frozen)]
struct PyModel {
    inner: qsgain::QuantumModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (n_a, n_b, hamiltonian, plant_coupling, uncertainty_coupling, output))]
    fn new(
        n_a: usize,
        n_b: usize,
        hamiltonian: Vec<Vec<Complex64>>,
        plant_coupling: Vec<Vec<Complex64>>,
        uncertainty_coupling: Vec<Vec<Complex64>>,
        output: Vec<Vec<Complex64>>,
    ) -> PyResult<Self> {
        let raw = qsgain::RawModel {
            n_a,
            n_b,
            m: matrix("M", hamiltonian)?,
            n_a_coupling: matrix("N_a", plant_coupling)?,
            n_b_coupling: matrix("N_b", uncertainty_coupling)?,
            e_tilde: matrix("E_tilde", output)?,
        };
        Ok(Self {
            inner: qsgain::validate_model(raw).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::parse_model(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_model(&path).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        io::model_json(&self.inner).render()
    }

    #[getter]
    fn n_a(&self) -> usize {
        self.inner.n_a()
    }

    #[getter]
    fn n_b(&self) -> usize {
        self.inner.n_b()
    }

    /// Drift matrix of the plant mode vector.
    fn drift(&self) -> Vec<Vec<Complex64>> {
        rows(&compute_f(&self.inner).f)
    }

    /// `‖C (sI - F)⁻¹ B‖∞` of the plant output transfer.
    #[pyo3(signature = (rel_tol = 1e-10))]
    fn hinf_norm(&self, rel_tol: f64) -> PyResult<f64> {
        hinf_norm(&compute_f(&self.inner), rel_tol).map_err(py_err)
    }

    fn freq_response(&self, omega: f64) -> PyResult<Complex64> {
        qsgain::smallgain::freq_response(&compute_f(&self.inner), omega).map_err(py_err)
    }

    /// Steady-state mean-square value of the plant modes with the
    /// uncertainty modes coupled through `coupling`.
    fn steady_state_ms(&self, coupling: Vec<Complex64>) -> PyResult<f64> {
        let sys = moments::build_closed_loop(&self.inner, &coupling).map_err(py_err)?;
        Ok(moments::steady_state_moments(&sys).map_err(py_err)?.ms_value)
    }

    fn __repr__(&self) -> String {
        format!("Model(n_a={}, n_b={})", self.inner.n_a(), self.inner.n_b())
    }
}

#[pyclass(name = "Uncertainty", module = "qsgain", frozen)]
struct PyUncertainty {
    inner: qsgain::LinearUncertainty,
}

#[pymethods]
impl PyUncertainty {
    #[new]
    fn new(
        a_u: Vec<Vec<Complex64>>,
        b_u: Vec<Vec<Complex64>>,
        c_u: Vec<Vec<Complex64>>,
        noise_cov: Vec<Vec<Complex64>>,
    ) -> PyResult<Self> {
        let inner = qsgain::LinearUncertainty::new(
            matrix("A_u", a_u)?,
            matrix("B_u", b_u)?,
            matrix("C_u", c_u)?,
            matrix("NoiseCov", noise_cov)?,
        )
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn bilinear(coupling: Complex64, kappa_b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: qsgain::LinearUncertainty::from_bilinear_coupling(coupling, kappa_b).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_uncertainty(&path).map_err(py_err)?,
        })
    }

    /// `(gamma, delta1, delta2)` of the quadratic constraint.
    #[pyo3(signature = (rel_tol = 1e-10))]
    fn params(&self, rel_tol: f64) -> PyResult<(f64, f64, f64)> {
        let q = qsgain::qsiqc_params(&self.inner, rel_tol).map_err(py_err)?;
        Ok((q.gamma, q.delta1, q.delta2))
    }
}

#[pyclass(name = "Report", module = "qsgain", frozen, get_all)]
struct PyReport {
    verdict: String,
    certified: bool,
    hurwitz: bool,
    spectral_abscissa: f64,
    hinf: Option<f64>,
    gamma: f64,
    margin: Option<f64>,
    p: Option<Vec<Vec<Complex64>>>,
    epsilon: Option<f64>,
    mu: Option<Complex64>,
    lambda_tilde: Option<f64>,
    ordering_offset: Option<f64>,
    delta0: Option<f64>,
    delta1: f64,
    delta2: f64,
    c_bound: Option<f64>,
    warnings: Vec<String>,
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!("Report(verdict={:?}, hinf={:?}, c_bound={:?})", self.verdict, self.hinf, self.c_bound)
    }
}

/// Runs the small-gain certification of `model` against `(gamma, delta1, delta2)`.
#[pyfunction]
#[pyo3(signature = (model, gamma = f64::INFINITY, delta1 = 0.0, delta2 = 0.0))]
fn certify(model: &PyModel, gamma: f64, delta1: f64, delta2: f64) -> PyResult<PyReport> {
    let r = qsgain::certify(&model.inner, gamma, delta1, delta2, &CertifyOptions::default()).map_err(py_err)?;
    Ok(PyReport {
        verdict: r.verdict.as_str().into(),
        certified: r.verdict == Verdict::Certified,
        hurwitz: r.hurwitz.hurwitz,
        spectral_abscissa: r.hurwitz.abscissa,
        hinf: r.hinf,
        gamma: r.gamma,
        margin: r.margin,
        p: r.p.as_ref().map(|p| rows(&p.p)),
        epsilon: r.p.as_ref().map(|p| p.epsilon),
        mu: r.mu,
        lambda_tilde: r.lambda_tilde,
        ordering_offset: r.ordering_offset,
        delta0: r.delta0,
        delta1: r.delta1,
        delta2: r.delta2,
        c_bound: r.c_bound,
        warnings: r.warnings,
    })
}

fn opa_params(chi: f64, kappa_a: f64, kappa_b: f64, abar: Complex64, bbar: Complex64) -> opa::OpaParams {
    opa::OpaParams {
        chi,
        kappa_a,
        kappa_b,
        abar,
        bbar,
    }
}

/// Parametric amplifier plant, its uncertainty coupling and the uncertainty system.
#[pyfunction]
fn opa_system(
    chi: f64,
    kappa_a: f64,
    kappa_b: f64,
    abar: Complex64,
    bbar: Complex64,
) -> PyResult<(PyModel, Complex64, PyUncertainty)> {
    let sys = opa::build_opa_model(&opa_params(chi, kappa_a, kappa_b, abar, bbar)).map_err(py_err)?;
    Ok((
        PyModel { inner: sys.model },
        sys.coupling,
        PyUncertainty { inner: sys.uncertainty },
    ))
}

/// Closed-form amplifier quantities as a dict.
#[pyfunction]
fn opa_closed_form<'py>(
    py: Python<'py>,
    chi: f64,
    kappa_a: f64,
    kappa_b: f64,
    abar: Complex64,
    bbar: Complex64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = opa_params(chi, kappa_a, kappa_b, abar, bbar);
    p.validate().map_err(py_err)?;
    let cf = opa::closed_form_quantities(&p);
    let d = PyDict::new(py);
    d.set_item("f_eigenvalues", cf.f_eigs.to_vec())?;
    d.set_item("hurwitz", cf.hurwitz)?;
    d.set_item("hinf", cf.h0_mag)?;
    d.set_item("gamma", cf.gamma)?;
    d.set_item("delta1", cf.delta1)?;
    d.set_item("certified", cf.certified)?;
    Ok(d)
}

/// Truncated Fock-space identity checks: `(all_pass, mu_multiplier, rows)`
/// with rows of `(name, cases, worst, tolerance, pass)`.
#[pyfunction]
#[pyo3(signature = (levels = 30, seed = 0, trials = 10))]
#[allow(clippy::type_complexity)]
fn fock_suite(
    levels: usize,
    seed: u64,
    trials: usize,
) -> PyResult<(bool, f64, Vec<(String, usize, f64, f64, Option<bool>)>)> {
    let report = qsgain::fockcheck::run_suite(levels, seed, trials).map_err(py_err)?;
    let all = report.all_pass();
    let rows = report
        .rows
        .into_iter()
        .map(|r| (r.name, r.cases, r.worst, r.tolerance, r.pass))
        .collect();
    Ok((all, report.kappa_mu, rows))
}

#[pymodule(name = "qsgain")]
fn qsgain_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyUncertainty>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(opa_system, m)?)?;
    m.add_function(wrap_pyfunction!(opa_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(fock_suite, m)?)?;
    Ok(())
}
