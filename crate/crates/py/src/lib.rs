//! Python bindings for `viscoflow`: the tempered memory kernel and its fast
//! history, the analysis checks, and the manufactured-solution and
//! contraction studies. Long runs release the GIL.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use viscoflow::benchmark::{self, ContractionParams};
use viscoflow::memory_kernel::{self as mk, GronwallStatus, KernelError, KernelSoe};
use viscoflow::prelude::LocalMemory;
use viscoflow::timestepper::ExactFlow;
use viscoflow::verification::{self, ConvergenceTable, ManufacturedCase, StudySettings};

fn kernel_err(e: KernelError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solver_err(e: viscoflow::Error) -> PyErr {
    match e {
        viscoflow::Error::InvalidParameter { .. } | viscoflow::Error::Kernel(_) | viscoflow::Error::Config(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Tempered power-law kernel `t^-beta exp(-delta t)` with coupling `rho`.
#[pyclass(name = "TemperedKernel", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyKernel(mk::TemperedKernel);

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (beta, delta, rho = 1.0))]
    fn new(beta: f64, delta: f64, rho: f64) -> PyResult<Self> {
        mk::TemperedKernel::new(beta, delta, rho).map(Self).map_err(kernel_err)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho()
    }

    fn eval(&self, t: f64) -> PyResult<f64> {
        self.0.eval(t).map_err(kernel_err)
    }

    /// Integral of the kernel over `[a, b]`; `b` may be `inf`.
    fn moment(&self, a: f64, b: f64) -> PyResult<f64> {
        self.0.moment(a, b).map_err(kernel_err)
    }

    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    fn __repr__(&self) -> String {
        format!(
            "TemperedKernel(beta={}, delta={}, rho={})",
            self.0.beta(),
            self.0.delta(),
            self.0.rho()
        )
    }
}

/// Certified sum-of-exponentials approximation on `[tau_min, horizon]`.
#[pyclass(name = "Soe", frozen)]
struct PySoe(KernelSoe);

#[pymethods]
impl PySoe {
    #[new]
    #[pyo3(signature = (kernel, tau_min, horizon, tol = 1e-8))]
    fn new(kernel: PyKernel, tau_min: f64, horizon: f64, tol: f64) -> PyResult<Self> {
        mk::build_soe(&kernel.0, tau_min, horizon, tol)
            .map(Self)
            .map_err(kernel_err)
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.0.n_modes()
    }

    #[getter]
    fn certified_rel_err(&self) -> f64 {
        self.0.certified_rel_err()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.0.rates().to_vec()
    }

    fn eval(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    fn __repr__(&self) -> String {
        format!(
            "Soe(n_modes={}, certified_rel_err={:e})",
            self.0.n_modes(),
            self.0.certified_rel_err()
        )
    }
}

/// Fast history of a piecewise-constant vector signal.
#[pyclass(name = "History")]
struct PyHistory(mk::HistoryState);

#[pymethods]
impl PyHistory {
    #[new]
    fn new(soe: &PySoe, tau: f64, dim: usize) -> PyResult<Self> {
        mk::HistoryState::new(&soe.0, tau, dim).map(Self).map_err(kernel_err)
    }

    #[getter]
    fn kappa0(&self) -> f64 {
        self.0.kappa0()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    /// Convolution at the next time level given the newest sample.
    fn eval(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.eval(&u).map_err(kernel_err)
    }

    fn advance(&mut self, u: Vec<f64>) -> PyResult<()> {
        self.0.advance(&u).map_err(kernel_err)
    }
}

/// Exact product-integration convolution of piecewise-constant samples.
#[pyfunction]
fn convolve_direct(kernel: PyKernel, samples: Vec<f64>, tau: f64) -> PyResult<f64> {
    mk::convolve_direct(&kernel.0, &samples, tau).map_err(kernel_err)
}

#[pyfunction]
#[pyo3(signature = (kernel, tau, n, trials = 1000, seed = 0))]
fn positivity_check<'py>(
    py: Python<'py>,
    kernel: PyKernel,
    tau: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = mk::positivity_check(&kernel.0, tau, n, trials, seed).map_err(kernel_err)?;
    let d = PyDict::new(py);
    d.set_item("trials", r.trials)?;
    d.set_item("min_value", r.min_value)?;
    d.set_item("min_normalized", r.min_normalized)?;
    d.set_item("passed", r.passed)?;
    Ok(d)
}

#[pyfunction]
fn gronwall_threshold(beta_hat: f64, delta_hat: f64, alpha_hat: f64) -> PyResult<f64> {
    mk::gronwall_threshold(beta_hat, delta_hat, alpha_hat).map_err(kernel_err)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn gronwall_verify<'py>(
    py: Python<'py>,
    c: f64,
    c0: f64,
    beta_hat: f64,
    delta_hat: f64,
    alpha_hat: f64,
    tau: f64,
    t_final: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = mk::gronwall_verify(c, c0, beta_hat, delta_hat, alpha_hat, tau, t_final).map_err(kernel_err)?;
    let status = match r.status {
        GronwallStatus::Pass => "pass",
        GronwallStatus::BoundViolated => "bound_violated",
        GronwallStatus::RegimeViolation => "regime_violation",
        GronwallStatus::Diverged => "diverged",
    };
    let d = PyDict::new(py);
    d.set_item("status", status)?;
    d.set_item("threshold", r.threshold)?;
    d.set_item("max_ratio", r.max_ratio)?;
    d.set_item("y_final", r.y_final)?;
    d.set_item("steps", r.steps)?;
    Ok(d)
}

/// Smallness conditions of the decay analysis.
#[pyfunction]
#[pyo3(signature = (mu, rho, beta, delta, alpha = 0.0, gamma0 = 1.0, c_star = 1.0))]
#[allow(clippy::too_many_arguments)]
fn regime_report<'py>(
    py: Python<'py>,
    mu: f64,
    rho: f64,
    beta: f64,
    delta: f64,
    alpha: f64,
    gamma0: f64,
    c_star: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = mk::RegimeParams::new(mu, rho, beta, delta, alpha, gamma0, c_star).map_err(kernel_err)?;
    let r = mk::regime_report(&p);
    let d = PyDict::new(py);
    d.set_item("rhs", r.rhs)?;
    d.set_item("lhs_basic", r.lhs_basic)?;
    d.set_item("pass_basic", r.pass_basic)?;
    d.set_item("lhs_strong", r.lhs_strong)?;
    d.set_item("pass_strong", r.pass_strong)?;
    d.set_item("theta", r.theta)?;
    Ok(d)
}

/// Manufactured flow on the unit square used by the convergence and decay
/// studies.
#[pyclass(name = "ManufacturedCase", frozen)]
struct PyCase(ManufacturedCase);

fn table_rows<'py>(py: Python<'py>, table: &ConvergenceTable) -> PyResult<Vec<Bound<'py, PyDict>>> {
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("n", r.n)?;
            d.set_item("h", r.h)?;
            d.set_item("err_u_l2", r.err_u_l2)?;
            d.set_item("err_u_h1", r.err_u_h1)?;
            d.set_item("err_p_l2", r.err_p_l2)?;
            d.set_item("rate_u_l2", r.rate_u_l2)?;
            d.set_item("rate_u_h1", r.rate_u_h1)?;
            d.set_item("rate_p_l2", r.rate_p_l2)?;
            Ok(d)
        })
        .collect()
}

#[pymethods]
impl PyCase {
    #[new]
    #[pyo3(signature = (mu = 1.0, rho = 16.0, beta = 0.5, delta = 10.0))]
    fn new(mu: f64, rho: f64, beta: f64, delta: f64) -> PyResult<Self> {
        let k = mk::TemperedKernel::new(beta, delta, rho).map_err(kernel_err)?;
        ManufacturedCase::new(mu, k).map(Self).map_err(solver_err)
    }

    fn velocity(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let u = self.0.velocity(x, y, t);
        (u[0], u[1])
    }

    fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        self.0.pressure(x, y, t)
    }

    fn forcing(&self, x: f64, y: f64, t: f64) -> PyResult<(f64, f64)> {
        let f = self.0.forcing(x, y, t).map_err(solver_err)?;
        Ok((f[0], f[1]))
    }

    /// Final-time errors per mesh with observed rates, as a list of dicts.
    #[pyo3(signature = (n_list, tau = 1e-4, t_final = 0.5, soe_tol = 1e-8))]
    fn convergence_study<'py>(
        &self,
        py: Python<'py>,
        n_list: Vec<usize>,
        tau: f64,
        t_final: f64,
        soe_tol: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let mut settings = StudySettings::new(tau, t_final);
        settings.soe_tol = soe_tol;
        let case = self.0;
        let table = py
            .detach(|| verification::convergence_study(&case, &n_list, &settings))
            .map_err(solver_err)?;
        table_rows(py, &table)
    }

    /// Error series with log-linear fits on `[fit_start, t_final]`.
    #[pyo3(signature = (n = 16, tau = 1e-4, t_final = 1.0, stride = 100, fit_start = 0.1))]
    fn decay_study<'py>(
        &self,
        py: Python<'py>,
        n: usize,
        tau: f64,
        t_final: f64,
        stride: usize,
        fit_start: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let settings = StudySettings::new(tau, t_final);
        let case = self.0;
        let r = py
            .detach(|| verification::decay_study(&case, n, &settings, stride, fit_start))
            .map_err(solver_err)?;
        let d = PyDict::new(py);
        d.set_item("t", r.samples.iter().map(|s| s.t).collect::<Vec<_>>())?;
        d.set_item("err_u_l2", r.samples.iter().map(|s| s.err_u_l2).collect::<Vec<_>>())?;
        d.set_item("err_u_h1", r.samples.iter().map(|s| s.err_u_h1).collect::<Vec<_>>())?;
        d.set_item("err_p_l2", r.samples.iter().map(|s| s.err_p_l2).collect::<Vec<_>>())?;
        let fits = PyDict::new(py);
        for (name, fit) in r.fits() {
            fits.set_item(name, (fit.slope, fit.intercept, fit.r_squared))?;
        }
        d.set_item("fits", fits)?;
        Ok(d)
    }

    /// Volterra-Stokes projection errors per mesh, as a list of dicts.
    #[pyo3(signature = (n_list, tau = 1e-2, t_final = 0.5, soe_tol = 1e-8))]
    fn projection_study<'py>(
        &self,
        py: Python<'py>,
        n_list: Vec<usize>,
        tau: f64,
        t_final: f64,
        soe_tol: f64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let case = self.0;
        let table = py
            .detach(|| verification::projection_study(&case, &n_list, tau, t_final, soe_tol))
            .map_err(solver_err)?;
        table_rows(py, &table)
    }
}

/// Runs the 4:1 contraction and returns the final post-processed state.
/// `local_memory` is `"implicit"` or `"explicit"`.
#[pyfunction]
#[pyo3(signature = (beta = 0.5, rho = 16.0, mu = 1.0, delta = 10.0, tau = 2e-3, t_final = 5.0,
                    grading = 0.1, base_h = 1.0, local_memory = "implicit"))]
#[allow(clippy::too_many_arguments)]
fn run_contraction<'py>(
    py: Python<'py>,
    beta: f64,
    rho: f64,
    mu: f64,
    delta: f64,
    tau: f64,
    t_final: f64,
    grading: f64,
    base_h: f64,
    local_memory: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let local_memory = match local_memory {
        "implicit" => LocalMemory::Implicit,
        "explicit" => LocalMemory::Explicit,
        other => {
            return Err(PyValueError::new_err(format!(
                "local_memory must be implicit or explicit, got {other}"
            )))
        }
    };
    let params = ContractionParams {
        beta,
        rho,
        mu,
        delta,
        tau,
        t_final,
        grading,
        base_h,
        local_memory,
        ..ContractionParams::default()
    };
    let run = py.detach(|| benchmark::run_contraction(&params)).map_err(solver_err)?;
    let snap = run.final_snapshot();
    let d = PyDict::new(py);
    d.set_item("t", snap.t)?;
    d.set_item("vortex_area", snap.vortex_area)?;
    d.set_item("max_speed", snap.max_speed)?;
    d.set_item("inflow_flux", run.final_flux.inflow)?;
    d.set_item("outflow_flux", run.final_flux.outflow)?;
    d.set_item("inflow_flux_error", run.inflow_flux_error)?;
    d.set_item("vertices", run.mesh.vertices().to_vec())?;
    d.set_item("triangles", run.mesh.triangles().to_vec())?;
    d.set_item("psi", snap.psi.coeffs().to_vec())?;
    Ok(d)
}

#[pymodule]
pub fn pyviscoflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PySoe>()?;
    m.add_class::<PyHistory>()?;
    m.add_class::<PyCase>()?;
    m.add_function(wrap_pyfunction!(convolve_direct, m)?)?;
    m.add_function(wrap_pyfunction!(positivity_check, m)?)?;
    m.add_function(wrap_pyfunction!(gronwall_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(gronwall_verify, m)?)?;
    m.add_function(wrap_pyfunction!(regime_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_contraction, m)?)?;
    Ok(())
}
