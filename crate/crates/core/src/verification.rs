//! Manufactured solution on the unit square, spatial convergence tables and
//! exponential-decay fits.
//!
//! With `g(s) = s²(s−1)²` the exact fields are
//! `u = 5 (g(x)g'(y), −g'(x)g(y)) e^{−δt}` and `p = 10(2x−1)(2y−1) e^{−δt}`.
//! Because the time factor decays at the tempering rate, the memory integral
//! has the closed form `(Q * e^{−δ·})(t) = e^{−δt} t^{1−β}/(1−β)`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::assembly::assemble_load;
use crate::error::{Error, Result};
use crate::femspace::{DiscreteField, MiniSpace};
use crate::memory_kernel::TemperedKernel;
use crate::mesh::TriMesh;
use crate::sparsela::SolverKind;
use crate::timestepper::{volterra_stokes_project, ConvectionMode, ExactFlow, FlowProblem, SchemeConfig, Simulation};

fn g0(s: f64) -> f64 {
    s * s * (s - 1.0) * (s - 1.0)
}
fn g1(s: f64) -> f64 {
    2.0 * s * (s - 1.0) * (2.0 * s - 1.0)
}
fn g2(s: f64) -> f64 {
    12.0 * s * s - 12.0 * s + 2.0
}
fn g3(s: f64) -> f64 {
    24.0 * s - 12.0
}

/// Parameters of the manufactured flow. `δ` of the kernel also sets the
/// decay rate of the exact solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedCase {
    pub mu: f64,
    pub kernel: TemperedKernel,
}

impl ManufacturedCase {
    pub fn new(mu: f64, kernel: TemperedKernel) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", format!("must be positive, got {mu}")));
        }
        Ok(Self { mu, kernel })
    }

    /// `μ=1, ρ=16, β=0.5, δ=10`.
    pub fn standard() -> Self {
        Self {
            mu: 1.0,
            kernel: TemperedKernel::new(0.5, 10.0, 16.0).expect("valid default kernel"),
        }
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.kernel.delta() * t).exp()
    }

    /// Spatial velocity profile `U`, so that `u = U e^{−δt}`.
    pub fn spatial_velocity(x: f64, y: f64) -> [f64; 2] {
        [5.0 * g0(x) * g1(y), -5.0 * g1(x) * g0(y)]
    }

    pub fn spatial_velocity_grad(x: f64, y: f64) -> [[f64; 2]; 2] {
        [
            [5.0 * g1(x) * g1(y), 5.0 * g0(x) * g2(y)],
            [-5.0 * g2(x) * g0(y), -5.0 * g1(x) * g1(y)],
        ]
    }

    pub fn spatial_laplacian(x: f64, y: f64) -> [f64; 2] {
        [
            5.0 * (g2(x) * g1(y) + g0(x) * g3(y)),
            -5.0 * (g3(x) * g0(y) + g1(x) * g2(y)),
        ]
    }

    /// `f = u_t − μΔu + (u·∇)u − ρ Q*(Δu) + ∇p`.
    pub fn forcing(&self, x: f64, y: f64, t: f64) -> Result<[f64; 2]> {
        if !(t >= 0.0) {
            return Err(Error::invalid("t", format!("forcing needs t >= 0, got {t}")));
        }
        let e = self.decay(t);
        let beta = self.kernel.beta();
        let mem = self.kernel.rho() * t.powf(1.0 - beta) / (1.0 - beta);
        let u = Self::spatial_velocity(x, y);
        let gu = Self::spatial_velocity_grad(x, y);
        let lap = Self::spatial_laplacian(x, y);
        let gp = [20.0 * (2.0 * y - 1.0), 20.0 * (2.0 * x - 1.0)];
        let mut f = [0.0; 2];
        for c in 0..2 {
            let conv = u[0] * gu[c][0] + u[1] * gu[c][1];
            f[c] = e * (-self.kernel.delta() * u[c] - (self.mu + mem) * lap[c] + gp[c]) + e * e * conv;
        }
        Ok(f)
    }

    /// Load vector of the forcing at time `t`.
    pub fn forcing_load(&self, space: &Arc<MiniSpace>, t: f64) -> Result<Vec<f64>> {
        // validate once so the closure can be infallible
        self.forcing(0.5, 0.5, t)?;
        Ok(assemble_load(space, |x, y| self.forcing(x, y, t).expect("t checked"))?)
    }

    pub fn problem(&self, space: Arc<MiniSpace>) -> ManufacturedProblem {
        ManufacturedProblem { case: *self, space }
    }
}

impl ExactFlow for ManufacturedCase {
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = self.decay(t);
        let u = Self::spatial_velocity(x, y);
        [u[0] * e, u[1] * e]
    }

    fn velocity_grad(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        let e = self.decay(t);
        let g = Self::spatial_velocity_grad(x, y);
        [[g[0][0] * e, g[0][1] * e], [g[1][0] * e, g[1][1] * e]]
    }

    fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        10.0 * (2.0 * x - 1.0) * (2.0 * y - 1.0) * self.decay(t)
    }

    fn pressure_grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = self.decay(t);
        [20.0 * (2.0 * y - 1.0) * e, 20.0 * (2.0 * x - 1.0) * e]
    }
}

/// The manufactured case bound to a discrete space.
pub struct ManufacturedProblem {
    pub case: ManufacturedCase,
    space: Arc<MiniSpace>,
}

impl FlowProblem for ManufacturedProblem {
    fn space(&self) -> &Arc<MiniSpace> {
        &self.space
    }

    fn initial_velocity(&self) -> Result<DiscreteField> {
        Ok(DiscreteField::interpolate_velocity(&self.space, |x, y| {
            self.case.velocity(x, y, 0.0)
        })?)
    }

    fn boundary_velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.case.velocity(x, y, t)
    }

    fn load(&self, t: f64) -> Result<Option<Vec<f64>>> {
        self.case.forcing_load(&self.space, t).map(Some)
    }
}

/// Error norms at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    pub err_u_l2: f64,
    pub err_u_h1: f64,
    pub err_p_l2: f64,
}

fn measure(case: &ManufacturedCase, u: &DiscreteField, p: &DiscreteField, t: f64) -> ErrorSample {
    let eu = case.velocity_error(u, t);
    let ep = case.pressure_error(p, t);
    ErrorSample {
        t,
        err_u_l2: eu.l2,
        err_u_h1: eu.h1_semi,
        err_p_l2: ep.l2,
    }
}

/// Discretization knobs shared by the studies.
#[derive(Clone, Copy, Debug)]
pub struct StudySettings {
    pub tau: f64,
    pub t_final: f64,
    pub soe_tol: f64,
    pub convection: ConvectionMode,
    pub solver: SolverKind,
}

impl StudySettings {
    pub fn new(tau: f64, t_final: f64) -> Self {
        Self {
            tau,
            t_final,
            soe_tol: 1e-8,
            convection: ConvectionMode::SemiImplicit,
            solver: SolverKind::Direct,
        }
    }

    fn scheme(&self, case: &ManufacturedCase) -> Result<SchemeConfig> {
        let mut cfg = SchemeConfig::new(self.tau, self.t_final, case.mu, case.kernel)?;
        cfg.soe_tol = self.soe_tol;
        cfg.convection = self.convection;
        cfg.solver = self.solver;
        Ok(cfg)
    }
}

/// Runs the manufactured problem on `unit_square(n)`, calling `observer` with
/// the error after every `stride`-th step (and at the final step).
pub fn run_manufactured(
    case: &ManufacturedCase,
    n: usize,
    settings: &StudySettings,
    stride: usize,
    mut observer: impl FnMut(ErrorSample),
) -> Result<ErrorSample> {
    let space = MiniSpace::new(Arc::new(TriMesh::unit_square(n)?));
    let problem = case.problem(space);
    let cfg = settings.scheme(case)?;
    let n_steps = cfg.n_steps();
    let stride = stride.max(1);
    let mut sim = Simulation::new(&problem, cfg)?;
    let mut last = None;
    sim.run(&problem, |s, _| {
        if s.step % stride == 0 || s.step == n_steps {
            let e = measure(case, &s.velocity, &s.pressure, s.t);
            observer(e);
            last = Some(e);
        }
        Ok(())
    })?;
    Ok(last.expect("run visits the final step"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub err_u_l2: f64,
    pub err_u_h1: f64,
    pub err_p_l2: f64,
    /// `log₂(err_prev / err)` against the previous row; `None` on the first.
    pub rate_u_l2: Option<f64>,
    pub rate_u_h1: Option<f64>,
    pub rate_p_l2: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Appends a mesh level; rates are taken against the previous row.
    pub fn push(&mut self, n: usize, h: f64, e: &ErrorSample) {
        let rate = |prev: f64, cur: f64, hp: f64| (prev / cur).ln() / (hp / h).ln();
        let prev = self.rows.last().copied();
        self.rows.push(ConvergenceRow {
            n,
            h,
            err_u_l2: e.err_u_l2,
            err_u_h1: e.err_u_h1,
            err_p_l2: e.err_p_l2,
            rate_u_l2: prev.map(|p| rate(p.err_u_l2, e.err_u_l2, p.h)),
            rate_u_h1: prev.map(|p| rate(p.err_u_h1, e.err_u_h1, p.h)),
            rate_p_l2: prev.map(|p| rate(p.err_p_l2, e.err_p_l2, p.h)),
        });
    }

    /// Rates of the last mesh pair `(u_L2, u_H1, p_L2)`.
    pub fn headline_rates(&self) -> Option<(f64, f64, f64)> {
        let r = self.rows.last()?;
        Some((r.rate_u_l2?, r.rate_u_h1?, r.rate_p_l2?))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,err_u_L2,rate_u_L2,err_u_H1,rate_u_H1,err_p_L2,rate_p_L2\n");
        let opt = |r: Option<f64>| r.map(fmt17).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.n,
                fmt17(r.h),
                fmt17(r.err_u_l2),
                opt(r.rate_u_l2),
                fmt17(r.err_u_h1),
                opt(r.rate_u_h1),
                fmt17(r.err_p_l2),
                opt(r.rate_p_l2)
            );
        }
        s
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Final-time errors on `unit_square(n)` for each `n` (doubling), with
/// observed rates between successive meshes.
pub fn convergence_study(
    case: &ManufacturedCase,
    n_list: &[usize],
    settings: &StudySettings,
) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(Error::invalid("n_list", "must not be empty"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_list", "must be strictly increasing"));
    }
    let mut table = ConvergenceTable::default();
    for &n in n_list {
        let e = run_manufactured(case, n, settings, usize::MAX, |_| {})?;
        table.push(n, std::f64::consts::SQRT_2 / n as f64, &e);
        log::info!("convergence n={n}: {:?}", table.rows.last());
    }
    Ok(table)
}

/// Final-time Volterra-Stokes projection errors of the manufactured flow on
/// `unit_square(n)` for each `n`, as a rate table.
pub fn projection_study(
    case: &ManufacturedCase,
    n_list: &[usize],
    tau: f64,
    t_final: f64,
    soe_tol: f64,
) -> Result<ConvergenceTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_list", "must be nonempty and strictly increasing"));
    }
    let mut table = ConvergenceTable::default();
    for &n in n_list {
        let space = MiniSpace::new(Arc::new(TriMesh::unit_square(n)?));
        let series = volterra_stokes_project(case, &space, &case.kernel, case.mu, tau, t_final, soe_tol)?;
        let last = series.last().expect("series holds t = 0");
        let e = ErrorSample {
            t: last.t,
            err_u_l2: last.velocity.l2,
            err_u_h1: last.velocity.h1_semi,
            err_p_l2: last.pressure_l2,
        };
        table.push(n, std::f64::consts::SQRT_2 / n as f64, &e);
    }
    Ok(table)
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `ln(err)` against `t`. Fails on fewer than 3 points, non-positive
/// errors, or a flat series.
pub fn log_linear_fit(t: &[f64], err: &[f64]) -> Result<LinearFit> {
    if t.len() != err.len() || t.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 points, got {}",
            t.len().min(err.len())
        )));
    }
    if let Some(e) = err.iter().find(|e| !(**e > 1e-300 && e.is_finite())) {
        return Err(Error::DegenerateFit(format!(
            "error value {e} at rounding floor or non-finite"
        )));
    }
    let y: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = t.len() as f64;
    let mx = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = t.iter().zip(&y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = y.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateFit("zero variance".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: sxy * sxy / (sxx * syy),
        points: t.len(),
    })
}

#[derive(Clone, Debug)]
pub struct DecayResult {
    pub samples: Vec<ErrorSample>,
    pub fit_start: f64,
    pub fit_u_l2: LinearFit,
    pub fit_u_h1: LinearFit,
    pub fit_p_l2: LinearFit,
}

impl DecayResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,err_u_L2,err_u_H1,err_p_L2\n");
        for e in &self.samples {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt17(e.t),
                fmt17(e.err_u_l2),
                fmt17(e.err_u_h1),
                fmt17(e.err_p_l2)
            );
        }
        s
    }

    pub fn fits(&self) -> [(&'static str, LinearFit); 3] {
        [
            ("err_u_L2", self.fit_u_l2),
            ("err_u_H1", self.fit_u_h1),
            ("err_p_L2", self.fit_p_l2),
        ]
    }
}

/// Error series every `stride` steps on `unit_square(n)`, with log-linear
/// fits over `[fit_start, t_final]`.
pub fn decay_study(
    case: &ManufacturedCase,
    n: usize,
    settings: &StudySettings,
    stride: usize,
    fit_start: f64,
) -> Result<DecayResult> {
    let mut samples = Vec::new();
    run_manufactured(case, n, settings, stride, |e| samples.push(e))?;
    let window: Vec<&ErrorSample> = samples.iter().filter(|e| e.t >= fit_start - 1e-12).collect();
    if window.len() < 20 {
        return Err(Error::invalid(
            "t_final",
            format!("only {} samples in the fit window; need at least 20", window.len()),
        ));
    }
    let t: Vec<f64> = window.iter().map(|e| e.t).collect();
    let col = |f: fn(&ErrorSample) -> f64| window.iter().map(|e| f(e)).collect::<Vec<_>>();
    Ok(DecayResult {
        fit_u_l2: log_linear_fit(&t, &col(|e| e.err_u_l2))?,
        fit_u_h1: log_linear_fit(&t, &col(|e| e.err_u_h1))?,
        fit_p_l2: log_linear_fit(&t, &col(|e| e.err_p_l2))?,
        fit_start,
        samples,
    })
}
