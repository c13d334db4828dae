//! Semi-implicit Euler time stepping with a fast memory term, and the
//! Volterra-Stokes projection diagnostic.
//!
//! One step from `u^n` to `u^{n+1}` solves
//!
//! ```text
//! (M/τ + μK + N(u^n)) u^{n+1} − Bᵀp^{n+1} = M u^n/τ + F^{n+1} − ρ K (κ₀ u^n + Σ_i w_i S_i)
//!                              −B u^{n+1} = 0
//! ```
//!
//! The whole memory term is explicit; the history modes `S_i` are advanced
//! with `u^n` after the solve.

use std::sync::Arc;

use crate::assembly::{
    assemble_convection, assemble_gradient_load, assemble_load, assemble_pressure_div_load, assemble_static,
    OperatorSet,
};
use crate::error::{Error, Result};
use crate::femspace::{DiscreteField, FieldKind, MiniSpace, Norms};
use crate::memory_kernel::{build_soe, HistoryState, KernelSoe, LagWeights, TemperedKernel};
use crate::sparsela::{dot, SaddleSystem, SolverKind, SparseMatrix};

/// How the convection term enters the step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ConvectionMode {
    /// `N(u^n) u^{n+1}` in skew form.
    #[default]
    SemiImplicit,
    /// No convection (Stokes-Volterra); the system matrix is then constant.
    Off,
}

/// How the memory integral is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MemoryMode {
    /// Sum-of-exponentials recurrence, O(1) per step.
    #[default]
    Soe,
    /// Full product-integration sum over the stored history (oracle, O(n) per step).
    Direct,
}

/// Where the local memory weight `κ₀ = ∫₀^τ Q` is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LocalMemory {
    /// `−ρκ₀K u^n` on the right-hand side; the matrix carries no memory.
    /// High-frequency modes are amplified by up to `ρκ₀/μ`, so this needs
    /// `ρκ₀ < μ`.
    #[default]
    Explicit,
    /// `ρκ₀K u^{n+1}` in the matrix; only the history tail is explicit.
    Implicit,
}

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub tau: f64,
    pub t_final: f64,
    pub mu: f64,
    pub kernel: TemperedKernel,
    pub soe_tol: f64,
    pub convection: ConvectionMode,
    pub memory: MemoryMode,
    pub local_memory: LocalMemory,
    pub solver: SolverKind,
    /// Log the discrete energy and divergence residual every step.
    pub check_energy: bool,
}

impl SchemeConfig {
    pub fn new(tau: f64, t_final: f64, mu: f64, kernel: TemperedKernel) -> Result<Self> {
        let cfg = Self {
            tau,
            t_final,
            mu,
            kernel,
            soe_tol: 1e-8,
            convection: ConvectionMode::SemiImplicit,
            memory: MemoryMode::Soe,
            local_memory: LocalMemory::Explicit,
            solver: SolverKind::Direct,
            check_energy: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.t_final >= self.tau * (1.0 - 1e-12)) {
            return Err(Error::invalid(
                "t_final",
                format!("must be at least tau, got {}", self.t_final),
            ));
        }
        if !(self.mu > 0.0) {
            return Err(Error::invalid("mu", format!("must be positive, got {}", self.mu)));
        }
        if !(self.soe_tol > 0.0 && self.soe_tol < 1.0) {
            return Err(Error::invalid(
                "soe_tol",
                format!("must lie in (0, 1), got {}", self.soe_tol),
            ));
        }
        Ok(())
    }

    /// `⌈t_final/τ⌉`, robust to rounding in the ratio.
    pub fn n_steps(&self) -> usize {
        let r = self.t_final / self.tau;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * r.max(1.0) {
            n as usize
        } else {
            r.ceil() as usize
        }
    }
}

/// Problem definition consumed by [`Simulation`].
pub trait FlowProblem {
    fn space(&self) -> &Arc<MiniSpace>;

    fn initial_velocity(&self) -> Result<DiscreteField> {
        Ok(DiscreteField::zeros(self.space(), FieldKind::Velocity))
    }

    /// Velocity prescribed on constrained DOFs at time `t`.
    fn boundary_velocity(&self, _x: f64, _y: f64, _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }

    /// Load vector `(f(t), φ_i)`, or `None` when `f = 0`.
    fn load(&self, _t: f64) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

/// Closed-form velocity/pressure pair used for error measurement.
pub trait ExactFlow {
    fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2];
    /// `grad[c][d] = ∂u_c/∂x_d`.
    fn velocity_grad(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2];
    fn pressure(&self, x: f64, y: f64, t: f64) -> f64;
    fn pressure_grad(&self, x: f64, y: f64, t: f64) -> [f64; 2];

    fn velocity_error(&self, u: &DiscreteField, t: f64) -> Norms {
        u.velocity_error(|x, y| (self.velocity(x, y, t), self.velocity_grad(x, y, t)))
    }

    fn pressure_error(&self, p: &DiscreteField, t: f64) -> Norms {
        p.scalar_error(|x, y| (self.pressure(x, y, t), self.pressure_grad(x, y, t)))
    }
}

#[derive(Clone, Debug)]
enum Memory {
    None,
    Soe(HistoryState),
    Direct {
        weights: LagWeights,
        samples: Vec<Vec<f64>>,
    },
}

impl Memory {
    fn kappa0(&self) -> f64 {
        match self {
            Memory::None => 0.0,
            Memory::Soe(h) => h.kappa0(),
            Memory::Direct { weights, .. } => weights.as_slice()[0],
        }
    }

    /// Memory integral at `t_{n+1}` with newest sample `u_n`; without the
    /// local `κ₀ u_n` part when `local` is false.
    fn eval(&self, u_n: &[f64], local: bool) -> Result<Option<Vec<f64>>> {
        let k0 = if local { 1.0 } else { 0.0 };
        Ok(match self {
            Memory::None => None,
            Memory::Soe(h) if local => Some(h.eval(u_n)?),
            Memory::Soe(h) => Some(h.tail()),
            Memory::Direct { weights, samples } => {
                let w = weights.as_slice();
                let n = samples.len();
                let mut out: Vec<f64> = u_n.iter().map(|x| k0 * w[0] * x).collect();
                for (j, s) in samples.iter().enumerate() {
                    let wj = w[n - j];
                    for (o, x) in out.iter_mut().zip(s) {
                        *o += wj * x;
                    }
                }
                Some(out)
            }
        })
    }

    fn advance(&mut self, u_n: &[f64]) -> Result<()> {
        match self {
            Memory::None => {}
            Memory::Soe(h) => h.advance(u_n)?,
            Memory::Direct { samples, .. } => samples.push(u_n.to_vec()),
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        match self {
            Memory::None => true,
            Memory::Soe(h) => h.is_finite(),
            Memory::Direct { samples, .. } => samples.iter().all(|s| s.iter().all(|x| x.is_finite())),
        }
    }
}

/// Solution at one time level plus the memory it carries.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub step: usize,
    pub velocity: DiscreteField,
    pub pressure: DiscreteField,
    memory: Memory,
}

impl FlowState {
    /// The SOE history, when the fast recurrence is active.
    pub fn history(&self) -> Option<&HistoryState> {
        match &self.memory {
            Memory::Soe(h) => Some(h),
            _ => None,
        }
    }
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepDiagnostics {
    /// `u^{n+1}ᵀ M u^{n+1}`.
    pub energy: f64,
    /// Euclidean norm of `B u^{n+1}`.
    pub divergence_residual: f64,
    /// `|u^{n+1}|₁`.
    pub h1_semi: f64,
}

/// Time integrator bound to one problem space.
pub struct Simulation {
    space: Arc<MiniSpace>,
    ops: OperatorSet,
    config: SchemeConfig,
    soe: Option<KernelSoe>,
    base: SparseMatrix,
    system: SaddleSystem,
    state: FlowState,
    bc: Vec<f64>,
    last: StepDiagnostics,
}

impl Simulation {
    pub fn new(problem: &dyn FlowProblem, config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        let space = problem.space().clone();
        let ops = assemble_static(&space);
        Self::with_operators(problem, config, ops)
    }

    /// Like [`Simulation::new`] with pre-assembled operators (for sweeps on one mesh).
    pub fn with_operators(problem: &dyn FlowProblem, config: SchemeConfig, ops: OperatorSet) -> Result<Self> {
        config.validate()?;
        let space = problem.space().clone();
        ops.check_space(&space)?;
        let tau = config.tau;
        let nv = space.n_vel_dofs();

        let rho = config.kernel.rho();
        let horizon = (config.n_steps() as f64 * tau).max(2.0 * tau) * (1.0 + 1e-12);
        let (soe, memory) = if rho == 0.0 {
            (None, Memory::None)
        } else {
            match config.memory {
                MemoryMode::Soe => {
                    let soe = build_soe(&config.kernel, tau, horizon, config.soe_tol)?;
                    let h = HistoryState::new(&soe, tau, nv)?;
                    (Some(soe), Memory::Soe(h))
                }
                MemoryMode::Direct => (
                    None,
                    Memory::Direct {
                        weights: LagWeights::new(&config.kernel, tau, config.n_steps() + 2)?,
                        samples: Vec::new(),
                    },
                ),
            }
        };

        // M/τ + μK (+ ρκ₀K) on the mass pattern (which contains every element coupling).
        let local = match config.local_memory {
            LocalMemory::Explicit => 0.0,
            LocalMemory::Implicit => rho * memory.kappa0(),
        };
        let mut base = ops.mass.clone();
        base.scale(1.0 / tau);
        base.add_assign_scaled_subpattern(&ops.stiffness, config.mu + local)?;

        let pin = if space.pressure_has_null_space() { Some(0) } else { None };
        let system = SaddleSystem::new(&base, &ops.divergence, space.dirichlet_mask(), pin)?.with_solver(config.solver);

        let velocity = problem.initial_velocity()?;
        velocity.check_space(&space)?;
        let state = FlowState {
            t: 0.0,
            step: 0,
            velocity,
            pressure: DiscreteField::zeros(&space, FieldKind::Pressure),
            memory,
        };
        Ok(Self {
            space,
            ops,
            config,
            soe,
            base,
            system,
            state,
            bc: vec![0.0; nv],
            last: StepDiagnostics::default(),
        })
    }

    pub fn space(&self) -> &Arc<MiniSpace> {
        &self.space
    }

    pub fn operators(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn soe(&self) -> Option<&KernelSoe> {
        self.soe.as_ref()
    }

    pub fn state(&self) -> &FlowState {
        &self.state
    }

    pub fn into_state(self) -> FlowState {
        self.state
    }

    pub fn last_diagnostics(&self) -> StepDiagnostics {
        self.last
    }

    /// Whether the saddle matrix still holds a valid factorization
    /// (true between steps only when convection is off).
    pub fn factorization_reused(&self) -> bool {
        self.system.is_factorized()
    }

    fn fill_bc(&mut self, problem: &dyn FlowProblem, t: f64) {
        let ns = self.space.n_scalar();
        let mask = self.space.dirichlet_mask();
        for (v, p) in self.space.mesh().vertices().iter().enumerate() {
            if mask[v] || mask[ns + v] {
                let u = problem.boundary_velocity(p[0], p[1], t);
                self.bc[v] = u[0];
                self.bc[ns + v] = u[1];
            }
        }
    }

    /// Advances one step.
    pub fn step(&mut self, problem: &dyn FlowProblem) -> Result<()> {
        let n = self.state.step;
        let t_next = (n + 1) as f64 * self.config.tau;
        self.step_inner(problem, t_next).map_err(|e| Error::Step {
            step: n + 1,
            t: t_next,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self, problem: &dyn FlowProblem, t_next: f64) -> Result<()> {
        let tau = self.config.tau;
        let un = self.state.velocity.coeffs().to_vec();

        if self.config.convection == ConvectionMode::SemiImplicit {
            let conv = assemble_convection(&self.space, &self.state.velocity)?;
            let mut a = self.base.clone();
            a.add_assign_scaled_subpattern(&conv, 1.0)?;
            self.system.set_velocity_block(&a)?;
        }

        let mut rhs = self.ops.mass.spmv(&un);
        rhs.iter_mut().for_each(|x| *x /= tau);
        if let Some(f) = problem.load(t_next)? {
            for (r, fi) in rhs.iter_mut().zip(f) {
                *r += fi;
            }
        }
        if let Some(mem) = self
            .state
            .memory
            .eval(&un, self.config.local_memory == LocalMemory::Explicit)?
        {
            let km = self.ops.stiffness.spmv(&mem);
            let rho = self.config.kernel.rho();
            for (r, k) in rhs.iter_mut().zip(km) {
                *r -= rho * k;
            }
        }
        self.fill_bc(problem, t_next);
        let g = vec![0.0; self.space.n_pre_dofs()];
        let (mut u, p) = self.system.solve(&rhs, &g, &self.bc)?;
        if u.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "solution",
                step: self.state.step + 1,
            });
        }
        let mask = self.space.dirichlet_mask();
        for (i, ui) in u.iter_mut().enumerate() {
            if mask[i] {
                *ui = self.bc[i];
            }
        }
        self.state.memory.advance(&un)?;
        if !self.state.memory.is_finite() {
            return Err(Error::NonFinite {
                what: "memory history",
                step: self.state.step + 1,
            });
        }
        let mut pressure = DiscreteField::from_coeffs(&self.space, FieldKind::Pressure, p)?;
        pressure.subtract_mean();
        self.state.velocity = DiscreteField::from_coeffs(&self.space, FieldKind::Velocity, u)?;
        self.state.pressure = pressure;
        self.state.step += 1;
        self.state.t = t_next;

        let uc = self.state.velocity.coeffs();
        let bu = self.ops.divergence.spmv(uc);
        self.last = StepDiagnostics {
            energy: dot(uc, &self.ops.mass.spmv(uc)),
            divergence_residual: dot(&bu, &bu).sqrt(),
            h1_semi: dot(uc, &self.ops.stiffness.spmv(uc)).max(0.0).sqrt(),
        };
        if self.config.check_energy {
            log::debug!(
                "step {} t={:.6} energy={:.6e} div={:.3e} |u|1={:.6e}",
                self.state.step,
                self.state.t,
                self.last.energy,
                self.last.divergence_residual,
                self.last.h1_semi
            );
        }
        Ok(())
    }

    /// Runs to `t_final`, calling `observer` on the initial state and after every step.
    pub fn run(
        &mut self,
        problem: &dyn FlowProblem,
        mut observer: impl FnMut(&FlowState, &StepDiagnostics) -> Result<()>,
    ) -> Result<()> {
        observer(&self.state, &self.last)?;
        let n = self.config.n_steps();
        while self.state.step < n {
            self.step(problem)?;
            observer(&self.state, &self.last)?;
        }
        Ok(())
    }
}

/// One entry of the projection error series.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionRecord {
    pub t: f64,
    pub velocity: Norms,
    pub pressure_l2: f64,
}

/// Volterra-Stokes projection of an exact flow on a uniform time grid.
///
/// At `t_n` (n ≥ 1) solves for `(w_h, r_h)`:
/// `μ a(w_h, φ) + J_n(w_h, φ) − d(φ, r_h) = μ a(u, φ) + J_n(u, φ) − d(φ, p)`,
/// `d(w_h, q) = 0`, where `J_n(v, φ) = ρ Σ_{j=1}^{n} ω_{n−j} a(v^j, φ)` with
/// exact lag weights `ω_k = ∫_{kτ}^{(k+1)τ} Q` (the newest sample implicit,
/// older ones through the SOE history). At `t = 0` the result is the
/// discretely divergence-free L² projection.
pub fn volterra_stokes_project(
    exact: &dyn ExactFlow,
    space: &Arc<MiniSpace>,
    kernel: &TemperedKernel,
    mu: f64,
    tau: f64,
    t_final: f64,
    soe_tol: f64,
) -> Result<Vec<ProjectionRecord>> {
    let cfg = SchemeConfig {
        soe_tol,
        ..SchemeConfig::new(tau, t_final, mu, *kernel)?
    };
    let n_steps = cfg.n_steps();
    let ops = assemble_static(space);
    let nv = space.n_vel_dofs();
    let np = space.n_pre_dofs();
    let mask = space.dirichlet_mask().to_vec();
    let ns = space.n_scalar();
    let pin = if space.pressure_has_null_space() { Some(0) } else { None };
    let rho = kernel.rho();

    let boundary = |t: f64| {
        let mut bc = vec![0.0; nv];
        for (v, p) in space.mesh().vertices().iter().enumerate() {
            let u = exact.velocity(p[0], p[1], t);
            bc[v] = u[0];
            bc[ns + v] = u[1];
        }
        bc
    };
    let record = |w: &[f64], r: Vec<f64>, t: f64| -> Result<ProjectionRecord> {
        let wf = DiscreteField::from_coeffs(space, FieldKind::Velocity, w.to_vec())?;
        let mut rf = DiscreteField::from_coeffs(space, FieldKind::Pressure, r)?;
        rf.subtract_mean();
        Ok(ProjectionRecord {
            t,
            velocity: exact.velocity_error(&wf, t),
            pressure_l2: exact.pressure_error(&rf, t).l2,
        })
    };

    let mut out = Vec::with_capacity(n_steps + 1);
    // t = 0: divergence-free L² projection.
    {
        let mut l2 = SaddleSystem::new(&ops.mass, &ops.divergence, &mask, pin)?;
        let f = assemble_load(space, |x, y| exact.velocity(x, y, 0.0))?;
        let (w, r) = l2.solve(&f, &vec![0.0; np], &boundary(0.0))?;
        out.push(record(&w, r, 0.0)?);
    }
    if n_steps == 0 {
        return Ok(out);
    }

    let horizon = (n_steps as f64 * tau).max(2.0 * tau) * (1.0 + 1e-12);
    let (mut hist_w, mut hist_g, kappa0) = if rho > 0.0 {
        let soe = build_soe(kernel, tau, horizon, soe_tol)?;
        let hw = HistoryState::new(&soe, tau, nv)?;
        let hg = HistoryState::new(&soe, tau, nv)?;
        let k0 = hw.kappa0();
        (Some(hw), Some(hg), k0)
    } else {
        (None, None, 0.0)
    };
    let coef = mu + rho * kappa0;
    let mut a = ops.stiffness.clone();
    a.scale(coef);
    let mut system = SaddleSystem::new(&a, &ops.divergence, &mask, pin)?;
    system.factorize()?;
    for n in 1..=n_steps {
        let t = n as f64 * tau;
        let g = assemble_gradient_load(space, |x, y| exact.velocity_grad(x, y, t))?;
        let d = assemble_pressure_div_load(space, |x, y| exact.pressure(x, y, t))?;
        let mut rhs: Vec<f64> = g.iter().zip(&d).map(|(gi, di)| coef * gi - di).collect();
        if let (Some(hw), Some(hg)) = (&hist_w, &hist_g) {
            let tail_g = hg.tail();
            let ktail_w = ops.stiffness.spmv(&hw.tail());
            for ((r, tg), kw) in rhs.iter_mut().zip(tail_g).zip(ktail_w) {
                *r += rho * (tg - kw);
            }
        }
        let (w, r) = system
            .solve(&rhs, &vec![0.0; np], &boundary(t))
            .map_err(|e| Error::Step {
                step: n,
                t,
                source: Box::new(e.into()),
            })?;
        if let (Some(hw), Some(hg)) = (&mut hist_w, &mut hist_g) {
            hw.advance(&w)?;
            hg.advance(&g)?;
        }
        out.push(record(&w, r, t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriMesh;

    struct Still {
        space: Arc<MiniSpace>,
    }

    impl FlowProblem for Still {
        fn space(&self) -> &Arc<MiniSpace> {
            &self.space
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let space = MiniSpace::new(Arc::new(TriMesh::unit_square(4).unwrap()));
        let p = Still { space };
        let k = TemperedKernel::new(0.5, 10.0, 16.0).unwrap();
        let cfg = SchemeConfig::new(1e-2, 0.1, 1.0, k).unwrap();
        let mut sim = Simulation::new(&p, cfg).unwrap();
        let mut steps = 0;
        sim.run(&p, |s, _| {
            assert!(s.velocity.coeffs().iter().all(|&x| x == 0.0));
            assert!(s.pressure.coeffs().iter().all(|&x| x == 0.0));
            steps += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(steps, 11);
    }

    #[test]
    fn single_step_when_final_time_is_tau() {
        let space = MiniSpace::new(Arc::new(TriMesh::unit_square(2).unwrap()));
        let p = Still { space };
        let k = TemperedKernel::new(0.5, 10.0, 1.0).unwrap();
        let cfg = SchemeConfig::new(0.01, 0.01, 1.0, k).unwrap();
        assert_eq!(cfg.n_steps(), 1);
        let mut sim = Simulation::new(&p, cfg).unwrap();
        sim.run(&p, |_, _| Ok(())).unwrap();
        assert_eq!(sim.state().step, 1);
    }

    #[test]
    fn config_validation() {
        let k = TemperedKernel::new(0.5, 10.0, 1.0).unwrap();
        assert!(SchemeConfig::new(0.0, 1.0, 1.0, k).is_err());
        assert!(SchemeConfig::new(0.1, 0.01, 1.0, k).is_err());
        assert!(SchemeConfig::new(0.1, 1.0, 0.0, k).is_err());
        assert_eq!(SchemeConfig::new(1e-4, 0.5, 1.0, k).unwrap().n_steps(), 5000);
        assert_eq!(SchemeConfig::new(0.3, 1.0, 1.0, k).unwrap().n_steps(), 4);
    }
}
