//! Four-to-one planar contraction: boundary data, stream function, corner
//! vortex metric and the β sweep.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::assembly::{assemble_curl_load, assemble_p1_stiffness, assemble_static, OperatorSet};
use crate::error::{Error, Result};
use crate::femspace::{DiscreteField, FieldKind, MiniSpace};
use crate::memory_kernel::TemperedKernel;
use crate::mesh::{BoundaryTag, Point, TriMesh};
use crate::quadrature::gauss_legendre;
use crate::sparsela::{LuFactorization, SolverKind, SparseMatrix};
use crate::timestepper::{FlowProblem, LocalMemory, SchemeConfig, Simulation};
use crate::verification::fmt17;

/// Upstream channel half-width.
pub const INFLOW_HALF_WIDTH: f64 = 4.0;
/// Inflow plane `x = −20`.
pub const INFLOW_X: f64 = -20.0;
/// Corner box `[x0, x1] × [y0, y1]` in which the vortex area is measured.
pub const VORTEX_BOX: [f64; 4] = [-6.0, 0.0, 3.0, 4.0];
/// Streamline offset above the wall value that marks recirculation.
pub const VORTEX_EPS: f64 = 1e-6;

/// Inflow `u₁(y) = 3/8 (1 − (y/4)²)`: zero on the wall `y = 4`, maximal on
/// the symmetry line, unit flux over the half channel.
pub fn inflow_profile(y: f64) -> f64 {
    let s = y / INFLOW_HALF_WIDTH;
    0.375 * (1.0 - s * s)
}

/// `∫₀⁴ u₁(y) dy` by Gauss-Legendre (exact for the quadratic).
pub fn inflow_profile_flux() -> f64 {
    let (x, w) = gauss_legendre(4);
    let half = 0.5 * INFLOW_HALF_WIDTH;
    x.iter()
        .zip(&w)
        .map(|(x, w)| w * half * inflow_profile(half * (x + 1.0)))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionParams {
    pub mu: f64,
    pub rho: f64,
    pub beta: f64,
    pub delta: f64,
    pub tau: f64,
    pub t_final: f64,
    /// Inflow is scaled by `min(t / ramp_time, 1)`.
    pub ramp_time: f64,
    pub grading: f64,
    pub base_h: f64,
    pub soe_tol: f64,
    pub local_memory: LocalMemory,
    pub solver: SolverKind,
    /// Keep a snapshot every `snapshot_stride` steps; 0 keeps only the final state.
    pub snapshot_stride: usize,
}

impl Default for ContractionParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            rho: 16.0,
            beta: 0.5,
            delta: 10.0,
            tau: 2e-3,
            t_final: 5.0,
            ramp_time: 0.1,
            grading: 0.1,
            base_h: 1.0,
            soe_tol: 1e-8,
            local_memory: LocalMemory::Implicit,
            solver: SolverKind::Direct,
            snapshot_stride: 0,
        }
    }
}

impl ContractionParams {
    pub fn kernel(&self) -> Result<TemperedKernel> {
        Ok(TemperedKernel::new(self.beta, self.delta, self.rho)?)
    }

    pub fn mesh(&self) -> Result<TriMesh> {
        Ok(TriMesh::contraction(self.grading, self.base_h)?)
    }

    fn scheme(&self) -> Result<SchemeConfig> {
        if !(self.ramp_time > 0.0) {
            return Err(Error::invalid(
                "ramp_time",
                format!("must be positive, got {}", self.ramp_time),
            ));
        }
        let mut cfg = SchemeConfig::new(self.tau, self.t_final, self.mu, self.kernel()?)?;
        cfg.soe_tol = self.soe_tol;
        cfg.local_memory = self.local_memory;
        cfg.solver = self.solver;
        Ok(cfg)
    }

    pub fn ramp(&self, t: f64) -> f64 {
        (t / self.ramp_time).min(1.0)
    }
}

struct ContractionProblem<'a> {
    space: Arc<MiniSpace>,
    params: &'a ContractionParams,
}

impl FlowProblem for ContractionProblem<'_> {
    fn space(&self) -> &Arc<MiniSpace> {
        &self.space
    }

    fn boundary_velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        if x <= INFLOW_X + 1e-12 {
            [self.params.ramp(t) * inflow_profile(y), 0.0]
        } else {
            [0.0, 0.0]
        }
    }
}

/// Post-processed state at one time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub velocity: DiscreteField,
    pub pressure: DiscreteField,
    pub psi: DiscreteField,
    pub vortex_area: f64,
    pub max_speed: f64,
}

/// Boundary fluxes of a velocity field, by exact integration of its trace
/// (bubbles vanish on edges, so the trace is linear).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxReport {
    /// Flux entering through the inflow boundary.
    pub inflow: f64,
    /// Flux leaving through the outflow boundary.
    pub outflow: f64,
}

impl FluxReport {
    /// `|outflow − inflow| / |inflow|`.
    pub fn imbalance(&self) -> f64 {
        (self.outflow - self.inflow).abs() / self.inflow.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn boundary_fluxes(u: &DiscreteField) -> FluxReport {
    let space = u.space();
    let mesh = space.mesh();
    let ns = space.n_scalar();
    let c = u.coeffs();
    let (mut inflow, mut outflow) = (0.0, 0.0);
    for [a, b] in mesh.boundary_edges() {
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let ux = 0.5 * (c[a] + c[b]);
        let uy = 0.5 * (c[ns + a] + c[ns + b]);
        let out = ux * dy - uy * dx;
        match mesh.boundary_edge_tag(a, b) {
            BoundaryTag::Inflow => inflow -= out,
            BoundaryTag::Outflow => outflow += out,
            _ => {}
        }
    }
    FluxReport { inflow, outflow }
}

#[derive(Clone, Debug)]
pub struct ContractionRun {
    pub params: ContractionParams,
    pub mesh: Arc<TriMesh>,
    pub snapshots: Vec<Snapshot>,
    /// `|∫ inflow profile − 1|` of the prescribed profile.
    pub inflow_flux_error: f64,
    /// Discrete boundary fluxes at the final time.
    pub final_flux: FluxReport,
}

impl ContractionRun {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("a run keeps at least the final snapshot")
    }
}

/// Stream function value at every boundary vertex, integrating `u·n` along
/// the counterclockwise boundary from the lowest-leftmost vertex (`ψ = 0`).
/// Non-boundary vertices get `None`.
pub fn boundary_walk(u: &DiscreteField) -> Result<Vec<Option<f64>>> {
    let space = u.space();
    let mesh = space.mesh();
    let ns = space.n_scalar();
    let c = u.coeffs();
    let nv = mesh.n_vertices();
    let edges = mesh.boundary_edges();
    let mut next = vec![usize::MAX; nv];
    for [a, b] in &edges {
        next[*a] = *b;
    }
    let start = edges
        .iter()
        .map(|e| e[0])
        .min_by(|&a, &b| {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            pa[1].total_cmp(&pb[1]).then(pa[0].total_cmp(&pb[0]))
        })
        .ok_or_else(|| Error::invalid("mesh", "has no boundary"))?;
    let mut psi = vec![None; nv];
    psi[start] = Some(0.0);
    let (mut a, mut acc, mut visited) = (start, 0.0, 1);
    loop {
        let b = next[a];
        if b == start {
            break;
        }
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        acc += 0.5 * (c[a] + c[b]) * dy - 0.5 * (c[ns + a] + c[ns + b]) * dx;
        psi[b] = Some(acc);
        a = b;
        visited += 1;
        if visited > edges.len() {
            return Err(Error::invalid("mesh", "boundary is not a simple loop"));
        }
    }
    if visited != edges.len() {
        return Err(Error::invalid("mesh", "boundary has more than one loop"));
    }
    Ok(psi)
}

/// P1 stream function: `(∇ψ, ∇φ) = (ω_h, φ)` with Dirichlet data from
/// [`boundary_walk`]. With `boundary_flux = Some(q)` the boundary data are
/// rescaled so that their largest magnitude equals `q`, which removes the
/// O(h²) flux defect of the interpolated inflow profile.
pub fn stream_function(u: &DiscreteField, boundary_flux: Option<f64>) -> Result<DiscreteField> {
    u.check_space(u.space())?;
    if u.kind() != FieldKind::Velocity {
        return Err(crate::femspace::FieldError::KindMismatch {
            expected: FieldKind::Velocity,
            got: u.kind(),
        }
        .into());
    }
    let space = u.space();
    let mut bc = boundary_walk(u)?;
    if let Some(q) = boundary_flux {
        let peak = bc
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
        if peak.abs() > 1e-14 {
            let s = q / peak;
            bc.iter_mut().flatten().for_each(|v| *v *= s);
        }
    }
    let k = assemble_p1_stiffness(space);
    let load = assemble_curl_load(u);
    let n = k.nrows();
    let mut trip = Vec::with_capacity(k.nnz());
    let mut rhs = load;
    for i in 0..n {
        if let Some(v) = bc[i] {
            trip.push((i, i, 1.0));
            rhs[i] = v;
            continue;
        }
        let (cols, vals) = k.row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            match bc[j] {
                Some(v) => rhs[i] -= a * v,
                None => trip.push((i, j, a)),
            }
        }
    }
    let m = SparseMatrix::from_triplets(n, n, trip)?;
    let psi = LuFactorization::new(&m)?.solve(&rhs)?;
    Ok(DiscreteField::from_coeffs(space, FieldKind::Scalar, psi)?)
}

fn clip(poly: &[(Point, f64)], keep: impl Fn(Point) -> f64) -> Vec<(Point, f64)> {
    // Sutherland-Hodgman against {keep(x) ≥ 0}; `keep` is affine. The second
    // tuple entry carries ψ, linear along the polygon.
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (p, fp) = poly[i];
        let (q, fq) = poly[(i + 1) % poly.len()];
        let (sp, sq) = (keep(p), keep(q));
        if sp >= 0.0 {
            out.push((p, fp));
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let s = sp / (sp - sq);
            out.push(([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])], fp + s * (fq - fp)));
        }
    }
    out
}

fn polygon_area(poly: &[(Point, f64)]) -> f64 {
    let mut a = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i].0, poly[(i + 1) % poly.len()].0);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a.abs()
}

/// Area of `{x ∈ bx : ψ(x) > threshold}` for a P1 field, computed exactly
/// per triangle by polygon clipping (ψ is linear on each triangle).
pub fn region_area(psi: &DiscreteField, bx: [f64; 4], threshold: f64) -> f64 {
    let mesh = psi.space().mesh();
    let c = psi.coeffs();
    let mut area = 0.0;
    for tri in mesh.triangles() {
        let pts: Vec<(Point, f64)> = tri.iter().map(|&v| (mesh.vertices()[v], c[v])).collect();
        let (xmin, xmax) = pts
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), (p, _)| (a.min(p[0]), b.max(p[0])));
        let (ymin, ymax) = pts
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), (p, _)| (a.min(p[1]), b.max(p[1])));
        if xmax <= bx[0] || xmin >= bx[1] || ymax <= bx[2] || ymin >= bx[3] {
            continue;
        }
        if pts.iter().all(|(_, f)| *f <= threshold) {
            continue;
        }
        let mut poly = pts;
        poly = clip(&poly, |p| p[0] - bx[0]);
        poly = clip(&poly, |p| bx[1] - p[0]);
        poly = clip(&poly, |p| p[1] - bx[2]);
        poly = clip(&poly, |p| bx[3] - p[1]);
        if poly.len() < 3 {
            continue;
        }
        // ψ − threshold is linear along the clipped polygon; clip on its sign.
        let lifted: Vec<(Point, f64)> = poly.iter().map(|(p, f)| (*p, f - threshold)).collect();
        let mut out = Vec::with_capacity(lifted.len() + 2);
        for i in 0..lifted.len() {
            let (p, fp) = lifted[i];
            let (q, fq) = lifted[(i + 1) % lifted.len()];
            if fp > 0.0 {
                out.push((p, fp));
            }
            if (fp > 0.0) != (fq > 0.0) {
                let s = fp / (fp - fq);
                out.push(([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])], 0.0));
            }
        }
        if out.len() >= 3 {
            area += polygon_area(&out);
        }
    }
    area
}

/// Recirculation area in the corner box: where ψ exceeds the wall value
/// `psi_wall` by more than [`VORTEX_EPS`].
pub fn vortex_metric(psi: &DiscreteField, psi_wall: f64) -> f64 {
    region_area(psi, VORTEX_BOX, psi_wall + VORTEX_EPS)
}

fn snapshot(params: &ContractionParams, t: f64, step: usize, u: &DiscreteField, p: &DiscreteField) -> Result<Snapshot> {
    let wall = params.ramp(t) * inflow_profile_flux();
    let psi = stream_function(u, Some(wall))?;
    Ok(Snapshot {
        t,
        step,
        vortex_area: vortex_metric(&psi, wall),
        max_speed: u.max_vertex_speed(),
        velocity: u.clone(),
        pressure: p.clone(),
        psi,
    })
}

/// Time-marches the contraction from rest.
pub fn run_contraction(params: &ContractionParams) -> Result<ContractionRun> {
    let mesh = Arc::new(params.mesh()?);
    let space = MiniSpace::new(mesh);
    let ops = assemble_static(&space);
    run_contraction_on(params, &space, &ops)
}

/// [`run_contraction`] on a prepared space (shared across a sweep).
pub fn run_contraction_on(
    params: &ContractionParams,
    space: &Arc<MiniSpace>,
    ops: &OperatorSet,
) -> Result<ContractionRun> {
    let problem = ContractionProblem {
        space: space.clone(),
        params,
    };
    let cfg = params.scheme()?;
    let n_steps = cfg.n_steps();
    let mut sim = Simulation::with_operators(&problem, cfg, ops.clone())?;
    let mut snapshots = Vec::new();
    let stride = params.snapshot_stride;
    sim.run(&problem, |s, _| {
        let keep = s.step == n_steps || (stride > 0 && s.step % stride == 0);
        if keep {
            snapshots.push(snapshot(params, s.t, s.step, &s.velocity, &s.pressure)?);
        }
        Ok(())
    })?;
    let final_flux = boundary_fluxes(&sim.state().velocity);
    Ok(ContractionRun {
        params: params.clone(),
        mesh: space.mesh().clone(),
        snapshots,
        inflow_flux_error: (inflow_profile_flux() - 1.0).abs(),
        final_flux,
    })
}

/// One row of the sweep table.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub beta: f64,
    pub rho: f64,
    pub outcome: std::result::Result<SweepResult, String>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub vortex_area: f64,
    pub max_speed: f64,
    pub flux: FluxReport,
    pub run: ContractionRun,
}

/// Runs every `(β, ρ)` case on one mesh. Duplicate β values are dropped
/// with a warning; `include_newtonian` prepends the ρ=0 Navier-Stokes case.
/// A failing case is recorded and the sweep continues.
pub fn beta_sweep(betas: &[f64], base: &ContractionParams, include_newtonian: bool) -> Result<Vec<SweepRow>> {
    if betas.is_empty() {
        return Err(Error::invalid("betas", "must not be empty"));
    }
    let mut unique: Vec<f64> = Vec::new();
    for &b in betas {
        if unique.iter().any(|u| (u - b).abs() <= 1e-12) {
            log::warn!("duplicate beta {b} dropped from sweep");
        } else {
            unique.push(b);
        }
    }
    let mut cases = Vec::new();
    if include_newtonian {
        cases.push((unique[0], 0.0));
    }
    cases.extend(unique.iter().map(|&b| (b, base.rho)));

    let space = MiniSpace::new(Arc::new(base.mesh()?));
    let ops = assemble_static(&space);
    let mut rows = Vec::with_capacity(cases.len());
    for (beta, rho) in cases {
        let params = ContractionParams {
            beta,
            rho,
            ..base.clone()
        };
        let outcome = run_contraction_on(&params, &space, &ops)
            .map(|run| {
                let s = run.final_snapshot();
                SweepResult {
                    vortex_area: s.vortex_area,
                    max_speed: s.max_speed,
                    flux: run.final_flux,
                    run,
                }
            })
            .map_err(|e| {
                log::error!("sweep case beta={beta} rho={rho} failed: {e}");
                e.to_string()
            });
        if let Ok(r) = &outcome {
            log::info!(
                "sweep beta={beta} rho={rho}: area={:.6e} max|u|={:.6e}",
                r.vortex_area,
                r.max_speed
            );
        }
        rows.push(SweepRow { beta, rho, outcome });
    }
    Ok(rows)
}

/// `beta,rho,vortex_area,max_speed`; failed cases carry `NaN`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("beta,rho,vortex_area,max_speed\n");
    for r in rows {
        let (a, m) = match &r.outcome {
            Ok(x) => (x.vortex_area, x.max_speed),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(s, "{},{},{},{}", fmt17(r.beta), fmt17(r.rho), fmt17(a), fmt17(m));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_flux_is_one() {
        assert!((inflow_profile_flux() - 1.0).abs() <= 1e-14);
        assert_eq!(inflow_profile(4.0), 0.0);
        assert_eq!(inflow_profile(0.0), 0.375);
    }

    #[test]
    fn zero_velocity_zero_psi() {
        let space = MiniSpace::new(Arc::new(TriMesh::unit_square(4).unwrap()));
        let u = DiscreteField::zeros(&space, FieldKind::Velocity);
        let psi = stream_function(&u, Some(1.0)).unwrap();
        assert!(psi.coeffs().iter().all(|&x| x == 0.0));
        assert_eq!(region_area(&psi, [0.0, 1.0, 0.0, 1.0], 1e-6), 0.0);
    }

    #[test]
    fn uniform_channel_flow_gives_linear_psi() {
        let mesh = TriMesh::rectangle([0.0, 0.0], [3.0, 1.0], 12, 4, |_| BoundaryTag::Wall).unwrap();
        let space = MiniSpace::new(Arc::new(mesh));
        let u = DiscreteField::interpolate_velocity(&space, |_, _| [2.5, 0.0]).unwrap();
        let psi = stream_function(&u, None).unwrap();
        for (v, p) in space.mesh().vertices().iter().enumerate() {
            assert!((psi.coeffs()[v] - 2.5 * p[1]).abs() <= 1e-8, "{p:?}");
        }
    }

    #[test]
    fn region_area_of_linear_field() {
        // ψ = x on the unit square: {x > 0.3} ∩ [0.2, 0.8]² has area 0.5·0.6.
        let space = MiniSpace::new(Arc::new(TriMesh::unit_square(7).unwrap()));
        let psi = DiscreteField::interpolate_scalar(&space, |x, _| x).unwrap();
        let a = region_area(&psi, [0.2, 0.8, 0.2, 0.8], 0.3);
        assert!((a - 0.3).abs() < 1e-12, "{a}");
    }

    #[test]
    fn duplicate_betas_are_dropped() {
        let p = ContractionParams {
            grading: 0.5,
            base_h: 4.0,
            tau: 0.05,
            t_final: 0.1,
            ..Default::default()
        };
        let rows = beta_sweep(&[0.0, 0.0], &p, true).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].rho, 0.0);
        assert_eq!(rows[1].rho, 16.0);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(beta_sweep(&[], &p, false).is_err());
    }
}
