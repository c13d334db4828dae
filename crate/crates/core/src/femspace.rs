//! Mini-element spaces: continuous P1 velocity enriched with one cubic
//! bubble per triangle (per component), continuous P1 pressure.
//!
//! Scalar velocity nodes are numbered vertices first, then one bubble per
//! triangle (`n_vertices + t`). Velocity component `c` of scalar node `i`
//! is DOF `c * n_scalar + i`. Pressure DOFs coincide with vertices.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{BoundaryTag, MeshError, Point, TriMesh};
use crate::quadrature::TriangleRule;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("non-finite sample value at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("field belongs to a different space (expected id {expected}, got {got})")]
    SpaceMismatch { expected: u64, got: u64 },
    #[error("expected a {expected:?} field, got {got:?}")]
    KindMismatch { expected: FieldKind, got: FieldKind },
    #[error("coefficient vector has length {got}, space expects {expected}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Location(#[from] MeshError),
}

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

/// Values and gradients of the four local basis functions
/// (three barycentric hats, then the bubble) at one point.
#[derive(Clone, Copy, Debug)]
pub struct LocalBasis {
    pub values: [f64; 4],
    pub grads: [[f64; 2]; 4],
}

/// Per-triangle geometry: area and constant gradients of the barycentric
/// coordinates.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
    pub points: [Point; 3],
}

impl ElementGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [a, b, c] = points;
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let inv = 1.0 / two_area;
        let grad_lambda = [
            [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
            [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
            [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
        ];
        Self {
            area: 0.5 * two_area,
            grad_lambda,
            points,
        }
    }

    pub fn map(&self, lam: [f64; 3]) -> Point {
        let [a, b, c] = self.points;
        [
            lam[0] * a[0] + lam[1] * b[0] + lam[2] * c[0],
            lam[0] * a[1] + lam[1] * b[1] + lam[2] * c[1],
        ]
    }

    /// Hat functions and the bubble `27 λ0 λ1 λ2` (equal to 1 at the barycenter).
    pub fn basis(&self, lam: [f64; 3]) -> LocalBasis {
        let g = &self.grad_lambda;
        let bubble = 27.0 * lam[0] * lam[1] * lam[2];
        let mut gb = [0.0; 2];
        for d in 0..2 {
            gb[d] = 27.0 * (g[0][d] * lam[1] * lam[2] + g[1][d] * lam[0] * lam[2] + g[2][d] * lam[0] * lam[1]);
        }
        LocalBasis {
            values: [lam[0], lam[1], lam[2], bubble],
            grads: [g[0], g[1], g[2], gb],
        }
    }
}

/// Degree-of-freedom layout of the mini element on one mesh.
#[derive(Debug)]
pub struct MiniSpace {
    id: u64,
    mesh: Arc<TriMesh>,
    dirichlet_mask: Vec<bool>,
    rule: TriangleRule,
    geometry: Vec<ElementGeometry>,
    /// Quadrature-point basis data per triangle, cached for assembly.
    basis_cache: Vec<Vec<LocalBasis>>,
}

impl MiniSpace {
    pub fn new(mesh: Arc<TriMesh>) -> Arc<Self> {
        let rule = TriangleRule::degree6();
        let geometry: Vec<ElementGeometry> = (0..mesh.n_triangles())
            .map(|t| ElementGeometry::new(mesh.triangle_points(t)))
            .collect();
        let basis_cache = geometry
            .iter()
            .map(|g| rule.points.iter().map(|&l| g.basis(l)).collect())
            .collect();
        let ns = mesh.n_vertices() + mesh.n_triangles();
        let mut dirichlet_mask = vec![false; 2 * ns];
        for (v, tag) in mesh.vertex_tags().iter().enumerate() {
            let (x, y) = match tag {
                BoundaryTag::Interior => (false, false),
                BoundaryTag::Wall | BoundaryTag::Inflow => (true, true),
                BoundaryTag::Outflow | BoundaryTag::Symmetry => (false, true),
            };
            dirichlet_mask[v] = x;
            dirichlet_mask[ns + v] = y;
        }
        Arc::new(Self {
            id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
            mesh,
            dirichlet_mask,
            rule,
            geometry,
            basis_cache,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn rule(&self) -> &TriangleRule {
        &self.rule
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn basis_at_quadrature(&self, t: usize) -> &[LocalBasis] {
        &self.basis_cache[t]
    }

    /// Scalar nodes per velocity component: vertices plus bubbles.
    pub fn n_scalar(&self) -> usize {
        self.mesh.n_vertices() + self.mesh.n_triangles()
    }

    pub fn n_vel_dofs(&self) -> usize {
        2 * self.n_scalar()
    }

    pub fn n_pre_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    /// Scalar node indices of triangle `t`: three vertices then its bubble.
    pub fn element_nodes(&self, t: usize) -> [usize; 4] {
        let [a, b, c] = self.mesh.triangles()[t];
        [a, b, c, self.mesh.n_vertices() + t]
    }

    pub fn velocity_dof(&self, component: usize, node: usize) -> usize {
        component * self.n_scalar() + node
    }

    /// Whether the pressure is determined only up to a constant, i.e. no
    /// velocity component normal to the boundary is left free.
    pub fn pressure_has_null_space(&self) -> bool {
        !self.mesh.vertex_tags().contains(&BoundaryTag::Outflow)
    }

    /// `∫_Ω ψ_i` for every P1 pressure basis function.
    pub fn pressure_lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_pre_dofs()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let a = self.geometry[t].area / 3.0;
            for &v in tri {
                m[v] += a;
            }
        }
        m
    }

    /// Iterates `(triangle, physical point, weight·|J|, basis)` over all quadrature points.
    pub fn for_each_qp(&self, mut f: impl FnMut(usize, Point, f64, &LocalBasis)) {
        for t in 0..self.mesh.n_triangles() {
            let g = &self.geometry[t];
            let jac = 2.0 * g.area;
            for (q, basis) in self.basis_cache[t].iter().enumerate() {
                let x = g.map(self.rule.points[q]);
                f(t, x, self.rule.weights[q] * jac, basis);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// Mini-element velocity (two components, P1 + bubble).
    Velocity,
    /// P1 pressure, kept at zero mean.
    Pressure,
    /// P1 scalar without mean correction (e.g. a stream function).
    Scalar,
}

/// L² norm and H¹ seminorm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// Coefficient vector tied to a [`MiniSpace`].
#[derive(Clone, Debug)]
pub struct DiscreteField {
    space: Arc<MiniSpace>,
    kind: FieldKind,
    coeffs: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(space: &Arc<MiniSpace>, kind: FieldKind) -> Self {
        let n = match kind {
            FieldKind::Velocity => space.n_vel_dofs(),
            FieldKind::Pressure | FieldKind::Scalar => space.n_pre_dofs(),
        };
        Self {
            space: Arc::clone(space),
            kind,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(space: &Arc<MiniSpace>, kind: FieldKind, coeffs: Vec<f64>) -> Result<Self, FieldError> {
        let f = Self::zeros(space, kind);
        if f.coeffs.len() != coeffs.len() {
            return Err(FieldError::Length {
                expected: f.coeffs.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs, ..f })
    }

    /// Nodal interpolant of a vector function; bubble coefficients are zero.
    pub fn interpolate_velocity(space: &Arc<MiniSpace>, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Self, FieldError> {
        let mut out = Self::zeros(space, FieldKind::Velocity);
        let ns = space.n_scalar();
        for (v, p) in space.mesh().vertices().iter().enumerate() {
            let u = f(p[0], p[1]);
            if !u[0].is_finite() || !u[1].is_finite() {
                return Err(FieldError::NonFinite { x: p[0], y: p[1] });
            }
            out.coeffs[v] = u[0];
            out.coeffs[ns + v] = u[1];
        }
        Ok(out)
    }

    /// Nodal interpolant of a scalar function, mean-corrected.
    pub fn interpolate_pressure(space: &Arc<MiniSpace>, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        let mut out = Self::interpolate_scalar(space, f)?;
        out.kind = FieldKind::Pressure;
        out.subtract_mean();
        Ok(out)
    }

    pub fn interpolate_scalar(space: &Arc<MiniSpace>, f: impl Fn(f64, f64) -> f64) -> Result<Self, FieldError> {
        let mut out = Self::zeros(space, FieldKind::Scalar);
        for (v, p) in space.mesh().vertices().iter().enumerate() {
            let val = f(p[0], p[1]);
            if !val.is_finite() {
                return Err(FieldError::NonFinite { x: p[0], y: p[1] });
            }
            out.coeffs[v] = val;
        }
        Ok(out)
    }

    pub fn space(&self) -> &Arc<MiniSpace> {
        &self.space
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn check_space(&self, space: &MiniSpace) -> Result<(), FieldError> {
        if self.space.id() != space.id() {
            return Err(FieldError::SpaceMismatch {
                expected: space.id(),
                got: self.space.id(),
            });
        }
        Ok(())
    }

    /// `∫_Ω p` of a P1 field.
    pub fn integral(&self) -> f64 {
        assert_ne!(self.kind, FieldKind::Velocity);
        self.space
            .pressure_lumped_mass()
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| m * c)
            .sum()
    }

    /// Removes the mean of a P1 field (constants are reproduced exactly).
    pub fn subtract_mean(&mut self) {
        let area = self.space.mesh().area();
        let mean = self.integral() / area;
        for c in &mut self.coeffs {
            *c -= mean;
        }
    }

    /// Value and gradient on triangle `t` at barycentric point `lam`. Velocity
    /// fields fill both rows; P1 fields use row 0.
    pub fn local_eval(&self, t: usize, lam: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
        let g = self.space.geometry(t);
        let basis = g.basis(lam);
        self.eval_with_basis(t, &basis)
    }

    pub(crate) fn eval_with_basis(&self, t: usize, basis: &LocalBasis) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        match self.kind {
            FieldKind::Velocity => {
                let nodes = self.space.element_nodes(t);
                let ns = self.space.n_scalar();
                for c in 0..2 {
                    for (k, &node) in nodes.iter().enumerate() {
                        let coef = self.coeffs[c * ns + node];
                        val[c] += coef * basis.values[k];
                        grad[c][0] += coef * basis.grads[k][0];
                        grad[c][1] += coef * basis.grads[k][1];
                    }
                }
            }
            FieldKind::Pressure | FieldKind::Scalar => {
                let tri = self.space.mesh().triangles()[t];
                for (k, &v) in tri.iter().enumerate() {
                    val[0] += self.coeffs[v] * basis.values[k];
                    grad[0][0] += self.coeffs[v] * basis.grads[k][0];
                    grad[0][1] += self.coeffs[v] * basis.grads[k][1];
                }
            }
        }
        (val, grad)
    }

    /// Finite-element evaluation at a physical point, including the bubble.
    pub fn eval(&self, p: Point) -> Result<Vec<f64>, FieldError> {
        let (t, lam) = self.space.mesh().locate(p, None)?;
        let (val, _) = self.local_eval(t, lam);
        Ok(match self.kind {
            FieldKind::Velocity => val.to_vec(),
            _ => vec![val[0]],
        })
    }

    pub fn norms(&self) -> Norms {
        match self.kind {
            FieldKind::Velocity => self.velocity_error(|_, _| ([0.0; 2], [[0.0; 2]; 2])),
            _ => self.scalar_error(|_, _| (0.0, [0.0; 2])),
        }
    }

    /// Norms of `exact - self`, where `exact` returns value and gradient
    /// (`grad[c][d] = ∂u_c/∂x_d`).
    pub fn velocity_error(&self, exact: impl Fn(f64, f64) -> ([f64; 2], [[f64; 2]; 2])) -> Norms {
        assert_eq!(self.kind, FieldKind::Velocity);
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        self.space.for_each_qp(|t, x, w, basis| {
            let (uh, guh) = self.eval_with_basis(t, basis);
            let (u, gu) = exact(x[0], x[1]);
            for c in 0..2 {
                l2 += w * (u[c] - uh[c]).powi(2);
                for d in 0..2 {
                    h1 += w * (gu[c][d] - guh[c][d]).powi(2);
                }
            }
        });
        Norms {
            l2: l2.sqrt(),
            h1_semi: h1.sqrt(),
        }
    }

    pub fn scalar_error(&self, exact: impl Fn(f64, f64) -> (f64, [f64; 2])) -> Norms {
        assert_ne!(self.kind, FieldKind::Velocity);
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        self.space.for_each_qp(|t, x, w, basis| {
            let (ph, gph) = self.eval_with_basis(t, basis);
            let (p, gp) = exact(x[0], x[1]);
            l2 += w * (p - ph[0]).powi(2);
            h1 += w * ((gp[0] - gph[0][0]).powi(2) + (gp[1] - gph[0][1]).powi(2));
        });
        Norms {
            l2: l2.sqrt(),
            h1_semi: h1.sqrt(),
        }
    }

    /// Largest nodal speed of a velocity field (vertex values only).
    pub fn max_vertex_speed(&self) -> f64 {
        assert_eq!(self.kind, FieldKind::Velocity);
        let ns = self.space.n_scalar();
        (0..self.space.mesh().n_vertices())
            .map(|v| self.coeffs[v].hypot(self.coeffs[ns + v]))
            .fold(0.0, f64::max)
    }

    /// Vertex values of a velocity field as `(u, v)` pairs.
    pub fn vertex_vectors(&self) -> Vec<[f64; 2]> {
        assert_eq!(self.kind, FieldKind::Velocity);
        let ns = self.space.n_scalar();
        (0..self.space.mesh().n_vertices())
            .map(|v| [self.coeffs[v], self.coeffs[ns + v]])
            .collect()
    }
}
