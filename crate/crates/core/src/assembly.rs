//! Sparse operators of the mixed problem.
//!
//! Velocity matrices act on the full mini-element vector (both components);
//! they are block diagonal with the same scalar block per component. The
//! divergence coupling `B` is `n_pre × n_vel` with `B_kj = ∫ ψ_k div φ_j`.

use std::sync::Arc;

use crate::femspace::{DiscreteField, FieldError, FieldKind, MiniSpace};
use crate::mesh::Point;
use crate::sparsela::{dot, SaddleSystem, SolverError, SparseMatrix};

/// Static operators on one space; stored without boundary conditions.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub divergence: SparseMatrix,
    pub pressure_mass: SparseMatrix,
    pub space_id: u64,
}

impl OperatorSet {
    pub fn check_space(&self, space: &MiniSpace) -> Result<(), FieldError> {
        if self.space_id != space.id() {
            return Err(FieldError::SpaceMismatch {
                expected: self.space_id,
                got: space.id(),
            });
        }
        Ok(())
    }
}

/// Scalar 4×4 element mass and stiffness (hats then bubble).
pub fn element_matrices(space: &MiniSpace, t: usize) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let g = space.geometry(t);
    let jac = 2.0 * g.area;
    let mut m = [[0.0; 4]; 4];
    let mut k = [[0.0; 4]; 4];
    for (basis, w) in space.basis_at_quadrature(t).iter().zip(&space.rule().weights) {
        let w = w * jac;
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += w * basis.values[a] * basis.values[b];
                k[a][b] += w * (basis.grads[a][0] * basis.grads[b][0] + basis.grads[a][1] * basis.grads[b][1]);
            }
        }
    }
    (m, k)
}

/// Mass, stiffness, divergence coupling and pressure mass.
pub fn assemble_static(space: &Arc<MiniSpace>) -> OperatorSet {
    let mesh = space.mesh();
    let nt = mesh.n_triangles();
    let (nv, np) = (space.n_vel_dofs(), space.n_pre_dofs());
    let mut mt = Vec::with_capacity(nt * 32);
    let mut kt = Vec::with_capacity(nt * 32);
    let mut bt = Vec::with_capacity(nt * 24);
    let mut pt = Vec::with_capacity(nt * 9);
    for t in 0..nt {
        let nodes = space.element_nodes(t);
        let tri = mesh.triangles()[t];
        let (m, k) = element_matrices(space, t);
        for c in 0..2 {
            for a in 0..4 {
                let i = space.velocity_dof(c, nodes[a]);
                for b in 0..4 {
                    let j = space.velocity_dof(c, nodes[b]);
                    mt.push((i, j, m[a][b]));
                    kt.push((i, j, k[a][b]));
                }
            }
        }
        let g = space.geometry(t);
        let jac = 2.0 * g.area;
        let mut d = [[[0.0; 4]; 2]; 3];
        let mut pm = [[0.0; 3]; 3];
        for (basis, w) in space.basis_at_quadrature(t).iter().zip(&space.rule().weights) {
            let w = w * jac;
            for p in 0..3 {
                let psi = basis.values[p];
                for c in 0..2 {
                    for b in 0..4 {
                        d[p][c][b] += w * psi * basis.grads[b][c];
                    }
                }
                for q in 0..3 {
                    pm[p][q] += w * psi * basis.values[q];
                }
            }
        }
        for p in 0..3 {
            for c in 0..2 {
                for b in 0..4 {
                    bt.push((tri[p], space.velocity_dof(c, nodes[b]), d[p][c][b]));
                }
            }
            for q in 0..3 {
                pt.push((tri[p], tri[q], pm[p][q]));
            }
        }
    }
    let build = |n, m, trip| SparseMatrix::from_triplets(n, m, trip).expect("indices in range by construction");
    OperatorSet {
        mass: build(nv, nv, mt),
        stiffness: build(nv, nv, kt),
        divergence: build(np, nv, bt),
        pressure_mass: build(np, np, pt),
        space_id: space.id(),
    }
}

/// Skew-symmetrized convection operator `N(w)`:
/// `N_ab = ½ [∫ (w·∇φ_b) φ_a − ∫ (w·∇φ_a) φ_b]` per component, so that
/// `vᵀ N(w) v = 0` exactly for every `v`.
pub fn assemble_convection(space: &Arc<MiniSpace>, w: &DiscreteField) -> Result<SparseMatrix, FieldError> {
    w.check_space(space)?;
    if w.kind() != FieldKind::Velocity {
        return Err(FieldError::KindMismatch {
            expected: FieldKind::Velocity,
            got: w.kind(),
        });
    }
    let nt = space.mesh().n_triangles();
    let mut trip = Vec::with_capacity(nt * 32);
    for t in 0..nt {
        let nodes = space.element_nodes(t);
        let jac = 2.0 * space.geometry(t).area;
        let mut c = [[0.0; 4]; 4];
        for (basis, qw) in space.basis_at_quadrature(t).iter().zip(&space.rule().weights) {
            let (wv, _) = w.eval_with_basis(t, basis);
            let qw = qw * jac;
            for b in 0..4 {
                let adv = wv[0] * basis.grads[b][0] + wv[1] * basis.grads[b][1];
                for a in 0..4 {
                    c[a][b] += qw * adv * basis.values[a];
                }
            }
        }
        for comp in 0..2 {
            for a in 0..4 {
                let i = space.velocity_dof(comp, nodes[a]);
                for b in 0..4 {
                    let v = 0.5 * (c[a][b] - c[b][a]);
                    trip.push((i, space.velocity_dof(comp, nodes[b]), v));
                }
            }
        }
    }
    let n = space.n_vel_dofs();
    Ok(SparseMatrix::from_triplets(n, n, trip).expect("indices in range by construction"))
}

fn non_finite(x: Point) -> FieldError {
    FieldError::NonFinite { x: x[0], y: x[1] }
}

/// `(f, φ_i)` for a vector function `f`.
pub fn assemble_load(space: &Arc<MiniSpace>, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Vec<f64>, FieldError> {
    let mut out = vec![0.0; space.n_vel_dofs()];
    let mut bad = None;
    space.for_each_qp(|t, x, w, basis| {
        let v = f(x[0], x[1]);
        if !(v[0].is_finite() && v[1].is_finite()) {
            bad.get_or_insert(x);
            return;
        }
        let nodes = space.element_nodes(t);
        for c in 0..2 {
            for (k, &node) in nodes.iter().enumerate() {
                out[space.velocity_dof(c, node)] += w * v[c] * basis.values[k];
            }
        }
    });
    match bad {
        Some(x) => Err(non_finite(x)),
        None => Ok(out),
    }
}

/// `(∇u, ∇φ_i)` for an analytic velocity gradient `grad[c][d] = ∂u_c/∂x_d`.
pub fn assemble_gradient_load(
    space: &Arc<MiniSpace>,
    grad: impl Fn(f64, f64) -> [[f64; 2]; 2],
) -> Result<Vec<f64>, FieldError> {
    let mut out = vec![0.0; space.n_vel_dofs()];
    let mut bad = None;
    space.for_each_qp(|t, x, w, basis| {
        let g = grad(x[0], x[1]);
        if g.iter().flatten().any(|v| !v.is_finite()) {
            bad.get_or_insert(x);
            return;
        }
        let nodes = space.element_nodes(t);
        for c in 0..2 {
            for (k, &node) in nodes.iter().enumerate() {
                out[space.velocity_dof(c, node)] += w * (g[c][0] * basis.grads[k][0] + g[c][1] * basis.grads[k][1]);
            }
        }
    });
    match bad {
        Some(x) => Err(non_finite(x)),
        None => Ok(out),
    }
}

/// `(p, div φ_i)` for an analytic pressure.
pub fn assemble_pressure_div_load(space: &Arc<MiniSpace>, p: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>, FieldError> {
    let mut out = vec![0.0; space.n_vel_dofs()];
    let mut bad = None;
    space.for_each_qp(|t, x, w, basis| {
        let v = p(x[0], x[1]);
        if !v.is_finite() {
            bad.get_or_insert(x);
            return;
        }
        let nodes = space.element_nodes(t);
        for c in 0..2 {
            for (k, &node) in nodes.iter().enumerate() {
                out[space.velocity_dof(c, node)] += w * v * basis.grads[k][c];
            }
        }
    });
    match bad {
        Some(x) => Err(non_finite(x)),
        None => Ok(out),
    }
}

/// P1 stiffness on the pressure (vertex) nodes.
pub fn assemble_p1_stiffness(space: &Arc<MiniSpace>) -> SparseMatrix {
    let mesh = space.mesh();
    let mut trip = Vec::with_capacity(mesh.n_triangles() * 9);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = space.geometry(t);
        for a in 0..3 {
            for b in 0..3 {
                let v =
                    g.area * (g.grad_lambda[a][0] * g.grad_lambda[b][0] + g.grad_lambda[a][1] * g.grad_lambda[b][1]);
                trip.push((tri[a], tri[b], v));
            }
        }
    }
    let n = mesh.n_vertices();
    SparseMatrix::from_triplets(n, n, trip).expect("indices in range by construction")
}

/// `(ω_h, ψ_i)` with `ω_h = ∂_x u_2 − ∂_y u_1` of a discrete velocity, on P1 nodes.
pub fn assemble_curl_load(u: &DiscreteField) -> Vec<f64> {
    let space = u.space();
    let mesh = space.mesh();
    let mut out = vec![0.0; mesh.n_vertices()];
    space.for_each_qp(|t, _, w, basis| {
        let (_, g) = u.eval_with_basis(t, basis);
        let omega = g[1][0] - g[0][1];
        for (k, &v) in mesh.triangles()[t].iter().enumerate() {
            out[v] += w * omega * basis.values[k];
        }
    });
    out
}

/// Result of [`inf_sup_estimate`].
#[derive(Clone, Copy, Debug)]
pub struct InfSupEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Removes the constant component of `q` in the `M_p` inner product.
pub fn remove_constant(q: &mut [f64], pressure_mass: &SparseMatrix) {
    let ones = vec![1.0; q.len()];
    let m1 = pressure_mass.spmv(&ones);
    let c = dot(q, &m1) / dot(&ones, &m1);
    q.iter_mut().for_each(|x| *x -= c);
}

/// Smallest nontrivial `σ` with `B K⁻¹ Bᵀ q = σ² M_p q` (Dirichlet DOFs
/// eliminated from `K`), by inverse iteration on the pressure Schur
/// complement; the constant pressure is projected out when it lies in the
/// null space. Non-convergence within `max_iter` is logged as a warning and
/// the current estimate returned.
pub fn inf_sup_estimate(
    space: &Arc<MiniSpace>,
    ops: &OperatorSet,
    max_iter: usize,
) -> Result<InfSupEstimate, SolverError> {
    let null_space = space.pressure_has_null_space();
    let mut sys = SaddleSystem::new(
        &ops.stiffness,
        &ops.divergence,
        space.dirichlet_mask(),
        if null_space { Some(0) } else { None },
    )?;
    let zero_v = vec![0.0; space.n_vel_dofs()];
    // Deterministic, non-constant start.
    let mut q: Vec<f64> = space
        .mesh()
        .vertices()
        .iter()
        .map(|p| (1.7 * p[0] + 0.3).sin() + (2.3 * p[1]).cos() * 0.5 + p[0] * p[1])
        .collect();
    let normalize = |q: &mut Vec<f64>| {
        if null_space {
            remove_constant(q, &ops.pressure_mass);
        }
        let n = dot(q, &ops.pressure_mass.spmv(q)).sqrt();
        q.iter_mut().for_each(|x| *x /= n);
    };
    normalize(&mut q);
    let mut sigma2 = f64::INFINITY;
    for it in 1..=max_iter {
        let mq = ops.pressure_mass.spmv(&q);
        let g: Vec<f64> = mq.iter().map(|x| -x).collect();
        let (_, mut p) = sys.solve(&zero_v, &g, &zero_v)?;
        if null_space {
            remove_constant(&mut p, &ops.pressure_mass);
        }
        // Rayleigh quotient of S⁻¹ in the M_p inner product (‖q‖_Mp = 1).
        let new = 1.0 / dot(&p, &mq);
        q = p;
        normalize(&mut q);
        let done = (new - sigma2).abs() <= 1e-10 * new;
        sigma2 = new;
        if done {
            return Ok(InfSupEstimate {
                value: sigma2.sqrt(),
                iterations: it,
                converged: true,
            });
        }
    }
    log::warn!("inf-sup estimate not converged after {max_iter} iterations; returning current value");
    Ok(InfSupEstimate {
        value: sigma2.sqrt(),
        iterations: max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryTag, TriMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_triangle() -> Arc<MiniSpace> {
        let m = TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![BoundaryTag::Wall; 3],
        )
        .unwrap();
        MiniSpace::new(Arc::new(m))
    }

    fn space(n: usize) -> Arc<MiniSpace> {
        MiniSpace::new(Arc::new(TriMesh::unit_square(n).unwrap()))
    }

    #[test]
    fn reference_element_matrices() {
        let s = single_triangle();
        let (m, k) = element_matrices(&s, 0);
        let area = 0.5;
        for a in 0..3 {
            for b in 0..3 {
                let exact = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                assert!((m[a][b] - exact).abs() < 1e-15);
            }
        }
        let kx = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((k[a][b] - kx[a][b]).abs() < 1e-15);
            }
        }
        // Σ_a ∫ b λ_a = ∫ 27 λ0λ1λ2 = 27·2·area/5! = 0.45·area.
        assert!((m[3].iter().take(3).sum::<f64>() - 0.45 * area).abs() < 1e-15);
    }

    #[test]
    fn mass_row_sums_and_symmetry() {
        let s = space(6);
        let ops = assemble_static(&s);
        // Hats form a partition of unity, so M applied to the hat indicator
        // gives ∫ φ_i in every row.
        let nvert = s.mesh().n_vertices();
        let mut hats = vec![0.0; s.n_vel_dofs()];
        hats[..nvert].iter_mut().for_each(|x| *x = 1.0);
        let row = ops.mass.spmv(&hats);
        let total: f64 = row[..nvert].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for t in 0..s.mesh().n_triangles() {
            assert!((row[nvert + t] - 0.45 * s.geometry(t).area).abs() < 1e-15);
        }
        let mt = ops.mass.transpose();
        let kt = ops.stiffness.transpose();
        let diff_m = ops.mass.add_scaled(&mt, -1.0).unwrap();
        let diff_k = ops.stiffness.add_scaled(&kt, -1.0).unwrap();
        assert!(diff_m.norm_inf() <= 1e-12 * ops.mass.norm_inf());
        assert!(diff_k.norm_inf() <= 1e-12 * ops.stiffness.norm_inf());
    }

    #[test]
    fn stiffness_kills_constants() {
        let s = space(5);
        let ops = assemble_static(&s);
        let ns = s.n_scalar();
        let mut v = vec![0.0; s.n_vel_dofs()];
        for i in 0..s.mesh().n_vertices() {
            v[i] = 2.0;
            v[ns + i] = -1.0;
        }
        let kv = ops.stiffness.spmv(&v);
        assert!(kv.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn constant_pressure_in_kernel_of_gradient() {
        let s = space(5);
        let ops = assemble_static(&s);
        let bt1 = ops.divergence.spmv_transpose(&vec![1.0; s.n_pre_dofs()]);
        for (i, x) in bt1.iter().enumerate() {
            if !s.dirichlet_mask()[i] {
                assert!(x.abs() < 1e-13, "dof {i}: {x}");
            }
        }
    }

    #[test]
    fn convection_is_skew() {
        let s = space(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let w: Vec<f64> = (0..s.n_vel_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = DiscreteField::from_coeffs(&s, FieldKind::Velocity, w).unwrap();
            let n = assemble_convection(&s, &w).unwrap();
            let v: Vec<f64> = (0..s.n_vel_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nv = n.spmv(&v);
            let vnv = dot(&v, &nv);
            assert!(vnv.abs() <= 1e-12 * dot(&v, &v).sqrt() * dot(&nv, &nv).sqrt());
            let sym = n.add_scaled(&n.transpose(), 1.0).unwrap();
            assert!(sym.norm_inf() <= 1e-12 * n.norm_inf());
        }
        let zero = DiscreteField::zeros(&s, FieldKind::Velocity);
        assert_eq!(assemble_convection(&s, &zero).unwrap().nnz(), 0);
    }

    #[test]
    fn convection_matches_elementwise_oracle() {
        // w = (1, 0), v = (x + 2y, 3x), z = (y, x - y): ½[(w·∇v)·z − (w·∇z)·v].
        let s = space(4);
        let w = DiscreteField::interpolate_velocity(&s, |_, _| [1.0, 0.0]).unwrap();
        let n = assemble_convection(&s, &w).unwrap();
        let v = DiscreteField::interpolate_velocity(&s, |x, y| [x + 2.0 * y, 3.0 * x]).unwrap();
        let z = DiscreteField::interpolate_velocity(&s, |x, y| [y, x - y]).unwrap();
        let got = dot(z.coeffs(), &n.spmv(v.coeffs()));
        let mut oracle = 0.0;
        s.for_each_qp(|_, p, wt, _| {
            let (x, y) = (p[0], p[1]);
            let vv = [x + 2.0 * y, 3.0 * x];
            let zz = [y, x - y];
            let dv = [1.0, 3.0]; // ∂x v
            let dz = [0.0, 1.0]; // ∂x z
            oracle += wt * 0.5 * ((dv[0] * zz[0] + dv[1] * zz[1]) - (dz[0] * vv[0] + dz[1] * vv[1]));
        });
        assert!((got - oracle).abs() < 1e-13, "{got} vs {oracle}");
    }

    #[test]
    fn load_partition_of_unity() {
        let s = space(4);
        let f = assemble_load(&s, |_, _| [1.0, 0.0]).unwrap();
        let hats: f64 = (0..s.mesh().n_vertices()).map(|i| f[i]).sum();
        assert!((hats - 1.0).abs() < 1e-13);
        assert!(assemble_load(&s, |_, _| [0.0, 0.0]).unwrap().iter().all(|&x| x == 0.0));
        assert!(matches!(
            assemble_load(&s, |x, _| [1.0 / (x - x), 0.0]),
            Err(FieldError::NonFinite { .. })
        ));
    }

    #[test]
    fn element_order_does_not_matter() {
        let m = TriMesh::unit_square(4).unwrap();
        let mut tris = m.triangles().to_vec();
        tris.reverse();
        tris.rotate_left(7);
        let shuffled = TriMesh::new(m.vertices().to_vec(), tris, m.vertex_tags().to_vec()).unwrap();
        let a = assemble_static(&MiniSpace::new(Arc::new(m)));
        let b = assemble_static(&MiniSpace::new(Arc::new(shuffled)));
        // Vertex blocks coincide; bubble numbering follows triangle order.
        let nv = 25;
        for i in 0..nv {
            for j in 0..nv {
                assert!((a.stiffness.get(i, j) - b.stiffness.get(i, j)).abs() < 1e-12);
                assert!((a.pressure_mass.get(i, j) - b.pressure_mass.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inf_sup_positive_and_stable() {
        let mut values = Vec::new();
        for n in [4, 8, 16] {
            let s = space(n);
            let ops = assemble_static(&s);
            let est = inf_sup_estimate(&s, &ops, 500).unwrap();
            assert!(est.value > 0.0 && est.value.is_finite());
            values.push(est.value);
        }
        assert!(values.iter().all(|&v| v >= 0.1 * values[0]), "{values:?}");
        let s = space(4);
        let ops = assemble_static(&s);
        let mut c = vec![3.0; s.n_pre_dofs()];
        remove_constant(&mut c, &ops.pressure_mass);
        assert!(c.iter().all(|x| x.abs() <= 1e-10));
    }
}
