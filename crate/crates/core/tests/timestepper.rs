use std::sync::Arc;

use viscoflow::assembly::{assemble_load, assemble_static};
use viscoflow::prelude::*;
use viscoflow::timestepper::volterra_stokes_project;
use viscoflow::verification::projection_study;

fn square(n: usize) -> Arc<MiniSpace> {
    MiniSpace::new(Arc::new(TriMesh::unit_square(n).unwrap()))
}

struct SteadyLoad {
    space: Arc<MiniSpace>,
    load: Vec<f64>,
}

impl FlowProblem for SteadyLoad {
    fn space(&self) -> &Arc<MiniSpace> {
        &self.space
    }
    fn load(&self, _t: f64) -> viscoflow::Result<Option<Vec<f64>>> {
        Ok(Some(self.load.clone()))
    }
}

#[test]
fn stokes_mode_converges_to_steady_solution() {
    let space = square(6);
    let load = assemble_load(&space, |x, y| [(3.0 * y).sin() + x, x * y - 0.5]).unwrap();
    let problem = SteadyLoad {
        space: space.clone(),
        load: load.clone(),
    };
    let k = TemperedKernel::new(0.5, 10.0, 0.0).unwrap();
    let mut cfg = SchemeConfig::new(0.05, 10.0, 1.0, k).unwrap();
    cfg.convection = ConvectionMode::Off;

    let ops = assemble_static(&space);
    let mut steady = SaddleSystem::new(&ops.stiffness, &ops.divergence, space.dirichlet_mask(), Some(0)).unwrap();
    let nv = space.n_vel_dofs();
    let (u_ref, _) = steady
        .solve(&load, &vec![0.0; space.n_pre_dofs()], &vec![0.0; nv])
        .unwrap();
    let norm = u_ref.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut sim = Simulation::new(&problem, cfg).unwrap();
    let mut errs = Vec::new();
    sim.run(&problem, |s, _| {
        let e: f64 = s
            .velocity
            .coeffs()
            .iter()
            .zip(&u_ref)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        errs.push(e / norm);
        Ok(())
    })
    .unwrap();
    assert!(*errs.last().unwrap() < 1e-10, "{:?}", errs.last());
    // geometric decay until the rounding floor
    assert!(errs[6] < 0.1 * errs[1] && errs[11] < 0.1 * errs[6], "{:?}", &errs[..12]);
    assert!(sim.factorization_reused());
}

#[test]
fn oldroyd_limit_matches_direct_history() {
    let case = ManufacturedCase::new(1.0, TemperedKernel::new(0.0, 10.0, 16.0).unwrap()).unwrap();
    let space = square(6);
    let problem = case.problem(space);
    let run = |mode| {
        let mut cfg = SchemeConfig::new(2e-3, 0.2, 1.0, case.kernel).unwrap();
        cfg.memory = mode;
        let mut sim = Simulation::new(&problem, cfg).unwrap();
        sim.run(&problem, |_, _| Ok(())).unwrap();
        sim.into_state().velocity
    };
    let fast = run(MemoryMode::Soe);
    let direct = run(MemoryMode::Direct);
    let diff: Vec<f64> = fast.coeffs().iter().zip(direct.coeffs()).map(|(a, b)| a - b).collect();
    let d = DiscreteField::from_coeffs(fast.space(), FieldKind::Velocity, diff).unwrap();
    let rel = d.norms().l2 / direct.norms().l2;
    assert!(rel <= 1e-10, "{rel}");
}

#[test]
fn soe_history_tracks_direct_for_tempered_kernel() {
    let case = ManufacturedCase::standard();
    let problem = case.problem(square(4));
    let run = |mode| {
        let mut cfg = SchemeConfig::new(1e-3, 0.1, 1.0, case.kernel).unwrap();
        cfg.memory = mode;
        cfg.soe_tol = 1e-10;
        let mut sim = Simulation::new(&problem, cfg).unwrap();
        sim.run(&problem, |_, _| Ok(())).unwrap();
        sim.into_state().velocity
    };
    let fast = run(MemoryMode::Soe);
    let direct = run(MemoryMode::Direct);
    let num: f64 = fast
        .coeffs()
        .iter()
        .zip(direct.coeffs())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let den: f64 = direct.coeffs().iter().map(|b| b * b).sum();
    assert!((num / den).sqrt() < 1e-8, "{}", (num / den).sqrt());
}

#[test]
fn divergence_residual_and_dirichlet_values_hold_each_step() {
    let case = ManufacturedCase::standard();
    let space = square(8);
    let problem = case.problem(space.clone());
    let cfg = SchemeConfig::new(1e-3, 0.05, 1.0, case.kernel).unwrap();
    let mut sim = Simulation::new(&problem, cfg).unwrap();
    let mask = space.dirichlet_mask().to_vec();
    let ns = space.n_scalar();
    let verts = space.mesh().vertices().to_vec();
    sim.run(&problem, |s, d| {
        if s.step > 0 {
            assert!(
                d.divergence_residual <= 1e-8 * d.h1_semi,
                "{} vs {}",
                d.divergence_residual,
                d.h1_semi
            );
            for (i, &m) in mask.iter().enumerate() {
                if m {
                    let v = i % ns;
                    let exact = case.velocity(verts[v][0], verts[v][1], s.t)[i / ns];
                    assert!((s.velocity.coeffs()[i] - exact).abs() <= 1e-14);
                }
            }
        }
        Ok(())
    })
    .unwrap();
}

struct FreeDecay {
    space: Arc<MiniSpace>,
}

impl FlowProblem for FreeDecay {
    fn space(&self) -> &Arc<MiniSpace> {
        &self.space
    }
    fn initial_velocity(&self) -> viscoflow::Result<DiscreteField> {
        Ok(DiscreteField::interpolate_velocity(&self.space, |x, y| {
            ManufacturedCase::spatial_velocity(x, y).map(|c| 20.0 * c)
        })?)
    }
}

/// The memory term exchanges energy back and forth, so `‖u^n‖²` need not
/// decrease every step; with a positive memory form it stays below the
/// initial energy.
#[test]
fn energy_stays_below_initial_without_forcing() {
    let problem = FreeDecay { space: square(8) };
    let k = TemperedKernel::new(0.5, 10.0, 16.0).unwrap();
    // explicit needs ρκ₀ < μ: κ₀ ≈ 2√τ gives ρκ₀ ≈ 0.32 at τ = 1e-4
    for (local, tau) in [(LocalMemory::Explicit, 1e-4), (LocalMemory::Implicit, 1e-3)] {
        let mut cfg = SchemeConfig::new(tau, 0.2, 1.0, k).unwrap();
        cfg.local_memory = local;
        cfg.check_energy = true;
        let mut sim = Simulation::new(&problem, cfg).unwrap();
        let u0 = sim.state().velocity.coeffs().to_vec();
        let e0: f64 = u0.iter().zip(sim.operators().mass.spmv(&u0)).map(|(a, b)| a * b).sum();
        let mut last = e0;
        sim.run(&problem, |s, d| {
            if s.step > 0 {
                assert!(
                    d.energy <= e0 * (1.0 + 1e-12),
                    "{local:?} step {}: {} > {e0}",
                    s.step,
                    d.energy
                );
                last = d.energy;
            }
            Ok(())
        })
        .unwrap();
        assert!(last < 0.1 * e0, "{local:?}: {last} vs {e0}");
    }
}

#[test]
fn explicit_local_memory_is_unstable_past_its_limit() {
    // τ = 4e-3: ρκ₀ ≈ 16·2√τ ≈ 2 > μ, so the highest mesh modes grow.
    let problem = FreeDecay { space: square(8) };
    let k = TemperedKernel::new(0.5, 10.0, 16.0).unwrap();
    let final_energy = |local| {
        let mut cfg = SchemeConfig::new(4e-3, 0.4, 1.0, k).unwrap();
        cfg.local_memory = local;
        let mut sim = Simulation::new(&problem, cfg).unwrap();
        let mut e = (0.0, 0.0);
        let r = sim.run(&problem, |s, d| {
            if s.step == 1 {
                e.0 = d.energy;
            }
            e.1 = d.energy;
            Ok(())
        });
        (r.is_ok(), e)
    };
    let (ok, (first, last)) = final_energy(LocalMemory::Explicit);
    assert!(!ok || last > first, "explicit: {first} -> {last}");
    let (ok, (first, last)) = final_energy(LocalMemory::Implicit);
    assert!(ok && last < first, "implicit: {first} -> {last}");
}

#[test]
fn first_order_in_time() {
    let case = ManufacturedCase::standard();
    let space = square(8);
    let problem = case.problem(space.clone());
    let run = |tau: f64| {
        let cfg = SchemeConfig::new(tau, 0.1, 1.0, case.kernel).unwrap();
        let mut sim = Simulation::new(&problem, cfg).unwrap();
        sim.run(&problem, |_, _| Ok(())).unwrap();
        sim.into_state().velocity
    };
    let u: Vec<DiscreteField> = [8e-4, 4e-4, 2e-4, 1e-4].iter().map(|&t| run(t)).collect();
    let diff = |a: &DiscreteField, b: &DiscreteField| {
        let d: Vec<f64> = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x - y).collect();
        DiscreteField::from_coeffs(&space, FieldKind::Velocity, d)
            .unwrap()
            .norms()
            .l2
    };
    let order = (diff(&u[1], &u[2]) / diff(&u[2], &u[3])).log2();
    assert!((order - 1.0).abs() <= 0.3, "temporal order {order}");
}

#[test]
fn projection_at_time_zero_is_l2_projection() {
    let case = ManufacturedCase::standard();
    let space = square(4);
    let series = volterra_stokes_project(&case, &space, &case.kernel, 1.0, 0.1, 0.2, 1e-8).unwrap();
    assert_eq!(series.len(), 3);
    assert_eq!(series[0].t, 0.0);
    // the L² projection minimizes the L² error over divergence-free fields,
    // so it beats the nodal interpolant
    let interp = DiscreteField::interpolate_velocity(&space, |x, y| case.velocity(x, y, 0.0)).unwrap();
    assert!(series[0].velocity.l2 <= case.velocity_error(&interp, 0.0).l2);
}

#[test]
fn stokes_projection_rate_without_memory() {
    let k = TemperedKernel::new(0.5, 10.0, 0.0).unwrap();
    let case = ManufacturedCase::new(1.0, k).unwrap();
    let table = projection_study(&case, &[4, 8, 16], 0.1, 0.2, 1e-8).unwrap();
    let (l2, h1, _) = table.headline_rates().unwrap();
    assert!((1.7..=2.3).contains(&l2), "{l2}");
    assert!((0.8..=1.2).contains(&h1), "{h1}");
}
