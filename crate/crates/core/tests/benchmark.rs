use viscoflow::benchmark::{boundary_fluxes, inflow_profile, run_contraction, ContractionParams, INFLOW_X};
use viscoflow::prelude::*;

fn coarse() -> ContractionParams {
    ContractionParams {
        grading: 0.5,
        base_h: 2.0,
        tau: 0.01,
        t_final: 0.3,
        snapshot_stride: 10,
        ..Default::default()
    }
}

#[test]
fn coarse_run_conserves_mass_and_honours_inflow() {
    let p = coarse();
    let run = run_contraction(&p).unwrap();
    // steps 0, 10, 20, 30
    assert_eq!(run.snapshots.len(), 4);
    assert_eq!(run.snapshots[0].step, 0);
    assert!(run.inflow_flux_error <= 1e-10);
    let last = run.final_snapshot();
    assert!((last.t - 0.3).abs() < 1e-12);
    assert!(run.final_flux.imbalance() <= 1e-8, "{:?}", run.final_flux);
    let recomputed = boundary_fluxes(&last.velocity);
    assert_eq!(recomputed, run.final_flux);

    let space = last.velocity.space();
    let ns = space.n_scalar();
    for (v, (pt, tag)) in run.mesh.vertices().iter().zip(run.mesh.vertex_tags()).enumerate() {
        let u = [last.velocity.coeffs()[v], last.velocity.coeffs()[ns + v]];
        match tag {
            BoundaryTag::Inflow if pt[0] == INFLOW_X => {
                assert!((u[0] - inflow_profile(pt[1])).abs() <= 1e-14 && u[1] == 0.0)
            }
            BoundaryTag::Wall => assert!(u[0] == 0.0 && u[1] == 0.0),
            BoundaryTag::Symmetry => assert_eq!(u[1], 0.0),
            _ => {}
        }
    }
}

#[test]
fn stream_function_spans_symmetry_to_wall() {
    let run = run_contraction(&coarse()).unwrap();
    let last = run.final_snapshot();
    let psi = last.psi.coeffs();
    let tags = run.mesh.vertex_tags();
    let on = |t: BoundaryTag| tags.iter().enumerate().filter(move |(_, &g)| g == t).map(|(v, _)| v);
    for v in on(BoundaryTag::Symmetry) {
        assert!(psi[v].abs() <= 1e-8, "symmetry psi {}", psi[v]);
    }
    for v in on(BoundaryTag::Wall) {
        assert!((psi[v] - 1.0).abs() <= 1e-12, "wall psi {}", psi[v]);
    }
    assert!(last.vortex_area >= 0.0 && last.max_speed > 0.0);
}

#[test]
fn ramp_reaches_full_inflow() {
    let p = ContractionParams::default();
    assert_eq!(p.ramp(0.0), 0.0);
    assert!((p.ramp(0.05) - 0.5).abs() < 1e-15);
    assert_eq!(p.ramp(3.0), 1.0);
}

#[test]
fn invalid_parameters_are_rejected() {
    let bad = ContractionParams { beta: 1.0, ..coarse() };
    assert!(run_contraction(&bad).is_err());
    let bad = ContractionParams {
        ramp_time: 0.0,
        ..coarse()
    };
    assert!(run_contraction(&bad).is_err());
}

#[test]
fn newtonian_flow_develops_downstream_poiseuille_profile() {
    let p = ContractionParams {
        rho: 0.0,
        grading: 0.25,
        base_h: 1.0,
        tau: 0.02,
        t_final: 2.0,
        ..Default::default()
    };
    let run = run_contraction(&p).unwrap();
    let u = &run.final_snapshot().velocity;
    // forward flow along the centerline of the narrow channel
    for x in [1.0, 5.0, 10.0, 20.0, 29.0] {
        assert!(u.eval([x, 0.0]).unwrap()[0] >= 0.0, "x={x}");
    }
    // u₁(y) at x = 25 against the parabola 1 − y²
    let ys: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let sim: Vec<f64> = ys.iter().map(|&y| u.eval([25.0, y]).unwrap()[0]).collect();
    let model: Vec<f64> = ys.iter().map(|y| 1.0 - y * y).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ms, mm) = (mean(&sim), mean(&model));
    let cov: f64 = sim.iter().zip(&model).map(|(a, b)| (a - ms) * (b - mm)).sum();
    let var = |v: &[f64], m: f64| v.iter().map(|a| (a - m).powi(2)).sum::<f64>();
    let corr = cov / (var(&sim, ms) * var(&model, mm)).sqrt();
    assert!(corr >= 0.99, "correlation {corr}");
    // a fully developed half-channel of width 1 carrying unit flux peaks at 1.5
    assert!((sim[0] - 1.5).abs() < 0.1, "centerline speed {}", sim[0]);
}

/// Several minutes: `cargo test --test benchmark -- --ignored`.
#[test]
#[ignore]
fn vortex_area_is_mesh_consistent() {
    let coarse = run_contraction(&ContractionParams::default()).unwrap();
    let fine = run_contraction(&ContractionParams {
        base_h: 0.5,
        ..Default::default()
    })
    .unwrap();
    let (a, b) = (coarse.final_snapshot().vortex_area, fine.final_snapshot().vortex_area);
    assert!((a - b).abs() < 0.2 * a, "{a} vs {b}");
}
