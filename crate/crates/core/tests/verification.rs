use viscoflow::memory_kernel::TemperedKernel;
use viscoflow::prelude::*;
use viscoflow::verification::{convergence_study, decay_study, log_linear_fit, run_manufactured};

fn quick() -> StudySettings {
    StudySettings::new(1e-3, 0.05)
}

#[test]
fn coarse_table_has_sensible_rates() {
    let table = convergence_study(&ManufacturedCase::standard(), &[4, 8, 16], &quick()).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert!(table.rows[0].rate_u_l2.is_none());
    for r in &table.rows[1..] {
        assert!(r.rate_u_l2.unwrap() > 1.2, "{r:?}");
        assert!(r.rate_u_h1.unwrap() > 0.7, "{r:?}");
        assert!(r.rate_p_l2.unwrap() > 0.7, "{r:?}");
    }
    let csv = table.to_csv();
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(
        first[3].is_empty() && first[5].is_empty() && first[7].is_empty(),
        "{csv}"
    );
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn mesh_list_must_increase() {
    let case = ManufacturedCase::standard();
    assert!(convergence_study(&case, &[8, 4], &quick()).is_err());
    assert!(convergence_study(&case, &[], &quick()).is_err());
}

#[test]
fn samples_follow_stride() {
    let mut ts = Vec::new();
    let last = run_manufactured(&ManufacturedCase::standard(), 4, &quick(), 10, |e| ts.push(e.t)).unwrap();
    assert_eq!(ts.len(), 6);
    assert!((ts[1] - 0.01).abs() < 1e-12);
    assert!((last.t - 0.05).abs() < 1e-12);
}

#[test]
fn decay_needs_enough_samples() {
    let e = decay_study(&ManufacturedCase::standard(), 4, &quick(), 10, 0.0).unwrap_err();
    assert!(e.to_string().contains("t_final"), "{e}");
}

#[test]
fn decay_rate_tracks_delta_on_coarse_mesh() {
    // errors scale like e^{-δt}, so the fitted slope should sit near −δ
    // τ small enough that the explicit local memory term stays stable (ρκ₀ ≈ μ)
    let settings = StudySettings::new(1e-3, 1.0);
    let r = decay_study(&ManufacturedCase::standard(), 6, &settings, 25, 0.1).unwrap();
    for (name, fit) in r.fits() {
        assert!(fit.slope < -5.0 && fit.r_squared > 0.98, "{name}: {fit:?}");
    }
    assert!(r.to_csv().starts_with("t,err_u_L2,err_u_H1,err_p_L2\n"));
}

#[test]
fn newtonian_case_converges_too() {
    let case = ManufacturedCase::new(1.0, TemperedKernel::new(0.5, 10.0, 0.0).unwrap()).unwrap();
    let table = convergence_study(&case, &[4, 8, 16], &quick()).unwrap();
    let (l2, h1, _) = table.headline_rates().unwrap();
    assert!(l2 > 1.5 && h1 > 0.8, "{l2} {h1}");
}

#[test]
fn fit_rejects_degenerate_data() {
    assert!(log_linear_fit(&[0.0, 1.0], &[1.0, 0.5]).is_err());
    assert!(log_linear_fit(&[0.0, 1.0, 2.0], &[1.0, 0.0, 0.5]).is_err());
    assert!(log_linear_fit(&[1.0, 1.0, 1.0], &[1.0, 0.5, 0.2]).is_err());
}
