use proptest::prelude::*;

use viscoflow::memory_kernel::{
    build_soe, convolve_direct, gronwall_bound, gronwall_threshold, HistoryState, TemperedKernel,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moment_is_additive(beta in 0.0..0.95f64, delta in 0.1..20.0f64, a in 0.0..2.0f64, w1 in 1e-6..1.0f64, w2 in 1e-6..1.0f64) {
        let k = TemperedKernel::new(beta, delta, 1.0).unwrap();
        let (b, c) = (a + w1, a + w1 + w2);
        let whole = k.moment(a, c).unwrap();
        let parts = k.moment(a, b).unwrap() + k.moment(b, c).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1e-300), "{} vs {}", whole, parts);
    }

    #[test]
    fn moment_to_infinity_is_total_mass(beta in 0.0..0.95f64, delta in 0.1..20.0f64) {
        let k = TemperedKernel::new(beta, delta, 1.0).unwrap();
        let m = k.moment(0.0, f64::INFINITY).unwrap();
        prop_assert!((m - k.total_mass()).abs() <= 1e-10 * k.total_mass());
    }

    #[test]
    fn soe_meets_its_certificate(beta in 0.05..0.9f64, delta in 0.5..20.0f64, s in 0.0..1.0f64) {
        let k = TemperedKernel::new(beta, delta, 1.0).unwrap();
        let soe = build_soe(&k, 1e-3, 1.0, 1e-8).unwrap();
        prop_assert!(soe.certified_rel_err() <= 1e-8);
        let t = 1e-3 * 1e3f64.powf(s);
        prop_assert!(soe.rel_err_at(t) <= soe.certified_rel_err() * (1.0 + 1e-6) + 1e-15);
    }

    #[test]
    fn history_matches_direct_sum(beta in 0.0..0.9f64, samples in prop::collection::vec(-2.0..2.0f64, 1..120)) {
        let k = TemperedKernel::new(beta, 10.0, 1.0).unwrap();
        let tau = 1e-2;
        // the SOE interval [τ, horizon] must be nondegenerate
        let soe = build_soe(&k, tau, samples.len().max(2) as f64 * tau, 1e-10).unwrap();
        let mut h = HistoryState::new(&soe, tau, 1).unwrap();
        let scale: f64 = samples.iter().map(|x| x.abs()).sum::<f64>() * k.total_mass();
        for n in 0..samples.len() {
            let fast = h.eval(&samples[n..=n]).unwrap()[0];
            let direct = convolve_direct(&k, &samples[..=n], tau).unwrap();
            prop_assert!((fast - direct).abs() <= 1e-8 * scale + 1e-15, "step {}: {} vs {}", n, fast, direct);
            h.advance(&samples[n..=n]).unwrap();
        }
    }

    #[test]
    fn gronwall_bound_grows_with_coupling(beta in 0.0..0.9f64, delta in 0.5..10.0f64, f1 in 0.0..0.45f64, f2 in 0.5..0.95f64) {
        let th = gronwall_threshold(beta, delta, 0.0).unwrap();
        let lo = gronwall_bound(f1 * th, 1.0, beta, delta, 0.0, 0.0).unwrap();
        let hi = gronwall_bound(f2 * th, 1.0, beta, delta, 0.0, 0.0).unwrap();
        prop_assert!(1.0 <= lo && lo < hi);
    }
}
