//! The tempered power-law memory kernel `Q(t) = t^{-β} e^{-δt}`: evaluation,
//! exact moments, sum-of-exponentials compression, the fast history
//! recurrence, the direct product-integration oracle, and the analysis
//! helpers (positivity, convolution Grönwall bound, regime conditions).

mod convolution;
mod gronwall;
mod history;
mod regime;
mod soe;
pub mod special;

use statrs::function::gamma::gamma;
use thiserror::Error;

pub use convolution::{convolve_direct, convolve_direct_vec, positivity_check, LagWeights, PositivityReport};
pub use gronwall::{gronwall_bound, gronwall_threshold, gronwall_verify, GronwallReport, GronwallStatus};
pub use history::HistoryState;
pub use regime::{regime_report, RegimeParams, RegimeReport};
pub use soe::{build_soe, KernelSoe};

use crate::quadrature::gauss_legendre;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("kernel evaluated at t = {0}; requires t > 0")]
    NonPositiveTime(f64),
    #[error("invalid moment interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("SOE tolerance {requested:e} not reached within {modes} modes (achieved {achieved:e})")]
    SoeUnachievable {
        requested: f64,
        achieved: f64,
        modes: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("time step {tau} is below the SOE resolution {tau_min}")]
    StepBelowResolution { tau: f64, tau_min: f64 },
    #[error("Grönwall threshold violated: C = {c} is not below {threshold}")]
    Regime { c: f64, threshold: f64 },
}

/// Tempered power-law kernel `t^{-β} e^{-δt}` together with its coupling
/// coefficient ρ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemperedKernel {
    beta: f64,
    delta: f64,
    rho: f64,
}

impl TemperedKernel {
    pub fn new(beta: f64, delta: f64, rho: f64) -> Result<Self, KernelError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(KernelError::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must lie in [0, 1)",
            });
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(KernelError::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "must be positive and finite",
            });
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(KernelError::InvalidParameter {
                name: "rho",
                value: rho,
                reason: "must be nonnegative and finite",
            });
        }
        Ok(Self { beta, delta, rho })
    }

    /// From relaxation time λ₁ and retardation time λ₂ (0 < λ₂ ≤ λ₁):
    /// `ρ = (μ/λ₁)(λ₁/λ₂ − 1)`, `δ = 1/λ₁`.
    pub fn from_relaxation_times(mu: f64, lambda1: f64, lambda2: f64, beta: f64) -> Result<Self, KernelError> {
        if !(lambda2 > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "lambda2",
                value: lambda2,
                reason: "must be positive",
            });
        }
        if !(lambda2 <= lambda1 && lambda1.is_finite()) {
            return Err(KernelError::InvalidParameter {
                name: "lambda1",
                value: lambda1,
                reason: "must be finite and at least lambda2",
            });
        }
        if !(mu > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "mu",
                value: mu,
                reason: "must be positive",
            });
        }
        Self::new(beta, 1.0 / lambda1, (mu / lambda1) * (lambda1 / lambda2 - 1.0))
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn with_rho(self, rho: f64) -> Result<Self, KernelError> {
        Self::new(self.beta, self.delta, rho)
    }

    pub fn eval(&self, t: f64) -> Result<f64, KernelError> {
        if !(t > 0.0) {
            return Err(KernelError::NonPositiveTime(t));
        }
        Ok(t.powf(-self.beta) * (-self.delta * t).exp())
    }

    /// `∫_a^b t^{-β} e^{-δt} dt`, `b` may be infinite.
    pub fn moment(&self, a: f64, b: f64) -> Result<f64, KernelError> {
        tempered_moment(self.beta, self.delta, a, b)
    }

    /// `∫_0^∞ Q = Γ(1−β)/δ^{1−β}`.
    pub fn total_mass(&self) -> f64 {
        gamma(1.0 - self.beta) / self.delta.powf(1.0 - self.beta)
    }
}

/// `∫_a^b t^{-β} e^{-δt} dt` for `0 ≤ β < 1`, `δ ≥ 0`, `0 ≤ a < b ≤ ∞`.
///
/// Narrow intervals away from the origin (`b ≤ 2a`, `δ(b−a) ≤ 1`), where the
/// incomplete gamma difference would cancel, use 24-point Gauss-Legendre on
/// the smooth integrand; everything else goes through the regularized
/// incomplete gamma functions, taking the upper side when both arguments are
/// in the continued-fraction regime.
pub fn tempered_moment(beta: f64, delta: f64, a: f64, b: f64) -> Result<f64, KernelError> {
    if !(a >= 0.0 && b > a && a.is_finite()) || b.is_nan() {
        return Err(KernelError::InvalidInterval { a, b });
    }
    if !(0.0..1.0).contains(&beta) || !(delta >= 0.0) {
        return Err(KernelError::InvalidParameter {
            name: "beta/delta",
            value: if (0.0..1.0).contains(&beta) { delta } else { beta },
            reason: "moment needs 0 <= beta < 1 and delta >= 0",
        });
    }
    let s = 1.0 - beta;
    if delta == 0.0 {
        if b.is_infinite() {
            return Err(KernelError::InvalidInterval { a, b });
        }
        return Ok((b.powf(s) - a.powf(s)) / s);
    }
    if beta == 0.0 {
        let width = b - a;
        return Ok((-delta * a).exp() * -(-delta * width).exp_m1() / delta);
    }
    if a > 0.0 && b <= 2.0 * a && delta * (b - a) <= 1.0 {
        return Ok(gauss_legendre_moment(beta, delta, a, b));
    }
    let (xa, xb) = (delta * a, delta * b);
    let (pa, qa) = special::regularized_gamma(s, xa);
    let (pb, qb) = special::regularized_gamma(s, xb);
    let diff = if xa >= s + 1.0 { qa - qb } else { pb - pa };
    Ok(gamma(s) * delta.powf(-s) * diff)
}

fn gauss_legendre_moment(beta: f64, delta: f64, a: f64, b: f64) -> f64 {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(24);
    }
    RULE.with(|(x, w)| {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter()
            .zip(w)
            .map(|(&xi, &wi)| {
                let t = mid + half * xi;
                wi * t.powf(-beta) * (-delta * t).exp()
            })
            .sum::<f64>()
            * half
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_jacobi_unit;

    #[test]
    fn parameter_validation() {
        assert!(TemperedKernel::new(1.0, 1.0, 0.0).is_err());
        assert!(TemperedKernel::new(-0.1, 1.0, 0.0).is_err());
        assert!(TemperedKernel::new(0.5, 0.0, 0.0).is_err());
        assert!(TemperedKernel::new(0.5, 1.0, -1.0).is_err());
        assert!(TemperedKernel::new(0.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn relaxation_times() {
        let k = TemperedKernel::from_relaxation_times(1.0, 0.1, 0.05, 0.5).unwrap();
        assert!((k.delta() - 10.0).abs() < 1e-14);
        assert!((k.rho() - 10.0).abs() < 1e-13);
        assert!(TemperedKernel::from_relaxation_times(1.0, 0.05, 0.1, 0.5).is_err());
        assert_eq!(
            TemperedKernel::from_relaxation_times(1.0, 0.1, 0.1, 0.5).unwrap().rho(),
            0.0
        );
    }

    #[test]
    fn pointwise_values() {
        let k = TemperedKernel::new(0.0, 10.0, 1.0).unwrap();
        assert!((k.eval(0.3).unwrap() - (-3.0f64).exp()).abs() < 1e-16);
        let k = TemperedKernel::new(0.5, 10.0, 1.0).unwrap();
        assert!((k.eval(0.1).unwrap() - 1.16333693845168).abs() < 1e-13);
        for &t in &[1e-6, 0.01, 0.7, 3.0] {
            let v = k.eval(t).unwrap();
            assert!((t.powf(0.5) * (10.0 * t).exp() * v - 1.0).abs() < 1e-14);
        }
        assert!(k.eval(0.0).is_err());
        assert!(k.eval(-1.0).is_err());
    }

    #[test]
    fn total_moment_is_gamma_ratio() {
        let k = TemperedKernel::new(0.5, 1.0, 0.0).unwrap();
        let m = k.moment(0.0, f64::INFINITY).unwrap();
        assert!((m - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        let k = TemperedKernel::new(0.5, 10.0, 0.0).unwrap();
        assert!((k.moment(0.0, f64::INFINITY).unwrap() - 0.5604991216).abs() < 1e-9);
    }

    #[test]
    fn moment_matches_jacobi_quadrature() {
        // Independent oracle: ∫_0^b t^{-β} e^{-δt} = b^{1-β} ∫_0^1 σ^{-β} e^{-δbσ} dσ
        // with a high-order Gauss-Jacobi rule for the weight σ^{-β}.
        for &beta in &[0.0, 0.25, 0.5, 0.75] {
            for &delta in &[1.0, 10.0] {
                for &b in &[1e-4f64, 0.01, 0.3, 2.0] {
                    let (s, w) = gauss_jacobi_unit(40, -beta);
                    let oracle: f64 =
                        b.powf(1.0 - beta) * s.iter().zip(&w).map(|(s, w)| w * (-delta * b * s).exp()).sum::<f64>();
                    let m = tempered_moment(beta, delta, 0.0, b).unwrap();
                    assert!(
                        (m - oracle).abs() < 1e-13 * oracle,
                        "β={beta} δ={delta} b={b}: {m} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn moment_is_additive() {
        for &beta in &[0.25, 0.5, 0.75] {
            let k = TemperedKernel::new(beta, 10.0, 1.0).unwrap();
            for &(a, b, c) in &[
                (0.0, 1e-3, 2e-3),
                (1e-3, 1.5e-3, 0.5),
                (0.05, 0.3, 4.0),
                (0.0, 0.2, f64::INFINITY),
            ] {
                let lhs = k.moment(a, b).unwrap() + k.moment(b, c).unwrap();
                let rhs = k.moment(a, c).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs, "β={beta} [{a},{b},{c}]");
            }
        }
    }

    #[test]
    fn zero_tempering_branch() {
        let tau = 1e-3;
        let m = tempered_moment(0.5, 0.0, 0.0, tau).unwrap();
        assert!((m - tau.sqrt() / 0.5).abs() < 1e-16);
        assert!(tempered_moment(0.5, 0.0, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn invalid_intervals() {
        let k = TemperedKernel::new(0.5, 1.0, 0.0).unwrap();
        assert!(k.moment(1.0, 1.0).is_err());
        assert!(k.moment(-1.0, 1.0).is_err());
        assert!(k.moment(2.0, 1.0).is_err());
    }
}
