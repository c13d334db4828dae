use statrs::function::gamma::gamma;

use super::convolution::LagWeights;
use super::{tempered_moment, KernelError};

/// `(δ̂ − 2α̂)^{1−β̂} / Γ(1−β̂)`: the largest admissible `C`.
pub fn gronwall_threshold(beta_hat: f64, delta_hat: f64, alpha_hat: f64) -> Result<f64, KernelError> {
    check_params(beta_hat, delta_hat, alpha_hat)?;
    Ok((delta_hat - 2.0 * alpha_hat).powf(1.0 - beta_hat) / gamma(1.0 - beta_hat))
}

fn check_params(beta_hat: f64, delta_hat: f64, alpha_hat: f64) -> Result<(), KernelError> {
    if !(0.0..1.0).contains(&beta_hat) {
        return Err(KernelError::InvalidParameter {
            name: "beta_hat",
            value: beta_hat,
            reason: "must lie in [0, 1)",
        });
    }
    if !(alpha_hat >= 0.0) {
        return Err(KernelError::InvalidParameter {
            name: "alpha_hat",
            value: alpha_hat,
            reason: "must be nonnegative",
        });
    }
    if !(delta_hat - 2.0 * alpha_hat > 0.0) {
        return Err(KernelError::InvalidParameter {
            name: "delta_hat",
            value: delta_hat,
            reason: "must exceed 2 alpha_hat",
        });
    }
    Ok(())
}

/// Explicit bound on `y(t)` when `y ≤ C₀e^{−2α̂t} + C Q_{β̂,δ̂} * y`:
/// `C₀ e^{−2α̂t} (1 + CΓ(1−β̂) / ((δ̂−2α̂)^{1−β̂} − CΓ(1−β̂)))`.
pub fn gronwall_bound(
    c: f64,
    c0: f64,
    beta_hat: f64,
    delta_hat: f64,
    alpha_hat: f64,
    t: f64,
) -> Result<f64, KernelError> {
    let threshold = gronwall_threshold(beta_hat, delta_hat, alpha_hat)?;
    if !(c >= 0.0) {
        return Err(KernelError::InvalidParameter {
            name: "C",
            value: c,
            reason: "must be nonnegative",
        });
    }
    if c >= threshold {
        return Err(KernelError::Regime { c, threshold });
    }
    let g = gamma(1.0 - beta_hat);
    let d = (delta_hat - 2.0 * alpha_hat).powf(1.0 - beta_hat);
    Ok(c0 * (-2.0 * alpha_hat * t).exp() * (1.0 + c * g / (d - c * g)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GronwallStatus {
    /// Fixed point stays below the bound everywhere.
    Pass,
    /// Inside the threshold but the bound was exceeded somewhere.
    BoundViolated,
    /// `C` at or above the threshold: the bound does not apply.
    RegimeViolation,
    /// The discrete fixed point could not be computed (non-finite growth).
    Diverged,
}

#[derive(Clone, Debug)]
pub struct GronwallReport {
    pub status: GronwallStatus,
    pub threshold: f64,
    /// `max_k y_k / bound(t_k)` (NaN when the bound does not apply).
    pub max_ratio: f64,
    /// Fixed-point value at the final time.
    pub y_final: f64,
    pub sweeps: usize,
    pub steps: usize,
}

/// Solves the discrete Volterra inequality at equality,
/// `y_n = h_n + C Σ_{j≤n} e^{−2α̂(n−j)τ} μ_{n−j} y_j` with
/// `μ_m = ∫_{mτ}^{(m+1)τ} Q_{β̂,δ̂−2α̂}` and `h = C₀e^{−2α̂t}`, by
/// Gauss-Seidel sweeps until the relative change is ≤ 1e-12, then compares
/// with [`gronwall_bound`]. These weights integrate `e^{−2α̂(t−s)}·Q_{β̂,δ̂−2α̂}`
/// exactly against `e^{2α̂s} y(s)` held piecewise constant, which keeps the
/// discrete solution under the continuous bound.
pub fn gronwall_verify(
    c: f64,
    c0: f64,
    beta_hat: f64,
    delta_hat: f64,
    alpha_hat: f64,
    tau: f64,
    t_final: f64,
) -> Result<GronwallReport, KernelError> {
    let threshold = gronwall_threshold(beta_hat, delta_hat, alpha_hat)?;
    if !(tau > 0.0 && t_final >= tau) {
        return Err(KernelError::InvalidInterval { a: tau, b: t_final });
    }
    let steps = (t_final / tau).round() as usize;
    let shifted = delta_hat - 2.0 * alpha_hat;
    let mu = LagWeights::for_moment(tau, steps + 1, |a, b| tempered_moment(beta_hat, shifted, a, b))?;
    let kern: Vec<f64> = mu
        .as_slice()
        .iter()
        .enumerate()
        .map(|(m, w)| c * w * (-2.0 * alpha_hat * m as f64 * tau).exp())
        .collect();
    let h: Vec<f64> = (0..=steps)
        .map(|n| c0 * (-2.0 * alpha_hat * n as f64 * tau).exp())
        .collect();

    let mut y = h.clone();
    let mut sweeps = 0;
    let mut diverged = false;
    loop {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for n in 0..=steps {
            let hist: f64 = (0..n).map(|j| kern[n - j] * y[j]).sum();
            let denom = 1.0 - kern[0];
            let new = if denom > 0.0 {
                (h[n] + hist) / denom
            } else {
                f64::INFINITY
            };
            if !new.is_finite() {
                diverged = true;
                break;
            }
            change = change.max((new - y[n]).abs() / new.abs().max(f64::MIN_POSITIVE));
            y[n] = new;
        }
        if diverged || change <= 1e-12 || sweeps >= 1_000_000 {
            break;
        }
    }
    let y_final = if diverged { f64::INFINITY } else { y[steps] };
    if diverged {
        return Ok(GronwallReport {
            status: GronwallStatus::Diverged,
            threshold,
            max_ratio: f64::NAN,
            y_final,
            sweeps,
            steps,
        });
    }
    if c >= threshold {
        return Ok(GronwallReport {
            status: GronwallStatus::RegimeViolation,
            threshold,
            max_ratio: f64::NAN,
            y_final,
            sweeps,
            steps,
        });
    }
    let mut max_ratio: f64 = 0.0;
    for (n, &yn) in y.iter().enumerate() {
        let b = gronwall_bound(c, c0, beta_hat, delta_hat, alpha_hat, n as f64 * tau)?;
        max_ratio = max_ratio.max(yn / b);
    }
    let status = if max_ratio <= 1.0 + 1e-6 {
        GronwallStatus::Pass
    } else {
        GronwallStatus::BoundViolated
    };
    Ok(GronwallReport {
        status,
        threshold,
        max_ratio,
        y_final,
        sweeps,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_memory_reduces_to_h() {
        let b = gronwall_bound(0.0, 2.0, 0.5, 10.0, 1.0, 0.5).unwrap();
        assert!((b - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let r = gronwall_verify(0.0, 1.0, 0.5, 10.0, 0.0, 1e-2, 1.0).unwrap();
        assert_eq!(r.status, GronwallStatus::Pass);
        assert_eq!(r.y_final, 1.0);
    }

    #[test]
    fn bound_value_at_origin() {
        let b = gronwall_bound(1.0, 1.0, 0.5, 10.0, 0.0, 0.0).unwrap();
        let g = std::f64::consts::PI.sqrt();
        assert!((b - (1.0 + g / (10f64.sqrt() - g))).abs() < 1e-14);
        assert!((b - 2.27531).abs() < 1e-4);
    }

    #[test]
    fn bound_matches_resolvent_series_at_infinity() {
        // For α̂ = 0 and large t the fixed point of y = 1 + C Q*y tends to
        // 1 / (1 − C Γ(1−β̂)/δ̂^{1−β̂}), which equals the bound exactly.
        let r = gronwall_verify(1.0, 1.0, 0.5, 10.0, 0.0, 1e-3, 3.0).unwrap();
        let b = gronwall_bound(1.0, 1.0, 0.5, 10.0, 0.0, 3.0).unwrap();
        assert_eq!(r.status, GronwallStatus::Pass);
        assert!((r.y_final - b).abs() < 1e-3 * b, "{} vs {b}", r.y_final);
    }

    #[test]
    fn threshold_boundary() {
        let th = gronwall_threshold(0.5, 10.0, 0.0).unwrap();
        let inside = gronwall_bound(0.99 * th, 1.0, 0.5, 10.0, 0.0, 0.0).unwrap();
        assert!(inside.is_finite() && inside > 50.0);
        assert!(matches!(
            gronwall_bound(1.01 * th, 1.0, 0.5, 10.0, 0.0, 0.0),
            Err(KernelError::Regime { .. })
        ));
        let r = gronwall_verify(1.5 * th, 1.0, 0.5, 10.0, 0.0, 1e-2, 1.0).unwrap();
        assert!(matches!(
            r.status,
            GronwallStatus::RegimeViolation | GronwallStatus::Diverged
        ));
    }

    #[test]
    fn moderate_coupling_passes() {
        let r = gronwall_verify(0.5, 1.0, 0.5, 10.0, 0.0, 1e-3, 2.0).unwrap();
        assert_eq!(r.status, GronwallStatus::Pass);
        assert!(r.max_ratio <= 1.0);
    }
}
