use std::fmt;

use statrs::function::gamma::gamma;

use super::KernelError;

/// Physical and analysis parameters for the smallness conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeParams {
    pub mu: f64,
    pub rho: f64,
    pub beta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub gamma0: f64,
    pub c_star: f64,
}

impl RegimeParams {
    /// Validates `0 ≤ α < ½ min(δ, μγ₀/2)` and the usual parameter ranges.
    pub fn new(
        mu: f64,
        rho: f64,
        beta: f64,
        delta: f64,
        alpha: f64,
        gamma0: f64,
        c_star: f64,
    ) -> Result<Self, KernelError> {
        let bad = |name, value, reason| Err(KernelError::InvalidParameter { name, value, reason });
        if !(mu > 0.0) {
            return bad("mu", mu, "must be positive");
        }
        if !(rho >= 0.0) {
            return bad("rho", rho, "must be nonnegative");
        }
        if !(0.0..1.0).contains(&beta) {
            return bad("beta", beta, "must lie in [0, 1)");
        }
        if !(delta > 0.0) {
            return bad("delta", delta, "must be positive");
        }
        if !(gamma0 > 0.0) {
            return bad("gamma0", gamma0, "must be positive");
        }
        if !(c_star >= 0.0) {
            return bad("c_star", c_star, "must be nonnegative");
        }
        if !(alpha >= 0.0 && alpha < 0.5 * delta.min(0.5 * mu * gamma0)) {
            return bad("alpha", alpha, "must satisfy 0 <= alpha < min(delta, mu*gamma0/2)/2");
        }
        Ok(Self {
            mu,
            rho,
            beta,
            delta,
            alpha,
            gamma0,
            c_star,
        })
    }

    /// `γ₀ = c* = 1`.
    pub fn with_default_constants(mu: f64, rho: f64, beta: f64, delta: f64, alpha: f64) -> Result<Self, KernelError> {
        Self::new(mu, rho, beta, delta, alpha, 1.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeReport {
    pub params: RegimeParams,
    /// `(δ−2α)^{1−β} / Γ(1−β)`, common right side of both conditions.
    pub rhs: f64,
    /// `4 ρ²/μ² Γ(1−β)/δ^{1−β}`.
    pub lhs_basic: f64,
    pub pass_basic: bool,
    /// `max{4, 3(1 + c*²)}`.
    pub factor_strong: f64,
    /// `max{4, 3(1 + c*²)} ρ²/μ² Γ(1−β)/δ^{1−β}`.
    pub lhs_strong: f64,
    pub pass_strong: bool,
    /// `41 + 30 ρ²/μ² Γ²(1−β) / [δ(δ−2α)]^{1−β}`.
    pub theta: f64,
    /// Whether γ₀ and c* are the conventional defaults rather than measured.
    pub default_constants: bool,
}

pub fn regime_report(p: &RegimeParams) -> RegimeReport {
    let s = 1.0 - p.beta;
    let g = gamma(s);
    let ratio = p.rho * p.rho / (p.mu * p.mu);
    let rhs = (p.delta - 2.0 * p.alpha).powf(s) / g;
    let base = ratio * g / p.delta.powf(s);
    let lhs_basic = 4.0 * base;
    let factor_strong = 4f64.max(3.0 * (1.0 + p.c_star * p.c_star));
    let lhs_strong = factor_strong * base;
    let theta = 41.0 + 30.0 * ratio * g * g / (p.delta * (p.delta - 2.0 * p.alpha)).powf(s);
    RegimeReport {
        params: *p,
        rhs,
        lhs_basic,
        pass_basic: lhs_basic < rhs,
        factor_strong,
        lhs_strong,
        pass_strong: lhs_strong < rhs,
        theta,
        default_constants: p.gamma0 == 1.0 && p.c_star == 1.0,
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(f, "mu={}", p.mu)?;
        writeln!(f, "rho={}", p.rho)?;
        writeln!(f, "beta={}", p.beta)?;
        writeln!(f, "delta={}", p.delta)?;
        writeln!(f, "alpha={}", p.alpha)?;
        writeln!(f, "gamma0={}", p.gamma0)?;
        writeln!(f, "c_star={}", p.c_star)?;
        writeln!(f, "constants_are_defaults={}", self.default_constants)?;
        writeln!(f, "rhs={:.17e}", self.rhs)?;
        writeln!(f, "condition_basic_lhs={:.17e}", self.lhs_basic)?;
        writeln!(f, "condition_basic={}", verdict(self.pass_basic))?;
        writeln!(f, "condition_strong_factor={}", self.factor_strong)?;
        writeln!(f, "condition_strong_lhs={:.17e}", self.lhs_strong)?;
        writeln!(f, "condition_strong={}", verdict(self.pass_strong))?;
        writeln!(f, "theta={:.17e}", self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newtonian_limit() {
        let p = RegimeParams::with_default_constants(1.0, 0.0, 0.5, 10.0, 0.0).unwrap();
        let r = regime_report(&p);
        assert!(r.pass_basic && r.pass_strong);
        assert_eq!(r.theta, 41.0);
        assert_eq!(r.lhs_basic, 0.0);
    }

    #[test]
    fn benchmark_parameters_fail() {
        let p = RegimeParams::with_default_constants(1.0, 16.0, 0.5, 10.0, 0.0).unwrap();
        let r = regime_report(&p);
        let g = std::f64::consts::PI.sqrt();
        assert!((r.lhs_basic - 4.0 * 256.0 * g / 10f64.sqrt()).abs() < 1e-10);
        assert!((r.lhs_basic - 573.9).abs() < 0.1);
        assert!((r.rhs - 1.784).abs() < 1e-3);
        assert!(!r.pass_basic && !r.pass_strong);
        assert_eq!(r.factor_strong, 6.0);
    }

    #[test]
    fn weak_coupling_passes() {
        let p = RegimeParams::with_default_constants(1.0, 0.01, 0.5, 10.0, 0.0).unwrap();
        let r = regime_report(&p);
        assert!(r.pass_basic && r.pass_strong);
    }

    #[test]
    fn alpha_constraint_enforced() {
        // min(δ, μγ₀/2)/2 = min(10, 0.5)/2 = 0.25
        assert!(RegimeParams::with_default_constants(1.0, 1.0, 0.5, 10.0, 0.24).is_ok());
        assert!(RegimeParams::with_default_constants(1.0, 1.0, 0.5, 10.0, 0.25).is_err());
        assert!(RegimeParams::with_default_constants(1.0, 1.0, 0.5, 10.0, -0.1).is_err());
    }

    #[test]
    fn display_is_key_value() {
        let p = RegimeParams::with_default_constants(1.0, 0.0, 0.5, 10.0, 0.0).unwrap();
        let text = regime_report(&p).to_string();
        assert!(text.lines().all(|l| l.contains('=')));
        assert!(text.contains("condition_basic=PASS"));
    }
}
