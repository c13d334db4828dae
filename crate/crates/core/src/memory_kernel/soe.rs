use statrs::function::gamma::gamma;

use super::special::regularized_gamma;
use super::{KernelError, TemperedKernel};
use crate::quadrature::{gauss_jacobi_unit, gauss_legendre};

/// Hard cap on the number of exponentials.
pub const MAX_MODES: usize = 400;
const N_CERTIFY: usize = 1000;

/// Certified sum-of-exponentials approximation
/// `Q(t) ≈ Σ w_i e^{-λ_i t}` on `[tau_min, horizon]`.
#[derive(Clone, Debug)]
pub struct KernelSoe {
    kernel: TemperedKernel,
    tau_min: f64,
    horizon: f64,
    weights: Vec<f64>,
    rates: Vec<f64>,
    certified_rel_err: f64,
}

impl KernelSoe {
    pub fn kernel(&self) -> &TemperedKernel {
        &self.kernel
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    pub fn certified_rel_err(&self) -> f64 {
        self.certified_rel_err
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.rates)
            .map(|(w, l)| w * (-l * t).exp())
            .sum()
    }

    /// Relative error at `t`; the tempering factor `e^{-δt}` is common to
    /// both sides and divided out analytically.
    pub fn rel_err_at(&self, t: f64) -> f64 {
        let d = self.kernel.delta();
        let s: f64 = self
            .weights
            .iter()
            .zip(&self.rates)
            .map(|(w, l)| w * (-(l - d) * t).exp())
            .sum();
        (s * t.powf(self.kernel.beta()) - 1.0).abs()
    }
}

/// Builds a certified SOE for `kernel` on `[tau_min, horizon]`.
///
/// Starts from `t^{-β} = Γ(β)^{-1} ∫_0^∞ s^{β-1} e^{-ts} ds`: Gauss-Jacobi on
/// `[0, 1/horizon]`, Gauss-Legendre on dyadic intervals up to the point where
/// the tail is below tolerance at `t = tau_min`, with the per-interval order
/// chosen adaptively. Every rate is then shifted by δ.
pub fn build_soe(kernel: &TemperedKernel, tau_min: f64, horizon: f64, tol: f64) -> Result<KernelSoe, KernelError> {
    if !(tau_min > 0.0 && horizon > tau_min && horizon.is_finite()) {
        return Err(KernelError::InvalidInterval { a: tau_min, b: horizon });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(KernelError::InvalidParameter {
            name: "tol",
            value: tol,
            reason: "must lie in (0, 1)",
        });
    }
    let beta = kernel.beta();
    if beta == 0.0 {
        return Ok(KernelSoe {
            kernel: *kernel,
            tau_min,
            horizon,
            weights: vec![1.0],
            rates: vec![kernel.delta()],
            certified_rel_err: 0.0,
        });
    }

    let samples = log_samples(tau_min, horizon, N_CERTIFY);
    let mut best_err = f64::INFINITY;
    let mut best_modes = 0;
    // Tighten the local target until the global certificate holds.
    for attempt in 0..6 {
        let local_tol = tol * 0.25 * 10f64.powi(-attempt);
        let (nodes, wts) = discretize(beta, tau_min, horizon, local_tol);
        let g = gamma(beta);
        let mut pairs: Vec<(f64, f64)> = nodes
            .iter()
            .zip(&wts)
            .map(|(&s, &w)| (s + kernel.delta(), w / g))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let soe = KernelSoe {
            kernel: *kernel,
            tau_min,
            horizon,
            rates: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            certified_rel_err: 0.0,
        };
        let err = samples.iter().map(|&t| soe.rel_err_at(t)).fold(0.0, f64::max);
        if soe.n_modes() > MAX_MODES {
            best_err = best_err.min(err);
            best_modes = soe.n_modes();
            break;
        }
        if err <= tol {
            log::debug!("soe: {} modes, certified error {err:e}", soe.n_modes());
            return Ok(KernelSoe {
                certified_rel_err: err,
                ..soe
            });
        }
        if err < best_err {
            best_err = err;
            best_modes = soe.n_modes();
        }
    }
    Err(KernelError::SoeUnachievable {
        requested: tol,
        achieved: best_err,
        modes: best_modes,
    })
}

fn log_samples(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Nodes and weights for `∫_0^∞ s^{β-1} e^{-ts} ds`, accurate to relative
/// `local_tol` (per piece) for `t ∈ [tau_min, horizon]`.
fn discretize(beta: f64, tau_min: f64, horizon: f64, local_tol: f64) -> (Vec<f64>, Vec<f64>) {
    let g = gamma(beta);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();

    // Near-origin piece: ∫_0^{s0} s^{β-1} e^{-ts} ds = s0^β ∫_0^1 σ^{β-1} e^{-t s0 σ} dσ,
    // with t s0 ≤ 1, so a short Gauss-Jacobi rule is very accurate.
    let s0 = 1.0 / horizon;
    let mut n0 = 2;
    loop {
        let (x, w) = gauss_jacobi_unit(n0, beta - 1.0);
        let (x2, w2) = gauss_jacobi_unit(2 * n0, beta - 1.0);
        let worst = (0..=20)
            .map(|k| k as f64 / 20.0)
            .map(|c| {
                let q1: f64 = x.iter().zip(&w).map(|(x, w)| w * (-c * x).exp()).sum();
                let q2: f64 = x2.iter().zip(&w2).map(|(x, w)| w * (-c * x).exp()).sum();
                (q1 - q2).abs()
            })
            .fold(0.0, f64::max);
        // Relative to Γ(β) t^{-β} s0^{-β} ≥ Γ(β) at t ≤ horizon.
        if worst * s0.powf(beta) <= local_tol * g * horizon.powf(-beta) || n0 >= 32 {
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(s0 * xi);
                weights.push(s0.powf(beta) * wi);
            }
            break;
        }
        n0 += 1;
    }

    // Upper cutoff: tail ∫_{S}^∞ s^{β-1} e^{-τ s} ds / (Γ(β) τ^{-β}) = Q(β, τS).
    let mut x_cut = 1.0;
    while regularized_gamma(beta, x_cut).1 > 0.25 * local_tol {
        x_cut *= 1.25;
    }
    let s_max = x_cut / tau_min;

    let t_probe = log_samples(tau_min, horizon, 60);
    let mut a = s0;
    while a < s_max {
        let b = 2.0 * a;
        let mut n = 2;
        loop {
            let r1 = interval_rule(a, b, n, beta);
            let r2 = interval_rule(a, b, n + 4, beta);
            let worst = t_probe
                .iter()
                .map(|&t| {
                    let q1: f64 = r1.0.iter().zip(&r1.1).map(|(s, w)| w * (-t * s).exp()).sum();
                    let q2: f64 = r2.0.iter().zip(&r2.1).map(|(s, w)| w * (-t * s).exp()).sum();
                    (q1 - q2).abs() / (g * t.powf(-beta))
                })
                .fold(0.0, f64::max);
            if worst <= local_tol || n >= 40 {
                // Drop intervals that contribute nothing at any resolved lag.
                let contrib =
                    r1.0.iter()
                        .zip(&r1.1)
                        .map(|(s, w)| w * (-tau_min * s).exp())
                        .sum::<f64>()
                        / (g * tau_min.powf(-beta));
                if contrib > 0.01 * local_tol {
                    nodes.extend(r1.0);
                    weights.extend(r1.1);
                }
                break;
            }
            n += 1;
        }
        a = b;
    }
    (nodes, weights)
}

/// Gauss-Legendre nodes on `[a, b]` with the weight `s^{β-1}` folded in.
fn interval_rule(a: f64, b: f64, n: usize, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let s: Vec<f64> = x.iter().map(|xi| mid + half * xi).collect();
    let wt = s
        .iter()
        .zip(&w)
        .map(|(si, wi)| half * wi * si.powf(beta - 1.0))
        .collect();
    (s, wt)
}
