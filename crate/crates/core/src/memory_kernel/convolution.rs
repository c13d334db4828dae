use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{KernelError, TemperedKernel};

/// Exact product-integration weights `ω_k = ∫_{kτ}^{(k+1)τ} Q`, k = 0, 1, ...
#[derive(Clone, Debug)]
pub struct LagWeights {
    tau: f64,
    weights: Vec<f64>,
}

impl LagWeights {
    pub fn new(kernel: &TemperedKernel, tau: f64, count: usize) -> Result<Self, KernelError> {
        Self::for_moment(tau, count, |a, b| kernel.moment(a, b))
    }

    pub(crate) fn for_moment(
        tau: f64,
        count: usize,
        moment: impl Fn(f64, f64) -> Result<f64, KernelError>,
    ) -> Result<Self, KernelError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(KernelError::InvalidParameter {
                name: "tau",
                value: tau,
                reason: "must be positive",
            });
        }
        let weights = (0..count)
            .map(|k| moment(k as f64 * tau, (k + 1) as f64 * tau))
            .collect::<Result<_, _>>()?;
        Ok(Self { tau, weights })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ_j u^j ω_{n−j}` for samples `u^0..u^n`.
    pub fn apply(&self, samples: &[f64]) -> Result<f64, KernelError> {
        let n = samples.len();
        if n > self.weights.len() {
            return Err(KernelError::Dimension {
                expected: self.weights.len(),
                got: n,
            });
        }
        Ok(samples
            .iter()
            .enumerate()
            .map(|(j, u)| u * self.weights[n - 1 - j])
            .sum())
    }
}

/// `∫_0^{t_{n+1}} Q(t_{n+1} − s) u(s) ds` with `u = u^j` on `[t_j, t_{j+1})`,
/// integrated exactly against the kernel.
pub fn convolve_direct(kernel: &TemperedKernel, samples: &[f64], tau: f64) -> Result<f64, KernelError> {
    LagWeights::new(kernel, tau, samples.len())?.apply(samples)
}

/// Vector-valued [`convolve_direct`]; all samples must share one length.
pub fn convolve_direct_vec(kernel: &TemperedKernel, samples: &[Vec<f64>], tau: f64) -> Result<Vec<f64>, KernelError> {
    let n = samples.len();
    let dim = samples.first().map_or(0, Vec::len);
    let w = LagWeights::new(kernel, tau, n)?;
    let mut out = vec![0.0; dim];
    for (j, u) in samples.iter().enumerate() {
        if u.len() != dim {
            return Err(KernelError::Dimension {
                expected: dim,
                got: u.len(),
            });
        }
        let wj = w.as_slice()[n - 1 - j];
        for (o, x) in out.iter_mut().zip(u) {
            *o += wj * x;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityReport {
    pub trials: usize,
    /// Smallest quadratic-form value observed.
    pub min_value: f64,
    /// Smallest value of `form / ‖φ‖²` (‖φ‖ the L² norm of the step function).
    pub min_normalized: f64,
    pub passed: bool,
}

/// Checks `Σ_k φ^k (Q * φ)(t_{k+1}) τ ≥ −1e-10 ‖φ‖²` for `trials` random
/// step functions with `n` steps, values uniform in `[−1, 1]`.
pub fn positivity_check(
    kernel: &TemperedKernel,
    tau: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<PositivityReport, KernelError> {
    if n == 0 {
        return Err(KernelError::Dimension { expected: 1, got: 0 });
    }
    let w = LagWeights::new(kernel, tau, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut min_normalized = f64::INFINITY;
    let mut passed = true;
    let mut phi = vec![0.0; n];
    for _ in 0..trials {
        phi.iter_mut().for_each(|p| *p = rng.random_range(-1.0..=1.0));
        let form = quadratic_form(w.as_slice(), &phi, tau);
        let norm2 = phi.iter().map(|p| p * p).sum::<f64>() * tau;
        min_value = min_value.min(form);
        if norm2 > 0.0 {
            min_normalized = min_normalized.min(form / norm2);
        }
        if form < -1e-10 * norm2 {
            passed = false;
        }
    }
    Ok(PositivityReport {
        trials,
        min_value,
        min_normalized,
        passed,
    })
}

pub(crate) fn quadratic_form(weights: &[f64], phi: &[f64], tau: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..phi.len() {
        let conv: f64 = (0..=k).map(|j| phi[j] * weights[k - j]).sum();
        total += phi[k] * conv;
    }
    total * tau
}
