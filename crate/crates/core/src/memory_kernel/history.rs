use super::{KernelError, KernelSoe};

/// Fast evaluation of `∫_0^{t_{n+1}} Q(t_{n+1} − s) u(s) ds` for a
/// piecewise-constant vector history on a uniform grid.
///
/// The newest interval `[t_n, t_{n+1}]` is integrated exactly (weight κ₀);
/// older intervals go through the SOE modes, each carried by the recurrence
/// `S ← e^{-λτ} (S + u·(1 − e^{-λτ})/λ)`.
#[derive(Clone, Debug)]
pub struct HistoryState {
    weights: Vec<f64>,
    decay: Vec<f64>,
    gain: Vec<f64>,
    kappa0: f64,
    tau: f64,
    dim: usize,
    modes: Vec<Vec<f64>>,
    steps: usize,
}

impl HistoryState {
    pub fn new(soe: &KernelSoe, tau: f64, dim: usize) -> Result<Self, KernelError> {
        if !(tau > 0.0) {
            return Err(KernelError::InvalidParameter {
                name: "tau",
                value: tau,
                reason: "must be positive",
            });
        }
        if tau < soe.tau_min() * (1.0 - 1e-12) {
            return Err(KernelError::StepBelowResolution {
                tau,
                tau_min: soe.tau_min(),
            });
        }
        let decay = soe.rates().iter().map(|l| (-l * tau).exp()).collect();
        let gain = soe.rates().iter().map(|l| -(-l * tau).exp_m1() / l).collect();
        Ok(Self {
            weights: soe.weights().to_vec(),
            decay,
            gain,
            kappa0: soe.kernel().moment(0.0, tau)?,
            tau,
            dim,
            modes: vec![vec![0.0; dim]; soe.n_modes()],
            steps: 0,
        })
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    /// History part only: `Σ_i w_i S_i`.
    pub fn tail(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (w, s) in self.weights.iter().zip(&self.modes) {
            for (o, x) in out.iter_mut().zip(s) {
                *o += w * x;
            }
        }
        out
    }

    /// `κ₀ u_n + Σ_i w_i S_i`, the convolution at `t_{n+1}` given the newest sample `u_n`.
    pub fn eval(&self, u_n: &[f64]) -> Result<Vec<f64>, KernelError> {
        self.check(u_n)?;
        let mut out = self.tail();
        for (o, u) in out.iter_mut().zip(u_n) {
            *o += self.kappa0 * u;
        }
        Ok(out)
    }

    /// Pushes `u_n` into the history (call after `eval(u_n)` has been used).
    pub fn advance(&mut self, u_n: &[f64]) -> Result<(), KernelError> {
        self.check(u_n)?;
        for ((s, &e), &g) in self.modes.iter_mut().zip(&self.decay).zip(&self.gain) {
            for (si, &u) in s.iter_mut().zip(u_n) {
                *si = e * (*si + g * u);
            }
        }
        self.steps += 1;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    fn check(&self, u: &[f64]) -> Result<(), KernelError> {
        if u.len() != self.dim {
            return Err(KernelError::Dimension {
                expected: self.dim,
                got: u.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_soe, convolve_direct_vec, TemperedKernel};
    use super::*;

    #[test]
    fn zero_input_stays_zero() {
        let k = TemperedKernel::new(0.5, 10.0, 1.0).unwrap();
        let soe = build_soe(&k, 1e-3, 1.0, 1e-8).unwrap();
        let mut h = HistoryState::new(&soe, 1e-3, 3).unwrap();
        for _ in 0..50 {
            assert_eq!(h.eval(&[0.0; 3]).unwrap(), vec![0.0; 3]);
            h.advance(&[0.0; 3]).unwrap();
        }
    }

    #[test]
    fn single_mode_is_exact() {
        let k = TemperedKernel::new(0.0, 10.0, 1.0).unwrap();
        let tau = 1e-3;
        let soe = build_soe(&k, tau, 1.0, 1e-8).unwrap();
        let mut h = HistoryState::new(&soe, tau, 2).unwrap();
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for n in 0..400 {
            let t = n as f64 * tau;
            let u = vec![(3.0 * t).sin() + 1.0, (-t).exp()];
            samples.push(u.clone());
            let fast = h.eval(&u).unwrap();
            let direct = convolve_direct_vec(&k, &samples, tau).unwrap();
            for c in 0..2 {
                assert!((fast[c] - direct[c]).abs() <= 1e-13 * direct[c].abs(), "n={n}");
            }
            h.advance(&u).unwrap();
        }
    }

    #[test]
    fn dimension_and_step_checks() {
        let k = TemperedKernel::new(0.5, 10.0, 1.0).unwrap();
        let soe = build_soe(&k, 1e-3, 1.0, 1e-8).unwrap();
        assert!(HistoryState::new(&soe, 1e-4, 2).is_err());
        let mut h = HistoryState::new(&soe, 1e-3, 2).unwrap();
        assert!(h.eval(&[1.0]).is_err());
        assert!(h.advance(&[1.0, 2.0, 3.0]).is_err());
    }
}
