//! Quadrature rules: a symmetric degree-6 triangle rule, Gauss-Legendre on
//! intervals, and Gauss-Jacobi via the Golub-Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Quadrature on the reference triangle with barycentric points; weights
/// sum to the reference area 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Dunavant's 12-point rule, exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        const ORBITS3: [(f64, f64, f64); 2] = [
            (
                0.501426509658179157728,
                0.249286745170910421136,
                0.116786275726379366030,
            ),
            (
                0.873821971016995543320,
                0.063089014491502228340,
                0.050844906370206816921,
            ),
        ];
        const ORBIT6: (f64, f64, f64, f64) = (
            0.053145049844816947353,
            0.310352451033784405417,
            0.636502499121398647230,
            0.082851075618373575194,
        );
        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        for &(a, b, w) in &ORBITS3 {
            for p in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        let (a, b, c, w) = ORBIT6;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            points.push(p);
            weights.push(0.5 * w);
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss rule on `[0, 1]` for the weight `s^{b}` (b > -1), from the Jacobi
/// recurrence with parameters (0, b) mapped from `[-1, 1]`.
pub fn gauss_jacobi_unit(n: usize, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && b > -1.0);
    let a = 0.0;
    let ab = a + b;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for (k, d) in diag.iter_mut().enumerate() {
        let kf = k as f64;
        let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        *d = if denom.abs() < 1e-300 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / denom
        };
    }
    for (k, o) in off.iter_mut().enumerate() {
        let kf = (k + 1) as f64;
        let s = 2.0 * kf + ab;
        let beta = if k == 0 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        *o = beta.sqrt();
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = diag[k];
        if k + 1 < n {
            jac[(k, k + 1)] = off[k];
            jac[(k + 1, k)] = off[k];
        }
    }
    let eig = SymmetricEigen::new(jac);
    // Total mass of (1-x)^a (1+x)^b on [-1, 1].
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ab + 2.0)).exp();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    // x in [-1, 1] with weight (1+x)^b  ->  s = (1+x)/2 with weight s^b:
    // (1+x)^b dx = 2^{b+1} s^b ds.
    let scale = 2f64.powf(-(b + 1.0));
    let nodes = pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect();
    let weights = pairs.iter().map(|p| p.1 * scale).collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_weights_sum_to_half() {
        let r = TriangleRule::degree6();
        assert_eq!(r.len(), 12);
        assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        assert!(r.weights.iter().all(|&w| w > 0.0));
        for p in &r.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_rule_exact_to_degree_six() {
        // ∫_T x^i y^j = i! j! / (i + j + 2)! on the unit reference triangle.
        let r = TriangleRule::degree6();
        for i in 0..=6u32 {
            for j in 0..=(6 - i) {
                let q: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(p, w)| w * p[1].powi(i as i32) * p[2].powi(j as i32))
                    .sum();
                let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                assert!((q - exact).abs() < 1e-15, "x^{i} y^{j}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for d in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn jacobi_integrates_weighted_polynomials() {
        for &b in &[-0.5, -0.25, 0.0, -0.9] {
            let n = 8;
            let (s, w) = gauss_jacobi_unit(n, b);
            for d in 0..(2 * n) {
                let q: f64 = s.iter().zip(&w).map(|(s, w)| w * s.powi(d as i32)).sum();
                let exact = 1.0 / (d as f64 + b + 1.0);
                assert!(
                    (q - exact).abs() < 1e-12 * exact.max(1.0),
                    "b={b} d={d}: {q} vs {exact}"
                );
            }
        }
    }
}
