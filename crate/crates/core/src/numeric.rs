//! Quadrature rules, reproducible summation and small special-function helpers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// An `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = ((4 * i + 3) as f64 * PI / (4.0 * nf + 2.0)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let terms: Vec<f64> = self.mapped(a, b).map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }

    /// Composite rule over equal panels of `[a, b]`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        let parts: Vec<f64> = (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                let hi = if p + 1 == panels { b } else { lo + h };
                self.integrate(lo, hi, &mut f)
            })
            .collect();
        pairwise_sum(&parts)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// An `n`-point Gauss-Hermite rule for the standard normal measure:
/// `sum w_i f(x_i) ~ E f(G)`, `G ~ N(0, 1)`. Weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
    /// recurrence `x He_n = He_{n+1} + n He_{n-1}`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // The rule is symmetric; enforce it so odd moments vanish exactly.
        let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            (nodes[i], nodes[j]) = (-x, x);
            (weights[i], weights[j]) = (w, w);
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        GaussHermite { nodes, weights }
    }
}

/// Pairwise (cascade) summation in fixed index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and unbiased variance, summed pairwise.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, pairwise_sum(&sq) / (n - 1) as f64)
}

/// `ln Gamma(x)` (Lanczos approximation).
pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}

/// Volume of the unit sphere `S^m` in `R^{m+1}`: `2 pi^{(m+1)/2} / Gamma((m+1)/2)`.
pub fn sphere_volume(m: u32) -> f64 {
    let h = 0.5 * (m as f64 + 1.0);
    2.0 * (h * PI.ln() - lgamma(h)).exp()
}

/// `E ||G||^p` for `G ~ N(0, I_k)`: `2^{p/2} Gamma((k+p)/2) / Gamma(k/2)`.
pub fn chi_moment(k: u32, p: f64) -> f64 {
    let k = k as f64;
    (0.5 * p * std::f64::consts::LN_2 + lgamma(0.5 * (k + p)) - lgamma(0.5 * k)).exp()
}

/// Table of `ln n!` for `n = 0..=max`, by cumulative sums of `ln k`.
pub fn ln_factorials(max: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    t.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        t.push(acc);
    }
    t
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `(n - 1)!!` for even `n`, i.e. `E G^n` for standard normal `G`; zero for odd `n`.
pub fn gaussian_moment(n: u32) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    (1..n).step_by(2).fold(1.0, |acc, k| acc * k as f64)
}

/// Binomial coefficient with overflow detection.
pub fn checked_binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n.checked_sub(k)?);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    u64::try_from(acc).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        // degree 15 is the limit for 8 nodes
        let v = gl.integrate(-1.0, 1.0, |x| x.powi(14));
        assert_relative_eq!(v, 2.0 / 15.0, max_relative = 1e-14);
        let w: f64 = gl.weights.iter().sum();
        assert_relative_eq!(w, 2.0, max_relative = 1e-14);
        let v = gl.integrate(0.0, PI, f64::sin);
        assert_relative_eq!(v, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn large_legendre_rule() {
        let gl = GaussLegendre::new(256);
        let w: f64 = gl.weights.iter().sum();
        assert_relative_eq!(w, 2.0, max_relative = 1e-13);
        let v = gl.integrate(0.0, 1.0, |x| (10.0 * x).exp());
        assert_relative_eq!(v, ((10.0f64).exp() - 1.0) / 10.0, max_relative = 1e-13);
    }

    #[test]
    fn hermite_rule_moments() {
        let gh = GaussHermite::new(20);
        for p in 0..20u32 {
            let v: f64 = gh
                .nodes
                .iter()
                .zip(&gh.weights)
                .map(|(x, w)| w * x.powi(p as i32))
                .sum();
            let scale: f64 = gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x.abs().powi(p as i32)).sum();
            assert!((v - gaussian_moment(p)).abs() <= 1e-12 * scale, "p = {p}: {v}");
        }
    }

    #[test]
    fn sphere_volumes() {
        assert_relative_eq!(sphere_volume(0), 2.0, max_relative = 1e-13);
        assert_relative_eq!(sphere_volume(1), 2.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(sphere_volume(2), 4.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(sphere_volume(3), 2.0 * PI * PI, max_relative = 1e-13);
    }

    #[test]
    fn chi_mean_in_two_dimensions() {
        assert_relative_eq!(chi_moment(2, 1.0), (PI / 2.0).sqrt(), max_relative = 1e-13);
        assert_relative_eq!(chi_moment(3, 2.0), 3.0, max_relative = 1e-13);
    }

    #[test]
    fn binomials() {
        assert_eq!(checked_binomial(102, 2), Some(5151));
        assert_eq!(checked_binomial(5, 2), Some(10));
        assert_eq!(checked_binomial(10_000, 5000), None);
    }
}
