//! Wiener chaos machinery for the zero-set volume.
//!
//! The volume functional `delta_0(y) f(y')` with `f(y') = sqrt(det(y' y'^T))`
//! is expanded in products of probabilists' Hermite polynomials:
//! `a_mu = b_alpha f_beta` against `H_mu(z) = prod H_{alpha_l}(y_l) prod H_{beta_lj}(y'_lj)`.
//! The per-order covariance kernel `H~_{q,d}` and the variance terms built
//! from it live in [`variance`]; the coefficient table in [`table`].

pub mod table;
pub mod variance;

pub use table::{f_beta, f_norm_squared, ChaosCoefficientTable, ChaosEntry, FBetaMethod};
pub use variance::{
    chaos_variance_limit, chaos_variance_report, chaos_variance_term, g_q_eval, g_q_norm_squared, htilde_from_cross,
    htilde_limit, htilde_qd, ChaosVarianceReport, ChaosVarianceTerm, VarianceQuadrature,
};

use crate::covariance::CrossCovariance;
use crate::numeric::factorial;

/// Probabilists' Hermite polynomial `H_n(x)` via `H_{n+1} = x H_n - n H_{n-1}`.
pub fn hermite(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_0(x), .., H_n(x)`.
pub fn hermite_all(n: u32, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    hermite_fill(x, &mut out, n);
    out
}

pub(crate) fn hermite_fill(x: f64, out: &mut Vec<f64>, n: u32) {
    out.clear();
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n as usize {
        let v = x * out[k] - k as f64 * out[k - 1];
        out.push(v);
    }
}

/// Monomial coefficients of `H_n`: `H_n(x) = sum_k c[k] x^k`.
pub fn hermite_coefficients(n: u32) -> Vec<f64> {
    let mut prev = vec![0.0; n as usize + 1];
    let mut cur = vec![0.0; n as usize + 1];
    cur[0] = 1.0;
    for k in 0..n as usize {
        let mut next = vec![0.0; n as usize + 1];
        for i in 0..=k {
            next[i + 1] += cur[i];
            next[i] -= k as f64 * prev[i];
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// `E[H_k(Z) H_l(W)]` for standard normals with correlation `corr`:
/// `delta_{kl} corr^k k!`.
pub fn mehler_moment(k: u32, l: u32, corr: f64) -> f64 {
    if k != l {
        return 0.0;
    }
    corr.powi(k as i32) * factorial(k)
}

/// The four cross correlations entering [`lambda_fourth_moment`], between
/// `(Y(s), Y'_1(s))` and `(Y(t), Y'_1(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaCorrelations {
    /// `E[Y(s) Y(t)]`
    pub rho: f64,
    /// `E[Y(s) Y'_1(t)]`
    pub rho_prime_st: f64,
    /// `E[Y'_1(s) Y(t)]`
    pub rho_prime_ts: f64,
    /// `E[Y'_1(s) Y'_1(t)]`
    pub rho_pp: f64,
}

impl LambdaCorrelations {
    /// Both cross terms equal to `rho_prime`.
    pub fn symmetric(rho: f64, rho_prime: f64, rho_pp: f64) -> Self {
        LambdaCorrelations { rho, rho_prime_st: rho_prime, rho_prime_ts: rho_prime, rho_pp }
    }
}

impl From<&CrossCovariance> for LambdaCorrelations {
    fn from(x: &CrossCovariance) -> Self {
        LambdaCorrelations {
            rho: x.y_y,
            rho_prime_st: x.y_s_dy_t,
            rho_prime_ts: x.dy_s_y_t,
            rho_pp: x.dy_dy_first,
        }
    }
}

/// `E[H_a(Y(s)) H_b(Y'_1(s)) H_a'(Y(t)) H_b'(Y'_1(t))]`, where each point's
/// pair is standard and independent, by the diagram sum over
/// `d1 + d2 = a, d3 + d4 = b, d1 + d3 = a', d2 + d4 = b'`:
/// `sum a! b! a'! b'! / (d1! d2! d3! d4!) rho^d1 rho'_st^d2 rho'_ts^d3 rho''^d4`.
pub fn lambda_fourth_moment(a: u32, a_p: u32, b: u32, b_p: u32, c: &LambdaCorrelations) -> f64 {
    if a + b != a_p + b_p {
        return 0.0;
    }
    let scale = factorial(a) * factorial(b) * factorial(a_p) * factorial(b_p);
    let mut acc = 0.0;
    for d1 in 0..=a.min(a_p) {
        let d2 = a - d1;
        let d3 = a_p - d1;
        if d3 > b || d2 > b_p {
            continue;
        }
        let d4 = b - d3;
        debug_assert_eq!(d2 + d4, b_p);
        let denom = factorial(d1) * factorial(d2) * factorial(d3) * factorial(d4);
        acc += c.rho.powi(d1 as i32)
            * c.rho_prime_st.powi(d2 as i32)
            * c.rho_prime_ts.powi(d3 as i32)
            * c.rho_pp.powi(d4 as i32)
            / denom;
    }
    scale * acc
}

/// Coefficient of the Dirac delta at zero in the Hermite basis:
/// `prod_j H_{alpha_j}(0) phi(0) / alpha_j!`, which is
/// `(2 pi)^{-1/2} (-1/2)^{n} / n!` for `alpha_j = 2n` and zero for odd `alpha_j`.
pub fn b_alpha(alpha: &[u32]) -> f64 {
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    alpha.iter().fold(1.0, |acc, &a| {
        if a % 2 == 1 {
            0.0
        } else {
            let n = a / 2;
            acc * inv_sqrt_2pi * (-0.5f64).powi(n as i32) / factorial(n)
        }
    })
}

/// All exponent vectors of length `len` with total at most `q_max`, grouped
/// by increasing total and in descending lexicographic order within a total.
pub fn multi_indices_up_to(len: usize, q_max: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for q in 0..=q_max {
        let mut cur = vec![0u32; len];
        fill(&mut out, &mut cur, 0, q);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, k: usize, rest: u32) {
    if cur.is_empty() {
        if rest == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if k + 1 == cur.len() {
        cur[k] = rest;
        out.push(cur.clone());
        return;
    }
    for j in (0..=rest).rev() {
        cur[k] = j;
        fill(out, cur, k + 1, rest - j);
    }
}
