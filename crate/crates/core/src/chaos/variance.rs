//! The per-order covariance kernel `H~_{q,d}` and the chaotic variance terms.

use serde::Serialize;

use super::table::ChaosCoefficientTable;
use super::{hermite_fill, lambda_fourth_moment, LambdaCorrelations};
use crate::covariance::{kernel, limit_profile, CrossCovariance, DEFAULT_ALPHA};
use crate::numeric::{factorial, pairwise_sum, sphere_volume, GaussLegendre};
use crate::{Error, Result};

/// `H~_q` for the given cross covariances:
/// `sum_{|mu| = |mu'| = q} a_mu a_mu' E[H_mu(Z(s)) H_mu'(Z(t))]`.
///
/// The expectation factors over equations; within an equation it is the
/// diagram sum for `(Y, Y'_1)` times Mehler terms `beta_j! D^beta_j` for the
/// remaining derivative coordinates.
pub fn htilde_from_cross(q: u32, x: &CrossCovariance, table: &ChaosCoefficientTable) -> Result<f64> {
    table.check_order(q)?;
    if q % 2 == 1 {
        return Ok(0.0);
    }
    let (r, m) = (table.r(), table.m());
    let lam = LambdaCorrelations::from(x);
    let entries: Vec<_> = table.nonzero_of_order(q)?.collect();
    let mut terms = Vec::with_capacity(entries.len() * entries.len());
    for e in &entries {
        for f in &entries {
            let mut t = e.a * f.a;
            for l in 0..r {
                let (row, row_p) = (&e.beta[l * m..(l + 1) * m], &f.beta[l * m..(l + 1) * m]);
                if row[1..] != row_p[1..] {
                    t = 0.0;
                    break;
                }
                for &bj in &row[1..] {
                    t *= factorial(bj) * x.dy_dy_other.powi(bj as i32);
                }
                t *= lambda_fourth_moment(e.alpha[l], f.alpha[l], row[0], row_p[0], &lam);
            }
            terms.push(t);
        }
    }
    Ok(pairwise_sum(&terms))
}

/// `H~_{q,d}(x)` at inner product `x = <s, t>`. Exactly even in `x`.
pub fn htilde_qd(x: f64, q: u32, d: u32, table: &ChaosCoefficientTable) -> Result<f64> {
    htilde_from_cross(q, &CrossCovariance::at_inner(x, d)?, table)
}

/// The large-degree limit of `H~_{q,d}(cos(z / sqrt(d)))`.
pub fn htilde_limit(z: f64, q: u32, table: &ChaosCoefficientTable) -> Result<f64> {
    htilde_from_cross(q, &CrossCovariance::from_limit(&limit_profile(z)?), table)
}

/// `g_q(z) = sum_{|mu| = q} a_mu H_mu(z)` for `z = (y_1..y_r, y'_11..y'_rm)`.
pub fn g_q_eval(q: u32, z: &[f64], table: &ChaosCoefficientTable) -> Result<f64> {
    let n = table.r() * (1 + table.m());
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    let mut h: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (k, &x) in z.iter().enumerate() {
        hermite_fill(x, &mut h[k], q);
    }
    let r = table.r();
    Ok(table
        .nonzero_of_order(q)?
        .map(|e| {
            let pa: f64 = e.alpha.iter().enumerate().map(|(k, &p)| h[k][p as usize]).product();
            let pb: f64 = e.beta.iter().enumerate().map(|(k, &p)| h[r + k][p as usize]).product();
            e.a * pa * pb
        })
        .sum())
}

/// `||g_q||^2 = sum_{|mu| = q} a_mu^2 mu!`.
pub fn g_q_norm_squared(q: u32, table: &ChaosCoefficientTable) -> Result<f64> {
    Ok(table.nonzero_of_order(q)?.map(|e| e.a * e.a * e.mu_factorial).sum())
}

/// Panel quadrature in the scaled distance `z`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarianceQuadrature {
    /// Upper integration limit; beyond it only a tail bound is reported.
    pub z_max: f64,
    pub panel_width: f64,
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Decay rate used for the tail bound.
    pub alpha: f64,
}

impl Default for VarianceQuadrature {
    fn default() -> Self {
        VarianceQuadrature { z_max: 12.0, panel_width: 0.5, nodes: 24, alpha: DEFAULT_ALPHA }
    }
}

/// One variance term: finite degree (`d` set) or limit (`d` absent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosVarianceTerm {
    pub q: u32,
    pub d: Option<u32>,
    pub value: f64,
    /// Difference between the panel rule and one with half-width panels.
    pub quadrature_error: f64,
    /// Bound on the neglected integral beyond `z_max`.
    pub tail_bound: f64,
}

/// Both variance terms of one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosVarianceReport {
    pub q: u32,
    pub value_finite_d: f64,
    pub value_limit: f64,
    pub quadrature_error: f64,
}

/// Constant `K` with `|H~_q| <= K (1 + z^2)^q e^{-q alpha z^2}`: the Arcones
/// bound with `psi <= |A| + |B| + |C| <= 5/2 (1 + z^2) e^{-alpha z^2}`.
pub fn domination_constant(q: u32, table: &ChaosCoefficientTable) -> Result<f64> {
    Ok(2.5f64.powi(q as i32) * g_q_norm_squared(q, table)?)
}

fn panel_integral<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, width: f64, gl: &GaussLegendre) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let panels = ((b - a) / width).ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    let mut parts = Vec::with_capacity(panels * gl.len());
    for p in 0..panels {
        let lo = a + w * p as f64;
        for (x, wt) in gl.mapped(lo, lo + w) {
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::Integration(format!("non-finite integrand at z = {x}")));
            }
            parts.push(wt * v);
        }
    }
    Ok(pairwise_sum(&parts))
}

fn term<F: Fn(f64) -> Result<f64>>(
    q: u32,
    d: Option<u32>,
    upper: f64,
    f: F,
    table: &ChaosCoefficientTable,
    quad: &VarianceQuadrature,
) -> Result<ChaosVarianceTerm> {
    let gl = GaussLegendre::new(quad.nodes);
    let coarse = panel_integral(&f, 0.0, upper, quad.panel_width, &gl)?;
    let fine = panel_integral(&f, 0.0, upper, 0.5 * quad.panel_width, &gl)?;
    let m = table.m() as u32;
    let scale = 2.0 * sphere_volume(m) * sphere_volume(m - 1);
    let tail_bound = if upper < quad.z_max {
        0.0
    } else {
        let k = domination_constant(q, table)?;
        let qf = q as f64;
        let g = |z: f64| Ok(z.powi(m as i32 - 1) * k * (1.0 + z * z).powf(qf) * (-qf * quad.alpha * z * z).exp());
        scale * panel_integral(&g, upper, upper + 40.0, 1.0, &gl)?
    };
    Ok(ChaosVarianceTerm {
        q,
        d,
        value: scale * fine,
        quadrature_error: scale * (fine - coarse).abs(),
        tail_bound,
    })
}

/// The variance of the order-`q` part of the normalized volume at degree `d`:
/// `2 kappa_m kappa_{m-1} int_0^{sqrt(d) pi/2} d^{(m-1)/2} sin^{m-1}(z/sqrt(d)) H~_{q,d}(cos(z/sqrt(d))) dz`,
/// with the integral cut at `z_max`. Zero for odd `q` and for `q = 0`, whose
/// chaos is the constant mean.
pub fn chaos_variance_term(
    q: u32,
    d: u32,
    table: &ChaosCoefficientTable,
    quad: &VarianceQuadrature,
) -> Result<ChaosVarianceTerm> {
    table.check_order(q)?;
    if d < 2 {
        return Err(Error::InvalidInput("degree must exceed 1".into()));
    }
    if q % 2 == 1 || q == 0 {
        return Ok(ChaosVarianceTerm { q, d: Some(d), value: 0.0, quadrature_error: 0.0, tail_bound: 0.0 });
    }
    let sd = (d as f64).sqrt();
    let m = table.m() as i32;
    let upper = (sd * std::f64::consts::FRAC_PI_2).min(quad.z_max);
    let f = |z: f64| -> Result<f64> {
        let theta = z / sd;
        let (a, b, c, dd, _) = kernel(theta, d);
        let h = htilde_from_cross(q, &CrossCovariance::from_kernel(a, b, c, dd), table)?;
        Ok((sd * theta.sin()).powi(m - 1) * h)
    };
    term(q, Some(d), upper, f, table, quad)
}

/// The limit `V_q = 2 kappa_m kappa_{m-1} int_0^inf z^{m-1} H~_q(z) dz`, cut
/// at `z_max` with a reported tail bound.
pub fn chaos_variance_limit(q: u32, table: &ChaosCoefficientTable, quad: &VarianceQuadrature) -> Result<ChaosVarianceTerm> {
    table.check_order(q)?;
    if q % 2 == 1 || q == 0 {
        return Ok(ChaosVarianceTerm { q, d: None, value: 0.0, quadrature_error: 0.0, tail_bound: 0.0 });
    }
    let m = table.m() as i32;
    let f = |z: f64| -> Result<f64> {
        if z == 0.0 {
            return Err(Error::Integration("limit kernel evaluated on the diagonal".into()));
        }
        Ok(z.powi(m - 1) * htilde_limit(z, q, table)?)
    };
    term(q, None, quad.z_max, f, table, quad)
}

pub fn chaos_variance_report(
    q: u32,
    d: u32,
    table: &ChaosCoefficientTable,
    quad: &VarianceQuadrature,
) -> Result<ChaosVarianceReport> {
    let fin = chaos_variance_term(q, d, table, quad)?;
    let lim = chaos_variance_limit(q, table, quad)?;
    Ok(ChaosVarianceReport {
        q,
        value_finite_d: fin.value,
        value_limit: lim.value,
        quadrature_error: fin.quadrature_error.max(lim.quadrature_error),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::table::{f_norm_squared, FBetaMethod};
    use crate::covariance::{arcones_psi, arcones_psi_full, joint_matrix};
    use approx::assert_relative_eq;
    use nalgebra::{Cholesky, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn table() -> ChaosCoefficientTable {
        ChaosCoefficientTable::build(1, 2, 8, FBetaMethod::Auto).unwrap()
    }

    #[test]
    fn order_zero_is_squared_constant() {
        let t = table();
        let a0 = t.entries()[0].a;
        for x in [-0.9, -0.1, 0.0, 0.4, 1.0] {
            assert_relative_eq!(htilde_qd(x, 0, 10, &t).unwrap(), a0 * a0, max_relative = 1e-14);
        }
        assert!((a0 * a0 - 0.24998).abs() < 1e-4);
        assert_eq!(htilde_qd(0.3, 3, 10, &t).unwrap(), 0.0);
        assert!(htilde_qd(0.3, 10, 10, &t).is_err());
    }

    #[test]
    fn exactly_even() {
        let t = table();
        for q in [2, 4, 6, 8] {
            for d in [3, 4, 9, 20] {
                for x in [0.05, 0.3, 0.77, 0.999] {
                    assert_eq!(htilde_qd(x, q, d, &t).unwrap(), htilde_qd(-x, q, d, &t).unwrap());
                }
            }
        }
    }

    #[test]
    fn diagonal_value_is_chaos_norm() {
        let t = table();
        for q in [2, 4, 6] {
            assert_relative_eq!(htilde_qd(1.0, q, 7, &t).unwrap(), g_q_norm_squared(q, &t).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn norm_bounds() {
        let t = table();
        let total = f_norm_squared(1, 2);
        let mut cum = 0.0;
        for q in 0..=8 {
            let n = g_q_norm_squared(q, &t).unwrap();
            assert!(n <= total);
            cum += n;
        }
        assert!(cum <= total);
    }

    #[test]
    fn g_q_properties() {
        let t = table();
        let a0 = t.entries()[0].a;
        assert_relative_eq!(g_q_eval(0, &[0.3, -1.0, 2.0], &t).unwrap(), a0);
        assert!(g_q_eval(2, &[0.3, 1.0], &t).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 200_000;
        for q in [2, 4] {
            let vals: Vec<f64> = (0..n)
                .map(|_| {
                    let z: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
                    g_q_eval(q, &z, &t).unwrap()
                })
                .collect();
            let (mean, var) = crate::numeric::mean_and_variance(&vals);
            let se = (var / n as f64).sqrt();
            assert!(mean.abs() < 3.5 * se, "q = {q}: {mean} ({se})");
            // second moment matches the norm
            let want = g_q_norm_squared(q, &t).unwrap();
            assert!((var - want).abs() < 0.05 * want, "q = {q}: {var} vs {want}");
        }
    }

    #[test]
    fn brute_force_kernel() {
        // Sample (Z(s), Z(t)) from the joint covariance and average g_2 g_2.
        let t = table();
        let (theta, d) = (0.7, 6);
        let j = joint_matrix(theta, d, 2).unwrap();
        let chol = Cholesky::new(j.entries().clone()).unwrap();
        let l = chol.l();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 400_000;
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let e = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &l * e;
            let zs = [x[0], x[2], x[3]];
            let zt = [x[1], x[4], x[5]];
            vals.push(g_q_eval(2, &zs, &t).unwrap() * g_q_eval(2, &zt, &t).unwrap());
        }
        let (mean, var) = crate::numeric::mean_and_variance(&vals);
        let se = (var / n as f64).sqrt();
        let want = htilde_qd(theta.cos(), 2, d, &t).unwrap();
        assert!((mean - want).abs() < 3.5 * se, "{mean} vs {want} ({se})");
    }

    #[test]
    fn arcones_bound_on_random_angles() {
        let t = table();
        let norm = f_norm_squared(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 200 {
            let d = rng.random_range(3..200u32);
            let theta = rng.random_range(0.01..std::f64::consts::FRAC_PI_2);
            let psi = arcones_psi_full(theta, d).unwrap();
            if psi >= 1.0 {
                continue;
            }
            checked += 1;
            for q in [2, 4] {
                let h = htilde_qd(theta.cos(), q, d, &t).unwrap();
                let gq = g_q_norm_squared(q, &t).unwrap();
                assert!(h.abs() <= psi.powi(q as i32) * gq * (1.0 + 1e-9), "d = {d}, theta = {theta}, q = {q}");
                assert!(gq <= norm);
            }
        }
    }

    #[test]
    fn short_psi_misses_the_derivative_row() {
        // Past z ~ sqrt(2), |B| > |C| and |C| + |A| is no longer the largest row sum.
        let (d, theta) = (143u32, 1.28f64);
        assert!(arcones_psi_full(theta, d).unwrap() > 10.0 * arcones_psi(theta, d).unwrap());
        let h = htilde_qd(theta.cos(), 2, d, &table()).unwrap();
        assert!(h.abs() > arcones_psi(theta, d).unwrap().powi(2) * f_norm_squared(1, 2));
    }

    #[test]
    fn domination_on_grid() {
        let t = table();
        for q in [2, 4, 6, 8] {
            let k = domination_constant(q, &t).unwrap();
            for d in [10u32, 100, 1000] {
                let zmax = (d as f64).sqrt() * std::f64::consts::FRAC_PI_2;
                for i in 1..200 {
                    let z = zmax * i as f64 / 200.0;
                    let h = htilde_qd((z / (d as f64).sqrt()).cos(), q, d, &t).unwrap();
                    let bound = k * (1.0 + z * z).powi(q as i32) * (-(q as f64) * DEFAULT_ALPHA * z * z).exp();
                    assert!(h.abs() <= bound, "q = {q}, d = {d}, z = {z}: {h} > {bound}");
                }
            }
        }
    }

    #[test]
    fn variance_terms() {
        let t = table();
        let quad = VarianceQuadrature::default();
        assert_eq!(chaos_variance_term(3, 50, &t, &quad).unwrap().value, 0.0);
        assert_eq!(chaos_variance_limit(0, &t, &quad).unwrap().value, 0.0);
        let a = chaos_variance_term(2, 1000, &t, &quad).unwrap();
        let b = chaos_variance_term(2, 10_000, &t, &quad).unwrap();
        let l = chaos_variance_limit(2, &t, &quad).unwrap();
        assert!(((a.value - b.value) / b.value).abs() < 0.02, "{a:?} {b:?}");
        assert!(((b.value - l.value) / l.value).abs() < 0.01, "{b:?} {l:?}");
        for q in (2..=8).step_by(2) {
            let v = chaos_variance_limit(q, &t, &quad).unwrap();
            assert!(v.value >= -1e-9, "{v:?}");
            assert!(v.tail_bound < 1e-6);
        }
    }
}
