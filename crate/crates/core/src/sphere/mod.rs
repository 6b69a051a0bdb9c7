//! Points, angles, tangent frames and integral identities on `S^m`.

mod mesh;

pub use mesh::{icosphere, SphericalMesh, MAX_ICOSPHERE_LEVEL};
pub(crate) use mesh::arc_length;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::numeric::{pairwise_sum, sphere_volume, GaussLegendre};
use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-12;
const INNER_CLAMP_TOL: f64 = 1e-9;

/// A unit vector in `R^{m+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    /// Wraps `coords` after checking the norm is one within `1e-12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidInput("a sphere point needs at least two coordinates".into()));
        }
        let n = norm(&coords);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidInput(format!("point is not unit-norm (|x| = {n})")));
        }
        Ok(SpherePoint(coords))
    }

    /// Normalizes a nonzero vector onto the sphere.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero or non-finite vector".into()));
        }
        coords.iter_mut().for_each(|c| *c /= n);
        Ok(SpherePoint(coords))
    }

    /// The `k`-th standard basis vector of `R^{m+1}`.
    pub fn basis(m: usize, k: usize) -> Self {
        let mut c = vec![0.0; m + 1];
        c[k] = 1.0;
        SpherePoint(c)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Dimension `m` of the sphere the point lives on.
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn antipode(&self) -> Self {
        SpherePoint(self.0.iter().map(|x| -x).collect())
    }
}

/// Hyperspherical angles `(theta_1, .., theta_m)`: the first `m - 1` in
/// `[0, pi)` (`pi` itself is accepted) and the last in `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperAngles(Vec<f64>);

impl HyperAngles {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        let m = theta.len();
        if m == 0 {
            return Err(Error::InvalidInput("need at least one angle".into()));
        }
        for (i, &t) in theta.iter().enumerate() {
            let hi = if i + 1 == m { 2.0 * PI } else { PI };
            if !(0.0..=hi).contains(&t) {
                return Err(Error::Domain(format!("angle {i} = {t} outside [0, {hi}]")));
            }
        }
        Ok(HyperAngles(theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The point with hyperspherical angles `theta` on `S^m`:
/// `x_k = prod_{j<k} sin(theta_j) cos(theta_k)` for `k <= m`, and
/// `x_{m+1} = prod_j sin(theta_j)`.
pub fn hypersph_to_cart(theta: &HyperAngles, m: usize) -> Result<SpherePoint> {
    let th = theta.as_slice();
    if th.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: th.len() });
    }
    let mut x = Vec::with_capacity(m + 1);
    let mut sin_prod = 1.0;
    for &t in th {
        x.push(sin_prod * t.cos());
        sin_prod *= t.sin();
    }
    x.push(sin_prod);
    Ok(SpherePoint(x))
}

/// Clamped inner product of two unit vectors; drift beyond `1e-9` is an error.
pub fn unit_inner(s: &SpherePoint, t: &SpherePoint) -> Result<f64> {
    if s.0.len() != t.0.len() {
        return Err(Error::DimensionMismatch { expected: s.0.len(), got: t.0.len() });
    }
    let x = dot(&s.0, &t.0);
    if !x.is_finite() || x.abs() > 1.0 + INNER_CLAMP_TOL {
        return Err(Error::InvalidInput(format!("inner product {x} outside [-1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Geodesic distance `arccos <s, t>` in `[0, pi]`.
///
/// Near `0` and `pi` the chord length is used instead of `arccos`, which
/// loses half the significant digits there.
pub fn geodesic_dist(s: &SpherePoint, t: &SpherePoint) -> Result<f64> {
    let x = unit_inner(s, t)?;
    if x.abs() < 0.9 {
        return Ok(x.acos());
    }
    let sign = if x > 0.0 { -1.0 } else { 1.0 };
    let chord: f64 = s.0.iter().zip(&t.0).map(|(a, b)| (a + sign * b).powi(2)).sum::<f64>().sqrt();
    let half = 2.0 * (0.5 * chord).min(1.0).asin();
    Ok(if x > 0.0 { half } else { PI - half })
}

/// Quadrature settings for [`pair_integral_reduce`].
#[derive(Debug, Clone, Copy)]
pub struct PairQuadrature {
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Relative change between refinements that counts as converged.
    pub rel_tol: f64,
    /// Maximum number of panels per half interval.
    pub max_panels: usize,
}

impl Default for PairQuadrature {
    fn default() -> Self {
        PairQuadrature { nodes: 256, rel_tol: 1e-8, max_panels: 64 }
    }
}

/// `int_{S^m x S^m} h(<s, t>) ds dt`, reduced to
/// `kappa_m kappa_{m-1} int_0^pi sin^{m-1}(theta) h(cos theta) d theta`.
///
/// The interval is split at `pi / 2`; the panel count doubles until two
/// successive estimates agree to `rel_tol`.
pub fn pair_integral_reduce<H: Fn(f64) -> f64>(h: H, m: u32, quad: PairQuadrature) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("pair integral needs m >= 1".into()));
    }
    let gl = GaussLegendre::new(quad.nodes);
    let integrand = |theta: f64| -> Result<f64> {
        let v = theta.sin().powi(m as i32 - 1) * h(theta.cos());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Integration(format!("non-finite integrand at theta = {theta}")))
        }
    };
    let estimate = |panels: usize| -> Result<f64> {
        let mut parts = Vec::with_capacity(2 * panels * quad.nodes);
        for (a, b) in [(0.0, 0.5 * PI), (0.5 * PI, PI)] {
            let w = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + w * p as f64;
                for (x, wt) in gl.mapped(lo, lo + w) {
                    parts.push(wt * integrand(x)?);
                }
            }
        }
        Ok(pairwise_sum(&parts))
    };
    let scale = sphere_volume(m) * sphere_volume(m - 1);
    let mut panels = 1;
    let mut prev = estimate(panels)?;
    loop {
        panels *= 2;
        let next = estimate(panels)?;
        let denom = next.abs().max(prev.abs()).max(f64::MIN_POSITIVE);
        if (next - prev).abs() <= quad.rel_tol * denom || (next - prev).abs() < 1e-300 {
            return Ok(scale * next);
        }
        if panels >= quad.max_panels {
            return Err(Error::Integration(format!(
                "pair integral did not converge: {prev} vs {next} with {panels} panels"
            )));
        }
        prev = next;
    }
}

/// An orthonormal basis of the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    base: SpherePoint,
    basis: Vec<Vec<f64>>,
}

impl TangentFrame {
    /// A caller-supplied frame; checked for orthonormality and tangency to `1e-10`.
    pub fn new(base: SpherePoint, basis: Vec<Vec<f64>>) -> Result<Self> {
        let m = base.dim();
        if basis.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: basis.len() });
        }
        for (i, b) in basis.iter().enumerate() {
            if b.len() != m + 1 {
                return Err(Error::DimensionMismatch { expected: m + 1, got: b.len() });
            }
            if dot(b, base.coords()).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!("basis vector {i} is not tangent")));
            }
            for (j, c) in basis.iter().enumerate().take(i + 1) {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(b, c) - want).abs() > 1e-10 {
                    return Err(Error::InvalidInput("tangent basis is not orthonormal".into()));
                }
            }
        }
        Ok(TangentFrame { base, basis })
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }
}

/// Deterministic tangent frame at `t`: the images of `e_1, .., e_m` under a
/// Householder reflection that sends `e_0` to `+t` or `-t`.
///
/// The reflection vector is `e_0 + t` when `t_0 > 0` and `e_0 - t`
/// otherwise, so it never suffers cancellation.
pub fn tangent_basis(t: &SpherePoint) -> TangentFrame {
    let x = t.coords();
    let n = x.len();
    let mut v: Vec<f64> = x.iter().map(|c| if x[0] > 0.0 { *c } else { -*c }).collect();
    v[0] += 1.0;
    let vv = dot(&v, &v);
    let basis = (1..n)
        .map(|k| {
            // H e_k = e_k - 2 v v_k / (v.v)
            let f = 2.0 * v[k] / vv;
            let mut col: Vec<f64> = v.iter().map(|vi| -f * vi).collect();
            col[k] += 1.0;
            col
        })
        .collect();
    TangentFrame { base: t.clone(), basis }
}

/// Inverse of the cap chart at the pole `e_0`: `u -> (sqrt(1 - |u|^2), u)`.
pub fn cap_chart(u: &[f64]) -> Result<SpherePoint> {
    let r2 = dot(u, u);
    if !(r2 < 1.0) {
        return Err(Error::Domain(format!("cap chart needs |u| < 1, got |u|^2 = {r2}")));
    }
    let mut x = Vec::with_capacity(u.len() + 1);
    x.push((1.0 - r2).sqrt());
    x.extend_from_slice(u);
    Ok(SpherePoint(x))
}

/// Jacobian `(1 - |u|^2)^{-1/2}` of the cap chart inverse.
pub fn cap_jacobian(u: &[f64]) -> Result<f64> {
    let r2 = dot(u, u);
    if !(r2 < 1.0) {
        return Err(Error::Domain(format!("cap chart needs |u| < 1, got |u|^2 = {r2}")));
    }
    Ok(1.0 / (1.0 - r2).sqrt())
}

/// Projection of a point of the upper cap onto the tangent plane at `e_0`.
pub fn cap_project(p: &SpherePoint) -> Vec<f64> {
    p.coords()[1..].to_vec()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> SpherePoint {
        SpherePoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn hyperspherical_examples() {
        let p = hypersph_to_cart(&HyperAngles::new(vec![0.0, 1.3]).unwrap(), 2).unwrap();
        assert_eq!(p.coords(), &[1.0, 0.0, 0.0]);
        let p = hypersph_to_cart(&HyperAngles::new(vec![PI / 2.0, 0.0]).unwrap(), 2).unwrap();
        assert!((p.coords()[0]).abs() < 1e-15 && (p.coords()[1] - 1.0).abs() < 1e-15);
        let p = hypersph_to_cart(&HyperAngles::new(vec![PI / 2.0, PI / 2.0]).unwrap(), 2).unwrap();
        assert!((p.coords()[2] - 1.0).abs() < 1e-15);
        assert!(p.coords()[0].abs() < 1e-15 && p.coords()[1].abs() < 1e-15);
    }

    #[test]
    fn hyperspherical_rejects_mismatch() {
        let th = HyperAngles::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(hypersph_to_cart(&th, 2), Err(Error::DimensionMismatch { .. })));
        assert!(HyperAngles::new(vec![4.0, 0.1]).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let e0 = pt(&[1.0, 0.0, 0.0]);
        let e1 = pt(&[0.0, 1.0, 0.0]);
        assert_eq!(geodesic_dist(&e0, &e0).unwrap(), 0.0);
        assert_relative_eq!(geodesic_dist(&e0, &e0.antipode()).unwrap(), PI, max_relative = 1e-15);
        assert_relative_eq!(geodesic_dist(&e0, &e1).unwrap(), PI / 2.0, max_relative = 1e-15);
        let small = SpherePoint::normalize(vec![1.0, 1e-9, 0.0]).unwrap();
        assert_relative_eq!(geodesic_dist(&e0, &small).unwrap(), 1e-9, max_relative = 1e-6);
    }

    #[test]
    fn geodesic_rejects_bad_inner_product() {
        let a = SpherePoint(vec![1.0, 0.0]);
        let b = SpherePoint(vec![1.0 + 1e-6, 0.0]);
        assert!(geodesic_dist(&a, &b).is_err());
        let c = SpherePoint(vec![1.0 + 1e-10, 0.0]);
        assert!(geodesic_dist(&a, &c).unwrap() < 1e-9);
    }

    #[test]
    fn pair_integral_constant() {
        let q = PairQuadrature::default();
        let v = pair_integral_reduce(|_| 1.0, 2, q).unwrap();
        assert_relative_eq!(v, 16.0 * PI * PI, max_relative = 1e-8);
        let v = pair_integral_reduce(|_| 1.0, 1, q).unwrap();
        assert_relative_eq!(v, 4.0 * PI * PI, max_relative = 1e-8);
        let v = pair_integral_reduce(|_| 1.0, 3, q).unwrap();
        assert_relative_eq!(v, sphere_volume(3).powi(2), max_relative = 1e-8);
    }

    #[test]
    fn pair_integral_odd_vanishes() {
        let v = pair_integral_reduce(|x| x, 2, PairQuadrature::default()).unwrap();
        assert!(v.abs() < 1e-9);
    }

    #[test]
    fn pair_integral_reports_non_finite() {
        let r = pair_integral_reduce(|x| 1.0 / (x - x), 2, PairQuadrature::default());
        assert!(matches!(r, Err(Error::Integration(_))));
    }

    #[test]
    fn tangent_basis_at_pole() {
        let f = tangent_basis(&pt(&[1.0, 0.0, 0.0]));
        for b in f.basis() {
            assert!(b[0].abs() < 1e-15);
        }
    }

    #[test]
    fn cap_chart_examples() {
        let p = cap_chart(&[0.0, 0.0]).unwrap();
        assert_eq!(p.coords(), &[1.0, 0.0, 0.0]);
        assert_eq!(cap_jacobian(&[0.0, 0.0]).unwrap(), 1.0);
        let p = cap_chart(&[0.6, 0.0]).unwrap();
        assert_relative_eq!(p.coords()[0], 0.8, max_relative = 1e-15);
        assert_relative_eq!(cap_jacobian(&[0.6, 0.0]).unwrap(), 1.25, max_relative = 1e-15);
        assert!(cap_chart(&[0.6, 0.8]).is_err());
        assert!(cap_jacobian(&[1.0, 0.0]).is_err());
    }

    fn unit_vec(m: usize) -> impl Strategy<Value = SpherePoint> {
        prop::collection::vec(-1.0f64..1.0, m + 1)
            .prop_filter("nonzero", |v| norm(v) > 1e-3)
            .prop_map(|v| SpherePoint::normalize(v).unwrap())
    }

    proptest! {
        #[test]
        fn hyperspherical_points_are_unit(a in 0.0..PI, b in 0.0..PI, c in 0.0..(2.0 * PI)) {
            let p = hypersph_to_cart(&HyperAngles::new(vec![a, b, c]).unwrap(), 3).unwrap();
            prop_assert!((norm(p.coords()) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn triangle_inequality(s in unit_vec(3), t in unit_vec(3), u in unit_vec(3)) {
            let st = geodesic_dist(&s, &t).unwrap();
            let tu = geodesic_dist(&t, &u).unwrap();
            let su = geodesic_dist(&s, &u).unwrap();
            prop_assert!(su <= st + tu + 1e-9);
            prop_assert!((geodesic_dist(&t, &s).unwrap() - st).abs() < 1e-15);
        }

        #[test]
        fn tangent_frames_are_orthonormal(t in unit_vec(3)) {
            let f = tangent_basis(&t);
            let again = tangent_basis(&t);
            prop_assert_eq!(&f, &again);
            for (i, b) in f.basis().iter().enumerate() {
                prop_assert!(dot(b, t.coords()).abs() < 1e-10);
                for (j, c) in f.basis().iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot(b, c) - want).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn cap_chart_round_trip(x in -0.7f64..0.7, y in -0.7f64..0.7) {
            let p = cap_chart(&[x, y]).unwrap();
            let u = cap_project(&p);
            prop_assert!((u[0] - x).abs() < 1e-12 && (u[1] - y).abs() < 1e-12);
        }
    }
}
