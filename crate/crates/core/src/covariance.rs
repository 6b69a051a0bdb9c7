//! Covariance kernel of `(Y(s), Y(t), Y'(s)/sqrt(d), Y'(t)/sqrt(d))` for one
//! KSS equation at geodesic distance `theta`.
//!
//! With `c = cos(theta)`, `s = sin(theta)`:
//!
//! * `C = c^d`, the field covariance,
//! * `A = -sqrt(d) c^(d-1) s`, field against first derivative coordinate,
//! * `B = c^d - (d-1) c^(d-2) s^2`, first derivative coordinates,
//! * `D = c^(d-1)`, the remaining derivative coordinates.
//!
//! The derivative coordinates use frames whose first vector points along the
//! geodesic from `s` to `t` (and continues past `t`).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::{Error, Result};

const PSD_TOL: f64 = 1e-9;

/// Conditional variance and correlation of the first derivative coordinates
/// given `Y(s) = Y(t) = 0`; undefined on the diagonal `theta in {0, pi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conditioning {
    Regular { sigma2: f64, rho: f64 },
    Degenerate,
}

impl Conditioning {
    pub fn sigma2(&self) -> Option<f64> {
        match *self {
            Conditioning::Regular { sigma2, .. } => Some(sigma2),
            Conditioning::Degenerate => None,
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match *self {
            Conditioning::Regular { rho, .. } => Some(rho),
            Conditioning::Degenerate => None,
        }
    }
}

/// Everything the moment computations need at one angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceProfile {
    pub theta: f64,
    pub degree: u32,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `1 - C^2`, computed without cancellation.
    pub one_minus_c2: f64,
    pub conditioning: Conditioning,
    /// Covariance of matching non-first derivative coordinates; equal to `D`.
    pub rho_pp: f64,
    /// Arcones coefficient `|C| + |A|`.
    pub psi: f64,
}

impl CovarianceProfile {
    pub fn sigma2(&self) -> Option<f64> {
        self.conditioning.sigma2()
    }

    pub fn rho(&self) -> Option<f64> {
        self.conditioning.rho()
    }
}

/// `x^k` for `x = cos(theta)` given `ln|x|` and the sign of `x`.
#[inline]
fn signed_pow(ln_abs: f64, negative: bool, k: u32) -> f64 {
    let mag = (k as f64 * ln_abs).exp();
    if negative && k % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// `(A, B, C, D, 1 - C^2)` at angle `theta`, without validation.
pub(crate) fn kernel(theta: f64, d: u32) -> (f64, f64, f64, f64, f64) {
    let (s, c) = theta.sin_cos();
    kernel_cs(c, s, d)
}

/// The same from `c = cos(theta)`, `s = sin(theta) >= 0`. Negating `c`
/// changes each value by an exact sign.
pub(crate) fn kernel_cs(c: f64, s: f64, d: u32) -> (f64, f64, f64, f64, f64) {
    let df = d as f64;
    if c == 0.0 {
        let a = if d == 1 { -df.sqrt() * s } else { 0.0 };
        let b = if d == 2 { -s * s } else { 0.0 };
        return (a, b, 0.0, if d == 1 { 1.0 } else { 0.0 }, 1.0);
    }
    let ln_c = c.abs().ln();
    let neg = c < 0.0;
    let cd = signed_pow(ln_c, neg, d);
    let cd1 = signed_pow(ln_c, neg, d - 1);
    let cd2 = signed_pow(ln_c, neg, d - 2);
    let a = -df.sqrt() * cd1 * s;
    let b = cd - (df - 1.0) * cd2 * s * s;
    let one_minus_c2 = -(2.0 * df * ln_c).exp_m1();
    (a, b, cd, cd1, one_minus_c2)
}

/// The covariance profile at angle `theta in [0, pi]` for degree `d > 1`.
pub fn profile(theta: f64, d: u32) -> Result<CovarianceProfile> {
    if d < 2 {
        return Err(Error::InvalidInput("degree must exceed 1".into()));
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, pi]")));
    }
    let (a, b, c, dd, one_minus_c2) = kernel(theta, d);
    let conditioning = if one_minus_c2 > 0.0 && theta > 0.0 && theta < std::f64::consts::PI {
        let denom = one_minus_c2 - a * a;
        let raw = denom / one_minus_c2;
        if raw < -1e-12 {
            return Err(Error::Consistency(format!("conditional variance {raw} < 0 at theta = {theta}, d = {d}")));
        }
        let sigma2 = raw.clamp(0.0, 1.0);
        let rho = if denom > 0.0 {
            ((b * one_minus_c2 - a * a * c) / denom).clamp(-1.0, 1.0)
        } else {
            1.0
        };
        Conditioning::Regular { sigma2, rho }
    } else {
        Conditioning::Degenerate
    };
    Ok(CovarianceProfile {
        theta,
        degree: d,
        a,
        b,
        c,
        d: dd,
        one_minus_c2,
        conditioning,
        rho_pp: dd,
        psi: c.abs() + a.abs(),
    })
}

/// Arcones coefficient `|C| + |A|` at angle `theta`.
pub fn arcones_psi(theta: f64, d: u32) -> Result<f64> {
    Ok(profile(theta, d)?.psi)
}

/// The largest absolute row or column sum of the cross-covariance between
/// `(Y(s), Y'(s)/sqrt(d))` and `(Y(t), Y'(t)/sqrt(d))`:
/// `max(|C| + |A|, |A| + |B|, |D|)`. This is the quantity Arcones' lemma
/// controls; it can exceed [`arcones_psi`] where `|B| > |C|`.
pub fn arcones_psi_full(theta: f64, d: u32) -> Result<f64> {
    let p = profile(theta, d)?;
    Ok((p.c.abs() + p.a.abs()).max(p.a.abs() + p.b.abs()).max(p.d.abs()))
}

/// Covariances between the jet at `s` and the jet at `t` for one equation.
/// All other cross pairs are uncorrelated, and each jet has identity
/// covariance with itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCovariance {
    /// `E[Y(s) Y(t)] = C`
    pub y_y: f64,
    /// `E[Y(s) Y'_1(t)] = A`
    pub y_s_dy_t: f64,
    /// `E[Y'_1(s) Y(t)] = -A`
    pub dy_s_y_t: f64,
    /// `E[Y'_1(s) Y'_1(t)] = B`
    pub dy_dy_first: f64,
    /// `E[Y'_k(s) Y'_k(t)] = D` for `k >= 2`
    pub dy_dy_other: f64,
}

impl CrossCovariance {
    pub fn from_kernel(a: f64, b: f64, c: f64, d: f64) -> Self {
        CrossCovariance { y_y: c, y_s_dy_t: a, dy_s_y_t: -a, dy_dy_first: b, dy_dy_other: d }
    }

    pub fn from_profile(p: &CovarianceProfile) -> Self {
        Self::from_kernel(p.a, p.b, p.c, p.d)
    }

    /// At inner product `x = <s, t>`; `x` and `-x` give values differing
    /// only by exact signs.
    pub fn at_inner(x: f64, d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput("degree must exceed 1".into()));
        }
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("inner product {x} outside [-1, 1]")));
        }
        let (a, b, c, dd, _) = kernel_cs(x, ((1.0 - x) * (1.0 + x)).sqrt(), d);
        Ok(Self::from_kernel(a, b, c, dd))
    }

    pub fn from_limit(l: &LimitProfile) -> Self {
        Self::from_kernel(l.a, l.b, l.c, l.c)
    }
}

/// The `(2 + 2m) x (2 + 2m)` covariance matrix of
/// `(Y(s), Y(t), Y'(s)/sqrt(d), Y'(t)/sqrt(d))` for one equation.
#[derive(Debug, Clone)]
pub struct JointCovMatrix {
    m: usize,
    entries: DMatrix<f64>,
}

impl JointCovMatrix {
    pub const Y_S: usize = 0;
    pub const Y_T: usize = 1;

    /// Index of derivative coordinate `k` at `s`.
    pub fn dy_s(&self, k: usize) -> usize {
        2 + k
    }

    /// Index of derivative coordinate `k` at `t`.
    pub fn dy_t(&self, k: usize) -> usize {
        2 + self.m + k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.min()
    }
}

/// Assembles the joint covariance matrix and checks it is positive
/// semidefinite to within `1e-9`.
pub fn joint_matrix(theta: f64, d: u32, m: usize) -> Result<JointCovMatrix> {
    if m == 0 {
        return Err(Error::InvalidInput("need m >= 1".into()));
    }
    let p = profile(theta, d)?;
    let n = 2 + 2 * m;
    let mut e = DMatrix::<f64>::identity(n, n);
    let mut set = |i: usize, j: usize, v: f64| {
        e[(i, j)] = v;
        e[(j, i)] = v;
    };
    let x = CrossCovariance::from_profile(&p);
    set(0, 1, x.y_y);
    set(0, 2 + m, x.y_s_dy_t);
    set(2, 1, x.dy_s_y_t);
    set(2, 2 + m, x.dy_dy_first);
    for k in 1..m {
        set(2 + k, 2 + m + k, x.dy_dy_other);
    }
    let mat = JointCovMatrix { m, entries: e };
    let lo = mat.min_eigenvalue();
    if lo < -PSD_TOL {
        return Err(Error::Consistency(format!(
            "joint covariance at theta = {theta}, d = {d} has eigenvalue {lo}"
        )));
    }
    Ok(mat)
}

/// `1 - (1 + x) e^{-x}` for `x >= 0`, accurate near zero.
pub(crate) fn one_minus_one_plus_x_exp(x: f64) -> f64 {
    if x < 0.5 {
        // sum_{k >= 2} (-1)^k (k - 1) x^k / k!
        let mut term = -x;
        let mut acc = 0.0;
        for k in 2..40 {
            term *= -x / k as f64;
            let t = (k as f64 - 1.0) * term;
            acc += t;
            if t.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        acc
    } else {
        1.0 - (1.0 + x) * (-x).exp()
    }
}

/// `1 - x - e^{-x}` for `x >= 0`, accurate near zero.
fn one_minus_x_minus_exp(x: f64) -> f64 {
    if x < 0.5 {
        // -sum_{k >= 2} (-x)^k / k!
        let mut term = -x;
        let mut acc = 0.0;
        for k in 2..40 {
            term *= -x / k as f64;
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        -acc
    } else {
        1.0 - x - (-x).exp()
    }
}

/// Large-degree limits of the profile at scaled distance `z = sqrt(d) theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitProfile {
    pub z: f64,
    /// Limit of `C^2`, `e^{-z^2}`.
    pub c2: f64,
    /// Limit of `C` and of `D`, `e^{-z^2/2}`.
    pub c: f64,
    pub a: f64,
    pub b: f64,
    /// Limit of `C D`, `e^{-z^2}`.
    pub cd: f64,
    pub conditioning: Conditioning,
}

/// The limit profile at `z >= 0`.
///
/// `sigma2 = (1 - (1 + z^2) e^{-z^2}) / (1 - e^{-z^2})` and
/// `rho = e^{-z^2/2} (1 - z^2 - e^{-z^2}) / (1 - (1 + z^2) e^{-z^2})`,
/// the pointwise limits of the finite-degree expressions.
pub fn limit_profile(z: f64) -> Result<LimitProfile> {
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("scaled distance z = {z} must be finite and >= 0")));
    }
    let x = z * z;
    let c = (-0.5 * x).exp();
    let c2 = (-x).exp();
    let conditioning = if z > 0.0 {
        let one_minus_c2 = -(-x).exp_m1();
        let denom = one_minus_one_plus_x_exp(x);
        Conditioning::Regular {
            sigma2: denom / one_minus_c2,
            rho: c * one_minus_x_minus_exp(x) / denom,
        }
    } else {
        Conditioning::Degenerate
    };
    Ok(LimitProfile { z, c2, c, a: -z * c, b: (1.0 - x) * c, cd: c2, conditioning })
}

/// Which lines of the scaled bounds hold at one `(z, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundsReport {
    /// `|A| <= z e^{-alpha z^2}`
    pub a: bool,
    /// `|B| <= (1 + z^2) e^{-alpha z^2}`
    pub b: bool,
    /// `|C| <= |D|`
    pub c_le_d: bool,
    /// `|D| <= e^{-alpha z^2}`
    pub d: bool,
    /// `0 <= 1 - sigma^2 <= K e^{-2 alpha z^2}`
    pub sigma2: bool,
    /// `|rho| <= K (1 + z^2)^2 e^{-2 alpha z^2}`
    pub rho: bool,
}

impl BoundsReport {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c_le_d && self.d && self.sigma2 && self.rho
    }
}

/// Default decay rate for [`verify_bounds`].
pub const DEFAULT_ALPHA: f64 = 0.15;
/// Default constant for the `sigma^2` and `rho` lines of [`verify_bounds`].
pub const DEFAULT_BOUND_CONST: f64 = 1.0;

/// Checks the scaled bounds at `theta = z / sqrt(d)` for `z / sqrt(d) < pi/2`.
pub fn verify_bounds(z: f64, d: u32, alpha: f64, constant: f64) -> Result<BoundsReport> {
    let df = d as f64;
    let theta = z / df.sqrt();
    if !(z >= 0.0 && theta < 0.5 * std::f64::consts::PI) {
        return Err(Error::Domain(format!("need 0 <= z / sqrt(d) < pi / 2, got {theta}")));
    }
    let p = profile(theta, d)?;
    let e = (-alpha * z * z).exp();
    let slack = 1e-12;
    let (sigma2_ok, rho_ok) = match p.conditioning {
        Conditioning::Regular { sigma2, rho } => {
            let one_minus = 1.0 - sigma2;
            (
                one_minus >= -slack && one_minus <= constant * e * e + slack,
                rho.abs() <= constant * (1.0 + z * z).powi(2) * e * e + slack,
            )
        }
        Conditioning::Degenerate => (true, true),
    };
    Ok(BoundsReport {
        a: p.a.abs() <= z * e + slack,
        b: p.b.abs() <= (1.0 + z * z) * e + slack,
        c_le_d: p.c.abs() <= p.d.abs() + slack,
        d: p.d.abs() <= e + slack,
        sigma2: sigma2_ok,
        rho: rho_ok,
    })
}

/// One CSV row `theta,d,A,B,C,D,sigma2,rho,psi`; degenerate conditioning is
/// written as `degenerate`.
pub fn profile_csv_row(p: &CovarianceProfile) -> String {
    let cond = match p.conditioning {
        Conditioning::Regular { sigma2, rho } => format!("{sigma2:e},{rho:e}"),
        Conditioning::Degenerate => "degenerate,degenerate".to_string(),
    };
    format!("{:e},{},{:e},{:e},{:e},{:e},{},{:e}", p.theta, p.degree, p.a, p.b, p.c, p.d, cond, p.psi)
}

pub const PROFILE_CSV_HEADER: &str = "theta,d,A,B,C,D,sigma2,rho,psi";

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn right_angle_vanishes() {
        for d in [4, 5, 10, 77] {
            let p = profile(PI / 2.0, d).unwrap();
            assert!([p.a, p.b, p.c, p.d, p.psi].iter().all(|x| x.abs() < 1e-30));
        }
        let j = joint_matrix(PI / 2.0, 4, 2).unwrap();
        assert!((j.entries() - DMatrix::identity(6, 6)).abs().max() < 1e-30);
    }

    #[test]
    fn direct_values() {
        let p = profile(0.1, 100).unwrap();
        let want = -10.0 * 0.1f64.cos().powi(99) * 0.1f64.sin();
        assert_relative_eq!(p.a, want, max_relative = 1e-12);
        assert!((p.a + 0.6083).abs() < 5e-4);
        let p = profile(0.2, 100).unwrap();
        assert!((p.psi - 0.4038).abs() < 5e-4);
        let p = profile(0.0, 10).unwrap();
        assert_eq!(p.conditioning, Conditioning::Degenerate);
        assert_eq!((p.c, p.a, p.psi), (1.0, 0.0, 1.0));
        assert_eq!(profile(PI, 10).unwrap().conditioning, Conditioning::Degenerate);
        assert!(profile(0.3, 1).is_err());
        assert!(profile(-0.1, 5).is_err());
    }

    #[test]
    fn reflection() {
        for d in [2, 3, 8, 15] {
            for theta in [0.1, 0.7, 1.3] {
                let p = profile(theta, d).unwrap();
                let q = profile(PI - theta, d).unwrap();
                let sd = if d % 2 == 0 { 1.0 } else { -1.0 };
                assert!((q.c - sd * p.c).abs() < 1e-12);
                assert!((q.d + sd * p.d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_grid() {
        for d in [2, 3, 5, 20, 100, 1000] {
            for m in [1, 2, 3] {
                for k in 1..60 {
                    let theta = PI * k as f64 / 60.0;
                    let j = joint_matrix(theta, d, m).unwrap();
                    assert!(j.min_eigenvalue() >= -1e-9);
                    for i in 0..2 + 2 * m {
                        assert_eq!(j.get(i, i), 1.0);
                    }
                    assert_eq!(j.entries(), &j.entries().transpose());
                }
            }
        }
    }

    #[test]
    fn conditional_quantities_match_schur_complement() {
        // Condition the first derivative coordinates on (Y(s), Y(t)).
        for (theta, d) in [(0.3, 20), (0.05, 400), (1.0, 3), (2.5, 6)] {
            let j = joint_matrix(theta, d, 2).unwrap();
            let e = j.entries();
            let idx = [0, 1];
            let tgt = [j.dy_s(0), j.dy_t(0)];
            let s11 = DMatrix::from_fn(2, 2, |a, b| e[(idx[a], idx[b])]);
            let s12 = DMatrix::from_fn(2, 2, |a, b| e[(idx[a], tgt[b])]);
            let s22 = DMatrix::from_fn(2, 2, |a, b| e[(tgt[a], tgt[b])]);
            let cond = &s22 - s12.transpose() * s11.try_inverse().unwrap() * &s12;
            let p = profile(theta, d).unwrap();
            assert_relative_eq!(cond[(0, 0)], p.sigma2().unwrap(), epsilon = 1e-10);
            assert_relative_eq!(cond[(1, 1)], p.sigma2().unwrap(), epsilon = 1e-10);
            assert_relative_eq!(cond[(0, 1)] / cond[(0, 0)], p.rho().unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn limit_values() {
        let l = limit_profile(1.0).unwrap();
        let e1 = (-1.0f64).exp();
        assert_relative_eq!(l.a, -(-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(l.conditioning.sigma2().unwrap(), (1.0 - 2.0 * e1) / (1.0 - e1), max_relative = 1e-14);
        assert!((l.conditioning.sigma2().unwrap() - 0.41802).abs() < 1e-5);
        assert_eq!(limit_profile(0.0).unwrap().conditioning, Conditioning::Degenerate);
        assert!(limit_profile(-1.0).is_err());
    }

    #[test]
    fn limits_approached() {
        for z in [0.5, 1.0, 2.0, 4.0] {
            let l = limit_profile(z).unwrap();
            let mut prev = f64::INFINITY;
            for d in [100u32, 1000, 10_000, 100_000] {
                let p = profile(z / (d as f64).sqrt(), d).unwrap();
                let err = [
                    (p.a - l.a).abs(),
                    (p.b - l.b).abs(),
                    (p.c * p.d - l.cd).abs(),
                    (p.sigma2().unwrap() - l.conditioning.sigma2().unwrap()).abs(),
                    (p.rho().unwrap() - l.conditioning.rho().unwrap()).abs(),
                ]
                .into_iter()
                .fold(0.0, f64::max);
                assert!(err <= 5.0 / d as f64, "z = {z}, d = {d}: {err}");
                assert!(err < prev);
                prev = err;
            }
        }
    }

    #[test]
    fn small_z_series_agree() {
        for x in [0.49f64, 0.3, 1e-3, 1e-8] {
            let direct = 1.0 - (1.0 + x) * (-x).exp();
            if x > 0.1 {
                assert_relative_eq!(one_minus_one_plus_x_exp(x), direct, max_relative = 1e-13);
                assert_relative_eq!(one_minus_x_minus_exp(x), 1.0 - x - (-x).exp(), max_relative = 1e-13);
            }
            assert!(one_minus_one_plus_x_exp(x) > 0.0);
            assert!(one_minus_x_minus_exp(x) < 0.0);
        }
        assert_relative_eq!(one_minus_one_plus_x_exp(1e-8), 0.5e-16, max_relative = 1e-7);
        // rho tends to -1 at the diagonal
        let r = limit_profile(1e-4).unwrap().conditioning.rho().unwrap();
        assert!((r + 1.0).abs() < 1e-6);
    }

    #[test]
    fn bounds_hold_on_grid() {
        for d in [10u32, 100, 1000] {
            let zmax = (d as f64).sqrt() * PI / 2.0;
            for k in 0..400 {
                let z = zmax * k as f64 / 400.0;
                let r = verify_bounds(z, d, DEFAULT_ALPHA, DEFAULT_BOUND_CONST).unwrap();
                assert!(r.all(), "z = {z}, d = {d}: {r:?}");
            }
        }
        assert!(verify_bounds(2.0, 50, 0.17, 1.0).unwrap().a);
        assert!(verify_bounds(0.0, 50, 0.15, 1.0).unwrap().d);
        assert!(verify_bounds(20.0, 50, 0.15, 1.0).is_err());
    }

    #[test]
    fn full_psi_dominates() {
        for k in 1..50 {
            let theta = 1.5 * k as f64 / 50.0;
            assert!(arcones_psi_full(theta, 30).unwrap() >= arcones_psi(theta, 30).unwrap());
        }
    }

    #[test]
    fn csv_row() {
        let p = profile(0.5, 4).unwrap();
        assert_eq!(profile_csv_row(&p).split(',').count(), PROFILE_CSV_HEADER.split(',').count());
        assert!(profile_csv_row(&profile(0.0, 4).unwrap()).contains("degenerate"));
    }
}
