//! Moments of the zero-set volume by the Kac-Rice formula.
//!
//! The first moment has a closed form. The second moment reduces, by
//! rotation invariance, to a one-dimensional integral over the scaled
//! geodesic distance `z = sqrt(d) theta` of
//!
//! `F(theta) p(theta) - E^2 (2 pi)^{-r}`,
//!
//! where `p = (2 pi)^{-r} (1 - C^2)^{-r/2}` is the density of
//! `(Y(s), Y(t))` at zero, `E = E sqrt(det(G G^T))` and `F` is the
//! conditional expectation of `f(Y'(s)/sqrt(d)) f(Y'(t)/sqrt(d))` given
//! `Y(s) = Y(t) = 0`. Conditionally, each row of the derivative pair is a
//! Gaussian pair `(M, W)` whose first coordinates have variance `sigma^2` and
//! correlation `rho`, and whose remaining coordinates have unit variance and
//! correlation `D`.
//!
//! `F` is estimated by Monte Carlo over one frozen block of Gaussian draws,
//! shared by every quadrature node (common random numbers). The product
//! `f(e1) f(e2)` of two independent standard draws has mean exactly `E^2`
//! and is subtracted as a control variate, so the estimator error vanishes
//! as the two points decorrelate.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::chaos::table::gram_sqrt_det;
use crate::covariance::{limit_profile, profile, Conditioning};
use crate::numeric::{chi_moment, mean_and_variance, pairwise_sum, sphere_volume, GaussLegendre};
use crate::{Error, Result};

fn check_dims(m: usize, r: usize) -> Result<()> {
    if r == 0 || r > m {
        return Err(Error::InvalidInput(format!("need 1 <= r <= m, got r = {r}, m = {m}")));
    }
    Ok(())
}

/// `E sqrt(det(G G^T))` for an `r x m` standard Gaussian matrix `G`, as a
/// product of chi means.
pub fn expected_gram(m: usize, r: usize) -> Result<f64> {
    check_dims(m, r)?;
    Ok((m - r + 1..=m).map(|j| chi_moment(j as u32, 1.0)).product())
}

/// Expected `(m - r)`-volume of the zero set on `S^m` of a KSS system of
/// degree `d`: `kappa_m (2 pi)^{-r/2} d^{r/2} E sqrt(det(G G^T))`.
pub fn expected_volume(m: usize, r: usize, d: u32) -> Result<f64> {
    check_dims(m, r)?;
    if d < 2 {
        return Err(Error::InvalidInput("degree must exceed 1".into()));
    }
    let df = d as f64;
    Ok(sphere_volume(m as u32)
        * (2.0 * PI).powf(-0.5 * r as f64)
        * df.powf(0.5 * r as f64)
        * expected_gram(m, r)?)
}

/// Mean zero-set volume per unit volume for the local limit field, whose
/// gradient has identity covariance: `(2 pi)^{-r/2} E sqrt(det(G G^T))`.
pub fn limit_volume_density(m: usize, r: usize) -> Result<f64> {
    Ok((2.0 * PI).powf(-0.5 * r as f64) * expected_gram(m, r)?)
}

/// The conditional correlation structure at one pair of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCorrelations {
    /// Conditional variance of the first derivative coordinates.
    pub sigma2: f64,
    /// Conditional correlation of the first derivative coordinates.
    pub rho: f64,
    /// Correlation of the remaining derivative coordinates.
    pub rho_pp: f64,
    /// Covariance of the field with the first derivative coordinate.
    pub a: f64,
    /// Covariance of the field values.
    pub c: f64,
    pub one_minus_c2: f64,
}

impl PairCorrelations {
    /// At geodesic distance `theta in (0, pi)` for degree `d`.
    pub fn at(theta: f64, d: u32) -> Result<Self> {
        let p = profile(theta, d)?;
        match p.conditioning {
            Conditioning::Regular { sigma2, rho } => Ok(PairCorrelations {
                sigma2,
                rho,
                rho_pp: p.d,
                a: p.a,
                c: p.c,
                one_minus_c2: p.one_minus_c2,
            }),
            Conditioning::Degenerate => Err(Error::Domain(format!(
                "profile is degenerate at theta = {theta}, d = {d}"
            ))),
        }
    }

    /// For the local limit field at scaled distance `z > 0`.
    pub fn limit(z: f64) -> Result<Self> {
        let p = limit_profile(z)?;
        match p.conditioning {
            Conditioning::Regular { sigma2, rho } => Ok(PairCorrelations {
                sigma2,
                rho,
                rho_pp: p.c,
                a: p.a,
                c: p.c,
                one_minus_c2: -(-z * z).exp_m1(),
            }),
            Conditioning::Degenerate => {
                Err(Error::Domain("limit profile is degenerate at z = 0".into()))
            }
        }
    }

    /// Fully decorrelated points.
    pub fn independent() -> Self {
        PairCorrelations { sigma2: 1.0, rho: 0.0, rho_pp: 0.0, a: 0.0, c: 0.0, one_minus_c2: 1.0 }
    }

    /// Density of `(Y(s), Y(t))` at `(u, u)` for `u in R^r`.
    pub fn density(&self, u: &[f64]) -> f64 {
        let r = u.len() as f64;
        let q: f64 = u.iter().map(|x| x * x).sum();
        (2.0 * PI).powf(-r) * self.one_minus_c2.powf(-0.5 * r) * (-q / (1.0 + self.c)).exp()
    }

    /// Conditional mean of the first derivative coordinate at `t` given
    /// `Y(s) = Y(t) = u`, per unit `u`. The mean at `s` is its negative.
    pub fn mean_shift(&self) -> f64 {
        self.a / (1.0 + self.c)
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// A frozen block of Gaussian draws `(e1, e2)`, each `n x (r m)`, from which
/// the correlated pair `(M, W)` is built for any correlation structure.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    r: usize,
    m: usize,
    n: usize,
    e1: Vec<f64>,
    e2: Vec<f64>,
    /// `f(e1) f(e2)` per draw; mean `E^2`.
    independent: Vec<f64>,
    /// For `r = 1`: sums over the non-first coordinates of `e1^2`, `e2^2`
    /// and `e1 e2`.
    tails: Vec<[f64; 3]>,
}

impl ConditionalSampler {
    pub fn new<R: Rng + ?Sized>(m: usize, r: usize, n: usize, rng: &mut R) -> Result<Self> {
        check_dims(m, r)?;
        if n < 2 {
            return Err(Error::InvalidInput("need at least two Monte Carlo draws".into()));
        }
        let k = r * m;
        let mut e1 = vec![0.0; n * k];
        let mut e2 = vec![0.0; n * k];
        for i in 0..n {
            for x in &mut e1[i * k..(i + 1) * k] {
                *x = rng.sample(StandardNormal);
            }
            for x in &mut e2[i * k..(i + 1) * k] {
                *x = rng.sample(StandardNormal);
            }
        }
        let independent = (0..n)
            .map(|i| {
                gram_sqrt_det(&e1[i * k..(i + 1) * k], r, m)
                    * gram_sqrt_det(&e2[i * k..(i + 1) * k], r, m)
            })
            .collect();
        let tails = if r == 1 {
            (0..n)
                .map(|i| {
                    let (a, b) = (&e1[i * m + 1..(i + 1) * m], &e2[i * m + 1..(i + 1) * m]);
                    [
                        a.iter().map(|x| x * x).sum(),
                        b.iter().map(|x| x * x).sum(),
                        a.iter().zip(b).map(|(x, y)| x * y).sum(),
                    ]
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(ConditionalSampler { r, m, n, e1, e2, independent, tails })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `f(M_i) f(W_i)` for draw `i`, with conditional mean `-h` added to the
    /// first column of `M` and `+h` to that of `W` (`h = 0` at level zero).
    /// `scratch` must hold `2 r m` values.
    fn pair(&self, i: usize, c: &PairCorrelations, h: Option<&[f64]>, scratch: &mut [f64]) -> f64 {
        let sigma = c.sigma2.max(0.0).sqrt();
        let rho_c = ((1.0 - c.rho) * (1.0 + c.rho)).max(0.0).sqrt();
        let (r, m) = (self.r, self.m);
        let k = r * m;
        let e1 = &self.e1[i * k..(i + 1) * k];
        let e2 = &self.e2[i * k..(i + 1) * k];
        if r == 1 {
            let shift = h.map_or(0.0, |h| h[0]);
            let [s11, s22, s12] = self.tails[i];
            let dd = c.rho_pp;
            let dd_c = ((1.0 - dd) * (1.0 + dd)).max(0.0).sqrt();
            let m0 = sigma * e1[0] - shift;
            let w0 = sigma * (c.rho * e1[0] + rho_c * e2[0]) + shift;
            let sw = (dd * dd * s11 + dd_c * dd_c * s22 + 2.0 * dd * dd_c * s12).max(0.0);
            return (m0 * m0 + s11).sqrt() * (w0 * w0 + sw).sqrt();
        }
        let dd = c.rho_pp;
        let dd_c = ((1.0 - dd) * (1.0 + dd)).max(0.0).sqrt();
        let (mm, ww) = scratch.split_at_mut(k);
        for l in 0..r {
            let shift = h.map_or(0.0, |h| h[l]);
            let j0 = l * m;
            mm[j0] = sigma * e1[j0] - shift;
            ww[j0] = sigma * (c.rho * e1[j0] + rho_c * e2[j0]) + shift;
            for j in j0 + 1..j0 + m {
                mm[j] = e1[j];
                ww[j] = dd * e1[j] + dd_c * e2[j];
            }
        }
        gram_sqrt_det(mm, r, m) * gram_sqrt_det(ww, r, m)
    }

    fn pairs(&self, c: &PairCorrelations, h: Option<&[f64]>) -> Vec<f64> {
        let k = 2 * self.r * self.m;
        (0..self.n)
            .into_par_iter()
            .map_init(|| vec![0.0; k], |s, i| self.pair(i, c, h, s))
            .collect()
    }

    /// Conditional factor `E[f(M) f(W)]` given zero field values.
    pub fn factor(&self, c: &PairCorrelations) -> Estimate {
        estimate(&self.pairs(c, None))
    }

    /// Conditional factor given `Y(s) = Y(t) = u`.
    pub fn factor_at_level(&self, c: &PairCorrelations, u: &[f64]) -> Result<Estimate> {
        if u.len() != self.r {
            return Err(Error::DimensionMismatch { expected: self.r, got: u.len() });
        }
        let h: Vec<f64> = u.iter().map(|x| c.mean_shift() * x).collect();
        Ok(estimate(&self.pairs(c, Some(&h))))
    }

    /// Per-draw `sum_k w_k p_k (f(M_i) f(W_i) - f(e1_i) f(e2_i))` over the
    /// nodes, plus the deterministic `E^2 sum_k w_k (p_k - (2 pi)^{-r})`.
    fn weighted(&self, nodes: &[Node], e_sq: f64) -> Vec<f64> {
        let r = self.r as f64;
        let p_inf = (2.0 * PI).powf(-r);
        let zero = vec![0.0; self.r];
        let dens: Vec<f64> = nodes.iter().map(|n| n.corr.density(&zero)).collect();
        let det: f64 = pairwise_sum(
            &nodes.iter().zip(&dens).map(|(n, p)| n.w * (p - p_inf)).collect::<Vec<_>>(),
        ) * e_sq;
        let wp: f64 =
            pairwise_sum(&nodes.iter().zip(&dens).map(|(n, p)| n.w * p).collect::<Vec<_>>());
        let k = 2 * self.r * self.m;
        (0..self.n)
            .into_par_iter()
            .map_init(
                || vec![0.0; k],
                |s, i| {
                    let mut acc = 0.0;
                    for (node, p) in nodes.iter().zip(&dens) {
                        acc += node.w * p * self.pair(i, &node.corr, None, s);
                    }
                    acc - wp * self.independent[i] + det
                },
            )
            .collect()
    }
}

fn estimate(xs: &[f64]) -> Estimate {
    let (mean, var) = mean_and_variance(xs);
    Estimate { mean, se: (var / xs.len() as f64).sqrt() }
}

/// Monte Carlo conditional factor `E[f(M) f(W) | Y(s) = Y(t) = 0]` at angle
/// `theta in (0, pi)` for degree `d`, from `n_mc` draws.
pub fn conditional_factor<R: Rng + ?Sized>(
    theta: f64,
    d: u32,
    m: usize,
    r: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let c = PairCorrelations::at(theta, d)?;
    Ok(ConditionalSampler::new(m, r, n_mc, rng)?.factor(&c))
}

/// Second-moment integrand `F_u(theta) p(u, u)` at level `u`.
pub fn second_moment_density(
    sampler: &ConditionalSampler,
    c: &PairCorrelations,
    u: &[f64],
) -> Result<Estimate> {
    let f = sampler.factor_at_level(c, u)?;
    let p = c.density(u);
    Ok(Estimate { mean: f.mean * p, se: f.se * p })
}

#[derive(Debug, Clone, Copy)]
struct Node {
    w: f64,
    corr: PairCorrelations,
}

/// Quadrature layout for the variance integrals over `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentOptions {
    pub n_mc: usize,
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// End of the near-diagonal region `[0, near]`.
    pub near: f64,
    /// Panels on the near-diagonal region; the error estimate halves this.
    pub near_panels: usize,
    /// Panel width beyond `near`; the error estimate doubles this.
    pub far_width: f64,
    /// Integration cut-off in `z`.
    pub z_max: f64,
    /// Allowed relative disagreement of the near-diagonal integral under
    /// panel halving.
    pub richardson_tol: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            n_mc: 200_000,
            nodes: 16,
            near: 2.0,
            near_panels: 4,
            far_width: 1.0,
            z_max: 12.0,
            richardson_tol: 1e-3,
        }
    }
}

impl MomentOptions {
    fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.near_panels < 2 || !(self.near > 0.0) || !(self.far_width > 0.0) {
            return Err(Error::InvalidInput(format!("bad quadrature layout {self:?}")));
        }
        if self.n_mc < 2 {
            return Err(Error::InvalidInput("need at least two Monte Carlo draws".into()));
        }
        Ok(())
    }
}

/// A variance computed by quadrature over `z` with a Monte Carlo inner
/// factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub value: f64,
    /// Standard error from the inner Monte Carlo.
    pub inner_mc_se: f64,
    /// Change under panel refinement.
    pub quadrature_error: f64,
}

/// First and second moment of the zero-set volume at one degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentResult {
    pub m: usize,
    pub r: usize,
    pub d: u32,
    pub expected: f64,
    /// `variance + expected^2`.
    pub second_moment: f64,
    pub variance: f64,
    /// `variance / d^{r - m/2}`.
    pub normalized_variance: f64,
    pub inner_mc_se: f64,
    pub quadrature_error: f64,
}

fn panels(a: f64, b: f64, count: usize, gl: &GaussLegendre) -> Vec<(f64, f64)> {
    let h = (b - a) / count as f64;
    (0..count).flat_map(|i| gl.mapped(a + i as f64 * h, a + (i + 1) as f64 * h)).collect()
}

/// Nodes `(z, w)` for the fine and coarse rules on `[0, near]` and
/// `[near, upper]`.
type Rules = [Vec<(f64, f64)>; 4];

fn rules(opts: &MomentOptions, upper: f64) -> Rules {
    let gl = GaussLegendre::new(opts.nodes);
    let near = opts.near.min(upper);
    let near_f = panels(0.0, near, opts.near_panels, &gl);
    let near_c = panels(0.0, near, opts.near_panels / 2, &gl);
    let (far_f, far_c) = if upper > near {
        let n = ((upper - near) / opts.far_width).ceil().max(1.0) as usize;
        let nc = ((upper - near) / (2.0 * opts.far_width)).ceil().max(1.0) as usize;
        (panels(near, upper, n, &gl), panels(near, upper, nc, &gl))
    } else {
        (Vec::new(), Vec::new())
    };
    [near_f, near_c, far_f, far_c]
}

/// Integrate `weight(z) [F(z) p(z) - E^2 (2 pi)^{-r}]` under all four rules,
/// check the near-diagonal region and return the fine value with its errors.
fn integrate<W, C>(
    sampler: &ConditionalSampler,
    rules: &Rules,
    weight: W,
    corr: C,
    tol: f64,
) -> Result<VarianceEstimate>
where
    W: Fn(f64) -> f64,
    C: Fn(f64) -> Result<PairCorrelations>,
{
    let e_sq = expected_gram(sampler.m, sampler.r)?.powi(2);
    let mut per_draw = Vec::with_capacity(4);
    for rule in rules {
        let nodes = rule
            .iter()
            .map(|&(z, w)| Ok(Node { w: w * weight(z), corr: corr(z)? }))
            .collect::<Result<Vec<_>>>()?;
        per_draw.push(sampler.weighted(&nodes, e_sq));
    }
    let mean = |xs: &[f64]| pairwise_sum(xs) / xs.len() as f64;
    let (near_f, near_c) = (mean(&per_draw[0]), mean(&per_draw[1]));
    let (far_f, far_c) = (mean(&per_draw[2]), mean(&per_draw[3]));
    let total: Vec<f64> = per_draw[0].iter().zip(&per_draw[2]).map(|(a, b)| a + b).collect();
    let est = estimate(&total);
    let scale = est.mean.abs().max(near_f.abs());
    if !((near_f - near_c).abs() <= tol * scale) {
        return Err(Error::Integration(format!(
            "near-diagonal panel failed its refinement check: fine {near_f:.6e}, coarse {near_c:.6e}, total {:.6e}",
            est.mean
        )));
    }
    Ok(VarianceEstimate {
        value: est.mean,
        inner_mc_se: est.se,
        quadrature_error: (near_f - near_c).abs() + (far_f - far_c).abs(),
    })
}

/// Variance of the normalized volume `d^{m/2 - r/2} V` at degree `d`,
/// `2 kappa_m kappa_{m-1} int d^{(m-1)/2} sin^{m-1}(z/sqrt(d)) [F p - E^2 (2 pi)^{-r}] dz`
/// over `z in [0, min(sqrt(d) pi/2, z_max)]`.
pub fn normalized_variance(
    sampler: &ConditionalSampler,
    d: u32,
    opts: &MomentOptions,
) -> Result<VarianceEstimate> {
    opts.validate()?;
    if d < 2 {
        return Err(Error::InvalidInput("degree must exceed 1".into()));
    }
    let m = sampler.m;
    let sd = (d as f64).sqrt();
    let upper = (sd * PI / 2.0).min(opts.z_max);
    let pre = 2.0 * sphere_volume(m as u32) * sphere_volume(m as u32 - 1);
    let weight = |z: f64| pre * (sd * (z / sd).sin()).powi(m as i32 - 1);
    integrate(sampler, &rules(opts, upper), weight, |z| PairCorrelations::at(z / sd, d), opts.richardson_tol)
}

/// First moment, second moment and variance of the zero-set volume of a KSS
/// system with `r < m` equations of degree `d` on `S^m`.
pub fn second_moment<R: Rng + ?Sized>(
    m: usize,
    r: usize,
    d: u32,
    opts: &MomentOptions,
    rng: &mut R,
) -> Result<MomentResult> {
    check_dims(m, r)?;
    if r == m {
        return Err(Error::InvalidInput(
            "second moment of point counts (r = m) is not supported".into(),
        ));
    }
    let sampler = ConditionalSampler::new(m, r, opts.n_mc, rng)?;
    second_moment_with(&sampler, d, opts)
}

/// [`second_moment`] with a caller-supplied sampler.
pub fn second_moment_with(
    sampler: &ConditionalSampler,
    d: u32,
    opts: &MomentOptions,
) -> Result<MomentResult> {
    let (m, r) = (sampler.m, sampler.r);
    if r == m {
        return Err(Error::InvalidInput(
            "second moment of point counts (r = m) is not supported".into(),
        ));
    }
    let v = normalized_variance(sampler, d, opts)?;
    let scale = (d as f64).powf(r as f64 - 0.5 * m as f64);
    let expected = expected_volume(m, r, d)?;
    let variance = v.value * scale;
    Ok(MomentResult {
        m,
        r,
        d,
        expected,
        second_moment: variance + expected * expected,
        variance,
        normalized_variance: v.value,
        inner_mc_se: v.inner_mc_se * scale,
        quadrature_error: v.quadrature_error * scale,
    })
}

/// Large-degree limit of the normalized variance, with the limit
/// correlations and weight `2 kappa_m kappa_{m-1} z^{m-1}` on `[0, z_max]`.
pub fn limit_variance<R: Rng + ?Sized>(
    m: usize,
    r: usize,
    opts: &MomentOptions,
    rng: &mut R,
) -> Result<VarianceEstimate> {
    opts.validate()?;
    check_dims(m, r)?;
    let sampler = ConditionalSampler::new(m, r, opts.n_mc, rng)?;
    limit_variance_with(&sampler, opts)
}

/// [`limit_variance`] with a caller-supplied sampler.
pub fn limit_variance_with(
    sampler: &ConditionalSampler,
    opts: &MomentOptions,
) -> Result<VarianceEstimate> {
    opts.validate()?;
    let m = sampler.m;
    let pre = 2.0 * sphere_volume(m as u32) * sphere_volume(m as u32 - 1);
    let weight = |z: f64| pre * z.powi(m as i32 - 1);
    integrate(sampler, &rules(opts, opts.z_max), weight, PairCorrelations::limit, opts.richardson_tol)
}

/// Density of the distance between two independent uniform points of the
/// unit square, on `[0, sqrt(2)]`.
pub fn square_distance_density(z: f64) -> f64 {
    if !(z > 0.0) || z >= 2f64.sqrt() {
        return 0.0;
    }
    if z <= 1.0 {
        return 2.0 * PI * z - 8.0 * z * z + 2.0 * z * z * z;
    }
    // Integrate (1 - z cos phi)(1 - z sin phi) over the angles where both
    // factors are positive.
    let a = (1.0 / z).acos();
    let b = (1.0 / z).asin();
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let inner = (b - a) - z * (sb - sa) + z * (cb - ca) + 0.5 * z * z * (sb * sb - sa * sa);
    4.0 * z * inner.max(0.0)
}

/// Variance of the nodal length of the limit field (`m = 2`, `r = 1`) in the
/// unit square, `int pdf(z) [F(z) p(z) - 1/4] dz`.
///
/// The range `[0, 1]` uses `near_panels` panels; on `[1, sqrt(2)]` the
/// substitution `z = sqrt(2) - s^2` removes the endpoint singularity.
pub fn limit_variance_box<R: Rng + ?Sized>(
    m: usize,
    r: usize,
    opts: &MomentOptions,
    rng: &mut R,
) -> Result<VarianceEstimate> {
    if (m, r) != (2, 1) {
        return Err(Error::InvalidInput("box variance is implemented for m = 2, r = 1".into()));
    }
    opts.validate()?;
    let sampler = ConditionalSampler::new(m, r, opts.n_mc, rng)?;
    limit_variance_box_with(&sampler, opts)
}

/// [`limit_variance_box`] with a caller-supplied sampler.
pub fn limit_variance_box_with(
    sampler: &ConditionalSampler,
    opts: &MomentOptions,
) -> Result<VarianceEstimate> {
    if (sampler.m, sampler.r) != (2, 1) {
        return Err(Error::InvalidInput("box variance is implemented for m = 2, r = 1".into()));
    }
    opts.validate()?;
    let gl = GaussLegendre::new(opts.nodes);
    let s_max = (2f64.sqrt() - 1.0).sqrt();
    let mapped = |count: usize| -> Vec<(f64, f64)> {
        let mut v = panels(0.0, 1.0, count, &gl);
        v.extend(
            panels(0.0, s_max, count, &gl)
                .into_iter()
                .map(|(s, w)| (2f64.sqrt() - s * s, 2.0 * s * w)),
        );
        v
    };
    let rules: Rules =
        [mapped(opts.near_panels), mapped(opts.near_panels / 2), Vec::new(), Vec::new()];
    integrate(sampler, &rules, square_distance_density, PairCorrelations::limit, opts.richardson_tol)
}
