//! Kostlan-Shub-Smale random homogeneous polynomial systems.
//!
//! Coefficients are stored densely per equation, indexed by the multi-indices
//! of weight `d` in descending lexicographic order (`(d,0,..,0)` first).
//! Evaluation is a nested sweep over that order using per-point power tables,
//! one multiply-add per monomial.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numeric::{checked_binomial, ln_factorials};
use crate::sphere::{dot, SpherePoint, TangentFrame};
use crate::{Error, Result};

/// Exponent vector `(j_0, .., j_m)` of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn weight(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// All multi-indices of length `m + 1` and weight `d`, descending lexicographic.
pub fn enumerate_multi_indices(m: usize, d: u32) -> Result<Vec<MultiIndex>> {
    if m == 0 {
        return Err(Error::InvalidInput("need m >= 1".into()));
    }
    let count = monomial_count(m, d)?;
    let mut out = Vec::with_capacity(count);
    let mut cur = vec![0u32; m + 1];
    fill(&mut out, &mut cur, 0, d);
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, k: usize, rest: u32) {
    if k + 1 == cur.len() {
        cur[k] = rest;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for j in (0..=rest).rev() {
        cur[k] = j;
        fill(out, cur, k + 1, rest - j);
    }
}

/// `C(d + m, m)`, refusing counts that do not fit in memory indices.
pub fn monomial_count(m: usize, d: u32) -> Result<usize> {
    checked_binomial(d as u64 + m as u64, m as u64)
        .and_then(|c| usize::try_from(c).ok())
        .filter(|&c| c < (1usize << 40))
        .ok_or_else(|| Error::Overflow(format!("monomial count C({}+{m}, {m}) is too large", d)))
}

/// Multi-indices of one `(m, d)` with their KSS standard deviations and the
/// index maps needed to differentiate coefficient arrays. Shared between
/// systems of the same shape.
#[derive(Debug)]
pub struct MonomialBasis {
    m: usize,
    d: u32,
    indices: Vec<MultiIndex>,
    /// `sqrt(d! / (j_0! .. j_m!))`, computed through logarithms.
    std_devs: Vec<f64>,
    /// For each variable `k`, and each degree `d - 1` monomial `i`: the
    /// position of `i + e_k` in `indices` and the factor `i_k + 1`.
    derivative_maps: Vec<Vec<(usize, f64)>>,
}

impl MonomialBasis {
    pub fn new(m: usize, d: u32) -> Result<Arc<Self>> {
        if d == 0 {
            return Err(Error::InvalidInput("degree must be positive".into()));
        }
        let indices = enumerate_multi_indices(m, d)?;
        let lf = ln_factorials(d as usize);
        let std_devs = indices
            .iter()
            .map(|j| {
                let ln_var = lf[d as usize] - j.0.iter().map(|&x| lf[x as usize]).sum::<f64>();
                let s = (0.5 * ln_var).exp();
                if s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::Overflow(format!("multinomial weight of {:?} overflows", j.0)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let position: HashMap<&[u32], usize> =
            indices.iter().enumerate().map(|(i, j)| (j.0.as_slice(), i)).collect();
        let lower = enumerate_multi_indices(m, d - 1)?;
        let derivative_maps = (0..=m)
            .map(|k| {
                lower
                    .iter()
                    .map(|i| {
                        let mut j = i.0.clone();
                        j[k] += 1;
                        (position[j.as_slice()], j[k] as f64)
                    })
                    .collect()
            })
            .collect();
        Ok(Arc::new(MonomialBasis { m, d, indices, std_devs, derivative_maps }))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// KSS variance `d! / (j_0! .. j_m!)` of the coefficient at position `i`.
    pub fn variance(&self, i: usize) -> f64 {
        self.std_devs[i] * self.std_devs[i]
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    fn position_of(&self, j: &[u32]) -> Option<usize> {
        self.indices.iter().position(|x| x.0 == j)
    }
}

/// Per-point table `t_k^j` for `k = 0..=m`, `j = 0..=d`.
struct Powers {
    stride: usize,
    data: Vec<f64>,
}

impl Powers {
    fn new(t: &[f64], d: u32) -> Self {
        let stride = d as usize + 1;
        let mut data = vec![1.0; t.len() * stride];
        for (k, &x) in t.iter().enumerate() {
            let row = &mut data[k * stride..(k + 1) * stride];
            for j in 1..stride {
                row[j] = row[j - 1] * x;
            }
        }
        Powers { stride, data }
    }

    #[inline]
    fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.stride..(k + 1) * self.stride]
    }
}

/// Sum of `c_j t^j` over weight-`n` multi-indices stored from `coeffs[*pos]`.
fn sweep(coeffs: &[f64], pos: &mut usize, k: usize, n: usize, m: usize, pw: &Powers) -> f64 {
    if k == m {
        let v = coeffs[*pos] * pw.row(m)[n];
        *pos += 1;
        return v;
    }
    if k + 1 == m {
        let (pk, pm) = (pw.row(k), pw.row(m));
        let block = &coeffs[*pos..*pos + n + 1];
        *pos += n + 1;
        let mut acc = 0.0;
        for (i, c) in block.iter().enumerate() {
            let j = n - i;
            acc += c * pk[j] * pm[i];
        }
        return acc;
    }
    let pk = pw.row(k);
    let mut acc = 0.0;
    for j in (0..=n).rev() {
        acc += pk[j] * sweep(coeffs, pos, k + 1, n - j, m, pw);
    }
    acc
}

fn eval_with(coeffs: &[f64], m: usize, degree: u32, pw: &Powers) -> f64 {
    let mut pos = 0;
    sweep(coeffs, &mut pos, 0, degree as usize, m, pw)
}

/// A sampled (or hand-built) system `Y = (Y_1, .., Y_r)` of homogeneous
/// polynomials of degree `d` in `m + 1` variables.
#[derive(Debug, Clone)]
pub struct KssSystem {
    basis: Arc<MonomialBasis>,
    r: usize,
    seed: Option<u64>,
    coeffs: Vec<Vec<f64>>,
    /// `gradient[l][k]`: coefficients of `dY_l / dt_k` over degree `d - 1` monomials.
    gradient: Vec<Vec<Vec<f64>>>,
}

impl KssSystem {
    /// Samples a KSS system from a ChaCha stream seeded with `seed`.
    pub fn sample(m: usize, d: u32, r: usize, seed: u64) -> Result<Self> {
        let basis = MonomialBasis::new(m, d)?;
        Self::sample_with_basis(&basis, r, seed)
    }

    pub fn sample_with_basis(basis: &Arc<MonomialBasis>, r: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sys = Self::sample_with_rng(basis, r, &mut rng)?;
        sys.seed = Some(seed);
        Ok(sys)
    }

    /// Samples with caller-owned randomness: coefficient `a_j ~ N(0, d! / j!)`,
    /// drawn equation by equation in basis order.
    pub fn sample_with_rng<R: Rng + ?Sized>(
        basis: &Arc<MonomialBasis>,
        r: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if basis.d < 2 {
            return Err(Error::InvalidInput("KSS systems need degree d > 1".into()));
        }
        if r == 0 || r > basis.m {
            return Err(Error::InvalidInput(format!("need 1 <= r <= m, got r = {r}, m = {}", basis.m)));
        }
        let coeffs = (0..r)
            .map(|_| {
                basis
                    .std_devs
                    .iter()
                    .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Ok(Self::assemble(basis.clone(), r, None, coeffs))
    }

    /// A system with explicit coefficient arrays (in basis order).
    pub fn from_coefficients(m: usize, d: u32, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let basis = MonomialBasis::new(m, d)?;
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("need at least one equation".into()));
        }
        for c in &coeffs {
            if c.len() != basis.len() {
                return Err(Error::DimensionMismatch { expected: basis.len(), got: c.len() });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("coefficients must be finite".into()));
            }
        }
        let r = coeffs.len();
        Ok(Self::assemble(basis, r, None, coeffs))
    }

    /// A single polynomial from sparse `(exponents, coefficient)` terms.
    pub fn from_terms(m: usize, d: u32, terms: &[(&[u32], f64)]) -> Result<Self> {
        let basis = MonomialBasis::new(m, d)?;
        let mut c = vec![0.0; basis.len()];
        for (j, v) in terms {
            let pos = basis.position_of(j).ok_or_else(|| {
                Error::InvalidInput(format!("{j:?} is not a weight-{d} exponent in {} variables", m + 1))
            })?;
            c[pos] += v;
        }
        Ok(Self::assemble(basis, 1, None, vec![c]))
    }

    fn assemble(basis: Arc<MonomialBasis>, r: usize, seed: Option<u64>, coeffs: Vec<Vec<f64>>) -> Self {
        let gradient = coeffs
            .iter()
            .map(|c| {
                basis
                    .derivative_maps
                    .iter()
                    .map(|map| map.iter().map(|&(src, f)| f * c[src]).collect())
                    .collect()
            })
            .collect();
        KssSystem { basis, r, seed, coeffs, gradient }
    }

    pub fn m(&self) -> usize {
        self.basis.m
    }

    pub fn degree(&self) -> u32 {
        self.basis.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    fn check_point(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.m() + 1 {
            return Err(Error::DimensionMismatch { expected: self.m() + 1, got: t.len() });
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("evaluation point must be finite".into()));
        }
        Ok(())
    }

    /// `Y(t)` for any `t` in `R^{m+1}`.
    pub fn evaluate(&self, t: &[f64]) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let pw = Powers::new(t, self.degree());
        Ok(self.coeffs.iter().map(|c| eval_with(c, self.m(), self.degree(), &pw)).collect())
    }

    /// `Y_l(t)` without input validation.
    #[inline]
    pub fn value_unchecked(&self, l: usize, t: &[f64]) -> f64 {
        let pw = Powers::new(t, self.degree());
        eval_with(&self.coeffs[l], self.m(), self.degree(), &pw)
    }

    /// Ambient gradient of `Y_l` at `t`.
    pub fn gradient_unchecked(&self, l: usize, t: &[f64], out: &mut [f64]) {
        let d1 = self.degree() - 1;
        let pw = Powers::new(t, d1);
        for (k, g) in self.gradient[l].iter().enumerate() {
            out[k] = eval_with(g, self.m(), d1, &pw);
        }
    }

    /// Field values and normalized tangential derivatives
    /// `Y'_l(t) . b_k / sqrt(d)` in the given frame.
    pub fn jet_on_sphere(&self, t: &SpherePoint, frame: &TangentFrame) -> Result<JetEvaluation> {
        self.check_point(t.coords())?;
        let fb = frame.base().coords();
        if fb.len() != t.coords().len() || fb.iter().zip(t.coords()).any(|(a, b)| (a - b).abs() > 1e-12) {
            return Err(Error::InvalidInput("tangent frame is based at a different point".into()));
        }
        let sd = (self.degree() as f64).sqrt();
        let mut grad = vec![0.0; self.m() + 1];
        let mut y = Vec::with_capacity(self.r);
        let mut ybar_prime = Vec::with_capacity(self.r);
        for l in 0..self.r {
            y.push(self.value_unchecked(l, t.coords()));
            self.gradient_unchecked(l, t.coords(), &mut grad);
            ybar_prime.push(frame.basis().iter().map(|b| dot(&grad, b) / sd).collect());
        }
        Ok(JetEvaluation { y, ybar_prime })
    }

    /// The restriction `phi -> Y(cos(phi) u + sin(phi) v)` to a great circle.
    pub fn restrict_to_circle<'a>(
        &'a self,
        u: &SpherePoint,
        v: &SpherePoint,
    ) -> Result<CircleRestriction<'a>> {
        let (a, b) = (u.coords(), v.coords());
        if a.len() != self.m() + 1 || b.len() != self.m() + 1 {
            return Err(Error::DimensionMismatch { expected: self.m() + 1, got: a.len().min(b.len()) });
        }
        if dot(a, b).abs() > 1e-10 {
            return Err(Error::InvalidInput("circle generators must be orthogonal".into()));
        }
        Ok(CircleRestriction { sys: self, u: a.to_vec(), v: b.to_vec() })
    }

    /// JSON serialization `{m, d, r, seed, coeffs}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&KssSystemRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: KssSystemRecord = serde_json::from_str(s)?;
        rec.try_into()
    }
}

/// Serialized form of a [`KssSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KssSystemRecord {
    pub m: usize,
    pub d: u32,
    pub r: usize,
    pub seed: Option<u64>,
    pub coeffs: Vec<Vec<f64>>,
}

impl From<&KssSystem> for KssSystemRecord {
    fn from(s: &KssSystem) -> Self {
        KssSystemRecord { m: s.m(), d: s.degree(), r: s.r, seed: s.seed, coeffs: s.coeffs.clone() }
    }
}

impl TryFrom<KssSystemRecord> for KssSystem {
    type Error = Error;

    fn try_from(rec: KssSystemRecord) -> Result<Self> {
        if rec.coeffs.len() != rec.r {
            return Err(Error::DimensionMismatch { expected: rec.r, got: rec.coeffs.len() });
        }
        let mut sys = KssSystem::from_coefficients(rec.m, rec.d, rec.coeffs)?;
        sys.seed = rec.seed;
        Ok(sys)
    }
}

/// `Y(t)` and `Y'(t) / sqrt(d)` in a tangent frame; `ybar_prime` is `r x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetEvaluation {
    pub y: Vec<f64>,
    pub ybar_prime: Vec<Vec<f64>>,
}

/// A system restricted to the great circle through orthonormal `u`, `v`.
#[derive(Debug, Clone)]
pub struct CircleRestriction<'a> {
    sys: &'a KssSystem,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl CircleRestriction<'_> {
    fn point(&self, phi: f64) -> Vec<f64> {
        let (c, s) = (phi.cos(), phi.sin());
        self.u.iter().zip(&self.v).map(|(a, b)| c * a + s * b).collect()
    }

    pub fn value(&self, phi: f64) -> Vec<f64> {
        let p = self.point(phi);
        (0..self.sys.r).map(|l| self.sys.value_unchecked(l, &p)).collect()
    }

    /// Value of equation `l` and its derivative in `phi`.
    pub fn value_and_derivative(&self, l: usize, phi: f64) -> (f64, f64) {
        let (c, s) = (phi.cos(), phi.sin());
        let p = self.point(phi);
        let mut g = vec![0.0; p.len()];
        self.sys.gradient_unchecked(l, &p, &mut g);
        let tangent: f64 = self.u.iter().zip(&self.v).zip(&g).map(|((a, b), gk)| (-s * a + c * b) * gk).sum();
        (self.sys.value_unchecked(l, &p), tangent)
    }
}

/// A scalar field on `S^m` with an ambient gradient; what the zero-set
/// estimators consume.
pub trait SphereField: Sync {
    fn ambient_dim(&self) -> usize;
    fn value(&self, t: &[f64]) -> f64;
    fn gradient(&self, t: &[f64], out: &mut [f64]);
}

impl<T: SphereField + ?Sized> SphereField for &T {
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }

    fn value(&self, t: &[f64]) -> f64 {
        (**self).value(t)
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        (**self).gradient(t, out)
    }
}

/// The first equation of a system, as a scalar field.
impl SphereField for KssSystem {
    fn ambient_dim(&self) -> usize {
        self.m() + 1
    }

    fn value(&self, t: &[f64]) -> f64 {
        self.value_unchecked(0, t)
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        self.gradient_unchecked(0, t, out)
    }
}

/// `t -> F(Q t)` for an orthogonal matrix `Q` (row-major, square).
#[derive(Debug, Clone)]
pub struct Rotated<F> {
    inner: F,
    q: Vec<Vec<f64>>,
}

impl<F: SphereField> Rotated<F> {
    pub fn new(inner: F, q: Vec<Vec<f64>>) -> Result<Self> {
        let n = inner.ambient_dim();
        if q.len() != n || q.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: q.len() });
        }
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(&q[i], &q[j]) - want).abs() > 1e-10 {
                    return Err(Error::InvalidInput("rotation matrix is not orthogonal".into()));
                }
            }
        }
        Ok(Rotated { inner, q })
    }

    fn apply(&self, t: &[f64]) -> Vec<f64> {
        self.q.iter().map(|row| dot(row, t)).collect()
    }
}

impl<F: SphereField> SphereField for Rotated<F> {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn value(&self, t: &[f64]) -> f64 {
        self.inner.value(&self.apply(t))
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; t.len()];
        self.inner.gradient(&self.apply(t), &mut g);
        // grad (F o Q) = Q^T grad F
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.q.iter().zip(&g).map(|(row, gi)| row[j] * gi).sum();
        }
    }
}

/// Hand-built polynomials with known zero sets.
pub mod fixtures {
    use super::KssSystem;

    /// `t_0 (t_0^2 + t_1^2 + t_2^2)`, degree 3: zero set is the equator `t_0 = 0`.
    pub fn equator() -> KssSystem {
        KssSystem::from_terms(2, 3, &[(&[3, 0, 0], 1.0), (&[1, 2, 0], 1.0), (&[1, 0, 2], 1.0)])
            .expect("valid fixture")
    }

    /// `t_0 t_1 (t_0^2 + t_1^2 + t_2^2)`, degree 4: two orthogonal great circles.
    pub fn two_circles() -> KssSystem {
        KssSystem::from_terms(2, 4, &[(&[3, 1, 0], 1.0), (&[1, 3, 0], 1.0), (&[1, 1, 2], 1.0)])
            .expect("valid fixture")
    }

    /// `t_0 (t_0^2 + t_1^2)` on `S^1`, degree 3: two roots.
    pub fn circle_pair() -> KssSystem {
        KssSystem::from_terms(1, 3, &[(&[3, 0], 1.0), (&[1, 2], 1.0)]).expect("valid fixture")
    }

    /// `t_0^d` in `m + 1` variables.
    pub fn pole_power(m: usize, d: u32) -> KssSystem {
        let mut j = vec![0; m + 1];
        j[0] = d;
        KssSystem::from_terms(m, d, &[(&j, 1.0)]).expect("valid fixture")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{checked_binomial, mean_and_variance};
    use crate::sphere::tangent_basis;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn enumeration_examples() {
        let j = enumerate_multi_indices(1, 2).unwrap();
        let raw: Vec<_> = j.iter().map(|x| x.0.clone()).collect();
        assert_eq!(raw, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(enumerate_multi_indices(2, 3).unwrap().len(), 10);
        let big = enumerate_multi_indices(2, 100).unwrap();
        assert_eq!(big.len() as u64, checked_binomial(102, 2).unwrap());
        assert_eq!(big.len(), 5151);
        let mut sorted = big.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), big.len());
        assert!(big.windows(2).all(|w| w[0] > w[1]));
        assert!(big.iter().all(|j| j.weight() == 100));
    }

    #[test]
    fn enumeration_refuses_overflow() {
        assert!(matches!(enumerate_multi_indices(60, 4_000_000), Err(Error::Overflow(_))));
    }

    #[test]
    fn variances() {
        let b = MonomialBasis::new(1, 2).unwrap();
        assert_relative_eq!(b.variance(0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(b.variance(1), 2.0, max_relative = 1e-14);
        let b = MonomialBasis::new(3, 40).unwrap();
        assert_relative_eq!(b.variance(0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn huge_degree_weights_stay_finite() {
        let b = MonomialBasis::new(2, 300).unwrap();
        assert!(b.std_devs().iter().all(|s| s.is_finite() && *s >= 1.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(KssSystem::sample(2, 1, 1, 0).is_err());
        assert!(KssSystem::sample(2, 4, 3, 0).is_err());
        assert!(KssSystem::sample(2, 4, 0, 0).is_err());
    }

    #[test]
    fn pole_power_evaluation() {
        let s = fixtures::pole_power(2, 3);
        assert_eq!(s.evaluate(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0]);
        let a = s.evaluate(&[0.3, -0.5, 0.2]).unwrap()[0];
        let b = s.evaluate(&[0.6, -1.0, 0.4]).unwrap()[0];
        assert_relative_eq!(b, 8.0 * a, max_relative = 1e-14);
        assert!(s.evaluate(&[f64::NAN, 0.0, 0.0]).is_err());
        assert!(s.evaluate(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn evaluation_matches_direct_sum() {
        let s = KssSystem::sample(3, 7, 2, 11).unwrap();
        let t = [0.3, -0.2, 0.5, 0.7];
        let got = s.evaluate(&t).unwrap();
        for l in 0..2 {
            let direct: f64 = s
                .basis()
                .indices()
                .iter()
                .zip(&s.coefficients()[l])
                .map(|(j, c)| c * j.0.iter().zip(&t).map(|(&e, x)| x.powi(e as i32)).product::<f64>())
                .sum();
            assert_relative_eq!(got[l], direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = KssSystem::sample(2, 9, 1, 5).unwrap();
        let t = [0.4, -0.3, 0.6];
        let mut g = [0.0; 3];
        s.gradient_unchecked(0, &t, &mut g);
        for k in 0..3 {
            let h = 1e-6;
            let mut tp = t;
            let mut tm = t;
            tp[k] += h;
            tm[k] -= h;
            let fd = (s.value_unchecked(0, &tp) - s.value_unchecked(0, &tm)) / (2.0 * h);
            assert_relative_eq!(g[k], fd, max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn jet_examples() {
        let s = fixtures::pole_power(2, 5);
        let e0 = SpherePoint::basis(2, 0);
        let jet = s.jet_on_sphere(&e0, &tangent_basis(&e0)).unwrap();
        assert!(jet.ybar_prime[0].iter().all(|x| x.abs() < 1e-14));

        // t_0 |t|^2 at e_1, derivative along e_0 is 1
        let s = fixtures::equator();
        let e1 = SpherePoint::basis(2, 1);
        let frame = TangentFrame::new(e1.clone(), vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let jet = s.jet_on_sphere(&e1, &frame).unwrap();
        assert_relative_eq!(jet.ybar_prime[0][0], 1.0 / 3f64.sqrt(), max_relative = 1e-14);
        assert!(jet.ybar_prime[0][1].abs() < 1e-15);

        let other = tangent_basis(&SpherePoint::basis(2, 2));
        assert!(s.jet_on_sphere(&e1, &other).is_err());
    }

    #[test]
    fn frame_covariance_of_jet_norm() {
        let s = KssSystem::sample(2, 12, 1, 3).unwrap();
        let t = SpherePoint::normalize(vec![0.2, 0.5, -0.7]).unwrap();
        let f1 = tangent_basis(&t);
        let (a, b) = (&f1.basis()[0], &f1.basis()[1]);
        let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
        let rot = vec![
            a.iter().zip(b).map(|(x, y)| c * x + sn * y).collect(),
            a.iter().zip(b).map(|(x, y)| -sn * x + c * y).collect(),
        ];
        let f2 = TangentFrame::new(t.clone(), rot).unwrap();
        let n1: f64 = s.jet_on_sphere(&t, &f1).unwrap().ybar_prime[0].iter().map(|x| x * x).sum();
        let n2: f64 = s.jet_on_sphere(&t, &f2).unwrap().ybar_prime[0].iter().map(|x| x * x).sum();
        assert_relative_eq!(n1.sqrt(), n2.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn circle_restriction() {
        let s = fixtures::pole_power(2, 4);
        let u = SpherePoint::basis(2, 0);
        let v = SpherePoint::basis(2, 1);
        let c = s.restrict_to_circle(&u, &v).unwrap();
        for phi in [0.0, 0.4, 1.9, 3.3] {
            assert_relative_eq!(c.value(phi)[0], phi.cos().powi(4), epsilon = 1e-14);
            assert_relative_eq!(c.value(phi)[0], c.value(phi + 2.0 * std::f64::consts::PI)[0], epsilon = 1e-12);
            let (_, dv) = c.value_and_derivative(0, phi);
            assert_relative_eq!(dv, -4.0 * phi.cos().powi(3) * phi.sin(), epsilon = 1e-12);
        }
        let w = SpherePoint::normalize(vec![1.0, 1.0, 0.0]).unwrap();
        assert!(s.restrict_to_circle(&u, &w).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let s = KssSystem::sample(2, 6, 2, 99).unwrap();
        let text = s.to_json().unwrap();
        let back = KssSystem::from_json(&text).unwrap();
        assert_eq!(back.coefficients(), s.coefficients());
        assert_eq!(back.seed(), Some(99));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["m", "d", "r", "seed", "coeffs"] {
            assert!(v.get(key).is_some());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = KssSystem::sample(2, 10, 1, 7).unwrap();
        let b = KssSystem::sample(2, 10, 1, 7).unwrap();
        let c = KssSystem::sample(2, 10, 1, 8).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        assert_ne!(a.coefficients(), c.coefficients());
    }

    #[test]
    fn rotated_field_gradient() {
        let s = KssSystem::sample(2, 5, 1, 1).unwrap();
        let (c, sn) = (0.7f64.cos(), 0.7f64.sin());
        let q = vec![vec![c, -sn, 0.0], vec![sn, c, 0.0], vec![0.0, 0.0, 1.0]];
        let rot = Rotated::new(&s, q).unwrap();
        let t = [0.1, 0.7, -0.3];
        let mut g = [0.0; 3];
        rot.gradient(&t, &mut g);
        for k in 0..3 {
            let h = 1e-6;
            let mut tp = t;
            let mut tm = t;
            tp[k] += h;
            tm[k] -= h;
            let fd = (rot.value(&tp) - rot.value(&tm)) / (2.0 * h);
            assert_relative_eq!(g[k], fd, max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn unit_variance_identity() {
        // sum_j multinomial(d; j) t^{2j} = |t|^{2d} = 1 on the sphere
        let b = MonomialBasis::new(2, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let v: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let t = SpherePoint::normalize(v).unwrap();
            let total: f64 = b
                .indices()
                .iter()
                .enumerate()
                .map(|(i, j)| {
                    b.variance(i)
                        * j.0.iter().zip(t.coords()).map(|(&e, x)| x.powi(2 * e as i32)).product::<f64>()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn empirical_field_covariance() {
        let basis = MonomialBasis::new(2, 5).unwrap();
        let s = [1.0, 0.0, 0.0];
        let theta: f64 = 0.6;
        let t = [theta.cos(), theta.sin(), 0.0];
        let n = 20_000;
        let mut prods = Vec::with_capacity(n);
        let mut sq = Vec::with_capacity(n);
        for i in 0..n {
            let sys = KssSystem::sample_with_basis(&basis, 1, 1000 + i as u64).unwrap();
            let (a, b) = (sys.value_unchecked(0, &s), sys.value_unchecked(0, &t));
            prods.push(a * b);
            sq.push(b * b);
        }
        let (mean, var) = mean_and_variance(&prods);
        let want = theta.cos().powi(5);
        assert!((mean - want).abs() < 3.0 * (var / n as f64).sqrt() + 1e-12, "{mean} vs {want}");
        let (mean, var) = mean_and_variance(&sq);
        assert!((mean - 1.0).abs() < 3.0 * (var / n as f64).sqrt());
    }

    proptest! {
        #[test]
        fn homogeneity(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, lam in 0.2f64..3.0, seed in 0u64..50) {
            let s = KssSystem::sample(2, 6, 1, seed).unwrap();
            let a = s.evaluate(&[x, y, z]).unwrap()[0];
            let b = s.evaluate(&[lam * x, lam * y, lam * z]).unwrap()[0];
            prop_assert!((b - lam.powi(6) * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}
