//! Chaos coefficients `b_alpha`, `f_beta` and `a_mu = b_alpha f_beta`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{b_alpha, hermite_coefficients, hermite_fill, multi_indices_up_to};
use crate::numeric::{factorial, gaussian_moment, lgamma, GaussHermite};
use crate::{Error, Result};

/// How `f_beta = (1 / beta!) E[f(G) H_beta(G)]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FBetaMethod {
    /// Closed form for `r = 1`, tensor Gauss-Hermite for `r m <= 4`,
    /// Monte Carlo otherwise.
    Auto,
    /// Exact expansion through chi moments; `r = 1` only.
    ClosedForm,
    /// Tensor Gauss-Hermite with `nodes` points per coordinate. The error
    /// estimate is the difference to a rule with three quarters as many nodes.
    TensorHermite { nodes: usize },
    /// Plain Monte Carlo; the error estimate is the largest standard error.
    MonteCarlo { samples: u64, seed: u64 },
}

impl FBetaMethod {
    pub const DEFAULT_NODES: usize = 40;
    pub const DEFAULT_SAMPLES: u64 = 10_000_000;

    fn resolve(self, r: usize, m: usize) -> Self {
        match self {
            FBetaMethod::Auto if r == 1 => FBetaMethod::ClosedForm,
            FBetaMethod::Auto if r * m <= 4 => FBetaMethod::TensorHermite { nodes: Self::DEFAULT_NODES },
            FBetaMethod::Auto => FBetaMethod::MonteCarlo { samples: Self::DEFAULT_SAMPLES, seed: 0 },
            other => other,
        }
    }
}

/// `sqrt(det(y y^T))` for `y` an `r x m` row-major matrix, `r <= m`.
pub(crate) fn gram_sqrt_det(y: &[f64], r: usize, m: usize) -> f64 {
    if r == 1 {
        return y.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let mut g = vec![0.0; r * r];
    for i in 0..r {
        for j in 0..=i {
            let v: f64 = (0..m).map(|k| y[i * m + k] * y[j * m + k]).sum();
            g[i * r + j] = v;
            g[j * r + i] = v;
        }
    }
    // Cholesky; the determinant is the squared product of the pivots.
    let mut det_sqrt = 1.0;
    for k in 0..r {
        let p = g[k * r + k];
        if p <= 0.0 {
            return 0.0;
        }
        let sp = p.sqrt();
        det_sqrt *= sp;
        for i in k + 1..r {
            g[i * r + k] /= sp;
        }
        for i in k + 1..r {
            for j in k + 1..=i {
                g[i * r + j] -= g[i * r + k] * g[j * r + k];
            }
        }
    }
    det_sqrt
}

/// `E[f(G)^2] = E det(G G^T) = m! / (m - r)!` for `G` standard `r x m`.
pub fn f_norm_squared(r: usize, m: usize) -> f64 {
    ((m - r + 1)..=m).map(|k| k as f64).product()
}

/// Whether the sign-flip symmetries of rows and columns force `f_beta = 0`.
fn parity_zero(beta: &[u32], r: usize, m: usize) -> bool {
    (0..r).any(|l| (0..m).map(|j| beta[l * m + j]).sum::<u32>() % 2 == 1)
        || (0..m).any(|j| (0..r).map(|l| beta[l * m + j]).sum::<u32>() % 2 == 1)
}

fn beta_factorial(beta: &[u32]) -> f64 {
    beta.iter().map(|&b| factorial(b)).product()
}

/// `E[||G|| G^gamma]` for `G ~ N(0, I_m)`: `prod (gamma_j - 1)!! * sqrt(2) Gamma((m+|gamma|+1)/2) / Gamma((m+|gamma|)/2)`.
fn chi_weighted_moment(gamma: &[u32], m: usize) -> f64 {
    if gamma.iter().any(|g| g % 2 == 1) {
        return 0.0;
    }
    let total: u32 = gamma.iter().sum();
    let k = m as f64 + total as f64;
    let ratio = (0.5 * std::f64::consts::LN_2 + lgamma(0.5 * (k + 1.0)) - lgamma(0.5 * k)).exp();
    gamma.iter().map(|&g| gaussian_moment(g)).product::<f64>() * ratio
}

fn closed_form(beta: &[u32], m: usize) -> f64 {
    let coeffs: Vec<Vec<f64>> = beta.iter().map(|&b| hermite_coefficients(b)).collect();
    // gamma_j runs over the exponents of H_{beta_j}, which share its parity.
    let mut gamma: Vec<u32> = beta.iter().map(|b| b % 2).collect();
    let mut acc = 0.0;
    'outer: loop {
        let c: f64 = (0..m).map(|j| coeffs[j][gamma[j] as usize]).product();
        acc += c * chi_weighted_moment(&gamma, m);
        let mut j = 0;
        loop {
            if j == m {
                break 'outer;
            }
            if gamma[j] + 2 <= beta[j] {
                gamma[j] += 2;
                break;
            }
            gamma[j] = beta[j] % 2;
            j += 1;
        }
    }
    acc / beta_factorial(beta)
}

/// `E[f(G) prod_k H_{beta_k}(G_k)]` for every `beta` in `betas` by a tensor
/// Gauss-Hermite rule, contracting one axis at a time.
fn tensor_hermite(betas: &[Vec<u32>], r: usize, m: usize, nodes: usize) -> Vec<f64> {
    let n = r * m;
    let top = betas.iter().flatten().copied().max().unwrap_or(0) as usize;
    let gh = GaussHermite::new(nodes);
    let total = nodes.pow(n as u32);
    let mut tensor = Vec::with_capacity(total);
    let mut y = vec![0.0; n];
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        for k in 0..n {
            y[k] = gh.nodes[idx[k]];
        }
        tensor.push(gram_sqrt_det(&y, r, m));
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
        }
    }
    // proj[p][i] = w_i H_p(x_i)
    let mut h = Vec::new();
    let proj: Vec<Vec<f64>> = {
        let mut p = vec![vec![0.0; nodes]; top + 1];
        for i in 0..nodes {
            hermite_fill(gh.nodes[i], &mut h, top as u32);
            for (deg, row) in p.iter_mut().enumerate() {
                row[i] = gh.weights[i] * h[deg];
            }
        }
        p
    };
    // Contract the last axis and prepend the Hermite axis; after n steps the
    // axes are (beta_1, .., beta_n) in order.
    let mut rest = total / nodes;
    let mut data = tensor;
    for step in 0..n {
        let outer = top + 1;
        let mut next = vec![0.0; outer * rest];
        for a in 0..rest {
            let row = &data[a * nodes..(a + 1) * nodes];
            for (p, pr) in proj.iter().enumerate() {
                next[p * rest + a] = row.iter().zip(pr).map(|(x, w)| x * w).sum();
            }
        }
        data = next;
        if step + 1 < n {
            // The new layout is (p, remaining axes..., last remaining axis of length `nodes`).
            rest = rest / nodes * outer;
        }
    }
    let stride = top + 1;
    betas
        .iter()
        .map(|b| {
            let flat = b.iter().fold(0usize, |acc, &x| acc * stride + x as usize);
            data[flat]
        })
        .collect()
}

/// Monte Carlo estimates and standard errors of `E[f(G) H_beta(G)]`.
fn monte_carlo(betas: &[Vec<u32>], r: usize, m: usize, samples: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let n = r * m;
    let top = betas.iter().flatten().copied().max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; betas.len()];
    let mut sq = vec![0.0; betas.len()];
    let mut y = vec![0.0; n];
    let mut h: Vec<Vec<f64>> = vec![Vec::new(); n];
    for _ in 0..samples {
        for k in 0..n {
            y[k] = rng.sample(StandardNormal);
            hermite_fill(y[k], &mut h[k], top);
        }
        let f = gram_sqrt_det(&y, r, m);
        for (i, b) in betas.iter().enumerate() {
            let v = f * b.iter().enumerate().map(|(k, &p)| h[k][p as usize]).product::<f64>();
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    let s = samples as f64;
    let means: Vec<f64> = sum.iter().map(|x| x / s).collect();
    let se = means.iter().zip(&sq).map(|(mu, q)| ((q / s - mu * mu).max(0.0) / s).sqrt()).collect();
    (means, se)
}

/// `f_beta` for each `beta` (row-major `r x m`), with the parity zeros
/// enforced exactly, plus an absolute error estimate for each value.
fn f_values(betas: &[Vec<u32>], r: usize, m: usize, method: FBetaMethod) -> Result<(Vec<f64>, Vec<f64>)> {
    if r == 0 || r > m {
        return Err(Error::InvalidInput(format!("need 1 <= r <= m, got r = {r}, m = {m}")));
    }
    if let Some(b) = betas.iter().find(|b| b.len() != r * m) {
        return Err(Error::DimensionMismatch { expected: r * m, got: b.len() });
    }
    let live: Vec<Vec<u32>> = betas.iter().filter(|b| !parity_zero(b, r, m)).cloned().collect();
    let (vals, errs): (Vec<f64>, Vec<f64>) = match method.resolve(r, m) {
        FBetaMethod::ClosedForm => {
            if r != 1 {
                return Err(Error::InvalidInput("the closed form needs r = 1".into()));
            }
            (live.iter().map(|b| closed_form(b, m)).collect(), vec![0.0; live.len()])
        }
        FBetaMethod::TensorHermite { nodes } => {
            if nodes < 4 {
                return Err(Error::InvalidInput("need at least 4 Gauss-Hermite nodes".into()));
            }
            if (nodes as f64).powi((r * m) as i32) > 5e7 {
                return Err(Error::InvalidInput(format!(
                    "{nodes}^{} tensor nodes is too many; use Monte Carlo",
                    r * m
                )));
            }
            let fine = tensor_hermite(&live, r, m, nodes);
            let coarse = tensor_hermite(&live, r, m, (3 * nodes).div_ceil(4));
            let scale: Vec<f64> = live.iter().map(|b| beta_factorial(b)).collect();
            (
                fine.iter().zip(&scale).map(|(v, s)| v / s).collect(),
                fine.iter().zip(&coarse).zip(&scale).map(|((a, b), s)| (a - b).abs() / s).collect(),
            )
        }
        FBetaMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidInput("need at least two samples".into()));
            }
            let (mean, se) = monte_carlo(&live, r, m, samples, seed);
            let scale: Vec<f64> = live.iter().map(|b| beta_factorial(b)).collect();
            (
                mean.iter().zip(&scale).map(|(v, s)| v / s).collect(),
                se.iter().zip(&scale).map(|(v, s)| v / s).collect(),
            )
        }
        FBetaMethod::Auto => unreachable!("resolved above"),
    };
    if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
        return Err(Error::Integration(format!("f_beta evaluated to {v}")));
    }
    let mut it = vals.into_iter().zip(errs);
    Ok(betas
        .iter()
        .map(|b| if parity_zero(b, r, m) { (0.0, 0.0) } else { it.next().expect("one value per live index") })
        .unzip())
}

/// `f_beta = (1 / beta!) E[sqrt(det(G G^T)) H_beta(G)]`, `beta` row-major `r x m`.
pub fn f_beta(beta: &[u32], r: usize, m: usize, method: FBetaMethod) -> Result<f64> {
    Ok(f_values(&[beta.to_vec()], r, m, method)?.0[0])
}

/// One multi-index `mu = (alpha, beta)` with its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosEntry {
    pub alpha: Vec<u32>,
    /// Row-major `r x m`.
    pub beta: Vec<u32>,
    pub order: u32,
    pub b: f64,
    pub f: f64,
    pub a: f64,
    /// `mu! = alpha! beta!`
    pub mu_factorial: f64,
}

/// All coefficients up to a truncation order.
#[derive(Debug, Clone)]
pub struct ChaosCoefficientTable {
    r: usize,
    m: usize,
    q_max: u32,
    method: FBetaMethod,
    b: BTreeMap<Vec<u32>, f64>,
    f: BTreeMap<Vec<u32>, f64>,
    f_error: BTreeMap<Vec<u32>, f64>,
    entries: Vec<ChaosEntry>,
    nonzero_by_order: Vec<Vec<usize>>,
}

impl ChaosCoefficientTable {
    pub const DEFAULT_Q_MAX: u32 = 8;

    pub fn build(r: usize, m: usize, q_max: u32, method: FBetaMethod) -> Result<Self> {
        let betas = multi_indices_up_to(r * m, q_max);
        let (fv, fe) = f_values(&betas, r, m, method)?;
        let f: BTreeMap<_, _> = betas.iter().cloned().zip(fv).collect();
        let f_error: BTreeMap<_, _> = betas.iter().cloned().zip(fe).collect();
        let b: BTreeMap<_, _> = multi_indices_up_to(r, q_max).into_iter().map(|a| {
            let v = b_alpha(&a);
            (a, v)
        }).collect();
        Ok(Self::assemble(r, m, q_max, method.resolve(r, m), b, f, f_error))
    }

    fn assemble(
        r: usize,
        m: usize,
        q_max: u32,
        method: FBetaMethod,
        b: BTreeMap<Vec<u32>, f64>,
        f: BTreeMap<Vec<u32>, f64>,
        f_error: BTreeMap<Vec<u32>, f64>,
    ) -> Self {
        let mut entries = Vec::new();
        let mut nonzero_by_order = vec![Vec::new(); q_max as usize + 1];
        for mu in multi_indices_up_to(r + r * m, q_max) {
            let (alpha, beta) = mu.split_at(r);
            let bv = b[alpha];
            let fv = f[beta];
            let order: u32 = mu.iter().sum();
            if bv * fv != 0.0 {
                nonzero_by_order[order as usize].push(entries.len());
            }
            entries.push(ChaosEntry {
                alpha: alpha.to_vec(),
                beta: beta.to_vec(),
                order,
                b: bv,
                f: fv,
                a: bv * fv,
                mu_factorial: mu.iter().map(|&x| factorial(x)).product(),
            });
        }
        ChaosCoefficientTable { r, m, q_max, method, b, f, f_error, entries, nonzero_by_order }
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q_max(&self) -> u32 {
        self.q_max
    }

    pub fn method(&self) -> FBetaMethod {
        self.method
    }

    pub fn b(&self, alpha: &[u32]) -> Option<f64> {
        self.b.get(alpha).copied()
    }

    pub fn f(&self, beta: &[u32]) -> Option<f64> {
        self.f.get(beta).copied()
    }

    /// Largest absolute error estimate over the `f_beta` values.
    pub fn f_error(&self) -> f64 {
        self.f_error.values().fold(0.0, |a, &b| a.max(b))
    }

    pub fn f_error_of(&self, beta: &[u32]) -> Option<f64> {
        self.f_error.get(beta).copied()
    }

    pub fn entries(&self) -> &[ChaosEntry] {
        &self.entries
    }

    /// Entries of order `q` with nonzero `a_mu`.
    pub fn nonzero_of_order(&self, q: u32) -> Result<impl Iterator<Item = &ChaosEntry>> {
        self.check_order(q)?;
        Ok(self.nonzero_by_order[q as usize].iter().map(|&i| &self.entries[i]))
    }

    pub(crate) fn check_order(&self, q: u32) -> Result<()> {
        if q > self.q_max {
            return Err(Error::TableTooSmall { needed: q, available: self.q_max });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let key = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let bkey = |beta: &[u32]| beta.chunks(self.m).map(key).collect::<Vec<_>>().join(";");
        let rec = ChaosTableRecord {
            r: self.r,
            m: self.m,
            q_max: self.q_max,
            method: self.method,
            b: self.b.iter().map(|(k, v)| (key(k), *v)).collect(),
            f: self.f.iter().map(|(k, v)| (bkey(k), *v)).collect(),
            f_error: self.f_error.iter().map(|(k, v)| (bkey(k), *v)).collect(),
            a: self.entries.iter().map(|e| (format!("{}|{}", key(&e.alpha), bkey(&e.beta)), e.a)).collect(),
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: ChaosTableRecord = serde_json::from_str(s)?;
        let parse = |k: &str| -> Result<Vec<u32>> {
            k.split([',', ';'])
                .filter(|p| !p.is_empty())
                .map(|p| p.trim().parse::<u32>().map_err(|e| Error::InvalidInput(format!("bad index {k:?}: {e}"))))
                .collect()
        };
        let map = |m: &BTreeMap<String, f64>, len: usize| -> Result<BTreeMap<Vec<u32>, f64>> {
            m.iter()
                .map(|(k, v)| {
                    let idx = parse(k)?;
                    if idx.len() != len {
                        return Err(Error::DimensionMismatch { expected: len, got: idx.len() });
                    }
                    Ok((idx, *v))
                })
                .collect()
        };
        let b = map(&rec.b, rec.r)?;
        let f = map(&rec.f, rec.r * rec.m)?;
        let f_error = map(&rec.f_error, rec.r * rec.m)?;
        for alpha in multi_indices_up_to(rec.r, rec.q_max) {
            if !b.contains_key(&alpha) {
                return Err(Error::InvalidInput(format!("missing b entry {alpha:?}")));
            }
        }
        for beta in multi_indices_up_to(rec.r * rec.m, rec.q_max) {
            if !f.contains_key(&beta) {
                return Err(Error::InvalidInput(format!("missing f entry {beta:?}")));
            }
        }
        let table = Self::assemble(rec.r, rec.m, rec.q_max, rec.method, b, f, f_error);
        for e in &table.entries {
            let key = format!(
                "{}|{}",
                e.alpha.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                e.beta.chunks(rec.m).map(|c| c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")).collect::<Vec<_>>().join(";")
            );
            match rec.a.get(&key) {
                Some(&a) if a == e.a => {}
                other => {
                    return Err(Error::Consistency(format!("a entry {key} is {other:?}, b * f gives {}", e.a)));
                }
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChaosTableRecord {
    r: usize,
    m: usize,
    q_max: u32,
    method: FBetaMethod,
    b: BTreeMap<String, f64>,
    f: BTreeMap<String, f64>,
    f_error: BTreeMap<String, f64>,
    a: BTreeMap<String, f64>,
}
