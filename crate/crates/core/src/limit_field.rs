//! The local scaling limit of a KSS equation: the stationary Gaussian field
//! on `R^m` with covariance `exp(-|u - v|^2 / 2)`.
//!
//! Fields are sampled as random waves
//! `X(u) = sqrt(2/N) sum_k cos(w_k . u + phi_k)` with standard normal `w_k`
//! and uniform `phi_k`, whose covariance is exactly the Gaussian kernel for
//! every `N`; the marginals are Gaussian only as `N` grows.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::Serialize;

use crate::numeric::{pairwise_sum, GaussLegendre};
use crate::volume::{VolumeEstimate, VolumeMethod};
use crate::{Error, Result};

/// Fewest waves accepted by [`sample_field`].
pub const MIN_WAVES: usize = 64;
pub const DEFAULT_WAVES: usize = 256;
/// Fewest grid cells per side accepted by [`nodal_length_box`].
pub const MIN_GRID: usize = 64;
pub const DEFAULT_GRID: usize = 128;

/// A sum of `n_waves` plane waves in `R^m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomWaveField {
    m: usize,
    /// Row-major `n_waves x m`.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    amplitude: f64,
}

/// Draw a random-wave field with `n_waves >= 64` waves.
pub fn sample_field<R: Rng + ?Sized>(m: usize, n_waves: usize, rng: &mut R) -> Result<RandomWaveField> {
    if m == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if n_waves < MIN_WAVES {
        return Err(Error::InvalidInput(format!("need at least {MIN_WAVES} waves, got {n_waves}")));
    }
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let mut frequencies = Vec::with_capacity(n_waves * m);
    let mut phases = Vec::with_capacity(n_waves);
    for _ in 0..n_waves {
        for _ in 0..m {
            frequencies.push(rng.sample(StandardNormal));
        }
        phases.push(rng.sample(phase));
    }
    Ok(RandomWaveField { m, frequencies, phases, amplitude: (2.0 / n_waves as f64).sqrt() })
}

impl RandomWaveField {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_waves(&self) -> usize {
        self.phases.len()
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn frequency(&self, k: usize) -> &[f64] {
        &self.frequencies[k * self.m..(k + 1) * self.m]
    }

    fn arg(&self, k: usize, u: &[f64]) -> f64 {
        self.frequency(k).iter().zip(u).map(|(w, x)| w * x).sum::<f64>() + self.phases[k]
    }

    pub fn value(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(self.value_unchecked(u))
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let mut g = vec![0.0; self.m];
        for k in 0..self.n_waves() {
            let s = self.arg(k, u).sin();
            for (gi, w) in g.iter_mut().zip(self.frequency(k)) {
                *gi -= w * s;
            }
        }
        g.iter_mut().for_each(|x| *x *= self.amplitude);
        Ok(g)
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: u.len() });
        }
        Ok(())
    }

    fn value_unchecked(&self, u: &[f64]) -> f64 {
        self.amplitude * (0..self.n_waves()).map(|k| self.arg(k, u).cos()).sum::<f64>()
    }
}

/// A real field on the plane, evaluated on square grids.
pub trait PlanarField: Sync {
    fn value_2d(&self, u: [f64; 2]) -> f64;

    /// Values at `origin + i h ex + j h ey` for `0 <= i, j <= n`, indexed
    /// `i * (n + 1) + j`.
    fn grid(&self, origin: [f64; 2], ex: [f64; 2], ey: [f64; 2], h: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity((n + 1) * (n + 1));
        for i in 0..=n {
            for j in 0..=n {
                let (a, b) = (i as f64 * h, j as f64 * h);
                out.push(self.value_2d([
                    origin[0] + a * ex[0] + b * ey[0],
                    origin[1] + a * ex[1] + b * ey[1],
                ]));
            }
        }
        out
    }
}

impl PlanarField for RandomWaveField {
    fn value_2d(&self, u: [f64; 2]) -> f64 {
        assert_eq!(self.m, 2, "planar evaluation of a field on R^{}", self.m);
        self.value_unchecked(&u)
    }

    /// Separable evaluation: each wave is `Re(a_i b_j)` with
    /// `a_i = exp(i (w . origin + phi + i h w . ex))` and `b_j = exp(i j h w . ey)`.
    fn grid(&self, origin: [f64; 2], ex: [f64; 2], ey: [f64; 2], h: f64, n: usize) -> Vec<f64> {
        assert_eq!(self.m, 2, "planar evaluation of a field on R^{}", self.m);
        let side = n + 1;
        let mut out = vec![0.0; side * side];
        let (mut a_re, mut a_im) = (vec![0.0; side], vec![0.0; side]);
        let (mut b_re, mut b_im) = (vec![0.0; side], vec![0.0; side]);
        for k in 0..self.n_waves() {
            let w = self.frequency(k);
            let base = w[0] * origin[0] + w[1] * origin[1] + self.phases[k];
            let ax = h * (w[0] * ex[0] + w[1] * ex[1]);
            let ay = h * (w[0] * ey[0] + w[1] * ey[1]);
            for i in 0..side {
                let (s, c) = (base + i as f64 * ax).sin_cos();
                a_re[i] = c;
                a_im[i] = s;
                let (s, c) = (i as f64 * ay).sin_cos();
                b_re[i] = c;
                b_im[i] = s;
            }
            for i in 0..side {
                let row = &mut out[i * side..(i + 1) * side];
                let (ar, ai) = (a_re[i], a_im[i]);
                for ((o, br), bi) in row.iter_mut().zip(&b_re).zip(&b_im) {
                    *o += ar * br - ai * bi;
                }
            }
        }
        out.iter_mut().for_each(|x| *x *= self.amplitude);
        out
    }
}

impl<F: Fn([f64; 2]) -> f64 + Sync> PlanarField for F {
    fn value_2d(&self, u: [f64; 2]) -> f64 {
        self(u)
    }
}

/// A square window: centre, side length and rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarBox {
    pub center: [f64; 2],
    pub side: f64,
    pub angle: f64,
}

impl Default for PlanarBox {
    /// `[-1/2, 1/2]^2`.
    fn default() -> Self {
        PlanarBox { center: [0.0, 0.0], side: 1.0, angle: 0.0 }
    }
}

impl PlanarBox {
    fn frame(&self) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (s, c) = self.angle.sin_cos();
        let ex = [c, s];
        let ey = [-s, c];
        let half = 0.5 * self.side;
        let origin = [
            self.center[0] - half * (ex[0] + ey[0]),
            self.center[1] - half * (ex[1] + ey[1]),
        ];
        (origin, ex, ey)
    }
}

/// Marching-squares length of the zero set of `values` on an
/// `(n + 1) x (n + 1)` grid of spacing `h`, reading every `step`-th point.
/// Zero values count as positive. Saddle cells are resolved by the sign of
/// the mean of their corners.
fn marching_squares(values: &[f64], n: usize, step: usize, h: f64) -> f64 {
    let side = n + 1;
    let at = |i: usize, j: usize| values[i * step * side + j * step];
    let cells = n / step;
    let hs = h * step as f64;
    let cross = |a: f64, b: f64| a / (a - b);
    let mut lengths = Vec::with_capacity(cells);
    for i in 0..cells {
        let mut row = 0.0;
        for j in 0..cells {
            let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let pos = v.map(|x| x >= 0.0);
            // Edges in order: bottom (00-10), right (10-11), top (11-01), left (01-00),
            // with x along i and y along j in cell units.
            let mut pts: [Option<[f64; 2]>; 4] = [None; 4];
            if pos[0] != pos[1] {
                pts[0] = Some([cross(v[0], v[1]), 0.0]);
            }
            if pos[1] != pos[2] {
                pts[1] = Some([1.0, cross(v[1], v[2])]);
            }
            if pos[2] != pos[3] {
                pts[2] = Some([1.0 - cross(v[2], v[3]), 1.0]);
            }
            if pos[3] != pos[0] {
                pts[3] = Some([0.0, 1.0 - cross(v[3], v[0])]);
            }
            let dist = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            let found: Vec<[f64; 2]> = pts.iter().flatten().copied().collect();
            row += match found.len() {
                0 => 0.0,
                2 => dist(found[0], found[1]),
                _ => {
                    let [b, r, t, l] = pts.map(|p| p.expect("saddle cells cross every edge"));
                    let centre_pos = v.iter().sum::<f64>() >= 0.0;
                    if centre_pos == pos[0] {
                        // Corners 10 and 01 are cut off.
                        dist(b, r) + dist(t, l)
                    } else {
                        dist(b, l) + dist(t, r)
                    }
                }
            };
        }
        lengths.push(row * hs);
    }
    pairwise_sum(&lengths)
}

/// Length of the nodal line of a planar field inside `window`, by marching
/// squares with linear edge interpolation on an `n x n` grid (`n >= 64`,
/// even). The error estimate is the change from the `n/2` grid.
pub fn nodal_length_box<F: PlanarField + ?Sized>(
    field: &F,
    n: usize,
    window: &PlanarBox,
) -> Result<VolumeEstimate> {
    if n < MIN_GRID || n % 2 == 1 {
        return Err(Error::InvalidInput(format!("grid must be even and at least {MIN_GRID}, got {n}")));
    }
    if !(window.side > 0.0) {
        return Err(Error::InvalidInput("box side must be positive".into()));
    }
    let (origin, ex, ey) = window.frame();
    let h = window.side / n as f64;
    let values = field.grid(origin, ex, ey, h, n);
    let fine = marching_squares(&values, n, 1, h);
    let coarse = marching_squares(&values, n, 2, h);
    Ok(VolumeEstimate {
        value: fine,
        method: VolumeMethod::MarchingSquares,
        error_estimate: (fine - coarse).abs(),
        mesh_level: None,
        n_circles: None,
    })
}

/// Hessian of the covariance `Gamma(u) = exp(-|u|^2/2)`:
/// `e^{-|u|^2/2} H_1(u_i) H_1(u_j)` off the diagonal and
/// `e^{-|u|^2/2} H_2(u_i)` on it, with `H_1(x) = x` and `H_2(x) = x^2 - 1`.
pub fn covariance_hessian(u: &[f64]) -> Vec<Vec<f64>> {
    let g = (-0.5 * u.iter().map(|x| x * x).sum::<f64>()).exp();
    (0..u.len())
        .map(|i| {
            (0..u.len())
                .map(|j| if i == j { g * (u[i] * u[i] - 1.0) } else { g * u[i] * u[j] })
                .collect()
        })
        .collect()
}

/// Quadrature nodes and weights on `S^{m-1}` in hyperspherical angles:
/// Gauss-Legendre in each polar angle (weight `sin^{m-1-k}`) and the
/// trapezoid rule in the azimuth.
fn sphere_rule(m: usize, nodes: usize) -> Vec<(Vec<f64>, f64)> {
    if m == 1 {
        return vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)];
    }
    let gl = GaussLegendre::new(nodes);
    let az = 2 * nodes;
    let mut out = vec![(Vec::new(), 1.0)];
    // Polar angles theta_1 .. theta_{m-2}.
    let mut angles: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for k in 0..m - 2 {
        let power = (m - 2 - k) as i32;
        angles = angles
            .into_iter()
            .flat_map(|(th, w)| {
                gl.mapped(0.0, PI)
                    .map(move |(t, wt)| {
                        let mut th = th.clone();
                        th.push(t);
                        (th, w * wt * t.sin().powi(power))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out.clear();
    for (th, w) in angles {
        for a in 0..az {
            let phi = 2.0 * PI * a as f64 / az as f64;
            let mut x = Vec::with_capacity(m);
            let mut sp = 1.0;
            for &t in &th {
                x.push(sp * t.cos());
                sp *= t.sin();
            }
            x.push(sp * phi.cos());
            x.push(sp * phi.sin());
            out.push((x, w * 2.0 * PI / az as f64));
        }
    }
    out
}

/// `int_{|u| < delta} ||Gamma''(u) - Gamma''(0)||_F / |u|^m du`, written as
/// `int_0^delta (1/rho) int_{S^{m-1}} ||Gamma''(rho w) - Gamma''(0)||_F dw d rho`.
/// The inner norm is `O(rho^2)`, so the integral is finite.
pub fn ef_integrability_check(delta: f64, m: usize) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, 1]")));
    }
    if m == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let rule = sphere_rule(m, 12);
    let gl = GaussLegendre::new(24);
    let hess0 = covariance_hessian(&vec![0.0; m]);
    let inner = |rho: f64| -> f64 {
        let terms: Vec<f64> = rule
            .iter()
            .map(|(w, wt)| {
                let u: Vec<f64> = w.iter().map(|x| rho * x).collect();
                let h = covariance_hessian(&u);
                let fro = h
                    .iter()
                    .zip(&hess0)
                    .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
                    .sum::<f64>()
                    .sqrt();
                wt * fro
            })
            .collect();
        pairwise_sum(&terms) / rho
    };
    let v = gl.integrate_panels(0.0, delta, 4, inner);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Integration(format!("integrability integral is not finite: {v}")))
    }
}
