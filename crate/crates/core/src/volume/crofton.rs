use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use super::{VolumeEstimate, VolumeMethod};
use crate::kss::{KssSystem, SphereField};
use crate::numeric::mean_and_variance;
use crate::sphere::SpherePoint;
use crate::{Error, Result};

/// Grid used to bracket roots of a periodic function on `[0, 2 pi)`.
#[derive(Debug, Clone, Copy)]
pub struct RootGrid {
    pub points: usize,
    /// Global grid doublings tried while some cell stays ambiguous.
    pub max_doublings: u32,
    /// Depth of the local bisection that settles cells still ambiguous after
    /// the doublings.
    pub max_local_depth: u32,
}

impl RootGrid {
    pub fn new(points: usize) -> Self {
        RootGrid { points, max_doublings: 3, max_local_depth: 40 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    x: f64,
    v: f64,
    g: f64,
}

fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Whether the cubic Hermite interpolant on the cell could hide more roots
/// than the endpoint signs show.
fn ambiguous(a: &Sample, b: &Sample) -> bool {
    let h = b.x - a.x;
    let (sa, sb) = (positive(a.v), positive(b.v));
    if sa != sb {
        // One crossing expected: the slope should point from one sign to the other throughout.
        let dir = if sa { -1.0 } else { 1.0 };
        return a.g * dir < 0.0 || b.g * dir < 0.0;
    }
    let s = if sa { 1.0 } else { -1.0 };
    // Heading toward zero at the left end and away at the right end: an interior extremum.
    if !(s * a.g < 0.0 || s * b.g > 0.0) {
        return false;
    }
    // Minimum of s * p(t) over the cell, sampled densely (cheap; no field evaluations).
    let (p0, p1, m0, m1) = (s * a.v, s * b.v, s * a.g * h, s * b.g * h);
    let mut lo = p0.min(p1);
    for k in 1..32 {
        let t = k as f64 / 32.0;
        let (t2, t3) = (t * t, t * t * t);
        let p = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        lo = lo.min(p);
    }
    // Ambiguous when the interpolant dips close to (or below) zero.
    lo < 0.25 * p0.min(p1)
}

fn sign_changes(a: &Sample, b: &Sample) -> usize {
    usize::from(positive(a.v) != positive(b.v))
}

/// Settles one cell by recursive bisection until every piece is unambiguous.
fn resolve<F: Fn(f64) -> (f64, f64)>(f: &F, a: Sample, b: Sample, depth: u32, max_depth: u32) -> Result<usize> {
    if !ambiguous(&a, &b) {
        return Ok(sign_changes(&a, &b));
    }
    if depth >= max_depth {
        return Err(Error::RootIsolation(format!(
            "cell [{}, {}] still ambiguous after {max_depth} bisections (values {}, {})",
            a.x, b.x, a.v, b.v
        )));
    }
    let x = 0.5 * (a.x + b.x);
    let (v, g) = f(x);
    let mid = Sample { x, v, g };
    Ok(resolve(f, a, mid, depth + 1, max_depth)? + resolve(f, mid, b, depth + 1, max_depth)?)
}

/// Number of zeros on `[0, 2 pi)` of a smooth periodic function given with its
/// derivative. Values exactly zero count as positive.
///
/// Sign changes on a uniform grid are counted. Cells whose endpoint slopes
/// allow hidden root pairs trigger a global doubling of the grid (up to
/// `max_doublings` times) and are then settled by local bisection.
pub fn count_roots_periodic<F: Fn(f64) -> (f64, f64)>(f: F, grid: RootGrid) -> Result<usize> {
    if grid.points < 4 {
        return Err(Error::InvalidInput("root grid needs at least 4 points".into()));
    }
    let mut n = grid.points;
    let mut doublings = 0;
    loop {
        let samples: Vec<Sample> = (0..=n)
            .map(|k| {
                let x = TAU * k as f64 / n as f64;
                let (v, g) = if k == n { f(0.0) } else { f(x) };
                if !(v.is_finite() && g.is_finite()) {
                    return Err(Error::InvalidInput(format!("non-finite function value at {x}")));
                }
                Ok(Sample { x, v, g })
            })
            .collect::<Result<_>>()?;
        let any_ambiguous = samples.windows(2).any(|w| ambiguous(&w[0], &w[1]));
        if !any_ambiguous || doublings >= grid.max_doublings {
            let mut count = 0;
            for w in samples.windows(2) {
                count += resolve(&f, w[0], w[1], 0, grid.max_local_depth)?;
            }
            return Ok(count);
        }
        n *= 2;
        doublings += 1;
    }
}

/// A uniformly random great circle of `S^m`: Gram-Schmidt on two
/// independent standard Gaussian vectors.
pub fn random_great_circle<R: Rng + ?Sized>(m: usize, rng: &mut R) -> (SpherePoint, SpherePoint) {
    loop {
        let a: Vec<f64> = (0..=m).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..=m).map(|_| rng.sample(StandardNormal)).collect();
        let Ok(u) = SpherePoint::normalize(a) else { continue };
        let proj: f64 = u.coords().iter().zip(&b).map(|(x, y)| x * y).sum();
        let w: Vec<f64> = b.iter().zip(u.coords()).map(|(y, x)| y - proj * x).collect();
        if let Ok(v) = SpherePoint::normalize(w) {
            // One more projection pass removes rounding drift.
            let p2: f64 = u.coords().iter().zip(v.coords()).map(|(x, y)| x * y).sum();
            let w2: Vec<f64> = v.coords().iter().zip(u.coords()).map(|(y, x)| y - p2 * x).collect();
            if let Ok(v) = SpherePoint::normalize(w2) {
                return (u, v);
            }
        }
    }
}

fn restricted<'a, F: SphereField>(field: &'a F, u: &'a [f64], v: &'a [f64]) -> impl Fn(f64) -> (f64, f64) + 'a {
    move |phi: f64| {
        let (s, c) = phi.sin_cos();
        let p: Vec<f64> = u.iter().zip(v).map(|(a, b)| c * a + s * b).collect();
        let t: Vec<f64> = u.iter().zip(v).map(|(a, b)| -s * a + c * b).collect();
        let mut g = vec![0.0; p.len()];
        field.gradient(&p, &mut g);
        (field.value(&p), g.iter().zip(&t).map(|(x, y)| x * y).sum())
    }
}

/// Zero-set length on `S^2` by Crofton's formula: `pi` times the mean number
/// of intersections with uniformly random great circles.
pub fn zero_volume_crofton<F: SphereField, R: Rng + ?Sized>(
    field: &F,
    degree: u32,
    n_circles: usize,
    rng: &mut R,
) -> Result<VolumeEstimate> {
    if field.ambient_dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: field.ambient_dim() });
    }
    if n_circles < 100 {
        return Err(Error::InvalidInput("Crofton needs at least 100 circles".into()));
    }
    let grid = RootGrid::new(8 * degree as usize);
    let mut counts = Vec::with_capacity(n_circles);
    for _ in 0..n_circles {
        let (u, v) = random_great_circle(2, rng);
        counts.push(count_roots_periodic(restricted(field, u.coords(), v.coords()), grid)? as f64);
    }
    let (mean, var) = mean_and_variance(&counts);
    Ok(VolumeEstimate {
        value: PI * mean,
        method: VolumeMethod::Crofton,
        error_estimate: PI * (var / n_circles as f64).sqrt(),
        mesh_level: None,
        n_circles: Some(n_circles),
    })
}

/// Number of zeros on `S^1` of a system with `m = 1, r = 1`, on a grid of `4 d` points.
pub fn count_roots_circle(sys: &KssSystem) -> Result<usize> {
    if sys.m() != 1 || sys.r() != 1 {
        return Err(Error::InvalidInput(format!("root counting needs m = 1, r = 1, got m = {}, r = {}", sys.m(), sys.r())));
    }
    let (u, v) = ([1.0, 0.0], [0.0, 1.0]);
    count_roots_periodic(restricted(sys, &u, &v), RootGrid::new(4 * sys.degree() as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kss::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trig_roots() {
        for k in 1..12 {
            let kf = k as f64;
            let n = count_roots_periodic(|x| ((kf * x + 0.1).sin(), kf * (kf * x + 0.1).cos()), RootGrid::new(16)).unwrap();
            assert_eq!(n, 2 * k);
        }
    }

    #[test]
    fn hidden_pair_is_found() {
        // cos(x) + 0.999 dips below zero only in a narrow window around pi.
        let f = |x: f64| (x.cos() + 0.999, -x.sin());
        assert_eq!(count_roots_periodic(f, RootGrid::new(8)).unwrap(), 2);
        let g = |x: f64| (x.cos() + 1.001, -x.sin());
        assert_eq!(count_roots_periodic(g, RootGrid::new(8)).unwrap(), 0);
    }

    #[test]
    fn tangency_never_gives_odd_counts() {
        let f = |x: f64| ((x - 0.3).cos() + 1.0, -(x - 0.3).sin());
        match count_roots_periodic(f, RootGrid::new(8)) {
            Ok(n) => assert_eq!(n % 2, 0),
            Err(e) => assert!(matches!(e, Error::RootIsolation(_))),
        }
        let shallow = RootGrid { points: 8, max_doublings: 0, max_local_depth: 2 };
        let g = |x: f64| ((x - 0.3).cos() + 0.9999, -(x - 0.3).sin());
        assert!(matches!(count_roots_periodic(g, shallow), Err(Error::RootIsolation(_))));
    }

    #[test]
    fn circle_fixture() {
        assert_eq!(count_roots_circle(&fixtures::circle_pair()).unwrap(), 2);
    }

    #[test]
    fn parity_of_counts() {
        for seed in 0..100 {
            let sys = KssSystem::sample(1, 15, 1, seed).unwrap();
            assert_eq!(count_roots_circle(&sys).unwrap() % 2, 0);
        }
    }

    #[test]
    fn equator_by_crofton() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = zero_volume_crofton(&fixtures::equator(), 3, 200, &mut rng).unwrap();
        assert!((est.value - TAU).abs() < 1e-12, "{est:?}");
        assert_eq!(est.error_estimate, 0.0);
        assert!(zero_volume_crofton(&fixtures::equator(), 3, 10, &mut rng).is_err());
    }

    #[test]
    fn circles_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (u, v) = random_great_circle(3, &mut rng);
            let d: f64 = u.coords().iter().zip(v.coords()).map(|(a, b)| a * b).sum();
            assert!(d.abs() < 1e-14);
            assert!(SpherePoint::new(v.coords().to_vec()).is_ok());
        }
    }
}
