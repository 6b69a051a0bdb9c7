use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use super::{VolumeEstimate, VolumeMethod};
use crate::kss::{KssSystem, SphereField};
use crate::sphere::{arc_length, icosphere, SphericalMesh, MAX_ICOSPHERE_LEVEL};
use crate::{Error, Result};

/// Meshes must resolve the nodal scale `1/sqrt(d)`: longest edge at most
/// `MESH_RULE_CONSTANT / sqrt(d)`.
pub const MESH_RULE_CONSTANT: f64 = 0.3;

/// Longest great-arc edge of the icosphere at each level.
const MAX_EDGE: [f64; 9] = [
    1.107_148_717_794_090_4,
    6.283_185_307_179_587e-1,
    3.263_662_218_066_086e-1,
    1.648_337_032_140_169_7e-1,
    8.262_746_962_887_212e-2,
    4.134_019_969_865_437e-2,
    2.067_341_228_850_841e-2,
    1.033_712_033_463_999e-2,
    5.168_611_945_353_898e-3,
];

/// Longest edge of `icosphere(level)`.
pub fn max_edge_length(level: u32) -> Result<f64> {
    MAX_EDGE
        .get(level as usize)
        .copied()
        .ok_or(Error::LevelTooHigh { level, max: MAX_ICOSPHERE_LEVEL })
}

/// Smallest level meeting the mesh rule for degree `d`.
pub fn required_mesh_level(d: u32) -> Result<u32> {
    let limit = MESH_RULE_CONSTANT / (d as f64).sqrt();
    (0..=MAX_ICOSPHERE_LEVEL)
        .find(|&l| MAX_EDGE[l as usize] <= limit)
        .ok_or_else(|| Error::InvalidInput(format!("degree {d} needs a mesh finer than level {MAX_ICOSPHERE_LEVEL}")))
}

/// Level used when none is given: the required level, and at least 6.
pub fn default_mesh_level(d: u32) -> Result<u32> {
    Ok(required_mesh_level(d)?.max(6))
}

/// Knobs for [`zero_length_marching_field`].
#[derive(Debug, Clone, Copy)]
pub struct MarchingOptions {
    /// One Newton step toward the zero set after edge interpolation.
    pub newton: bool,
    /// Values below this in magnitude count as positive.
    pub zero_tol: f64,
    /// Newton is skipped where the tangential gradient is smaller than this.
    pub min_gradient: f64,
}

impl Default for MarchingOptions {
    fn default() -> Self {
        MarchingOptions { newton: true, zero_tol: 1e-13, min_gradient: 1e-8 }
    }
}

/// Zero-set segments, each a pair of unit vectors.
#[derive(Debug, Clone, Default)]
pub struct LevelPolyline {
    pub segments: Vec<[[f64; 3]; 2]>,
    pub total_length: f64,
}

impl LevelPolyline {
    /// CSV with one row per segment endpoint: `segment,x,y,z`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "segment,x,y,z")?;
        for (i, s) in self.segments.iter().enumerate() {
            for p in s {
                writeln!(w, "{i},{:e},{:e},{:e}", p[0], p[1], p[2])?;
            }
        }
        Ok(())
    }
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Linear interpolation of the zero on edge `p -> q`, projected to the sphere,
/// and the same point after one tangential Newton step (if enabled and safe).
fn crossing<F: SphereField>(
    field: &F,
    p: &[f64; 3],
    q: &[f64; 3],
    vp: f64,
    vq: f64,
    opts: &MarchingOptions,
) -> ([f64; 3], [f64; 3]) {
    let lam = (vp / (vp - vq)).clamp(0.0, 1.0);
    let x = normalize3([
        p[0] + lam * (q[0] - p[0]),
        p[1] + lam * (q[1] - p[1]),
        p[2] + lam * (q[2] - p[2]),
    ]);
    if !opts.newton {
        return (x, x);
    }
    let v = field.value(&x);
    let mut g = [0.0; 3];
    field.gradient(&x, &mut g);
    let gx = g[0] * x[0] + g[1] * x[1] + g[2] * x[2];
    let gt = [g[0] - gx * x[0], g[1] - gx * x[1], g[2] - gx * x[2]];
    let n2 = gt[0] * gt[0] + gt[1] * gt[1] + gt[2] * gt[2];
    if !(n2.sqrt() >= opts.min_gradient) {
        return (x, x);
    }
    let step = v / n2;
    let y = normalize3([x[0] - step * gt[0], x[1] - step * gt[1], x[2] - step * gt[2]]);
    // A step longer than the edge means the linear model is unreliable here.
    if arc_length(&x, &y) > arc_length(p, q) {
        return (x, x);
    }
    (x, y)
}

/// Length of the zero set of a scalar field on `S^2` by marching triangles.
///
/// The mesh must satisfy the resolution rule for `degree`. The error estimate
/// is the change in length caused by the Newton correction.
pub fn zero_length_marching_field<F: SphereField>(
    field: &F,
    degree: u32,
    mesh: &SphericalMesh,
    opts: &MarchingOptions,
) -> Result<(VolumeEstimate, LevelPolyline)> {
    if field.ambient_dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: field.ambient_dim() });
    }
    let max_edge = max_edge_length(mesh.level)?;
    let limit = MESH_RULE_CONSTANT / (degree as f64).sqrt();
    if max_edge > limit {
        return Err(Error::MeshTooCoarse { degree, max_edge, limit, required_level: required_mesh_level(degree)? });
    }
    let values: Vec<f64> = mesh.vertices.par_iter().map(|v| field.value(v)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("field is not finite at vertex {i}")));
    }
    let positive = |i: u32| values[i as usize] >= 0.0 || values[i as usize].abs() < opts.zero_tol;

    // Crossing points are cached per edge so neighbouring triangles share them.
    let mut cache: HashMap<(u32, u32), ([f64; 3], [f64; 3])> = HashMap::new();
    let mut segments = Vec::new();
    let mut raw_length = Vec::new();
    for tri in &mesh.triangles {
        let s: Vec<bool> = tri.iter().map(|&i| positive(i)).collect();
        if s[0] == s[1] && s[1] == s[2] {
            continue;
        }
        let mut ends = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if s[k] == s[(k + 1) % 3] {
                continue;
            }
            let key = (a.min(b), a.max(b));
            let pt = *cache.entry(key).or_insert_with(|| {
                let (lo, hi) = key;
                let (p, q) = (&mesh.vertices[lo as usize], &mesh.vertices[hi as usize]);
                crossing(field, p, q, values[lo as usize], values[hi as usize], opts)
            });
            ends.push(pt);
        }
        debug_assert_eq!(ends.len(), 2);
        raw_length.push(arc_length(&ends[0].0, &ends[1].0));
        segments.push([ends[0].1, ends[1].1]);
    }
    let lengths: Vec<f64> = segments.iter().map(|s| arc_length(&s[0], &s[1])).collect();
    let total = crate::numeric::pairwise_sum(&lengths);
    let raw = crate::numeric::pairwise_sum(&raw_length);
    Ok((
        VolumeEstimate {
            value: total,
            method: VolumeMethod::Marching,
            error_estimate: (total - raw).abs(),
            mesh_level: Some(mesh.level),
            n_circles: None,
        },
        LevelPolyline { segments, total_length: total },
    ))
}

/// Marching length for a system with `m = 2, r = 1`.
pub fn zero_length_marching(sys: &KssSystem, mesh: &SphericalMesh) -> Result<(VolumeEstimate, LevelPolyline)> {
    if sys.m() != 2 || sys.r() != 1 {
        return Err(Error::InvalidInput(format!("marching needs m = 2, r = 1, got m = {}, r = {}", sys.m(), sys.r())));
    }
    zero_length_marching_field(sys, sys.degree(), mesh, &MarchingOptions::default())
}

/// Marching at `level` with the change from `level - 1` as the error estimate.
pub fn zero_length_refined<F: SphereField>(field: &F, degree: u32, level: u32) -> Result<VolumeEstimate> {
    if level == 0 {
        return Err(Error::InvalidInput("refinement needs level >= 1".into()));
    }
    let opts = MarchingOptions::default();
    let fine = zero_length_marching_field(field, degree, &icosphere(level)?, &opts)?.0;
    let coarse = zero_length_marching_field(field, degree, &icosphere(level - 1)?, &opts)?.0;
    Ok(VolumeEstimate { error_estimate: (fine.value - coarse.value).abs(), ..fine })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kss::{fixtures, Rotated};
    use std::f64::consts::PI;

    #[test]
    fn edge_table_matches_meshes() {
        for l in 0..=5 {
            let (_, hi) = icosphere(l).unwrap().edge_length_range();
            assert!((hi - MAX_EDGE[l as usize]).abs() < 1e-12);
        }
        assert_eq!(required_mesh_level(100).unwrap(), 6);
        assert_eq!(required_mesh_level(36).unwrap(), 5);
        assert_eq!(default_mesh_level(36).unwrap(), 6);
        assert!(max_edge_length(9).is_err());
    }

    #[test]
    fn equator_fixture() {
        let mesh = icosphere(6).unwrap();
        let (est, poly) = zero_length_marching(&fixtures::equator(), &mesh).unwrap();
        assert!((est.value - 2.0 * PI).abs() < 0.005 * 2.0 * PI, "{}", est.value);
        assert!(est.error_estimate >= 0.0);
        for s in &poly.segments {
            for p in s {
                assert!(p[0].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_circles_fixture() {
        let mesh = icosphere(6).unwrap();
        let (est, _) = zero_length_marching(&fixtures::two_circles(), &mesh).unwrap();
        assert!((est.value - 4.0 * PI).abs() < 0.015 * 4.0 * PI, "{}", est.value);
    }

    #[test]
    fn refinement_is_consistent() {
        let sys = KssSystem::sample(2, 10, 1, 3).unwrap();
        let l5 = zero_length_marching(&sys, &icosphere(5).unwrap()).unwrap().0.value;
        let l6 = zero_length_marching(&sys, &icosphere(6).unwrap()).unwrap().0.value;
        let l7 = zero_length_marching(&sys, &icosphere(7).unwrap()).unwrap().0.value;
        assert!((l7 - l6).abs() <= 4.0 * (l6 - l5).abs() + 1e-9, "{l5} {l6} {l7}");
    }

    #[test]
    fn refuses_coarse_meshes() {
        let sys = KssSystem::sample(2, 100, 1, 1).unwrap();
        match zero_length_marching(&sys, &icosphere(4).unwrap()) {
            Err(Error::MeshTooCoarse { required_level, .. }) => assert_eq!(required_level, 6),
            other => panic!("{other:?}"),
        }
        let r2 = KssSystem::sample(2, 4, 2, 1).unwrap();
        assert!(zero_length_marching(&r2, &icosphere(2).unwrap()).is_err());
    }

    #[test]
    fn rotation_invariance() {
        let sys = KssSystem::sample(2, 12, 1, 9).unwrap();
        let mesh = icosphere(6).unwrap();
        let base = zero_length_marching(&sys, &mesh).unwrap().0.value;
        let (c, s) = (0.4f64.cos(), 0.4f64.sin());
        let (c2, s2) = (1.1f64.cos(), 1.1f64.sin());
        // rotation about z then x
        let rz = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let rx = [[1.0, 0.0, 0.0], [0.0, c2, -s2], [0.0, s2, c2]];
        let q: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| (0..3).map(|k| rz[i][k] * rx[k][j]).sum()).collect())
            .collect();
        let rot = Rotated::new(&sys, q).unwrap();
        let turned = zero_length_marching_field(&rot, 12, &mesh, &MarchingOptions::default()).unwrap().0.value;
        assert!((turned - base).abs() < 0.01 * base, "{base} vs {turned}");
    }

    #[test]
    fn antipodal_symmetry() {
        let sys = KssSystem::sample(2, 7, 1, 2).unwrap();
        let (_, poly) = zero_length_marching(&sys, &icosphere(5).unwrap()).unwrap();
        let mids: Vec<[f64; 3]> = poly
            .segments
            .iter()
            .map(|s| normalize3([s[0][0] + s[1][0], s[0][1] + s[1][1], s[0][2] + s[1][2]]))
            .collect();
        for p in mids.iter().step_by(7) {
            let anti = [-p[0], -p[1], -p[2]];
            let best = mids.iter().map(|q| arc_length(q, &anti)).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9, "{best}");
        }
    }

    #[test]
    fn polyline_csv() {
        let (_, poly) = zero_length_marching(&fixtures::equator(), &icosphere(3).unwrap()).unwrap();
        let mut buf = Vec::new();
        poly.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * poly.segments.len());
    }
}
