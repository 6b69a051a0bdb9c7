use std::collections::HashMap;
use std::io::Write;

use crate::{Error, Result};

/// Largest subdivision depth accepted by [`icosphere`] (20 * 4^8 triangles).
pub const MAX_ICOSPHERE_LEVEL: u32 = 8;

/// A triangulation of `S^2` by a subdivided icosahedron.
#[derive(Debug, Clone)]
pub struct SphericalMesh {
    pub level: u32,
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

/// Subdivided icosahedron with every vertex projected onto the unit sphere.
pub fn icosphere(level: u32) -> Result<SphericalMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::LevelTooHigh { level, max: MAX_ICOSPHERE_LEVEL });
    }
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut vertices: Vec<[f64; 3]> = raw.iter().map(|v| unit(*v)).collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::with_capacity(triangles.len() * 3 / 2);
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = midpoint(&mut vertices, &mut midpoints, a, b);
            let bc = midpoint(&mut vertices, &mut midpoints, b, c);
            let ca = midpoint(&mut vertices, &mut midpoints, c, a);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    Ok(SphericalMesh { level, vertices, triangles })
}

fn midpoint(
    vertices: &mut Vec<[f64; 3]>,
    cache: &mut HashMap<(u32, u32), u32>,
    a: u32,
    b: u32,
) -> u32 {
    let key = (a.min(b), a.max(b));
    *cache.entry(key).or_insert_with(|| {
        let (p, q) = (vertices[a as usize], vertices[b as usize]);
        vertices.push(unit([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
        (vertices.len() - 1) as u32
    })
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

impl SphericalMesh {
    /// Each undirected edge once, as `(lo, hi)` vertex indices in first-seen order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut seen = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        let mut out = Vec::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    /// Great-arc length of an edge.
    pub fn edge_length(&self, a: u32, b: u32) -> f64 {
        arc_length(&self.vertices[a as usize], &self.vertices[b as usize])
    }

    /// (shortest, longest) great-arc edge length.
    pub fn edge_length_range(&self) -> (f64, f64) {
        self.edges().iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(a, b)| {
            let l = self.edge_length(a, b);
            (lo.min(l), hi.max(l))
        })
    }

    /// Writes the mesh in ASCII OFF format.
    pub fn write_off<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{:e} {:e} {:e}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Great-arc length between unit vectors, `2 asin(chord / 2)`.
pub(crate) fn arc_length(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let c = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    2.0 * (0.5 * c).min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_icosahedron() {
        let m = icosphere(0).unwrap();
        assert_eq!(m.triangles.len(), 20);
        assert_eq!(m.vertices.len(), 12);
    }

    #[test]
    fn counts_and_topology() {
        for level in 0..=4 {
            let m = icosphere(level).unwrap();
            assert_eq!(m.triangles.len(), 20 * 4usize.pow(level));
            let e = m.edges().len() as i64;
            let chi = m.vertices.len() as i64 - e + m.triangles.len() as i64;
            assert_eq!(chi, 2);
            for v in &m.vertices {
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                assert!((n - 1.0).abs() < 1e-14);
            }
            // closed 2-manifold: every edge is shared by exactly two triangles
            let mut count: HashMap<(u32, u32), u32> = HashMap::new();
            for t in &m.triangles {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    *count.entry((a.min(b), a.max(b))).or_default() += 1;
                }
            }
            assert!(count.values().all(|&c| c == 2));
        }
        assert_eq!(icosphere(2).unwrap().triangles.len(), 320);
    }

    #[test]
    fn quasi_uniform_edges() {
        for level in [1, 3, 5] {
            let (lo, hi) = icosphere(level).unwrap().edge_length_range();
            assert!(hi <= 2.0 * lo, "level {level}: {lo} .. {hi}");
        }
    }

    #[test]
    fn refuses_deep_levels() {
        assert!(matches!(icosphere(9), Err(Error::LevelTooHigh { level: 9, .. })));
    }

    #[test]
    fn off_export() {
        let m = icosphere(1).unwrap();
        let mut buf = Vec::new();
        m.write_off(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("OFF"));
        assert_eq!(lines.next(), Some("42 80 0"));
        let first: Vec<f64> = lines.next().unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first[0], m.vertices[0][0]);
        assert_eq!(first[1], m.vertices[0][1]);
    }
}
