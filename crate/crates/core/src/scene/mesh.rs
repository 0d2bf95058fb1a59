use std::collections::{HashMap, HashSet};

use nalgebra::{Point3, Vector3};

/// Indexed triangle surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalised normal, `(b - a) × (c - a)`.
    pub fn face_cross(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        self.face_cross(t).normalize()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.face_cross(t).norm())
            .sum()
    }

    /// First violated structural invariant, if any.
    pub fn check(&self) -> Result<(), String> {
        let n = self.vertices.len();
        let mut seen = HashSet::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(format!("triangle {t} indexes past {n} vertices"));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(format!("triangle {t} repeats a vertex"));
            }
            let mut key = *tri;
            key.sort_unstable();
            if !seen.insert(key) {
                return Err(format!("triangle {t} duplicates an earlier triangle"));
            }
        }
        if let Some(i) = self
            .vertices
            .iter()
            .position(|v| !v.coords.iter().all(|c| c.is_finite()))
        {
            return Err(format!("vertex {i} is not finite"));
        }
        Ok(())
    }

    /// Number of triangles bordering each undirected edge.
    pub fn edge_valence(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *map.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        map
    }

    /// Every edge borders exactly two triangles.
    pub fn is_closed_manifold(&self) -> bool {
        !self.triangles.is_empty() && self.edge_valence().values().all(|&c| c == 2)
    }

    /// Closed and every edge used once in each direction.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed = HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                if !directed.insert((tri[k], tri[(k + 1) % 3])) {
                    return false;
                }
            }
        }
        directed.iter().all(|&(a, b)| directed.contains(&(b, a)))
    }

    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<usize> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_valence().len() as i64 + self.triangles.len() as i64
    }

    /// Signed volume enclosed by a closed, outward-oriented mesh.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a].coords,
                    self.vertices[b].coords,
                    self.vertices[c].coords,
                );
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Drops vertices no triangle references, preserving relative order.
    pub fn compact(&self) -> TriangleMesh {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        for tri in &self.triangles {
            for &i in tri {
                remap[i] = 0;
            }
        }
        let mut vertices = Vec::new();
        for (i, slot) in remap.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = vertices.len();
                vertices.push(self.vertices[i]);
            }
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
            .collect();
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    pub fn bounding_box(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))),
        )
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bounding_box()
            .map(|(lo, hi)| (hi - lo).norm())
            .unwrap_or(0.0)
    }
}
