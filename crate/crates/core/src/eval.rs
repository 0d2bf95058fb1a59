//! Reconstruction accuracy: RMS distance from reconstructed vertices to the
//! nearest ground-truth triangle, with face/vertex counts and timing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use nalgebra::Point3;
use thiserror::Error;

use crate::scene::TriangleMesh;

pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("degenerate triangle (area {0:e})")]
    DegenerateTriangle(f64),
    #[error("{0} mesh is empty")]
    EmptyMesh(&'static str),
}

/// Closest point of the closed triangle `abc` to `p`, by Voronoi-region case
/// analysis (vertex, edge or face region).
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Distance from `p` to the closed triangle and the closest point on it.
pub fn point_triangle_distance(
    p: &Point3<f64>,
    tri: &[Point3<f64>; 3],
) -> Result<(f64, Point3<f64>), EvalError> {
    let area = 0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm();
    if !(area > MIN_TRIANGLE_AREA) {
        return Err(EvalError::DegenerateTriangle(area));
    }
    let q = closest_point_on_triangle(p, &tri[0], &tri[1], &tri[2]);
    Ok(((p - q).norm(), q))
}

#[derive(Debug, Clone)]
struct Node {
    lo: Point3<f64>,
    hi: Point3<f64>,
    /// Leaf: range into `order`; inner: child indices.
    left: usize,
    right: usize,
    leaf: bool,
}

/// Axis-aligned bounding-volume hierarchy over a triangle set.
#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<[Point3<f64>; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

fn box_distance_sq(p: &Point3<f64>, lo: &Point3<f64>, hi: &Point3<f64>) -> f64 {
    (0..3)
        .map(|k| {
            let d = (lo[k] - p[k]).max(0.0).max(p[k] - hi[k]);
            d * d
        })
        .sum()
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Reversed so the max-heap pops the nearest box first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self, EvalError> {
        if mesh.triangles.is_empty() {
            return Err(EvalError::EmptyMesh("ground-truth"));
        }
        let triangles: Vec<[Point3<f64>; 3]> = (0..mesh.triangles.len())
            .map(|t| mesh.triangle(t))
            .collect();
        for tri in &triangles {
            let area = 0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm();
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(EvalError::DegenerateTriangle(area));
            }
        }
        let mut bvh = Bvh {
            order: (0..triangles.len()).collect(),
            triangles,
            nodes: Vec::new(),
        };
        bvh.split(0, bvh.order.len());
        Ok(bvh)
    }

    fn bounds(&self, start: usize, end: usize) -> (Point3<f64>, Point3<f64>) {
        let first = self.triangles[self.order[start]][0];
        self.order[start..end]
            .iter()
            .flat_map(|&t| self.triangles[t].iter())
            .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)))
    }

    fn split(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            left: start,
            right: end,
            leaf: true,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let centroid = |t: usize| {
            let [a, b, c] = self.triangles[t];
            (a.coords + b.coords + c.coords) / 3.0
        };
        let axis = (hi - lo).imax();
        let mut slice: Vec<usize> = self.order[start..end].to_vec();
        slice.sort_by(|&x, &y| {
            centroid(x)[axis]
                .total_cmp(&centroid(y)[axis])
                .then(x.cmp(&y))
        });
        self.order[start..end].copy_from_slice(&slice);
        let mid = start + (end - start) / 2;
        let left = self.split(start, mid);
        let right = self.split(mid, end);
        self.nodes[id] = Node {
            lo,
            hi,
            left,
            right,
            leaf: false,
        };
        id
    }

    /// Exact nearest triangle: `(distance, triangle index, closest point)`.
    /// Boxes are visited nearest-first and pruned only when their lower
    /// bound exceeds the best distance found.
    pub fn nearest(&self, p: &Point3<f64>) -> (f64, usize, Point3<f64>) {
        let mut best = (f64::INFINITY, usize::MAX, *p);
        let mut heap = BinaryHeap::from([Candidate(
            box_distance_sq(p, &self.nodes[0].lo, &self.nodes[0].hi),
            0,
        )]);
        while let Some(Candidate(d2, id)) = heap.pop() {
            if d2 > best.0 * best.0 {
                break;
            }
            let node = &self.nodes[id];
            if node.leaf {
                for &t in &self.order[node.left..node.right] {
                    let [a, b, c] = &self.triangles[t];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d = (p - q).norm();
                    if d < best.0 || (d == best.0 && t < best.1) {
                        best = (d, t, q);
                    }
                }
            } else {
                for child in [node.left, node.right] {
                    let c = &self.nodes[child];
                    heap.push(Candidate(box_distance_sq(p, &c.lo, &c.hi), child));
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rmse: f64,
    pub face_count: usize,
    pub vertex_count: usize,
    /// Seconds.
    pub wall_time: f64,
    pub per_vertex_distances: Option<Vec<f64>>,
}

pub const CSV_HEADER: &str = "scene,method,faces,vertices,time_s,rmse";

impl EvalReport {
    pub fn to_key_value(&self) -> String {
        format!(
            "rmse={}\nface_count={}\nvertex_count={}\nwall_time={:.3}\n",
            self.rmse, self.face_count, self.vertex_count, self.wall_time
        )
    }

    pub fn csv_row(&self, scene: &str, method: &str) -> String {
        format!(
            "{scene},{method},{},{},{:.3},{}",
            self.face_count, self.vertex_count, self.wall_time, self.rmse
        )
    }
}

/// One-directional RMSE from `rec` vertices to the `gt` surface.
pub fn rmse(rec: &TriangleMesh, gt: &TriangleMesh) -> Result<EvalReport, EvalError> {
    let start = Instant::now();
    if rec.vertices.is_empty() {
        return Err(EvalError::EmptyMesh("reconstructed"));
    }
    let bvh = Bvh::build(gt)?;
    let distances: Vec<f64> = rec.vertices.iter().map(|v| bvh.nearest(v).0).collect();
    let mean_sq = distances.iter().map(|d| d * d).sum::<f64>() / distances.len() as f64;
    Ok(EvalReport {
        rmse: mean_sq.sqrt(),
        face_count: rec.triangles.len(),
        vertex_count: rec.vertices.len(),
        wall_time: start.elapsed().as_secs_f64(),
        per_vertex_distances: Some(distances),
    })
}
