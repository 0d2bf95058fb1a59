//! The facet-dual flow network and its visibility and regularity costs.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Point3, Vector3};

use super::delaunay::TetMesh;
use super::predicates::orient3d;
use super::MeshingError;
use crate::scene::{CameraView, PipelineConfig};
use crate::visibility::VisibilityRecord;

/// Interior facet between tets `a < b`. `cap_ab` is the capacity of the
/// directed edge `a → b`, i.e. the cost of labelling `a` outside and `b`
/// inside.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFacet {
    pub a: usize,
    pub slot_a: usize,
    pub b: usize,
    pub slot_b: usize,
    pub cap_ab: f64,
    pub cap_ba: f64,
}

/// Hull facet of `tet`; `cap` links the outside node to it.
#[derive(Debug, Clone, PartialEq)]
pub struct HullFacet {
    pub tet: usize,
    pub slot: usize,
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FacetRef {
    Interior(usize),
    Hull(usize),
}

/// One node per tetrahedron plus the outside (source) and inside (sink)
/// terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGraph {
    pub tet_count: usize,
    pub facets: Vec<DualFacet>,
    pub hull: Vec<HullFacet>,
    /// Source links from rays whose camera lies inside the tet.
    pub camera_source: Vec<f64>,
    pub sink: Vec<f64>,
    pub facet_of: Vec<[FacetRef; 4]>,
}

impl DualGraph {
    /// Zero-capacity network over `tets`.
    pub fn new(tets: &TetMesh) -> Self {
        let n = tets.tets.len();
        let mut facet_of = vec![[FacetRef::Hull(usize::MAX); 4]; n];
        let mut facets = Vec::new();
        for (a, slot_a, b, slot_b) in tets.interior_facets() {
            facet_of[a][slot_a] = FacetRef::Interior(facets.len());
            facet_of[b][slot_b] = FacetRef::Interior(facets.len());
            facets.push(DualFacet {
                a,
                slot_a,
                b,
                slot_b,
                cap_ab: 0.0,
                cap_ba: 0.0,
            });
        }
        let mut hull = Vec::new();
        for (tet, slot) in tets.hull_facets() {
            facet_of[tet][slot] = FacetRef::Hull(hull.len());
            hull.push(HullFacet {
                tet,
                slot,
                cap: 0.0,
            });
        }
        Self {
            tet_count: n,
            facets,
            hull,
            camera_source: vec![0.0; n],
            sink: vec![0.0; n],
            facet_of,
        }
    }

    /// Total capacity from the outside node to each tet.
    pub fn source_capacities(&self) -> Vec<f64> {
        let mut s = self.camera_source.clone();
        for h in &self.hull {
            s[h.tet] += h.cap;
        }
        s
    }

    /// Adds `from → to` capacity across the facet `(from, slot)`.
    fn add_directed(&mut self, from: usize, slot: usize, cap: f64) {
        if let FacetRef::Interior(f) = self.facet_of[from][slot] {
            let e = &mut self.facets[f];
            if e.a == from {
                e.cap_ab += cap;
            } else {
                e.cap_ba += cap;
            }
        }
    }

    /// Adds `beta * cost[f]` to both directions of every interior facet.
    pub fn add_geometric(&mut self, costs: &[f64], beta: f64) {
        for (e, c) in self.facets.iter_mut().zip(costs) {
            e.cap_ab += beta * c;
            e.cap_ba += beta * c;
        }
    }

    pub fn is_valid(&self) -> bool {
        let ok = |c: f64| c.is_finite() && c >= 0.0;
        self.facets.iter().all(|e| ok(e.cap_ab) && ok(e.cap_ba))
            && self.hull.iter().all(|h| ok(h.cap))
            && self.camera_source.iter().all(|&c| ok(c))
            && self.sink.iter().all(|&c| ok(c))
    }

    /// Cost of a labelling: every edge from an outside node to an inside one.
    pub fn energy(&self, inside: &[bool]) -> f64 {
        let mut j = 0.0;
        for e in &self.facets {
            if !inside[e.a] && inside[e.b] {
                j += e.cap_ab;
            }
            if !inside[e.b] && inside[e.a] {
                j += e.cap_ba;
            }
        }
        let source = self.source_capacities();
        for t in 0..self.tet_count {
            if inside[t] {
                j += source[t];
            } else {
                j += self.sink[t];
            }
        }
        j
    }

    /// Debug dump: `tetA tetB cap_ab cap_ba` per interior facet, hull facets
    /// with `outside` in place of the second tet, then terminal links.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.facets {
            let _ = writeln!(s, "{} {} {} {}", e.a, e.b, e.cap_ab, e.cap_ba);
        }
        for h in &self.hull {
            let _ = writeln!(s, "{} outside 0 {}", h.tet, h.cap);
        }
        for t in 0..self.tet_count {
            if self.camera_source[t] > 0.0 || self.sink[t] > 0.0 {
                let _ = writeln!(
                    s,
                    "terminal {} {} {}",
                    t, self.camera_source[t], self.sink[t]
                );
            }
        }
        s
    }
}

/// Visibility kernel `α (1 − exp(−d² / 2σ²))`.
pub fn visibility_capacity(d: f64, alpha: f64, sigma: f64) -> f64 {
    alpha * (1.0 - (-d * d / (2.0 * sigma * sigma)).exp())
}

/// Fixed generic offsets used to break ties when a ray grazes an edge,
/// a vertex or a facet plane.
const GENERIC: [[f64; 3]; 3] = [
    [
        0.573_205_080_756_887_7,
        0.321_928_094_887_362_3,
        0.753_417_601_149_098_4,
    ],
    [
        -0.418_861_169_915_810_8,
        0.812_403_840_463_596_0,
        0.170_820_393_249_936_9,
    ],
    [
        0.291_502_622_129_181_2,
        -0.205_572_809_000_084_1,
        0.934_172_358_962_715_7,
    ],
];

struct RayWalker<'a> {
    tets: &'a TetMesh,
    star: Vec<Vec<usize>>,
    scale: f64,
}

impl<'a> RayWalker<'a> {
    fn perturbation(&self, p: &Point3<f64>) -> [Point3<f64>; 3] {
        GENERIC.map(|g| p + Vector3::from(g) * self.scale)
    }

    /// Sign of `orient3d(tet with slot j := target)`, ties broken by the
    /// perturbed target. `p` must be a vertex of the tet other than slot j.
    fn cone_side(&self, t: usize, j: usize, target: &Point3<f64>, r: &[Point3<f64>; 3]) -> f64 {
        let v = self.tets.tets[t].map(|i| self.tets.vertices[i]);
        let with = |x: &Point3<f64>| {
            let mut w = v;
            w[j] = *x;
            orient3d(&w[0], &w[1], &w[2], &w[3])
        };
        let s = with(target);
        if s != 0.0 {
            return s;
        }
        r.iter().map(with).find(|&s| s != 0.0).unwrap_or(0.0)
    }

    /// Star tet of vertex `p` whose cone at `p` contains the direction to `target`.
    fn start_cell(&self, p: usize, target: &Point3<f64>, r: &[Point3<f64>; 3]) -> Option<usize> {
        self.star[p].iter().copied().find(|&t| {
            let k = self.tets.tets[t].iter().position(|&x| x == p).unwrap();
            (0..4)
                .filter(|&j| j != k)
                .all(|j| self.cone_side(t, j, target, r) > 0.0)
        })
    }

    /// Whether the ray `p → target` leaves through the outward facet `f`.
    fn exits_through(
        &self,
        p: &Point3<f64>,
        target: &Point3<f64>,
        f: [Point3<f64>; 3],
        r: &[Point3<f64>; 3],
    ) -> bool {
        let sigma = |u: &Point3<f64>, v: &Point3<f64>| {
            let s = orient3d(p, target, u, v);
            if s != 0.0 {
                return s;
            }
            r.iter()
                .map(|x| orient3d(p, x, u, v))
                .find(|&s| s != 0.0)
                .unwrap_or(0.0)
        };
        sigma(&f[0], &f[1]) > 0.0 && sigma(&f[1], &f[2]) > 0.0 && sigma(&f[2], &f[0]) > 0.0
    }

    fn walk(
        &self,
        graph: &mut DualGraph,
        p_idx: usize,
        cam: &Point3<f64>,
        view_id: u32,
        cfg: &PipelineConfig,
    ) -> Result<(), MeshingError> {
        let tets = self.tets;
        let p = tets.vertices[p_idx];
        if self.star[p_idx].is_empty() {
            return Err(MeshingError::RayStart {
                point: p_idx,
                view_id,
            });
        }
        let r = self.perturbation(&p);
        let dir = cam - p;
        let len = dir.norm();

        let behind = p - dir;
        if let Some(t) = self.start_cell(p_idx, &behind, &r) {
            graph.sink[t] += cfg.vis_alpha;
        }

        let Some(mut t) = self.start_cell(p_idx, cam, &r) else {
            // The point is on the hull and the camera direction leaves it immediately.
            return Ok(());
        };
        let mut entry = tets.tets[t].iter().position(|&x| x == p_idx);
        let mut exit = entry;
        for _ in 0..=tets.tets.len() {
            if exit.is_none() {
                exit = (0..4)
                    .filter(|&j| Some(j) != entry)
                    .find(|&j| self.exits_through(&p, cam, tets.facet_points(t, j), &r));
            }
            let Some(x) = exit else {
                return Err(MeshingError::RayStart {
                    point: p_idx,
                    view_id,
                });
            };
            let f = tets.facet_points(t, x);
            if orient3d(&f[0], &f[1], &f[2], cam) <= 0.0 {
                graph.camera_source[t] += cfg.vis_alpha;
                return Ok(());
            }
            let n = (f[1] - f[0]).cross(&(f[2] - f[0]));
            let denom = n.dot(&dir);
            let d = if denom != 0.0 {
                (n.dot(&(f[0] - p)) / denom * len).clamp(0.0, len)
            } else {
                0.0
            };
            let cap = visibility_capacity(d, cfg.vis_alpha, cfg.vis_sigma);
            match tets.adjacency[t][x] {
                None => {
                    if let FacetRef::Hull(h) = graph.facet_of[t][x] {
                        graph.hull[h].cap += cap;
                    }
                    return Ok(());
                }
                Some(next) => {
                    let back = tets.mirror_slot(t, x).expect("symmetric adjacency");
                    graph.add_directed(next, back, cap);
                    t = next;
                    entry = Some(back);
                    exit = None;
                }
            }
        }
        Err(MeshingError::RayStart {
            point: p_idx,
            view_id,
        })
    }
}

/// Visibility term of the cut energy. Record `point_id`s index
/// `tets.vertices`; duplicates are resolved through `tets.canonical`.
pub fn accumulate_ray_costs(
    tets: &TetMesh,
    records: &[VisibilityRecord],
    views: &[CameraView],
    config: &PipelineConfig,
) -> Result<DualGraph, MeshingError> {
    let mut graph = DualGraph::new(tets);
    let by_id: HashMap<u32, &CameraView> = views.iter().map(|v| (v.view_id, v)).collect();
    let (lo, hi) = tets
        .vertices
        .iter()
        .fold((tets.vertices[0], tets.vertices[0]), |(lo, hi), q| {
            (lo.inf(q), hi.sup(q))
        });
    let walker = RayWalker {
        tets,
        star: tets.vertex_stars(),
        scale: (hi - lo).norm().max(1.0),
    };
    for rec in records {
        let p = *tets
            .canonical
            .get(rec.point_id)
            .ok_or(MeshingError::UnknownPoint(rec.point_id))?;
        for hit in &rec.visible_views {
            let view = by_id
                .get(&hit.view_id)
                .ok_or(MeshingError::UnknownView(hit.view_id))?;
            walker.walk(&mut graph, p, &view.center(), hit.view_id, config)?;
        }
    }
    Ok(graph)
}

/// Regularity cost of one facet given its two adjacent circumcenters.
///
/// The angles are taken between the facet normal and the vectors from the
/// facet centroid to each circumcenter. (Measured along the segment joining
/// the circumcenters the angle is always zero, since that segment lies on
/// the dual Voronoi edge, which is perpendicular to the facet.)
pub fn facet_geometric_cost(facet: &[Point3<f64>; 3], ca: &Point3<f64>, cb: &Point3<f64>) -> f64 {
    let [a, b, c] = facet;
    let cross = (b - a).cross(&(c - a));
    let scale = (b - a).norm().max((c - a).norm()).max(1e-300);
    if (ca - cb).norm() <= 1e-12 * scale || cross.norm() == 0.0 {
        return 0.0;
    }
    let n = cross.normalize();
    let g = Point3::from((a.coords + b.coords + c.coords) / 3.0);
    let cos_to = |x: &Point3<f64>| {
        let v = x - g;
        let l = v.norm();
        if l <= 1e-12 * scale {
            1.0
        } else {
            (v.dot(&n) / l).abs().min(1.0)
        }
    };
    1.0 - cos_to(ca).min(cos_to(cb))
}

/// Per interior facet, in [`TetMesh::interior_facets`] order.
pub fn geometric_costs(tets: &TetMesh) -> Vec<f64> {
    tets.interior_facets()
        .into_iter()
        .map(|(a, slot, b, _)| {
            facet_geometric_cost(
                &tets.facet_points(a, slot),
                &tets.circumcenters[a],
                &tets.circumcenters[b],
            )
        })
        .collect()
}
