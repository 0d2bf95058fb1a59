//! Min-cut labelling, interface extraction and edge-length filtering.

use std::collections::HashMap;

use super::delaunay::TetMesh;
use super::graph::DualGraph;
use super::maxflow::FlowNetwork;
use crate::scene::TriangleMesh;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTetMesh {
    pub tets: TetMesh,
    pub inside: Vec<bool>,
    /// Energy of `inside` under the graph it was solved on.
    pub cut_value: f64,
}

/// Labels every tet by minimum s–t cut: source side outside, sink side
/// inside. Among optimal labellings the one with the fewest inside tets is
/// returned, so unconstrained tets default to outside.
pub fn solve_labels(graph: &DualGraph) -> Vec<bool> {
    let n = graph.tet_count;
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    for e in &graph.facets {
        net.add_edge(e.a, e.b, e.cap_ab);
        net.add_edge(e.b, e.a, e.cap_ba);
    }
    for (v, c) in graph.source_capacities().into_iter().enumerate() {
        net.add_edge(s, v, c);
    }
    for (v, &c) in graph.sink.iter().enumerate() {
        net.add_edge(v, t, c);
    }
    net.max_flow(s, t);
    let mut side = net.sink_side(t);
    side.truncate(n);
    side
}

pub fn solve_mincut(tets: &TetMesh, graph: &DualGraph) -> LabeledTetMesh {
    let inside = solve_labels(graph);
    let cut_value = graph.energy(&inside);
    LabeledTetMesh {
        tets: tets.clone(),
        inside,
        cut_value,
    }
}

/// Facets between inside and outside tets, including hull facets of inside
/// tets, oriented from inside toward outside. Unused vertices are dropped.
pub fn extract_surface(labeled: &LabeledTetMesh) -> TriangleMesh {
    let tets = &labeled.tets;
    let mut triangles = Vec::new();
    for t in 0..tets.tets.len() {
        if !labeled.inside[t] {
            continue;
        }
        for slot in 0..4 {
            let other_inside = tets.adjacency[t][slot].is_some_and(|u| labeled.inside[u]);
            if !other_inside {
                triangles.push(tets.facet(t, slot));
            }
        }
    }
    TriangleMesh::new(tets.vertices.clone(), triangles).compact()
}

/// Median length over the distinct edges of `mesh`.
pub fn median_edge_length(mesh: &TriangleMesh) -> Option<f64> {
    let mut lengths: Vec<f64> = mesh
        .edge_valence()
        .keys()
        .map(|&(a, b)| (mesh.vertices[a] - mesh.vertices[b]).norm())
        .collect();
    if lengths.is_empty() {
        return None;
    }
    lengths.sort_by(f64::total_cmp);
    let m = lengths.len();
    Some(if m % 2 == 1 {
        lengths[m / 2]
    } else {
        0.5 * (lengths[m / 2 - 1] + lengths[m / 2])
    })
}

/// Removes triangles with an edge longer than `factor` times the median
/// edge length, then vertices no longer referenced.
pub fn postfilter_edges(mesh: &TriangleMesh, factor: f64) -> TriangleMesh {
    let Some(median) = median_edge_length(mesh) else {
        return mesh.compact();
    };
    let limit = factor * median;
    let triangles = mesh
        .triangles
        .iter()
        .copied()
        .filter(|tri| {
            (0..3)
                .all(|k| (mesh.vertices[tri[k]] - mesh.vertices[tri[(k + 1) % 3]]).norm() <= limit)
        })
        .collect();
    TriangleMesh::new(mesh.vertices.clone(), triangles).compact()
}

/// Interface facets per tet-mesh edge under `inside`.
fn interface_valence(tets: &TetMesh, inside: &[bool]) -> HashMap<(usize, usize), usize> {
    let mut valence = HashMap::new();
    for t in 0..tets.tets.len() {
        if !inside[t] {
            continue;
        }
        for slot in 0..4 {
            if tets.adjacency[t][slot].is_some_and(|u| inside[u]) {
                continue;
            }
            let f = tets.facet(t, slot);
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *valence.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
    }
    valence
}

/// Relabels outside tets as inside around every edge where the interface
/// pinches (more than two facets meet), until none is left. The inside set
/// only grows, so this terminates. Returns the number of tets relabelled.
pub fn repair_singular_edges(labeled: &mut LabeledTetMesh) -> usize {
    let tets = &labeled.tets;
    let star = tets.vertex_stars();
    let mut flipped = 0;
    loop {
        let mut singular: Vec<(usize, usize)> = interface_valence(tets, &labeled.inside)
            .into_iter()
            .filter(|(_, v)| *v > 2)
            .map(|(e, _)| e)
            .collect();
        if singular.is_empty() {
            return flipped;
        }
        singular.sort_unstable();
        for (a, b) in singular {
            for &t in &star[a] {
                if !labeled.inside[t] && tets.tets[t].contains(&b) {
                    labeled.inside[t] = true;
                    flipped += 1;
                }
            }
        }
    }
}

/// Inside tets that are face-connected, as component count, and whether any
/// of them touches the hull.
pub fn inside_components(labeled: &LabeledTetMesh) -> (usize, bool) {
    let tets = &labeled.tets;
    let mut comp: HashMap<usize, usize> = HashMap::new();
    let mut count = 0;
    let mut hull = false;
    for start in 0..tets.tets.len() {
        if !labeled.inside[start] || comp.contains_key(&start) {
            continue;
        }
        comp.insert(start, count);
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            for n in tets.adjacency[t] {
                match n {
                    None => hull = true,
                    Some(u) if labeled.inside[u] && !comp.contains_key(&u) => {
                        comp.insert(u, count);
                        stack.push(u);
                    }
                    _ => {}
                }
            }
        }
        count += 1;
    }
    (count, hull)
}

#[cfg(test)]
mod tests {
    use super::super::delaunay::tetrahedralize;
    use super::super::graph::{DualFacet, FacetRef};
    use super::*;
    use nalgebra::Point3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    /// A dual graph over arbitrary nodes, without geometry.
    fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> DualGraph {
        let mut facets = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(0.4) {
                    let mut cap = || {
                        if rng.gen_bool(0.2) {
                            0.0
                        } else {
                            rng.gen_range(0.0..3.0)
                        }
                    };
                    facets.push(DualFacet {
                        a,
                        slot_a: 0,
                        b,
                        slot_b: 0,
                        cap_ab: cap(),
                        cap_ba: cap(),
                    });
                }
            }
        }
        DualGraph {
            tet_count: n,
            facets,
            hull: Vec::new(),
            camera_source: (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        rng.gen_range(0.0..4.0)
                    } else {
                        0.0
                    }
                })
                .collect(),
            sink: (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        rng.gen_range(0.0..4.0)
                    } else {
                        0.0
                    }
                })
                .collect(),
            facet_of: vec![[FacetRef::Hull(usize::MAX); 4]; n],
        }
    }

    /// Minimum energy over all 2^n labellings, summed edge by edge.
    fn enumerate_min(g: &DualGraph) -> f64 {
        let n = g.tet_count;
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let inside = |v: usize| mask >> v & 1 == 1;
            let mut j = 0.0;
            for e in &g.facets {
                if !inside(e.a) && inside(e.b) {
                    j += e.cap_ab;
                } else if inside(e.a) && !inside(e.b) {
                    j += e.cap_ba;
                }
            }
            for v in 0..n {
                j += if inside(v) {
                    g.camera_source[v]
                } else {
                    g.sink[v]
                };
            }
            best = best.min(j);
        }
        best
    }

    #[test]
    fn mincut_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let g = random_graph(&mut rng, n);
            let labels = solve_labels(&g);
            let got = g.energy(&labels);
            let want = enumerate_min(&g);
            assert!(
                (got - want).abs() <= 1e-9 * want.max(1.0),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn scaling_keeps_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = rng.gen_range(2..=12);
            let g = random_graph(&mut rng, n);
            let base = solve_labels(&g);
            for k in [0.25, 3.0, 1e4] {
                let mut s = g.clone();
                for e in &mut s.facets {
                    e.cap_ab *= k;
                    e.cap_ba *= k;
                }
                s.camera_source.iter_mut().for_each(|c| *c *= k);
                s.sink.iter_mut().for_each(|c| *c *= k);
                assert_eq!(solve_labels(&s), base);
            }
        }
    }

    fn complex() -> (TetMesh, Vec<Point3<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Point3<f64>> = (0..60)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        (tetrahedralize(&pts).unwrap(), pts)
    }

    fn interior_tet(tets: &TetMesh) -> usize {
        (0..tets.tets.len())
            .find(|&t| {
                tets.adjacency[t]
                    .iter()
                    .all(|n| n.is_some_and(|u| tets.adjacency[u].iter().all(Option::is_some)))
            })
            .unwrap()
    }

    #[test]
    fn zero_visibility_labels_everything_outside() {
        let (tets, _) = complex();
        let g = DualGraph::new(&tets);
        let l = solve_mincut(&tets, &g);
        assert!(l.inside.iter().all(|&i| !i));
        assert_eq!(l.cut_value, 0.0);
        assert!(extract_surface(&l).is_empty());
    }

    #[test]
    fn cut_isolates_one_tet() {
        // All sink weight on one tet; every other tet is pulled outside and the
        // facets leaving the chosen tet carry large capacity outward.
        let (tets, _) = complex();
        let x = interior_tet(&tets);
        let mut g = DualGraph::new(&tets);
        g.sink[x] = 5.0;
        for t in 0..g.tet_count {
            if t != x {
                g.camera_source[t] = 100.0;
            }
        }
        for e in &mut g.facets {
            if e.a == x {
                e.cap_ab = 1e6;
                e.cap_ba = 0.01;
            } else if e.b == x {
                e.cap_ba = 1e6;
                e.cap_ab = 0.01;
            } else {
                e.cap_ab = 1e6;
                e.cap_ba = 1e6;
            }
        }
        let l = solve_mincut(&tets, &g);
        let inside: Vec<usize> = (0..g.tet_count).filter(|&t| l.inside[t]).collect();
        assert_eq!(inside, vec![x]);
        let surface = extract_surface(&l);
        assert_eq!(surface.triangles.len(), 4);
        assert!(surface.is_closed_manifold());
        let p = tets.tets[x].map(|i| tets.vertices[i]);
        let vol = (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0;
        assert!((surface.signed_volume() - vol).abs() < 1e-12);
    }

    #[test]
    fn surface_matches_adjacency_scan() {
        let (tets, _) = complex();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let inside: Vec<bool> = (0..tets.tets.len()).map(|_| rng.gen_bool(0.4)).collect();
            let l = LabeledTetMesh {
                tets: tets.clone(),
                inside: inside.clone(),
                cut_value: 0.0,
            };
            let s = extract_surface(&l);
            s.check().unwrap();
            let got: BTreeSet<[usize; 3]> = s
                .triangles
                .iter()
                .map(|t| {
                    let mut k = t.map(|i| {
                        let p = s.vertices[i];
                        tets.vertices.iter().position(|q| *q == p).unwrap()
                    });
                    k.sort_unstable();
                    k
                })
                .collect();
            let mut want = BTreeSet::new();
            for t in 0..tets.tets.len() {
                for slot in 0..4 {
                    let other = tets.adjacency[t][slot].map_or(false, |u| inside[u]);
                    if inside[t] != other && inside[t] {
                        let mut f = tets.facet(t, slot);
                        f.sort_unstable();
                        want.insert(f);
                    }
                }
            }
            assert_eq!(got, want);
            // Every triangle's normal points out of its inside tet.
            for tri in 0..s.triangles.len() {
                let [a, b, c] = s.triangle(tri);
                let n = (b - a).cross(&(c - a));
                let centroid_side = tets
                    .tets
                    .iter()
                    .enumerate()
                    .filter(|(t, v)| {
                        inside[*t] && {
                            let mut key: Vec<Point3<f64>> =
                                v.iter().map(|&i| tets.vertices[i]).collect();
                            key.retain(|p| *p != a && *p != b && *p != c);
                            key.len() == 1
                        }
                    })
                    .map(|(_, v)| {
                        let g = v
                            .iter()
                            .map(|&i| tets.vertices[i].coords)
                            .sum::<nalgebra::Vector3<f64>>()
                            / 4.0;
                        n.dot(&(g - a.coords))
                    })
                    .collect::<Vec<f64>>();
                assert_eq!(centroid_side.len(), 1);
                assert!(centroid_side[0] < 0.0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn closed_hull_free_sets_are_watertight(seed in any::<u64>(), steps in 1usize..60) {
            let (tets, _) = complex();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let interior: Vec<bool> = (0..tets.tets.len()).map(|t| tets.adjacency[t].iter().all(Option::is_some)).collect();
            let start = interior_tet(&tets);
            // Grow a ball: only add tets sharing one facet whose fourth vertex is new.
            let mut inside = vec![false; tets.tets.len()];
            let mut used: BTreeSet<usize> = tets.tets[start].iter().copied().collect();
            inside[start] = true;
            for _ in 0..steps {
                let cands: Vec<usize> = (0..tets.tets.len())
                    .filter(|&t| !inside[t] && interior[t])
                    .filter(|&t| tets.adjacency[t].iter().filter(|n| n.is_some_and(|u| inside[u])).count() == 1)
                    .filter(|&t| tets.tets[t].iter().filter(|v| !used.contains(v)).count() == 1)
                    .collect();
                if cands.is_empty() {
                    break;
                }
                let t = cands[rng.gen_range(0..cands.len())];
                inside[t] = true;
                used.extend(tets.tets[t]);
            }
            let l = LabeledTetMesh { tets: tets.clone(), inside: inside.clone(), cut_value: 0.0 };
            let s = extract_surface(&l);
            let (components, hull) = inside_components(&l);
            prop_assert_eq!(components, 1);
            prop_assert!(!hull);
            prop_assert!(s.is_closed_manifold());
            prop_assert!(s.is_consistently_oriented());
            prop_assert_eq!(s.euler_characteristic(), 2);
            prop_assert!(s.signed_volume() > 0.0);
            // Arbitrary connected hull-free sets can pinch at an edge, but are
            // always closed: every edge has an even number of faces.
            for t in 0..tets.tets.len() {
                if interior[t] && rng.gen_bool(0.3) {
                    inside[t] = true;
                }
            }
            let s = extract_surface(&LabeledTetMesh { tets, inside, cut_value: 0.0 });
            prop_assert!(s.edge_valence().values().all(|&v| v % 2 == 0));
        }

        #[test]
        fn repair_removes_every_singular_edge(seed in any::<u64>(), p in 0.05..0.6f64) {
            let (tets, _) = complex();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inside: Vec<bool> = (0..tets.tets.len()).map(|_| rng.gen_bool(p)).collect();
            let mut l = LabeledTetMesh { tets, inside: inside.clone(), cut_value: 0.0 };
            let flipped = repair_singular_edges(&mut l);
            prop_assert_eq!(flipped, l.inside.iter().zip(&inside).filter(|(a, b)| a != b).count());
            prop_assert!(l.inside.iter().zip(&inside).all(|(now, was)| *now || !*was));
            let s = extract_surface(&l);
            prop_assert!(s.is_closed_manifold());
            prop_assert!(s.is_consistently_oriented());
        }
    }

    #[test]
    fn repair_fills_an_edge_pinch() {
        let (tets, _) = complex();
        // Two inside tets sharing exactly one edge.
        let mut pair = None;
        'outer: for a in 0..tets.tets.len() {
            for b in a + 1..tets.tets.len() {
                let shared = tets.tets[a]
                    .iter()
                    .filter(|v| tets.tets[b].contains(v))
                    .count();
                if shared == 2 {
                    pair = Some((a, b));
                    break 'outer;
                }
            }
        }
        let (a, b) = pair.unwrap();
        let mut inside = vec![false; tets.tets.len()];
        inside[a] = true;
        inside[b] = true;
        let mut l = LabeledTetMesh {
            tets,
            inside,
            cut_value: 0.0,
        };
        assert!(!extract_surface(&l).is_closed_manifold());
        assert!(repair_singular_edges(&mut l) > 0);
        assert!(extract_surface(&l).is_closed_manifold());
        assert_eq!(repair_singular_edges(&mut l), 0);
    }

    #[test]
    fn postfilter_cases() {
        // Unit equilateral strip: nothing exceeds 5× the median.
        let h = 3f64.sqrt() / 2.0;
        let mut v = Vec::new();
        for i in 0..6 {
            v.push(Point3::new(i as f64, 0.0, 0.0));
            v.push(Point3::new(i as f64 + 0.5, h, 0.0));
        }
        let mut tris = Vec::new();
        for i in 0..5 {
            tris.push([2 * i, 2 * i + 2, 2 * i + 1]);
            tris.push([2 * i + 1, 2 * i + 2, 2 * i + 3]);
        }
        let strip = TriangleMesh::new(v.clone(), tris.clone());
        assert_eq!(postfilter_edges(&strip, 5.0), strip);
        // A sliver reaching 100 units away is dropped along with its lone vertex.
        v.push(Point3::new(100.0, 0.5, 0.0));
        tris.push([0, 1, 12]);
        let out = postfilter_edges(&TriangleMesh::new(v, tris), 5.0);
        assert_eq!(out, strip);
        assert!(postfilter_edges(&TriangleMesh::default(), 5.0).is_empty());
    }

    #[test]
    fn postfilter_matches_direct_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let n = 30;
            let v: Vec<Point3<f64>> = (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(0.0..1.0),
                    )
                })
                .collect();
            let mut tris = BTreeSet::new();
            while tris.len() < 25 {
                let mut t = [
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                ];
                if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                    let key = {
                        t.sort_unstable();
                        t
                    };
                    tris.insert(key);
                }
            }
            let mesh = TriangleMesh::new(v.clone(), tris.iter().copied().collect());
            let factor = rng.gen_range(0.8..2.0);
            let mut lengths: Vec<f64> = Vec::new();
            let mut edges = BTreeSet::new();
            for t in &tris {
                for k in 0..3 {
                    let (a, b) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                    if edges.insert((a, b)) {
                        lengths.push((v[a] - v[b]).norm());
                    }
                }
            }
            lengths.sort_by(f64::total_cmp);
            let m = lengths.len();
            let median = if m % 2 == 1 {
                lengths[m / 2]
            } else {
                (lengths[m / 2 - 1] + lengths[m / 2]) / 2.0
            };
            let keep: Vec<[Point3<f64>; 3]> = tris
                .iter()
                .filter(|t| (0..3).all(|k| (v[t[k]] - v[t[(k + 1) % 3]]).norm() <= factor * median))
                .map(|t| t.map(|i| v[i]))
                .collect();
            let out = postfilter_edges(&mesh, factor);
            let got: Vec<[Point3<f64>; 3]> =
                (0..out.triangles.len()).map(|t| out.triangle(t)).collect();
            assert_eq!(got, keep);
            let used: BTreeSet<usize> = out.triangles.iter().flatten().copied().collect();
            assert_eq!(used.len(), out.vertices.len());
        }
    }
}
