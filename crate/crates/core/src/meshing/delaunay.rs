//! Incremental Delaunay tetrahedralization (Bowyer–Watson).
//!
//! The working structure closes the convex hull with "infinite" cells that
//! share a single vertex at infinity, so every cell has four neighbours and
//! hull growth is just another cavity. Duplicate input points are inserted
//! once; [`TetMesh::canonical`] maps every input index to the vertex that
//! represents it.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::predicates::{insphere_sos, orient3d};
use super::MeshingError;

const INF: usize = usize::MAX;

/// Outward-facing facet opposite each slot, for a positively oriented cell.
pub const FACETS: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    pub vertices: Vec<Point3<f64>>,
    pub tets: Vec<[usize; 4]>,
    /// Neighbour across the facet opposite each slot; `None` on the hull.
    pub adjacency: Vec<[Option<usize>; 4]>,
    pub circumcenters: Vec<Point3<f64>>,
    /// For each input point, the index of the vertex it coincides with.
    pub canonical: Vec<usize>,
}

impl TetMesh {
    /// Facet opposite `slot` with vertices ordered so its normal points out of `t`.
    pub fn facet(&self, t: usize, slot: usize) -> [usize; 3] {
        let v = self.tets[t];
        FACETS[slot].map(|k| v[k])
    }

    pub fn facet_points(&self, t: usize, slot: usize) -> [Point3<f64>; 3] {
        self.facet(t, slot).map(|i| self.vertices[i])
    }

    /// Slot of the neighbour across `(t, slot)` that points back at `t`.
    pub fn mirror_slot(&self, t: usize, slot: usize) -> Option<usize> {
        let n = self.adjacency[t][slot]?;
        (0..4).find(|&k| self.adjacency[n][k] == Some(t))
    }

    /// Interior facets as `(t, slot, u, u_slot)` with `t < u`, in a fixed order.
    pub fn interior_facets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        for t in 0..self.tets.len() {
            for slot in 0..4 {
                if let Some(u) = self.adjacency[t][slot] {
                    if t < u {
                        out.push((
                            t,
                            slot,
                            u,
                            self.mirror_slot(t, slot).expect("symmetric adjacency"),
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn hull_facets(&self) -> Vec<(usize, usize)> {
        (0..self.tets.len())
            .flat_map(|t| (0..4).map(move |s| (t, s)))
            .filter(|&(t, s)| self.adjacency[t][s].is_none())
            .collect()
    }

    /// Tetrahedra incident to each vertex.
    pub fn vertex_stars(&self) -> Vec<Vec<usize>> {
        let mut star = vec![Vec::new(); self.vertices.len()];
        for (t, tet) in self.tets.iter().enumerate() {
            for &v in tet {
                star[v].push(t);
            }
        }
        star
    }

    /// Orientation and adjacency invariants (the Delaunay property is
    /// checked separately by [`TetMesh::delaunay_violation`]).
    pub fn check(&self) -> Result<(), String> {
        for (t, v) in self.tets.iter().enumerate() {
            let p = v.map(|i| self.vertices[i]);
            if orient3d(&p[0], &p[1], &p[2], &p[3]) <= 0.0 {
                return Err(format!("tet {t} is not positively oriented"));
            }
            for slot in 0..4 {
                let Some(n) = self.adjacency[t][slot] else {
                    continue;
                };
                let Some(back) = self.mirror_slot(t, slot) else {
                    return Err(format!("tet {n} does not list {t} as a neighbour"));
                };
                let mut a = self.facet(t, slot);
                let mut b = self.facet(n, back);
                a.sort_unstable();
                b.sort_unstable();
                if a != b {
                    return Err(format!("tets {t} and {n} disagree on their shared facet"));
                }
            }
        }
        Ok(())
    }

    /// First `(tet, vertex)` with the vertex strictly inside the tet's
    /// circumsphere, by exhaustive search.
    pub fn delaunay_violation(&self) -> Option<(usize, usize)> {
        let used: Vec<usize> = {
            let mut u: Vec<usize> = self.canonical.clone();
            u.sort_unstable();
            u.dedup();
            u
        };
        for (t, v) in self.tets.iter().enumerate() {
            let p = v.map(|i| &self.vertices[i]);
            for &q in &used {
                if v.contains(&q) {
                    continue;
                }
                let s = insphere_sos(
                    [p[0], p[1], p[2], p[3], &self.vertices[q]],
                    [None, None, None, None, None],
                );
                if s > 0.0 {
                    return Some((t, q));
                }
            }
        }
        None
    }
}

pub fn circumcenter(
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    d: &Point3<f64>,
) -> Point3<f64> {
    let (b, c, d) = (b - a, c - a, d - a);
    let den = 2.0 * b.dot(&c.cross(&d));
    let num = b.norm_squared() * c.cross(&d)
        + c.norm_squared() * d.cross(&b)
        + d.norm_squared() * b.cross(&c);
    a + num / den
}

struct Builder<'a> {
    pts: &'a [Point3<f64>],
    cells: Vec<[usize; 4]>,
    nbrs: Vec<[usize; 4]>,
    alive: Vec<bool>,
    free: Vec<usize>,
    mark: Vec<u64>,
    epoch: u64,
    last: usize,
    rng: u64,
}

impl<'a> Builder<'a> {
    fn p(&self, i: usize) -> &Point3<f64> {
        &self.pts[i]
    }

    fn is_infinite(&self, c: usize) -> bool {
        self.cells[c].contains(&INF)
    }

    fn next_rand(&mut self) -> u64 {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        self.rng
    }

    fn alloc(&mut self, v: [usize; 4]) -> usize {
        if let Some(c) = self.free.pop() {
            self.cells[c] = v;
            self.nbrs[c] = [INF; 4];
            self.alive[c] = true;
            self.mark[c] = 0;
            c
        } else {
            self.cells.push(v);
            self.nbrs.push([INF; 4]);
            self.alive.push(true);
            self.mark.push(0);
            self.cells.len() - 1
        }
    }

    fn orient_cell(&self, v: &[usize; 4]) -> f64 {
        orient3d(self.p(v[0]), self.p(v[1]), self.p(v[2]), self.p(v[3]))
    }

    fn in_conflict(&self, c: usize, q: usize) -> bool {
        let v = self.cells[c];
        match v.iter().position(|&x| x == INF) {
            None => {
                let s = insphere_sos(
                    [
                        self.p(v[0]),
                        self.p(v[1]),
                        self.p(v[2]),
                        self.p(v[3]),
                        self.p(q),
                    ],
                    [Some(v[0]), Some(v[1]), Some(v[2]), Some(v[3]), Some(q)],
                );
                s > 0.0
            }
            Some(j) => {
                let mut w = v;
                w[j] = q;
                let o = self.orient_cell(&w);
                if o != 0.0 {
                    return o > 0.0;
                }
                // On the hull plane: conflict iff inside the facet's circumcircle,
                // tested against a sphere through the facet and an off-plane helper.
                let f: Vec<usize> = v.iter().copied().filter(|&x| x != INF).collect();
                let (a, b, cc) = (self.p(f[0]), self.p(f[1]), self.p(f[2]));
                let scale = (b - a).norm().max((cc - a).norm()).max((cc - b).norm());
                // Any helper off the plane works; its side fixes the sign.
                for axis in 0..3 {
                    let mut helper = *a;
                    helper[axis] += scale;
                    let side = orient3d(a, b, cc, &helper);
                    if side != 0.0 {
                        let s = insphere_sos(
                            [a, b, cc, &helper, self.p(q)],
                            [Some(f[0]), Some(f[1]), Some(f[2]), None, Some(q)],
                        );
                        return s * side.signum() > 0.0;
                    }
                }
                unreachable!("a plane cannot contain all three axis directions")
            }
        }
    }

    fn locate(&mut self, q: usize) -> usize {
        let mut c = self.last;
        if !self.alive[c] {
            c = (0..self.cells.len())
                .find(|&k| self.alive[k])
                .expect("live cell");
        }
        if self.is_infinite(c) {
            let j = self.cells[c].iter().position(|&x| x == INF).unwrap();
            c = self.nbrs[c][j];
        }
        let limit = 4 * self.cells.len() + 64;
        'walk: for _ in 0..limit {
            if self.is_infinite(c) {
                return c;
            }
            let start = (self.next_rand() % 4) as usize;
            for k in 0..4 {
                let j = (start + k) % 4;
                let mut w = self.cells[c];
                w[j] = q;
                if self.orient_cell(&w) < 0.0 {
                    c = self.nbrs[c][j];
                    continue 'walk;
                }
            }
            return c;
        }
        (0..self.cells.len())
            .find(|&k| self.alive[k] && self.in_conflict(k, q))
            .expect("some cell conflicts with a new point")
    }

    fn insert(&mut self, q: usize) {
        let start = self.locate(q);
        self.epoch += 2;
        let (yes, no) = (self.epoch, self.epoch + 1);
        self.mark[start] = yes;
        let mut conflict = vec![start];
        let mut boundary = Vec::new();
        let mut i = 0;
        while i < conflict.len() {
            let c = conflict[i];
            i += 1;
            for j in 0..4 {
                let n = self.nbrs[c][j];
                if self.mark[n] == yes {
                    continue;
                }
                if self.mark[n] != no && self.in_conflict(n, q) {
                    self.mark[n] = yes;
                    conflict.push(n);
                } else {
                    self.mark[n] = no;
                    boundary.push((c, j));
                }
            }
        }

        let mut open: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        let mut created = Vec::with_capacity(boundary.len());
        for &(c, j) in &boundary {
            let mut v = self.cells[c];
            v[j] = q;
            let outside = self.nbrs[c][j];
            let nc = self.alloc(v);
            debug_assert!(v.contains(&INF) || self.orient_cell(&v) > 0.0);
            self.nbrs[nc][j] = outside;
            let back = (0..4)
                .find(|&k| self.nbrs[outside][k] == c)
                .expect("symmetric adjacency");
            self.nbrs[outside][back] = nc;
            for k in (0..4).filter(|&k| k != j) {
                let mut key = [0; 3];
                let mut m = 0;
                for (s, &x) in v.iter().enumerate() {
                    if s != k {
                        key[m] = x;
                        m += 1;
                    }
                }
                key.sort_unstable();
                if let Some((oc, ok)) = open.remove(&key) {
                    self.nbrs[nc][k] = oc;
                    self.nbrs[oc][ok] = nc;
                } else {
                    open.insert(key, (nc, k));
                }
            }
            created.push(nc);
        }
        debug_assert!(open.is_empty(), "cavity boundary is not closed");
        for c in conflict {
            self.alive[c] = false;
            self.free.push(c);
        }
        self.last = created
            .iter()
            .copied()
            .find(|&c| !self.is_infinite(c))
            .unwrap_or(created[0]);
    }
}

fn morton_key(p: &Point3<f64>, lo: &Point3<f64>, extent: &Vector3<f64>) -> u64 {
    let mut key = 0u64;
    let q: [u64; 3] = std::array::from_fn(|k| {
        let t = if extent[k] > 0.0 {
            (p[k] - lo[k]) / extent[k]
        } else {
            0.0
        };
        (t.clamp(0.0, 1.0) * ((1u64 << 21) - 1) as f64) as u64
    });
    for bit in (0..21).rev() {
        for axis in q {
            key = (key << 1) | ((axis >> bit) & 1);
        }
    }
    key
}

fn collinear(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> bool {
    use robust::{orient2d, Coord};
    let proj = |p: &Point3<f64>, i: usize, j: usize| Coord { x: p[i], y: p[j] };
    [(0, 1), (1, 2), (0, 2)]
        .iter()
        .all(|&(i, j)| orient2d(proj(a, i, j), proj(b, i, j), proj(c, i, j)) == 0.0)
}

pub fn tetrahedralize(points: &[Point3<f64>]) -> Result<TetMesh, MeshingError> {
    if let Some(i) = points
        .iter()
        .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
    {
        return Err(MeshingError::NonFinite(i));
    }
    let mut first: HashMap<[u64; 3], usize> = HashMap::new();
    let mut canonical = Vec::with_capacity(points.len());
    let mut unique = Vec::new();
    for (i, p) in points.iter().enumerate() {
        // +0.0 normalises negative zero so equal coordinates share a key.
        let key = [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits);
        let c = *first.entry(key).or_insert_with(|| {
            unique.push(i);
            i
        });
        canonical.push(c);
    }
    if unique.len() < 4 {
        return Err(MeshingError::TooFewPoints(unique.len()));
    }

    let p = |i: usize| &points[i];
    let a = unique[0];
    let b = unique[1];
    let c = *unique[2..]
        .iter()
        .find(|&&i| !collinear(p(a), p(b), p(i)))
        .ok_or(MeshingError::Coplanar)?;
    let d = *unique[2..]
        .iter()
        .find(|&&i| orient3d(p(a), p(b), p(c), p(i)) != 0.0)
        .ok_or(MeshingError::Coplanar)?;
    let seed = if orient3d(p(a), p(b), p(c), p(d)) > 0.0 {
        [a, b, c, d]
    } else {
        [a, b, d, c]
    };

    let mut builder = Builder {
        pts: points,
        cells: Vec::new(),
        nbrs: Vec::new(),
        alive: Vec::new(),
        free: Vec::new(),
        mark: Vec::new(),
        epoch: 0,
        last: 0,
        rng: 0x9E37_79B9_7F4A_7C15,
    };
    let root = builder.alloc(seed);
    for slot in 0..4 {
        let f = FACETS[slot].map(|k| seed[k]);
        let inf = builder.alloc([f[0], f[1], f[2], INF]);
        builder.nbrs[root][slot] = inf;
        builder.nbrs[inf][3] = root;
    }
    // Infinite cells meet each other across facets that contain the infinite vertex.
    let mut open: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
    for cell in 1..5 {
        for k in 0..3 {
            let v = builder.cells[cell];
            let mut key = [0; 3];
            let mut m = 0;
            for (s, &x) in v.iter().enumerate() {
                if s != k {
                    key[m] = x;
                    m += 1;
                }
            }
            key.sort_unstable();
            if let Some((oc, ok)) = open.remove(&key) {
                builder.nbrs[cell][k] = oc;
                builder.nbrs[oc][ok] = cell;
            } else {
                open.insert(key, (cell, k));
            }
        }
    }

    let (lo, hi) = points
        .iter()
        .fold((points[0], points[0]), |(lo, hi), q| (lo.inf(q), hi.sup(q)));
    let extent = hi - lo;
    let mut rest: Vec<(u64, usize)> = unique
        .iter()
        .copied()
        .filter(|i| !seed.contains(i))
        .map(|i| (morton_key(p(i), &lo, &extent), i))
        .collect();
    rest.sort_unstable();
    for (_, i) in rest {
        builder.insert(i);
    }

    let mut remap = vec![usize::MAX; builder.cells.len()];
    let mut tets = Vec::new();
    for c in 0..builder.cells.len() {
        if builder.alive[c] && !builder.is_infinite(c) {
            remap[c] = tets.len();
            tets.push(builder.cells[c]);
        }
    }
    let adjacency = (0..builder.cells.len())
        .filter(|&c| remap[c] != usize::MAX)
        .map(|c| {
            builder.nbrs[c].map(|n| match remap[n] {
                usize::MAX => None,
                m => Some(m),
            })
        })
        .collect();
    let circumcenters = tets
        .iter()
        .map(|t| circumcenter(p(t[0]), p(t[1]), p(t[2]), p(t[3])))
        .collect();
    Ok(TetMesh {
        vertices: points.to_vec(),
        tets,
        adjacency,
        circumcenters,
        canonical,
    })
}

#[cfg(test)]
mod tests {
    use super::super::oracle;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    }

    fn volume(mesh: &TetMesh) -> f64 {
        mesh.tets
            .iter()
            .map(|t| {
                let p = t.map(|i| mesh.vertices[i]);
                (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0
            })
            .sum()
    }

    fn tet_set(mesh: &TetMesh) -> BTreeSet<[usize; 4]> {
        mesh.tets
            .iter()
            .map(|t| {
                let mut s = *t;
                s.sort_unstable();
                s
            })
            .collect()
    }

    #[test]
    fn single_tetrahedron() {
        let s = 8f64.sqrt() / 3.0;
        let pts = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(s, 0.0, -1.0 / 3.0),
            Point3::new(-s / 2.0, (2.0f64 / 3.0).sqrt(), -1.0 / 3.0),
            Point3::new(-s / 2.0, -(2.0f64 / 3.0).sqrt(), -1.0 / 3.0),
        ];
        let m = tetrahedralize(&pts).unwrap();
        assert_eq!(m.tets.len(), 1);
        assert_eq!(m.hull_facets().len(), 4);
        assert!(m.interior_facets().is_empty());
        assert!(m.circumcenters[0].coords.norm() < 1e-12);
        m.check().unwrap();
    }

    #[test]
    fn centroid_split_matches_subset_enumeration() {
        let mut pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(3.0, 0.2, 0.1),
            Point3::new(0.4, 2.7, -0.3),
            Point3::new(0.2, 0.5, 2.9),
        ];
        let g = Point3::from(pts.iter().map(|p| p.coords).sum::<Vector3<f64>>() / 4.0);
        pts.push(g);
        let m = tetrahedralize(&pts).unwrap();
        assert_eq!(m.tets.len(), 4);
        assert!(m.tets.iter().all(|t| t.contains(&4)));
        // Every non-degenerate 4-subset with an empty circumsphere.
        let mut expect = BTreeSet::new();
        for a in 0..5 {
            for b in a + 1..5 {
                for c in b + 1..5 {
                    for d in c + 1..5 {
                        let mut p = [&pts[a], &pts[b], &pts[c], &pts[d]];
                        let sign = oracle::exact_volume_sign(p);
                        if sign == 0 {
                            continue;
                        }
                        if sign < 0 {
                            p.swap(2, 3);
                        }
                        let rest = (0..5).filter(|i| ![a, b, c, d].contains(i));
                        if rest
                            .into_iter()
                            .all(|e| !oracle::strictly_inside(p, &pts[e]))
                        {
                            expect.insert([a, b, c, d]);
                        }
                    }
                }
            }
        }
        assert_eq!(tet_set(&m), expect);
    }

    #[test]
    fn fifty_random_points_pass_brute_force() {
        let m = tetrahedralize(&random_points(50, 1)).unwrap();
        m.check().unwrap();
        oracle::delaunay_ok(&m).unwrap();
        assert_eq!(m.delaunay_violation(), None);
    }

    #[test]
    fn cospherical_lattice() {
        // A 4×4×4 lattice has massive cospherical degeneracy.
        let mut pts = Vec::new();
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    pts.push(Point3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let m = tetrahedralize(&pts).unwrap();
        m.check().unwrap();
        oracle::delaunay_ok(&m).unwrap();
        assert!((volume(&m) - 27.0).abs() < 1e-9);
        let used: BTreeSet<usize> = m.tets.iter().flatten().copied().collect();
        assert_eq!(used.len(), 64);
    }

    #[test]
    fn errors_and_duplicates() {
        let o = Point3::origin();
        assert_eq!(
            tetrahedralize(&[o, o, o]),
            Err(MeshingError::TooFewPoints(1))
        );
        let flat: Vec<Point3<f64>> = (0..10)
            .map(|i| Point3::new(i as f64, (i * i) as f64, 0.0))
            .collect();
        assert_eq!(tetrahedralize(&flat), Err(MeshingError::Coplanar));
        let line: Vec<Point3<f64>> = (0..10)
            .map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0))
            .collect();
        assert_eq!(tetrahedralize(&line), Err(MeshingError::Coplanar));
        assert_eq!(
            tetrahedralize(&[o, o, Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)]),
            Err(MeshingError::TooFewPoints(3))
        );
        let mut pts = random_points(20, 4);
        pts.push(pts[3]);
        pts.push(Point3::new(-0.0, 0.0, 0.0));
        pts.push(Point3::new(0.0, -0.0, 0.0));
        let m = tetrahedralize(&pts).unwrap();
        assert_eq!(m.canonical[20], 3);
        assert_eq!(m.canonical[22], 21);
        assert!(m.tets.iter().flatten().all(|&v| v != 20 && v != 22));
        m.check().unwrap();
        oracle::delaunay_ok(&m).unwrap();
        assert!(tetrahedralize(&[o, Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn hull_points_on_a_plane() {
        // Many coplanar hull points (a grid on z=0) plus a few above.
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                pts.push(Point3::new(x as f64 * 0.5, y as f64 * 0.5, 0.0));
            }
        }
        pts.push(Point3::new(1.1, 1.3, 1.0));
        pts.push(Point3::new(0.3, 2.0, 0.7));
        let m = tetrahedralize(&pts).unwrap();
        m.check().unwrap();
        oracle::delaunay_ok(&m).unwrap();
        let used: BTreeSet<usize> = m.tets.iter().flatten().copied().collect();
        assert_eq!(used.len(), pts.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_sets_are_delaunay(n in 4usize..200, seed in any::<u64>(), snap in prop::bool::ANY) {
            let mut pts = random_points(n, seed);
            if snap {
                // Snap to a coarse grid to force ties and duplicates.
                for p in &mut pts {
                    *p = p.map(|v| (v * 3.0).round() / 3.0);
                }
            }
            match tetrahedralize(&pts) {
                Ok(m) => {
                    prop_assert!(m.check().is_ok());
                    let ok = oracle::delaunay_ok(&m);
                    prop_assert!(ok.is_ok(), "{:?} {:?}", ok, m.delaunay_violation());
                    let used: BTreeSet<usize> = m.tets.iter().flatten().copied().collect();
                    let distinct: BTreeSet<usize> = m.canonical.iter().copied().collect();
                    prop_assert_eq!(used, distinct);
                }
                Err(e) => prop_assert!(matches!(e, MeshingError::TooFewPoints(_) | MeshingError::Coplanar)),
            }
        }
    }
}
