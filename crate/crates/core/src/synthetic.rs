//! Procedural buildings with exact ground truth: meshes, helix camera paths,
//! ray-traced depth/normal maps and Gaussian primitive sets sampled on the
//! surface (plus optional clutter hidden inside the solid).

use std::f64::consts::PI;

use nalgebra::{Point2, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::Bvh;
use crate::scene::{CameraView, GaussianPrimitive, ImageBuffer, TriangleMesh};

#[derive(Debug, Error, PartialEq)]
pub enum SyntheticError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Roof {
    Flat,
    Gable { ridge_height: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingSpec {
    pub width: f64,
    pub depth: f64,
    pub wall_height: f64,
    pub roof: Roof,
    pub seed: u64,
}

impl BuildingSpec {
    pub fn gable(width: f64, depth: f64, wall_height: f64, ridge_height: f64) -> Self {
        Self {
            width,
            depth,
            wall_height,
            roof: Roof::Gable { ridge_height },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        let dims = [self.width, self.depth, self.wall_height];
        if !dims.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(SyntheticError::InvalidSpec(
                "building dimensions must be positive".into(),
            ));
        }
        if let Roof::Gable { ridge_height } = self.roof {
            if !(ridge_height.is_finite() && ridge_height > 0.0) {
                return Err(SyntheticError::InvalidSpec(
                    "ridge_height must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn total_height(&self) -> f64 {
        match self.roof {
            Roof::Flat => self.wall_height,
            Roof::Gable { ridge_height } => self.wall_height + ridge_height,
        }
    }

    pub fn footprint_diagonal(&self) -> f64 {
        self.width.hypot(self.depth)
    }

    /// Radius of the smallest sphere around [`BuildingSpec::center`] containing the building.
    pub fn circumradius(&self) -> f64 {
        let h = self.total_height() / 2.0;
        (self.footprint_diagonal() / 2.0).hypot(h)
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::new(0.0, 0.0, self.total_height() / 2.0)
    }
}

/// Closed, outward-oriented building centred on the origin in x/y, standing
/// on z = 0. A gable ridge runs along x.
pub fn generate_building(spec: &BuildingSpec) -> Result<TriangleMesh, SyntheticError> {
    spec.validate()?;
    let (w, d, h) = (spec.width / 2.0, spec.depth / 2.0, spec.wall_height);
    let mut v = vec![
        Point3::new(-w, -d, 0.0),
        Point3::new(w, -d, 0.0),
        Point3::new(w, d, 0.0),
        Point3::new(-w, d, 0.0),
        Point3::new(-w, -d, h),
        Point3::new(w, -d, h),
        Point3::new(w, d, h),
        Point3::new(-w, d, h),
    ];
    let mut quads = vec![
        [0, 3, 2, 1],
        [0, 1, 5, 4],
        [1, 2, 6, 5],
        [2, 3, 7, 6],
        [3, 0, 4, 7],
    ];
    let mut tris = Vec::new();
    match spec.roof {
        Roof::Flat => quads.push([4, 5, 6, 7]),
        Roof::Gable { ridge_height } => {
            v.push(Point3::new(-w, 0.0, h + ridge_height));
            v.push(Point3::new(w, 0.0, h + ridge_height));
            quads.push([4, 5, 9, 8]);
            quads.push([6, 7, 8, 9]);
            tris.push([5, 6, 9]);
            tris.push([7, 4, 8]);
        }
    }
    let mut triangles: Vec<[usize; 3]> = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    triangles.extend(tris);
    Ok(TriangleMesh::new(v, triangles))
}

/// Edges whose two faces are not coplanar, as segments.
pub fn creases(mesh: &TriangleMesh) -> Vec<(Point3<f64>, Point3<f64>)> {
    let mut faces: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            faces.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    faces
        .into_iter()
        .filter(|(_, f)| {
            f.len() != 2 || mesh.face_normal(f[0]).dot(&mesh.face_normal(f[1])) < 1.0 - 1e-9
        })
        .map(|((a, b), _)| (mesh.vertices[a], mesh.vertices[b]))
        .collect()
}

pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to the nearest crease segment.
pub fn crease_distance(p: &Point3<f64>, creases: &[(Point3<f64>, Point3<f64>)]) -> f64 {
    creases
        .iter()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub view_count: usize,
    pub radius: f64,
    /// Camera heights (world z) at the first and last view.
    pub elevation: (f64, f64),
    pub turns: f64,
    pub resolution: u32,
    pub fov_degrees: f64,
}

impl TrajectorySpec {
    /// 80 views at 1000 px on a helix of radius 2.5× the footprint diagonal,
    /// rising from 0.5× to 2× the wall height over 1.5 turns.
    pub fn for_building(b: &BuildingSpec) -> Self {
        Self {
            view_count: 80,
            radius: 2.5 * b.footprint_diagonal(),
            elevation: (0.5 * b.wall_height, 2.0 * b.wall_height),
            turns: 1.5,
            resolution: 1000,
            fov_degrees: 30.0,
        }
    }

    pub fn validate(&self, circumradius: f64) -> Result<(), SyntheticError> {
        if self.view_count < 2 {
            return Err(SyntheticError::InvalidSpec(
                "view_count must be at least 2".into(),
            ));
        }
        if !(self.radius > circumradius) {
            return Err(SyntheticError::InvalidSpec(format!(
                "radius {} does not clear the building (circumradius {circumradius})",
                self.radius
            )));
        }
        if self.resolution == 0 || !(self.fov_degrees > 0.0 && self.fov_degrees < 180.0) {
            return Err(SyntheticError::InvalidSpec(
                "resolution and field of view must be positive".into(),
            ));
        }
        if !(self.turns.is_finite() && self.elevation.0.is_finite() && self.elevation.1.is_finite())
        {
            return Err(SyntheticError::InvalidSpec(
                "non-finite trajectory parameter".into(),
            ));
        }
        Ok(())
    }

    pub fn focal(&self) -> f64 {
        f64::from(self.resolution) / 2.0 / (self.fov_degrees.to_radians() / 2.0).tan()
    }
}

/// Cameras on a helix around `target`, each looking at it.
pub fn spiral_trajectory(spec: &TrajectorySpec, target: &Point3<f64>) -> Vec<CameraView> {
    let n = spec.view_count;
    (0..n)
        .map(|i| {
            let angle = 2.0 * PI * spec.turns * i as f64 / n as f64;
            let frac = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            let z = spec.elevation.0 + (spec.elevation.1 - spec.elevation.0) * frac;
            let eye = Point3::new(
                target.x + spec.radius * angle.cos(),
                target.y + spec.radius * angle.sin(),
                z,
            );
            CameraView::look_at(
                i as u32,
                eye,
                *target,
                spec.focal(),
                spec.resolution,
                spec.resolution,
            )
        })
        .collect()
}

/// Möller–Trumbore; returns the ray parameter of a front or back hit.
pub fn ray_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    tri: &[Point3<f64>; 3],
) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() * dir.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

/// Exact depth (camera z) and world normal maps; misses hold 0.
pub fn render_ground_truth(mesh: &TriangleMesh, view: &CameraView) -> (ImageBuffer, ImageBuffer) {
    let (w, h) = (view.width as usize, view.height as usize);
    let mut depth = ImageBuffer::new(w, h, 1);
    let mut normal = ImageBuffer::new(w, h, 3);
    let origin = view.center();
    let tris: Vec<[Point3<f64>; 3]> = (0..mesh.triangles.len())
        .map(|t| mesh.triangle(t))
        .collect();
    let normals: Vec<Vector3<f64>> = (0..mesh.triangles.len())
        .map(|t| mesh.face_normal(t))
        .collect();
    for y in 0..h {
        for x in 0..w {
            let dir = view.world_ray(&Point2::new(x as f64, y as f64));
            let hit = tris
                .iter()
                .enumerate()
                .filter_map(|(i, t)| ray_triangle(&origin, &dir, t).map(|s| (s, i)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((s, i)) = hit {
                let z = view.to_camera(&(origin + dir * s)).z;
                depth.set(x, y, 0, z as f32);
                for c in 0..3 {
                    normal.set(x, y, c, normals[i][c] as f32);
                }
            }
        }
    }
    (depth, normal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    /// Surface samples per unit area.
    pub density: f64,
    /// Width of the band along each crease that receives a second layer of samples.
    pub edge_bias: f64,
    /// Clutter count as a fraction of the surface sample count.
    pub clutter_fraction: f64,
    pub seed: u64,
}

/// Primitives with ids assigned in blocks: surface, crease band, clutter.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSample {
    pub primitives: Vec<GaussianPrimitive>,
    pub surface_count: usize,
    pub edge_count: usize,
    pub clutter_count: usize,
}

impl PrimitiveSample {
    pub fn is_clutter(&self, id: u64) -> bool {
        id as usize >= self.surface_count + self.edge_count
    }
}

const OPACITY: f64 = 0.9;

/// Winding number of `mesh` around `p` (1 inside a closed outward mesh, 0 outside).
pub fn winding_number(mesh: &TriangleMesh, p: &Point3<f64>) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t).map(|v| v - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * PI)
}

/// Crease segments bounding the planar face each triangle belongs to.
fn face_creases(
    mesh: &TriangleMesh,
    creases: &[(Point3<f64>, Point3<f64>)],
) -> Vec<Vec<(Point3<f64>, Point3<f64>)>> {
    let on_plane = |t: usize, q: &Point3<f64>| {
        let [a, ..] = mesh.triangle(t);
        mesh.face_normal(t).dot(&(q - a)).abs() < 1e-9
    };
    (0..mesh.triangles.len())
        .map(|t| {
            let n = mesh.face_normal(t);
            creases
                .iter()
                .filter(|(a, b)| {
                    on_plane(t, a)
                        && on_plane(t, b)
                        && (0..mesh.triangles.len()).any(|u| {
                            mesh.face_normal(u).dot(&n) > 1.0 - 1e-9 && {
                                let tri = mesh.triangle(u);
                                tri.contains(a) && tri.contains(b)
                            }
                        })
                })
                .copied()
                .collect()
        })
        .collect()
}

/// Surfel at `center` on a face bounded by `creases`. Near a crease the
/// footprint is narrowed across it so it does not overhang the face.
fn surfel(
    id: usize,
    center: Point3<f64>,
    normal: Vector3<f64>,
    creases: &[(Point3<f64>, Point3<f64>)],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> GaussianPrimitive {
    let shade = rng.gen_range(0.4..0.9);
    let color = Vector3::repeat(shade);
    let mut near: Vec<(f64, Vector3<f64>)> = creases
        .iter()
        .map(|(a, b)| (point_segment_distance(&center, a, b), (b - a).normalize()))
        .collect();
    near.sort_by(|x, y| x.0.total_cmp(&y.0));
    let limit = |d: f64| (d / 3.0).clamp(0.1 * sigma, sigma);
    let Some(&(d0, along)) = near.first().filter(|(d, _)| limit(*d) < sigma) else {
        return GaussianPrimitive::surfel(
            id as u64,
            center,
            normal,
            sigma,
            0.1 * sigma,
            OPACITY,
            color,
        );
    };
    let n = normal.normalize();
    let across = n.cross(&along);
    let s_along = near.get(1).map_or(sigma, |(d, _)| limit(*d));
    let s_across = limit(d0);
    let s_n = 0.1 * sigma;
    let covariance = along * along.transpose() * (s_along * s_along)
        + across * across.transpose() * (s_across * s_across)
        + n * n.transpose() * (s_n * s_n);
    GaussianPrimitive {
        id: id as u64,
        center,
        covariance,
        opacity: OPACITY,
        color,
        normal: n,
    }
}

pub fn sample_primitives(
    mesh: &TriangleMesh,
    spec: &SampleSpec,
) -> Result<PrimitiveSample, SyntheticError> {
    if !(spec.density > 0.0 && spec.density.is_finite()) {
        return Err(SyntheticError::InvalidSpec(
            "density must be positive".into(),
        ));
    }
    if !(spec.edge_bias >= 0.0) || !(spec.clutter_fraction >= 0.0) {
        return Err(SyntheticError::InvalidSpec(
            "edge_bias and clutter_fraction must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = 1.0 / spec.density.sqrt();
    let areas: Vec<f64> = (0..mesh.triangles.len())
        .map(|t| 0.5 * mesh.face_cross(t).norm())
        .collect();
    let total: f64 = areas.iter().sum();
    let mut prims = Vec::new();
    let segs = creases(mesh);
    let bounds = face_creases(mesh, &segs);

    let surface_count = (spec.density * total).round() as usize;
    for _ in 0..surface_count {
        let t = pick(&areas, total, &mut rng);
        let [a, b, c] = mesh.triangle(t);
        let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let p = a + (b - a) * u + (c - a) * v;
        let id = prims.len();
        prims.push(surfel(
            id,
            p,
            mesh.face_normal(t),
            &bounds[t],
            sigma,
            &mut rng,
        ));
    }

    // Crease bands: for each crease edge and each triangle holding it, the
    // strip of that triangle within `edge_bias` of the edge.
    let crease_set: std::collections::BTreeSet<(usize, usize)> = {
        let mut set = std::collections::BTreeSet::new();
        for tri in &mesh.triangles {
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                let (pi, pj) = (mesh.vertices[i], mesh.vertices[j]);
                if segs
                    .iter()
                    .any(|(a, b)| (*a == pi && *b == pj) || (*a == pj && *b == pi))
                {
                    set.insert((i.min(j), i.max(j)));
                }
            }
        }
        set
    };
    let mut strips = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (i, j, o) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            if !crease_set.contains(&(i.min(j), i.max(j))) || spec.edge_bias == 0.0 {
                continue;
            }
            let height = 2.0 * areas[t] / (mesh.vertices[j] - mesh.vertices[i]).norm();
            let m = (spec.edge_bias / height).min(1.0);
            strips.push((t, i, j, o, m, areas[t] * (1.0 - (1.0 - m) * (1.0 - m))));
        }
    }
    let strip_areas: Vec<f64> = strips.iter().map(|s| s.5).collect();
    let strip_total: f64 = strip_areas.iter().sum();
    let edge_count = (spec.density * strip_total).round() as usize;
    for _ in 0..edge_count {
        let (t, i, j, o, m, _) = strips[pick(&strip_areas, strip_total, &mut rng)];
        // Uniform over the strip: the opposite-vertex weight has density ∝ (1 − λ).
        let u: f64 = rng.gen();
        let lambda = 1.0 - (1.0 - u * (1.0 - (1.0 - m) * (1.0 - m))).sqrt();
        let s: f64 = rng.gen();
        let (a, b, c) = (mesh.vertices[i], mesh.vertices[j], mesh.vertices[o]);
        let base = a + (b - a) * s;
        let p = base + (c - base) * lambda;
        let id = prims.len();
        prims.push(surfel(
            id,
            p,
            mesh.face_normal(t),
            &bounds[t],
            sigma,
            &mut rng,
        ));
    }

    let clutter_count = (spec.clutter_fraction * surface_count as f64).round() as usize;
    if clutter_count > 0 {
        let (lo, hi) = mesh
            .bounding_box()
            .ok_or_else(|| SyntheticError::InvalidSpec("empty mesh".into()))?;
        let extent = hi - lo;
        let margin = 0.1 * extent.min();
        let bvh = Bvh::build(mesh).map_err(|e| SyntheticError::InvalidSpec(e.to_string()))?;
        let mut placed = 0;
        let mut attempts = 0usize;
        while placed < clutter_count {
            attempts += 1;
            if attempts > 1000 * clutter_count + 1000 {
                return Err(SyntheticError::InvalidSpec(
                    "mesh interior too thin for clutter".into(),
                ));
            }
            let p = Point3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            );
            if winding_number(mesh, &p) < 0.5 || bvh.nearest(&p).0 < margin {
                continue;
            }
            let n = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if n.norm() < 1e-3 {
                continue;
            }
            let id = prims.len();
            prims.push(surfel(id, p, n, &[], sigma, &mut rng));
            placed += 1;
        }
    }
    Ok(PrimitiveSample {
        primitives: prims,
        surface_count,
        edge_count,
        clutter_count,
    })
}

fn pick(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let mut r = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Everything needed to generate one synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub building: BuildingSpec,
    pub trajectory: TrajectorySpec,
    pub sampling: SampleSpec,
}

pub const SCENE_KEYS: &[&str] = &[
    "width",
    "depth",
    "wall_height",
    "roof",
    "ridge_height",
    "seed",
    "view_count",
    "radius",
    "elevation_lo",
    "elevation_hi",
    "turns",
    "resolution",
    "fov_degrees",
    "density",
    "edge_bias",
    "clutter_fraction",
];

impl Default for SceneSpec {
    /// Gabled 4×3×2.5 house with a 1-unit ridge, 40 views at 256 px, 200
    /// samples per unit area and 20% interior clutter.
    fn default() -> Self {
        let building = BuildingSpec::gable(4.0, 3.0, 2.5, 1.0);
        let mut trajectory = TrajectorySpec::for_building(&building);
        trajectory.view_count = 40;
        trajectory.resolution = 256;
        Self {
            building,
            trajectory,
            sampling: SampleSpec {
                density: 200.0,
                edge_bias: 0.05,
                clutter_fraction: 0.2,
                seed: 0,
            },
        }
    }
}

impl SceneSpec {
    /// `key = value` lines, `#` comments. Trajectory keys that are absent
    /// default from the building dimensions.
    pub fn parse(text: &str) -> Result<Self, SyntheticError> {
        let mut kv = std::collections::BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                SyntheticError::InvalidSpec(format!("line {}: expected `key = value`", i + 1))
            })?;
            let k = k.trim();
            if !SCENE_KEYS.contains(&k) {
                return Err(SyntheticError::InvalidSpec(format!("unknown key `{k}`")));
            }
            kv.insert(k.to_string(), v.trim().to_string());
        }
        let num = |k: &str| -> Result<Option<f64>, SyntheticError> {
            kv.get(k)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        SyntheticError::InvalidSpec(format!("bad value `{v}` for `{k}`"))
                    })
                })
                .transpose()
        };
        let int = |k: &str| -> Result<Option<u64>, SyntheticError> {
            kv.get(k)
                .map(|v| {
                    v.parse::<u64>().map_err(|_| {
                        SyntheticError::InvalidSpec(format!("bad value `{v}` for `{k}`"))
                    })
                })
                .transpose()
        };
        let mut spec = Self::default();
        let b = &mut spec.building;
        b.width = num("width")?.unwrap_or(b.width);
        b.depth = num("depth")?.unwrap_or(b.depth);
        b.wall_height = num("wall_height")?.unwrap_or(b.wall_height);
        b.seed = int("seed")?.unwrap_or(0);
        let ridge = num("ridge_height")?;
        b.roof = match kv.get("roof").map(String::as_str) {
            Some("flat") => Roof::Flat,
            Some("gable") | None => Roof::Gable {
                ridge_height: ridge.unwrap_or(1.0),
            },
            Some(other) => {
                return Err(SyntheticError::InvalidSpec(format!(
                    "bad value `{other}` for `roof`"
                )))
            }
        };
        b.validate()?;
        let mut t = TrajectorySpec::for_building(b);
        t.view_count = int("view_count")?.map_or(spec.trajectory.view_count, |v| v as usize);
        t.resolution = int("resolution")?.map_or(Ok(spec.trajectory.resolution), |v| {
            u32::try_from(v).map_err(|_| SyntheticError::InvalidSpec("resolution too large".into()))
        })?;
        t.radius = num("radius")?.unwrap_or(t.radius);
        t.elevation.0 = num("elevation_lo")?.unwrap_or(t.elevation.0);
        t.elevation.1 = num("elevation_hi")?.unwrap_or(t.elevation.1);
        t.turns = num("turns")?.unwrap_or(t.turns);
        t.fov_degrees = num("fov_degrees")?.unwrap_or(t.fov_degrees);
        t.validate(b.circumradius())?;
        spec.trajectory = t;
        let s = &mut spec.sampling;
        s.density = num("density")?.unwrap_or(s.density);
        s.edge_bias = num("edge_bias")?.unwrap_or(s.edge_bias);
        s.clutter_fraction = num("clutter_fraction")?.unwrap_or(s.clutter_fraction);
        s.seed = spec.building.seed;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let (b, t, s) = (&self.building, &self.trajectory, &self.sampling);
        let roof = match b.roof {
            Roof::Flat => "roof = flat\n".to_string(),
            Roof::Gable { ridge_height } => {
                format!("roof = gable\nridge_height = {ridge_height}\n")
            }
        };
        format!(
            "width = {}\ndepth = {}\nwall_height = {}\n{roof}seed = {}\nview_count = {}\nradius = {}\n\
             elevation_lo = {}\nelevation_hi = {}\nturns = {}\nresolution = {}\nfov_degrees = {}\n\
             density = {}\nedge_bias = {}\nclutter_fraction = {}\n",
            b.width,
            b.depth,
            b.wall_height,
            b.seed,
            t.view_count,
            t.radius,
            t.elevation.0,
            t.elevation.1,
            t.turns,
            t.resolution,
            t.fov_degrees,
            s.density,
            s.edge_bias,
            s.clutter_fraction,
        )
    }
}

/// A generated scene held in memory.
#[derive(Debug, Clone)]
pub struct SceneAssets {
    pub spec: SceneSpec,
    pub mesh: TriangleMesh,
    pub views: Vec<CameraView>,
    pub gt_depths: Vec<ImageBuffer>,
    pub gt_normals: Vec<ImageBuffer>,
    pub sample: PrimitiveSample,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<SceneAssets, SyntheticError> {
    let mesh = generate_building(&spec.building)?;
    spec.trajectory.validate(spec.building.circumradius())?;
    let views = spiral_trajectory(&spec.trajectory, &spec.building.center());
    let (gt_depths, gt_normals) = views.iter().map(|v| render_ground_truth(&mesh, v)).unzip();
    let mut sampling = spec.sampling.clone();
    sampling.seed = spec.building.seed;
    let sample = sample_primitives(&mesh, &sampling)?;
    Ok(SceneAssets {
        spec: spec.clone(),
        mesh,
        views,
        gt_depths,
        gt_normals,
        sample,
    })
}
