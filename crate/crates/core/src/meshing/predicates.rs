//! Exact geometric predicates.
//!
//! Thin wrappers over Shewchuk's adaptive-precision routines with the sign
//! conventions used throughout [`crate::meshing`]: `orient3d(a, b, c, d) > 0`
//! when `d` lies on the side of `(b - a) × (c - a)`, and `insphere` is
//! positive when the query point is strictly inside the circumsphere of a
//! positively oriented tetrahedron.

use nalgebra::Point3;
use robust::Coord3D;

fn coord(p: &Point3<f64>) -> Coord3D<f64> {
    Coord3D {
        x: p.x,
        y: p.y,
        z: p.z,
    }
}

pub fn orient3d(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>, d: &Point3<f64>) -> f64 {
    -robust::orient3d(coord(a), coord(b), coord(c), coord(d))
}

pub fn insphere(
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    d: &Point3<f64>,
    e: &Point3<f64>,
) -> f64 {
    -robust::insphere(coord(a), coord(b), coord(c), coord(d), coord(e))
}

/// `insphere` with ties broken by symbolic perturbation.
///
/// Each point with an index has its lifted coordinate `|p|²` raised by
/// `ε^(N - index)`, so higher indices dominate. Points without an index are
/// left unperturbed (auxiliary points that are not part of the input). The
/// result is zero only if the first four points are coplanar and every
/// perturbation term vanishes.
pub fn insphere_sos(p: [&Point3<f64>; 5], index: [Option<usize>; 5]) -> f64 {
    let d = insphere(p[0], p[1], p[2], p[3], p[4]);
    if d != 0.0 {
        return d;
    }
    let mut order: Vec<usize> = (0..5).filter(|&k| index[k].is_some()).collect();
    order.sort_by_key(|&k| std::cmp::Reverse(index[k]));
    for k in order {
        let rest: Vec<&Point3<f64>> = (0..5).filter(|&m| m != k).map(|m| p[m]).collect();
        let o = orient3d(rest[0], rest[1], rest[2], rest[3]);
        if o != 0.0 {
            // Cofactor sign of the lifted column at row k (1-based k + 1).
            return if k % 2 == 1 { o } else { -o };
        }
    }
    0.0
}
