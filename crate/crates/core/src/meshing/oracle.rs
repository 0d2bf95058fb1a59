//! Independent checks used by the meshing tests. Nothing here calls the
//! adaptive predicates: spheres are tested in floating point with a margin
//! and undecided cases fall back to rational determinants.

use nalgebra::Point3;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::delaunay::TetMesh;

fn q(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

fn det(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut sign = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            m.swap(piv, col);
            sign = -sign;
        }
        for r in col + 1..n {
            let f = &m[r][col] / &m[col][col];
            for c in col..n {
                let v = &f * &m[col][c];
                m[r][c] -= v;
            }
        }
    }
    (0..n).fold(sign, |acc, i| acc * &m[i][i])
}

pub fn exact_volume_sign(p: [&Point3<f64>; 4]) -> i32 {
    let rows = (1..4)
        .map(|i| (0..3).map(|k| q(p[i][k]) - q(p[0][k])).collect())
        .collect();
    let d = det(rows);
    if d.is_positive() {
        1
    } else if d.is_negative() {
        -1
    } else {
        0
    }
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut total = 0.0;
    for c in 0..4 {
        let minor: Vec<[f64; 3]> = (1..4)
            .map(|r| {
                let row: Vec<f64> = (0..4).filter(|&k| k != c).map(|k| m[r][k]).collect();
                [row[0], row[1], row[2]]
            })
            .collect();
        let d3 = minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1])
            - minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0])
            + minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]);
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * m[0][c] * d3;
    }
    total
}

/// True when `x` is strictly inside the circumsphere of the tet `p`.
pub fn strictly_inside(p: [&Point3<f64>; 4], x: &Point3<f64>) -> bool {
    inside_with_orientation(p, x, exact_volume_sign(p))
}

fn inside_with_orientation(p: [&Point3<f64>; 4], x: &Point3<f64>, o: i32) -> bool {
    // Rows (d, |d|²) with d = point − p0; det < 0 is inside for a positive tet.
    let pts = [p[1], p[2], p[3], x];
    let rows: [[f64; 4]; 4] = std::array::from_fn(|i| {
        let d = pts[i] - p[0];
        [d.x, d.y, d.z, d.norm_squared()]
    });
    let abs: [[f64; 4]; 4] = rows.map(|r| r.map(f64::abs));
    let value = det4(&rows);
    // The expansion evaluated on absolute values bounds every term.
    let bound = 1e-10 * det4_perm(&abs);
    if value.abs() > bound {
        return (value < 0.0 && o > 0) || (value > 0.0 && o < 0);
    }
    let all = [p[0], p[1], p[2], p[3], x];
    let exact = (1..5)
        .map(|i| {
            let d: Vec<BigRational> = (0..3).map(|k| q(all[i][k]) - q(all[0][k])).collect();
            let l = d.iter().fold(BigRational::zero(), |a, v| a + v * v);
            vec![d[0].clone(), d[1].clone(), d[2].clone(), l]
        })
        .collect();
    let s = det(exact);
    (s.is_negative() && o > 0) || (s.is_positive() && o < 0)
}

fn det4_perm(m: &[[f64; 4]; 4]) -> f64 {
    let mut total = 0.0;
    for c in 0..4 {
        let r: Vec<[f64; 3]> = (1..4)
            .map(|row| {
                let v: Vec<f64> = (0..4).filter(|&k| k != c).map(|k| m[row][k]).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        let p3 = r[0][0] * (r[1][1] * r[2][2] + r[1][2] * r[2][1])
            + r[0][1] * (r[1][0] * r[2][2] + r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] + r[1][1] * r[2][0]);
        total += m[0][c] * p3;
    }
    total
}

/// Exhaustive empty-circumsphere check of every tet against every vertex.
pub fn delaunay_ok(mesh: &TetMesh) -> Result<(), String> {
    let mut used: Vec<usize> = mesh.canonical.clone();
    used.sort_unstable();
    used.dedup();
    for (t, v) in mesh.tets.iter().enumerate() {
        let p = v.map(|i| &mesh.vertices[i]);
        let o = exact_volume_sign(p);
        if o <= 0 {
            return Err(format!("tet {t} not positive"));
        }
        for &x in &used {
            if !v.contains(&x) && inside_with_orientation(p, &mesh.vertices[x], o) {
                return Err(format!("vertex {x} inside circumsphere of tet {t}"));
            }
        }
    }
    Ok(())
}
