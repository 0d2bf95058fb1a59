use std::fmt;

use super::{CameraView, GaussianPrimitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Primitive(u64),
    View(u32),
    PrimitiveList,
    ViewList,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub subject: Subject,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subject {
            Subject::Primitive(id) => write!(f, "primitive {id}: {}: {}", self.field, self.message),
            Subject::View(id) => write!(f, "view {id}: {}: {}", self.field, self.message),
            Subject::PrimitiveList => write!(f, "primitives: {}", self.message),
            Subject::ViewList => write!(f, "views: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

const UNIT_TOL: f64 = 1e-6;
const ROT_TOL: f64 = 1e-9;

pub fn validate_primitive(p: &GaussianPrimitive) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field, message: String| {
        out.push(Violation {
            subject: Subject::Primitive(p.id),
            field,
            message,
        })
    };
    let s = &p.covariance;
    if !p.center.coords.iter().all(|v| v.is_finite()) {
        push("center", "not finite".into());
    }
    if !s.iter().all(|v| v.is_finite()) {
        push("covariance", "not finite".into());
    } else if (s - s.transpose()).abs().max() > 1e-12 * s.abs().max().max(1.0) {
        push("covariance", "not symmetric".into());
    } else {
        let min_eig = s
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        if min_eig <= 0.0 {
            push(
                "covariance",
                format!("not positive-definite (min eigenvalue {min_eig})"),
            );
        }
    }
    if !(0.0..=1.0).contains(&p.opacity) {
        push("opacity", format!("{} outside [0, 1]", p.opacity));
    }
    if !p.color.iter().all(|c| (0.0..=1.0).contains(c)) {
        push("color", "component outside [0, 1]".into());
    }
    let n = p.normal.norm();
    if !((n - 1.0).abs() <= UNIT_TOL) {
        push("normal", format!("norm {n} is not 1"));
    }
    out
}

pub fn validate_view(v: &CameraView) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field, message: String| {
        out.push(Violation {
            subject: Subject::View(v.view_id),
            field,
            message,
        })
    };
    let all_finite = v.intrinsics.iter().all(|x| x.is_finite())
        && v.rotation.iter().all(|x| x.is_finite())
        && v.translation.iter().all(|x| x.is_finite());
    if !all_finite {
        push("camera", "not finite".into());
        return out;
    }
    let k = &v.intrinsics;
    if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
        push("intrinsics", "lower triangle is not zero".into());
    }
    if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
        push("intrinsics", "focal entries must be positive".into());
    }
    if k[(2, 2)] != 1.0 {
        push("intrinsics", "bottom-right entry must be 1".into());
    }
    let r = &v.rotation;
    let ortho_err = (r * r.transpose() - nalgebra::Matrix3::identity())
        .abs()
        .max();
    if ortho_err > ROT_TOL {
        push("rotation", format!("not orthonormal (error {ortho_err:e})"));
    } else if (r.determinant() - 1.0).abs() > ROT_TOL {
        push("rotation", "not a proper rotation".into());
    }
    if v.width == 0 || v.height == 0 {
        push("resolution", "width and height must be positive".into());
    }
    out
}

/// Checks every type invariant of the scene inputs.
pub fn validate_scene(primitives: &[GaussianPrimitive], views: &[CameraView]) -> ValidationReport {
    let mut violations = Vec::new();
    if primitives.is_empty() {
        violations.push(Violation {
            subject: Subject::PrimitiveList,
            field: "primitives",
            message: "empty primitive list".into(),
        });
    }
    if views.is_empty() {
        violations.push(Violation {
            subject: Subject::ViewList,
            field: "views",
            message: "empty view list".into(),
        });
    }
    for p in primitives {
        violations.extend(validate_primitive(p));
    }
    for v in views {
        violations.extend(validate_view(v));
    }
    ValidationReport { violations }
}
