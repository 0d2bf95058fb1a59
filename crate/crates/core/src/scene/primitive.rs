use nalgebra::{Matrix3, Point3, Vector3};

/// One anisotropic Gaussian of the field.
///
/// Covariance is kept as the full symmetric matrix; every consumer either
/// evaluates the density or projects the footprint, so there is no need for
/// a scale/rotation factorisation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive {
    pub id: u64,
    pub center: Point3<f64>,
    pub covariance: Matrix3<f64>,
    pub opacity: f64,
    pub color: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl GaussianPrimitive {
    /// Builds a primitive whose covariance is `diag(tangent², tangent², normal²)`
    /// in the frame of `normal`.
    pub fn surfel(
        id: u64,
        center: Point3<f64>,
        normal: Vector3<f64>,
        tangent_sigma: f64,
        normal_sigma: f64,
        opacity: f64,
        color: Vector3<f64>,
    ) -> Self {
        let n = normal.normalize();
        let (t1, t2) = tangent_frame(&n);
        let frame = Matrix3::from_columns(&[t1, t2, n]);
        let scales = Matrix3::from_diagonal(&Vector3::new(
            tangent_sigma * tangent_sigma,
            tangent_sigma * tangent_sigma,
            normal_sigma * normal_sigma,
        ));
        let covariance = symmetrize(&(frame * scales * frame.transpose()));
        Self {
            id,
            center,
            covariance,
            opacity,
            color,
            normal: n,
        }
    }

    /// Largest standard deviation of the footprint, in scene units.
    pub fn max_sigma(&self) -> f64 {
        self.covariance
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v))
            .max(0.0)
            .sqrt()
    }
}

/// Two unit vectors completing `n` to a right-handed orthonormal frame.
pub fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

pub(crate) fn symmetrize(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}
