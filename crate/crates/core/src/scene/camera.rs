use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, Vector3};

/// A calibrated pinhole view.
///
/// `rotation`/`translation` map world points into the camera frame
/// (`x_cam = R x_world + t`); the camera looks down `+z`, `+x` is image
/// right and `+y` image down. Pixel centers sit on integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub view_id: u32,
    pub intrinsics: Matrix3<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: u32,
    pub height: u32,
}

impl CameraView {
    pub fn from_pinhole(
        view_id: u32,
        (fx, fy, cx, cy): (f64, f64, f64, f64),
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: u32,
        height: u32,
    ) -> Self {
        #[rustfmt::skip]
        let intrinsics = Matrix3::new(
            fx, 0.0, cx,
            0.0, fy, cy,
            0.0, 0.0, 1.0,
        );
        Self {
            view_id,
            intrinsics,
            rotation,
            translation,
            width,
            height,
        }
    }

    /// Camera placed at `eye` looking at `target`, with world `+z` as up.
    pub fn look_at(
        view_id: u32,
        eye: Point3<f64>,
        target: Point3<f64>,
        focal: f64,
        width: u32,
        height: u32,
    ) -> Self {
        let forward = (target - eye).normalize();
        let up = if forward.cross(&Vector3::z()).norm() < 1e-9 {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation =
            Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye.coords);
        let cx = (f64::from(width) - 1.0) / 2.0;
        let cy = (f64::from(height) - 1.0) / 2.0;
        Self::from_pinhole(
            view_id,
            (focal, focal, cx, cy),
            rotation,
            translation,
            width,
            height,
        )
    }

    pub fn fx(&self) -> f64 {
        self.intrinsics[(0, 0)]
    }

    pub fn fy(&self) -> f64 {
        self.intrinsics[(1, 1)]
    }

    pub fn cx(&self) -> f64 {
        self.intrinsics[(0, 2)]
    }

    pub fn cy(&self) -> f64 {
        self.intrinsics[(1, 2)]
    }

    pub fn skew(&self) -> f64 {
        self.intrinsics[(0, 1)]
    }

    /// `P = K [R | t]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        self.intrinsics * rt
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn to_camera(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.rotation * x.coords + self.translation
    }

    /// Pinhole projection of a camera-frame point; the caller guarantees `z > 0`.
    pub fn camera_to_pixel(&self, xc: &Vector3<f64>) -> Point2<f64> {
        let h = self.intrinsics * xc;
        Point2::new(h.x / h.z, h.y / h.z)
    }

    /// Unnormalised camera-frame direction through `pixel`, with `z = 1`.
    pub fn pixel_direction(&self, pixel: &Point2<f64>) -> Vector3<f64> {
        let fy = self.fy();
        let y = (pixel.y - self.cy()) / fy;
        let x = (pixel.x - self.cx() - self.skew() * y) / self.fx();
        Vector3::new(x, y, 1.0)
    }

    /// World-space unit direction of the ray through `pixel`.
    pub fn world_ray(&self, pixel: &Point2<f64>) -> Vector3<f64> {
        (self.rotation.transpose() * self.pixel_direction(pixel)).normalize()
    }

    pub fn in_bounds(&self, pixel: &Point2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= f64::from(self.width) - 1.0
            && pixel.y <= f64::from(self.height) - 1.0
    }
}
