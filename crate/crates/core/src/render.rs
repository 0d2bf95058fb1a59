//! Forward splat rendering of colour, normal and depth maps.

use nalgebra::{Matrix2, Matrix2x3, Point2, Vector2, Vector3};
use thiserror::Error;

use crate::scene::{CameraView, GaussianPrimitive, ImageBuffer, PipelineConfig};

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("primitive {id}: covariance is near-singular (condition number {condition:e})")]
    IllConditioned { id: u64, condition: f64 },
    #[error("contribution {index} is nearer than its predecessor; input must be depth-sorted")]
    Unsorted { index: usize },
    #[error("contribution {index} has alpha {alpha} outside [0, 1]")]
    BadAlpha { index: usize, alpha: f64 },
}

pub const MAX_CONDITION: f64 = 1e12;
/// Contributions weaker than this are skipped.
pub const ALPHA_FLOOR: f64 = 1.0 / 255.0;
/// Accumulated alpha below which a pixel counts as empty.
pub const COVERAGE_FLOOR: f64 = 1e-4;

/// `exp(-½ (x-μ)ᵀ Σ⁻¹ (x-μ))`.
pub fn evaluate_gaussian(p: &GaussianPrimitive, x: &Vector3<f64>) -> Result<f64, RenderError> {
    let eig = p.covariance.symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(RenderError::IllConditioned {
            id: p.id,
            condition,
        });
    }
    let d = x - p.center.coords;
    let chol = p.covariance.cholesky().ok_or(RenderError::IllConditioned {
        id: p.id,
        condition,
    })?;
    let m = d.dot(&chol.solve(&d));
    Ok((-0.5 * m).exp())
}

/// Screen-space footprint of one primitive in one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat2D {
    pub center2d: Point2<f64>,
    pub cov2d: Matrix2<f64>,
    /// Camera-space z of the primitive center.
    pub depth: f64,
    pub source_id: u64,
    pub opacity: f64,
    pub color: Vector3<f64>,
    /// World-space unit normal.
    pub normal: Vector3<f64>,
    conic: Matrix2<f64>,
    center_cam: Vector3<f64>,
    normal_cam: Vector3<f64>,
    depth_slack: f64,
    bbox: (usize, usize, usize, usize),
}

/// Jacobian of the pinhole projection with respect to camera-frame coordinates.
pub fn projection_jacobian(view: &CameraView, xc: &Vector3<f64>) -> Matrix2x3<f64> {
    let (fx, fy, s) = (view.fx(), view.fy(), view.skew());
    let z = xc.z;
    let z2 = z * z;
    Matrix2x3::new(
        fx / z,
        s / z,
        -(fx * xc.x + s * xc.y) / z2,
        0.0,
        fy / z,
        -fy * xc.y / z2,
    )
}

/// Projects a primitive to its 2D footprint, or `None` when it is behind the
/// camera, degenerate on screen, or its `cutoff`-sigma box misses the image.
pub fn project_splat(p: &GaussianPrimitive, view: &CameraView, cutoff: f64) -> Option<Splat2D> {
    let xc = view.to_camera(&p.center);
    if !(xc.z > 0.0) {
        return None;
    }
    let center2d = view.camera_to_pixel(&xc);
    let j = projection_jacobian(view, &xc) * view.rotation;
    let cov2d = j * p.covariance * j.transpose();
    let cov2d = (cov2d + cov2d.transpose()) * 0.5;
    let det = cov2d.determinant();
    let tr = cov2d.trace();
    if !(det > 1e-12 * tr * tr) || !det.is_finite() {
        return None;
    }
    let conic = cov2d.try_inverse()?;
    let rx = cutoff * cov2d[(0, 0)].sqrt();
    let ry = cutoff * cov2d[(1, 1)].sqrt();
    let (w, h) = (f64::from(view.width), f64::from(view.height));
    let x0 = (center2d.x - rx).ceil().max(0.0);
    let x1 = (center2d.x + rx).floor().min(w - 1.0);
    let y0 = (center2d.y - ry).ceil().max(0.0);
    let y1 = (center2d.y + ry).floor().min(h - 1.0);
    if !(x0 <= x1 && y0 <= y1) {
        return None;
    }
    let normal_cam = view.rotation * p.normal;
    let depth_slack = 3.0 * p.max_sigma();
    Some(Splat2D {
        center2d,
        cov2d,
        depth: xc.z,
        source_id: p.id,
        opacity: p.opacity,
        color: p.color,
        normal: p.normal,
        conic,
        center_cam: xc,
        normal_cam,
        depth_slack,
        bbox: (x0 as usize, x1 as usize, y0 as usize, y1 as usize),
    })
}

impl Splat2D {
    /// Effective alpha at a pixel center, `α exp(-½ dᵀ cov2d⁻¹ d)`.
    pub fn alpha_at(&self, pixel: &Point2<f64>) -> f64 {
        let d: Vector2<f64> = pixel - self.center2d;
        self.opacity * (-0.5 * d.dot(&(self.conic * d))).exp()
    }

    /// Camera-space z where the pixel ray meets the splat's tangent plane.
    ///
    /// Falls back to the center depth at grazing incidence and is clamped to
    /// three standard deviations around it.
    pub fn depth_at(&self, view: &CameraView, pixel: &Point2<f64>) -> f64 {
        let dir = view.pixel_direction(pixel);
        let denom = self.normal_cam.dot(&dir);
        if denom.abs() < 1e-3 * dir.norm() {
            return self.depth;
        }
        let z = self.normal_cam.dot(&self.center_cam) / denom;
        z.clamp(self.depth - self.depth_slack, self.depth + self.depth_slack)
    }

    /// Inclusive pixel box `(x0, x1, y0, y1)` covered by the cutoff ellipse bound.
    pub fn pixel_box(&self) -> (usize, usize, usize, usize) {
        self.bbox
    }
}

/// One splat's effect on one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub depth: f64,
    pub alpha: f64,
    pub value: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composite {
    pub value: Vector3<f64>,
    pub transmittance: f64,
}

/// Front-to-back compositing `Σ Tᵢ₋₁ αᵢ cᵢ` over depth-sorted contributions.
pub fn composite_pixel(contribs: &[Contribution]) -> Result<Composite, RenderError> {
    let mut value = Vector3::zeros();
    let mut t = 1.0;
    for (i, c) in contribs.iter().enumerate() {
        if i > 0 && c.depth < contribs[i - 1].depth {
            return Err(RenderError::Unsorted { index: i });
        }
        if !(0.0..=1.0).contains(&c.alpha) {
            return Err(RenderError::BadAlpha {
                index: i,
                alpha: c.alpha,
            });
        }
        value += c.value * (t * c.alpha);
        t *= 1.0 - c.alpha;
    }
    Ok(Composite {
        value,
        transmittance: t,
    })
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub color: ImageBuffer,
    pub normal: ImageBuffer,
    /// Camera-space z; 0 where nothing was hit.
    pub depth: ImageBuffer,
    /// Accumulated opacity `1 - T`.
    pub alpha: ImageBuffer,
    pub visible_splats: usize,
    /// Set when no primitive lands in the image.
    pub empty_warning: bool,
}

/// Projects every primitive and sorts the footprints by center depth.
pub fn project_sorted(
    primitives: &[GaussianPrimitive],
    view: &CameraView,
    cutoff: f64,
) -> Vec<Splat2D> {
    let mut splats: Vec<Splat2D> = primitives
        .iter()
        .filter_map(|p| project_splat(p, view, cutoff))
        .collect();
    splats.sort_by(|a, b| {
        a.depth
            .total_cmp(&b.depth)
            .then(a.source_id.cmp(&b.source_id))
    });
    splats
}

pub fn render_maps(
    primitives: &[GaussianPrimitive],
    view: &CameraView,
    config: &PipelineConfig,
) -> RenderOutput {
    let (w, h) = (view.width as usize, view.height as usize);
    let splats = project_sorted(primitives, view, config.splat_cutoff_sigmas);
    let n = w * h;
    let mut trans = vec![1.0_f64; n];
    let mut color = vec![Vector3::<f64>::zeros(); n];
    let mut normal = vec![Vector3::<f64>::zeros(); n];
    let mut depth = vec![0.0_f64; n];

    for s in &splats {
        let (x0, x1, y0, y1) = s.bbox;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let px = Point2::new(x as f64, y as f64);
                let a = s.alpha_at(&px);
                if a < ALPHA_FLOOR {
                    continue;
                }
                let i = y * w + x;
                let wgt = trans[i] * a;
                color[i] += s.color * wgt;
                normal[i] += s.normal * wgt;
                depth[i] += s.depth_at(view, &px) * wgt;
                trans[i] *= 1.0 - a;
            }
        }
    }

    let mut color_img = ImageBuffer::new(w, h, 3);
    let mut normal_img = ImageBuffer::new(w, h, 3);
    let mut depth_img = ImageBuffer::new(w, h, 1);
    let mut alpha_img = ImageBuffer::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let acc = 1.0 - trans[i];
            alpha_img.set(x, y, 0, acc as f32);
            for c in 0..3 {
                color_img.set(x, y, c, color[i][c] as f32);
            }
            if acc > COVERAGE_FLOOR {
                depth_img.set(x, y, 0, (depth[i] / acc) as f32);
                let len = normal[i].norm();
                if len > 0.0 {
                    let nn = normal[i] / len;
                    for c in 0..3 {
                        normal_img.set(x, y, c, nn[c] as f32);
                    }
                }
            }
        }
    }
    let visible = splats.len();
    RenderOutput {
        color: color_img,
        normal: normal_img,
        depth: depth_img,
        alpha: alpha_img,
        visible_splats: visible,
        empty_warning: visible == 0,
    }
}
