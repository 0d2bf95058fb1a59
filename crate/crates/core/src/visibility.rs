//! Depth-consistent 3D→2D correspondences.
//!
//! Depth everywhere is camera-space z, the convention [`crate::render`] writes.

use nalgebra::{Point2, Point3};
use thiserror::Error;

use crate::pruning::project_point;
use crate::scene::{CameraView, ImageBuffer, PipelineConfig};

#[derive(Debug, Error, PartialEq)]
pub enum VisibilityError {
    #[error("pixel ({x}, {y}) outside the {width}x{height} depth map")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("point is not in front of the camera (z = {0})")]
    BehindCamera(f64),
    #[error("{views} views but {depths} depth maps")]
    CountMismatch { views: usize, depths: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewHit {
    pub view_id: u32,
    pub pixel: Point2<f64>,
    pub d_exp: f64,
    pub d_img: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityRecord {
    pub point_id: usize,
    pub visible_views: Vec<ViewHit>,
}

/// Bilinear depth lookup that refuses to blend with empty (0) texels.
pub fn sample_depth_bilinear(
    depth: &ImageBuffer,
    pixel: &Point2<f64>,
) -> Result<Option<f64>, VisibilityError> {
    let (w, h) = (depth.width(), depth.height());
    let inside =
        pixel.x >= 0.0 && pixel.y >= 0.0 && pixel.x <= w as f64 - 1.0 && pixel.y <= h as f64 - 1.0;
    if !inside {
        return Err(VisibilityError::OutOfBounds {
            x: pixel.x,
            y: pixel.y,
            width: w,
            height: h,
        });
    }
    let (x0, y0) = (pixel.x.floor(), pixel.y.floor());
    let (fx, fy) = (pixel.x - x0, pixel.y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    let mut acc = 0.0;
    for (x, y, wgt) in taps {
        if wgt == 0.0 {
            continue;
        }
        let v = f64::from(depth.get(x, y, 0));
        if v == 0.0 {
            return Ok(None);
        }
        acc += wgt * v;
    }
    Ok(Some(acc))
}

/// Camera-space z of `x`.
pub fn expected_depth(x: &Point3<f64>, view: &CameraView) -> Result<f64, VisibilityError> {
    let z = view.to_camera(x).z;
    if z > 0.0 {
        Ok(z)
    } else {
        Err(VisibilityError::BehindCamera(z))
    }
}

/// `|d_exp − d_img| ≤ ε_abs + ε_rel · d_exp`.
pub fn depth_consistent(d_exp: f64, d_img: f64, eps_abs: f64, eps_rel: f64) -> bool {
    (d_exp - d_img).abs() <= eps_abs + eps_rel * d_exp
}

/// Projects `x` into `view` and runs the depth test against `depth`.
pub fn check_view(
    x: &Point3<f64>,
    view: &CameraView,
    depth: &ImageBuffer,
    config: &PipelineConfig,
) -> Option<ViewHit> {
    let pixel = project_point(x, view)?;
    let d_exp = expected_depth(x, view).ok()?;
    let d_img = sample_depth_bilinear(depth, &pixel).ok()??;
    depth_consistent(d_exp, d_img, config.depth_eps_abs, config.depth_eps_rel).then_some(ViewHit {
        view_id: view.view_id,
        pixel,
        d_exp,
        d_img,
    })
}

pub fn validate_visibility(
    points: &[Point3<f64>],
    views: &[CameraView],
    depths: &[ImageBuffer],
    config: &PipelineConfig,
) -> Result<Vec<VisibilityRecord>, VisibilityError> {
    if views.len() != depths.len() {
        return Err(VisibilityError::CountMismatch {
            views: views.len(),
            depths: depths.len(),
        });
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(point_id, x)| VisibilityRecord {
            point_id,
            visible_views: views
                .iter()
                .zip(depths)
                .filter_map(|(v, d)| check_view(x, v, d, config))
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Rotation3, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 1, |x, y, _| 1.0 + 0.5 * x as f32 + 0.25 * y as f32)
    }

    #[test]
    fn bilinear_cases() {
        let d = ramp(8, 6);
        assert_eq!(
            sample_depth_bilinear(&d, &Point2::new(3.0, 2.0)).unwrap(),
            Some(3.0)
        );
        let two = ImageBuffer::from_vec(2, 2, 1, vec![1.0, 3.0, 1.0, 3.0]).unwrap();
        let mid = sample_depth_bilinear(&two, &Point2::new(0.5, 0.3))
            .unwrap()
            .unwrap();
        assert!((mid - 2.0).abs() < 1e-12);
        assert_eq!(
            sample_depth_bilinear(&two, &Point2::new(1.0, 1.0)).unwrap(),
            Some(3.0)
        );
        assert!(sample_depth_bilinear(&d, &Point2::new(7.5, 0.0)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..500 {
            let p = Point2::new(rng.gen_range(0.0..7.0), rng.gen_range(0.0..5.0));
            let v = sample_depth_bilinear(&d, &p).unwrap().unwrap();
            assert!((v - (1.0 + 0.5 * p.x + 0.25 * p.y)).abs() < 1e-6);
        }
    }

    #[test]
    fn bilinear_refuses_sentinel_neighbours() {
        let mut d = ramp(4, 4);
        d.set(2, 1, 0, 0.0);
        assert_eq!(
            sample_depth_bilinear(&d, &Point2::new(1.5, 1.0)).unwrap(),
            None
        );
        assert!(sample_depth_bilinear(&d, &Point2::new(1.0, 1.0))
            .unwrap()
            .is_some());
    }

    #[test]
    fn expected_depth_cases() {
        let id = CameraView::from_pinhole(
            0,
            (1.0, 1.0, 0.0, 0.0),
            Matrix3::identity(),
            Vector3::zeros(),
            2,
            2,
        );
        assert_eq!(
            expected_depth(&Point3::new(0.0, 0.0, 5.0), &id).unwrap(),
            5.0
        );
        assert!(expected_depth(&Point3::new(0.0, 0.0, -5.0), &id).is_err());
        let r = Rotation3::from_euler_angles(0.3, -0.1, 1.2);
        let t = Vector3::new(0.5, -2.0, 7.0);
        let v = CameraView::from_pinhole(1, (1.0, 1.0, 0.0, 0.0), *r.matrix(), t, 2, 2);
        let x = Point3::new(0.2, 0.3, -0.4);
        let manual = (r.matrix() * x.coords + t).z;
        assert!((expected_depth(&x, &v).unwrap() - manual).abs() < 1e-12);
    }

    #[test]
    fn tolerance_arithmetic() {
        assert!(depth_consistent(10.0, 10.0, 0.01, 0.01));
        assert!(!depth_consistent(10.0, 10.2, 0.01, 0.01));
        assert!(depth_consistent(10.0, 10.1, 0.01, 0.01));
    }

    fn front_view() -> CameraView {
        CameraView::from_pinhole(
            0,
            (50.0, 50.0, 32.0, 32.0),
            Matrix3::identity(),
            Vector3::zeros(),
            65,
            65,
        )
    }

    #[test]
    fn two_wall_occlusion() {
        // Front wall at z=3 covering the left half; rear wall at z=6 everywhere.
        let v0 = front_view();
        let depth0 = ImageBuffer::from_fn(65, 65, 1, |x, _, _| if x <= 32 { 3.0 } else { 6.0 });
        // A camera behind the rear wall looking back sees the rear wall at distance 4 (z=10).
        let back = Rotation3::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI);
        let v1 = CameraView {
            view_id: 1,
            rotation: *back.matrix(),
            translation: back.matrix() * -Vector3::new(0.0, 0.0, 10.0),
            ..front_view()
        };
        let depth1 = ImageBuffer::from_fn(65, 65, 1, |_, _, _| 4.0);
        let rear = Point3::new(-0.5, 0.0, 6.0);
        let recs = validate_visibility(
            &[rear],
            &[v0, v1],
            &[depth0, depth1],
            &PipelineConfig::default(),
        )
        .unwrap();
        let ids: Vec<u32> = recs[0].visible_views.iter().map(|h| h.view_id).collect();
        assert_eq!(ids, vec![1]);
        for h in &recs[0].visible_views {
            assert!(depth_consistent(h.d_exp, h.d_img, 0.01, 0.01));
            assert!(h.d_exp > 0.0);
        }
    }

    #[test]
    fn point_on_surface_is_accepted() {
        let v = front_view();
        let d = ImageBuffer::from_fn(65, 65, 1, |_, _, _| 2.0);
        let recs = validate_visibility(
            &[Point3::new(0.1, 0.1, 2.0)],
            &[v],
            &[d],
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(recs[0].visible_views.len(), 1);
        let none = validate_visibility(
            &[Point3::new(0.1, 0.1, 2.5)],
            &[front_view()],
            &[ImageBuffer::from_fn(65, 65, 1, |_, _, _| 2.0)],
            &PipelineConfig::default(),
        )
        .unwrap();
        assert!(none[0].visible_views.is_empty());
        assert!(
            validate_visibility(&[], &[front_view()], &[], &PipelineConfig::default()).is_err()
        );
    }

    proptest! {
        #[test]
        fn acceptance_monotone_in_tolerances(
            seed in any::<u64>(), a1 in 0.0..0.2f64, da in 0.0..0.2f64, r1 in 0.0..0.05f64, dr in 0.0..0.05f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let depth = ImageBuffer::from_fn(65, 65, 1, |_, _, _| rng.gen_range(2.0..2.4));
            let pts: Vec<Point3<f64>> = (0..30)
                .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(1.9..2.5)))
                .collect();
            let mut lo = PipelineConfig::default();
            lo.depth_eps_abs = a1.max(1e-9);
            lo.depth_eps_rel = r1.max(1e-9);
            let mut hi = lo.clone();
            hi.depth_eps_abs += da;
            hi.depth_eps_rel += dr;
            let views = [front_view()];
            let a = validate_visibility(&pts, &views, std::slice::from_ref(&depth), &lo).unwrap();
            let b = validate_visibility(&pts, &views, std::slice::from_ref(&depth), &hi).unwrap();
            for (ra, rb) in a.iter().zip(&b) {
                prop_assert!(ra.visible_views.len() <= rb.visible_views.len());
                for h in &ra.visible_views {
                    prop_assert!(rb.visible_views.iter().any(|g| g.view_id == h.view_id));
                }
            }
        }
    }
}
