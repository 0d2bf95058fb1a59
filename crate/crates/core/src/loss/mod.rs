//! Photometric and structure-aware training objectives, evaluated on given
//! render/ground-truth pairs.

pub mod ssim;

use nalgebra::{Point2, Vector3};
use thiserror::Error;

use crate::edges::EdgeMask;
use crate::scene::{CameraView, ImageBuffer, PipelineConfig};

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("normal at ({x}, {y}) in {which} map has norm {norm}, expected unit")]
    NonUnitNormal {
        which: &'static str,
        x: usize,
        y: usize,
        norm: f64,
    },
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub l1_refined: f64,
    pub ssim_refined: f64,
    pub normal_refined: f64,
    pub total: f64,
    pub mask_coverage: f64,
}

fn check_pair(a: &ImageBuffer, b: &ImageBuffer) -> Result<(), LossError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(LossError::ShapeMismatch("render and ground truth differ"))
    }
}

fn check_mask(img: &ImageBuffer, mask: &EdgeMask) -> Result<(), LossError> {
    if mask.mask.width() == img.width() && mask.mask.height() == img.height() {
        Ok(())
    } else {
        Err(LossError::ShapeMismatch("mask size differs from image"))
    }
}

/// Mean over channels of `|a − b|` at one pixel.
fn pixel_l1(a: &ImageBuffer, b: &ImageBuffer, x: usize, y: usize) -> f64 {
    let ch = a.channels();
    let s: f64 = a
        .pixel(x, y)
        .iter()
        .zip(b.pixel(x, y))
        .map(|(p, q)| (f64::from(*p) - f64::from(*q)).abs())
        .sum();
    s / ch as f64
}

/// `mix · mean|r − g| + (1 − mix) · (1 − SSIM)`.
pub fn baseline_loss(render: &ImageBuffer, gt: &ImageBuffer, mix: f64) -> Result<f64, LossError> {
    check_pair(render, gt)?;
    if !(0.0..=1.0).contains(&mix) {
        return Err(LossError::BadParameter("mix must lie in [0, 1]"));
    }
    let n = render.pixel_count();
    if n == 0 {
        return Ok(0.0);
    }
    let mut l1 = 0.0;
    for y in 0..render.height() {
        for x in 0..render.width() {
            l1 += pixel_l1(render, gt, x, y);
        }
    }
    l1 /= n as f64;
    Ok(mix * l1 + (1.0 - mix) * (1.0 - ssim::ssim(render, gt)))
}

/// `Σ m |r − g| / (Σ m + ε)`.
pub fn masked_l1(
    render: &ImageBuffer,
    gt: &ImageBuffer,
    mask: &EdgeMask,
    eps: f64,
) -> Result<f64, LossError> {
    check_pair(render, gt)?;
    check_mask(render, mask)?;
    let (mut num, mut den) = (0.0, 0.0);
    for y in 0..render.height() {
        for x in 0..render.width() {
            if mask.mask.get(x, y, 0) != 0.0 {
                num += pixel_l1(render, gt, x, y);
                den += 1.0;
            }
        }
    }
    Ok(num / (den + eps))
}

/// `Σ m (1 − SSIM(i)) / (Σ m + ε)` over the 11×11 windowed SSIM map.
pub fn masked_ssim(
    render: &ImageBuffer,
    gt: &ImageBuffer,
    mask: &EdgeMask,
    eps: f64,
) -> Result<f64, LossError> {
    check_pair(render, gt)?;
    check_mask(render, mask)?;
    let w = render.width();
    let mut selected = Vec::new();
    for y in 0..render.height() {
        for x in 0..w {
            if mask.mask.get(x, y, 0) != 0.0 {
                selected.push(y * w + x);
            }
        }
    }
    if selected.is_empty() {
        return Ok(0.0);
    }
    let map = ssim::ssim_map(render, gt);
    let num: f64 = selected.iter().map(|&i| 1.0 - map[i]).sum();
    Ok(num / (selected.len() as f64 + eps))
}

fn unit_or_zero(
    img: &ImageBuffer,
    which: &'static str,
    x: usize,
    y: usize,
) -> Result<Option<Vector3<f64>>, LossError> {
    let p = img.pixel(x, y);
    let v = Vector3::new(f64::from(p[0]), f64::from(p[1]), f64::from(p[2]));
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(None);
    }
    if !(0.99..=1.01).contains(&norm) {
        return Err(LossError::NonUnitNormal { which, x, y, norm });
    }
    Ok(Some(v))
}

/// `Σ m (1 − clip(n · n_depth, −1, 1)) / (Σ m + ε)`.
///
/// Pixels where either map holds the zero "no normal" marker drop out of
/// both sums.
pub fn masked_normal_loss(
    rendered: &ImageBuffer,
    from_depth: &ImageBuffer,
    mask: &EdgeMask,
    eps: f64,
) -> Result<f64, LossError> {
    check_pair(rendered, from_depth)?;
    check_mask(rendered, mask)?;
    if rendered.channels() != 3 {
        return Err(LossError::ShapeMismatch("normal maps need 3 channels"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for y in 0..rendered.height() {
        for x in 0..rendered.width() {
            if mask.mask.get(x, y, 0) == 0.0 {
                continue;
            }
            let a = unit_or_zero(rendered, "rendered", x, y)?;
            let b = unit_or_zero(from_depth, "depth", x, y)?;
            if let (Some(a), Some(b)) = (a, b) {
                // 1 − â·b̂ written as ½‖â − b̂‖², which is exactly 0 for equal inputs.
                num += (0.5 * (a.normalize() - b.normalize()).norm_squared()).clamp(0.0, 2.0);
                den += 1.0;
            }
        }
    }
    Ok(num / (den + eps))
}

/// World-space normals from a depth map by central differences of the
/// back-projected axis neighbours, oriented toward the camera. Pixels
/// lacking a valid neighbour get the zero normal.
pub fn depth_to_normals(depth: &ImageBuffer, view: &CameraView) -> ImageBuffer {
    let (w, h) = (depth.width(), depth.height());
    let mut out = ImageBuffer::new(w, h, 3);
    let back = |x: usize, y: usize| -> Option<Vector3<f64>> {
        let z = f64::from(depth.get(x, y, 0));
        (z > 0.0).then(|| view.pixel_direction(&Point2::new(x as f64, y as f64)) * z)
    };
    let rt = view.rotation.transpose();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let Some(center) = back(x, y) else { continue };
            let (Some(l), Some(r), Some(u), Some(d)) = (
                back(x - 1, y),
                back(x + 1, y),
                back(x, y - 1),
                back(x, y + 1),
            ) else {
                continue;
            };
            let n = (r - l).cross(&(d - u));
            let len = n.norm();
            if !(len > 0.0) {
                continue;
            }
            let mut n = n / len;
            if n.dot(&center) > 0.0 {
                n = -n;
            }
            let nw = rt * n;
            for c in 0..3 {
                out.set(x, y, c, nw[c] as f32);
            }
        }
    }
    out
}

/// Weighted sum of the three mask-refined terms.
pub fn total_loss(
    render: &ImageBuffer,
    gt: &ImageBuffer,
    rendered_normals: &ImageBuffer,
    depth_normals: &ImageBuffer,
    mask: &EdgeMask,
    config: &PipelineConfig,
) -> Result<LossReport, LossError> {
    let eps = config.loss_epsilon;
    let l1 = masked_l1(render, gt, mask, eps)?;
    let ss = masked_ssim(render, gt, mask, eps)?;
    let nl = masked_normal_loss(rendered_normals, depth_normals, mask, eps)?;
    let [w1, w2, w3] = config.loss_weights;
    let px = mask.mask.pixel_count();
    Ok(LossReport {
        l1_refined: l1,
        ssim_refined: ss,
        normal_refined: nl,
        total: w1 * l1 + w2 * ss + w3 * nl,
        mask_coverage: if px == 0 {
            0.0
        } else {
            mask.count() as f64 / px as f64
        },
    })
}
