//! Binary structure-edge masks from rendered normal maps.

use thiserror::Error;

use crate::render::render_maps;
use crate::scene::{CameraView, GaussianPrimitive, ImageBuffer, PipelineConfig};

#[derive(Debug, Error, PartialEq)]
pub enum EdgeError {
    #[error("image contains non-finite pixels")]
    NonFinite,
    #[error("image {width}x{height} is smaller than the 3x3 kernel")]
    TooSmall { width: usize, height: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMask {
    pub view_id: u32,
    pub mask: ImageBuffer,
    pub threshold_used: f64,
}

impl EdgeMask {
    /// Nearest-pixel lookup; out-of-image positions read as 0.
    pub fn at(&self, x: f64, y: f64) -> bool {
        let (xi, yi) = (x.round(), y.round());
        if xi < 0.0 || yi < 0.0 {
            return false;
        }
        let (xi, yi) = (xi as usize, yi as usize);
        xi < self.mask.width() && yi < self.mask.height() && self.mask.get(xi, yi, 0) != 0.0
    }

    pub fn count(&self) -> usize {
        self.mask.count_nonzero()
    }
}

/// Quadratic smoothing energy `Σ |∇u|² + λ Σ (u − I)²`, forward differences
/// with Neumann borders, summed over channels.
pub fn tv_energy(u: &ImageBuffer, input: &ImageBuffer, lambda: f64) -> f64 {
    let (w, h, ch) = (u.width(), u.height(), u.channels());
    let mut e = 0.0;
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let v = f64::from(u.get(x, y, c));
                if x + 1 < w {
                    let d = f64::from(u.get(x + 1, y, c)) - v;
                    e += d * d;
                }
                if y + 1 < h {
                    let d = f64::from(u.get(x, y + 1, c)) - v;
                    e += d * d;
                }
                let r = v - f64::from(input.get(x, y, c));
                e += lambda * r * r;
            }
        }
    }
    e
}

/// Gradient descent on [`tv_energy`], returning the result and the energy
/// before each step plus after the last one.
pub fn tv_denoise_with_history(
    image: &ImageBuffer,
    lambda: f64,
    iterations: usize,
) -> Result<(ImageBuffer, Vec<f64>), EdgeError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(EdgeError::BadParameter("lambda must be > 0"));
    }
    if iterations == 0 {
        return Err(EdgeError::BadParameter("iterations must be >= 1"));
    }
    if !image.is_finite() {
        return Err(EdgeError::NonFinite);
    }
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let input: Vec<f64> = image.data().iter().map(|&v| f64::from(v)).collect();
    let mut u = input.clone();
    let mut next = u.clone();
    let step = 0.2 / (4.0 + lambda);
    let idx = |x: usize, y: usize, c: usize| (y * w + x) * ch + c;

    let energy = |u: &[f64]| {
        let mut e = 0.0;
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let v = u[idx(x, y, c)];
                    if x + 1 < w {
                        let d = u[idx(x + 1, y, c)] - v;
                        e += d * d;
                    }
                    if y + 1 < h {
                        let d = u[idx(x, y + 1, c)] - v;
                        e += d * d;
                    }
                    let r = v - input[idx(x, y, c)];
                    e += lambda * r * r;
                }
            }
        }
        e
    };

    let mut history = Vec::with_capacity(iterations + 1);
    history.push(energy(&u));
    for _ in 0..iterations {
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let v = u[idx(x, y, c)];
                    // Neumann Laplacian: missing neighbours contribute nothing.
                    let mut lap = 0.0;
                    if x > 0 {
                        lap += u[idx(x - 1, y, c)] - v;
                    }
                    if x + 1 < w {
                        lap += u[idx(x + 1, y, c)] - v;
                    }
                    if y > 0 {
                        lap += u[idx(x, y - 1, c)] - v;
                    }
                    if y + 1 < h {
                        lap += u[idx(x, y + 1, c)] - v;
                    }
                    let grad = -lap + lambda * (v - input[idx(x, y, c)]);
                    next[idx(x, y, c)] = v - step * grad;
                }
            }
        }
        std::mem::swap(&mut u, &mut next);
        history.push(energy(&u));
    }
    let out = ImageBuffer::from_vec(w, h, ch, u.iter().map(|&v| v as f32).collect())
        .map_err(|_| EdgeError::NonFinite)?;
    Ok((out, history))
}

pub fn tv_denoise(
    image: &ImageBuffer,
    lambda: f64,
    iterations: usize,
) -> Result<ImageBuffer, EdgeError> {
    tv_denoise_with_history(image, lambda, iterations).map(|(u, _)| u)
}

/// Reflect-101 index (`-1 → 1`, `n → n − 2`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * n - 2 - i
    } else {
        i
    };
    r as usize
}

pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Unnormalised Sobel magnitude, reduced across channels by Euclidean norm.
pub fn gradient_magnitude(image: &ImageBuffer) -> Result<ImageBuffer, EdgeError> {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    if w < 3 || h < 3 {
        return Err(EdgeError::TooSmall {
            width: w,
            height: h,
        });
    }
    let mut out = ImageBuffer::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let mut sq = 0.0;
            for c in 0..ch {
                let (mut gx, mut gy) = (0.0, 0.0);
                for (ky, (rx, ry)) in SOBEL_X.iter().zip(SOBEL_Y.iter()).enumerate() {
                    let sy = reflect(y as isize + ky as isize - 1, h);
                    for kx in 0..3 {
                        let sx = reflect(x as isize + kx as isize - 1, w);
                        let v = f64::from(image.get(sx, sy, c));
                        gx += rx[kx] * v;
                        gy += ry[kx] * v;
                    }
                }
                sq += gx * gx + gy * gy;
            }
            out.set(x, y, 0, sq.sqrt() as f32);
        }
    }
    Ok(out)
}

/// `1` where magnitude is strictly above `threshold`.
pub fn threshold_mask(magnitude: &ImageBuffer, threshold: f64, view_id: u32) -> EdgeMask {
    let mut mask = ImageBuffer::new(magnitude.width(), magnitude.height(), 1);
    for y in 0..magnitude.height() {
        for x in 0..magnitude.width() {
            if f64::from(magnitude.get(x, y, 0)) > threshold {
                mask.set(x, y, 0, 1.0);
            }
        }
    }
    EdgeMask {
        view_id,
        mask,
        threshold_used: threshold,
    }
}

/// Smooth, differentiate and threshold one normal map.
pub fn mask_from_normals(
    normals: &ImageBuffer,
    view_id: u32,
    config: &PipelineConfig,
) -> Result<EdgeMask, EdgeError> {
    if !(config.edge_threshold > 0.0) {
        return Err(EdgeError::BadParameter("edge_threshold must be > 0"));
    }
    let smooth = tv_denoise(normals, config.tv_lambda, config.tv_iterations)?;
    let mag = gradient_magnitude(&smooth)?;
    Ok(threshold_mask(&mag, config.edge_threshold, view_id))
}

/// Renders each view's normal map from the frozen primitive set and
/// extracts its edge mask.
pub fn extract_masks(
    primitives: &[GaussianPrimitive],
    views: &[CameraView],
    config: &PipelineConfig,
) -> Result<Vec<EdgeMask>, EdgeError> {
    views
        .iter()
        .map(|v| {
            let maps = render_maps(primitives, v, config);
            mask_from_normals(&maps.normal, v.view_id, config)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Point3, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, c, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = ImageBuffer::from_fn(9, 7, 3, |_, _, c| 0.25 * c as f32);
        let out = tv_denoise(&img, 0.1, 50).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn energy_is_monotone_and_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            let img = random_image(&mut rng, 16, 12, 3);
            let (out, hist) = tv_denoise_with_history(&img, lambda, 200).unwrap();
            for pair in hist.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-9, "{pair:?}");
            }
            assert!(tv_energy(&out, &img, lambda) <= tv_energy(&img, &img, lambda));
        }
    }

    #[test]
    fn step_contracts_but_survives() {
        let img = ImageBuffer::from_fn(40, 1, 1, |x, _, _| if x < 20 { 0.0 } else { 1.0 });
        let out = tv_denoise(&img, 0.1, 50).unwrap();
        let jump = out.get(20, 0, 0) - out.get(19, 0, 0);
        assert!(jump > 0.0 && jump < 1.0, "jump {jump}");
    }

    #[test]
    fn tv_rejects_bad_input() {
        let img = ImageBuffer::new(3, 3, 1);
        assert!(tv_denoise(&img, 0.0, 5).is_err());
        assert!(tv_denoise(&img, 0.1, 0).is_err());
    }

    #[test]
    fn sobel_constant_and_step() {
        let flat = ImageBuffer::from_fn(8, 8, 2, |_, _, _| 3.0);
        assert_eq!(gradient_magnitude(&flat).unwrap().count_nonzero(), 0);
        let h = 0.7f32;
        let step = ImageBuffer::from_fn(10, 6, 1, |x, _, _| if x < 5 { 0.0 } else { h });
        let g = gradient_magnitude(&step).unwrap();
        for y in 1..5 {
            assert!((g.get(4, y, 0) - 4.0 * h).abs() < 1e-6);
            assert!((g.get(5, y, 0) - 4.0 * h).abs() < 1e-6);
            assert_eq!(g.get(2, y, 0), 0.0);
        }
        assert!(matches!(
            gradient_magnitude(&ImageBuffer::new(2, 5, 1)),
            Err(EdgeError::TooSmall { .. })
        ));
    }

    /// Pads explicitly, then convolves with the flipped kernel.
    fn naive_sobel(img: &ImageBuffer) -> ImageBuffer {
        let (w, h, ch) = (img.width(), img.height(), img.channels());
        let pad = |x: isize, y: isize, c: usize| -> f64 {
            let fx = |i: isize, n: isize| {
                if i < 0 {
                    -i
                } else if i >= n {
                    2 * n - 2 - i
                } else {
                    i
                }
            };
            f64::from(img.get(fx(x, w as isize) as usize, fx(y, h as isize) as usize, c))
        };
        // Convolution kernels are the 180° rotation of the correlation kernels.
        let kx = [[1.0, 0.0, -1.0], [2.0, 0.0, -2.0], [1.0, 0.0, -1.0]];
        let ky = [[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]];
        ImageBuffer::from_fn(w, h, 1, |x, y, _| {
            let mut sq = 0.0f64;
            for c in 0..ch {
                let (mut gx, mut gy) = (0.0f64, 0.0f64);
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let v = pad(x as isize + dx, y as isize + dy, c);
                        gx += kx[(1 - dy) as usize][(1 - dx) as usize] * v;
                        gy += ky[(1 - dy) as usize][(1 - dx) as usize] * v;
                    }
                }
                sq += gx * gx + gy * gy;
            }
            sq.sqrt() as f32
        })
    }

    #[test]
    fn sobel_matches_naive_convolution_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for c in 1..=3 {
            let img = random_image(&mut rng, 13, 9, c);
            assert_eq!(gradient_magnitude(&img).unwrap(), naive_sobel(&img));
        }
    }

    #[test]
    fn threshold_is_strict() {
        let mut mag = ImageBuffer::new(3, 3, 1);
        assert_eq!(threshold_mask(&mag, 0.5, 0).count(), 0);
        mag.set(1, 1, 0, 0.5);
        mag.set(0, 0, 0, 0.5000001);
        let m = threshold_mask(&mag, 0.5, 0);
        assert_eq!(m.mask.get(1, 1, 0), 0.0);
        assert_eq!(m.mask.get(0, 0, 0), 1.0);
    }

    proptest! {
        #[test]
        fn mask_count_non_increasing_in_threshold(
            vals in proptest::collection::vec(0.0f32..2.0, 16),
            t1 in 0.01..2.0f64, dt in 0.0..1.0f64,
        ) {
            let mag = ImageBuffer::from_vec(4, 4, 1, vals).unwrap();
            let a = threshold_mask(&mag, t1, 0);
            let b = threshold_mask(&mag, t1 + dt, 0);
            prop_assert!(a.mask.is_binary() && b.mask.is_binary());
            prop_assert!(b.count() <= a.count());
        }
    }

    fn axis_view() -> CameraView {
        CameraView::from_pinhole(
            0,
            (60.0, 60.0, 31.5, 31.5),
            Matrix3::identity(),
            Vector3::zeros(),
            64,
            64,
        )
    }

    fn wall(
        prims: &mut Vec<GaussianPrimitive>,
        origin: Vector3<f64>,
        u: Vector3<f64>,
        v: Vector3<f64>,
        n: Vector3<f64>,
        nu: i32,
        nv: i32,
    ) {
        for i in 0..nu {
            for j in 0..nv {
                let c = origin + u * f64::from(i) + v * f64::from(j);
                let id = prims.len() as u64;
                prims.push(GaussianPrimitive::surfel(
                    id,
                    Point3::from(c),
                    n,
                    0.03,
                    0.003,
                    0.95,
                    Vector3::repeat(0.5),
                ));
            }
        }
    }

    #[test]
    fn flat_wall_gives_empty_masks() {
        let mut prims = Vec::new();
        wall(
            &mut prims,
            Vector3::new(-3.0, -3.0, 2.0),
            Vector3::x() * 0.03,
            Vector3::y() * 0.03,
            -Vector3::z(),
            201,
            201,
        );
        let masks = extract_masks(&prims, &[axis_view()], &PipelineConfig::default()).unwrap();
        assert_eq!(masks[0].count(), 0);
    }

    #[test]
    fn crease_produces_mask_near_its_projection() {
        // Two half-planes meeting along the line x = 0, z = 2 (a convex ridge toward the camera).
        let mut prims = Vec::new();
        let s = 0.02;
        let d1 = Vector3::new(-1.0, 0.0, 1.0).normalize() * s;
        let d2 = Vector3::new(1.0, 0.0, 1.0).normalize() * s;
        let n1 = Vector3::new(-1.0, 0.0, -1.0).normalize();
        let n2 = Vector3::new(1.0, 0.0, -1.0).normalize();
        wall(
            &mut prims,
            Vector3::new(0.0, -2.0, 2.0),
            d1,
            Vector3::y() * s,
            n1,
            260,
            201,
        );
        wall(
            &mut prims,
            Vector3::new(0.0, -2.0, 2.0) + d2,
            d2,
            Vector3::y() * s,
            n2,
            259,
            201,
        );
        let cfg = PipelineConfig::default();
        let mask = &extract_masks(&prims, &[axis_view()], &cfg).unwrap()[0];
        assert!(mask.count() > 0);
        // The crease projects to the column x = cx.
        for y in 10..54 {
            for x in 0..64 {
                if mask.mask.get(x, y, 0) != 0.0 {
                    assert!(
                        (x as f64 - 31.5).abs() <= 8.0,
                        "stray mask pixel at ({x},{y})"
                    );
                }
            }
            assert!(mask.mask.get(31, y, 0) == 1.0 || mask.mask.get(32, y, 0) == 1.0);
        }
        let mut hi = cfg.clone();
        hi.edge_threshold = 1e6;
        assert_eq!(
            extract_masks(&prims, &[axis_view()], &hi).unwrap()[0].count(),
            0
        );
    }

    #[test]
    fn masks_are_deterministic() {
        let mut prims = Vec::new();
        wall(
            &mut prims,
            Vector3::new(-0.5, -0.5, 2.0),
            Vector3::x() * 0.05,
            Vector3::y() * 0.05,
            -Vector3::z(),
            21,
            21,
        );
        let a = extract_masks(&prims, &[axis_view()], &PipelineConfig::default()).unwrap();
        let b = extract_masks(&prims, &[axis_view()], &PipelineConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(
            a[0].count() > 0,
            "silhouette of a finite wall should be masked"
        );
    }
}
