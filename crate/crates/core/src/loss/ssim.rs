use crate::scene::ImageBuffer;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// Unnormalised 1D Gaussian taps; the 2D window is their outer product.
pub fn gaussian_taps() -> [f64; WINDOW] {
    let r = (WINDOW / 2) as f64;
    std::array::from_fn(|i| {
        let d = i as f64 - r;
        (-d * d / (2.0 * SIGMA * SIGMA)).exp()
    })
}

/// Separable weighted box filter; taps falling outside the image are
/// dropped and the remainder renormalised.
fn blur(src: &[f64], w: usize, h: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let r = (WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (k, t) in taps.iter().enumerate() {
                let sx = x as isize + k as isize - r;
                if sx >= 0 && (sx as usize) < w {
                    acc += t * src[y * w + sx as usize];
                    norm += t;
                }
            }
            tmp[y * w + x] = acc / norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (k, t) in taps.iter().enumerate() {
                let sy = y as isize + k as isize - r;
                if sy >= 0 && (sy as usize) < h {
                    acc += t * tmp[sy as usize * w + x];
                    norm += t;
                }
            }
            out[y * w + x] = acc / norm;
        }
    }
    out
}

/// Per-pixel SSIM, averaged over channels. Inputs must share a shape.
pub fn ssim_map(a: &ImageBuffer, b: &ImageBuffer) -> Vec<f64> {
    debug_assert!(a.same_shape(b));
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let taps = gaussian_taps();
    let mut map = vec![0.0; w * h];
    for c in 0..ch {
        let x: Vec<f64> = a
            .data()
            .iter()
            .skip(c)
            .step_by(ch)
            .map(|&v| f64::from(v))
            .collect();
        let y: Vec<f64> = b
            .data()
            .iter()
            .skip(c)
            .step_by(ch)
            .map(|&v| f64::from(v))
            .collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = blur(&x, w, h, &taps);
        let my = blur(&y, w, h, &taps);
        let sxx = blur(&xx, w, h, &taps);
        let syy = blur(&yy, w, h, &taps);
        let sxy = blur(&xy, w, h, &taps);
        for i in 0..w * h {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            let s = ((2.0 * ux * uy + C1) * (2.0 * cxy + C2))
                / ((ux * ux + uy * uy + C1) * (vx + vy + C2));
            map[i] += s;
        }
    }
    for v in &mut map {
        *v /= ch as f64;
    }
    map
}

/// Mean SSIM over the image.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let map = ssim_map(a, b);
    if map.is_empty() {
        return 1.0;
    }
    map.iter().sum::<f64>() / map.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation over each pixel's clipped 11×11 window.
    fn naive_ssim_at(a: &ImageBuffer, b: &ImageBuffer, px: usize, py: usize) -> f64 {
        let r = 5isize;
        let mut total = 0.0;
        for c in 0..a.channels() {
            let (mut sw, mut mx, mut my, mut sxx, mut syy, mut sxy) =
                (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (x, y) = (px as isize + dx, py as isize + dy);
                    if x < 0 || y < 0 || x >= a.width() as isize || y >= a.height() as isize {
                        continue;
                    }
                    let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * 1.5 * 1.5)).exp();
                    let p = f64::from(a.get(x as usize, y as usize, c));
                    let q = f64::from(b.get(x as usize, y as usize, c));
                    sw += wgt;
                    mx += wgt * p;
                    my += wgt * q;
                    sxx += wgt * p * p;
                    syy += wgt * q * q;
                    sxy += wgt * p * q;
                }
            }
            let (mx, my) = (mx / sw, my / sw);
            let vx = sxx / sw - mx * mx;
            let vy = syy / sw - my * my;
            let cov = sxy / sw - mx * my;
            total += ((2.0 * mx * my + 1e-4) * (2.0 * cov + 9e-4))
                / ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
        }
        total / a.channels() as f64
    }

    #[test]
    fn matches_windowed_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for ch in [1, 3] {
            let a = ImageBuffer::from_fn(23, 17, ch, |_, _, _| rng.gen_range(0.0..1.0));
            let b = ImageBuffer::from_fn(23, 17, ch, |x, y, c| {
                (a.get(x, y, c) + rng.gen_range(-0.2..0.2f32)).clamp(0.0, 1.0)
            });
            let map = ssim_map(&a, &b);
            for y in 0..17 {
                for x in 0..23 {
                    let o = naive_ssim_at(&a, &b, x, y);
                    assert!(
                        (map[y * 23 + x] - o).abs() < 1e-9,
                        "({x},{y}) {} vs {o}",
                        map[y * 23 + x]
                    );
                }
            }
        }
    }

    #[test]
    fn identical_images_score_one() {
        let a = ImageBuffer::from_fn(12, 12, 3, |x, y, c| ((x * 7 + y * 3 + c) % 5) as f32 / 5.0);
        for v in ssim_map(&a, &a) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
