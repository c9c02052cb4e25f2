//! Harris corner detection on binary rasters.

use serde::{Deserialize, Serialize};

use super::grid::{GridImage, PixelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarrisParams {
    /// Side of the structure-tensor window and of the non-maximum suppression window.
    pub window_px: u32,
    pub k: f64,
    /// Fraction of the strongest response a corner must reach.
    pub threshold_rel: f64,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            window_px: 5,
            k: 0.04,
            threshold_rel: 0.01,
        }
    }
}

/// Dense Harris response map `det(M) - k * trace(M)^2`, row-major.
///
/// Gradients use a 3x3 Sobel operator with replicated borders; the tensor is
/// smoothed by a Gaussian of `sigma = radius / 2` over the window.
pub fn harris_response(img: &GridImage, params: &HarrisParams) -> Vec<f64> {
    let n = img.side();
    let mut response = vec![0.0; n * n];
    let Some((u_lo, v_lo, u_hi, v_hi)) = bounding_box(img) else {
        return response;
    };
    let radius = (params.window_px / 2).max(1) as usize;
    let margin = radius + 2;
    let u0 = u_lo.saturating_sub(margin);
    let v0 = v_lo.saturating_sub(margin);
    let u1 = (u_hi + margin).min(n - 1);
    let v1 = (v_hi + margin).min(n - 1);
    let w = u1 - u0 + 1;
    let h = v1 - v0 + 1;

    let px = |u: i64, v: i64| -> f64 {
        let cu = u.clamp(0, n as i64 - 1) as usize;
        let cv = v.clamp(0, n as i64 - 1) as usize;
        if img.get(cu, cv) {
            1.0
        } else {
            0.0
        }
    };

    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let u = (u0 + x) as i64;
            let v = (v0 + y) as i64;
            let gx = (px(u + 1, v - 1) + 2.0 * px(u + 1, v) + px(u + 1, v + 1))
                - (px(u - 1, v - 1) + 2.0 * px(u - 1, v) + px(u - 1, v + 1));
            let gy = (px(u - 1, v + 1) + 2.0 * px(u, v + 1) + px(u + 1, v + 1))
                - (px(u - 1, v - 1) + 2.0 * px(u, v - 1) + px(u + 1, v - 1));
            let i = y * w + x;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }

    let sigma = (radius as f64 / 2.0).max(0.5);
    let kernel: Vec<f64> = {
        let raw: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|k| k / sum).collect()
    };
    let sxx = smooth(&ixx, w, h, &kernel);
    let syy = smooth(&iyy, w, h, &kernel);
    let sxy = smooth(&ixy, w, h, &kernel);

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let tr = sxx[i] + syy[i];
            response[(v0 + y) * n + (u0 + x)] = det - params.k * tr * tr;
        }
    }
    response
}

fn bounding_box(img: &GridImage) -> Option<(usize, usize, usize, usize)> {
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for (u, v) in img.iter_set() {
        bb = Some(match bb {
            None => (u, v, u, v),
            Some((a, b, c, d)) => (a.min(u), b.min(v), c.max(u), d.max(v)),
        });
    }
    bb
}

/// Separable convolution with clamped borders.
fn smooth(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let xx = (x as i64 + k as i64 - r).clamp(0, w as i64 - 1) as usize;
                    c * src[y * w + xx]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let yy = (y as i64 + k as i64 - r).clamp(0, h as i64 - 1) as usize;
                    c * tmp[yy * w + x]
                })
                .sum();
        }
    }
    out
}

/// Parabolic sub-pixel offset of a peak from three samples, in `[-0.5, 0.5]`.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

/// Corners at local maxima of the Harris response above
/// `threshold_rel * max(response)`, suppressed within `window_px`.
///
/// Returned in raster order with sub-pixel refinement.
pub fn harris_corners(img: &GridImage, params: &HarrisParams) -> Vec<PixelPoint> {
    let n = img.side();
    let response = harris_response(img, params);
    let max = response.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let thresh = params.threshold_rel * max;
    let radius = (params.window_px / 2).max(1) as i64;
    let at = |u: i64, v: i64| response[v as usize * n + u as usize];

    let mut corners = Vec::new();
    for v in 0..n as i64 {
        for u in 0..n as i64 {
            let r = at(u, v);
            if r <= thresh || r <= 0.0 {
                continue;
            }
            // strict maximum against earlier pixels, non-strict against later
            // ones, so plateaus keep exactly their first pixel
            let mut is_max = true;
            'nms: for dv in -radius..=radius {
                for du in -radius..=radius {
                    let (a, b) = (u + du, v + dv);
                    if (du == 0 && dv == 0) || a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    let other = at(a, b);
                    let earlier = dv < 0 || (dv == 0 && du < 0);
                    if other > r || (earlier && other == r) {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let du = if u > 0 && u < n as i64 - 1 {
                parabolic_offset(at(u - 1, v), r, at(u + 1, v))
            } else {
                0.0
            };
            let dv = if v > 0 && v < n as i64 - 1 {
                parabolic_offset(at(u, v - 1), r, at(u, v + 1))
            } else {
                0.0
            };
            corners.push(PixelPoint::new(u as f64 + du, v as f64 + dv));
        }
    }
    corners
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::draw::draw_polyline;
    use crate::raster::pose::Pose2;

    fn blank(side: usize) -> GridImage {
        GridImage::new(side, 1.0, Pose2::IDENTITY).unwrap()
    }

    fn line(img: &mut GridImage, a: (f64, f64), b: (f64, f64)) {
        draw_polyline(img, &[PixelPoint::new(a.0, a.1), PixelPoint::new(b.0, b.1)], 1);
    }

    #[test]
    fn blank_has_no_corners() {
        assert!(harris_corners(&blank(32), &HarrisParams::default()).is_empty());
    }

    #[test]
    fn straight_line_has_no_corners() {
        let mut img = blank(64);
        line(&mut img, (0.0, 30.0), (63.0, 30.0));
        assert!(harris_corners(&img, &HarrisParams::default()).is_empty());
        let mut img = blank(64);
        line(&mut img, (20.0, 0.0), (20.0, 63.0));
        assert!(harris_corners(&img, &HarrisParams::default()).is_empty());
    }

    #[test]
    fn crossing_gives_one_corner_at_center() {
        let mut img = blank(64);
        line(&mut img, (0.0, 32.0), (63.0, 32.0));
        line(&mut img, (32.0, 0.0), (32.0, 63.0));
        let c = harris_corners(&img, &HarrisParams::default());
        assert_eq!(c.len(), 1, "{c:?}");
        assert!(c[0].distance(PixelPoint::new(32.0, 32.0)) <= 2.0);
    }

    #[test]
    fn t_junction_gives_one_corner() {
        let mut img = blank(64);
        line(&mut img, (0.0, 20.0), (63.0, 20.0));
        line(&mut img, (30.0, 20.0), (30.0, 63.0));
        let c = harris_corners(&img, &HarrisParams::default());
        assert_eq!(c.len(), 1, "{c:?}");
        assert!(c[0].distance(PixelPoint::new(30.0, 20.0)) <= 2.0);
    }
}
