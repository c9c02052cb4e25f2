//! First-hit visibility by ray casting.

use std::f64::consts::TAU;

use super::grid::{GridImage, PixelPoint};

/// Number of rays for a raster of side `m`: the smallest multiple of 8 whose
/// angular step does not exceed `atan(1 / m)`.
pub fn ray_count(m: usize) -> usize {
    let step = (1.0 / m.max(1) as f64).atan();
    let n = (TAU / step).ceil() as usize;
    n.div_ceil(8) * 8
}

/// Walks the pixels a ray crosses (Amanatides-Woo) and returns the first set one.
fn first_hit(img: &GridImage, origin: PixelPoint, dir: (f64, f64)) -> Option<(usize, usize)> {
    let n = img.side() as i64;
    let (mut u, mut v) = origin.round();
    let (du, dv) = dir;
    let step_u: i64 = if du > 0.0 { 1 } else { -1 };
    let step_v: i64 = if dv > 0.0 { 1 } else { -1 };
    // pixel (i, j) spans [i - 0.5, i + 0.5]
    let next_boundary = |p: f64, cell: i64, step: i64| cell as f64 + 0.5 * step as f64 - p;
    let mut t_max_u = if du != 0.0 {
        next_boundary(origin.u, u, step_u) / du
    } else {
        f64::INFINITY
    };
    let mut t_max_v = if dv != 0.0 {
        next_boundary(origin.v, v, step_v) / dv
    } else {
        f64::INFINITY
    };
    let t_delta_u = if du != 0.0 { 1.0 / du.abs() } else { f64::INFINITY };
    let t_delta_v = if dv != 0.0 { 1.0 / dv.abs() } else { f64::INFINITY };

    while u >= 0 && v >= 0 && u < n && v < n {
        if img.get(u as usize, v as usize) {
            return Some((u as usize, v as usize));
        }
        if t_max_u < t_max_v {
            u += step_u;
            t_max_u += t_delta_u;
        } else {
            v += step_v;
            t_max_v += t_delta_v;
        }
    }
    None
}

/// Keeps only set pixels that are the first hit of some ray from `origin`.
///
/// Rays are cast densely enough that every pixel of the raster is crossed by
/// at least one of them, so unoccluded pixels always survive.
pub fn ray_cast_visibility(img: &GridImage, origin: PixelPoint) -> GridImage {
    let mut out = img.blank_like();
    if img.is_blank() {
        return out;
    }
    let rays = ray_count(img.side());
    for k in 0..rays {
        let a = TAU * k as f64 / rays as f64;
        if let Some((u, v)) = first_hit(img, origin, (a.cos(), a.sin())) {
            out.set(u, v, true);
        }
    }
    out
}
