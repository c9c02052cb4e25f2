//! Line rasterization.

use super::grid::{GridImage, PixelPoint};

/// Clips the segment `a -> b` to the box `[lo, hi]^2` (Liang-Barsky).
fn clip_segment(a: PixelPoint, b: PixelPoint, lo: f64, hi: f64) -> Option<(PixelPoint, PixelPoint)> {
    let du = b.u - a.u;
    let dv = b.v - a.v;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-du, a.u - lo),
        (du, hi - a.u),
        (-dv, a.v - lo),
        (dv, hi - a.v),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| PixelPoint::new(a.u + t * du, a.v + t * dv);
    Some((if t0 > 0.0 { at(t0) } else { a }, if t1 < 1.0 { at(t1) } else { b }))
}

/// Integer Bresenham walk from `(u0, v0)` to `(u1, v1)`, both inclusive.
pub fn bresenham(u0: i64, v0: i64, u1: i64, v1: i64, mut visit: impl FnMut(i64, i64)) {
    let du = (u1 - u0).abs();
    let dv = -(v1 - v0).abs();
    let su = if u0 < u1 { 1 } else { -1 };
    let sv = if v0 < v1 { 1 } else { -1 };
    let mut err = du + dv;
    let (mut u, mut v) = (u0, v0);
    loop {
        visit(u, v);
        if u == u1 && v == v1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dv {
            err += dv;
            u += su;
        }
        if e2 <= du {
            err += du;
            v += sv;
        }
    }
}

fn stamp(img: &mut GridImage, u: i64, v: i64, width_px: u32) {
    if width_px <= 1 {
        img.set_i(u, v);
        return;
    }
    let lo = -((width_px as i64 - 1) / 2);
    let hi = width_px as i64 / 2;
    for dv in lo..=hi {
        for du in lo..=hi {
            img.set_i(u + du, v + dv);
        }
    }
}

/// Draws one segment; parts outside the raster are clipped.
pub fn draw_segment(img: &mut GridImage, a: PixelPoint, b: PixelPoint, width_px: u32) {
    let margin = width_px as f64 + 1.0;
    let hi = img.side() as f64 - 1.0 + margin;
    let Some((a, b)) = clip_segment(a, b, -margin, hi) else {
        return;
    };
    let (u0, v0) = a.round();
    let (u1, v1) = b.round();
    bresenham(u0, v0, u1, v1, |u, v| stamp(img, u, v, width_px));
}

/// Rasterizes the polyline through `pts` with 8-connected Bresenham segments.
///
/// `width_px` of 1 gives one-pixel-wide curves. An empty or single-point
/// list only stamps the point (if any).
pub fn draw_polyline(img: &mut GridImage, pts: &[PixelPoint], width_px: u32) {
    let width_px = width_px.max(1);
    match pts {
        [] => {}
        [p] => {
            let (u, v) = p.round();
            stamp(img, u, v, width_px);
        }
        _ => {
            for w in pts.windows(2) {
                draw_segment(img, w[0], w[1], width_px);
            }
        }
    }
}

/// Draws a closed ring (last vertex joined back to the first).
pub fn draw_polygon(img: &mut GridImage, pts: &[PixelPoint], width_px: u32) {
    draw_polyline(img, pts, width_px);
    if pts.len() >= 3 {
        draw_segment(img, pts[pts.len() - 1], pts[0], width_px.max(1));
    }
}
