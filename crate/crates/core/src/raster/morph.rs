//! Binary morphology with a disk structuring element.
//!
//! Dilation and erosion are computed from an exact squared Euclidean distance
//! transform, so the cost does not depend on the kernel radius. Pixels outside
//! the raster are ignored (neither set nor unset), which keeps dilation and
//! erosion adjoint and makes opening/closing proper morphological filters.

use super::grid::GridImage;

/// 1D squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let mut s;
        loop {
            let p = v[k];
            s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                // z[0] is -inf, so k never underflows
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance from every pixel to the nearest pixel where `mask` is true.
/// Pixels with no target anywhere get a huge value.
pub fn squared_distance_to(side: usize, mask: &[bool]) -> Vec<f64> {
    let n = side;
    // larger than any in-raster squared distance, small enough to stay exact
    let far = 4.0 * (n * n) as f64 + 4.0;
    let mut grid: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { far }).collect();
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    // columns
    for u in 0..n {
        for r in 0..n {
            f[r] = grid[r * n + u];
        }
        edt_1d(&f, &mut out, &mut v, &mut z);
        for r in 0..n {
            grid[r * n + u] = out[r];
        }
    }
    // rows
    for r in 0..n {
        f.copy_from_slice(&grid[r * n..(r + 1) * n]);
        edt_1d(&f, &mut out, &mut v, &mut z);
        grid[r * n..(r + 1) * n].copy_from_slice(&out);
    }
    grid
}

fn threshold(img: &GridImage, dist: &[f64], radius_px: u32, invert: bool) -> GridImage {
    let r2 = (radius_px as f64) * (radius_px as f64);
    let bits = dist.iter().map(|&d| (d <= r2) != invert).collect();
    GridImage::from_bits(img.side(), img.resolution(), img.center(), bits)
        .expect("geometry copied from a valid image")
}

/// Dilation by the disk `{(du, dv) : du^2 + dv^2 <= radius^2}`.
pub fn dilate(img: &GridImage, radius_px: u32) -> GridImage {
    let dist = squared_distance_to(img.side(), img.bits());
    threshold(img, &dist, radius_px, false)
}

/// Erosion by the same disk, `W \ dilate(W \ X)`.
pub fn erode(img: &GridImage, radius_px: u32) -> GridImage {
    let complement: Vec<bool> = img.bits().iter().map(|&b| !b).collect();
    let dist = squared_distance_to(img.side(), &complement);
    threshold(img, &dist, radius_px, true)
}

pub fn close(img: &GridImage, radius_px: u32) -> GridImage {
    erode(&dilate(img, radius_px), radius_px)
}

pub fn open(img: &GridImage, radius_px: u32) -> GridImage {
    dilate(&erode(img, radius_px), radius_px)
}

/// Closing followed by opening with a disk of `kernel_radius_px`.
pub fn morph_close_open(img: &GridImage, kernel_radius_px: u32) -> GridImage {
    open(&close(img, kernel_radius_px), kernel_radius_px)
}
