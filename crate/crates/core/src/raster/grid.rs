//! Square binary top-view raster.
//!
//! Pixel convention: `(u, v) = (column, row)`. The frame the image is
//! centered on maps to pixel `(M/2, M/2)` (integer division), `+u` follows the
//! frame's `+x` axis and `+v` follows its `-y` axis, so rows grow downward.
//! Pixel `(i, j)` has its center at the continuous coordinate `(i, j)`.

use serde::{Deserialize, Serialize};

use super::pose::{Point2, Pose2};
use crate::error::{Error, Result};

/// Continuous pixel coordinate (sub-pixel positions allowed).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn from_index(u: usize, v: usize) -> Self {
        Self::new(u as f64, v as f64)
    }

    /// Nearest pixel index, which may be out of bounds.
    pub fn round(self) -> (i64, i64) {
        (self.u.round() as i64, self.v.round() as i64)
    }

    pub fn distance(self, other: PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn distance_sq(self, other: PixelPoint) -> f64 {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        du * du + dv * dv
    }
}

/// An `M x M` binary image with a physical resolution and a center frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    side: usize,
    resolution: f64,
    center: Pose2,
    bits: Vec<bool>,
}

/// Side length in pixels for a physical extent, `round(S / r)`.
pub fn side_for_extent(size_m: f64, resolution: f64) -> usize {
    (size_m / resolution).round() as usize
}

impl GridImage {
    pub fn new(side: usize, resolution: f64, center: Pose2) -> Result<Self> {
        if side == 0 {
            return Err(Error::Config("image side must be positive".into()));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Config(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self {
            side,
            resolution,
            center,
            bits: vec![false; side * side],
        })
    }

    /// Image spanning `size_m` meters per side around `center`.
    pub fn with_extent(size_m: f64, resolution: f64, center: Pose2) -> Result<Self> {
        Self::new(side_for_extent(size_m, resolution), resolution, center)
    }

    pub fn from_bits(side: usize, resolution: f64, center: Pose2, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != side * side {
            return Err(Error::Config(format!(
                "bit buffer holds {} pixels, expected {}",
                bits.len(),
                side * side
            )));
        }
        let mut img = Self::new(side, resolution, center)?;
        img.bits = bits;
        Ok(img)
    }

    /// Blank image with the same geometry.
    pub fn blank_like(&self) -> Self {
        Self {
            side: self.side,
            resolution: self.resolution,
            center: self.center,
            bits: vec![false; self.bits.len()],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn center(&self) -> Pose2 {
        self.center
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn same_geometry(&self, other: &GridImage) -> bool {
        self.side == other.side
            && self.resolution == other.resolution
            && self.center == other.center
    }

    #[inline]
    pub fn in_bounds(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.side && (v as usize) < self.side
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.side + u]
    }

    /// Out-of-bounds reads return `false`.
    #[inline]
    pub fn get_i(&self, u: i64, v: i64) -> bool {
        self.in_bounds(u, v) && self.bits[v as usize * self.side + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: bool) {
        self.bits[v * self.side + u] = value;
    }

    /// Sets an in-bounds pixel; out-of-bounds writes are dropped.
    #[inline]
    pub fn set_i(&mut self, u: i64, v: i64) -> bool {
        if self.in_bounds(u, v) {
            self.bits[v as usize * self.side + u as usize] = true;
            true
        } else {
            false
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn clear(&mut self) {
        self.bits.iter_mut().for_each(|b| *b = false);
    }

    /// Set pixels in row-major order as `(u, v)`.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let side = self.side;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % side, i / side))
    }

    /// Pixel-wise OR. Both images must share geometry.
    pub fn union(&self, other: &GridImage) -> Result<GridImage> {
        if !self.same_geometry(other) {
            return Err(Error::Config(
                "cannot combine imprints with different geometry".into(),
            ));
        }
        let mut out = self.clone();
        for (a, &b) in out.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(out)
    }

    pub fn is_subset_of(&self, other: &GridImage) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Pixel of the center frame's origin.
    pub fn center_pixel(&self) -> PixelPoint {
        let c = (self.side / 2) as f64;
        PixelPoint::new(c, c)
    }

    /// Metric coordinates in the center frame -> pixel coordinates.
    pub fn local_to_pixel(&self, p: Point2) -> PixelPoint {
        let c = self.center_pixel();
        PixelPoint::new(c.u + p.x / self.resolution, c.v - p.y / self.resolution)
    }

    /// Pixel coordinates -> metric coordinates in the center frame.
    pub fn pixel_to_local(&self, p: PixelPoint) -> Point2 {
        let c = self.center_pixel();
        Point2::new((p.u - c.u) * self.resolution, (c.v - p.v) * self.resolution)
    }

    /// Parent-frame coordinates (e.g. global map frame) -> pixel coordinates.
    pub fn world_to_pixel(&self, p: Point2) -> PixelPoint {
        let d = p - self.center.translation();
        let (s, c) = self.center.theta.sin_cos();
        self.local_to_pixel(Point2::new(c * d.x + s * d.y, -s * d.x + c * d.y))
    }

    pub fn pixel_to_world(&self, p: PixelPoint) -> Point2 {
        self.center.transform_point(self.pixel_to_local(p))
    }

    /// Pixel-space direction `(du, dv)` -> unit heading in the center frame.
    pub fn pixel_direction_heading(du: f64, dv: f64) -> f64 {
        (-dv).atan2(du)
    }

    /// Whether a continuous pixel coordinate falls inside the raster.
    pub fn contains(&self, p: PixelPoint) -> bool {
        let hi = self.side as f64 - 0.5;
        p.u >= -0.5 && p.v >= -0.5 && p.u < hi && p.v < hi
    }
}
