//! Area-equalized polar sampling pattern.
//!
//! The disk of radius `R_o` is cut into `N_r` rings of equal width. Ring `i`
//! (1-based) holds `N_b * i` cells of equal angle, so every cell in ring `i`
//! has area `kappa * (2 - 1/i)` with `kappa = pi * R_o^2 / (N_b * N_r^2)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPattern {
    pub outer_radius_m: f64,
    pub rings: u32,
    pub base_cells: u32,
    pub kappa: f64,
}

/// Geometry of one cell: ring (1-based), radial and angular bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub ring: u32,
    pub index_in_ring: u32,
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
    /// Counter-clockwise angle of the leading boundary, measured from the
    /// characteristic orientation.
    pub start_angle: f64,
    pub end_angle: f64,
}

pub fn build_pattern(outer_radius_m: f64, rings: u32, base_cells: u32) -> Result<SamplingPattern> {
    if rings == 0 || base_cells == 0 {
        return Err(Error::Config(
            "sampling pattern needs at least one ring and one base cell".into(),
        ));
    }
    if !(outer_radius_m.is_finite() && outer_radius_m > 0.0) {
        return Err(Error::Config(format!(
            "sampling pattern radius must be positive, got {outer_radius_m}"
        )));
    }
    let nr = rings as f64;
    Ok(SamplingPattern {
        outer_radius_m,
        rings,
        base_cells,
        kappa: PI * outer_radius_m * outer_radius_m / (base_cells as f64 * nr * nr),
    })
}

impl SamplingPattern {
    /// Total number of cells Q = N_b * N_r * (N_r + 1) / 2.
    pub fn len(&self) -> usize {
        let nr = self.rings as usize;
        self.base_cells as usize * nr * (nr + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Outer radius of ring `i` (1-based); `ring_radius(0) = 0`.
    pub fn ring_radius(&self, i: u32) -> f64 {
        self.outer_radius_m * i as f64 / self.rings as f64
    }

    pub fn cells_in_ring(&self, i: u32) -> u32 {
        self.base_cells * i
    }

    /// Analytic cell area of ring `i`, `kappa * (2 - 1/i)`.
    pub fn cell_area(&self, i: u32) -> f64 {
        self.kappa * (2.0 - 1.0 / i as f64)
    }

    /// Index of the first bit of ring `i`.
    pub fn ring_offset(&self, i: u32) -> usize {
        let i = i as usize;
        self.base_cells as usize * i * (i - 1) / 2
    }

    /// Cell holding a point at `radius` and counter-clockwise `angle` in
    /// `[0, 2*pi)` from the characteristic orientation. Rings are half-open
    /// `[r_{i-1}, r_i)` except the outermost, which includes `R_o`.
    pub fn cell_index(&self, radius: f64, angle: f64) -> Option<usize> {
        if !(0.0..=self.outer_radius_m).contains(&radius) {
            return None;
        }
        let ring0 = ((radius / self.outer_radius_m * self.rings as f64).floor() as u32)
            .min(self.rings - 1);
        let i = ring0 + 1;
        let n = self.cells_in_ring(i);
        let cell = ((angle / TAU * n as f64).floor() as u32).min(n - 1);
        Some(self.ring_offset(i) + cell as usize)
    }

    pub fn cell(&self, index: usize) -> Cell {
        let mut ring = 1;
        while self.ring_offset(ring + 1) <= index {
            ring += 1;
        }
        let k = (index - self.ring_offset(ring)) as u32;
        let n = self.cells_in_ring(ring) as f64;
        Cell {
            ring,
            index_in_ring: k,
            inner_radius_m: self.ring_radius(ring - 1),
            outer_radius_m: self.ring_radius(ring),
            start_angle: TAU * k as f64 / n,
            end_angle: TAU * (k + 1) as f64 / n,
        }
    }
}
