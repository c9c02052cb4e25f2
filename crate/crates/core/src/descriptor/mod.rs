//! Intersection descriptors: branch segmentation, discrepancy mitigation,
//! characteristic orientation and polar binary encoding.

mod bits;
mod branch;
mod pattern;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use bits::{Descriptor, DescriptorDump, DescriptorSource};
pub use branch::{
    characteristic_orientations, disk_pixels, image_angle, pixel_heading_vector,
    refine_building_imprint, refine_intersection, refine_road_imprint, segment_branches, Branch,
    BranchLine, DescribeMode,
};
pub use pattern::{build_pattern, Cell, SamplingPattern};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::raster::{GridImage, PixelPoint, Point2};

/// Angles this close below zero are treated as lying on the leading boundary.
const ZERO_SNAP: f64 = 1e-9;

/// Samples the combined imprint with the pattern centered on `rho_hat` and
/// rotated so that `nu_hat` lies on the leading boundary of cell 0.
///
/// A cell is set when the center of any set pixel falls inside it. Bits run
/// from the inner to the outer ring, counter-clockwise within each ring.
pub fn encode(
    combined: &GridImage,
    rho_hat: PixelPoint,
    nu_hat: Point2,
    pattern: &SamplingPattern,
    source: DescriptorSource,
) -> Result<Descriptor> {
    let res = combined.resolution();
    let side = combined.side();
    let radius_px = pattern.outer_radius_m / res;
    let hi = side as f64 - 0.5;
    if rho_hat.u - radius_px < -0.5
        || rho_hat.v - radius_px < -0.5
        || rho_hat.u + radius_px > hi
        || rho_hat.v + radius_px > hi
    {
        return Err(Error::PatternOutOfBounds {
            u: rho_hat.u,
            v: rho_hat.v,
            radius_px,
            side,
        });
    }
    let n = nu_hat * (1.0 / nu_hat.norm());
    let mut d = Descriptor::zeros(pattern.len(), source);
    let u0 = (rho_hat.u - radius_px).ceil().max(0.0) as usize;
    let v0 = (rho_hat.v - radius_px).ceil().max(0.0) as usize;
    let u1 = ((rho_hat.u + radius_px).floor() as usize).min(side - 1);
    let v1 = ((rho_hat.v + radius_px).floor() as usize).min(side - 1);
    let bits = combined.bits();
    for v in v0..=v1 {
        let row = &bits[v * side..(v + 1) * side];
        for (u, &on) in row.iter().enumerate().take(u1 + 1).skip(u0) {
            if !on {
                continue;
            }
            let w = Point2::new((u as f64 - rho_hat.u) * res, (rho_hat.v - v as f64) * res);
            let radius = w.norm();
            if radius > pattern.outer_radius_m {
                continue;
            }
            let mut angle = n.cross(w).atan2(n.dot(w));
            if angle < 0.0 {
                angle = if angle > -ZERO_SNAP { 0.0 } else { angle + TAU };
            }
            if let Some(idx) = pattern.cell_index(radius, angle) {
                d.set(idx, true);
            }
        }
    }
    d.refined_point = rho_hat;
    d.refined_local = combined.pixel_to_local(rho_hat);
    d.orientation = n;
    Ok(d)
}

/// Everything produced while describing one intersection.
#[derive(Debug, Clone)]
pub struct Description {
    pub rho_i: PixelPoint,
    pub rho_hat: PixelPoint,
    /// Branches with orientations measured from `rho_hat`.
    pub branches: Vec<Branch>,
    /// Whether the summary vector fell below the symmetry threshold.
    pub symmetric: bool,
    /// One descriptor per characteristic orientation.
    pub descriptors: Vec<Descriptor>,
    /// Refined road imprint OR refined building imprint.
    pub combined: GridImage,
}

/// Runs segmentation, refinement, orientation selection and encoding.
pub fn describe(
    road: &GridImage,
    building: &GridImage,
    rho_i: PixelPoint,
    cfg: &Config,
    mode: DescribeMode,
    source: DescriptorSource,
) -> Result<Description> {
    if !road.same_geometry(building) {
        return Err(Error::Input("road and building imprints differ in geometry".into()));
    }
    let res = road.resolution();
    let mut branches = segment_branches(
        road,
        rho_i,
        cfg.discrepant_radius_m,
        cfg.descriptor_outer_radius_m,
        cfg.min_branch_px,
    );
    if branches.len() < 2 {
        return Err(Error::DegenerateIntersection {
            branches: branches.len(),
        });
    }
    if branches.len() == 2 {
        log::debug!("intersection at {rho_i:?} has only two branches");
    }
    let radius_px = cfg.discrepant_radius_m / res;
    let rho_hat = refine_intersection(&branches, rho_i, radius_px, road.side());
    let starts: Vec<PixelPoint> = branches.iter().map(|b| b.start).collect();
    let road_hat = refine_road_imprint(road, rho_i, rho_hat, &starts, radius_px);
    let building_hat = refine_building_imprint(building, rho_hat);
    let combined = road_hat.union(&building_hat)?;

    for b in &mut branches {
        b.orientation = pixel_heading_vector(rho_hat, b.centroid);
    }
    let sum = branches
        .iter()
        .fold(Point2::default(), |acc, b| acc + b.orientation);
    let symmetric = sum.norm() <= cfg.symmetry_threshold;
    let orientations = characteristic_orientations(&branches, rho_hat, cfg.symmetry_threshold, mode);
    let pattern = build_pattern(
        cfg.descriptor_outer_radius_m,
        cfg.pattern_rings,
        cfg.pattern_base_cells,
    )?;
    let descriptors = orientations
        .iter()
        .map(|&nu| encode(&combined, rho_hat, nu, &pattern, source))
        .collect::<Result<Vec<_>>>()?;
    Ok(Description {
        rho_i,
        rho_hat,
        branches,
        symmetric,
        descriptors,
        combined,
    })
}

/// Serializable summary of a [`Description`], without the images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionDump {
    /// Image side in pixels and resolution in meters per pixel.
    pub side: usize,
    pub resolution: f64,
    pub rho_i: [f64; 2],
    pub rho_hat: [f64; 2],
    pub symmetric: bool,
    pub branches: Vec<BranchDump>,
    pub descriptors: Vec<Descriptor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchDump {
    pub start: [f64; 2],
    pub centroid: [f64; 2],
    pub orientation: [f64; 2],
    pub pixels: usize,
}

impl DescriptionDump {
    pub fn new(d: &Description) -> Self {
        let uv = |p: PixelPoint| [p.u, p.v];
        Self {
            side: d.combined.side(),
            resolution: d.combined.resolution(),
            rho_i: uv(d.rho_i),
            rho_hat: uv(d.rho_hat),
            symmetric: d.symmetric,
            branches: d
                .branches
                .iter()
                .map(|b| BranchDump {
                    start: uv(b.start),
                    centroid: uv(b.centroid),
                    orientation: [b.orientation.x, b.orientation.y],
                    pixels: b.pixels.len(),
                })
                .collect(),
            descriptors: d.descriptors.clone(),
        }
    }
}
