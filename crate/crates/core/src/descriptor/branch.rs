//! Branch segmentation in the consistent region and the discrepancy fixes
//! applied inside the discrepant disk.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::raster::skeleton::is_junction;
use crate::raster::{draw_segment, ray_cast_visibility, GridImage, PixelPoint, Point2};

/// Branch pieces whose closest pixel is farther than this beyond the inner
/// radius do not reach the discrepant disk and are ignored.
const ENTRY_SLACK_PX: f64 = 2.0;

/// A road-skeleton component in the annulus `[R_i, R_o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Member pixel closest to the inner boundary.
    pub start: PixelPoint,
    /// Mean of the member pixels.
    pub centroid: PixelPoint,
    /// Unit vector (center-frame meters) from the reference point to the centroid.
    pub orientation: Point2,
    pub pixels: Vec<(usize, usize)>,
}

/// The line through a branch's start and centroid, in pixel space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchLine {
    pub point: PixelPoint,
    /// Unit direction `(du, dv)`.
    pub direction: (f64, f64),
}

/// Which characteristic orientations to keep for a symmetric intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescribeMode {
    /// One orientation: the branch at the smallest image angle.
    Query,
    /// Every branch orientation.
    Database,
}

/// Unit vector in center-frame meters pointing from `from` to `to`.
pub fn pixel_heading_vector(from: PixelPoint, to: PixelPoint) -> Point2 {
    let v = Point2::new(to.u - from.u, from.v - to.v);
    let n = v.norm();
    if n == 0.0 {
        Point2::new(1.0, 0.0)
    } else {
        v * (1.0 / n)
    }
}

impl Branch {
    pub fn line(&self) -> BranchLine {
        let du = self.centroid.u - self.start.u;
        let dv = self.centroid.v - self.start.v;
        let n = du.hypot(dv);
        let direction = if n == 0.0 { (1.0, 0.0) } else { (du / n, dv / n) };
        BranchLine {
            point: self.start,
            direction,
        }
    }
}

/// Segments the road skeleton into branches around `rho_i`.
///
/// Components are 8-connected sets of skeleton pixels with
/// `R_i <= |p - rho_i| <= R_o` after removing every skeleton junction pixel in
/// the annulus together with its 8 neighbors, so each branch stops before the
/// next intersection. Only components that reach the inner boundary and hold
/// at least `min_pixels` pixels are kept. Branches are ordered by the image
/// angle of their start around `rho_i`.
pub fn segment_branches(
    road: &GridImage,
    rho_i: PixelPoint,
    inner_radius_m: f64,
    outer_radius_m: f64,
    min_pixels: usize,
) -> Vec<Branch> {
    let n = road.side() as i64;
    let res = road.resolution();
    let ri = inner_radius_m / res;
    let ro = outer_radius_m / res;
    let (ri2, ro2) = (ri * ri, ro * ro);
    let u0 = ((rho_i.u - ro).floor() as i64 - 1).max(0);
    let v0 = ((rho_i.v - ro).floor() as i64 - 1).max(0);
    let u1 = ((rho_i.u + ro).ceil() as i64 + 1).min(n - 1);
    let v1 = ((rho_i.v + ro).ceil() as i64 + 1).min(n - 1);
    if u0 > u1 || v0 > v1 {
        return Vec::new();
    }
    let w = (u1 - u0 + 1) as usize;
    let h = (v1 - v0 + 1) as usize;
    let d2 = |u: i64, v: i64| {
        let du = u as f64 - rho_i.u;
        let dv = v as f64 - rho_i.v;
        du * du + dv * dv
    };

    let mut member = vec![false; w * h];
    for v in v0..=v1 {
        for u in u0..=u1 {
            let d = d2(u, v);
            if d >= ri2 && d <= ro2 && road.get_i(u, v) {
                member[(v - v0) as usize * w + (u - u0) as usize] = true;
            }
        }
    }
    let junctions: Vec<(i64, i64)> = (v0..=v1)
        .flat_map(|v| (u0..=u1).map(move |u| (u, v)))
        .filter(|&(u, v)| member[(v - v0) as usize * w + (u - u0) as usize] && is_junction(road, u, v))
        .collect();
    for (ju, jv) in junctions {
        for v in (jv - 1).max(v0)..=(jv + 1).min(v1) {
            for u in (ju - 1).max(u0)..=(ju + 1).min(u1) {
                member[(v - v0) as usize * w + (u - u0) as usize] = false;
            }
        }
    }

    let mut seen = vec![false; w * h];
    let mut branches = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !member[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            pixels.push(((x + u0) as usize, (y + v0) as usize));
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if member[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if pixels.len() < min_pixels {
            continue;
        }
        // nearest pixel, ties by lowest (v, u)
        let &(su, sv) = pixels
            .iter()
            .min_by(|a, b| {
                d2(a.0 as i64, a.1 as i64)
                    .total_cmp(&d2(b.0 as i64, b.1 as i64))
                    .then((a.1, a.0).cmp(&(b.1, b.0)))
            })
            .expect("component is non-empty");
        if d2(su as i64, sv as i64).sqrt() > ri + ENTRY_SLACK_PX {
            continue;
        }
        let inv = 1.0 / pixels.len() as f64;
        let centroid = PixelPoint::new(
            pixels.iter().map(|p| p.0 as f64).sum::<f64>() * inv,
            pixels.iter().map(|p| p.1 as f64).sum::<f64>() * inv,
        );
        let start = PixelPoint::from_index(su, sv);
        branches.push(Branch {
            start,
            centroid,
            orientation: pixel_heading_vector(rho_i, centroid),
            pixels,
        });
    }
    branches.sort_by(|a, b| {
        image_angle(rho_i, a.start)
            .total_cmp(&image_angle(rho_i, b.start))
            .then(a.start.v.total_cmp(&b.start.v))
            .then(a.start.u.total_cmp(&b.start.u))
    });
    branches
}

/// Angle of `p` around `origin` in image axes (`atan2(dv, du)`), in `[0, 2*pi)`.
pub fn image_angle(origin: PixelPoint, p: PixelPoint) -> f64 {
    (p.v - origin.v).atan2(p.u - origin.u).rem_euclid(TAU)
}

fn line_cost(lines: &[BranchLine], u: f64, v: f64) -> f64 {
    lines
        .iter()
        .map(|l| {
            let cross = (u - l.point.u) * l.direction.1 - (v - l.point.v) * l.direction.0;
            cross * cross
        })
        .sum()
}

/// Pixel of the disk `|p - rho_i| <= radius_px` minimizing the summed squared
/// perpendicular distance to the branch lines.
///
/// Every in-bounds disk pixel is evaluated. Pixels within a relative `1e-9`
/// of the minimum count as tied; ties go to the pixel closest to `rho_i`,
/// then to the lowest `(v, u)`.
pub fn refine_intersection(
    branches: &[Branch],
    rho_i: PixelPoint,
    radius_px: f64,
    side: usize,
) -> PixelPoint {
    let lines: Vec<BranchLine> = branches.iter().map(Branch::line).collect();
    let disk = disk_pixels(rho_i, radius_px, side);
    if disk.is_empty() {
        let (u, v) = rho_i.round();
        let c = |x: i64| x.clamp(0, side as i64 - 1) as f64;
        return PixelPoint::new(c(u), c(v));
    }
    let costs: Vec<f64> = disk
        .iter()
        .map(|&(u, v)| line_cost(&lines, u as f64, v as f64))
        .collect();
    let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = best * 1e-9 + 1e-12;
    let (u, v) = disk
        .iter()
        .zip(&costs)
        .filter(|(_, &c)| c <= best + tol)
        .map(|(&p, _)| p)
        .min_by(|a, b| {
            let da = PixelPoint::new(a.0 as f64, a.1 as f64).distance_sq(rho_i);
            let db = PixelPoint::new(b.0 as f64, b.1 as f64).distance_sq(rho_i);
            da.total_cmp(&db).then((a.1, a.0).cmp(&(b.1, b.0)))
        })
        .expect("disk is non-empty");
    PixelPoint::new(u as f64, v as f64)
}

/// In-bounds integer pixels with center inside the closed disk, row-major.
pub fn disk_pixels(center: PixelPoint, radius_px: f64, side: usize) -> Vec<(i64, i64)> {
    let n = side as i64;
    let r2 = radius_px * radius_px;
    let v0 = ((center.v - radius_px).floor() as i64).max(0);
    let v1 = ((center.v + radius_px).ceil() as i64).min(n - 1);
    let u0 = ((center.u - radius_px).floor() as i64).max(0);
    let u1 = ((center.u + radius_px).ceil() as i64).min(n - 1);
    let mut out = Vec::new();
    for v in v0..=v1 {
        for u in u0..=u1 {
            if PixelPoint::new(u as f64, v as f64).distance_sq(center) <= r2 {
                out.push((u, v));
            }
        }
    }
    out
}

/// Clears the discrepant disk around `rho_i` and redraws it as straight
/// one-pixel spokes from `rho_hat` to every branch start.
pub fn refine_road_imprint(
    road: &GridImage,
    rho_i: PixelPoint,
    rho_hat: PixelPoint,
    starts: &[PixelPoint],
    radius_px: f64,
) -> GridImage {
    let mut out = road.clone();
    for (u, v) in disk_pixels(rho_i, radius_px, road.side()) {
        out.set(u as usize, v as usize, false);
    }
    for &s in starts {
        draw_segment(&mut out, rho_hat, s, 1);
    }
    out
}

/// Keeps only the building pixels visible from `rho_hat`.
pub fn refine_building_imprint(building: &GridImage, rho_hat: PixelPoint) -> GridImage {
    ray_cast_visibility(building, rho_hat)
}

/// Characteristic orientations as center-frame unit vectors.
///
/// Branch orientations are measured from `rho_hat`. When the summary vector
/// is longer than `symmetry_threshold`, the single branch closest to it in
/// angle is returned. Otherwise query mode returns the branch with the
/// smallest image angle and database mode returns every branch.
pub fn characteristic_orientations(
    branches: &[Branch],
    rho_hat: PixelPoint,
    symmetry_threshold: f64,
    mode: DescribeMode,
) -> Vec<Point2> {
    let nus: Vec<Point2> = branches
        .iter()
        .map(|b| pixel_heading_vector(rho_hat, b.centroid))
        .collect();
    if nus.is_empty() {
        return Vec::new();
    }
    let sum = nus.iter().fold(Point2::default(), |acc, &n| acc + n);
    if sum.norm() > symmetry_threshold {
        let angle = |n: &Point2| n.cross(sum).abs().atan2(n.dot(sum));
        let best = nus
            .iter()
            .min_by(|a, b| angle(a).total_cmp(&angle(b)))
            .expect("non-empty");
        return vec![*best];
    }
    match mode {
        DescribeMode::Database => nus,
        DescribeMode::Query => {
            let img_angle = |n: &Point2| (-n.y).atan2(n.x).rem_euclid(TAU);
            let best = nus
                .iter()
                .min_by(|a, b| img_angle(a).total_cmp(&img_angle(b)))
                .expect("non-empty");
            vec![*best]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{draw_polyline, Pose2};

    fn blank(side: usize) -> GridImage {
        GridImage::new(side, 1.0, Pose2::IDENTITY).unwrap()
    }

    fn line(img: &mut GridImage, a: (f64, f64), b: (f64, f64)) {
        draw_polyline(img, &[PixelPoint::new(a.0, a.1), PixelPoint::new(b.0, b.1)], 1);
    }

    fn cross(side: usize) -> GridImage {
        let mut img = blank(side);
        let c = (side / 2) as f64;
        line(&mut img, (0.0, c), (side as f64 - 1.0, c));
        line(&mut img, (c, 0.0), (c, side as f64 - 1.0));
        img
    }

    fn branch_from(start: (f64, f64), centroid: (f64, f64)) -> Branch {
        Branch {
            start: PixelPoint::new(start.0, start.1),
            centroid: PixelPoint::new(centroid.0, centroid.1),
            orientation: Point2::new(1.0, 0.0),
            pixels: Vec::new(),
        }
    }

    #[test]
    fn cross_has_four_branches() {
        let img = cross(101);
        let c = PixelPoint::new(50.0, 50.0);
        let b = segment_branches(&img, c, 10.0, 40.0, 3);
        assert_eq!(b.len(), 4);
        let starts: Vec<(f64, f64)> = b.iter().map(|b| (b.start.u, b.start.v)).collect();
        // ordered by image angle: +u, +v, -u, -v
        assert_eq!(starts, vec![(60.0, 50.0), (50.0, 60.0), (40.0, 50.0), (50.0, 40.0)]);
        for br in &b {
            assert!((br.orientation.norm() - 1.0).abs() < 1e-9);
            for &(u, v) in &br.pixels {
                let d = PixelPoint::from_index(u, v).distance(c);
                assert!((10.0..=40.0).contains(&d));
            }
        }
    }

    #[test]
    fn t_junction_has_three_branches() {
        let mut img = blank(101);
        line(&mut img, (0.0, 50.0), (100.0, 50.0));
        line(&mut img, (50.0, 50.0), (50.0, 100.0));
        assert_eq!(segment_branches(&img, PixelPoint::new(50.0, 50.0), 10.0, 40.0, 3).len(), 3);
    }

    #[test]
    fn branch_stops_before_next_junction() {
        let mut img = blank(121);
        line(&mut img, (0.0, 60.0), (120.0, 60.0));
        line(&mut img, (60.0, 0.0), (60.0, 60.0));
        // side street crossing the east arm 25 px out
        line(&mut img, (85.0, 30.0), (85.0, 90.0));
        let b = segment_branches(&img, PixelPoint::new(60.0, 60.0), 10.0, 40.0, 3);
        assert_eq!(b.len(), 3);
        let east = b.iter().find(|b| b.start == PixelPoint::new(70.0, 60.0)).unwrap();
        assert!(east.pixels.iter().all(|&(u, _)| u < 84), "{:?}", east.pixels);
    }

    #[test]
    fn blank_gives_no_branches() {
        assert!(segment_branches(&blank(50), PixelPoint::new(25.0, 25.0), 5.0, 20.0, 1).is_empty());
    }

    #[test]
    fn perpendicular_lines_meet_exactly() {
        let b = vec![branch_from((60.0, 47.0), (80.0, 47.0)), branch_from((53.0, 60.0), (53.0, 90.0))];
        let p = refine_intersection(&b, PixelPoint::new(50.0, 50.0), 10.0, 101);
        assert_eq!(p, PixelPoint::new(53.0, 47.0));
    }

    #[test]
    fn concurrent_lines_meet_exactly() {
        let b = vec![
            branch_from((58.0, 52.0), (68.0, 52.0)),
            branch_from((48.0, 62.0), (48.0, 72.0)),
            branch_from((38.0, 42.0), (28.0, 32.0)),
        ];
        let p = refine_intersection(&b, PixelPoint::new(50.0, 50.0), 10.0, 101);
        assert_eq!(p, PixelPoint::new(48.0, 52.0));
    }

    #[test]
    fn parallel_lines_tie_to_nearest_midline_pixel() {
        // lines v = 46 and v = 54: the whole row v = 50 minimizes
        let b = vec![branch_from((60.0, 46.0), (80.0, 46.0)), branch_from((40.0, 54.0), (20.0, 54.0))];
        let p = refine_intersection(&b, PixelPoint::new(52.3, 49.0), 10.0, 101);
        assert_eq!(p, PixelPoint::new(52.0, 50.0));
    }

    #[test]
    fn road_refinement_replaces_blob_with_spokes() {
        let mut img = cross(101);
        let c = PixelPoint::new(50.0, 50.0);
        for v in 45..56 {
            for u in 44..57 {
                img.set(u, v, true);
            }
        }
        let starts = [
            PixelPoint::new(61.0, 50.0),
            PixelPoint::new(50.0, 61.0),
            PixelPoint::new(39.0, 50.0),
        ];
        let out = refine_road_imprint(&img, c, PixelPoint::new(51.0, 49.0), &starts, 10.0);
        let mut spokes = blank(101);
        for s in starts {
            draw_segment(&mut spokes, PixelPoint::new(51.0, 49.0), s, 1);
        }
        for (u, v) in disk_pixels(c, 10.0, 101) {
            assert_eq!(out.get(u as usize, v as usize), spokes.get(u as usize, v as usize));
        }
        // outside the disk nothing changes
        assert!(out.get(50, 5) && out.get(95, 50));
    }

    #[test]
    fn orientation_of_t_points_to_the_stem() {
        let rho = PixelPoint::new(50.0, 50.0);
        // branches at 0, 90 and 180 degrees (metric, +y is -v)
        let b = vec![
            branch_from((60.0, 50.0), (75.0, 50.0)),
            branch_from((50.0, 40.0), (50.0, 25.0)),
            branch_from((40.0, 50.0), (25.0, 50.0)),
        ];
        let o = characteristic_orientations(&b, rho, 0.1, DescribeMode::Query);
        assert_eq!(o.len(), 1);
        assert!((o[0].x).abs() < 1e-12 && (o[0].y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_cross_modes() {
        let rho = PixelPoint::new(50.0, 50.0);
        let b = vec![
            branch_from((60.0, 50.0), (75.0, 50.0)),
            branch_from((50.0, 60.0), (50.0, 75.0)),
            branch_from((40.0, 50.0), (25.0, 50.0)),
            branch_from((50.0, 40.0), (50.0, 25.0)),
        ];
        assert_eq!(characteristic_orientations(&b, rho, 0.1, DescribeMode::Database).len(), 4);
        let q = characteristic_orientations(&b, rho, 0.1, DescribeMode::Query);
        assert_eq!(q, vec![Point2::new(1.0, 0.0)]);
    }
}
