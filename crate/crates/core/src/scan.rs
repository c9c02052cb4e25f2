//! Query side: keyframe selection, accumulation in the window's middle
//! keyframe, top-view projection and intersection detection.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::raster::skeleton::{prune_spurs, skeletonize};
use crate::raster::{harris_corners, morph_close_open, GridImage, HarrisParams, PixelPoint, Point2, Pose2};

/// Slack on keyframe thresholds so that exact multiples of the step count.
const THRESHOLD_EPS: f64 = 1e-9;

/// One pose-stamped frame of labeled ground-plane points (vehicle frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "FrameRecord", into = "FrameRecord")]
pub struct SemanticFrame {
    pub t: f64,
    /// Vehicle pose in the odometry frame.
    pub pose: Pose2,
    pub road: Vec<Point2>,
    pub building: Vec<Point2>,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    t: f64,
    pose: [f64; 3],
    #[serde(default)]
    road: Vec<[f64; 2]>,
    #[serde(default)]
    building: Vec<[f64; 2]>,
}

impl From<FrameRecord> for SemanticFrame {
    fn from(r: FrameRecord) -> Self {
        let pts = |v: Vec<[f64; 2]>| v.into_iter().map(|[x, y]| Point2::new(x, y)).collect();
        Self {
            t: r.t,
            pose: Pose2::new(r.pose[0], r.pose[1], r.pose[2]),
            road: pts(r.road),
            building: pts(r.building),
        }
    }
}

impl From<SemanticFrame> for FrameRecord {
    fn from(f: SemanticFrame) -> Self {
        let pts = |v: Vec<Point2>| v.into_iter().map(|p| [p.x, p.y]).collect();
        Self {
            t: f.t,
            pose: [f.pose.x, f.pose.y, f.pose.theta],
            road: pts(f.road),
            building: pts(f.building),
        }
    }
}

/// Reads one frame per non-empty line.
pub fn read_frames(reader: impl BufRead) -> Result<Vec<SemanticFrame>> {
    let mut frames = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: SemanticFrame = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("frame line {}: {e}", n + 1)))?;
        if !f.pose.is_finite() {
            return Err(Error::Input(format!("frame line {}: pose is not finite", n + 1)));
        }
        frames.push(f);
    }
    Ok(frames)
}

/// Reads a `.jsonl` file, or every `.jsonl` file of a directory in name order.
pub fn load_frames(path: &Path) -> Result<Vec<SemanticFrame>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        let mut all = Vec::new();
        for f in files {
            all.extend(load_frames(&f)?);
        }
        return Ok(all);
    }
    let file = std::fs::File::open(path)?;
    read_frames(std::io::BufReader::new(file))
}

pub fn write_frames(mut w: impl Write, frames: &[SemanticFrame]) -> Result<()> {
    for f in frames {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Indices of the keyframes: the first frame, then every frame that moved at
/// least `min_distance_m` or turned at least `min_heading_rad` since the last
/// keyframe.
pub fn select_keyframes(frames: &[SemanticFrame], min_distance_m: f64, min_heading_rad: f64) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        let keep = match out.last() {
            None => true,
            Some(&k) => {
                let last = &frames[k].pose;
                let moved = f.pose.translation().distance(last.translation());
                let turned = crate::raster::normalize_angle(f.pose.theta - last.theta).abs();
                moved >= min_distance_m - THRESHOLD_EPS || turned >= min_heading_rad - THRESHOLD_EPS
            }
        };
        if keep {
            out.push(i);
        }
    }
    out
}

/// `K` consecutive keyframes (frame indices); the middle one defines `L_c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyframeWindow {
    pub keyframes: Vec<usize>,
}

impl KeyframeWindow {
    pub fn center_index(&self) -> usize {
        self.keyframes.len() / 2
    }

    /// Frame index of the middle keyframe.
    pub fn center_frame(&self) -> usize {
        self.keyframes[self.center_index()]
    }

    /// Frame index of the newest keyframe.
    pub fn newest_frame(&self) -> usize {
        *self.keyframes.last().expect("windows are non-empty")
    }
}

/// One window per keyframe once `k` keyframes are available (stride 1).
pub fn sliding_windows(keyframes: &[usize], k: usize) -> Vec<KeyframeWindow> {
    if k == 0 || keyframes.len() < k {
        return Vec::new();
    }
    keyframes
        .windows(k)
        .map(|w| KeyframeWindow { keyframes: w.to_vec() })
        .collect()
}

/// Labeled points expressed in the middle keyframe's frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    pub road: Vec<Point2>,
    pub building: Vec<Point2>,
}

/// Transforms every keyframe's points into `L_c` through relative odometry.
pub fn accumulate(frames: &[SemanticFrame], window: &KeyframeWindow) -> LabeledCloud {
    let center_inv = frames[window.center_frame()].pose.inverse();
    let mut cloud = LabeledCloud::default();
    for &k in &window.keyframes {
        let rel = center_inv.compose(&frames[k].pose);
        cloud.road.extend(frames[k].road.iter().map(|&p| rel.transform_point(p)));
        cloud
            .building
            .extend(frames[k].building.iter().map(|&p| rel.transform_point(p)));
    }
    cloud
}

/// Empty image centered on `L_c` (whose odometry pose is `center`).
pub fn scan_image(center: Pose2, cfg: &Config) -> Result<GridImage> {
    GridImage::new(cfg.side_px(), cfg.resolution_m_per_px, center)
}

/// Sets the pixel nearest to each point; points outside the image are dropped.
pub fn splat(img: &mut GridImage, points: &[Point2]) {
    for &p in points {
        let (u, v) = img.local_to_pixel(p).round();
        img.set_i(u, v);
    }
}

/// Road points -> binary top view -> closing and opening -> skeleton with
/// short spurs pruned.
pub fn project_road_imprint(points: &[Point2], center: Pose2, cfg: &Config) -> Result<GridImage> {
    let mut img = scan_image(center, cfg)?;
    splat(&mut img, points);
    if img.is_blank() {
        return Ok(img);
    }
    let surface = morph_close_open(&img, cfg.kernel_radius_px());
    let skeleton = skeletonize(&surface);
    Ok(prune_spurs(&skeleton, cfg.spur_prune_px()))
}

/// Building points splatted without any filtering.
pub fn project_building_imprint(points: &[Point2], center: Pose2, cfg: &Config) -> Result<GridImage> {
    let mut img = scan_image(center, cfg)?;
    splat(&mut img, points);
    Ok(img)
}

/// Inner and outer radius (pixels) of the ring used to confirm that a corner
/// sits on a skeleton junction.
const JUNCTION_RING_PX: (f64, f64) = (4.0, 7.0);

/// Number of 8-connected skeleton pieces crossing a small ring around `p`.
pub fn ring_components(img: &GridImage, p: PixelPoint) -> usize {
    let (r0, r1) = JUNCTION_RING_PX;
    let (cu, cv) = p.round();
    let reach = r1.ceil() as i64 + 1;
    let in_ring = |u: i64, v: i64| {
        let d = PixelPoint::new(u as f64, v as f64).distance(PixelPoint::new(cu as f64, cv as f64));
        d >= r0 && d <= r1 && img.get_i(u, v)
    };
    let side = (2 * reach + 1) as usize;
    let mut seen = vec![false; side * side];
    let idx = |u: i64, v: i64| ((v - cv + reach) as usize) * side + (u - cu + reach) as usize;
    let mut count = 0;
    for v in cv - reach..=cv + reach {
        for u in cu - reach..=cu + reach {
            if !in_ring(u, v) || seen[idx(u, v)] {
                continue;
            }
            count += 1;
            let mut stack = vec![(u, v)];
            seen[idx(u, v)] = true;
            while let Some((x, y)) = stack.pop() {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if (nx - cu).abs() <= reach
                            && (ny - cv).abs() <= reach
                            && in_ring(nx, ny)
                            && !seen[idx(nx, ny)]
                        {
                            seen[idx(nx, ny)] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
    }
    count
}

/// Harris corners of a skeleton imprint that sit on junctions (three or more
/// skeleton pieces leave a small ring around them). Corners at bends and
/// curve ends are dropped.
pub fn junction_corners(imprint: &GridImage, params: &HarrisParams) -> Vec<PixelPoint> {
    harris_corners(imprint, params)
        .into_iter()
        .filter(|&c| ring_components(imprint, c) >= 3)
        .collect()
}

/// The junction corner closest to `vehicle_px`; ties go to the lowest
/// `(v, u)`.
pub fn detect_intersection(
    imprint: &GridImage,
    vehicle_px: PixelPoint,
    params: &HarrisParams,
) -> Option<PixelPoint> {
    junction_corners(imprint, params).into_iter().min_by(|a, b| {
        a.distance_sq(vehicle_px)
            .total_cmp(&b.distance_sq(vehicle_px))
            .then(a.v.total_cmp(&b.v))
            .then(a.u.total_cmp(&b.u))
    })
}

/// Query-side imprints and detection of one window.
#[derive(Debug, Clone)]
pub struct ObservedIntersection {
    /// Detected intersection in pixels.
    pub position: PixelPoint,
    /// Detected intersection in `L_c` meters.
    pub position_local: Point2,
    pub road_imprint: GridImage,
    pub building_imprint: GridImage,
}

/// Builds the window's imprints and detects the nearest intersection.
/// Returns `None` when no junction is found.
pub fn observe_window(
    frames: &[SemanticFrame],
    window: &KeyframeWindow,
    cfg: &Config,
) -> Result<Option<ObservedIntersection>> {
    let cloud = accumulate(frames, window);
    let center = frames[window.center_frame()].pose;
    let road = project_road_imprint(&cloud.road, center, cfg)?;
    let vehicle = road.center_pixel();
    let Some(position) = detect_intersection(&road, vehicle, &cfg.harris) else {
        return Ok(None);
    };
    let building = project_building_imprint(&cloud.building, center, cfg)?;
    Ok(Some(ObservedIntersection {
        position,
        position_local: road.pixel_to_local(position),
        road_imprint: road,
        building_imprint: building,
    }))
}
