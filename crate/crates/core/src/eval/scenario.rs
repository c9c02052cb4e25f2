//! Synthetic cities: a perturbed road grid, buildings along the frontages, a
//! driven route and labeled scans taken along it.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::osm::{collect_intersections, BuildingSet, RoadGraph, EARTH_RADIUS_M};
use crate::raster::{normalize_angle, Point2, Pose2};
use crate::scan::SemanticFrame;

/// Sensor and labeling imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Standard deviation of the per-point position jitter, meters.
    pub position_jitter_m: f64,
    /// Probability that a road point is lost.
    pub road_dropout: f64,
    /// Fraction of 5 m facade stretches that never return points.
    pub building_occlusion: f64,
    /// Per-frame standard deviation of the odometry heading random walk.
    pub heading_noise_rad: f64,
}

impl NoiseSpec {
    pub fn is_noise_free(&self) -> bool {
        *self == Self::default()
    }
}

/// Generation parameters. Ranges are `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub grid_cols: usize,
    pub grid_rows: usize,
    /// Mean distance between parallel streets.
    pub block_m: f64,
    /// Each street spacing deviates from `block_m` by up to this much.
    pub block_variation_m: f64,
    /// Each street is tilted by up to this angle, so blocks are not exact
    /// rectangles.
    pub street_tilt_deg: f64,
    /// Per-node position jitter bound.
    pub node_jitter_m: f64,
    /// Chance that an edge is considered for removal.
    pub edge_removal: f64,
    /// Lower bound on nodes of degree three or more.
    pub min_intersections: usize,
    pub road_width_m: f64,
    pub building_frontage_m: [f64; 2],
    pub building_depth_m: [f64; 2],
    pub building_setback_m: [f64; 2],
    pub building_gap_m: [f64; 2],
    /// Chance that a lot stays empty.
    pub lot_vacancy: f64,
    pub route_length_m: f64,
    pub frame_spacing_m: f64,
    pub speed_mps: f64,
    /// Road surface returns are sampled within this range.
    pub road_range_m: f64,
    /// Road surface samples per square meter per frame.
    pub road_point_density: f64,
    pub facade_range_m: f64,
    pub facade_spacing_m: f64,
    pub noise: NoiseSpec,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            grid_cols: 8,
            grid_rows: 8,
            block_m: 100.0,
            block_variation_m: 20.0,
            street_tilt_deg: 4.0,
            node_jitter_m: 0.5,
            edge_removal: 0.25,
            min_intersections: 30,
            road_width_m: 8.0,
            building_frontage_m: [8.0, 20.0],
            building_depth_m: [8.0, 16.0],
            building_setback_m: [2.0, 6.0],
            building_gap_m: [2.0, 8.0],
            lot_vacancy: 0.15,
            route_length_m: 2000.0,
            frame_spacing_m: 2.5,
            speed_mps: 10.0,
            road_range_m: 50.0,
            road_point_density: 0.4,
            facade_range_m: 60.0,
            facade_spacing_m: 0.2,
            noise: NoiseSpec::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Scenario(m.to_string()));
        if self.grid_cols < 2 || self.grid_rows < 2 {
            return bad("grid needs at least 2x2 nodes");
        }
        let positive = [
            ("block_m", self.block_m),
            ("road_width_m", self.road_width_m),
            ("route_length_m", self.route_length_m),
            ("frame_spacing_m", self.frame_spacing_m),
            ("speed_mps", self.speed_mps),
            ("facade_spacing_m", self.facade_spacing_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Scenario(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.block_variation_m >= 0.0 && self.block_variation_m < 0.5 * self.block_m) {
            return bad("block_variation_m must lie in [0, block_m / 2)");
        }
        if !(0.0..30.0).contains(&self.street_tilt_deg) {
            return bad("street_tilt_deg must lie in [0, 30)");
        }
        if !(self.node_jitter_m >= 0.0 && self.road_range_m >= 0.0 && self.facade_range_m >= 0.0) {
            return bad("ranges and jitter must be non-negative");
        }
        if self.road_point_density < 0.0 {
            return bad("road_point_density must be non-negative");
        }
        for (name, [lo, hi]) in [
            ("building_frontage_m", self.building_frontage_m),
            ("building_depth_m", self.building_depth_m),
            ("building_setback_m", self.building_setback_m),
            ("building_gap_m", self.building_gap_m),
        ] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::Scenario(format!("{name} must satisfy 0 < min <= max")));
            }
        }
        let n = &self.noise;
        for (name, p) in [
            ("edge_removal", self.edge_removal),
            ("lot_vacancy", self.lot_vacancy),
            ("road_dropout", n.road_dropout),
            ("building_occlusion", n.building_occlusion),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Scenario(format!("{name} must be a probability, got {p}")));
            }
        }
        if !(n.position_jitter_m >= 0.0 && n.heading_noise_rad >= 0.0) {
            return bad("noise deviations must be non-negative");
        }
        let possible = self.grid_cols * self.grid_rows - 4;
        if self.min_intersections > possible {
            return Err(Error::Scenario(format!(
                "a {}x{} grid has at most {possible} intersections, {} requested",
                self.grid_cols, self.grid_rows, self.min_intersections
            )));
        }
        Ok(())
    }
}

/// True vehicle poses in the map frame, one per frame, and the
/// intersections the route drives through, in visiting order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub poses: Vec<Pose2>,
    pub route: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct TruthLine {
    frame_index: usize,
    t: f64,
    pose: [f64; 3],
}

impl GroundTruth {
    pub fn positions(&self) -> Vec<Point2> {
        self.poses.iter().map(|p| p.translation()).collect()
    }

    /// One JSON object per frame: `frame_index`, `t`, `pose`.
    pub fn write_jsonl(&self, mut w: impl Write, times: &[f64]) -> Result<()> {
        for (i, p) in self.poses.iter().enumerate() {
            let line = TruthLine {
                frame_index: i,
                t: times.get(i).copied().unwrap_or(0.0),
                pose: [p.x, p.y, p.theta],
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads per-frame truth; frame indices must run 0, 1, 2, ...
    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut poses = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TruthLine = serde_json::from_str(&line)
                .map_err(|e| Error::Input(format!("truth line {}: {e}", n + 1)))?;
            if rec.frame_index != poses.len() {
                return Err(Error::Input(format!(
                    "truth line {}: expected frame_index {}, found {}",
                    n + 1,
                    poses.len(),
                    rec.frame_index
                )));
            }
            poses.push(Pose2::new(rec.pose[0], rec.pose[1], rec.pose[2]));
        }
        Ok(Self {
            poses,
            route: Vec::new(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub roads: RoadGraph,
    pub buildings: BuildingSet,
    /// Odometry-framed scans; poses are relative to the first frame.
    pub frames: Vec<SemanticFrame>,
    pub truth: GroundTruth,
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    let t = if len2 > 0.0 {
        ((p - a).dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + d * t)
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn inside_polygon(p: Point2, poly: &[Point2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            inside = !inside;
        }
    }
    inside
}

fn polygon_segment_distance(poly: &[Point2], a: Point2, b: Point2) -> f64 {
    if inside_polygon(a, poly) || inside_polygon(b, poly) {
        return 0.0;
    }
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        if segments_cross(p, q, a, b) {
            return 0.0;
        }
        best = best
            .min(point_segment_distance(p, a, b))
            .min(point_segment_distance(a, p, q))
            .min(point_segment_distance(b, p, q));
    }
    best
}

/// Separating-axis test for convex polygons, requiring a gap of `margin`.
fn convex_separated(p: &[Point2], q: &[Point2], margin: f64) -> bool {
    for poly in [p, q] {
        let n = poly.len();
        for i in 0..n {
            let e = poly[(i + 1) % n] - poly[i];
            let axis = Point2::new(-e.y, e.x) * (1.0 / e.norm());
            let span = |s: &[Point2]| {
                s.iter()
                    .map(|v| v.dot(axis))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
            };
            let (a0, a1) = span(p);
            let (b0, b1) = span(q);
            if a1 + margin <= b0 || b1 + margin <= a0 {
                return true;
            }
        }
    }
    false
}

fn node_id(col: usize, row: usize, cols: usize) -> i64 {
    (row * cols + col) as i64 + 1
}

fn street_offsets(rng: &mut impl Rng, n: usize, spec: &ScenarioSpec) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut at = 0.0;
    for i in 0..n {
        if i > 0 {
            at += spec.block_m + rng.random_range(-1.0..=1.0) * spec.block_variation_m;
        }
        out.push(at);
    }
    let mid = 0.5 * out[n - 1];
    out.iter().map(|v| v - mid).collect()
}

fn connected(n: usize, edges: &[(usize, usize)], alive: &[bool]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        if alive[i] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn generate_roads(rng: &mut ChaCha8Rng, spec: &ScenarioSpec) -> Result<RoadGraph> {
    let (cols, rows) = (spec.grid_cols, spec.grid_rows);
    let xs = street_offsets(rng, cols, spec);
    let ys = street_offsets(rng, rows, spec);
    let max_tilt = spec.street_tilt_deg.to_radians();
    let mut tilt = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| if max_tilt > 0.0 { rng.random_range(-max_tilt..=max_tilt).tan() } else { 0.0 })
            .collect()
    };
    // column c: x = xs[c] + a[c] * y; row r: y = ys[r] + b[r] * x
    let a = tilt(cols);
    let b = tilt(rows);
    let mut positions = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let det = 1.0 - a[c] * b[r];
            let x = (xs[c] + a[c] * ys[r]) / det;
            let y = (ys[r] + b[r] * xs[c]) / det;
            let j = spec.node_jitter_m;
            let (dx, dy) = if j > 0.0 {
                (rng.random_range(-j..=j), rng.random_range(-j..=j))
            } else {
                (0.0, 0.0)
            };
            positions.push(Point2::new(x + dx, y + dy));
        }
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    let n = positions.len();
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut alive = vec![true; edges.len()];
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    let mut junctions = degree.iter().filter(|&&d| d >= 3).count();
    for e in order {
        if !rng.random_bool(spec.edge_removal) {
            continue;
        }
        let (a, b) = edges[e];
        if degree[a] <= 2 || degree[b] <= 2 {
            continue;
        }
        let lost = usize::from(degree[a] == 3) + usize::from(degree[b] == 3);
        if junctions - lost < spec.min_intersections {
            continue;
        }
        alive[e] = false;
        if connected(n, &edges, &alive) {
            degree[a] -= 1;
            degree[b] -= 1;
            junctions -= lost;
        } else {
            alive[e] = true;
        }
    }

    let mut g = RoadGraph::new();
    for r in 0..rows {
        for c in 0..cols {
            g.add_node(node_id(c, r, cols), positions[r * cols + c]);
        }
    }
    for (i, &(a, b)) in edges.iter().enumerate() {
        if alive[i] {
            g.add_edge(a as i64 + 1, b as i64 + 1);
        }
    }
    let found = collect_intersections(&g).len();
    if found < spec.min_intersections {
        return Err(Error::Scenario(format!(
            "only {found} intersections, {} requested",
            spec.min_intersections
        )));
    }
    Ok(g)
}

fn segments(g: &RoadGraph) -> Vec<(Point2, Point2)> {
    g.edges().iter().map(|e| g.edge_points(e)).collect()
}

fn ccw(mut poly: Vec<Point2>) -> Vec<Point2> {
    let n = poly.len();
    let area: f64 = (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum();
    if area < 0.0 {
        poly.reverse();
    }
    poly
}

fn generate_buildings(rng: &mut ChaCha8Rng, g: &RoadGraph, spec: &ScenarioSpec) -> BuildingSet {
    let roads = segments(g);
    let half = 0.5 * spec.road_width_m;
    let clearance = half + 1.0;
    let mut polygons: Vec<Vec<Point2>> = Vec::new();
    for &(a, b) in &roads {
        let len = a.distance(b);
        let dir = (b - a) * (1.0 / len);
        let normal = Point2::new(-dir.y, dir.x);
        for side in [1.0, -1.0] {
            let mut s = clearance + 0.5 * uniform(rng, spec.building_gap_m);
            loop {
                let frontage = uniform(rng, spec.building_frontage_m);
                let depth = uniform(rng, spec.building_depth_m);
                let setback = uniform(rng, spec.building_setback_m);
                let gap = uniform(rng, spec.building_gap_m);
                let vacant = rng.random_bool(spec.lot_vacancy);
                if s + frontage > len - clearance {
                    break;
                }
                if !vacant {
                    let n = normal * side;
                    let near = half + setback;
                    let far = near + depth;
                    let poly = ccw(vec![
                        a + dir * s + n * near,
                        a + dir * (s + frontage) + n * near,
                        a + dir * (s + frontage) + n * far,
                        a + dir * s + n * far,
                    ]);
                    let clear_of_roads = roads
                        .iter()
                        .all(|&(p, q)| polygon_segment_distance(&poly, p, q) >= clearance);
                    let clear_of_buildings = polygons.iter().all(|other| convex_separated(&poly, other, 1.0));
                    if clear_of_roads && clear_of_buildings {
                        polygons.push(poly);
                    }
                }
                s += frontage + gap;
            }
        }
    }
    BuildingSet { polygons }
}

/// Random walk over the graph that avoids U-turns and prefers streets not
/// yet driven. Returns the visited node ids.
fn drive_route(rng: &mut ChaCha8Rng, g: &RoadGraph, spec: &ScenarioSpec) -> Vec<i64> {
    let junctions = collect_intersections(g);
    let mut cur = junctions[rng.random_range(0..junctions.len())].id;
    let mut prev: Option<i64> = None;
    let mut driven: BTreeSet<usize> = BTreeSet::new();
    let mut route = vec![cur];
    let mut length = 0.0;
    while length < spec.route_length_m {
        let other = |e: usize| {
            let edge = g.edges()[e];
            if edge.a == cur {
                edge.b
            } else {
                edge.a
            }
        };
        let mut options: Vec<usize> = g
            .incident(cur)
            .iter()
            .copied()
            .filter(|&e| Some(other(e)) != prev)
            .collect();
        if options.is_empty() {
            options = g.incident(cur).to_vec();
        }
        let fresh: Vec<usize> = options.iter().copied().filter(|e| !driven.contains(e)).collect();
        let pool = if fresh.is_empty() { &options } else { &fresh };
        let e = pool[rng.random_range(0..pool.len())];
        driven.insert(e);
        let next = other(e);
        length += g.position(cur).unwrap().distance(g.position(next).unwrap());
        prev = Some(cur);
        cur = next;
        route.push(cur);
    }
    route
}

/// Truth poses every `spacing` meters along the polyline.
fn sample_poses(path: &[Point2], spacing: f64) -> Vec<Pose2> {
    let mut poses = Vec::new();
    let mut seg_start = 0.0;
    let mut next = 0.0;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.distance(b);
        let heading = (b.y - a.y).atan2(b.x - a.x);
        while next < seg_start + len {
            let p = a + (b - a) * ((next - seg_start) / len);
            poses.push(Pose2::from_parts(p, heading));
            next += spacing;
        }
        seg_start += len;
    }
    poses
}

/// Facade of one building wall, with world-anchored occlusion stretches.
struct Wall {
    a: Point2,
    b: Point2,
    outward: Point2,
    hidden: Vec<bool>,
}

const OCCLUSION_CHUNK_M: f64 = 5.0;
const DEPTH_BINS: usize = 7200;
const DEPTH_TOLERANCE_M: f64 = 0.3;

fn walls(rng: &mut ChaCha8Rng, buildings: &BuildingSet, occlusion: f64) -> Vec<Vec<Wall>> {
    buildings
        .polygons
        .iter()
        .map(|poly| {
            let n = poly.len();
            (0..n)
                .map(|i| {
                    let (a, b) = (poly[i], poly[(i + 1) % n]);
                    let d = b - a;
                    let chunks = (a.distance(b) / OCCLUSION_CHUNK_M).ceil() as usize;
                    Wall {
                        a,
                        b,
                        outward: Point2::new(d.y, -d.x) * (1.0 / d.norm()),
                        hidden: (0..chunks).map(|_| rng.random_bool(occlusion)).collect(),
                    }
                })
                .collect()
        })
        .collect()
}

fn bin_of(angle: f64) -> usize {
    ((angle.rem_euclid(TAU) / TAU * DEPTH_BINS as f64) as usize).min(DEPTH_BINS - 1)
}

/// Nearest wall along each bearing from `sensor`: `(range, wall id)`.
fn depth_buffer(sensor: Point2, walls: &[&Wall]) -> Vec<(f64, usize)> {
    let mut depth = vec![(f64::INFINITY, usize::MAX); DEPTH_BINS];
    let bin_width = TAU / DEPTH_BINS as f64;
    for (id, w) in walls.iter().enumerate() {
        let (pa, pb) = (w.a - sensor, w.b - sensor);
        let alpha = pa.y.atan2(pa.x);
        let span = normalize_angle(pb.y.atan2(pb.x) - alpha);
        let (start, sweep) = if span >= 0.0 { (alpha, span) } else { (alpha + span, -span) };
        let first = (start / bin_width).floor() as i64;
        let last = ((start + sweep) / bin_width).ceil() as i64;
        let e = w.b - w.a;
        for k in first..=last {
            let phi = (k as f64 + 0.5) * bin_width;
            let dir = Point2::new(phi.cos(), phi.sin());
            let denom = dir.cross(e);
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = pa.cross(e) / denom;
            let u = pa.cross(dir) / denom;
            if t > 0.0 && (-1e-9..=1.0 + 1e-9).contains(&u) {
                let slot = &mut depth[k.rem_euclid(DEPTH_BINS as i64) as usize];
                if t < slot.0 {
                    *slot = (t, id);
                }
            }
        }
    }
    depth
}

fn frame_seed(seed: u64, frame: usize) -> u64 {
    seed ^ (frame as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Sensor<'a> {
    spec: &'a ScenarioSpec,
    roads: Vec<(Point2, Point2)>,
    walls: Vec<Vec<Wall>>,
}

impl Sensor<'_> {
    /// Labeled points seen from `pose`, in the vehicle frame.
    fn scan(&self, pose: &Pose2, rng: &mut ChaCha8Rng) -> (Vec<Point2>, Vec<Point2>) {
        let spec = self.spec;
        let noise = spec.noise;
        let jitter = Normal::new(0.0, noise.position_jitter_m.max(f64::MIN_POSITIVE)).unwrap();
        let sensor = pose.translation();
        let to_local = pose.inverse();
        let perturb = |p: Point2, rng: &mut ChaCha8Rng| {
            let p = if noise.position_jitter_m > 0.0 {
                p + Point2::new(jitter.sample(rng), jitter.sample(rng))
            } else {
                p
            };
            to_local.transform_point(p)
        };

        let half = 0.5 * spec.road_width_m;
        let near_roads: Vec<(Point2, Point2)> = self
            .roads
            .iter()
            .copied()
            .filter(|&(a, b)| point_segment_distance(sensor, a, b) <= spec.road_range_m + half)
            .collect();
        let samples = (spec.road_point_density * PI * spec.road_range_m.powi(2)).round() as usize;
        let mut road = Vec::new();
        for _ in 0..samples {
            let r = spec.road_range_m * rng.random::<f64>().sqrt();
            let phi = TAU * rng.random::<f64>();
            let p = sensor + Point2::new(r * phi.cos(), r * phi.sin());
            let on_road = near_roads
                .iter()
                .any(|&(a, b)| point_segment_distance(p, a, b) <= half);
            if !on_road || (noise.road_dropout > 0.0 && rng.random_bool(noise.road_dropout)) {
                continue;
            }
            road.push(perturb(p, rng));
        }

        let reach = spec.facade_range_m;
        let near: Vec<&Wall> = self
            .walls
            .iter()
            .flatten()
            .filter(|w| point_segment_distance(sensor, w.a, w.b) <= reach)
            .collect();
        let depth = depth_buffer(sensor, &near);
        let mut building = Vec::new();
        for (id, w) in near.iter().enumerate() {
            let len = w.a.distance(w.b);
            let steps = (len / spec.facade_spacing_m).floor() as usize;
            for k in 0..steps {
                let s = (k as f64 + 0.5) * spec.facade_spacing_m;
                let p = w.a + (w.b - w.a) * (s / len);
                let ray = p - sensor;
                let range = ray.norm();
                if range > reach || w.outward.dot(ray) >= 0.0 {
                    continue;
                }
                if w.hidden[(s / OCCLUSION_CHUNK_M) as usize] {
                    continue;
                }
                let (d, owner) = depth[bin_of(ray.y.atan2(ray.x))];
                if owner != id && range > d + DEPTH_TOLERANCE_M {
                    continue;
                }
                building.push(perturb(p, rng));
            }
        }
        (road, building)
    }
}

/// Builds a complete scenario. Identical specs give identical scenarios.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let roads = generate_roads(&mut rng, spec)?;
    let buildings = generate_buildings(&mut rng, &roads, spec);
    let route = drive_route(&mut rng, &roads, spec);
    let path: Vec<Point2> = route.iter().map(|id| roads.position(*id).unwrap()).collect();
    let poses = sample_poses(&path, spec.frame_spacing_m);
    let sensor = Sensor {
        spec,
        roads: segments(&roads),
        walls: walls(&mut rng, &buildings, spec.noise.building_occlusion),
    };

    let heading_noise = Normal::new(0.0, spec.noise.heading_noise_rad.max(f64::MIN_POSITIVE)).unwrap();
    let origin_inv = poses[0].inverse();
    let mut drift = 0.0;
    let mut frames = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let mut frame_rng = ChaCha8Rng::seed_from_u64(frame_seed(spec.seed, i));
        let (road, building) = sensor.scan(pose, &mut frame_rng);
        if spec.noise.heading_noise_rad > 0.0 && i > 0 {
            drift += heading_noise.sample(&mut frame_rng);
        }
        let odom = origin_inv.compose(pose);
        frames.push(SemanticFrame {
            t: i as f64 * spec.frame_spacing_m / spec.speed_mps,
            pose: Pose2::new(odom.x, odom.y, odom.theta + drift),
            road,
            building,
        });
    }
    log::info!(
        "scenario seed {}: {} intersections, {} buildings, {} frames",
        spec.seed,
        collect_intersections(&roads).len(),
        buildings.polygons.len(),
        frames.len()
    );

    let mut seen = BTreeSet::new();
    let visited = route
        .iter()
        .copied()
        .filter(|id| roads.degree(*id) >= 3 && seen.insert(*id))
        .collect();
    Ok(Scenario {
        spec: spec.clone(),
        roads,
        buildings,
        frames,
        truth: GroundTruth {
            poses,
            route: visited,
        },
    })
}

/// Projection origin used when exporting scenarios as OSM XML.
pub const EXPORT_ORIGIN: (f64, f64) = (48.0, 11.0);

fn unproject(p: Point2, (lat0, lon0): (f64, f64)) -> (f64, f64) {
    (
        lat0 + (p.y / EARTH_RADIUS_M).to_degrees(),
        lon0 + (p.x / (EARTH_RADIUS_M * lat0.to_radians().cos())).to_degrees(),
    )
}

/// Writes roads and buildings as an OSM XML extract whose `<bounds>` is
/// centered on `origin`, so parsing it reproduces the local coordinates.
pub fn write_osm(mut w: impl Write, roads: &RoadGraph, buildings: &BuildingSet, origin: (f64, f64)) -> Result<()> {
    let all: Vec<Point2> = roads
        .nodes()
        .values()
        .copied()
        .chain(buildings.polygons.iter().flatten().copied())
        .collect();
    let extent = all.iter().fold(1.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs())) + 10.0;
    let (lat_lo, lon_lo) = unproject(Point2::new(-extent, -extent), origin);
    let (lat_hi, lon_hi) = unproject(Point2::new(extent, extent), origin);
    // bounds symmetric about the origin in degrees
    let dlat = 0.5 * (lat_hi - lat_lo);
    let dlon = 0.5 * (lon_hi - lon_lo);
    writeln!(w, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>")?;
    writeln!(w, "<osm version=\"0.6\" generator=\"interkey\">")?;
    writeln!(
        w,
        "  <bounds minlat=\"{:.12}\" minlon=\"{:.12}\" maxlat=\"{:.12}\" maxlon=\"{:.12}\"/>",
        origin.0 - dlat,
        origin.1 - dlon,
        origin.0 + dlat,
        origin.1 + dlon
    )?;
    for (id, p) in roads.nodes() {
        let (lat, lon) = unproject(*p, origin);
        writeln!(w, "  <node id=\"{id}\" lat=\"{lat:.12}\" lon=\"{lon:.12}\"/>")?;
    }
    let mut next_id = roads.nodes().keys().max().copied().unwrap_or(0) + 1;
    let mut rings = Vec::new();
    for poly in &buildings.polygons {
        let mut ids = Vec::new();
        for p in poly {
            let (lat, lon) = unproject(*p, origin);
            writeln!(w, "  <node id=\"{next_id}\" lat=\"{lat:.12}\" lon=\"{lon:.12}\"/>")?;
            ids.push(next_id);
            next_id += 1;
        }
        rings.push(ids);
    }
    for (i, e) in roads.edges().iter().enumerate() {
        writeln!(w, "  <way id=\"{}\">", i + 1)?;
        writeln!(w, "    <nd ref=\"{}\"/>\n    <nd ref=\"{}\"/>", e.a, e.b)?;
        writeln!(w, "    <tag k=\"highway\" v=\"residential\"/>")?;
        writeln!(w, "    <tag k=\"name\" v=\"Street {}\"/>", i + 1)?;
        writeln!(w, "  </way>")?;
    }
    for (i, ids) in rings.iter().enumerate() {
        writeln!(w, "  <way id=\"{}\">", roads.edges().len() + i + 1)?;
        for id in ids.iter().chain(ids.first()) {
            writeln!(w, "    <nd ref=\"{id}\"/>")?;
        }
        writeln!(w, "    <tag k=\"building\" v=\"yes\"/>")?;
        writeln!(w, "  </way>")?;
    }
    writeln!(w, "</osm>")?;
    Ok(())
}
