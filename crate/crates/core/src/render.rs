//! SVG views of imprints, descriptors, databases and match dumps.

use std::fmt::Write as _;

use crate::descriptor::{Descriptor, DescriptionDump, SamplingPattern};
use crate::matchdb::{DescriptorDatabase, MatchDump};
use crate::raster::{GridImage, PixelPoint, Point2};

/// Arc subdivisions per cell edge; enough for the outer ring to look round.
const ARC_STEPS: usize = 6;

const STYLE: &str = "\
.road{fill:#9a9a9a}.building{fill:#b5651d}\
.cell{fill:none;stroke:#1f77b4;stroke-width:0.6}.cell.on{fill:#1f77b4;fill-opacity:0.35}\
.branch{stroke:#2ca02c;stroke-width:1.5}.orientation{stroke:#d62728;stroke-width:3}\
.detected{fill:none;stroke:#ff7f0e;stroke-width:2}.refined{fill:#d62728}\
.intersection{fill:#333}.query{fill:#1f77b4}.match{stroke:#2ca02c;stroke-width:1}\
.match.rejected{stroke:#999;stroke-dasharray:4 3}text{font:10px sans-serif}";

fn open(out: &mut String, width: f64, height: f64) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}"><style>{STYLE}</style>"#
    );
}

/// Draws set pixels as horizontal runs, one `<rect>` per run.
fn layer(out: &mut String, img: &GridImage, class: &str) {
    let _ = write!(out, r#"<g class="{class}">"#);
    let side = img.side();
    for v in 0..side {
        let mut u = 0;
        while u < side {
            if !img.get(u, v) {
                u += 1;
                continue;
            }
            let start = u;
            while u < side && img.get(u, v) {
                u += 1;
            }
            let _ = write!(out, r#"<rect x="{start}" y="{v}" width="{}" height="1"/>"#, u - start);
        }
    }
    out.push_str("</g>");
}

fn pixel_at(center: PixelPoint, heading: f64, radius_px: f64, angle: f64) -> (f64, f64) {
    let a = heading + angle;
    (center.u + radius_px * a.cos(), center.v - radius_px * a.sin())
}

/// One polygon per pattern cell around the descriptor's refined point,
/// filled where the bit is set.
fn pattern_cells(out: &mut String, d: &Descriptor, pattern: &SamplingPattern, resolution: f64) {
    let heading = d.heading();
    let center = d.refined_point;
    out.push_str(r#"<g class="pattern">"#);
    for i in 0..pattern.len().min(d.len()) {
        let cell = pattern.cell(i);
        let (r0, r1) = (cell.inner_radius_m / resolution, cell.outer_radius_m / resolution);
        let span = cell.end_angle - cell.start_angle;
        let mut pts = Vec::with_capacity(2 * ARC_STEPS + 3);
        for k in 0..=ARC_STEPS {
            pts.push(pixel_at(center, heading, r1, cell.start_angle + span * k as f64 / ARC_STEPS as f64));
        }
        if r0 > 0.0 {
            for k in (0..=ARC_STEPS).rev() {
                pts.push(pixel_at(center, heading, r0, cell.start_angle + span * k as f64 / ARC_STEPS as f64));
            }
        } else {
            pts.push((center.u, center.v));
        }
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let on = if d.get(i) { " on" } else { "" };
        let _ = write!(out, r#"<polygon class="cell{on}" points="{}"/>"#, points.join(" "));
    }
    out.push_str("</g>");
}

fn orientation_arrow(out: &mut String, d: &Descriptor, length_px: f64) {
    let (x, y) = pixel_at(d.refined_point, d.heading(), length_px, 0.0);
    let p = d.refined_point;
    let _ = write!(
        out,
        r#"<line class="orientation" x1="{:.2}" y1="{:.2}" x2="{x:.2}" y2="{y:.2}"/>"#,
        p.u, p.v
    );
}

/// What to draw on top of the imprints.
#[derive(Debug, Clone, Default)]
pub struct Overlay<'a> {
    pub description: Option<&'a DescriptionDump>,
    /// Descriptor whose pattern and orientation are drawn; defaults to the
    /// description's first one.
    pub descriptor: Option<&'a Descriptor>,
}

/// Imprint view: road and building layers, then the overlay group (empty when
/// there is nothing to show).
pub fn render_view(
    side: usize,
    resolution: f64,
    road: Option<&GridImage>,
    building: Option<&GridImage>,
    overlay: &Overlay<'_>,
    pattern: &SamplingPattern,
) -> String {
    let mut out = String::new();
    open(&mut out, side as f64, side as f64);
    let _ = write!(out, r##"<rect width="{side}" height="{side}" fill="#fff"/>"##);
    if let Some(b) = building {
        layer(&mut out, b, "building");
    }
    if let Some(r) = road {
        layer(&mut out, r, "road");
    }
    out.push_str(r#"<g id="overlay">"#);
    let descriptor = overlay
        .descriptor
        .or_else(|| overlay.description.and_then(|d| d.descriptors.first()));
    if let Some(d) = descriptor {
        pattern_cells(&mut out, d, pattern, resolution);
    }
    if let Some(desc) = overlay.description {
        for b in &desc.branches {
            // extend the start-to-centroid line across the consistent region
            let (s, c) = (b.start, b.centroid);
            let (du, dv) = (c[0] - s[0], c[1] - s[1]);
            let n = du.hypot(dv).max(f64::EPSILON);
            let reach = pattern.outer_radius_m / resolution;
            let _ = write!(
                out,
                r#"<line class="branch" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                s[0] - du / n * reach,
                s[1] - dv / n * reach,
                c[0] + du / n * reach * 0.25,
                c[1] + dv / n * reach * 0.25
            );
        }
        let _ = write!(
            out,
            r#"<circle class="detected" cx="{:.2}" cy="{:.2}" r="6"/>"#,
            desc.rho_i[0], desc.rho_i[1]
        );
    }
    if let Some(d) = descriptor {
        orientation_arrow(&mut out, d, 0.5 * pattern.outer_radius_m / resolution);
        let p = d.refined_point;
        let _ = write!(out, r#"<circle class="refined" cx="{:.2}" cy="{:.2}" r="4"/>"#, p.u, p.v);
    }
    out.push_str("</g></svg>\n");
    out
}

/// Maps world points into a `size`-wide canvas with a margin, y up.
struct Frame {
    min: Point2,
    scale: f64,
    height: f64,
    margin: f64,
    offset_x: f64,
}

impl Frame {
    fn fit(points: &[Point2], width: f64, margin: f64, offset_x: f64) -> Self {
        let (mut min, mut max) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for p in points {
            min = Point2::new(min.x.min(p.x), min.y.min(p.y));
            max = Point2::new(max.x.max(p.x), max.y.max(p.y));
        }
        if points.is_empty() {
            min = Point2::default();
            max = Point2::new(1.0, 1.0);
        }
        let extent = (max.x - min.x).max(max.y - min.y).max(1.0);
        let scale = (width - 2.0 * margin) / extent;
        Self {
            min,
            scale,
            height: (max.y - min.y) * scale,
            margin,
            offset_x,
        }
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        (
            self.offset_x + self.margin + (p.x - self.min.x) * self.scale,
            self.margin + self.height - (p.y - self.min.y) * self.scale,
        )
    }
}

/// Map view of every database record: a dot per intersection and a tick
/// along each stored characteristic orientation.
pub fn render_database(db: &DescriptorDatabase, width: f64) -> String {
    let points: Vec<Point2> = db.records().iter().map(|r| r.global_pose.translation()).collect();
    let frame = Frame::fit(&points, width, 30.0, 0.0);
    let mut out = String::new();
    open(&mut out, width, frame.height + 60.0);
    let mut last_id = None;
    for r in db.records() {
        let (x, y) = frame.map(r.global_pose.translation());
        let tip = r.global_pose.translation() + Point2::new(r.global_pose.theta.cos(), r.global_pose.theta.sin()) * 15.0;
        let (tx, ty) = frame.map(tip);
        let _ = write!(out, r#"<line class="orientation" x1="{x:.2}" y1="{y:.2}" x2="{tx:.2}" y2="{ty:.2}" style="stroke-width:1"/>"#);
        if last_id != Some(r.intersection_id) {
            let _ = write!(
                out,
                r#"<circle class="intersection" cx="{x:.2}" cy="{y:.2}" r="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                x + 4.0,
                y - 4.0,
                r.intersection_id
            );
            last_id = Some(r.intersection_id);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Queries in a column on the left, candidate map intersections on the
/// right, one connector line per retrieved match.
pub fn render_matches(dump: &MatchDump, width: f64) -> String {
    let right = width * 0.4;
    let map_points: Vec<Point2> = dump
        .queries
        .iter()
        .flat_map(|q| q.matches.iter().map(|m| m.global_pose.translation()))
        .collect();
    let frame = Frame::fit(&map_points, width - right, 30.0, right);
    let row = 24.0;
    let height = (frame.height + 60.0).max(40.0 + row * dump.queries.len() as f64);
    let mut out = String::new();
    open(&mut out, width, height);
    out.push_str(r#"<g class="matches">"#);
    for (i, q) in dump.queries.iter().enumerate() {
        let (qx, qy) = (40.0, 30.0 + row * i as f64);
        for m in &q.matches {
            let (mx, my) = frame.map(m.global_pose.translation());
            let class = if m.accepted { "match" } else { "match rejected" };
            let _ = write!(
                out,
                r#"<line class="{class}" x1="{qx:.2}" y1="{qy:.2}" x2="{mx:.2}" y2="{my:.2}"><title>query {i} rank {} id {} hamming {}</title></line>"#,
                m.rank, m.intersection_id, m.hamming
            );
        }
    }
    out.push_str("</g>");
    for (i, q) in dump.queries.iter().enumerate() {
        let y = 30.0 + row * i as f64;
        let _ = write!(
            out,
            r#"<circle class="query" cx="40" cy="{y:.2}" r="4"/><text x="4" y="{:.2}">q{i}</text>"#,
            y + 3.0
        );
        for m in &q.matches {
            let (mx, my) = frame.map(m.global_pose.translation());
            let _ = write!(
                out,
                r#"<circle class="intersection" cx="{mx:.2}" cy="{my:.2}" r="3"/><text x="{:.2}" y="{:.2}">{} ({})</text>"#,
                mx + 4.0,
                my - 4.0,
                m.intersection_id,
                m.hamming
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
