//! OpenStreetMap ingestion: road graph, building polygons, intersection
//! collection, map-side imprints and the map descriptor database.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::descriptor::{describe, DescribeMode, DescriptorSource};
use crate::error::{Error, Result};
use crate::matchdb::{DescriptorDatabase, IntersectionRecord};
use crate::raster::{draw_polygon, draw_polyline, GridImage, PixelPoint, Point2, Pose2};

/// Mean Earth radius used by the equirectangular projection (WGS84 semi-major axis).
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// Highway classes kept in the road graph.
pub const ROAD_CLASSES: [&str; 3] = ["residential", "service", "tertiary"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub a: i64,
    pub b: i64,
}

/// Undirected road graph. Node positions are meters in the map frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoadGraph {
    nodes: BTreeMap<i64, Point2>,
    edges: Vec<RoadEdge>,
    adjacency: BTreeMap<i64, Vec<usize>>,
    pairs: BTreeSet<(i64, i64)>,
}

impl RoadGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: i64, position: Point2) {
        self.nodes.insert(id, position);
        self.adjacency.entry(id).or_default();
    }

    /// Adds an undirected edge. Self-loops, duplicates and edges to unknown
    /// nodes are ignored; returns whether the edge was added.
    pub fn add_edge(&mut self, a: i64, b: i64) -> bool {
        if a == b || !self.nodes.contains_key(&a) || !self.nodes.contains_key(&b) {
            return false;
        }
        if !self.pairs.insert((a.min(b), a.max(b))) {
            return false;
        }
        let idx = self.edges.len();
        self.edges.push(RoadEdge { a, b });
        self.adjacency.entry(a).or_default().push(idx);
        self.adjacency.entry(b).or_default().push(idx);
        true
    }

    pub fn nodes(&self) -> &BTreeMap<i64, Point2> {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn position(&self, id: i64) -> Option<Point2> {
        self.nodes.get(&id).copied()
    }

    pub fn degree(&self, id: i64) -> usize {
        self.adjacency.get(&id).map_or(0, Vec::len)
    }

    /// Indices of the edges incident to `id`.
    pub fn incident(&self, id: i64) -> &[usize] {
        self.adjacency.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn edge_points(&self, e: &RoadEdge) -> (Point2, Point2) {
        (self.nodes[&e.a], self.nodes[&e.b])
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Building footprints as closed vertex rings in the map frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildingSet {
    pub polygons: Vec<Vec<Point2>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionNode {
    pub id: i64,
    pub position: Point2,
    pub degree: usize,
}

/// Parsed extract plus the projection origin.
#[derive(Debug, Clone, PartialEq)]
pub struct OsmMap {
    pub roads: RoadGraph,
    pub buildings: BuildingSet,
    /// `(lat, lon)` in degrees of the projection origin.
    pub origin: (f64, f64),
}

/// Local equirectangular projection about `origin = (lat0, lon0)`.
pub fn project(lat: f64, lon: f64, origin: (f64, f64)) -> Point2 {
    let (lat0, lon0) = origin;
    Point2::new(
        EARTH_RADIUS_M * (lon - lon0).to_radians() * lat0.to_radians().cos(),
        EARTH_RADIUS_M * (lat - lat0).to_radians(),
    )
}

#[derive(Default)]
struct Way {
    refs: Vec<i64>,
    tags: HashMap<String, String>,
}

fn attr(e: &BytesStart, name: &[u8], offset: u64) -> Result<Option<String>> {
    for a in e.attributes() {
        let a = a.map_err(|err| Error::OsmParse {
            offset,
            message: err.to_string(),
        })?;
        if a.key.as_ref() == name {
            let v = a.unescape_value().map_err(|err| Error::OsmParse {
                offset,
                message: err.to_string(),
            })?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn required<T: std::str::FromStr>(e: &BytesStart, name: &str, offset: u64) -> Result<T> {
    let raw = attr(e, name.as_bytes(), offset)?.ok_or_else(|| Error::OsmParse {
        offset,
        message: format!(
            "<{}> is missing attribute {name:?}",
            String::from_utf8_lossy(e.name().as_ref())
        ),
    })?;
    raw.parse().map_err(|_| Error::OsmParse {
        offset,
        message: format!("attribute {name:?} has invalid value {raw:?}"),
    })
}

/// Parses an OSM XML extract.
///
/// Ways tagged `highway` in [`ROAD_CLASSES`] with a non-empty `name` become
/// roads: every referenced node is a graph node and consecutive nodes are
/// joined by an edge, so junction degrees count correctly wherever ways share
/// nodes. Ways with a `building` tag other than `no` become polygons.
/// Coordinates are projected about the `<bounds>` center, or about the middle
/// of the node extent when there is no `<bounds>` element.
pub fn parse_osm(bytes: &[u8]) -> Result<OsmMap> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().check_end_names = true;
    let mut buf = Vec::new();
    let mut latlon: HashMap<i64, (f64, f64)> = HashMap::new();
    let mut ways: Vec<Way> = Vec::new();
    let mut bounds: Option<(f64, f64, f64, f64)> = None;
    let mut current: Option<Way> = None;
    let mut depth = 0usize;

    loop {
        let offset = reader.buffer_position();
        let event = reader.read_event_into(&mut buf).map_err(|err| Error::OsmParse {
            offset: reader.error_position(),
            message: err.to_string(),
        })?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_start = matches!(event, Event::Start(_));
                match e.name().as_ref() {
                    b"bounds" => {
                        bounds = Some((
                            required(e, "minlat", offset)?,
                            required(e, "minlon", offset)?,
                            required(e, "maxlat", offset)?,
                            required(e, "maxlon", offset)?,
                        ));
                    }
                    b"node" => {
                        let id: i64 = required(e, "id", offset)?;
                        let lat: f64 = required(e, "lat", offset)?;
                        let lon: f64 = required(e, "lon", offset)?;
                        latlon.insert(id, (lat, lon));
                    }
                    b"way" => {
                        let _: i64 = required(e, "id", offset)?;
                        if is_start {
                            current = Some(Way::default());
                        }
                    }
                    b"nd" => {
                        if let Some(w) = current.as_mut() {
                            w.refs.push(required(e, "ref", offset)?);
                        }
                    }
                    b"tag" => {
                        if let Some(w) = current.as_mut() {
                            let k: String = required(e, "k", offset)?;
                            let v: String = required(e, "v", offset)?;
                            w.tags.insert(k, v);
                        }
                    }
                    _ => {}
                }
                if is_start {
                    depth += 1;
                }
            }
            Event::End(ref e) => {
                depth = depth.saturating_sub(1);
                if e.name().as_ref() == b"way" {
                    if let Some(w) = current.take() {
                        ways.push(w);
                    }
                }
            }
            Event::Eof => {
                if depth != 0 {
                    return Err(Error::OsmParse {
                        offset: reader.buffer_position(),
                        message: "unexpected end of file inside an open element".into(),
                    });
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }

    let origin = match bounds {
        Some((a, b, c, d)) => (0.5 * (a + c), 0.5 * (b + d)),
        None if latlon.is_empty() => (0.0, 0.0),
        None => {
            let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
            for &(lat, lon) in latlon.values() {
                lo = (lo.0.min(lat), lo.1.min(lon));
                hi = (hi.0.max(lat), hi.1.max(lon));
            }
            (0.5 * (lo.0 + hi.0), 0.5 * (lo.1 + hi.1))
        }
    };

    let mut roads = RoadGraph::new();
    let mut buildings = BuildingSet::default();
    let mut dangling = 0usize;
    for w in &ways {
        let is_road = w
            .tags
            .get("highway")
            .is_some_and(|h| ROAD_CLASSES.contains(&h.as_str()))
            && w.tags.get("name").is_some_and(|n| !n.trim().is_empty());
        let is_building = w.tags.get("building").is_some_and(|b| b != "no");
        if !is_road && !is_building {
            continue;
        }
        let resolved: Vec<(i64, Point2)> = w
            .refs
            .iter()
            .filter_map(|id| match latlon.get(id) {
                Some(&(lat, lon)) => Some((*id, project(lat, lon, origin))),
                None => {
                    dangling += 1;
                    None
                }
            })
            .collect();
        if is_road {
            for &(id, p) in &resolved {
                roads.add_node(id, p);
            }
            for pair in resolved.windows(2) {
                roads.add_edge(pair[0].0, pair[1].0);
            }
        }
        if is_building {
            let mut ring: Vec<Point2> = resolved.iter().map(|&(_, p)| p).collect();
            if ring.len() > 1 && resolved.first().map(|f| f.0) == resolved.last().map(|l| l.0) {
                ring.pop();
            }
            if ring.len() >= 3 {
                buildings.polygons.push(ring);
            }
        }
    }
    if dangling > 0 {
        log::warn!("{dangling} node reference(s) point to nodes missing from the extract");
    }
    Ok(OsmMap {
        roads,
        buildings,
        origin,
    })
}

/// Nodes with at least three incident edges, by ascending id.
pub fn collect_intersections(g: &RoadGraph) -> Vec<IntersectionNode> {
    g.nodes()
        .iter()
        .filter(|(id, _)| g.degree(**id) >= 3)
        .map(|(&id, &position)| IntersectionNode {
            id,
            position,
            degree: g.degree(id),
        })
        .collect()
}

fn in_window(p: Point2, center: Point2, size_m: f64) -> bool {
    let h = 0.5 * size_m;
    (p.x - center.x).abs() <= h && (p.y - center.y).abs() <= h
}

/// Depth-first traversal from `center`, confined to the `size_m` square
/// around it. Edges leading out of the window are kept (they are clipped when
/// drawn) but the traversal does not continue past their far node. Each edge
/// is emitted once.
pub fn trace_local_subgraph(g: &RoadGraph, center: &IntersectionNode, size_m: f64) -> RoadGraph {
    let mut sub = RoadGraph::new();
    let Some(origin) = g.position(center.id) else {
        return sub;
    };
    sub.add_node(center.id, origin);
    let mut visited_edges = vec![false; g.edges().len()];
    let mut expanded: BTreeSet<i64> = BTreeSet::new();
    let mut stack = vec![center.id];
    while let Some(n) = stack.pop() {
        if !expanded.insert(n) {
            continue;
        }
        for &ei in g.incident(n) {
            if visited_edges[ei] {
                continue;
            }
            visited_edges[ei] = true;
            let e = g.edges()[ei];
            let other = if e.a == n { e.b } else { e.a };
            let p = g.position(other).expect("edge endpoints exist");
            sub.add_node(other, p);
            sub.add_edge(e.a, e.b);
            if in_window(p, origin, size_m) && !expanded.contains(&other) {
                stack.push(other);
            }
        }
    }
    sub
}

/// Map-frame image geometry for an intersection: centered on the node, axes
/// aligned with the map frame.
pub fn map_image(center: &IntersectionNode, cfg: &Config) -> Result<GridImage> {
    GridImage::new(
        cfg.side_px(),
        cfg.resolution_m_per_px,
        Pose2::new(center.position.x, center.position.y, 0.0),
    )
}

/// Draws every edge of `sub` one pixel wide.
pub fn road_imprint(sub: &RoadGraph, center: &IntersectionNode, cfg: &Config) -> Result<GridImage> {
    let mut img = map_image(center, cfg)?;
    for e in sub.edges() {
        let (a, b) = sub.edge_points(e);
        let pts = [img.world_to_pixel(a), img.world_to_pixel(b)];
        draw_polyline(&mut img, &pts, 1);
    }
    Ok(img)
}

/// Draws the contour of every building with at least one vertex in the window.
pub fn building_imprint(
    buildings: &BuildingSet,
    center: &IntersectionNode,
    cfg: &Config,
) -> Result<GridImage> {
    let mut img = map_image(center, cfg)?;
    for poly in &buildings.polygons {
        if !poly.iter().any(|&p| in_window(p, center.position, cfg.image_size_m)) {
            continue;
        }
        let pts: Vec<PixelPoint> = poly.iter().map(|&p| img.world_to_pixel(p)).collect();
        draw_polygon(&mut img, &pts, 1);
    }
    Ok(img)
}

/// Outcome of building the map database.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub intersections: usize,
    pub described: usize,
    pub skipped: Vec<i64>,
    pub descriptors: usize,
}

/// Map imprints of one intersection.
pub fn intersection_imprints(
    map: &OsmMap,
    node: &IntersectionNode,
    cfg: &Config,
) -> Result<(GridImage, GridImage)> {
    let sub = trace_local_subgraph(&map.roads, node, cfg.image_size_m);
    Ok((
        road_imprint(&sub, node, cfg)?,
        building_imprint(&map.buildings, node, cfg)?,
    ))
}

/// Describes every intersection (database mode) and collects the records.
/// Intersections with fewer than two branches are skipped with a warning.
pub fn build_database(
    roads: &RoadGraph,
    buildings: &BuildingSet,
    cfg: &Config,
) -> Result<(DescriptorDatabase, BuildSummary)> {
    cfg.validate()?;
    let map = OsmMap {
        roads: roads.clone(),
        buildings: buildings.clone(),
        origin: (0.0, 0.0),
    };
    let nodes = collect_intersections(roads);
    let per_node: Vec<Result<Option<Vec<IntersectionRecord>>>> = nodes
        .par_iter()
        .map(|node| {
            let (road, building) = intersection_imprints(&map, node, cfg)?;
            let center = road.center_pixel();
            let source = DescriptorSource::Map {
                intersection_id: node.id,
            };
            match describe(&road, &building, center, cfg, DescribeMode::Database, source) {
                Ok(desc) => Ok(Some(
                    desc.descriptors
                        .into_iter()
                        .map(|d| {
                            let p = road.pixel_to_world(d.refined_point);
                            IntersectionRecord {
                                intersection_id: node.id,
                                global_pose: Pose2::from_parts(p, d.heading()),
                                descriptor: d,
                            }
                        })
                        .collect(),
                )),
                Err(Error::DegenerateIntersection { branches }) => {
                    log::warn!(
                        "skipping intersection {}: {branches} branch(es) in the consistent region",
                        node.id
                    );
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut db = DescriptorDatabase::new(cfg.fingerprint(), cfg.descriptor_bits());
    let mut summary = BuildSummary {
        intersections: nodes.len(),
        ..Default::default()
    };
    for (node, res) in nodes.iter().zip(per_node) {
        match res? {
            Some(records) => {
                summary.described += 1;
                for r in records {
                    db.push(r)?;
                    summary.descriptors += 1;
                }
            }
            None => summary.skipped.push(node.id),
        }
    }
    Ok((db, summary))
}
