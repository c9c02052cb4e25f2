//! Evaluation: metrics, reports, result files and synthetic scenarios.

pub mod metrics;
pub mod scenario;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localizer::{LocalizationRun, QueryOutcome};
use crate::matchdb::DescriptorDatabase;
use crate::raster::{Point2, Pose2};

pub use metrics::{
    frame_weighted_mean, precision_recall_curve, recall_at_km, recall_at_top_n, verify_match, Candidate,
    PrEntry, PrPoint, RankedQuery, MATCH_RADIUS_M,
};
pub use scenario::{generate_scenario, write_osm, GroundTruth, NoiseSpec, Scenario, ScenarioSpec, EXPORT_ORIGIN};

/// Distance thresholds reported as Recall@Km.
pub const RECALL_DISTANCES_M: [f64; 3] = [2.0, 5.0, 10.0];
/// Ranks reported as Recall@TopN.
pub const RECALL_RANKS: [usize; 3] = [1, 5, 10];

/// One line of a per-frame trajectory file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub frame_index: usize,
    #[serde(default)]
    pub t: f64,
    /// `[x, y, theta]`; `null` before the first fix. Fix lines share the
    /// layout, so they can be read as sparse trajectories.
    pub pose: Option<[f64; 3]>,
}

/// One line of a match-results file: a described query window and its
/// ranked candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchLine {
    pub window: usize,
    pub center_frame: usize,
    pub newest_frame: usize,
    /// Observed intersection pose in the middle keyframe frame.
    pub observed: Pose2,
    pub candidates: Vec<Candidate>,
}

impl MatchLine {
    pub fn from_outcome(q: &QueryOutcome, db: &DescriptorDatabase) -> Self {
        Self {
            window: q.window,
            center_frame: q.center_frame,
            newest_frame: q.newest_frame,
            observed: q.observed_pose,
            candidates: q
                .candidates
                .iter()
                .map(|m| Candidate {
                    intersection_id: m.intersection_id,
                    hamming: m.hamming,
                    position: db.record(m).global_pose.translation(),
                })
                .collect(),
        }
    }

    /// Pairs the query with the true pose of its middle keyframe.
    pub fn ranked(&self, truth: &GroundTruth) -> Result<RankedQuery> {
        let truth_center = *truth.poses.get(self.center_frame).ok_or_else(|| {
            Error::Input(format!(
                "match for window {} refers to frame {} but truth has {} frames",
                self.window,
                self.center_frame,
                truth.poses.len()
            ))
        })?;
        Ok(RankedQuery {
            truth_center,
            observed: self.observed.translation(),
            candidates: self.candidates.clone(),
        })
    }
}

fn write_jsonl<T: Serialize>(mut w: impl Write, items: impl IntoIterator<Item = T>) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Input(format!("{what} line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

pub fn write_trajectory(w: impl Write, run: &LocalizationRun, times: &[f64]) -> Result<()> {
    write_jsonl(
        w,
        run.trajectory.iter().enumerate().map(|(i, pose)| TrajectoryLine {
            frame_index: i,
            t: times.get(i).copied().unwrap_or(0.0),
            pose: pose.map(|p| [p.x, p.y, p.theta]),
        }),
    )
}

pub fn write_matches(w: impl Write, run: &LocalizationRun, db: &DescriptorDatabase) -> Result<()> {
    write_jsonl(w, run.queries.iter().map(|q| MatchLine::from_outcome(q, db)))
}

pub fn read_matches(r: impl BufRead) -> Result<Vec<MatchLine>> {
    read_jsonl(r, "match")
}

/// Reads trajectory or fix lines into one estimate slot per truth frame.
/// Frames that never appear stay unestimated; indices past the truth are an
/// error.
pub fn read_estimates(r: impl BufRead, frames: usize) -> Result<Vec<Option<Point2>>> {
    let mut out = vec![None; frames];
    for line in read_jsonl::<TrajectoryLine>(r, "estimate")? {
        let slot = out.get_mut(line.frame_index).ok_or_else(|| {
            Error::Input(format!(
                "estimate for frame {} but truth has {frames} frames",
                line.frame_index
            ))
        })?;
        if let Some([x, y, _]) = line.pose {
            *slot = Some(Point2::new(x, y));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub name: String,
    pub frames: usize,
    /// Frames that carry an estimate.
    pub estimated_frames: usize,
    /// Keyed by distance in meters.
    pub recall_at_m: BTreeMap<String, Option<f64>>,
    pub queries: Option<usize>,
    /// Keyed by rank; present only with match results.
    pub recall_at_top: BTreeMap<String, Option<f64>>,
    pub pr_curve: Vec<PrPoint>,
    /// Generation noise, when the sequence is synthetic.
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Sequence values are weighted by their frame counts.
    pub weighting: String,
    pub frames: usize,
    pub recall_at_m: BTreeMap<String, Option<f64>>,
    pub recall_at_top: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sequences: Vec<SequenceReport>,
    pub aggregate: Aggregate,
}

fn key(v: f64) -> String {
    format!("{v}")
}

/// Default PR thresholds: every 4 bits up to `bits`, inclusive.
pub fn default_thresholds(bits: usize) -> Vec<u32> {
    let mut t: Vec<u32> = (0..=bits as u32).step_by(4).collect();
    if t.last() != Some(&(bits as u32)) {
        t.push(bits as u32);
    }
    t
}

/// Metrics of one sequence. Match metrics are computed only when `queries`
/// is given.
pub fn evaluate_sequence(
    name: &str,
    estimates: &[Option<Point2>],
    truth: &GroundTruth,
    queries: Option<&[RankedQuery]>,
    thresholds: &[u32],
    noise: Option<NoiseSpec>,
) -> Result<SequenceReport> {
    let truth_pos = truth.positions();
    let mut recall_at_m = BTreeMap::new();
    for k in RECALL_DISTANCES_M {
        recall_at_m.insert(key(k), recall_at_km(estimates, &truth_pos, k)?);
    }
    let mut recall_at_top = BTreeMap::new();
    let mut pr_curve = Vec::new();
    if let Some(qs) = queries {
        for n in RECALL_RANKS {
            recall_at_top.insert(n.to_string(), recall_at_top_n(qs, n, MATCH_RADIUS_M));
        }
        let entries: Vec<PrEntry> = qs
            .iter()
            .map(|q| PrEntry {
                hamming: q.candidates.first().map(|c| c.hamming),
                correct: q.top1_correct(MATCH_RADIUS_M),
            })
            .collect();
        pr_curve = precision_recall_curve(&entries, thresholds)?;
    }
    Ok(SequenceReport {
        name: name.to_string(),
        frames: estimates.len(),
        estimated_frames: estimates.iter().filter(|e| e.is_some()).count(),
        recall_at_m,
        queries: queries.map(<[RankedQuery]>::len),
        recall_at_top,
        pr_curve,
        noise,
    })
}

fn weighted(seqs: &[SequenceReport], pick: impl Fn(&SequenceReport) -> Option<f64>) -> Option<f64> {
    let items: Vec<(usize, f64)> = seqs.iter().filter_map(|s| pick(s).map(|v| (s.frames, v))).collect();
    frame_weighted_mean(&items)
}

/// Frame-weighted aggregate over sequences.
pub fn aggregate(sequences: Vec<SequenceReport>) -> EvalReport {
    let mut recall_at_m = BTreeMap::new();
    for k in RECALL_DISTANCES_M {
        let k = key(k);
        recall_at_m.insert(k.clone(), weighted(&sequences, |s| s.recall_at_m.get(&k).copied().flatten()));
    }
    let mut recall_at_top = BTreeMap::new();
    for n in RECALL_RANKS {
        let n = n.to_string();
        if sequences.iter().any(|s| s.recall_at_top.contains_key(&n)) {
            recall_at_top.insert(n.clone(), weighted(&sequences, |s| s.recall_at_top.get(&n).copied().flatten()));
        }
    }
    EvalReport {
        aggregate: Aggregate {
            weighting: "frames".into(),
            frames: sequences.iter().map(|s| s.frames).sum(),
            recall_at_m,
            recall_at_top,
        },
        sequences,
    }
}

/// PR points as CSV with an empty precision field where it is undefined.
pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        let precision = p.precision.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", p.threshold, precision, p.recall));
    }
    out
}

/// Ranked queries of a localization run, paired with the truth.
pub fn ranked_queries(run: &LocalizationRun, db: &DescriptorDatabase, truth: &GroundTruth) -> Result<Vec<RankedQuery>> {
    run.queries
        .iter()
        .map(|q| MatchLine::from_outcome(q, db).ranked(truth))
        .collect()
}
