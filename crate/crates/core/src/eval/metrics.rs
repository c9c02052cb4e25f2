//! Match verification, Recall@TopN, precision-recall and Recall@Km.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Point2, Pose2};

/// Default verification radius for a retrieved intersection.
pub const MATCH_RADIUS_M: f64 = 5.0;

/// Whether the observed intersection, placed in the map frame with the true
/// window-center pose, lies within `radius` of the candidate.
pub fn verify_match(query_pos_in_lc: Point2, truth_pose: &Pose2, candidate_pos_in_g: Point2, radius: f64) -> bool {
    truth_pose.transform_point(query_pos_in_lc).distance(candidate_pos_in_g) < radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub intersection_id: i64,
    pub hamming: u32,
    /// Map intersection position.
    pub position: Point2,
}

/// One query with its ranked candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedQuery {
    /// True pose of the window's middle keyframe in the map frame.
    pub truth_center: Pose2,
    /// Observed (refined) intersection position in the middle keyframe frame.
    pub observed: Point2,
    pub candidates: Vec<Candidate>,
}

impl RankedQuery {
    /// Candidates with repeated intersection ids removed, first occurrence kept.
    pub fn distinct(&self) -> Vec<Candidate> {
        let mut seen = BTreeSet::new();
        self.candidates
            .iter()
            .filter(|c| seen.insert(c.intersection_id))
            .copied()
            .collect()
    }

    pub fn top1_correct(&self, radius: f64) -> bool {
        self.candidates
            .first()
            .is_some_and(|c| verify_match(self.observed, &self.truth_center, c.position, radius))
    }
}

/// Fraction of queries with a verified candidate among the first `n`
/// distinct intersections. `None` without queries.
pub fn recall_at_top_n(queries: &[RankedQuery], n: usize, radius: f64) -> Option<f64> {
    if queries.is_empty() {
        return None;
    }
    let hits = queries
        .iter()
        .filter(|q| {
            q.distinct()
                .iter()
                .take(n)
                .any(|c| verify_match(q.observed, &q.truth_center, c.position, radius))
        })
        .count();
    Some(hits as f64 / queries.len() as f64)
}

/// Top-1 outcome of one query; `hamming` is `None` when nothing was retrieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrEntry {
    pub hamming: Option<u32>,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: u32,
    /// `None` when no query is accepted at this threshold.
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Precision and recall of the top-1 decision for each threshold (ascending).
pub fn precision_recall_curve(entries: &[PrEntry], thresholds: &[u32]) -> Result<Vec<PrPoint>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Input("thresholds must be sorted ascending".into()));
    }
    let total = entries.len();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let accepted: Vec<&PrEntry> = entries
                .iter()
                .filter(|e| e.hamming.is_some_and(|h| h <= t))
                .collect();
            let good = accepted.iter().filter(|e| e.correct).count();
            PrPoint {
                threshold: t,
                precision: (!accepted.is_empty()).then(|| good as f64 / accepted.len() as f64),
                recall: if total == 0 { 0.0 } else { good as f64 / total as f64 },
            }
        })
        .collect())
}

/// Fraction of frames whose estimate lies within `k` meters of the truth.
/// Frames without an estimate count as failures. `None` without frames.
pub fn recall_at_km(estimates: &[Option<Point2>], truth: &[Point2], k: f64) -> Result<Option<f64>> {
    if estimates.len() != truth.len() {
        return Err(Error::Input(format!(
            "{} estimates for {} ground-truth frames",
            estimates.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(None);
    }
    let hits = estimates
        .iter()
        .zip(truth)
        .filter(|(e, t)| e.is_some_and(|e| e.distance(**t) < k))
        .count();
    Ok(Some(hits as f64 / truth.len() as f64))
}

/// Mean of per-sequence values weighted by frame count.
pub fn frame_weighted_mean(items: &[(usize, f64)]) -> Option<f64> {
    let frames: usize = items.iter().map(|(n, _)| n).sum();
    if frames == 0 {
        return None;
    }
    Some(items.iter().map(|&(n, v)| n as f64 * v).sum::<f64>() / frames as f64)
}
