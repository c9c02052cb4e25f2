//! Match gating and georeferencing of the vehicle pose.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::descriptor::{describe, DescribeMode, Descriptor, DescriptorSource};
use crate::error::{Error, Result};
use crate::matchdb::{DescriptorDatabase, MatchResult};
use crate::raster::{Point2, Pose2};
use crate::scan::{observe_window, select_keyframes, sliding_windows, SemanticFrame};

/// Candidates kept per query for ranking metrics.
pub const QUERY_CANDIDATES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFix {
    /// Frame index of the newest keyframe of the window (`L_k`).
    pub frame_index: usize,
    pub t: f64,
    /// `T_{G L_k}`.
    #[serde(rename = "pose", with = "crate::raster::pose::xyt")]
    pub global_pose: Pose2,
    pub intersection_id: i64,
    pub hamming: u32,
    /// `T_{G L_c}` implied by the match.
    #[serde(skip)]
    pub window_center_pose: Pose2,
}

/// `T_{G L_k} = T_{G Y} * T_{L_c I}^-1 * T_{L_c L_k}`, or `None` when the
/// match is farther than `tau_h`.
pub fn georeference(
    map_pose: &Pose2,
    hamming: u32,
    obs_pose_in_lc: &Pose2,
    odom_lc_to_lk: &Pose2,
    tau_h: u32,
) -> Option<Pose2> {
    if hamming > tau_h {
        return None;
    }
    Some(map_pose.compose(&obs_pose_in_lc.inverse()).compose(odom_lc_to_lk))
}

/// A described window and its ranked database candidates.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub window: usize,
    pub center_frame: usize,
    pub newest_frame: usize,
    /// Refined intersection point in `L_c` meters.
    pub observed_local: Point2,
    /// `T_{L_c I}`: refined point plus characteristic heading.
    pub observed_pose: Pose2,
    pub descriptor: Descriptor,
    pub candidates: Vec<MatchResult>,
}

#[derive(Debug, Clone, Default)]
pub struct LocalizationRun {
    pub keyframes: usize,
    pub windows: usize,
    /// Windows with a detection inside the gate.
    pub detections: usize,
    pub queries: Vec<QueryOutcome>,
    pub fixes: Vec<LocalizationFix>,
    /// Per-frame global pose; `None` before the first fix.
    pub trajectory: Vec<Option<Pose2>>,
}

fn query_window(
    frames: &[SemanticFrame],
    window_index: usize,
    window: &crate::scan::KeyframeWindow,
    db: &DescriptorDatabase,
    cfg: &Config,
) -> Result<Option<QueryOutcome>> {
    let Some(obs) = observe_window(frames, window, cfg)? else {
        return Ok(None);
    };
    if obs.position_local.norm() > cfg.detection_gate() {
        return Ok(None);
    }
    let source = DescriptorSource::Observed { window: window_index };
    let desc = match describe(
        &obs.road_imprint,
        &obs.building_imprint,
        obs.position,
        cfg,
        DescribeMode::Query,
        source,
    ) {
        Ok(d) => d,
        Err(Error::DegenerateIntersection { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let descriptor = desc
        .descriptors
        .into_iter()
        .next()
        .expect("query mode yields one descriptor");
    let candidates = db.query(&descriptor, QUERY_CANDIDATES)?;
    Ok(Some(QueryOutcome {
        window: window_index,
        center_frame: window.center_frame(),
        newest_frame: window.newest_frame(),
        observed_local: descriptor.refined_local,
        observed_pose: Pose2::from_parts(descriptor.refined_local, descriptor.heading()),
        descriptor,
        candidates,
    }))
}

/// Runs detection, description, retrieval and georeferencing over a frame
/// stream. Windows are evaluated independently; fixes are then applied in
/// stream order and frames between fixes are dead-reckoned from the latest
/// fix with odometry.
pub fn run_localization(
    frames: &[SemanticFrame],
    db: &DescriptorDatabase,
    cfg: &Config,
) -> Result<LocalizationRun> {
    cfg.validate()?;
    db.check_fingerprint(&cfg.fingerprint())?;
    let keyframes = select_keyframes(frames, cfg.keyframe_distance_m, cfg.keyframe_heading_rad());
    let windows = sliding_windows(&keyframes, cfg.keyframe_window);
    let outcomes: Vec<Option<QueryOutcome>> = windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| query_window(frames, i, w, db, cfg))
        .collect::<Result<_>>()?;
    let queries: Vec<QueryOutcome> = outcomes.into_iter().flatten().collect();

    let mut fixes = Vec::new();
    for q in &queries {
        let Some(best) = q.candidates.first() else {
            continue;
        };
        let record = db.record(best);
        let odom = frames[q.center_frame]
            .pose
            .inverse()
            .compose(&frames[q.newest_frame].pose);
        if let Some(pose) = georeference(
            &record.global_pose,
            best.hamming,
            &q.observed_pose,
            &odom,
            cfg.match_threshold,
        ) {
            fixes.push(LocalizationFix {
                frame_index: q.newest_frame,
                t: frames[q.newest_frame].t,
                global_pose: pose,
                intersection_id: best.intersection_id,
                hamming: best.hamming,
                window_center_pose: record.global_pose.compose(&q.observed_pose.inverse()),
            });
        }
    }

    let mut trajectory = vec![None; frames.len()];
    let mut anchor: Option<(usize, Pose2)> = None;
    let mut next_fix = 0;
    for (i, f) in frames.iter().enumerate() {
        while next_fix < fixes.len() && fixes[next_fix].frame_index == i {
            anchor = Some((i, fixes[next_fix].global_pose));
            next_fix += 1;
        }
        if let Some((k, pose)) = anchor {
            trajectory[i] = Some(pose.compose(&frames[k].pose.inverse().compose(&f.pose)));
        }
    }

    Ok(LocalizationRun {
        keyframes: keyframes.len(),
        windows: windows.len(),
        detections: queries.len(),
        queries,
        fixes,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn fix_line_format() {
        let fix = LocalizationFix {
            frame_index: 3,
            t: 0.5,
            global_pose: Pose2::new(1.0, 2.0, 0.25),
            intersection_id: 7,
            hamming: 12,
            window_center_pose: Pose2::IDENTITY,
        };
        let text = serde_json::to_string(&fix).unwrap();
        assert_eq!(
            text,
            r#"{"frame_index":3,"t":0.5,"pose":[1.0,2.0,0.25],"intersection_id":7,"hamming":12}"#
        );
        let back: LocalizationFix = serde_json::from_str(&text).unwrap();
        assert_eq!(back.global_pose, fix.global_pose);
    }

    #[test]
    fn identity_chain() {
        let p = georeference(&Pose2::IDENTITY, 0, &Pose2::IDENTITY, &Pose2::IDENTITY, 50).unwrap();
        assert_eq!(p, Pose2::IDENTITY);
    }

    #[test]
    fn hand_composed_example() {
        let p = georeference(
            &Pose2::new(100.0, 50.0, FRAC_PI_2),
            10,
            &Pose2::new(10.0, 0.0, 0.0),
            &Pose2::IDENTITY,
            50,
        )
        .unwrap();
        assert!((p.x - 100.0).abs() < 1e-9 && (p.y - 40.0).abs() < 1e-9);
        assert!((p.theta - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn gate_rejects_above_threshold() {
        assert!(georeference(&Pose2::IDENTITY, 51, &Pose2::IDENTITY, &Pose2::IDENTITY, 50).is_none());
        assert!(georeference(&Pose2::IDENTITY, 50, &Pose2::IDENTITY, &Pose2::IDENTITY, 50).is_some());
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-500.0..500.0f64, -500.0..500.0f64, -3.2..3.2f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn exact_inputs_recover_truth(g_lc in pose(), lc_i in pose(), lc_lk in pose()) {
            // the map intersection pose is what the observation implies
            let g_y = g_lc.compose(&lc_i);
            let est = georeference(&g_y, 0, &lc_i, &lc_lk, 50).unwrap();
            let truth = g_lc.compose(&lc_lk);
            prop_assert!((est.x - truth.x).abs() < 1e-9 && (est.y - truth.y).abs() < 1e-9);
            prop_assert!(crate::raster::normalize_angle(est.theta - truth.theta).abs() < 1e-9);
        }

        #[test]
        fn lower_threshold_never_adds_fixes(h in 0u32..300, t1 in 0u32..300, t2 in 0u32..300) {
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let a = georeference(&Pose2::IDENTITY, h, &Pose2::IDENTITY, &Pose2::IDENTITY, lo).is_some();
            let b = georeference(&Pose2::IDENTITY, h, &Pose2::IDENTITY, &Pose2::IDENTITY, hi).is_some();
            prop_assert!(!a || b);
        }
    }
}
