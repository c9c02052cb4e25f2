//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::{PI, TAU};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use interkey::descriptor::{
    build_pattern, describe, refine_intersection, Branch, DescribeMode, Descriptor, DescriptorSource,
};
use interkey::eval::{
    evaluate_sequence, frame_weighted_mean, generate_scenario, precision_recall_curve, recall_at_km,
    recall_at_top_n, ranked_queries, Candidate, NoiseSpec, PrEntry, RankedQuery, ScenarioSpec,
};
use interkey::localizer::{georeference, run_localization};
use interkey::matchdb::{DescriptorDatabase, IntersectionRecord};
use interkey::osm::{build_database, collect_intersections, intersection_imprints, BuildingSet, IntersectionNode, OsmMap, RoadGraph};
use interkey::raster::pgm::{encode_meta, encode_pgm, load_imprint, meta_path, save_imprint};
use interkey::raster::{normalize_angle, GridImage, PixelPoint, Point2, Pose2};
use interkey::Config;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// 1 ------------------------------------------------------------------------

fn descriptor_size() -> Outcome {
    let cfg = Config::default();
    let pattern = build_pattern(
        cfg.descriptor_outer_radius_m,
        cfg.pattern_rings,
        cfg.pattern_base_cells,
    )
    .unwrap();
    let d = Descriptor::zeros(cfg.descriptor_bits(), DescriptorSource::Observed { window: 0 });
    let bytes = d.to_bytes().len();
    outcome(
        cfg.descriptor_bits() == 288 && pattern.len() == 288 && bytes == 36,
        format!("Q = {} bits, pattern {} cells, {} bytes", cfg.descriptor_bits(), pattern.len(), bytes),
    )
}

// 2 ------------------------------------------------------------------------

fn cell_area_law() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut worst_law = 0.0f64;
    let mut ratio_ok = true;
    let mut default_ratio = 0.0;
    for (r_o, n_r, n_b) in [(40.0, 8, 8), (25.0, 3, 6), (60.0, 12, 5), (10.0, 1, 4)] {
        let p = build_pattern(r_o, n_r, n_b).unwrap();
        let kappa = PI * r_o * r_o / (n_b as f64 * (n_r * n_r) as f64);
        let total: f64 = (1..=n_r).map(|i| (n_b * i) as f64 * p.cell_area(i)).sum();
        worst_sum = worst_sum.max((total - PI * r_o * r_o).abs() / (PI * r_o * r_o));
        for i in 1..=n_r {
            let law = kappa * (2.0 - 1.0 / i as f64);
            let (ri, ro) = (r_o * (i - 1) as f64 / n_r as f64, r_o * i as f64 / n_r as f64);
            let annulus = PI * (ro * ro - ri * ri) / (n_b * i) as f64;
            worst_law = worst_law.max((p.cell_area(i) - law).abs() / law).max((annulus - law).abs() / law);
        }
        let areas: Vec<f64> = (1..=n_r).map(|i| p.cell_area(i)).collect();
        let max = areas.iter().cloned().fold(f64::MIN, f64::max);
        let min = areas.iter().cloned().fold(f64::MAX, f64::min);
        let ratio = max / min;
        ratio_ok &= (ratio - (2.0 - 1.0 / n_r as f64)).abs() < 1e-9;
        if n_r == 8 {
            default_ratio = ratio;
        }
    }
    outcome(
        worst_sum < 1e-9 && worst_law < 1e-9 && ratio_ok && (default_ratio - 1.875).abs() < 1e-12,
        format!(
            "max rel. error of area sum {worst_sum:.1e}, of a_i law {worst_law:.1e}; default max/min ratio {default_ratio:.6}"
        ),
    )
}

// 3 ------------------------------------------------------------------------

fn rotate(p: Point2, angle: f64) -> Point2 {
    let (s, c) = angle.sin_cos();
    Point2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

struct Scene {
    branch_ends: Vec<Point2>,
    buildings: Vec<Vec<Point2>>,
}

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let angles = loop {
        let n = rng.random_range(3..=5);
        let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        a.sort_by(f64::total_cmp);
        let gaps_ok = (0..n).all(|i| {
            let next = if i + 1 < n { a[i + 1] } else { a[0] + TAU };
            next - a[i] > 35f64.to_radians()
        });
        let sum = a.iter().fold(Point2::default(), |s, t| s + Point2::new(t.cos(), t.sin()));
        if gaps_ok && sum.norm() > 0.5 {
            break a;
        }
    };
    let branch_ends: Vec<Point2> = angles.iter().map(|t| Point2::new(80.0 * t.cos(), 80.0 * t.sin())).collect();
    let mut buildings = Vec::new();
    for _ in 0..rng.random_range(3..=7) {
        for _attempt in 0..20 {
            let d = rng.random_range(14.0..36.0);
            let phi = rng.random_range(0.0..TAU);
            let c = Point2::new(d * phi.cos(), d * phi.sin());
            let (w, h) = (rng.random_range(5.0..12.0), rng.random_range(5.0..12.0));
            let half_diag = 0.5 * f64::hypot(w, h);
            let clear = branch_ends.iter().all(|e| {
                let dir = *e * (1.0 / e.norm());
                let t = c.dot(dir).max(0.0);
                (c - dir * t).norm() > half_diag + 5.0
            });
            if !clear {
                continue;
            }
            let rot = rng.random_range(0.0..TAU);
            let corners = [(-w, -h), (w, -h), (w, h), (-w, h)]
                .iter()
                .map(|&(x, y)| c + rotate(Point2::new(0.5 * x, 0.5 * y), rot))
                .collect();
            buildings.push(corners);
            break;
        }
    }
    Scene {
        branch_ends,
        buildings,
    }
}

fn describe_scene(scene: &Scene, angle: f64, cfg: &Config) -> Option<Descriptor> {
    let mut roads = RoadGraph::new();
    roads.add_node(0, Point2::default());
    for (i, e) in scene.branch_ends.iter().enumerate() {
        roads.add_node(i as i64 + 1, rotate(*e, angle));
        roads.add_edge(0, i as i64 + 1);
    }
    let buildings = BuildingSet {
        polygons: scene
            .buildings
            .iter()
            .map(|p| p.iter().map(|&v| rotate(v, angle)).collect())
            .collect(),
    };
    let map = OsmMap {
        roads,
        buildings,
        origin: (0.0, 0.0),
    };
    let node = IntersectionNode {
        id: 0,
        position: Point2::default(),
        degree: scene.branch_ends.len(),
    };
    let (road, building) = intersection_imprints(&map, &node, cfg).ok()?;
    let d = describe(
        &road,
        &building,
        road.center_pixel(),
        cfg,
        DescribeMode::Query,
        DescriptorSource::Map { intersection_id: 0 },
    )
    .ok()?;
    d.descriptors.into_iter().next()
}

fn rotation_invariance() -> Outcome {
    let start = Instant::now();
    let cfg = Config::default();
    let step = TAU / (cfg.pattern_base_cells * cfg.pattern_rings) as f64;
    let tolerance = (0.05 * cfg.descriptor_bits() as f64).floor() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut scenes, mut identical, mut failed) = (0, 0, 0);
    let mut worst_step = 0u32;
    let mut worst_free = 0u32;
    let mut free_ok = 0;
    while scenes < 100 {
        let scene = random_scene(&mut rng);
        let Some(base) = describe_scene(&scene, 0.0, &cfg) else {
            failed += 1;
            continue;
        };
        scenes += 1;
        let k = rng.random_range(1..(TAU / step).round() as i32);
        let free = rng.random_range(0.0..TAU);
        match describe_scene(&scene, k as f64 * step, &cfg) {
            Some(d) => {
                let h = base.hamming(&d).unwrap();
                worst_step = worst_step.max(h);
                identical += usize::from(h == 0);
            }
            None => worst_step = u32::MAX,
        }
        match describe_scene(&scene, free, &cfg) {
            Some(d) => {
                let h = base.hamming(&d).unwrap();
                worst_free = worst_free.max(h);
                free_ok += usize::from(h <= tolerance);
            }
            None => worst_free = u32::MAX,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        identical == scenes && free_ok == scenes && within(elapsed, 30.0),
        format!(
            "{scenes} asymmetric scenes ({failed} undescribable redrawn): {identical}/{scenes} bit-identical under k*{:.3} deg rotations (worst {worst_step} bits); {free_ok}/{scenes} within {tolerance} bits under free rotations (worst {worst_free}); {:.1} s",
            step.to_degrees(),
            elapsed.as_secs_f64()
        ),
    )
}

// 4 ------------------------------------------------------------------------

/// Brute-force reference: scans the full bounding square of the disk.
fn refine_oracle(branches: &[Branch], rho: PixelPoint, radius: f64, side: usize) -> PixelPoint {
    let mut pixels = Vec::new();
    for v in 0..side as i64 {
        if (v as f64 - rho.v).abs() > radius + 1.0 {
            continue;
        }
        for u in 0..side as i64 {
            let (du, dv) = (u as f64 - rho.u, v as f64 - rho.v);
            if du * du + dv * dv > radius * radius {
                continue;
            }
            let cost: f64 = branches
                .iter()
                .map(|b| {
                    let (ex, ey) = (b.centroid.u - b.start.u, b.centroid.v - b.start.v);
                    let len = (ex * ex + ey * ey).sqrt();
                    let (ex, ey) = if len == 0.0 { (1.0, 0.0) } else { (ex / len, ey / len) };
                    let (px, py) = (u as f64 - b.start.u, v as f64 - b.start.v);
                    let d = px * ey - py * ex;
                    d * d
                })
                .sum();
            pixels.push((u, v, cost));
        }
    }
    let best = pixels.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let mut tied: Vec<(f64, i64, i64)> = pixels
        .into_iter()
        .filter(|p| p.2 <= best + best * 1e-9 + 1e-12)
        .map(|(u, v, _)| {
            let (du, dv) = (u as f64 - rho.u, v as f64 - rho.v);
            (du * du + dv * dv, v, u)
        })
        .collect();
    tied.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    PixelPoint::new(tied[0].2 as f64, tied[0].1 as f64)
}

fn branch(start: (f64, f64), centroid: (f64, f64)) -> Branch {
    Branch {
        start: PixelPoint::new(start.0, start.1),
        centroid: PixelPoint::new(centroid.0, centroid.1),
        orientation: Point2::new(1.0, 0.0),
        pixels: Vec::new(),
    }
}

fn refinement_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = Config::default();
    let side = cfg.side_px();
    let radius = cfg.discrepant_radius_m / cfg.resolution_m_per_px;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agree = 0;
    let mut ties = 0;
    for case in 0..50 {
        let rho = PixelPoint::new(rng.random_range(300..450) as f64, rng.random_range(300..450) as f64);
        let meet = (rho.u + rng.random_range(-40.0..40.0), rho.v + rng.random_range(-40.0..40.0));
        let n = rng.random_range(2..=5);
        let branches: Vec<Branch> = (0..n)
            .map(|i| {
                let t = rng.random_range(0.0..TAU);
                let (c, s) = (t.cos(), t.sin());
                match case % 5 {
                    // parallel lines: a band of tied pixels
                    0 => {
                        let off = if i % 2 == 0 { 3.0 } else { -3.0 };
                        let base = (meet.0 - off * 0.6, meet.1 + off * 0.8);
                        branch((base.0 + 70.0 * 0.8, base.1 + 70.0 * 0.6), (base.0 + 150.0 * 0.8, base.1 + 150.0 * 0.6))
                    }
                    // every line through one integer pixel
                    1 => {
                        let p = (meet.0.round(), meet.1.round());
                        branch((p.0 + 62.5 * c, p.1 + 62.5 * s), (p.0 + 150.0 * c, p.1 + 150.0 * s))
                    }
                    _ => {
                        let wobble = rng.random_range(-4.0..4.0);
                        branch(
                            (meet.0 + 62.5 * c - wobble * s, meet.1 + 62.5 * s + wobble * c),
                            (meet.0 + 160.0 * c, meet.1 + 160.0 * s),
                        )
                    }
                }
            })
            .collect();
        let got = refine_intersection(&branches, rho, radius, side);
        let want = refine_oracle(&branches, rho, radius, side);
        agree += usize::from(got == want);
        ties += usize::from(case % 5 < 2);
    }
    let elapsed = start.elapsed();
    outcome(
        agree == 50 && within(elapsed, 30.0),
        format!(
            "{agree}/50 configurations identical to the brute-force scan ({ties} built with tied minima); {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn random_pose(rng: &mut ChaCha8Rng) -> Pose2 {
    Pose2::new(
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
        rng.random_range(-PI..PI),
    )
}

struct NoiseFreeRun {
    scenario: interkey::eval::Scenario,
    db: DescriptorDatabase,
    run: interkey::localizer::LocalizationRun,
    elapsed: Duration,
}

fn noise_free_run() -> NoiseFreeRun {
    let start = Instant::now();
    let cfg = Config::default();
    let scenario = generate_scenario(&ScenarioSpec::default()).unwrap();
    let (db, _) = build_database(&scenario.roads, &scenario.buildings, &cfg).unwrap();
    let run = run_localization(&scenario.frames, &db, &cfg).unwrap();
    NoiseFreeRun {
        scenario,
        db,
        run,
        elapsed: start.elapsed(),
    }
}

fn georeferencing(nf: &NoiseFreeRun) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_pos, mut worst_rot) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (g_lc, lc_i, lc_lk) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
        let g_y = g_lc.compose(&lc_i);
        let est = georeference(&g_y, 0, &lc_i, &lc_lk, 50).unwrap();
        let truth = g_lc.compose(&lc_lk);
        worst_pos = worst_pos.max(est.translation().distance(truth.translation()));
        worst_rot = worst_rot.max(normalize_angle(est.theta - truth.theta).abs());
    }
    let exact_elapsed = start.elapsed();

    // Rasterized observation: detected refined point, exact map pose, exact
    // heading and odometry.
    let s = &nf.scenario;
    let nodes = collect_intersections(&s.roads);
    let mut worst_raster = 0.0f64;
    let mut checked = 0;
    for q in &nf.run.queries {
        let truth_c = s.truth.poses[q.center_frame];
        let seen = truth_c.transform_point(q.observed_local);
        let node = nodes
            .iter()
            .min_by(|a, b| a.position.distance(seen).total_cmp(&b.position.distance(seen)))
            .unwrap();
        let heading = 0.3;
        let g_y = Pose2::from_parts(node.position, heading);
        let lc_i = Pose2::from_parts(q.observed_local, heading - truth_c.theta);
        let odom = s.frames[q.center_frame]
            .pose
            .inverse()
            .compose(&s.frames[q.newest_frame].pose);
        let est = georeference(&g_y, 0, &lc_i, &odom, 50).unwrap();
        let err = est.translation().distance(s.truth.poses[q.newest_frame].translation());
        worst_raster = worst_raster.max(err);
        checked += 1;
    }
    let mut fix_errors: Vec<f64> = nf
        .run
        .fixes
        .iter()
        .map(|f| f.global_pose.translation().distance(s.truth.poses[f.frame_index].translation()))
        .collect();
    fix_errors.sort_by(f64::total_cmp);
    let median = fix_errors.get(fix_errors.len() / 2).copied().unwrap_or(f64::NAN);
    let max = fix_errors.last().copied().unwrap_or(f64::NAN);
    let bound = 2.0 * Config::default().resolution_m_per_px;
    outcome(
        worst_pos <= 1e-9 && worst_rot <= 1e-9 && checked > 0 && worst_raster <= bound && within(exact_elapsed, 10.0),
        format!(
            "1000 exact triples: worst {worst_pos:.1e} m / {worst_rot:.1e} rad; rasterized refined point over {checked} detections: worst {worst_raster:.3} m (bound {bound:.2} m); full-pipeline fixes (estimated heading) median {median:.2} m, max {max:.2} m"
        ),
    )
}

// 6 ------------------------------------------------------------------------

fn cross_modal(nf: &NoiseFreeRun) -> Outcome {
    let s = &nf.scenario;
    let cfg = Config::default();
    let intersections = collect_intersections(&s.roads).len();
    let queries = ranked_queries(&nf.run, &nf.db, &s.truth).unwrap();
    let top1 = recall_at_top_n(&queries, 1, 5.0);
    let worst = queries.iter().filter_map(|q| q.candidates.first()).map(|c| c.hamming).max();
    let accepted_ok = queries
        .iter()
        .all(|q| q.candidates.first().is_some_and(|c| c.hamming <= cfg.match_threshold));
    outcome(
        intersections >= 30 && top1 == Some(1.0) && accepted_ok && within(nf.elapsed, 120.0),
        format!(
            "{intersections} intersections, {} queries, Recall@Top1 {}, worst top-1 Hamming {} (tau_h {}), {} fixes; {:.1} s",
            queries.len(),
            top1.map_or("n/a".to_string(), |v| format!("{v:.3}")),
            worst.map_or("n/a".to_string(), |v| v.to_string()),
            cfg.match_threshold,
            nf.run.fixes.len(),
            nf.elapsed.as_secs_f64()
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn noise_robustness() -> Outcome {
    let start = Instant::now();
    let cfg = Config::default();
    let noise = NoiseSpec {
        position_jitter_m: 1.0,
        road_dropout: 0.1,
        building_occlusion: 0.2,
        heading_noise_rad: 0.0,
    };
    let mut reports = Vec::new();
    for seed in 1..=4 {
        let spec = ScenarioSpec {
            seed,
            noise,
            ..ScenarioSpec::default()
        };
        let s = generate_scenario(&spec).unwrap();
        let (db, _) = build_database(&s.roads, &s.buildings, &cfg).unwrap();
        let run = run_localization(&s.frames, &db, &cfg).unwrap();
        let queries = ranked_queries(&run, &db, &s.truth).unwrap();
        let est: Vec<Option<Point2>> = run.trajectory.iter().map(|p| p.map(|p| p.translation())).collect();
        reports.push(
            evaluate_sequence(&format!("seed {seed}"), &est, &s.truth, Some(&queries), &[cfg.match_threshold], Some(noise))
                .unwrap(),
        );
    }
    let pick = |f: &dyn Fn(&interkey::eval::SequenceReport) -> Option<f64>| {
        frame_weighted_mean(&reports.iter().filter_map(|r| f(r).map(|v| (r.frames, v))).collect::<Vec<_>>())
    };
    let top1 = pick(&|r| r.recall_at_top["1"]).unwrap_or(0.0);
    let at5 = pick(&|r| r.recall_at_m["5"]).unwrap_or(0.0);
    let per_seed: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "{}: top1 {:.2} r5m {:.2}",
                r.name,
                r.recall_at_top["1"].unwrap_or(0.0),
                r.recall_at_m["5"].unwrap_or(0.0)
            )
        })
        .collect();
    let elapsed = start.elapsed();
    outcome(
        top1 >= 0.8 && at5 >= 0.6 && within(elapsed, 300.0),
        format!(
            "sigma 1 m, 20% facade occlusion, 10% road dropout, frame-weighted over 4 seeds: Recall@Top1 {top1:.3}, Recall@5m {at5:.3} [{}]; {:.1} s",
            per_seed.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn metric_fixtures() -> Outcome {
    let cand = |id: i64, x: f64| Candidate {
        intersection_id: id,
        hamming: 0,
        position: Point2::new(x, 0.0),
    };
    let query = |c: Vec<Candidate>| RankedQuery {
        truth_center: Pose2::IDENTITY,
        observed: Point2::default(),
        candidates: c,
    };
    let qs = vec![
        query(vec![cand(1, 0.0), cand(2, 90.0)]),
        query(vec![cand(2, 90.0), cand(3, 80.0), cand(1, 0.0)]),
        query(vec![cand(1, 1.0)]),
        query(vec![cand(2, 90.0)]),
    ];
    let topn_ok = recall_at_top_n(&qs, 1, 5.0) == Some(0.5)
        && recall_at_top_n(&qs, 2, 5.0) == Some(0.5)
        && recall_at_top_n(&qs, 3, 5.0) == Some(0.75)
        && recall_at_top_n(&[], 1, 5.0).is_none();

    let e = |h, c| PrEntry { hamming: Some(h), correct: c };
    let curve = precision_recall_curve(&[e(3, true), e(10, true), e(20, false), e(30, true)], &[0, 3, 10, 20, 30]).unwrap();
    let pr: Vec<(Option<f64>, f64)> = curve.iter().map(|p| (p.precision, p.recall)).collect();
    let pr_ok = pr
        == vec![
            (None, 0.0),
            (Some(1.0), 0.25),
            (Some(1.0), 0.5),
            (Some(2.0 / 3.0), 0.5),
            (Some(0.75), 0.75),
        ];

    let truth: Vec<Point2> = (0..10).map(|i| Point2::new(10.0 * i as f64, 0.0)).collect();
    let est: Vec<Option<Point2>> = truth
        .iter()
        .enumerate()
        .map(|(i, p)| match i {
            0..=6 => Some(*p + Point2::new(0.0, 4.0)),
            7 => Some(*p + Point2::new(6.0, 0.0)),
            8 => None,
            _ => Some(*p + Point2::new(3.0, 4.0)),
        })
        .collect();
    let km_ok = recall_at_km(&est, &truth, 5.0).unwrap() == Some(0.7)
        && recall_at_km(&vec![None; 10], &truth, 5.0).unwrap() == Some(0.0);
    outcome(
        topn_ok && pr_ok && km_ok,
        format!("Recall@TopN {topn_ok}, PR curve {pr_ok}, Recall@Km {km_ok}"),
    )
}

// 9 ------------------------------------------------------------------------

fn naive_hamming(a: &Descriptor, b: &Descriptor) -> u32 {
    (0..a.len()).filter(|&i| a.get(i) != b.get(i)).count() as u32
}

fn random_descriptor(rng: &mut ChaCha8Rng, bits: usize, id: i64) -> Descriptor {
    let mut d = Descriptor::zeros(bits, DescriptorSource::Map { intersection_id: id });
    let density = rng.random_range(0.05..0.6);
    for i in 0..bits {
        d.set(i, rng.random_bool(density));
    }
    d
}

fn matching_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = Config::default();
    let bits = cfg.descriptor_bits();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut db = DescriptorDatabase::new(cfg.fingerprint(), bits);
    for i in 0..100 {
        // ids repeat so that id and insertion-order tie-breaks both matter
        let id = rng.random_range(0..40);
        let d = if i > 0 && i % 10 == 0 {
            db.records()[i - 1].descriptor.clone()
        } else {
            random_descriptor(&mut rng, bits, id)
        };
        db.push(IntersectionRecord {
            intersection_id: id,
            global_pose: Pose2::IDENTITY,
            descriptor: d,
        })
        .unwrap();
    }
    let (mut pairs, mut pair_ok, mut order_ok) = (0, 0, 0);
    for _ in 0..100 {
        let q = random_descriptor(&mut rng, bits, 0);
        let mut naive: Vec<(u32, i64, usize)> = db
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| (naive_hamming(&q, &r.descriptor), r.intersection_id, i))
            .collect();
        for (r, n) in db.records().iter().zip(&naive) {
            pairs += 1;
            pair_ok += usize::from(q.hamming(&r.descriptor).unwrap() == n.0);
        }
        naive.sort();
        let top_n = rng.random_range(1..=100);
        let got: Vec<(u32, i64, usize)> = db
            .query(&q, top_n)
            .unwrap()
            .iter()
            .map(|m| (m.hamming, m.intersection_id, m.index))
            .collect();
        order_ok += usize::from(got[..] == naive[..top_n]);
    }
    let elapsed = start.elapsed();
    outcome(
        pairs == 10_000 && pair_ok == pairs && order_ok == 100 && within(elapsed, 30.0),
        format!(
            "{pair_ok}/{pairs} packed distances equal the per-bit count; {order_ok}/100 rankings identical; {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

// 10 -----------------------------------------------------------------------

fn round_trips() -> Outcome {
    let cfg = Config::default();
    let bits = cfg.descriptor_bits();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut db = DescriptorDatabase::new(cfg.fingerprint(), bits);
    for id in 0..25 {
        let mut d = random_descriptor(&mut rng, bits, id);
        d.refined_point = PixelPoint::new(rng.random_range(300.0..450.0), rng.random_range(300.0..450.0));
        d.refined_local = Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let t: f64 = rng.random_range(-PI..PI);
        d.orientation = Point2::new(t.cos(), t.sin());
        db.push(IntersectionRecord {
            intersection_id: id,
            global_pose: random_pose(&mut rng),
            descriptor: d,
        })
        .unwrap();
    }
    let dir = std::env::temp_dir().join(format!("interkey-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let db_path = dir.join("map.ikdb");
    db.save(&db_path).unwrap();
    let loaded = DescriptorDatabase::load(&db_path).unwrap();
    let db_ok = loaded == db && loaded.to_bytes() == std::fs::read(&db_path).unwrap();

    let mut img = GridImage::new(cfg.side_px(), cfg.resolution_m_per_px, Pose2::new(12.5, -3.25, 0.7)).unwrap();
    for _ in 0..5000 {
        img.set(rng.random_range(0..img.side()), rng.random_range(0..img.side()), true);
    }
    let pgm_path = dir.join("imprint.pgm");
    save_imprint(&img, &pgm_path).unwrap();
    let back = load_imprint(&pgm_path).unwrap();
    let img_ok = back == img
        && encode_pgm(&back) == std::fs::read(&pgm_path).unwrap()
        && encode_meta(&back).as_bytes() == std::fs::read(meta_path(&pgm_path)).unwrap();
    std::fs::remove_dir_all(&dir).ok();
    outcome(
        db_ok && img_ok,
        format!(".ikdb with {} records {db_ok}; PGM + metadata {img_ok}", db.len()),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut run = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let r = f();
        println!(
            "criterion {id:>2} [{}] {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        results.push((id, name, r));
    };
    run(1, "descriptor size", &descriptor_size);
    run(2, "cell-area partition", &cell_area_law);
    run(3, "rotation invariance", &rotation_invariance);
    run(4, "refinement oracle", &refinement_oracle);
    let nf = noise_free_run();
    run(5, "georeferencing", &|| georeferencing(&nf));
    run(6, "cross-modal self-consistency", &|| cross_modal(&nf));
    run(7, "noise robustness", &noise_robustness);
    run(8, "metric fixtures", &metric_fixtures);
    run(9, "matching oracle", &matching_oracle);
    run(10, "round trips", &round_trips);
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.2.pass)
        .map(|r| format!("{} ({})", r.0, r.1))
        .collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
