//! `interkey`: build intersection databases from OpenStreetMap, describe and
//! match intersections, localize scan streams, evaluate and render results.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use interkey::descriptor::{build_pattern, describe, DescribeMode, Description, DescriptionDump, Descriptor, DescriptorSource};
use interkey::eval::{
    aggregate, default_thresholds, evaluate_sequence, generate_scenario, pr_csv, read_estimates, read_matches,
    write_matches, write_osm, write_trajectory, GroundTruth, RankedQuery, ScenarioSpec, EXPORT_ORIGIN,
};
use interkey::localizer::run_localization;
use interkey::matchdb::{DescriptorDatabase, MatchDump};
use interkey::osm::{build_database, collect_intersections, intersection_imprints, parse_osm};
use interkey::raster::pgm::{load_imprint, save_imprint};
use interkey::raster::GridImage;
use interkey::render::{render_database, render_matches, render_view, Overlay};
use interkey::scan::{detect_intersection, load_frames, observe_window, select_keyframes, sliding_windows, write_frames};
use interkey::Config;

#[derive(Parser)]
#[command(name = "interkey", version, about = "Cross-modal intersection descriptors for OSM-based localization")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Parameter file of key=value lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one parameter; repeatable, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Describe every OSM intersection and write a descriptor database.
    BuildDb {
        #[arg(long, value_name = "FILE")]
        osm: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Describe one intersection from a map, a scan window or imprint files.
    Describe {
        /// OSM extract; select the intersection with --node.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["frames", "road"])]
        osm: Option<PathBuf>,
        #[arg(long, requires = "osm")]
        node: Option<i64>,
        /// Frame stream; select the keyframe window with --window.
        #[arg(long, value_name = "FILE", conflicts_with = "road")]
        frames: Option<PathBuf>,
        #[arg(long, requires = "frames")]
        window: Option<usize>,
        /// Road imprint PGM (with its .meta sidecar).
        #[arg(long, value_name = "FILE", requires = "building")]
        road: Option<PathBuf>,
        /// Building imprint PGM (with its .meta sidecar).
        #[arg(long, value_name = "FILE", requires = "road")]
        building: Option<PathBuf>,
        /// Orientation handling; defaults to database for maps, query otherwise.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Output JSON; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Also save the road and building imprints into this directory.
        #[arg(long, value_name = "DIR")]
        imprints: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Rank database records against query descriptors.
    Match {
        #[arg(long, value_name = "FILE")]
        db: PathBuf,
        /// Description dump, single descriptor, or array of descriptors (JSON).
        #[arg(long, value_name = "FILE")]
        query: PathBuf,
        /// Candidates kept per query.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Localize a frame stream against a database and write fixes as JSON lines.
    Localize {
        #[arg(long, value_name = "FILE")]
        frames: PathBuf,
        #[arg(long, value_name = "FILE")]
        db: PathBuf,
        /// Fix output; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Per-frame poses including dead reckoning between fixes.
        #[arg(long, value_name = "FILE")]
        trajectory: Option<PathBuf>,
        /// Ranked candidates of every detection, for evaluation.
        #[arg(long, value_name = "FILE")]
        matches: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compute recall metrics from fixes (or a trajectory) and ground truth.
    Eval {
        /// Fixes or trajectory JSON lines.
        #[arg(long, value_name = "FILE")]
        fixes: PathBuf,
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
        /// Match results from `localize --matches`; enables Recall@TopN and PR.
        #[arg(long, value_name = "FILE")]
        matches: Option<PathBuf>,
        /// Report JSON; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Also write the precision-recall curve as CSV.
        #[arg(long, value_name = "FILE", requires = "matches")]
        pr_csv: Option<PathBuf>,
        /// Sequence name used in the report.
        #[arg(long, default_value = "sequence")]
        name: String,
    },
    /// Draw a database, imprint, description dump or match dump as SVG.
    Render {
        /// .ikdb database, .pgm imprint, or JSON dump.
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Road imprint drawn under a description dump.
        #[arg(long, value_name = "FILE")]
        road: Option<PathBuf>,
        /// Building imprint drawn under a description dump or imprint.
        #[arg(long, value_name = "FILE")]
        building: Option<PathBuf>,
        /// Which descriptor of a description dump to overlay.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Canvas width for map views.
        #[arg(long, default_value_t = 900.0)]
        width: f64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate a synthetic town, drive and ground truth.
    GenScenario {
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Scenario parameters as JSON; unspecified fields take defaults.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-point position noise, meters.
        #[arg(long)]
        jitter: Option<f64>,
        /// Fraction of road points dropped.
        #[arg(long)]
        dropout: Option<f64>,
        /// Fraction of facade chunks hidden.
        #[arg(long)]
        occlusion: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Query,
    Database,
}

impl From<ModeArg> for DescribeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Query => DescribeMode::Query,
            ModeArg::Database => DescribeMode::Database,
        }
    }
}

/// A misuse of the command line detected after parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<interkey::Error>() {
            return match e {
                interkey::Error::Config(_) | interkey::Error::FingerprintMismatch(_) | interkey::Error::Scenario(_) => {
                    EXIT_CONFIG
                }
                _ => EXIT_INPUT,
            };
        }
    }
    EXIT_INPUT
}

fn load_config(args: &ConfigArgs) -> Result<Config> {
    let mut cfg = Config::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    for item in &args.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

/// Writes to `path`, or to standard output when absent.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Summaries go to stdout unless stdout already carries the result.
fn report(primary_on_stdout: bool, msg: &str) {
    if primary_on_stdout {
        eprintln!("{msg}");
    } else {
        println!("{msg}");
    }
}

fn load_db(path: &Path) -> Result<DescriptorDatabase> {
    DescriptorDatabase::load(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_build_db(osm: &Path, out: &Path, cfg: &Config) -> Result<()> {
    let bytes = std::fs::read(osm).with_context(|| format!("reading {}", osm.display()))?;
    let map = parse_osm(&bytes).with_context(|| format!("parsing {}", osm.display()))?;
    let (db, summary) = build_database(&map.roads, &map.buildings, cfg)?;
    db.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "intersections: {}, described: {}, skipped: {}, descriptors: {}",
        summary.intersections,
        summary.described,
        summary.skipped.len(),
        summary.descriptors
    );
    Ok(())
}

struct DescribeInput<'a> {
    osm: Option<&'a Path>,
    node: Option<i64>,
    frames: Option<&'a Path>,
    window: Option<usize>,
    road: Option<&'a Path>,
    building: Option<&'a Path>,
}

fn describe_input(input: &DescribeInput<'_>, mode: Option<ModeArg>, cfg: &Config) -> Result<(Description, GridImage, GridImage)> {
    let pick = |default: DescribeMode| mode.map(DescribeMode::from).unwrap_or(default);
    if let Some(osm) = input.osm {
        let node_id = input.node.ok_or_else(|| Usage("--osm needs --node".into()))?;
        let bytes = std::fs::read(osm).with_context(|| format!("reading {}", osm.display()))?;
        let map = parse_osm(&bytes).with_context(|| format!("parsing {}", osm.display()))?;
        let node = collect_intersections(&map.roads)
            .into_iter()
            .find(|n| n.id == node_id)
            .ok_or_else(|| anyhow!("node {node_id} is not an intersection of {}", osm.display()))?;
        let (road, building) = intersection_imprints(&map, &node, cfg)?;
        let source = DescriptorSource::Map { intersection_id: node.id };
        let d = describe(&road, &building, road.center_pixel(), cfg, pick(DescribeMode::Database), source)?;
        return Ok((d, road, building));
    }
    if let Some(path) = input.frames {
        let index = input.window.ok_or_else(|| Usage("--frames needs --window".into()))?;
        let frames = load_frames(path).with_context(|| format!("loading {}", path.display()))?;
        let keyframes = select_keyframes(&frames, cfg.keyframe_distance_m, cfg.keyframe_heading_rad());
        let windows = sliding_windows(&keyframes, cfg.keyframe_window);
        let window = windows
            .get(index)
            .ok_or_else(|| anyhow!("window {index} out of range; the stream has {} windows", windows.len()))?;
        let obs = observe_window(&frames, window, cfg)?
            .ok_or_else(|| anyhow!("no intersection detected in window {index}"))?;
        let range = obs.position_local.norm();
        if range > cfg.detection_gate() {
            bail!(
                "intersection in window {index} is {range:.1} m from the vehicle, beyond the {:.2} m detection gate",
                cfg.detection_gate()
            );
        }
        let source = DescriptorSource::Observed { window: index };
        let d = describe(&obs.road_imprint, &obs.building_imprint, obs.position, cfg, pick(DescribeMode::Query), source)?;
        return Ok((d, obs.road_imprint, obs.building_imprint));
    }
    if let (Some(road_path), Some(building_path)) = (input.road, input.building) {
        let road = load_imprint(road_path).with_context(|| format!("loading {}", road_path.display()))?;
        let building = load_imprint(building_path).with_context(|| format!("loading {}", building_path.display()))?;
        let at = detect_intersection(&road, road.center_pixel(), &cfg.harris)
            .ok_or_else(|| anyhow!("no intersection detected in {}", road_path.display()))?;
        let d = describe(&road, &building, at, cfg, pick(DescribeMode::Query), DescriptorSource::Observed { window: 0 })?;
        return Ok((d, road, building));
    }
    Err(Usage("describe needs --osm/--node, --frames/--window, or --road/--building".into()).into())
}

fn read_queries(path: &Path) -> Result<Vec<Descriptor>> {
    let value: serde_json::Value =
        serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let parsed = if value.get("descriptors").is_some() {
        serde_json::from_value::<DescriptionDump>(value).map(|d| d.descriptors)
    } else if value.is_array() {
        serde_json::from_value::<Vec<Descriptor>>(value)
    } else {
        serde_json::from_value::<Descriptor>(value).map(|d| vec![d])
    };
    parsed.with_context(|| format!("{} holds no descriptors", path.display()))
}

fn cmd_localize(
    frames_path: &Path,
    db_path: &Path,
    out: Option<&Path>,
    trajectory: Option<&Path>,
    matches: Option<&Path>,
    cfg: &Config,
) -> Result<()> {
    let db = load_db(db_path)?;
    db.check_fingerprint(&cfg.fingerprint())?;
    let frames = load_frames(frames_path).with_context(|| format!("loading {}", frames_path.display()))?;
    let run = run_localization(&frames, &db, cfg)?;
    let mut w = output(out)?;
    for fix in &run.fixes {
        serde_json::to_writer(&mut w, fix)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    if let Some(p) = trajectory {
        let mut w = create(p)?;
        write_trajectory(&mut w, &run, &times)?;
        w.flush()?;
    }
    if let Some(p) = matches {
        let mut w = create(p)?;
        write_matches(&mut w, &run, &db)?;
        w.flush()?;
    }
    let rate = if run.detections == 0 {
        0.0
    } else {
        run.fixes.len() as f64 / run.detections as f64
    };
    report(
        out.is_none(),
        &format!(
            "frames: {}, keyframes: {}, windows: {}, detections: {}, fixes: {}, acceptance rate: {:.3}",
            frames.len(),
            run.keyframes,
            run.windows,
            run.detections,
            run.fixes.len(),
            rate
        ),
    );
    Ok(())
}

fn cmd_eval(
    fixes: &Path,
    truth_path: &Path,
    matches: Option<&Path>,
    out: Option<&Path>,
    pr_path: Option<&Path>,
    name: &str,
) -> Result<()> {
    let truth = GroundTruth::read_jsonl(open(truth_path)?).with_context(|| format!("reading {}", truth_path.display()))?;
    let estimates = read_estimates(open(fixes)?, truth.poses.len()).with_context(|| format!("reading {}", fixes.display()))?;
    let queries: Option<Vec<RankedQuery>> = match matches {
        Some(p) => Some(
            read_matches(open(p)?)
                .and_then(|lines| lines.iter().map(|l| l.ranked(&truth)).collect())
                .with_context(|| format!("reading {}", p.display()))?,
        ),
        None => None,
    };
    let bits = Config::default().descriptor_bits();
    let seq = evaluate_sequence(name, &estimates, &truth, queries.as_deref(), &default_thresholds(bits), None)?;
    if let Some(p) = pr_path {
        std::fs::write(p, pr_csv(&seq.pr_curve)).with_context(|| format!("writing {}", p.display()))?;
    }
    let report_json = aggregate(vec![seq]);
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &report_json)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

enum RenderInput {
    Database(DescriptorDatabase),
    Imprint(GridImage),
    Description(DescriptionDump),
    Descriptor(Descriptor),
    Matches(MatchDump),
}

fn classify(path: &Path) -> Result<RenderInput> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(interkey::matchdb::MAGIC) {
        return Ok(RenderInput::Database(DescriptorDatabase::from_bytes(&bytes)?));
    }
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        return Ok(RenderInput::Imprint(load_imprint(path)?));
    }
    let value: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|_| anyhow!("{}: unknown input type (expected .ikdb, PGM or JSON dump)", path.display()))?;
    let kind = if value.get("queries").is_some() {
        serde_json::from_value(value).map(RenderInput::Matches)
    } else if value.get("descriptors").is_some() {
        serde_json::from_value(value).map(RenderInput::Description)
    } else if value.get("hex").is_some() {
        serde_json::from_value(value).map(RenderInput::Descriptor)
    } else {
        bail!("{}: unknown JSON dump", path.display());
    };
    kind.with_context(|| format!("{}: malformed dump", path.display()))
}

struct RenderOptions<'a> {
    road: Option<&'a Path>,
    building: Option<&'a Path>,
    index: usize,
    width: f64,
}

fn cmd_render(input: &Path, out: &Path, opts: &RenderOptions<'_>, cfg: &Config) -> Result<()> {
    let pattern = build_pattern(cfg.descriptor_outer_radius_m, cfg.pattern_rings, cfg.pattern_base_cells)?;
    let load = |p: Option<&Path>| -> Result<Option<GridImage>> {
        p.map(|p| load_imprint(p).with_context(|| format!("loading {}", p.display())))
            .transpose()
    };
    let (road, building) = (load(opts.road)?, load(opts.building)?);
    let svg = match classify(input)? {
        RenderInput::Database(db) => render_database(&db, opts.width),
        RenderInput::Matches(dump) => render_matches(&dump, opts.width),
        RenderInput::Descriptor(d) => {
            let overlay = Overlay {
                description: None,
                descriptor: Some(&d),
            };
            render_view(cfg.side_px(), cfg.resolution_m_per_px, road.as_ref(), building.as_ref(), &overlay, &pattern)
        }
        RenderInput::Description(dump) => {
            let descriptor = match dump.descriptors.get(opts.index) {
                Some(d) => Some(d),
                None if dump.descriptors.is_empty() => None,
                None => {
                    return Err(Usage(format!(
                        "--index {} out of range; the dump holds {} descriptors",
                        opts.index,
                        dump.descriptors.len()
                    ))
                    .into())
                }
            };
            let overlay = Overlay {
                description: Some(&dump),
                descriptor,
            };
            render_view(dump.side, dump.resolution, road.as_ref(), building.as_ref(), &overlay, &pattern)
        }
        RenderInput::Imprint(img) => {
            // overlay the detection when the imprint holds a describable junction
            let blank = img.blank_like();
            let other = building.as_ref().filter(|b| b.same_geometry(&img)).unwrap_or(&blank);
            let dump = detect_intersection(&img, img.center_pixel(), &cfg.harris)
                .and_then(|at| {
                    describe(&img, other, at, cfg, DescribeMode::Query, DescriptorSource::Observed { window: 0 }).ok()
                })
                .map(|d| DescriptionDump::new(&d));
            let overlay = Overlay {
                description: dump.as_ref(),
                descriptor: None,
            };
            render_view(img.side(), img.resolution(), Some(&img), building.as_ref(), &overlay, &pattern)
        }
    };
    std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

struct NoiseOverrides {
    seed: Option<u64>,
    jitter: Option<f64>,
    dropout: Option<f64>,
    occlusion: Option<f64>,
}

fn cmd_gen_scenario(out_dir: &Path, spec_path: Option<&Path>, o: &NoiseOverrides) -> Result<()> {
    let mut spec: ScenarioSpec = match spec_path {
        Some(p) => serde_json::from_reader(open(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ScenarioSpec::default(),
    };
    if let Some(s) = o.seed {
        spec.seed = s;
    }
    if let Some(v) = o.jitter {
        spec.noise.position_jitter_m = v;
    }
    if let Some(v) = o.dropout {
        spec.noise.road_dropout = v;
    }
    if let Some(v) = o.occlusion {
        spec.noise.building_occlusion = v;
    }
    let s = generate_scenario(&spec)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut w = create(&out_dir.join("map.osm"))?;
    write_osm(&mut w, &s.roads, &s.buildings, EXPORT_ORIGIN)?;
    w.flush()?;
    let mut w = create(&out_dir.join("frames.jsonl"))?;
    write_frames(&mut w, &s.frames)?;
    w.flush()?;
    let times: Vec<f64> = s.frames.iter().map(|f| f.t).collect();
    let mut w = create(&out_dir.join("truth.jsonl"))?;
    s.truth.write_jsonl(&mut w, &times)?;
    w.flush()?;
    let mut w = create(&out_dir.join("scenario.json"))?;
    serde_json::to_writer_pretty(&mut w, &s.spec)?;
    w.write_all(b"\n")?;
    w.flush()?;
    println!(
        "intersections: {}, buildings: {}, frames: {}",
        collect_intersections(&s.roads).len(),
        s.buildings.polygons.len(),
        s.frames.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildDb { osm, out, cfg } => cmd_build_db(&osm, &out, &load_config(&cfg)?),
        Command::Describe {
            osm,
            node,
            frames,
            window,
            road,
            building,
            mode,
            out,
            imprints,
            cfg,
        } => {
            let cfg = load_config(&cfg)?;
            let input = DescribeInput {
                osm: osm.as_deref(),
                node,
                frames: frames.as_deref(),
                window,
                road: road.as_deref(),
                building: building.as_deref(),
            };
            let (desc, road_img, building_img) = describe_input(&input, mode, &cfg)?;
            if let Some(dir) = imprints {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                save_imprint(&road_img, &dir.join("road.pgm"))?;
                save_imprint(&building_img, &dir.join("building.pgm"))?;
            }
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &DescriptionDump::new(&desc))?;
            w.write_all(b"\n")?;
            w.flush()?;
            report(
                out.is_none(),
                &format!(
                    "branches: {}, descriptors: {}, symmetric: {}",
                    desc.branches.len(),
                    desc.descriptors.len(),
                    desc.symmetric
                ),
            );
            Ok(())
        }
        Command::Match { db, query, top, out, cfg } => {
            let cfg = load_config(&cfg)?;
            let db = load_db(&db)?;
            db.check_fingerprint(&cfg.fingerprint())?;
            let queries = read_queries(&query)?;
            let dump = MatchDump::build(&db, &queries, top, cfg.match_threshold)?;
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &dump)?;
            w.write_all(b"\n")?;
            w.flush()?;
            let accepted = dump
                .queries
                .iter()
                .filter(|q| q.matches.first().is_some_and(|m| m.accepted))
                .count();
            report(
                out.is_none(),
                &format!("queries: {}, accepted top-1: {accepted}", dump.queries.len()),
            );
            Ok(())
        }
        Command::Localize {
            frames,
            db,
            out,
            trajectory,
            matches,
            cfg,
        } => cmd_localize(
            &frames,
            &db,
            out.as_deref(),
            trajectory.as_deref(),
            matches.as_deref(),
            &load_config(&cfg)?,
        ),
        Command::Eval {
            fixes,
            truth,
            matches,
            out,
            pr_csv,
            name,
        } => cmd_eval(&fixes, &truth, matches.as_deref(), out.as_deref(), pr_csv.as_deref(), &name),
        Command::Render {
            input,
            out,
            road,
            building,
            index,
            width,
            cfg,
        } => {
            let opts = RenderOptions {
                road: road.as_deref(),
                building: building.as_deref(),
                index,
                width,
            };
            cmd_render(&input, &out, &opts, &load_config(&cfg)?)
        }
        Command::GenScenario {
            out_dir,
            spec,
            seed,
            jitter,
            dropout,
            occlusion,
        } => cmd_gen_scenario(
            &out_dir,
            spec.as_deref(),
            &NoiseOverrides {
                seed,
                jitter,
                dropout,
                occlusion,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
