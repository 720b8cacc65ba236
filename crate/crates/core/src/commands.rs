//! The `align`, `analyze`, `simulate` and `route` commands behind the
//! `skyquery` binary.
//!
//! Each command reads its inputs, writes plain CSV/JSONL outputs into an
//! output directory and finishes by writing `manifest.json`, a
//! [`RunManifest`] with content hashes of every input and output. Nothing in
//! a manifest depends on the clock, so identical reruns produce identical
//! files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::alignment::synth::position_rmse;
use crate::alignment::{align_log, AlignmentParams, KeypointLog};
use crate::analytics::io::{write_matrix_csv, write_sequences_jsonl};
use crate::analytics::write_detection_log;
use crate::dsl::{self, Bindings, ExecOptions, Value};
use crate::error::{Error, Result};
use crate::model::{world_to_lonlat, CellId, RegionConfig};
use crate::routing::io::{read_priorities_csv, write_route_csv};
use crate::routing::{solve_with_local_search, RoutingInstance, RESTARTS};
use crate::simulator::{
    generate_synthetic_trace, read_trace_csv, run_grid, write_metrics_csv, write_trace_csv, GridRun, Policy,
    SimConfig, Trace, TraceProfile,
};

/// Program used by `simulate` when none is given.
pub const SIMULATION_PROGRAM: &str = include_str!("../examples/data/programs/simulation_objectives.sq");

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Record of one run: enough to repeat it and to check that a repeat
/// produced the same bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    /// Output paths are relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Run {
    manifest: RunManifest,
    out_dir: PathBuf,
}

impl Run {
    fn new(command: &str, seed: u64, out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        Ok(Self {
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
                config: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            out_dir: out_dir.to_path_buf(),
        })
    }

    fn config(&mut self, key: &str, value: impl ToString) {
        self.manifest.config.insert(key.to_string(), value.to_string());
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(FileDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Creates `name` in the output directory, fills it and records its digest.
    fn output(&mut self, role: &str, name: &str, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        fill(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
        drop(w);
        self.manifest.outputs.push(FileDigest {
            role: role.to_string(),
            path: name.to_string(),
            sha256: sha256_file(&path)?,
        });
        Ok(path)
    }

    fn finish(self) -> Result<RunManifest> {
        let path = self.out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn read_region(path: &Path) -> Result<RegionConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RegionConfig::parse(&text)
}

#[derive(Clone, Debug, Default)]
pub struct AlignArgs {
    pub log: PathBuf,
    /// Adds longitude/latitude columns to the group output.
    pub region: Option<PathBuf>,
    pub t_f: Option<f64>,
    pub t_d_px: Option<f64>,
    pub t_d_m: Option<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignSummary {
    pub frames: usize,
    pub stable_groups: usize,
    pub global_groups: usize,
    pub sensor_only_frames: usize,
    /// `(estimated, sensor)` position RMSE against truth poses, when the log has them.
    pub rmse: Option<(f64, f64)>,
}

/// Groups keypoints, geolocates the groups and estimates every frame's pose.
/// Writes `groups.csv` and `poses.csv`.
pub fn align(args: &AlignArgs) -> Result<(RunManifest, AlignSummary)> {
    let mut run = Run::new("align", args.seed, &args.out_dir)?;
    run.input("keypoint_log", &args.log)?;
    let log = KeypointLog::read(open(&args.log)?)?;
    let region = match &args.region {
        Some(p) => {
            run.input("region", p)?;
            Some(read_region(p)?)
        }
        None => None,
    };
    let mut params = AlignmentParams::for_descriptor_dim(log.descriptor_dim.max(1));
    params.t_f = args.t_f.unwrap_or(params.t_f);
    params.t_d_px = args.t_d_px.unwrap_or(params.t_d_px);
    params.t_d_m = args.t_d_m.unwrap_or(params.t_d_m);
    run.config("t_f", params.t_f);
    run.config("t_d_px", params.t_d_px);
    run.config("t_d_m", params.t_d_m);
    run.config("min_group_size", params.min_group_size);

    let out = if log.frames.is_empty() {
        params.validate()?;
        None
    } else {
        let cam = log
            .camera
            .ok_or_else(|| Error::Config("keypoint log header has no camera".into()))?;
        Some(align_log(&log, &cam, &params)?)
    };

    let globals = out.as_ref().map(|o| o.globals.as_slice()).unwrap_or_default();
    run.output("groups", "groups.csv", |w| {
        if region.is_some() {
            writeln!(w, "group_id,x,y,h,members,lon,lat")?;
        } else {
            writeln!(w, "group_id,x,y,h,members")?;
        }
        for (i, g) in globals.iter().enumerate() {
            write!(w, "{i},{:.4},{:.4},{:.4},{}", g.coord.x, g.coord.y, g.coord.h, g.members.len())?;
            if let Some(r) = &region {
                let (lon, lat) = world_to_lonlat(&g.coord, r);
                write!(w, ",{lon:.8},{lat:.8}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    let poses = out.as_ref().map(|o| o.poses.as_slice()).unwrap_or_default();
    run.output("poses", "poses.csv", |w| {
        writeln!(w, "frame_id,t_ms,x,y,h,alpha,matches,sensor_only")?;
        for p in poses {
            let e = &p.estimate;
            writeln!(
                w,
                "{},{},{:.4},{:.4},{:.4},{:.6},{},{}",
                p.frame_id, p.t_ms, e.pose.x, e.pose.y, e.pose.h, e.pose.alpha, e.matches, e.sensor_only
            )?;
        }
        Ok(())
    })?;

    let truth: Vec<_> = log.frames.iter().zip(poses).filter_map(|(f, p)| f.truth.map(|t| (f, p, t))).collect();
    let rmse = (!truth.is_empty()).then(|| {
        (
            position_rmse(truth.iter().map(|(_, p, t)| (&p.estimate.pose, t))),
            position_rmse(truth.iter().map(|(f, _, t)| (&f.pose, t))),
        )
    });
    let summary = AlignSummary {
        frames: log.frames.len(),
        stable_groups: out.as_ref().map_or(0, |o| o.stable.len()),
        global_groups: globals.len(),
        sensor_only_frames: poses.iter().filter(|p| p.estimate.sensor_only).count(),
        rmse,
    };
    Ok((run.finish()?, summary))
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeArgs {
    pub program: PathBuf,
    pub region: PathBuf,
    pub bindings: Vec<(String, PathBuf)>,
    /// Directory for sources that are not bound explicitly; defaults to the
    /// program's directory.
    pub base_dir: Option<PathBuf>,
    pub merge_threshold: Option<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

/// Runs a program and writes every export: matrices and rate series as
/// matrix CSV, sequences as JSONL, detections as a detection log. A
/// `priorities` matrix is written too. Returns the manifest and any warnings.
pub fn analyze(args: &AnalyzeArgs) -> Result<(RunManifest, Vec<String>)> {
    let mut run = Run::new("analyze", args.seed, &args.out_dir)?;
    run.input("program", &args.program)?;
    run.input("region", &args.region)?;
    let src = fs::read_to_string(&args.program).map_err(|e| Error::io(&args.program, e))?;
    let region = read_region(&args.region)?;

    let base = args
        .base_dir
        .clone()
        .or_else(|| args.program.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    let mut bindings = Bindings::with_base_dir(&base);
    for (name, path) in &args.bindings {
        bindings = bindings.bind(name.clone(), path.clone());
    }
    let mut opts = ExecOptions::new(region);
    if let Some(t) = args.merge_threshold {
        opts.merge_threshold = t;
    }
    run.config("merge_threshold", opts.merge_threshold);

    let program = dsl::parse(&src)?;
    let plan = dsl::plan(&program)?;
    let out = dsl::execute(&plan, &bindings, &opts)?;

    // Every source the program actually read, in name order.
    let mut used: BTreeMap<String, PathBuf> = BTreeMap::new();
    for node in &plan.nodes {
        let names: Vec<&str> = match &node.op {
            dsl::Op::ObjectDetection { video, model, .. } => vec![video.as_str(), model.as_str()],
            dsl::Op::Import { source } => vec![source.as_str()],
            _ => vec![],
        };
        for n in names {
            if let Some(p) = bindings.resolve(n) {
                used.insert(n.to_string(), p);
            }
        }
    }
    for (name, path) in &used {
        run.input(&format!("source:{name}"), path)?;
    }

    for (name, value) in &out.exports {
        match value {
            Value::Matrix(m) => run.output(name, &format!("{name}.csv"), |w| write_matrix_csv(m, w))?,
            Value::Rates(r) => run.output(name, &format!("{name}.csv"), |w| write_matrix_csv(&r.rates, w))?,
            Value::Sequences(s) => run.output(name, &format!("{name}.jsonl"), |w| write_sequences_jsonl(s, w))?,
            Value::Detections(d) => run.output(name, &format!("{name}.csv"), |w| write_detection_log(d.rows(), w))?,
        };
    }
    if let Some(p) = &out.priorities {
        if out.get("priorities").is_none() {
            run.output("priorities", "priorities.csv", |w| write_matrix_csv(p, w))?;
        }
    }
    Ok((run.finish()?, out.warnings))
}

#[derive(Clone, Debug)]
pub struct SimulateArgs {
    /// Parking trace CSV; a synthetic two-regime trace is generated from the
    /// seed when absent.
    pub trace: Option<PathBuf>,
    /// Region config; a 16×16 grid of 512 m cells when absent.
    pub region: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub drones: Vec<usize>,
    pub policies: Vec<Policy>,
    pub weeks: f64,
    pub objective: String,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        Self {
            trace: None,
            region: None,
            program: None,
            drones: vec![1, 2, 3, 4],
            policies: Policy::ALL.to_vec(),
            weeks: 8.0,
            objective: "counts".into(),
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Runs every policy at every drone count and writes `metrics.csv`. A
/// generated trace is written to `trace.csv`.
pub fn simulate(args: &SimulateArgs) -> Result<RunManifest> {
    let mut run = Run::new("simulate", args.seed, &args.out_dir)?;
    if args.drones.is_empty() || args.policies.is_empty() {
        return Err(Error::Config("need at least one drone count and one policy".into()));
    }
    let grid = match &args.region {
        Some(p) => {
            run.input("region", p)?;
            read_region(p)?
        }
        None => RegionConfig::square(16, 512.0),
    };
    let src = match &args.program {
        Some(p) => {
            run.input("program", p)?;
            fs::read_to_string(p).map_err(|e| Error::io(p, e))?
        }
        None => SIMULATION_PROGRAM.to_string(),
    };
    let plan = dsl::plan(&dsl::parse(&src)?)?;

    let trace = match &args.trace {
        Some(p) => {
            run.input("trace", p)?;
            Trace::spanning(read_trace_csv(open(p)?, &grid)?)?
        }
        None => {
            if !(args.weeks > 0.0) {
                return Err(Error::Config("weeks must be positive".into()));
            }
            run.config("weeks", args.weeks);
            let profile = TraceProfile::two_regime(grid, args.weeks * 7.0 * 86400.0, args.seed);
            let t = generate_synthetic_trace(args.seed, &profile);
            run.output("trace", "trace.csv", |w| write_trace_csv(&t.events, &grid, w))?;
            t
        }
    };

    let base = SimConfig {
        objective: args.objective.clone(),
        ..SimConfig::default()
    };
    let drones: Vec<String> = args.drones.iter().map(|n| n.to_string()).collect();
    let policies: Vec<&str> = args.policies.iter().map(|p| p.name()).collect();
    run.config("drones", drones.join(","));
    run.config("policies", policies.join(","));
    run.config("objective", &base.objective);
    run.config("speed", base.speed);
    run.config("battery_s", base.battery_s);
    run.config("recharge_s", base.recharge_s);
    run.config("fov_m", base.fov_m);
    run.config("ttl", base.ttl);

    let runs: Vec<GridRun> = args
        .policies
        .iter()
        .flat_map(|&policy| args.drones.iter().map(move |&n_drones| GridRun { trace: 0, policy, n_drones }))
        .collect();
    let metrics = run_grid(std::slice::from_ref(&trace), &[args.seed], &grid, &base, &plan, &runs)?;
    run.output("metrics", "metrics.csv", |w| write_metrics_csv(&metrics, w))?;
    run.finish()
}

#[derive(Clone, Debug)]
pub struct RouteArgs {
    pub priorities: PathBuf,
    pub region: PathBuf,
    /// Defaults to the center cell.
    pub depot: Option<CellId>,
    pub speed: f64,
    pub budget: f64,
    pub restarts: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RouteArgs {
    fn default() -> Self {
        Self {
            priorities: PathBuf::new(),
            region: PathBuf::new(),
            depot: None,
            speed: 17.88,
            budget: 3600.0,
            restarts: RESTARTS,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Solves one routing instance from a priorities CSV and writes `route.csv`.
pub fn route(args: &RouteArgs) -> Result<(RunManifest, crate::routing::Route)> {
    let mut run = Run::new("route", args.seed, &args.out_dir)?;
    run.input("priorities", &args.priorities)?;
    run.input("region", &args.region)?;
    let grid = read_region(&args.region)?;
    let priorities = read_priorities_csv(open(&args.priorities)?, &grid)?;
    let depot = args.depot.unwrap_or_else(|| grid.center_cell());
    if !grid.contains_cell(depot) {
        return Err(Error::Config(format!("depot {depot} is outside the grid")));
    }
    if !(args.speed >= 0.0 && args.budget >= 0.0 && args.speed.is_finite() && args.budget.is_finite()) {
        return Err(Error::Config("speed and budget must be finite and non-negative".into()));
    }
    run.config("depot", format!("{},{}", depot.cx, depot.cy));
    run.config("speed", args.speed);
    run.config("budget", args.budget);
    run.config("restarts", args.restarts);

    let candidates = priorities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (grid.cell_at(i), p))
        .collect();
    let inst = RoutingInstance {
        grid,
        depot,
        candidates,
        speed: args.speed,
        budget: args.budget,
    };
    let route = solve_with_local_search(&inst, args.restarts);
    assert!(route.total_time <= inst.budget, "solver returned a route over budget");
    run.output("route", "route.csv", |w| write_route_csv(&route, &inst, w))?;
    Ok((run.finish()?, route))
}

/// Parses `name=path`.
pub fn parse_binding(s: &str) -> Result<(String, PathBuf)> {
    match s.split_once('=') {
        Some((n, p)) if !n.trim().is_empty() && !p.trim().is_empty() => Ok((n.trim().to_string(), PathBuf::from(p.trim()))),
        _ => Err(Error::Config(format!("binding `{s}` is not name=path"))),
    }
}

/// Parses drone counts such as `1-4` or `1,2,6`.
pub fn parse_drones(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("drone counts `{s}` are not a list like 1,2,3 or a range like 1-4"));
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

/// Parses a cell as `x,y`.
pub fn parse_cell(s: &str) -> Result<CellId> {
    let bad = || Error::Config(format!("cell `{s}` is not x,y"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok(CellId::new(x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}
