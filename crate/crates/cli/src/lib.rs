//! Command-line front end for the `risplace` planner.
//!
//! Every command reads one scenario (a TOML file or a bundled name), runs a
//! deterministic computation and writes CSV/JSON artifacts to `--out`.
//! Floats in artifacts carry nine significant digits.

pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use risplace::assess::{self, AssessError, RisMode};
use risplace::beamform::{self, SolveError};
use risplace::channel::{db_to_linear, linear_to_db, sample_channels};
use risplace::geom::{Cell, GeomError, Point2};
use risplace::placement::{self, PlacementError, PlacementResult, Solution, SolutionSet};
use risplace::rng::StreamKey;
use risplace::{Scenario, ScenarioError};

use output::{fmt_g9, round9, write_csv, write_json};

#[derive(Debug, Parser)]
#[command(name = "risplace", version, about = "Find where to put a reconfigurable intelligent surface in a cell")]
pub struct Cli {
    /// Scenario file, or a bundled name (scenario1 .. scenario4).
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files; created when missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the joint beamforming problem for one user draw.
    Beamform(BeamformArgs),
    /// Run the full placement search and report metrics at the result.
    Place(PlaceArgs),
    /// Coverage map with or without a RIS.
    Coverage(CoverageArgs),
    /// Average sum rate against transmit power for several RIS modes.
    SweepPower(SweepArgs),
    /// Dump user draws.
    SampleUsers(SampleArgs),
    /// Recompute metrics.json from solutions.csv and the scenario.
    Verify,
}

#[derive(Debug, Args)]
pub struct BeamformArgs {
    /// RIS position `x,y`; omitted means no RIS.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub ris: Option<Point2>,
    /// Users as `x1,y1;x2,y2;...` instead of a sampled draw.
    #[arg(long, allow_hyphen_values = true)]
    pub users: Option<String>,
    /// Index of the sampled user draw.
    #[arg(long, default_value_t = 0)]
    pub instantiation: u64,
    /// Override the solver iteration cap
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Transmit power in dBm.
    #[arg(long, allow_hyphen_values = true)]
    pub pmax: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    /// Override the number of user draws per solution set.
    #[arg(long)]
    pub n_inst: Option<usize>,
    /// Override the number of candidates per draw.
    #[arg(long)]
    pub candidates: Option<usize>,
    /// Override the solver iteration cap
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// RIS position `x,y`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub ris: Option<Point2>,
    /// Grid step in meters (default: the scenario's).
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Optimal,
    Random,
    None,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Transmit powers in dBm, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-10,-5,0,5,10")]
    pub pmax_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "optimal,random,none")]
    pub modes: Vec<ModeArg>,
    /// RIS position for the `optimal` mode.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub ris: Option<Point2>,
    /// `final_region.json` of a previous `place` run, for the `optimal` mode.
    #[arg(long)]
    pub placement: Option<PathBuf>,
    /// User draws per point (default: the scenario's n_inst).
    #[arg(long)]
    pub draws: Option<usize>,
    /// Override the solver iteration cap
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// First draw index
    #[arg(long, default_value_t = 0)]
    pub instantiation: u64,
    /// Number of consecutive draws
    #[arg(long, default_value_t = 1)]
    pub count: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Assess(#[from] AssessError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Artifact { path: String, message: String },
}

pub mod exit {
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const SOLVER: i32 = 5;
    pub const MISMATCH: i32 = 6;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(ScenarioError::Parse { .. }) => exit::PARSE,
            CliError::Scenario(ScenarioError::Validation { .. }) => exit::VALIDATION,
            CliError::Scenario(_) => exit::OTHER,
            CliError::Placement(_) | CliError::Solve(_) | CliError::Assess(_) | CliError::Geom(_) => exit::SOLVER,
            CliError::Usage(_) => exit::USAGE,
            CliError::Mismatch(_) => exit::MISMATCH,
            CliError::Io { .. } | CliError::Artifact { .. } => exit::OTHER,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn parse_point(s: &str) -> Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad x in {s:?}: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("bad y in {s:?}: {e}"))?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(format!("non-finite coordinate in {s:?}"));
    }
    Ok(Point2::new(x, y))
}

fn parse_users(s: &str) -> Result<Vec<Point2>, CliError> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_point(p).map_err(CliError::Usage))
        .collect()
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let name = cli
        .scenario
        .as_deref()
        .ok_or_else(|| CliError::Usage("--scenario is required".into()))?;
    let mut scenario = Scenario::resolve(name)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    std::fs::create_dir_all(&cli.out).map_err(io_err(&cli.out))?;
    match &cli.command {
        Command::Beamform(a) => cmd_beamform(&mut scenario, a, &cli.out),
        Command::Place(a) => cmd_place(&mut scenario, a, &cli.out),
        Command::Coverage(a) => cmd_coverage(&scenario, a, &cli.out),
        Command::SweepPower(a) => cmd_sweep(&mut scenario, a, &cli.out),
        Command::SampleUsers(a) => cmd_sample(&scenario, a, &cli.out),
        Command::Verify => cmd_verify(&mut scenario, &cli.out),
    }
}

fn g(x: f64) -> String {
    fmt_g9(x)
}

fn pt(p: Point2) -> [f64; 2] {
    [round9(p.x), round9(p.y)]
}

fn check_ris(scenario: &Scenario, ris: Option<Point2>) -> Result<(), CliError> {
    match ris {
        Some(p) if !scenario.cell.contains(p) => Err(CliError::Usage(format!(
            "RIS position ({}, {}) is outside the cell",
            p.x, p.y
        ))),
        _ => Ok(()),
    }
}

fn cmd_beamform(scenario: &mut Scenario, a: &BeamformArgs, out: &Path) -> Result<(), CliError> {
    if let Some(n) = a.max_iters {
        scenario.solver.max_iters = n.max(1);
    }
    if let Some(p) = a.pmax {
        scenario.rf.p_max_mw = db_to_linear(p);
    }
    check_ris(scenario, a.ris)?;
    let key = StreamKey::new(scenario.seed).level(1).instantiation(a.instantiation);
    let users = match &a.users {
        Some(s) => parse_users(s)?,
        None => placement::sample_users(&scenario.users, &scenario.cell, &scenario.obstacles, key)?,
    };
    if users.is_empty() {
        return Err(CliError::Usage(format!("user draw {} is empty", a.instantiation)));
    }
    let cs = sample_channels(scenario, a.ris, &users, key.candidate(0)).map_err(PlacementError::from)?;
    let state = beamform::solve(&cs, &scenario.rf, &scenario.solver)?;
    let noise = scenario.rf.noise_power_mw();

    let mut rows = Vec::new();
    println!("iteration objective wsr");
    for (i, (f, r)) in state.objective_history.iter().zip(&state.wsr_history).enumerate() {
        println!("{} {} {}", i + 1, g(*f), g(*r));
        rows.push(vec![(i + 1).to_string(), g(*f), g(*r)]);
    }
    let path = out.join("convergence.csv");
    write_csv(&path, &["iteration", "objective", "wsr"], &rows).map_err(io_err(&path))?;

    let sinrs = beamform::state_sinrs(&state, &cs, noise);
    println!("users {}  iterations {}  converged {}", users.len(), state.iteration, state.converged);
    println!("wsr {} bps/Hz  power {} mW", g(beamform::state_wsr(&state, &cs, noise)), g(state.power()));
    for (k, (u, s)) in users.iter().zip(&sinrs).enumerate() {
        println!("user {k} ({}, {}) sinr {} dB", g(u.x), g(u.y), g(linear_to_db(*s)));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct LevelRecord {
    pub level: u64,
    pub step: f64,
    pub mode: [f64; 2],
    pub circle_center: [f64; 2],
    pub circle_radius: f64,
    pub solutions: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FinalRegion {
    pub center: [f64; 2],
    pub side: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub levels: Vec<LevelRecord>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricsRecord {
    pub scenario: Option<String>,
    pub seed: u64,
    pub center: [f64; 2],
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub average_wsr: f64,
    pub average_wsr_no_ris: f64,
    pub draws: usize,
}

fn metrics_record(scenario: &Scenario, center: Point2, m: &assess::PlacementMetrics) -> MetricsRecord {
    MetricsRecord {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        center: pt(center),
        coverage_before: round9(m.coverage_before),
        coverage_after: round9(m.coverage_after),
        average_wsr: round9(m.average_wsr),
        average_wsr_no_ris: round9(m.average_wsr_no_ris),
        draws: m.draws,
    }
}

const SOLUTION_HEADER: [&str; 11] = [
    "level",
    "instantiation",
    "candidate",
    "x",
    "y",
    "min_sinr",
    "wsr",
    "users",
    "circle_x",
    "circle_y",
    "circle_r",
];

fn solution_rows(set: &SolutionSet) -> Vec<Vec<String>> {
    let c = set.search_circle;
    set.solutions
        .iter()
        .map(|s| {
            vec![
                set.level.to_string(),
                s.instantiation.to_string(),
                s.candidate.to_string(),
                g(s.point.x),
                g(s.point.y),
                g(s.min_sinr),
                g(s.wsr),
                s.users.to_string(),
                g(c.center.x),
                g(c.center.y),
                g(c.radius),
            ]
        })
        .collect()
}

fn write_placement(result: &PlacementResult, out: &Path) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for l in &result.levels {
        rows.extend(solution_rows(&l.solutions));
    }
    if result.levels.is_empty() {
        rows.extend(solution_rows(&result.final_set));
    }
    let path = out.join("solutions.csv");
    write_csv(&path, &SOLUTION_HEADER, &rows).map_err(io_err(&path))?;

    let mut heat = Vec::new();
    for l in &result.levels {
        for (p, n) in &l.frequencies {
            heat.push(vec![
                "level".to_string(),
                l.solutions.level.to_string(),
                g(l.step),
                g(p.x),
                g(p.y),
                n.to_string(),
            ]);
        }
    }
    for (p, n) in &result.final_frequencies {
        heat.push(vec![
            "final".to_string(),
            result.final_set.level.to_string(),
            g(result.side),
            g(p.x),
            g(p.y),
            n.to_string(),
        ]);
    }
    let path = out.join("heatmap.csv");
    write_csv(&path, &["kind", "level", "step", "x", "y", "count"], &heat).map_err(io_err(&path))?;

    let (x_min, x_max, y_min, y_max) = result.region();
    let region = FinalRegion {
        center: pt(result.center),
        side: round9(result.side),
        x_min: round9(x_min),
        x_max: round9(x_max),
        y_min: round9(y_min),
        y_max: round9(y_max),
        levels: result
            .levels
            .iter()
            .map(|l| LevelRecord {
                level: l.solutions.level,
                step: round9(l.step),
                mode: pt(l.mode),
                circle_center: pt(l.circle.center),
                circle_radius: round9(l.circle.radius),
                solutions: l.solutions.len(),
            })
            .collect(),
    };
    let path = out.join("final_region.json");
    write_json(&path, &region).map_err(io_err(&path))
}

fn cmd_place(scenario: &mut Scenario, a: &PlaceArgs, out: &Path) -> Result<(), CliError> {
    if let Some(n) = a.n_inst {
        scenario.placement.instantiations = n.max(1);
    }
    if let Some(t) = a.candidates {
        scenario.placement.candidates = t.max(1);
    }
    if let Some(n) = a.max_iters {
        scenario.solver.max_iters = n.max(1);
    }
    let start = Instant::now();
    let result = placement::place(scenario)?;
    let searched = start.elapsed();
    let metrics = assess::placement_metrics(scenario, result.center)?;
    write_placement(&result, out)?;
    let path = out.join("metrics.json");
    write_json(&path, &metrics_record(scenario, result.center, &metrics)).map_err(io_err(&path))?;

    for l in &result.levels {
        println!(
            "level {}  step {} m  mode ({}, {})  solutions {}",
            l.solutions.level,
            g(l.step),
            g(l.mode.x),
            g(l.mode.y),
            l.solutions.len()
        );
    }
    println!(
        "final region center ({}, {}) side {} m",
        g(result.center.x),
        g(result.center.y),
        g(result.side)
    );
    println!(
        "coverage {} -> {}",
        g(metrics.coverage_before),
        g(metrics.coverage_after)
    );
    println!(
        "average wsr {} bps/Hz (no RIS {}) over {} draws",
        g(metrics.average_wsr),
        g(metrics.average_wsr_no_ris),
        metrics.draws
    );
    println!("search time {:.1} s, total {:.1} s", searched.as_secs_f64(), start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_coverage(scenario: &Scenario, a: &CoverageArgs, out: &Path) -> Result<(), CliError> {
    check_ris(scenario, a.ris)?;
    let resolution = a.resolution.unwrap_or(scenario.placement.grid_resolution);
    let map = risplace::geom::coverage(&scenario.cell, scenario.bs, &scenario.obstacles, a.ris, resolution)?;
    let rows: Vec<Vec<String>> = map
        .points
        .iter()
        .map(|(p, c)| vec![g(p.x), g(p.y), (*c as u8).to_string()])
        .collect();
    let path = out.join("coverage.csv");
    write_csv(&path, &["x", "y", "covered"], &rows).map_err(io_err(&path))?;
    println!(
        "points {}  covered {}  fraction {}",
        map.points.len(),
        map.covered_count(),
        g(map.fraction)
    );
    Ok(())
}

fn read_region(path: &Path) -> Result<FinalRegion, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Artifact {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn cmd_sweep(scenario: &mut Scenario, a: &SweepArgs, out: &Path) -> Result<(), CliError> {
    if let Some(n) = a.max_iters {
        scenario.solver.max_iters = n.max(1);
    }
    let optimal = match (a.ris, &a.placement) {
        (Some(p), _) => Some(p),
        (None, Some(path)) => {
            let r = read_region(path)?;
            Some(Point2::new(r.center[0], r.center[1]))
        }
        (None, None) => None,
    };
    check_ris(scenario, optimal)?;
    let mut modes = Vec::new();
    for m in &a.modes {
        modes.push(match m {
            ModeArg::None => RisMode::None,
            ModeArg::Random => RisMode::Random,
            ModeArg::Optimal => RisMode::Fixed(optimal.ok_or_else(|| {
                CliError::Usage("the optimal mode needs --ris or --placement".into())
            })?),
        });
    }
    let draws = a.draws.unwrap_or(scenario.placement.instantiations).max(1);
    let rows = assess::sweep_power(scenario, &modes, &a.pmax_list, draws)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![g(r.p_dbm), r.mode.to_string(), g(r.average_wsr), r.draws.to_string()])
        .collect();
    let path = out.join("sweep.csv");
    write_csv(&path, &["p_dbm", "mode", "average_wsr", "draws"], &csv_rows).map_err(io_err(&path))?;
    for r in &rows {
        println!("{:>8} dBm  {:<8} {}", g(r.p_dbm), r.mode, g(r.average_wsr));
    }
    Ok(())
}

fn cmd_sample(scenario: &Scenario, a: &SampleArgs, out: &Path) -> Result<(), CliError> {
    let key = StreamKey::new(scenario.seed).level(1);
    let mut rows = Vec::new();
    for i in a.instantiation..a.instantiation + a.count {
        let users = placement::sample_users(&scenario.users, &scenario.cell, &scenario.obstacles, key.instantiation(i))?;
        println!("instantiation {i}: {} users", users.len());
        for u in users {
            rows.push(vec![i.to_string(), g(u.x), g(u.y)]);
        }
    }
    let path = out.join("users.csv");
    write_csv(&path, &["instantiation", "x", "y"], &rows).map_err(io_err(&path))
}

fn artifact_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Artifact {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Final-level solution set rebuilt from `solutions.csv`.
fn read_final_set(path: &Path) -> Result<SolutionSet, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| artifact_err(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| artifact_err(path, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != SOLUTION_HEADER {
        return Err(artifact_err(path, "unexpected header"));
    }
    let mut by_level: BTreeMap<u64, SolutionSet> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| artifact_err(path, e.to_string()))?;
        let num = |i: usize| -> Result<f64, CliError> {
            record[i]
                .parse::<f64>()
                .map_err(|e| artifact_err(path, format!("row {}: {e}", line + 2)))
        };
        let int = |i: usize| -> Result<u64, CliError> {
            record[i]
                .parse::<u64>()
                .map_err(|e| artifact_err(path, format!("row {}: {e}", line + 2)))
        };
        let level = int(0)?;
        let circle = Cell::new(Point2::new(num(8)?, num(9)?), num(10)?);
        let set = by_level.entry(level).or_insert_with(|| SolutionSet {
            level,
            search_circle: circle,
            solutions: Vec::new(),
        });
        set.solutions.push(Solution {
            point: Point2::new(num(3)?, num(4)?),
            instantiation: int(1)?,
            candidate: int(2)? as usize,
            min_sinr: num(5)?,
            wsr: num(6)?,
            users: int(7)? as usize,
            candidates: Vec::new(),
            candidate_min_sinr: Vec::new(),
        });
    }
    by_level
        .into_values()
        .next_back()
        .ok_or_else(|| artifact_err(path, "no solutions"))
}

fn cmd_verify(scenario: &mut Scenario, out: &Path) -> Result<(), CliError> {
    let metrics_path = out.join("metrics.json");
    let text = std::fs::read_to_string(&metrics_path).map_err(io_err(&metrics_path))?;
    let recorded: MetricsRecord =
        serde_json::from_str(&text).map_err(|e| artifact_err(&metrics_path, e.to_string()))?;
    let region = read_region(&out.join("final_region.json"))?;
    scenario.seed = recorded.seed;

    let set = read_final_set(&out.join("solutions.csv"))?;
    let (center, _) = placement::final_center(scenario, &set, region.side)?;
    if pt(center) != region.center || pt(center) != recorded.center {
        return Err(CliError::Mismatch(format!(
            "center from solutions.csv is ({}, {}), artifacts say {:?} / {:?}",
            g(center.x),
            g(center.y),
            region.center,
            recorded.center
        )));
    }
    let metrics = assess::placement_metrics(scenario, center)?;
    let recomputed = metrics_record(scenario, center, &metrics);
    if recomputed != recorded {
        return Err(CliError::Mismatch(format!(
            "recomputed {recomputed:?}, recorded {recorded:?}"
        )));
    }
    println!(
        "verified: center ({}, {}), coverage {} -> {}, average wsr {}",
        g(center.x),
        g(center.y),
        g(recorded.coverage_before),
        g(recorded.coverage_after),
        g(recorded.average_wsr)
    );
    Ok(())
}
