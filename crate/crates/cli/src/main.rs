//! `crowdnav`: build flow maps, run localization and navigation batches,
//! export plans, replay trajectories and summarize reports.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

mod config;
mod render;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crowdnav::crowd_sim::{load_scenario, read_trajectory_log, write_trajectory_log, Scenario, SimParams, World};
use crowdnav::eval::{
    format_table, localization_run, mapping_session, par_seeds, run_episode, summarize, write_localization_log,
    write_quality_csv, write_reports_csv, BatchSummary, LocalizerChoice, Outcome, PlannerChoice, RunReport,
};
use crowdnav::flow_map::{cell_quality, load_map, save_map, write_heatmap, CrowdFlowMap};
use crowdnav::geometry::Vec2;
use crowdnav::planner::{plan_astar, plan_dstar, write_path_csv, Cell, CostWeights};
use crowdnav::rng::SeedTree;
use serde::Deserialize;

use config::{parse_seeds, ExperimentConfig, Stage};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input files (exit 2).
    Usage(String),
    /// Failure while running or writing results (exit 1).
    Runtime(String),
}

impl From<crowdnav::Error> for CliError {
    fn from(e: crowdnav::Error) -> Self {
        use crowdnav::Error as E;
        match e {
            E::Parse { .. } | E::Scenario(_) | E::VersionMismatch { .. } | E::CorruptPayload(_) | E::Config(_) => {
                CliError::Usage(e.to_string())
            }
            E::NoReferences | E::InsufficientOverlap(_) | E::Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "crowdnav", version, about = "Crowd-flow mapping, localization and navigation workbench")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Single seed.
    #[arg(long, global = true, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list: `1..50` (inclusive), `3,7` or a mix.
    #[arg(long, global = true, value_parser = parse_seed_list)]
    seeds: Option<SeedList>,
    /// Output directory.
    #[arg(short = 'o', long = "out", global = true)]
    out: Option<PathBuf>,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tour the scenario and build a flow map.
    Map {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Session length (s).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Score crowd localization against odometry on a prebuilt map.
    Localize {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Export one plan from the scenario start to its goal.
    Plan {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        planner: Option<PlannerChoice>,
        /// Start point `x,y` (m); defaults to the scenario start.
        #[arg(long, value_parser = parse_point)]
        start: Option<Vec2>,
        /// Goal point `x,y` (m); defaults to the scenario goal.
        #[arg(long, value_parser = parse_point)]
        goal: Option<Vec2>,
    },
    /// Closed-loop navigation episodes, one per seed.
    Navigate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        localizer: Option<LocalizerChoice>,
        #[arg(long)]
        planner: Option<PlannerChoice>,
        /// Time limit per episode (s).
        #[arg(long)]
        duration: Option<f64>,
        /// Also write each episode's trajectory log.
        #[arg(long)]
        trajectories: bool,
    },
    /// Render a trajectory log as a PPM frame sequence.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Scenario for extent, obstacles and goal; otherwise the log's bounding box.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Pixels per meter.
        #[arg(long, default_value_t = 10.0)]
        scale: f64,
        /// Render every n-th row.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Summarize run CSVs into the success / CA table.
    Report {
        /// Run CSVs written by `navigate`.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

fn parse_seed_list(s: &str) -> Result<SeedList, String> {
    parse_seeds(s).map(SeedList)
}

fn parse_point(s: &str) -> Result<Vec2, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got '{s}'"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad coordinate '{v}'"));
    Ok(Vec2::new(p(x)?, p(y)?))
}

/// Flags merged over the config file.
struct Context {
    cfg: ExperimentConfig,
    seeds: Vec<u64>,
    out: PathBuf,
}

impl Context {
    fn new(g: &Global) -> CliResult<Self> {
        let cfg = match &g.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let seeds = match (g.seed, &g.seeds) {
            (Some(s), _) => vec![s],
            (None, Some(s)) => s.0.clone(),
            (None, None) => cfg.seeds.clone().unwrap_or_else(|| vec![1]),
        };
        let out = g.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        Ok(Context { cfg, seeds, out })
    }

    fn scenario(&self, flag: &Option<PathBuf>) -> CliResult<Scenario> {
        let path = flag
            .clone()
            .or_else(|| self.cfg.scenario.clone())
            .ok_or_else(|| CliError::Usage("no scenario given (use --scenario or the config's \"scenario\")".into()))?;
        read_scenario(&path)
    }

    fn map_path(&self, flag: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.cfg.map.clone())
    }

    /// The map from `--map`/config, or a fresh mapping session when the
    /// config's stage is `full`.
    fn map(&self, flag: &Option<PathBuf>, scenario: &Scenario, why: &str) -> CliResult<CrowdFlowMap> {
        if let Some(p) = self.map_path(flag) {
            return read_map(&p);
        }
        if self.cfg.stage == Some(Stage::Full) {
            let seed = self.cfg.map_seed.unwrap_or(self.seeds[0]);
            eprintln!("building flow map (seed {seed}, {} s)", self.cfg.mapping.duration);
            return Ok(mapping_session(scenario, seed, &scenario.tour_points(), &self.cfg.mapping).map);
        }
        Err(CliError::Usage(format!("{why} needs a flow map (use --map)")))
    }

    fn out_dir(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_scenario(path: &Path) -> CliResult<Scenario> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::Usage(format!("{}: not UTF-8", path.display())))?;
    load_scenario(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_map(path: &Path) -> CliResult<CrowdFlowMap> {
    load_map(&read_input(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_with(path, |w| writeln!(w, "{text}"))
}

/// Fresh bird-view observations sampled once a second for `seconds`, from a
/// world independent of the mapping run.
fn reference_observations(scenario: &Scenario, seed: u64, seconds: f64) -> Vec<crowdnav::crowd_sim::MovementObservation> {
    let mut world = World::with_seed(scenario.clone(), SimParams::default(), SeedTree::new(seed).child("references").seed());
    let dt = world.params.dt;
    let per_second = (1.0 / dt).round() as usize;
    let mut refs = Vec::new();
    for k in 1..=(seconds / dt).round() as usize {
        world.step(dt);
        if k % per_second == 0 {
            refs.extend(world.birdview_observations());
        }
    }
    refs
}

fn cmd_map(ctx: &Context, scenario: &Option<PathBuf>, duration: Option<f64>) -> CliResult {
    let sc = ctx.scenario(scenario)?;
    let mut cfg = ctx.cfg.mapping.clone();
    if let Some(d) = duration {
        cfg.duration = d;
    }
    if !(cfg.duration >= 0.0) {
        return Err(CliError::Usage(format!("duration must be non-negative, got {}", cfg.duration)));
    }
    let seed = ctx.seeds[0];
    let out = mapping_session(&sc, seed, &sc.tour_points(), &cfg);
    let dir = ctx.out_dir()?;
    write_with(&dir.join("map.json"), |w| w.write_all(&save_map(&out.map, false)))?;
    write_with(&dir.join("quality.csv"), |w| write_quality_csv(w, &out.quality))?;
    let refs = reference_observations(&sc, seed, 60.0);
    let per_cell = cell_quality(&out.map, &refs);
    write_with(&dir.join("heatmap.pgm"), |w| write_heatmap(w, &out.map, &per_cell))?;
    let last = out.quality.last().map_or(0.0, |q| q.1);
    println!(
        "{}: {} mapped cells, final quality {last:.3} -> {}",
        sc.name,
        out.map.mapped_cells(),
        dir.display()
    );
    Ok(())
}

fn cmd_localize(ctx: &Context, scenario: &Option<PathBuf>, map: &Option<PathBuf>, duration: Option<f64>) -> CliResult {
    let sc = ctx.scenario(scenario)?;
    let flow = ctx.map(map, &sc, "localization")?;
    let mut cfg = ctx.cfg.localization.clone();
    if let Some(d) = duration {
        cfg.duration = d;
    }
    let outs = par_seeds(&ctx.seeds, |s| localization_run(&sc, s, &flow, &cfg));
    let dir = ctx.out_dir()?;
    let mut rows = Vec::new();
    for (&seed, o) in ctx.seeds.iter().zip(outs) {
        let o = o?;
        write_with(&dir.join(format!("trajectory_seed{seed}.csv")), |w| write_trajectory_log(w, &o.trajectory))?;
        write_with(&dir.join(format!("localization_seed{seed}.csv")), |w| write_localization_log(w, &o.log))?;
        rows.push((seed, o.crowd_mse, o.odometry_mse));
    }
    write_with(&dir.join("localization.csv"), |w| {
        writeln!(w, "seed,crowd_mse,odometry_mse")?;
        for (s, c, o) in &rows {
            writeln!(w, "{s},{c},{o}")?;
        }
        Ok(())
    })?;
    let n = rows.len() as f64;
    let crowd = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let odom = rows.iter().map(|r| r.2).sum::<f64>() / n;
    println!("{}: crowd MSE {crowd:.3} m², odometry MSE {odom:.3} m² over {} seeds", sc.name, rows.len());
    Ok(())
}

fn grid_cell(map: &CrowdFlowMap, p: Vec2) -> CliResult<Cell> {
    map.cell_of(p)
        .ok_or_else(|| CliError::Usage(format!("point ({}, {}) lies outside the map", p.x, p.y)))
}

fn cmd_plan(
    ctx: &Context,
    scenario: &Option<PathBuf>,
    map: &Option<PathBuf>,
    planner: Option<PlannerChoice>,
    start: Option<Vec2>,
    goal: Option<Vec2>,
) -> CliResult {
    let sc = ctx.scenario(scenario)?;
    let planner = planner.unwrap_or(ctx.cfg.episode.planner);
    let weights: CostWeights = ctx.cfg.episode.weights;
    let flow = if planner.needs_map() {
        ctx.map(map, &sc, &format!("planner '{planner}'"))?
    } else {
        CrowdFlowMap::covering(sc.extent.w, sc.extent.h, ctx.cfg.episode.mapper.resolution)
    };
    let s = grid_cell(&flow, start.unwrap_or_else(|| sc.robot_start().position()))?;
    let g = grid_cell(&flow, goal.unwrap_or_else(|| sc.robot_goal()))?;
    let result = match planner {
        PlannerChoice::AstarShortest => plan_astar(&flow, s, g, weights, false),
        PlannerChoice::AstarSocial => plan_astar(&flow, s, g, weights, true),
        PlannerChoice::DstarCrowd => plan_dstar(&flow, s, g, weights).1,
    };
    let path = result
        .path
        .ok_or_else(|| CliError::Runtime(format!("no path from {s:?} to {g:?}")))?;
    let dir = ctx.out_dir()?;
    write_with(&dir.join("path.csv"), |w| write_path_csv(w, &path))?;
    println!(
        "{planner}: {} cells, {:.2} m, cost {:.3}, {} expansions",
        path.cells.len(),
        path.length_m(),
        path.total_cost,
        result.expansions
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_navigate(
    ctx: &Context,
    scenario: &Option<PathBuf>,
    map: &Option<PathBuf>,
    localizer: Option<LocalizerChoice>,
    planner: Option<PlannerChoice>,
    duration: Option<f64>,
    trajectories: bool,
) -> CliResult {
    let sc = ctx.scenario(scenario)?;
    let mut cfg = ctx.cfg.episode.clone();
    if let Some(l) = localizer {
        cfg.localizer = l;
    }
    if let Some(p) = planner {
        cfg.planner = p;
    }
    if duration.is_some() {
        cfg.budget = duration;
    }
    let flow = if cfg.localizer.needs_map() || cfg.planner.needs_map() {
        let why = format!("localizer '{}' with planner '{}'", cfg.localizer, cfg.planner);
        Some(ctx.map(map, &sc, &why)?)
    } else {
        None
    };
    let outs = par_seeds(&ctx.seeds, |s| run_episode(&sc, s, flow.as_ref(), &cfg));
    let dir = ctx.out_dir()?;
    let mut reports = Vec::new();
    for o in outs {
        let o = o?;
        if trajectories {
            let tdir = dir.join("trajectories");
            std::fs::create_dir_all(&tdir).map_err(|e| CliError::Runtime(format!("{}: {e}", tdir.display())))?;
            let path = tdir.join(format!("seed{}.csv", o.report.seed));
            write_with(&path, |w| write_trajectory_log(w, &o.trajectory))?;
        }
        reports.push(o.report);
    }
    write_with(&dir.join("runs.csv"), |w| write_reports_csv(w, &reports))?;
    let summary = summarize(&reports);
    write_json(&dir.join("summary.json"), &summary)?;
    print!("{}", format_table(std::slice::from_ref(&summary)));
    Ok(())
}

fn cmd_replay(ctx: &Context, log: &Path, scenario: &Option<PathBuf>, scale: f64, every: usize) -> CliResult {
    if !(scale > 0.0) || every == 0 {
        return Err(CliError::Usage("scale and every must be positive".into()));
    }
    let file = File::open(log).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", log.display())))?;
    let rows = read_trajectory_log(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", log.display())))?;
    let sc = match scenario.clone().or_else(|| ctx.cfg.scenario.clone()) {
        Some(p) => Some(read_scenario(&p)?),
        None => None,
    };
    let view = match &sc {
        Some(sc) => render::View::of_scenario(sc, scale),
        None => render::View::of_log(&rows, scale),
    };
    let frames = ctx.out_dir()?.join("frames");
    std::fs::create_dir_all(&frames).map_err(|e| CliError::Runtime(format!("{}: {e}", frames.display())))?;
    let base = render::background(view, sc.as_ref());
    let mut n = 0;
    for k in (0..rows.len()).step_by(every) {
        let f = render::frame(&base, &rows, k);
        write_with(&frames.join(format!("frame_{n:06}.ppm")), |w| f.write_ppm(w))?;
        n += 1;
    }
    println!("{n} frames -> {}", frames.display());
    Ok(())
}

/// One row of a run CSV; columns as written by `navigate`.
#[derive(Debug, Deserialize)]
struct RunRow {
    scenario: String,
    seed: u64,
    localizer: LocalizerChoice,
    planner: PlannerChoice,
    success: bool,
    outcome: Outcome,
    mse: f64,
    ca_actions: usize,
    collisions: usize,
    sim_time: f64,
    path_length: f64,
    replans: usize,
    expansions: usize,
    wall_time: f64,
}

impl From<RunRow> for RunReport {
    fn from(r: RunRow) -> Self {
        RunReport {
            scenario: r.scenario,
            seed: r.seed,
            localizer: r.localizer,
            planner: r.planner,
            success: r.success,
            outcome: r.outcome,
            mse: r.mse,
            ca_actions: r.ca_actions,
            collisions: r.collisions,
            map_quality_series: Vec::new(),
            sim_time: r.sim_time,
            path_length: r.path_length,
            replans: r.replans,
            expansions: r.expansions,
            wall_time: r.wall_time,
        }
    }
}

fn cmd_report(ctx: &Context, runs: &[PathBuf]) -> CliResult {
    let mut groups: BTreeMap<(String, LocalizerChoice, PlannerChoice), Vec<RunReport>> = BTreeMap::new();
    for path in runs {
        let bytes = read_input(path)?;
        let mut rdr = csv::Reader::from_reader(&bytes[..]);
        for row in rdr.deserialize::<RunRow>() {
            let r: RunReport = row.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?.into();
            groups.entry((r.scenario.clone(), r.localizer, r.planner)).or_default().push(r);
        }
    }
    if groups.is_empty() {
        return Err(CliError::Usage("no runs in the given files".into()));
    }
    let summaries: Vec<BatchSummary> = groups.values().map(|g| summarize(g)).collect();
    let table = format_table(&summaries);
    let dir = ctx.out_dir()?;
    write_json(&dir.join("summary.json"), &summaries)?;
    write_with(&dir.join("table.txt"), |w| w.write_all(table.as_bytes()))?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let ctx = Context::new(&cli.global)?;
    match &cli.command {
        Command::Map { scenario, duration } => cmd_map(&ctx, scenario, *duration),
        Command::Localize { scenario, map, duration } => cmd_localize(&ctx, scenario, map, *duration),
        Command::Plan {
            scenario,
            map,
            planner,
            start,
            goal,
        } => cmd_plan(&ctx, scenario, map, *planner, *start, *goal),
        Command::Navigate {
            scenario,
            map,
            localizer,
            planner,
            duration,
            trajectories,
        } => cmd_navigate(&ctx, scenario, map, *localizer, *planner, *duration, *trajectories),
        Command::Replay {
            log,
            scenario,
            scale,
            every,
        } => cmd_replay(&ctx, log, scenario, *scale, *every),
        Command::Report { runs } => cmd_report(&ctx, runs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
