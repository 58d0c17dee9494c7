//! Closed-loop navigation episodes: sense, localize, (re)plan, follow, step.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::mapping::{pedestrian_positions, run_warmup, snapshot_quality};
use super::metrics::{detect_ca_actions, localization_mse, CaParams};
use crate::crowd_sim::{MovementObservation, Scenario, SimParams, TrajectoryRecord, World};
use crate::error::{Error, Result};
use crate::flow_map::{CrowdFlowMap, MapperParams};
use crate::geometry::{Pose, Vec2};
use crate::localizer::{CrowdLocalizer, LocalizerParams};
use crate::planner::{astar, follow, Cell, CostModel, CostWeights, DStarLite, FollowerParams, GridPath, PlanGrid};
use crate::rng::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizerChoice {
    /// Ground-truth pose; isolates the planner in comparisons.
    Truth,
    Odometry,
    Crowd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerChoice {
    AstarShortest,
    AstarSocial,
    DstarCrowd,
}

impl LocalizerChoice {
    pub fn name(self) -> &'static str {
        match self {
            LocalizerChoice::Truth => "truth",
            LocalizerChoice::Odometry => "odometry",
            LocalizerChoice::Crowd => "crowd",
        }
    }

    pub fn needs_map(self) -> bool {
        self == LocalizerChoice::Crowd
    }
}

impl PlannerChoice {
    pub fn name(self) -> &'static str {
        match self {
            PlannerChoice::AstarShortest => "astar_shortest",
            PlannerChoice::AstarSocial => "astar_social",
            PlannerChoice::DstarCrowd => "dstar_crowd",
        }
    }

    pub fn needs_map(self) -> bool {
        self != PlannerChoice::AstarShortest
    }
}

impl fmt::Display for LocalizerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for PlannerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LocalizerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truth" => Ok(LocalizerChoice::Truth),
            "odometry" | "odom" => Ok(LocalizerChoice::Odometry),
            "crowd" => Ok(LocalizerChoice::Crowd),
            _ => Err(Error::Config(format!("unknown localizer '{s}'"))),
        }
    }
}

impl FromStr for PlannerChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "astar_shortest" | "shortest" => Ok(PlannerChoice::AstarShortest),
            "astar_social" | "astar" => Ok(PlannerChoice::AstarSocial),
            "dstar_crowd" | "dstar" | "crowd" => Ok(PlannerChoice::DstarCrowd),
            _ => Err(Error::Config(format!("unknown planner '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Timeout,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub localizer: LocalizerChoice,
    pub planner: PlannerChoice,
    pub success: bool,
    pub outcome: Outcome,
    /// Localization MSE over the episode (m²).
    pub mse: f64,
    pub ca_actions: usize,
    pub collisions: usize,
    pub map_quality_series: Vec<(f64, f64)>,
    /// Simulated seconds until arrival or timeout.
    pub sim_time: f64,
    pub path_length: f64,
    pub replans: usize,
    pub expansions: usize,
    pub wall_time: f64,
}

impl RunReport {
    /// The report with its only nondeterministic field zeroed.
    pub fn without_timing(&self) -> RunReport {
        RunReport {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub localizer: LocalizerChoice,
    pub planner: PlannerChoice,
    /// Time limit (s); defaults to twice the shortest-path time.
    pub budget: Option<f64>,
    pub weights: CostWeights,
    pub follower: FollowerParams,
    #[serde(skip)]
    pub localizer_params: LocalizerParams,
    #[serde(skip)]
    pub mapper: MapperParams,
    #[serde(skip)]
    pub sim: SimParams,
    pub ca: CaParams,
    pub replan_period: f64,
    /// Seconds between fusions of sensed flow into the planner's map copy.
    pub fuse_period: f64,
    /// True distance to the goal that counts as arrival (m).
    pub success_radius: f64,
    pub warmup: f64,
    pub quality_period: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            localizer: LocalizerChoice::Crowd,
            planner: PlannerChoice::DstarCrowd,
            budget: None,
            weights: CostWeights::default(),
            follower: FollowerParams::default(),
            localizer_params: LocalizerParams::default(),
            mapper: MapperParams::default(),
            sim: SimParams::default(),
            ca: CaParams::default(),
            replan_period: 1.0,
            fuse_period: 1.0,
            success_radius: 1.0,
            warmup: 2.0,
            quality_period: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    pub report: RunReport,
    pub trajectory: Vec<TrajectoryRecord>,
    /// Final plan.
    pub path: Option<GridPath>,
}

enum Belief {
    Truth,
    Odometry,
    Crowd(Box<CrowdLocalizer>),
}

enum Plan {
    Once(Option<GridPath>),
    Incremental { planner: Box<DStarLite>, online: Box<CrowdFlowMap>, path: Option<GridPath> },
}

impl Plan {
    fn path(&self) -> Option<&GridPath> {
        match self {
            Plan::Once(p) => p.as_ref(),
            Plan::Incremental { path, .. } => path.as_ref(),
        }
    }
}

fn clamp_cell(grid: &PlanGrid, p: Vec2) -> Cell {
    let i = ((p.x - grid.origin.x) / grid.resolution).floor();
    let j = ((p.y - grid.origin.y) / grid.resolution).floor();
    (
        i.clamp(0.0, (grid.width - 1) as f64) as usize,
        j.clamp(0.0, (grid.height - 1) as f64) as usize,
    )
}

/// World points of `path` with the final cell center replaced by the exact goal.
fn waypoints(path: &GridPath, goal: Vec2) -> Vec<Vec2> {
    let mut pts = path.world_points.clone();
    if let Some(last) = pts.last_mut() {
        *last = goal;
    }
    pts
}

/// Length of the distance-optimal grid route from `start` to `goal` (m).
pub fn shortest_route_length(scenario: &Scenario, start: Vec2, goal: Vec2, resolution: f64) -> f64 {
    let map = CrowdFlowMap::covering(scenario.extent.w, scenario.extent.h, resolution);
    let grid = PlanGrid::from_map(&map, CostWeights::default(), CostModel::Distance);
    let (s, g) = (clamp_cell(&grid, start), clamp_cell(&grid, goal));
    match astar(&grid, s, g).path {
        Some(p) => {
            let mut pts = waypoints(&p, goal);
            pts[0] = start;
            pts.windows(2).map(|w| w[0].distance(w[1])).sum()
        }
        None => start.distance(goal),
    }
}

/// Runs one navigation episode from the scenario's start to its goal.
/// `map` is the prebuilt flow map, required by the crowd localizer and the
/// crowd-aware planners.
pub fn run_episode(scenario: &Scenario, seed: u64, map: Option<&CrowdFlowMap>, cfg: &EpisodeConfig) -> Result<EpisodeOutput> {
    let clock = Instant::now();
    let needs_map = cfg.localizer.needs_map() || cfg.planner.needs_map();
    if needs_map && map.is_none() {
        return Err(Error::Config(format!(
            "localizer '{}' with planner '{}' needs a prebuilt flow map",
            cfg.localizer, cfg.planner
        )));
    }
    let seeds = SeedTree::new(seed);
    let mut world = World::with_seed(scenario.clone(), cfg.sim.clone(), seeds.child("world").seed());
    run_warmup(&mut world, cfg.warmup);
    let dt = world.params.dt;
    let goal = scenario.robot_goal();
    let start = world.robot.true_pose;

    let blank;
    let base_map = match map {
        Some(m) => m,
        None => {
            blank = CrowdFlowMap::covering(scenario.extent.w, scenario.extent.h, cfg.mapper.resolution);
            &blank
        }
    };
    let model = match cfg.planner {
        PlannerChoice::AstarShortest => CostModel::Distance,
        _ => CostModel::Social,
    };
    let grid = PlanGrid::from_map(base_map, cfg.weights, model);
    let goal_cell = clamp_cell(&grid, goal);

    let mut belief = match cfg.localizer {
        LocalizerChoice::Truth => Belief::Truth,
        LocalizerChoice::Odometry => Belief::Odometry,
        LocalizerChoice::Crowd => Belief::Crowd(Box::new(CrowdLocalizer::new(
            start,
            cfg.localizer_params,
            seeds.rng("localizer"),
        ))),
    };
    let believed = |world: &World, belief: &Belief| -> Pose {
        match belief {
            Belief::Truth => world.robot.true_pose,
            Belief::Odometry => world.robot.odom_pose,
            Belief::Crowd(l) => l.estimate(),
        }
    };

    let mut expansions = 0;
    let mut replans = 0;
    let mut est = believed(&world, &belief);
    let mut cell = clamp_cell(&grid, est.position());
    let mut plan = match cfg.planner {
        PlannerChoice::AstarShortest | PlannerChoice::AstarSocial => {
            let r = astar(&grid, cell, goal_cell);
            expansions += r.expansions;
            Plan::Once(r.path)
        }
        PlannerChoice::DstarCrowd => {
            let mut d = DStarLite::new(grid.clone(), cell, goal_cell);
            let r = d.plan();
            expansions += r.expansions;
            Plan::Incremental {
                planner: Box::new(d),
                online: Box::new(base_map.clone()),
                path: r.path,
            }
        }
    };

    let budget = cfg
        .budget
        .unwrap_or_else(|| 2.0 * shortest_route_length(scenario, start.position(), goal, grid.resolution) / cfg.follower.v_max);
    let max_steps = (budget / dt).ceil() as u64;
    let fuse_every = ((cfg.fuse_period / dt).round() as u64).max(1);
    let update_every = ((cfg.localizer_params.update_period / dt).round() as u64).max(1);
    let quality_every = ((cfg.quality_period / dt).round() as u64).max(1);
    let collision_distance = world.robot.radius + world.params.agent_radius;

    let mut positions = vec![start.position()];
    let mut truth_track = vec![(0.0, start.position())];
    let mut est_track = vec![(0.0, est.position())];
    let mut trajectory = Vec::new();
    let mut quality_series = Vec::new();
    let mut collisions = 0;
    let mut in_contact = false;
    let mut pending: BTreeSet<Cell> = BTreeSet::new();
    let mut since_replan = 0.0;
    let mut arrived = world.robot.true_pose.position().distance(goal) <= cfg.success_radius;
    let mut steps = 0;

    while !arrived && steps < max_steps {
        let obs = world.sense_pedestrians();
        est = believed(&world, &belief);
        let t = steps as f64 * dt;

        if let Plan::Incremental { online, .. } = &mut plan {
            if steps % quality_every == 0 {
                quality_series.push((t, snapshot_quality(online, &world.birdview_observations(), &cfg.mapper)));
            }
        } else if map.is_some() && steps == 0 {
            quality_series.push((0.0, snapshot_quality(base_map, &world.birdview_observations(), &cfg.mapper)));
        }

        if let Plan::Incremental { planner, online, path } = &mut plan {
            if steps > 0 && steps % fuse_every == 0 && !obs.is_empty() {
                let global: Vec<MovementObservation> = obs.iter().map(|o| o.to_global(&est)).collect();
                pending.extend(online.fuse(&global, &cfg.mapper));
            }
            let now_cell = clamp_cell(planner.grid(), est.position());
            let on_path = path
                .as_ref()
                .is_some_and(|p| p.cells.iter().any(|c| pending.contains(c)));
            if steps > 0 && (since_replan >= cfg.replan_period - 1e-9 || now_cell != cell || on_path) {
                let changed: Vec<Cell> = pending.iter().copied().collect();
                let r = planner.replan(online, &changed, now_cell);
                pending.clear();
                expansions += r.expansions;
                replans += 1;
                since_replan = 0.0;
                *path = r.path;
            }
            cell = now_cell;
        }

        let peds = pedestrian_positions(&obs, &est);
        let cmd_believed = match plan.path() {
            Some(p) => follow(&waypoints(p, goal), &est, &peds, &cfg.follower),
            None => Vec2::ZERO,
        };
        // believed world frame -> body frame -> true world frame
        let body = cmd_believed.rotate(-est.theta);
        let cmd = body.rotate(world.robot.true_pose.theta);
        world.robot.commanded_velocity = cmd;
        trajectory.push(TrajectoryRecord {
            t,
            true_pose: world.robot.true_pose,
            odom_pose: world.robot.odom_pose,
            est_pose: est,
            cmd,
        });

        let contacts_before = world.robot_obstacle_contacts;
        world.step(dt);
        steps += 1;
        since_replan += dt;

        if let Belief::Crowd(l) = &mut belief {
            l.predict(&world.read_odometry());
            if steps % update_every == 0 {
                let obs = world.sense_pedestrians();
                if !obs.is_empty() {
                    l.update(&obs, base_map);
                }
            }
        }

        let p = world.robot.true_pose.position();
        let touching = world.robot_obstacle_contacts > contacts_before
            || world.agents.iter().any(|a| a.position.distance(p) < collision_distance);
        if touching && !in_contact {
            collisions += 1;
        }
        in_contact = touching;
        let t = steps as f64 * dt;
        positions.push(p);
        truth_track.push((t, p));
        est_track.push((t, believed(&world, &belief).position()));
        arrived = p.distance(goal) <= cfg.success_radius;
    }

    let outcome = if collisions > 0 {
        Outcome::Collision
    } else if arrived {
        Outcome::Success
    } else {
        Outcome::Timeout
    };
    let mse = localization_mse(&est_track, &truth_track).unwrap_or(0.0);
    let ca_actions = detect_ca_actions(&positions, dt, &cfg.ca)?;
    let final_path = plan.path().cloned();
    let report = RunReport {
        scenario: scenario.name.clone(),
        seed,
        localizer: cfg.localizer,
        planner: cfg.planner,
        success: outcome == Outcome::Success,
        outcome,
        mse,
        ca_actions,
        collisions,
        map_quality_series: quality_series,
        sim_time: steps as f64 * dt,
        path_length: positions.windows(2).map(|w| w[0].distance(w[1])).sum(),
        replans,
        expansions,
        wall_time: clock.elapsed().as_secs_f64(),
    };
    Ok(EpisodeOutput {
        report,
        trajectory,
        path: final_path,
    })
}
