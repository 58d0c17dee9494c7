//! Passive localization runs: the robot wanders with ground-truth control
//! while the localizer tracks it from odometry and crowd observations.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mapping::{pedestrian_positions, run_warmup};
use super::metrics::localization_mse;
use crate::crowd_sim::{Scenario, SimParams, TrajectoryRecord, World};
use crate::error::Result;
use crate::flow_map::CrowdFlowMap;
use crate::geometry::{Pose, Vec2};
use crate::localizer::{CrowdLocalizer, LocalizerParams};
use crate::planner::{astar, follow, CostModel, CostWeights, FollowerParams, PlanGrid};
use crate::rng::{SeedTree, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizationConfig {
    pub duration: f64,
    #[serde(skip)]
    pub localizer: LocalizerParams,
    #[serde(skip)]
    pub sim: SimParams,
    pub follower: FollowerParams,
    pub warmup: f64,
    /// Seconds spent on one waypoint before giving up on it.
    pub waypoint_timeout: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            duration: 300.0,
            localizer: LocalizerParams::default(),
            sim: SimParams::default(),
            follower: FollowerParams::default(),
            warmup: 2.0,
            waypoint_timeout: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationSample {
    pub t: f64,
    pub estimate: Pose,
    pub ess: f64,
    pub observations: usize,
}

pub const LOCALIZATION_HEADER: &str = "t,est_x,est_y,est_th,ess,n_obs";

pub fn write_localization_log<W: Write>(mut out: W, rows: &[LocalizationSample]) -> std::io::Result<()> {
    writeln!(out, "{LOCALIZATION_HEADER}")?;
    for r in rows {
        let e = r.estimate;
        writeln!(out, "{},{},{},{},{},{}", r.t, e.x, e.y, e.theta, r.ess, r.observations)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LocalizationOutcome {
    pub crowd_mse: f64,
    pub odometry_mse: f64,
    /// One sample per measurement update.
    pub log: Vec<LocalizationSample>,
    pub trajectory: Vec<TrajectoryRecord>,
}

/// Free-space grid used by the ground-truth driver.
fn driver_grid(scenario: &Scenario, clearance: f64) -> PlanGrid {
    let map = CrowdFlowMap::covering(scenario.extent.w, scenario.extent.h, 1.0);
    let mut grid = PlanGrid::from_map(&map, CostWeights::default(), CostModel::Distance);
    for j in 0..grid.height {
        for i in 0..grid.width {
            if !scenario.is_free(grid.center((i, j)), clearance) {
                grid.set_blocked((i, j), true);
            }
        }
    }
    grid
}

fn random_free_cell(grid: &PlanGrid, rng: &mut SimRng) -> Option<(usize, usize)> {
    for _ in 0..1000 {
        let c = (rng.random_range(0..grid.width), rng.random_range(0..grid.height));
        if !grid.is_blocked(c) {
            return Some(c);
        }
    }
    None
}

/// Wanders between random free waypoints for `duration` seconds and scores
/// both the crowd localizer and raw odometry against ground truth.
pub fn localization_run(scenario: &Scenario, seed: u64, map: &CrowdFlowMap, cfg: &LocalizationConfig) -> Result<LocalizationOutcome> {
    let seeds = SeedTree::new(seed);
    let mut world = World::with_seed(scenario.clone(), cfg.sim.clone(), seeds.child("world").seed());
    run_warmup(&mut world, cfg.warmup);
    let start = world.robot.true_pose;
    let mut localizer = CrowdLocalizer::new(start, cfg.localizer, seeds.rng("localizer"));
    let mut wander = seeds.rng("waypoints");
    let grid = driver_grid(scenario, world.robot.radius + 0.3);

    let dt = world.params.dt;
    let steps = (cfg.duration / dt).round() as u64;
    let update_every = ((cfg.localizer.update_period / dt).round() as u64).max(1);
    let mut route: Vec<Vec2> = Vec::new();
    let mut route_age = 0.0;
    let mut truth = vec![(0.0, start.position())];
    let mut crowd = vec![(0.0, localizer.estimate().position())];
    let mut odom = vec![(0.0, world.robot.odom_pose.position())];
    let mut log = Vec::new();
    let mut trajectory = Vec::new();

    for k in 0..steps {
        let pose = world.robot.true_pose;
        let p = pose.position();
        let done = route.last().is_none_or(|g| g.distance(p) < cfg.follower.goal_tolerance);
        if done || route_age > cfg.waypoint_timeout {
            route.clear();
            route_age = 0.0;
            let here = grid.cell_of(p).unwrap_or((0, 0));
            for _ in 0..20 {
                let Some(target) = random_free_cell(&grid, &mut wander) else { break };
                if let Some(path) = astar(&grid, here, target).path {
                    if path.cells.len() > 1 {
                        route = path.world_points;
                        break;
                    }
                }
            }
        }
        let obs = world.sense_pedestrians();
        let cmd = if route.is_empty() {
            Vec2::ZERO
        } else {
            follow(&route, &pose, &pedestrian_positions(&obs, &pose), &cfg.follower)
        };
        world.robot.commanded_velocity = cmd;
        trajectory.push(TrajectoryRecord {
            t: k as f64 * dt,
            true_pose: pose,
            odom_pose: world.robot.odom_pose,
            est_pose: localizer.estimate(),
            cmd,
        });
        world.step(dt);
        route_age += dt;

        localizer.predict(&world.read_odometry());
        let t = (k + 1) as f64 * dt;
        if (k + 1) % update_every == 0 {
            let obs = world.sense_pedestrians();
            if !obs.is_empty() {
                localizer.update(&obs, map);
            }
            log.push(LocalizationSample {
                t,
                estimate: localizer.estimate(),
                ess: localizer.ess(),
                observations: obs.len(),
            });
        }
        truth.push((t, world.robot.true_pose.position()));
        crowd.push((t, localizer.estimate().position()));
        odom.push((t, world.robot.odom_pose.position()));
    }
    Ok(LocalizationOutcome {
        crowd_mse: localization_mse(&crowd, &truth)?,
        odometry_mse: localization_mse(&odom, &truth)?,
        log,
        trajectory,
    })
}
