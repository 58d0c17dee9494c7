use serde::{Deserialize, Serialize};

use crate::crowd_sim::{MovementObservation, Scenario, SimParams, World};
use crate::error::Error;
use crate::flow_map::{map_quality, CrowdFlowMap, MapperParams};
use crate::geometry::{Pose, Vec2};
use crate::planner::{lookahead_point, pursue, FollowerParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingConfig {
    pub duration: f64,
    /// Seconds between sensing sweeps fused into the map.
    pub sense_period: f64,
    /// Seconds between map-quality samples.
    pub quality_period: f64,
    /// Crowd simulated before the session starts so every pedestrian has a
    /// full observation window at t = 0.
    pub warmup: f64,
    #[serde(skip)]
    pub mapper: MapperParams,
    pub follower: FollowerParams,
    #[serde(skip)]
    pub sim: SimParams,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            duration: 600.0,
            sense_period: 0.5,
            quality_period: 10.0,
            warmup: 2.0,
            mapper: MapperParams::default(),
            follower: FollowerParams::default(),
            sim: SimParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MappingOutcome {
    /// Map with every pending sample clustered.
    pub map: CrowdFlowMap,
    /// (t, quality) sampled every `quality_period` from t = 0.
    pub quality: Vec<(f64, f64)>,
}

/// Current positions of observed pedestrians, in the frame of `pose`'s parent.
pub fn pedestrian_positions(observations: &[MovementObservation], pose: &Pose) -> Vec<Vec2> {
    observations
        .iter()
        .map(|o| pose.to_world(o.start + Vec2::from_polar(o.length, o.direction)))
        .collect()
}

/// Quality of `map` against fresh bird-view references, scoring the map as
/// it would be after clustering every pending sample. No references scores 0.
pub fn snapshot_quality(map: &CrowdFlowMap, references: &[MovementObservation], params: &MapperParams) -> f64 {
    let mut snap = map.clone();
    snap.flush(params);
    match map_quality(&snap, references) {
        Ok(q) => q,
        Err(Error::NoReferences) => 0.0,
        Err(e) => unreachable!("{e}"),
    }
}

pub(crate) fn run_warmup(world: &mut World, warmup: f64) {
    let dt = world.params.dt;
    let steps = (warmup / dt).round() as usize;
    world.robot.commanded_velocity = Vec2::ZERO;
    for _ in 0..steps {
        world.step(dt);
    }
}

/// Drives the robot around `tour` (a closed loop) with ground-truth pose,
/// fusing everything it senses into a fresh map.
pub fn mapping_session(scenario: &Scenario, seed: u64, tour: &[Vec2], cfg: &MappingConfig) -> MappingOutcome {
    assert!(!tour.is_empty(), "tour needs at least one waypoint");
    let mut world = World::with_seed(scenario.clone(), cfg.sim.clone(), seed);
    let start = Pose::new(tour[0].x, tour[0].y, 0.0);
    world.robot.true_pose = start;
    world.robot.odom_pose = start;
    run_warmup(&mut world, cfg.warmup);

    let mut map = CrowdFlowMap::covering(scenario.extent.w, scenario.extent.h, cfg.mapper.resolution);
    let mut quality = Vec::new();
    // loop closed by repeating the tour once; projection always lands on the first lap
    let mut lap: Vec<Vec2> = tour.to_vec();
    lap.extend_from_slice(tour);
    lap.push(tour[0]);

    let dt = world.params.dt;
    let steps = (cfg.duration / dt).round() as u64;
    let sense_every = ((cfg.sense_period / dt).round() as u64).max(1);
    let quality_every = ((cfg.quality_period / dt).round() as u64).max(1);
    for k in 0..=steps {
        if k % sense_every == 0 && k > 0 {
            let pose = world.robot.true_pose;
            let obs: Vec<MovementObservation> = world.sense_pedestrians().iter().map(|o| o.to_global(&pose)).collect();
            map.fuse(&obs, &cfg.mapper);
        }
        if k % quality_every == 0 {
            let q = snapshot_quality(&map, &world.birdview_observations(), &cfg.mapper);
            quality.push((k as f64 * dt, q));
        }
        if k == steps {
            break;
        }
        let pose = world.robot.true_pose;
        let peds = pedestrian_positions(&world.sense_pedestrians(), &pose);
        let p = pose.position();
        let target = if tour.len() == 1 {
            tour[0]
        } else {
            lookahead_point(&lap, p, cfg.follower.lookahead)
        };
        world.robot.commanded_velocity = if p.distance(target) < 1e-9 {
            Vec2::ZERO
        } else {
            pursue(p, target, &peds, &cfg.follower)
        };
        world.step(dt);
    }
    map.flush(&cfg.mapper);
    MappingOutcome { map, quality }
}
