//! Social-force pedestrian dynamics plus a holonomic robot with drifting odometry.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;

use super::scenario::Scenario;
use crate::geometry::{normalize_angle, Pose, PoseDelta, Vec2};
use crate::rng::{SeedTree, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub dt: f64,
    /// Observation window Δt (s).
    pub window: f64,
    pub goal_gain: f64,
    pub repulsion_strength: f64,
    pub repulsion_range: f64,
    pub interaction_cutoff: f64,
    pub agent_radius: f64,
    pub speed_range: (f64, f64),
    pub respawn_jitter: f64,
    /// Extra gap (m) the robot must leave around a lane start before an
    /// agent may respawn there; the agent lingers at its lane end meanwhile.
    pub spawn_clearance: f64,
    pub waypoint_tolerance: f64,
    /// Agents closer than this fraction of their summed radii are pushed apart.
    pub contact_fraction: f64,
    pub odom_trans_coeff: f64,
    pub odom_rot_coeff: f64,
    pub odom_rot_per_trans: f64,
    pub robot_radius: f64,
    pub perception_range: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            window: 1.0,
            goal_gain: 2.0,
            repulsion_strength: 2.0,
            repulsion_range: 0.3,
            interaction_cutoff: 2.5,
            agent_radius: 0.25,
            speed_range: (0.8, 1.4),
            respawn_jitter: 0.5,
            spawn_clearance: 1.0,
            waypoint_tolerance: 1.0,
            contact_fraction: 0.6,
            odom_trans_coeff: 0.05,
            odom_rot_coeff: 0.05,
            odom_rot_per_trans: 0.002,
            robot_radius: 0.3,
            perception_range: 5.0,
        }
    }
}

impl SimParams {
    pub fn without_odometry_noise(mut self) -> Self {
        self.odom_trans_coeff = 0.0;
        self.odom_rot_coeff = 0.0;
        self.odom_rot_per_trans = 0.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: u64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub preferred_speed: f64,
    pub radius: f64,
    pub lane_index: usize,
    pub waypoint_index: usize,
    /// Traverses its lane back to front (bidirectional lanes only).
    pub reverse: bool,
    /// Positions over the last observation window, oldest first.
    pub history: VecDeque<(f64, Vec2)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub true_pose: Pose,
    pub odom_pose: Pose,
    /// World-frame velocity command (m/s).
    pub commanded_velocity: Vec2,
    pub radius: f64,
    pub perception_range: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub params: SimParams,
    pub time: f64,
    pub steps: u64,
    pub agents: Vec<AgentState>,
    pub robot: RobotState,
    /// Latest true and odometry body-frame increments.
    pub last_true_delta: PoseDelta,
    pub last_odom_delta: PoseDelta,
    /// Steps on which the robot touched a static obstacle.
    pub robot_obstacle_contacts: u64,
    lanes: Vec<Vec<Vec2>>,
    next_id: u64,
    agent_rng: SimRng,
    odom_rng: SimRng,
}

/// Uniform bucket grid for neighbor queries; iteration order is deterministic.
struct Buckets {
    size: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn build(points: impl Iterator<Item = Vec2>, w: f64, h: f64, size: f64) -> Self {
        let nx = ((w / size).ceil() as usize).max(1);
        let ny = ((h / size).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        let mut b = Buckets { size, nx, ny, cells: Vec::new() };
        for (k, p) in points.enumerate() {
            let (i, j) = b.index(p);
            cells[j * nx + i].push(k);
        }
        b.cells = cells;
        b
    }

    fn index(&self, p: Vec2) -> (usize, usize) {
        let i = ((p.x / self.size).floor().max(0.0) as usize).min(self.nx - 1);
        let j = ((p.y / self.size).floor().max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    fn for_each_near(&self, p: Vec2, mut f: impl FnMut(usize)) {
        let (i, j) = self.index(p);
        for jj in j.saturating_sub(1)..=(j + 1).min(self.ny - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(self.nx - 1) {
                for &k in &self.cells[jj * self.nx + ii] {
                    f(k);
                }
            }
        }
    }
}

impl World {
    pub fn new(scenario: Scenario, params: SimParams) -> Self {
        Self::with_seed(scenario.clone(), params, scenario.seed)
    }

    /// Builds a world whose randomness derives from `seed` rather than the
    /// scenario's own seed.
    pub fn with_seed(scenario: Scenario, params: SimParams, seed: u64) -> Self {
        let tree = SeedTree::new(seed).child("world");
        let lanes: Vec<Vec<Vec2>> = scenario.lanes.iter().map(|l| l.points()).collect();
        let start = scenario.robot_start();
        let robot = RobotState {
            true_pose: start,
            odom_pose: start,
            commanded_velocity: Vec2::ZERO,
            radius: params.robot_radius,
            perception_range: params.perception_range,
        };
        let mut world = World {
            scenario,
            params,
            time: 0.0,
            steps: 0,
            agents: Vec::new(),
            robot,
            last_true_delta: PoseDelta::default(),
            last_odom_delta: PoseDelta::default(),
            robot_obstacle_contacts: 0,
            lanes,
            next_id: 0,
            agent_rng: tree.rng("agents"),
            odom_rng: tree.rng("odometry"),
        };
        world.populate();
        world
    }

    /// Population per lane: proportional to rate × length, largest remainder.
    fn lane_quota(&self) -> Vec<usize> {
        let total = self.scenario.agent_count();
        let weights: Vec<f64> = self.scenario.lanes.iter().map(|l| l.rate * l.length()).collect();
        let sum: f64 = weights.iter().sum();
        if total == 0 || sum <= 0.0 {
            return vec![0; weights.len()];
        }
        let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
        let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut rest: Vec<usize> = (0..exact.len()).collect();
        rest.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let missing = total - quota.iter().sum::<usize>();
        for &k in rest.iter().take(missing) {
            quota[k] += 1;
        }
        quota
    }

    fn populate(&mut self) {
        let quota = self.lane_quota();
        for (lane, &n) in quota.iter().enumerate() {
            let pts = self.lanes[lane].clone();
            let bidirectional = self.scenario.lanes[lane].bidirectional;
            let len: f64 = pts.windows(2).map(|w| w[0].distance(w[1])).sum();
            for k in 0..n {
                let reverse = bidirectional && k % 2 == 1;
                let s = self.agent_rng.random::<f64>() * len;
                let (pos, seg) = point_at(&pts, s);
                // waypoint index counts along the traversal direction
                let waypoint_index = if reverse { pts.len() - 1 - seg } else { seg + 1 };
                let jitter = self.jitter();
                let pos = self.clamp_to_extent(pos + jitter, self.params.agent_radius);
                let mut agent = self.new_agent(lane, reverse, pos, waypoint_index);
                let target = self.waypoint(&agent);
                agent.velocity = (target - agent.position).normalized() * agent.preferred_speed;
                self.agents.push(agent);
            }
        }
        for a in &mut self.agents {
            a.history.push_back((0.0, a.position));
        }
    }

    fn new_agent(&mut self, lane: usize, reverse: bool, position: Vec2, waypoint_index: usize) -> AgentState {
        let (lo, hi) = self.params.speed_range;
        let preferred_speed = lo + (hi - lo) * self.agent_rng.random::<f64>();
        let id = self.next_id;
        self.next_id += 1;
        AgentState {
            id,
            position,
            velocity: Vec2::ZERO,
            preferred_speed,
            radius: self.params.agent_radius,
            lane_index: lane,
            waypoint_index,
            reverse,
            history: VecDeque::new(),
        }
    }

    fn jitter(&mut self) -> Vec2 {
        let r = self.params.respawn_jitter * self.agent_rng.random::<f64>().sqrt();
        let a = self.agent_rng.random::<f64>() * std::f64::consts::TAU;
        Vec2::from_polar(r, a)
    }

    fn waypoint(&self, a: &AgentState) -> Vec2 {
        let pts = &self.lanes[a.lane_index];
        if a.reverse {
            pts[pts.len() - 1 - a.waypoint_index]
        } else {
            pts[a.waypoint_index]
        }
    }

    fn clamp_to_extent(&self, p: Vec2, r: f64) -> Vec2 {
        let (w, h) = (self.scenario.extent.w, self.scenario.extent.h);
        Vec2::new(p.x.clamp(r.min(w / 2.0), (w - r).max(w / 2.0)), p.y.clamp(r.min(h / 2.0), (h - r).max(h / 2.0)))
    }

    /// Advances pedestrians and the robot by `dt` seconds (0 < dt ≤ 0.2).
    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0 && dt <= 0.2, "step size {dt} outside (0, 0.2]");
        self.step_agents(dt);
        self.step_robot(dt);
        self.time += dt;
        self.steps += 1;
        let (time, window) = (self.time, self.params.window);
        for a in &mut self.agents {
            a.history.push_back((time, a.position));
            while a.history.len() >= 2 && a.history[1].0 <= time - window + 1e-9 {
                a.history.pop_front();
            }
        }
    }

    fn step_agents(&mut self, dt: f64) {
        let p = self.params.clone();
        let (w, h) = (self.scenario.extent.w, self.scenario.extent.h);
        let buckets = Buckets::build(self.agents.iter().map(|a| a.position), w, h, p.interaction_cutoff);
        let robot_pos = self.robot.true_pose.position();
        let robot_r = self.robot.radius;

        let mut accel = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.iter().enumerate() {
            let goal_dir = (self.waypoint(a) - a.position).normalized();
            let mut f = (goal_dir * a.preferred_speed - a.velocity) * p.goal_gain;
            buckets.for_each_near(a.position, |j| {
                if j == i {
                    return;
                }
                let b = &self.agents[j];
                f += repulsion(a.position, b.position, a.radius + b.radius, &p);
            });
            f += repulsion(a.position, robot_pos, a.radius + robot_r, &p);
            for o in &self.scenario.obstacles {
                let (d, n) = o.clearance(a.position);
                if d < p.interaction_cutoff {
                    f += n * (p.repulsion_strength * ((a.radius - d) / p.repulsion_range).exp());
                }
            }
            accel.push(f);
        }

        for (a, f) in self.agents.iter_mut().zip(accel) {
            a.velocity += f * dt;
            let cap = 2.0 * a.preferred_speed;
            let s = a.velocity.norm();
            if s > cap {
                a.velocity = a.velocity * (cap / s);
            }
            a.position += a.velocity * dt;
        }

        self.resolve_contacts();
        for k in 0..self.agents.len() {
            let r = self.agents[k].radius;
            let mut pos = self.agents[k].position;
            for o in &self.scenario.obstacles {
                let (d, n) = o.clearance(pos);
                if d < r {
                    pos += n * (r - d);
                }
            }
            self.agents[k].position = self.clamp_to_extent(pos, r);
        }
        self.advance_waypoints();
    }

    fn resolve_contacts(&mut self) {
        let (w, h) = (self.scenario.extent.w, self.scenario.extent.h);
        let frac = self.params.contact_fraction;
        for _ in 0..2 {
            let buckets = Buckets::build(self.agents.iter().map(|a| a.position), w, h, self.params.interaction_cutoff);
            for i in 0..self.agents.len() {
                let mut near = Vec::new();
                buckets.for_each_near(self.agents[i].position, |j| {
                    if j > i {
                        near.push(j)
                    }
                });
                near.sort_unstable();
                for j in near {
                    let min = frac * (self.agents[i].radius + self.agents[j].radius);
                    let d = self.agents[j].position - self.agents[i].position;
                    let dist = d.norm();
                    if dist < min {
                        let n = if dist > 1e-12 { d * (1.0 / dist) } else { Vec2::new(1.0, 0.0) };
                        let push = n * (0.5 * (min - dist));
                        self.agents[i].position -= push;
                        self.agents[j].position += push;
                    }
                }
            }
        }
    }

    fn advance_waypoints(&mut self) {
        let tol = self.params.waypoint_tolerance;
        for k in 0..self.agents.len() {
            let n_pts = self.lanes[self.agents[k].lane_index].len();
            loop {
                let a = &self.agents[k];
                let last = a.waypoint_index + 1 == n_pts;
                let reach = if last { 0.5 * tol } else { tol };
                if a.position.distance(self.waypoint(a)) > reach {
                    break;
                }
                if last {
                    if !self.spawn_blocked(k) {
                        self.respawn(k);
                    }
                    break;
                }
                self.agents[k].waypoint_index += 1;
            }
        }
    }

    fn lane_start(&self, k: usize) -> Vec2 {
        let a = &self.agents[k];
        let pts = &self.lanes[a.lane_index];
        if a.reverse {
            pts[pts.len() - 1]
        } else {
            pts[0]
        }
    }

    /// Whether the robot stands too close to agent `k`'s spawn point.
    fn spawn_blocked(&self, k: usize) -> bool {
        let reach = self.params.respawn_jitter + self.params.agent_radius + self.robot.radius + self.params.spawn_clearance;
        self.lane_start(k).distance(self.robot.true_pose.position()) < reach
    }

    /// Teleports agent `k` back to its lane start with a fresh identity.
    fn respawn(&mut self, k: usize) {
        let (lane, reverse) = (self.agents[k].lane_index, self.agents[k].reverse);
        let start = self.lane_start(k);
        let jitter = self.jitter();
        let pos = self.clamp_to_extent(start + jitter, self.params.agent_radius);
        let mut agent = self.new_agent(lane, reverse, pos, 1);
        let target = self.waypoint(&agent);
        agent.velocity = (target - pos).normalized() * agent.preferred_speed;
        agent.history.push_back((self.time, pos));
        self.agents[k] = agent;
    }

    fn step_robot(&mut self, dt: f64) {
        let old = self.robot.true_pose;
        let cmd = self.robot.commanded_velocity;
        let heading = if cmd.norm() > 1e-9 { cmd.angle() } else { old.theta };
        let mut pos = old.position() + cmd * dt;
        let r = self.robot.radius;
        let mut touched = false;
        for o in &self.scenario.obstacles {
            let (d, n) = o.clearance(pos);
            if d < r {
                pos += n * (r - d);
                touched = true;
            }
        }
        if touched {
            self.robot_obstacle_contacts += 1;
        }
        let pos = self.clamp_to_extent(pos, r);
        let new = Pose::new(pos.x, pos.y, heading);
        let true_delta = old.delta_to(&new);

        let t = true_delta.translation();
        let sd_t = self.params.odom_trans_coeff * t;
        let sd_r = self.params.odom_rot_coeff * true_delta.dtheta.abs() + self.params.odom_rot_per_trans * t;
        let n: [f64; 3] = [
            self.odom_rng.sample(StandardNormal),
            self.odom_rng.sample(StandardNormal),
            self.odom_rng.sample(StandardNormal),
        ];
        let odom_delta = PoseDelta::new(
            true_delta.dx + sd_t * n[0],
            true_delta.dy + sd_t * n[1],
            normalize_angle(true_delta.dtheta + sd_r * n[2]),
        );
        self.robot.true_pose = new;
        self.robot.odom_pose = self.robot.odom_pose.compose(&odom_delta);
        self.last_true_delta = true_delta;
        self.last_odom_delta = odom_delta;
    }

    /// Latest odometry increment (body frame of the previous odometry pose).
    pub fn read_odometry(&self) -> PoseDelta {
        self.last_odom_delta
    }

    /// Smallest robot–pedestrian center distance minus the summed radii.
    pub fn robot_clearance(&self) -> f64 {
        let p = self.robot.true_pose.position();
        self.agents
            .iter()
            .map(|a| a.position.distance(p) - a.radius - self.robot.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Position digest of the full state, used for determinism checks.
    pub fn state_hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325_u64;
        let mut eat = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for a in &self.agents {
            eat(a.position.x);
            eat(a.position.y);
            eat(a.velocity.x);
            eat(a.velocity.y);
            eat(a.preferred_speed);
        }
        for p in [self.robot.true_pose, self.robot.odom_pose] {
            eat(p.x);
            eat(p.y);
            eat(p.theta);
        }
        eat(self.time);
        h
    }
}

/// Point at arc length `s` along a polyline and the index of its segment.
fn point_at(pts: &[Vec2], mut s: f64) -> (Vec2, usize) {
    for (k, w) in pts.windows(2).enumerate() {
        let len = w[0].distance(w[1]);
        if s <= len || k + 2 == pts.len() {
            let t = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
            return (w[0] + (w[1] - w[0]) * t, k);
        }
        s -= len;
    }
    (pts[0], 0)
}

fn repulsion(p: Vec2, other: Vec2, radii: f64, params: &SimParams) -> Vec2 {
    let d = p - other;
    let dist = d.norm();
    if dist >= params.interaction_cutoff + radii || dist <= 1e-12 {
        return Vec2::ZERO;
    }
    d * (params.repulsion_strength * ((radii - dist) / params.repulsion_range).exp() / dist)
}
