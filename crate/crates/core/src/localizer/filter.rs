//! Particle filter whose measurement model is the flow-matching score.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::{flow_match_score, MatchParams};
use crate::crowd_sim::{Frame, MovementObservation};
use crate::flow_map::CrowdFlowMap;
use crate::geometry::{normalize_angle, Pose, PoseDelta};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose,
    pub weight: f64,
}

/// Motion noise: std proportional to the increment's magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub trans_coeff: f64,
    pub rot_coeff: f64,
    pub rot_per_trans: f64,
}

impl MotionNoise {
    pub const ZERO: MotionNoise = MotionNoise {
        trans_coeff: 0.0,
        rot_coeff: 0.0,
        rot_per_trans: 0.0,
    };

    pub fn scaled(self, k: f64) -> Self {
        Self {
            trans_coeff: self.trans_coeff * k,
            rot_coeff: self.rot_coeff * k,
            rot_per_trans: self.rot_per_trans * k,
        }
    }
}

impl Default for MotionNoise {
    /// Odometry coefficients of the simulator inflated by 1.5.
    fn default() -> Self {
        MotionNoise {
            trans_coeff: 0.05,
            rot_coeff: 0.05,
            rot_per_trans: 0.002,
        }
        .scaled(1.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizerParams {
    pub particles: usize,
    pub matching: MatchParams,
    pub noise: MotionNoise,
    /// Resample when ESS drops below this fraction of the particle count.
    pub ess_threshold: f64,
    pub init_std_xy: f64,
    pub init_std_theta: f64,
    /// Seconds between measurement updates.
    pub update_period: f64,
}

impl Default for LocalizerParams {
    fn default() -> Self {
        Self {
            particles: 500,
            matching: MatchParams::default(),
            noise: MotionNoise::default(),
            ess_threshold: 0.5,
            init_std_xy: 1.0,
            init_std_theta: 0.2,
            update_period: 1.0,
        }
    }
}

fn gauss(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Advances every particle by `delta` in its own frame plus sampled noise.
pub fn predict(particles: &mut [Particle], delta: &PoseDelta, noise: &MotionNoise, rng: &mut SimRng) {
    let t = delta.translation();
    let sd_t = noise.trans_coeff * t;
    let sd_r = noise.rot_coeff * delta.dtheta.abs() + noise.rot_per_trans * t;
    for p in particles.iter_mut() {
        let d = if sd_t == 0.0 && sd_r == 0.0 {
            *delta
        } else {
            PoseDelta::new(
                delta.dx + sd_t * gauss(rng),
                delta.dy + sd_t * gauss(rng),
                delta.dtheta + sd_r * gauss(rng),
            )
        };
        p.pose = p.pose.compose(&d);
    }
}

/// Likelihood of robot-frame observations if the robot stood at `pose`:
/// geometric mean of per-observation scores, each floored.
pub fn observation_likelihood(
    pose: &Pose,
    observations: &[MovementObservation],
    map: &CrowdFlowMap,
    params: &MatchParams,
) -> f64 {
    let mut log_sum = 0.0;
    for o in observations {
        debug_assert_eq!(o.frame, Frame::Robot);
        let start = pose.to_world(o.start);
        let score = match map.cell_at(start) {
            Some(cell) => flow_match_score(normalize_angle(o.direction + pose.theta), cell, params.gamma),
            None => params.weight_floor,
        };
        log_sum += score.max(params.weight_floor).ln();
    }
    (log_sum / observations.len() as f64).exp()
}

/// Sets each weight to its observation likelihood and renormalizes; motion
/// history enters only through resampling. Returns the raw likelihoods. An
/// empty observation list leaves weights untouched.
pub fn weigh(
    particles: &mut [Particle],
    observations: &[MovementObservation],
    map: &CrowdFlowMap,
    params: &MatchParams,
) -> Vec<f64> {
    if observations.is_empty() || particles.is_empty() {
        return Vec::new();
    }
    let raw: Vec<f64> = particles
        .par_iter()
        .map(|p| observation_likelihood(&p.pose, observations, map, params))
        .collect();
    for (p, &l) in particles.iter_mut().zip(&raw) {
        p.weight = l;
    }
    normalize_weights(particles);
    raw
}

pub fn normalize_weights(particles: &mut [Particle]) {
    let sum: f64 = particles.iter().map(|p| p.weight).sum();
    if sum > 0.0 && sum.is_finite() {
        for p in particles.iter_mut() {
            p.weight /= sum;
        }
    } else {
        let w = 1.0 / particles.len() as f64;
        for p in particles.iter_mut() {
            p.weight = w;
        }
    }
}

pub fn effective_sample_size(particles: &[Particle]) -> f64 {
    1.0 / particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
}

/// Indices picked by systematic resampling with offset `u0` ∈ [0, 1/n).
pub fn systematic_indices(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut k = 0;
    for m in 0..n {
        let u = u0 + m as f64 * step;
        while u >= cum && k + 1 < n {
            k += 1;
            cum += weights[k];
        }
        out.push(k);
    }
    out
}

/// Systematic resampling when ESS falls below `ess_threshold · n`.
/// Returns whether resampling happened.
pub fn resample(particles: &mut Vec<Particle>, ess_threshold: f64, rng: &mut SimRng) -> bool {
    let n = particles.len();
    if n == 0 || effective_sample_size(particles) >= ess_threshold * n as f64 {
        return false;
    }
    let u0 = rng.random::<f64>() / n as f64;
    let weights: Vec<f64> = particles.iter().map(|p| p.weight).collect();
    let w = 1.0 / n as f64;
    *particles = systematic_indices(&weights, u0)
        .into_iter()
        .map(|k| Particle {
            pose: particles[k].pose,
            weight: w,
        })
        .collect();
    true
}

/// Weighted mean position and circular weighted mean heading.
pub fn estimate_pose(particles: &[Particle]) -> Pose {
    let (mut x, mut y, mut s, mut c, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in particles {
        x += p.weight * p.pose.x;
        y += p.weight * p.pose.y;
        s += p.weight * p.pose.theta.sin();
        c += p.weight * p.pose.theta.cos();
        total += p.weight;
    }
    Pose::new(x / total, y / total, s.atan2(c))
}

/// Particle-filter localizer driven by odometry and crowd observations.
#[derive(Debug, Clone)]
pub struct CrowdLocalizer {
    pub particles: Vec<Particle>,
    pub params: LocalizerParams,
    rng: SimRng,
    last_ess: f64,
}

impl CrowdLocalizer {
    /// Particles drawn from a Gaussian around `initial`.
    pub fn new(initial: Pose, params: LocalizerParams, mut rng: SimRng) -> Self {
        let n = params.particles.max(1);
        let w = 1.0 / n as f64;
        let particles = (0..n)
            .map(|_| Particle {
                pose: Pose::new(
                    initial.x + params.init_std_xy * gauss(&mut rng),
                    initial.y + params.init_std_xy * gauss(&mut rng),
                    initial.theta + params.init_std_theta * gauss(&mut rng),
                ),
                weight: w,
            })
            .collect();
        Self {
            particles,
            params,
            rng,
            last_ess: n as f64,
        }
    }

    pub fn predict(&mut self, delta: &PoseDelta) {
        predict(&mut self.particles, delta, &self.params.noise, &mut self.rng);
    }

    /// Measurement update followed by conditional resampling.
    pub fn update(&mut self, observations: &[MovementObservation], map: &CrowdFlowMap) {
        weigh(&mut self.particles, observations, map, &self.params.matching);
        self.last_ess = effective_sample_size(&self.particles);
        resample(&mut self.particles, self.params.ess_threshold, &mut self.rng);
    }

    pub fn estimate(&self) -> Pose {
        estimate_pose(&self.particles)
    }

    /// ESS measured right after the latest weighting.
    pub fn ess(&self) -> f64 {
        self.last_ess
    }
}
