//! Flow-matching Monte Carlo localization.

mod filter;
mod score;

pub use filter::{
    effective_sample_size, estimate_pose, normalize_weights, observation_likelihood, predict, resample,
    systematic_indices, weigh, CrowdLocalizer, LocalizerParams, MotionNoise, Particle,
};
pub use score::{discounted_score, flow_match_score, MatchParams};
