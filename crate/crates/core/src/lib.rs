//! Crowd-flow navigation workbench.
//!
//! Pedestrian movements seen by a robot are fused into a grid [`flow_map`];
//! the map then drives a particle-filter [`localizer`] that scores pose
//! hypotheses by flow agreement, and a crowd-aware grid [`planner`] whose edge
//! costs reward moving with the crowd. [`crowd_sim`] provides the scenes and
//! [`eval`] the metrics and experiment harness.

pub mod crowd_sim;
pub mod error;
pub mod eval;
pub mod flow_map;
pub mod geometry;
pub mod localizer;
pub mod planner;
pub mod rng;

pub use error::{Error, Result};
