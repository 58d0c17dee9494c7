use serde::{Deserialize, Serialize};

use crate::flow_map::{direction_match, FlowCell};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Diversity discount γ ∈ [0, 1].
    pub gamma: f64,
    /// Lower bound on any single observation's score.
    pub weight_floor: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            weight_floor: 1e-3,
        }
    }
}

/// q = q̂ / (1 + (n − 1)γ), discounting cells that admit many directions.
pub fn discounted_score(q_hat: f64, n: usize, gamma: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    q_hat / (1.0 + (n as f64 - 1.0) * gamma)
}

/// Flow-matching score of an observed heading against one map cell.
pub fn flow_match_score(observed_direction: f64, cell: &FlowCell, gamma: f64) -> f64 {
    discounted_score(direction_match(observed_direction, cell), cell.components.len(), gamma)
}
