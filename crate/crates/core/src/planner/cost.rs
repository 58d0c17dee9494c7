//! Crowd-aware edge cost: distance plus resistance (moving against the flow)
//! and lubrication (moving across it).

use serde::{Deserialize, Serialize};

use crate::flow_map::{bin_unit, FlowCell};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostCell {
    /// Charge an edge with the flow of the cell it enters.
    Target,
    /// Charge an edge with the flow of the cell it leaves.
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w_rc: f64,
    pub w_lc: f64,
    /// Lower bound on an edge cost as a fraction of its length.
    pub eps_min: f64,
    pub cost_cell: CostCell,
    /// Scale flow directions by their mean speed instead of using unit vectors.
    pub speed_scaled: bool,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_rc: 1.0,
            w_lc: 0.5,
            eps_min: 0.05,
            cost_cell: CostCell::Target,
            speed_scaled: false,
        }
    }
}

/// Resistance: Σ v · (−f).
pub fn resistance(v: Vec2, flows: &[Vec2]) -> f64 {
    flows.iter().map(|&f| v.dot(-f)).sum()
}

/// Lubrication: Σ |v × f|.
pub fn lubrication(v: Vec2, flows: &[Vec2]) -> f64 {
    flows.iter().map(|&f| v.cross(f).abs()).sum()
}

/// Cost of move `v` (cell units) through a cell with the given flow vectors,
/// clamped below at `eps_min · |v|`.
pub fn move_cost(v: Vec2, flows: &[Vec2], weights: &CostWeights) -> f64 {
    let len = v.norm();
    let raw = len + weights.w_rc * resistance(v, flows) + weights.w_lc * lubrication(v, flows);
    raw.max(weights.eps_min * len)
}

/// Flow vectors of a cell as used by the cost.
pub fn cell_flows(cell: &FlowCell, speed_scaled: bool) -> Vec<Vec2> {
    cell.components
        .iter()
        .map(|c| {
            let u = bin_unit(c.bin);
            if speed_scaled {
                u * c.speed
            } else {
                u
            }
        })
        .collect()
}

pub fn edge_cost(v_robot: Vec2, cell: &FlowCell, weights: &CostWeights) -> f64 {
    move_cost(v_robot, &cell_flows(cell, weights.speed_scaled), weights)
}
