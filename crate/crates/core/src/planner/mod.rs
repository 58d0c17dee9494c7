//! Crowd-aware grid planning and plan execution.

mod astar;
mod cost;
mod dstar;
mod follow;
mod grid;

pub use astar::{astar, SearchResult};
pub use cost::{cell_flows, edge_cost, lubrication, move_cost, resistance, CostCell, CostWeights};
pub use dstar::DStarLite;
pub use follow::{follow, lookahead_point, pursue, FollowerParams};
pub use grid::{write_path_csv, Cell, CostModel, GridPath, PlanGrid, MOVES, PATH_HEADER};

use crate::flow_map::CrowdFlowMap;

/// A* over `map`; `social` selects the crowd-aware cost, otherwise pure distance.
pub fn plan_astar(map: &CrowdFlowMap, start: Cell, goal: Cell, weights: CostWeights, social: bool) -> SearchResult {
    let model = if social { CostModel::Social } else { CostModel::Distance };
    astar(&PlanGrid::from_map(map, weights, model), start, goal)
}

/// Starts an incremental planner on `map` and returns it with its first plan.
pub fn plan_dstar(map: &CrowdFlowMap, start: Cell, goal: Cell, weights: CostWeights) -> (DStarLite, SearchResult) {
    let mut d = DStarLite::new(PlanGrid::from_map(map, weights, CostModel::Social), start, goal);
    let r = d.plan();
    (d, r)
}
