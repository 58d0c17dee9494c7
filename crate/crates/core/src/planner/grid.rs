//! 8-connected search graph over a flow map.

use std::io::Write;

use super::cost::{cell_flows, move_cost, CostCell, CostWeights};
use crate::flow_map::CrowdFlowMap;
use crate::geometry::{octile, Vec2};

pub type Cell = (usize, usize);

/// Neighbor offsets, axis moves first.
pub const MOVES: [(i64, i64); 8] = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    /// Crowd-aware cost.
    Social,
    /// Pure move length, flow ignored.
    Distance,
}

#[derive(Debug, Clone)]
pub struct PlanGrid {
    pub width: usize,
    pub height: usize,
    pub origin: Vec2,
    pub resolution: f64,
    pub weights: CostWeights,
    pub model: CostModel,
    flows: Vec<Vec<Vec2>>,
    blocked: Vec<bool>,
}

impl PlanGrid {
    pub fn from_map(map: &CrowdFlowMap, weights: CostWeights, model: CostModel) -> Self {
        let flows = map.cells.iter().map(|c| cell_flows(c, weights.speed_scaled)).collect();
        Self {
            width: map.width,
            height: map.height,
            origin: map.origin,
            resolution: map.resolution,
            weights,
            model,
            flows,
            blocked: vec![false; map.width * map.height],
        }
    }

    fn idx(&self, c: Cell) -> usize {
        c.1 * self.width + c.0
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.0 < self.width && c.1 < self.height
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked[self.idx(c)]
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        let k = self.idx(c);
        self.blocked[k] = blocked;
    }

    pub fn flows(&self, c: Cell) -> &[Vec2] {
        &self.flows[self.idx(c)]
    }

    pub fn set_flows(&mut self, c: Cell, flows: Vec<Vec2>) {
        let k = self.idx(c);
        self.flows[k] = flows;
    }

    /// Re-reads the given cells from the map.
    pub fn refresh_from_map(&mut self, map: &CrowdFlowMap, cells: &[Cell]) {
        for &c in cells {
            let f = cell_flows(map.cell(c.0, c.1), self.weights.speed_scaled);
            self.set_flows(c, f);
        }
    }

    pub fn neighbor(&self, c: Cell, m: (i64, i64)) -> Option<Cell> {
        let i = c.0 as i64 + m.0;
        let j = c.1 as i64 + m.1;
        (i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height).then_some((i as usize, j as usize))
    }

    /// Cost of the edge `from` → `to` (8-neighbors); infinite if either end is blocked.
    pub fn cost(&self, from: Cell, to: Cell) -> f64 {
        if self.is_blocked(from) || self.is_blocked(to) {
            return f64::INFINITY;
        }
        let v = Vec2::new(to.0 as f64 - from.0 as f64, to.1 as f64 - from.1 as f64);
        match self.model {
            CostModel::Distance => v.norm(),
            CostModel::Social => {
                let at = match self.weights.cost_cell {
                    CostCell::Target => to,
                    CostCell::Source => from,
                };
                move_cost(v, self.flows(at), &self.weights)
            }
        }
    }

    /// Octile distance scaled by the smallest per-unit edge cost.
    pub fn heuristic(&self, a: Cell, b: Cell) -> f64 {
        let d = octile(a.0 as i64 - b.0 as i64, a.1 as i64 - b.1 as i64);
        match self.model {
            CostModel::Distance => d,
            CostModel::Social => self.weights.eps_min * d,
        }
    }

    pub fn center(&self, c: Cell) -> Vec2 {
        self.origin + Vec2::new((c.0 as f64 + 0.5) * self.resolution, (c.1 as f64 + 0.5) * self.resolution)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let i = ((p.x - self.origin.x) / self.resolution).floor();
        let j = ((p.y - self.origin.y) / self.resolution).floor();
        (i >= 0.0 && j >= 0.0 && i < self.width as f64 && j < self.height as f64).then_some((i as usize, j as usize))
    }

    /// Builds a path record, summing edge costs along `cells`.
    pub fn make_path(&self, cells: Vec<Cell>) -> GridPath {
        let mut edge_costs = vec![0.0];
        for w in cells.windows(2) {
            edge_costs.push(self.cost(w[0], w[1]));
        }
        GridPath {
            total_cost: edge_costs.iter().sum(),
            world_points: cells.iter().map(|&c| self.center(c)).collect(),
            cells,
            edge_costs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub total_cost: f64,
    /// Cell centers (m).
    pub world_points: Vec<Vec2>,
    /// Cost of the edge entering each cell; 0 for the first.
    pub edge_costs: Vec<f64>,
}

impl GridPath {
    /// Consecutive cells are distinct 8-neighbors.
    pub fn is_connected(&self) -> bool {
        self.cells.windows(2).all(|w| {
            let di = w[0].0.abs_diff(w[1].0);
            let dj = w[0].1.abs_diff(w[1].1);
            di <= 1 && dj <= 1 && (di + dj) > 0
        })
    }

    pub fn length_m(&self) -> f64 {
        self.world_points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

pub const PATH_HEADER: &str = "idx,cell_i,cell_j,x,y,edge_cost";

pub fn write_path_csv<W: Write>(mut out: W, path: &GridPath) -> std::io::Result<()> {
    writeln!(out, "{PATH_HEADER}")?;
    for (k, (c, p)) in path.cells.iter().zip(&path.world_points).enumerate() {
        writeln!(out, "{},{},{},{},{},{}", k, c.0, c.1, p.x, p.y, path.edge_costs[k])?;
    }
    Ok(())
}
