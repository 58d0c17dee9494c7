//! D* Lite: backward incremental search that repairs the plan after edge-cost
//! changes and start moves instead of searching from scratch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::astar::SearchResult;
use super::grid::{Cell, PlanGrid, MOVES};
use crate::flow_map::CrowdFlowMap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, f64);

impl Key {
    fn less(self, o: Key) -> bool {
        self.0 < o.0 || (self.0 == o.0 && self.1 < o.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    key: Key,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.key
            .0
            .total_cmp(&self.key.0)
            .then(o.key.1.total_cmp(&self.key.1))
            .then(o.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone)]
pub struct DStarLite {
    grid: PlanGrid,
    start: Cell,
    goal: Cell,
    last: Cell,
    km: f64,
    g: Vec<f64>,
    rhs: Vec<f64>,
    heap: BinaryHeap<Entry>,
    /// Key each node is currently queued under; stale heap entries are skipped.
    queued: Vec<Option<Key>>,
    /// Vertex expansions over the planner's lifetime.
    pub total_expansions: usize,
}

impl DStarLite {
    pub fn new(grid: PlanGrid, start: Cell, goal: Cell) -> Self {
        assert!(grid.contains(start) && grid.contains(goal), "start and goal must be on the grid");
        let n = grid.width * grid.height;
        let mut s = Self {
            grid,
            start,
            goal,
            last: start,
            km: 0.0,
            g: vec![f64::INFINITY; n],
            rhs: vec![f64::INFINITY; n],
            heap: BinaryHeap::new(),
            queued: vec![None; n],
            total_expansions: 0,
        };
        let gi = s.idx(goal);
        s.rhs[gi] = 0.0;
        let k = s.key(gi);
        s.push(gi, k);
        s
    }

    pub fn grid(&self) -> &PlanGrid {
        &self.grid
    }

    /// Mutable grid access; report every touched cell through [`Self::replan_cells`].
    pub fn grid_mut(&mut self) -> &mut PlanGrid {
        &mut self.grid
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    fn idx(&self, c: Cell) -> usize {
        c.1 * self.grid.width + c.0
    }

    fn cell(&self, k: usize) -> Cell {
        (k % self.grid.width, k / self.grid.width)
    }

    fn key(&self, k: usize) -> Key {
        let m = self.g[k].min(self.rhs[k]);
        Key(m + self.grid.heuristic(self.start, self.cell(k)) + self.km, m)
    }

    fn push(&mut self, k: usize, key: Key) {
        self.queued[k] = Some(key);
        self.heap.push(Entry { key, node: k });
    }

    fn top(&mut self) -> Option<Entry> {
        while let Some(&e) = self.heap.peek() {
            if self.queued[e.node] == Some(e.key) {
                return Some(e);
            }
            self.heap.pop();
        }
        None
    }

    fn update_vertex(&mut self, k: usize) {
        let u = self.cell(k);
        if u != self.goal {
            let mut best = f64::INFINITY;
            for m in MOVES {
                if let Some(s) = self.grid.neighbor(u, m) {
                    let c = self.grid.cost(u, s) + self.g[self.idx(s)];
                    if c < best {
                        best = c;
                    }
                }
            }
            self.rhs[k] = best;
        }
        self.queued[k] = None;
        if self.g[k] != self.rhs[k] {
            let key = self.key(k);
            self.push(k, key);
        }
    }

    fn update_neighbors(&mut self, u: Cell, include_self: bool) {
        for m in MOVES {
            if let Some(s) = self.grid.neighbor(u, m) {
                let ks = self.idx(s);
                self.update_vertex(ks);
            }
        }
        if include_self {
            let ku = self.idx(u);
            self.update_vertex(ku);
        }
    }

    fn compute_shortest_path(&mut self) -> usize {
        let mut expansions = 0;
        let ks = self.idx(self.start);
        loop {
            let top = self.top();
            let start_key = self.key(ks);
            let behind = top.is_some_and(|e| e.key.less(start_key));
            if !(behind || self.rhs[ks] != self.g[ks]) {
                break;
            }
            let Some(Entry { key: k_old, node: k }) = top else { break };
            self.heap.pop();
            self.queued[k] = None;
            let k_new = self.key(k);
            let u = self.cell(k);
            if k_old.less(k_new) {
                self.push(k, k_new);
            } else if self.g[k] > self.rhs[k] {
                self.g[k] = self.rhs[k];
                expansions += 1;
                self.update_neighbors(u, false);
            } else {
                self.g[k] = f64::INFINITY;
                expansions += 1;
                self.update_neighbors(u, true);
            }
        }
        self.total_expansions += expansions;
        expansions
    }

    fn extract(&self) -> Option<Vec<Cell>> {
        let mut s = self.start;
        let mut cells = vec![s];
        if !self.g[self.idx(s)].is_finite() {
            return None;
        }
        let limit = self.grid.width * self.grid.height;
        while s != self.goal {
            let mut best: Option<(f64, Cell)> = None;
            for m in MOVES {
                if let Some(n) = self.grid.neighbor(s, m) {
                    let c = self.grid.cost(s, n) + self.g[self.idx(n)];
                    if c.is_finite() && best.is_none_or(|b| c < b.0) {
                        best = Some((c, n));
                    }
                }
            }
            s = best?.1;
            cells.push(s);
            if cells.len() > limit {
                return None;
            }
        }
        Some(cells)
    }

    /// Brings the search up to date and returns the current plan.
    pub fn plan(&mut self) -> SearchResult {
        let expansions = self.compute_shortest_path();
        SearchResult {
            path: self.extract().map(|c| self.grid.make_path(c)),
            expansions,
        }
    }

    /// Repairs the plan after the given cells changed in the grid and the
    /// robot moved to `new_start`.
    pub fn replan_cells(&mut self, changed: &[Cell], new_start: Cell) -> SearchResult {
        assert!(self.grid.contains(new_start), "start must be on the grid");
        self.start = new_start;
        self.km += self.grid.heuristic(self.last, new_start);
        self.last = new_start;
        for &c in changed {
            // edges into and out of c may both have changed
            self.update_neighbors(c, true);
        }
        self.plan()
    }

    /// Pulls the changed cells' flows from `map`, then repairs the plan.
    pub fn replan(&mut self, map: &CrowdFlowMap, changed: &[Cell], new_start: Cell) -> SearchResult {
        self.grid.refresh_from_map(map, changed);
        self.replan_cells(changed, new_start)
    }
}
