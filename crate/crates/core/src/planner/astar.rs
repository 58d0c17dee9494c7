use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::grid::{Cell, GridPath, PlanGrid, MOVES};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // min-heap on f, then prefer deeper nodes, then lower index
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub path: Option<GridPath>,
    pub expansions: usize,
}

/// A* from `start` to `goal` under the grid's cost model.
pub fn astar(grid: &PlanGrid, start: Cell, goal: Cell) -> SearchResult {
    let n = grid.width * grid.height;
    let idx = |c: Cell| c.1 * grid.width + c.0;
    let cell = |k: usize| (k % grid.width, k / grid.width);
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut expansions = 0;
    if !grid.contains(start) || !grid.contains(goal) || grid.is_blocked(start) {
        return SearchResult { path: None, expansions };
    }
    g[idx(start)] = 0.0;
    heap.push(Open {
        f: grid.heuristic(start, goal),
        g: 0.0,
        node: idx(start),
    });
    while let Some(Open { g: gu, node, .. }) = heap.pop() {
        if closed[node] || gu > g[node] {
            continue;
        }
        closed[node] = true;
        expansions += 1;
        let u = cell(node);
        if u == goal {
            let mut cells = vec![u];
            let mut k = node;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push(cell(k));
            }
            cells.reverse();
            return SearchResult {
                path: Some(grid.make_path(cells)),
                expansions,
            };
        }
        for m in MOVES {
            let Some(v) = grid.neighbor(u, m) else { continue };
            let kv = idx(v);
            if closed[kv] {
                continue;
            }
            let c = grid.cost(u, v);
            if !c.is_finite() {
                continue;
            }
            let gv = gu + c;
            if gv < g[kv] {
                g[kv] = gv;
                parent[kv] = node;
                heap.push(Open {
                    f: gv + grid.heuristic(v, goal),
                    g: gv,
                    node: kv,
                });
            }
        }
    }
    SearchResult { path: None, expansions }
}
