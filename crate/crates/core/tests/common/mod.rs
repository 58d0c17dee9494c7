//! Oracles and generators shared by the integration suites.
#![allow(dead_code)]

pub mod props;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crowdnav::flow_map::{bin_unit, cluster_cell, select_k, CrowdFlowMap, ElbowParams, FlowComponent};
use crowdnav::geometry::Vec2;
use crowdnav::planner::{astar, Cell, CostModel, CostWeights, DStarLite, PlanGrid, MOVES};
use crowdnav::rng::{SeedTree, SimRng};
use rand::Rng;

pub fn rng(seed: u64, label: &str) -> SimRng {
    SeedTree::new(seed).rng(label)
}

/// `w × h` map where each cell holds 0–2 random direction components with
/// probability `fill`.
pub fn random_flow_map(rng: &mut SimRng, w: usize, h: usize, fill: f64) -> CrowdFlowMap {
    let mut m = CrowdFlowMap::new(Vec2::ZERO, 1.0, w, h);
    for j in 0..h {
        for i in 0..w {
            if rng.random::<f64>() < fill {
                m.cell_mut(i, j).components = random_components(rng);
            }
        }
    }
    m
}

pub fn random_components(rng: &mut SimRng) -> Vec<FlowComponent> {
    let n = rng.random_range(1..=2);
    let mut bins: Vec<u8> = (0..n).map(|_| rng.random_range(0..8u8)).collect();
    bins.sort_unstable();
    bins.dedup();
    bins.into_iter()
        .map(|bin| FlowComponent {
            bin,
            speed: rng.random_range(0.5..1.5),
            support: rng.random_range(1..20),
        })
        .collect()
}

pub fn random_cell(rng: &mut SimRng, w: usize, h: usize) -> Cell {
    (rng.random_range(0..w), rng.random_range(0..h))
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Plain Dijkstra over the grid's own edge costs; `None` when unreachable.
pub fn dijkstra(grid: &PlanGrid, start: Cell, goal: Cell) -> Option<f64> {
    let idx = |c: Cell| c.1 * grid.width + c.0;
    let mut dist = vec![f64::INFINITY; grid.width * grid.height];
    let mut heap = BinaryHeap::new();
    if grid.is_blocked(start) || grid.is_blocked(goal) {
        return None;
    }
    dist[idx(start)] = 0.0;
    heap.push(Entry(0.0, idx(start)));
    while let Some(Entry(d, k)) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        let c = (k % grid.width, k / grid.width);
        if c == goal {
            return Some(d);
        }
        for m in MOVES {
            let Some(n) = grid.neighbor(c, m) else { continue };
            let nd = d + grid.cost(c, n);
            if nd < dist[idx(n)] {
                dist[idx(n)] = nd;
                heap.push(Entry(nd, idx(n)));
            }
        }
    }
    None
}

/// Small clustered 2D sample sets: 1–12 points around 1–3 random centers.
pub fn random_samples(rng: &mut SimRng) -> Vec<Vec2> {
    let n = rng.random_range(1..=12);
    let centers: Vec<Vec2> = (0..rng.random_range(1..=3))
        .map(|_| Vec2::from_polar(rng.random_range(0.3..1.5), rng.random_range(-3.14..3.14)))
        .collect();
    (0..n)
        .map(|_| {
            let c = centers[rng.random_range(0..centers.len())];
            c + Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
        })
        .collect()
}

fn wss_of(points: &[Vec2], labels: &[usize], k: usize) -> f64 {
    let mut sums = vec![Vec2::ZERO; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sums[l] += *p;
        counts[l] += 1;
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| (*p - sums[l] * (1.0 / counts[l] as f64)).norm_sq())
        .sum()
}

/// Minimum WSS over every partition of `points` into exactly `k` non-empty
/// groups (restricted growth strings).
pub fn optimal_wss(points: &[Vec2], k: usize) -> f64 {
    fn go(points: &[Vec2], k: usize, labels: &mut Vec<usize>, used: usize, best: &mut f64) {
        let n = points.len();
        let i = labels.len();
        if n - i < k - used {
            return;
        }
        if i == n {
            if used == k {
                *best = best.min(wss_of(points, labels, k));
            }
            return;
        }
        for l in 0..=used.min(k - 1) {
            labels.push(l);
            go(points, k, labels, used.max(l + 1), best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    go(points, k, &mut Vec::with_capacity(points.len()), 0, &mut best);
    best
}

/// WSS-optimal curve for k = 1..=min(k_max, n).
pub fn optimal_wss_curve(points: &[Vec2], k_max: usize) -> Vec<f64> {
    (1..=k_max.min(points.len())).map(|k| optimal_wss(points, k)).collect()
}

/// Runs the elbow clustering (k ≤ 3) against the exhaustive-partition oracle
/// on `sets` random sample sets; returns how many agree on k and on WSS(k).
pub fn cluster_oracle_hits(seed: u64, sets: usize) -> usize {
    let params = ElbowParams {
        max_clusters: 3,
        ..ElbowParams::default()
    };
    let mut r = rng(seed, "cluster-oracle");
    (0..sets)
        .filter(|_| {
            let s = random_samples(&mut r);
            let got = cluster_cell(&s, &params);
            let curve = optimal_wss_curve(&s, params.max_clusters);
            let k = select_k(&curve, &params);
            got.k == k && (got.wss_curve[k - 1] - curve[k - 1]).abs() <= 1e-9 * (1.0 + curve[k - 1])
        })
        .count()
}

/// Mutates `maps` random 20×20 social grids `steps` times each (blocking,
/// clearing and rewriting flows, sometimes moving the start), repairing the
/// D* Lite plan after every step and comparing it with a fresh A* search.
/// Returns the number of agreeing steps, or the first disagreement.
pub fn dstar_agreement(seed: u64, maps: usize, steps: usize) -> Result<usize, String> {
    let mut r = rng(seed, "dstar-mutations");
    let mut agree = 0;
    for case in 0..maps {
        let map = random_flow_map(&mut r, 20, 20, 0.5);
        let grid = PlanGrid::from_map(&map, CostWeights::default(), CostModel::Social);
        let mut start = random_cell(&mut r, 20, 20);
        let goal = random_cell(&mut r, 20, 20);
        let mut d = DStarLite::new(grid, start, goal);
        d.plan();
        for step in 0..steps {
            let mut changed = Vec::new();
            for _ in 0..r.random_range(1..=15) {
                let c = random_cell(&mut r, 20, 20);
                if c == goal {
                    continue;
                }
                let g = d.grid_mut();
                match r.random_range(0..3) {
                    0 => g.set_blocked(c, !g.is_blocked(c)),
                    1 => g.set_flows(c, Vec::new()),
                    _ => {
                        let flows = random_components(&mut r).iter().map(|k| bin_unit(k.bin)).collect();
                        g.set_flows(c, flows);
                    }
                }
                changed.push(c);
            }
            if r.random_bool(0.5) {
                start = random_cell(&mut r, 20, 20);
            }
            let repaired = d.replan_cells(&changed, start).path;
            let fresh = astar(d.grid(), start, goal).path;
            match (&repaired, &fresh) {
                (None, None) => {}
                (Some(a), Some(b)) if (a.total_cost - b.total_cost).abs() <= 1e-9 => {
                    if a.cells.first() != Some(&start) || a.cells.last() != Some(&goal) {
                        return Err(format!("case {case} step {step}: path endpoints wrong"));
                    }
                }
                _ => {
                    return Err(format!(
                        "case {case} step {step}: repaired {:?} vs fresh {:?}",
                        repaired.map(|p| p.total_cost),
                        fresh.map(|p| p.total_cost)
                    ))
                }
            }
            agree += 1;
        }
    }
    Ok(agree)
}
