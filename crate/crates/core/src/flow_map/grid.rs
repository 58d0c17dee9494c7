use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};

use super::cluster::{cluster_cell, ElbowParams};
use crate::crowd_sim::{Frame, MovementObservation};
use crate::geometry::{normalize_angle, Vec2};

pub const DIRECTION_BINS: usize = 8;

/// Bin 0..7 of a heading; bin k covers k·π/4 ± π/8 and a heading exactly on a
/// boundary goes to the counter-clockwise neighbor.
pub fn quantize_direction(theta: f64) -> u8 {
    let a = theta.rem_euclid(TAU);
    ((a / FRAC_PI_4 + 0.5).floor() as usize % DIRECTION_BINS) as u8
}

/// Center heading of a direction bin, in (−π, π].
pub fn bin_center(bin: u8) -> f64 {
    normalize_angle(bin as f64 * FRAC_PI_4)
}

/// Unit vector along a bin center.
pub fn bin_unit(bin: u8) -> Vec2 {
    Vec2::from_polar(1.0, bin as f64 * FRAC_PI_4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowComponent {
    pub bin: u8,
    /// Mean speed of the merged clusters (m/s).
    pub speed: f64,
    pub support: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapperParams {
    pub resolution: f64,
    pub elbow: ElbowParams,
    pub buffer_capacity: usize,
    /// New samples in a cell before it is re-clustered.
    pub refresh_every: usize,
    /// Clusters slower than this carry no usable heading and are discarded.
    pub min_speed: f64,
}

impl Default for MapperParams {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            elbow: ElbowParams::default(),
            buffer_capacity: 256,
            refresh_every: 16,
            min_speed: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowCell {
    /// Sorted by bin, one entry per bin at most.
    pub components: Vec<FlowComponent>,
    pub samples: VecDeque<Vec2>,
    pub samples_since_cluster: usize,
    pub total_assigned: u64,
}

impl FlowCell {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn bins(&self) -> impl Iterator<Item = u8> + '_ {
        self.components.iter().map(|c| c.bin)
    }

    fn push(&mut self, v: Vec2, capacity: usize) {
        if self.samples.len() == capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(v);
        self.samples_since_cluster += 1;
        self.total_assigned += 1;
    }

    /// Re-clusters the buffer into direction components and resets the counter.
    pub fn refresh(&mut self, params: &MapperParams) {
        let samples: Vec<Vec2> = self.samples.iter().copied().collect();
        let result = cluster_cell(&samples, &params.elbow);
        let mut by_bin: [(f64, u32); DIRECTION_BINS] = [(0.0, 0); DIRECTION_BINS];
        for c in result.clusters {
            let speed = c.mean.norm();
            if speed < params.min_speed {
                continue;
            }
            let b = quantize_direction(c.mean.angle()) as usize;
            by_bin[b].0 += speed * c.size as f64;
            by_bin[b].1 += c.size as u32;
        }
        self.components = by_bin
            .iter()
            .enumerate()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(b, &(s, n))| FlowComponent {
                bin: b as u8,
                speed: (s / n as f64).min(3.0),
                support: n,
            })
            .collect();
        self.samples_since_cluster = 0;
    }
}

/// Grid of flow cells; cell (i, j) covers
/// [origin + (i, j)·resolution, origin + (i+1, j+1)·resolution).
#[derive(Debug, Clone, PartialEq)]
pub struct CrowdFlowMap {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<FlowCell>,
    /// Observations that fell outside the grid.
    pub dropped: u64,
}

impl CrowdFlowMap {
    pub fn new(origin: Vec2, resolution: f64, width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            origin,
            resolution,
            width,
            height,
            cells: vec![FlowCell::default(); width * height],
            dropped: 0,
        }
    }

    /// Grid covering a `w` × `h` area anchored at the origin.
    pub fn covering(w: f64, h: f64, resolution: f64) -> Self {
        let nx = (w / resolution).ceil() as usize;
        let ny = (h / resolution).ceil() as usize;
        Self::new(Vec2::ZERO, resolution, nx.max(1), ny.max(1))
    }

    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let i = ((p.x - self.origin.x) / self.resolution).floor();
        let j = ((p.y - self.origin.y) / self.resolution).floor();
        if i < 0.0 || j < 0.0 || i >= self.width as f64 || j >= self.height as f64 || !(i.is_finite() && j.is_finite()) {
            return None;
        }
        Some((i as usize, j as usize))
    }

    pub fn in_bounds(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    pub fn cell(&self, i: usize, j: usize) -> &FlowCell {
        &self.cells[j * self.width + i]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut FlowCell {
        &mut self.cells[j * self.width + i]
    }

    pub fn cell_at(&self, p: Vec2) -> Option<&FlowCell> {
        self.cell_of(p).map(|(i, j)| self.cell(i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new((i as f64 + 0.5) * self.resolution, (j as f64 + 0.5) * self.resolution)
    }

    /// Number of cells holding at least one component.
    pub fn mapped_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_empty()).count()
    }

    /// Appends each observation's velocity to the buffer of the cell holding
    /// its start point. Returns the number of observations dropped off-grid.
    ///
    /// # Panics
    /// If handed robot-frame observations.
    pub fn assign_to_cells(&mut self, observations: &[MovementObservation], params: &MapperParams) -> usize {
        let mut dropped = 0;
        for o in observations {
            assert_eq!(o.frame, Frame::Global, "mapping needs global-frame observations");
            match self.cell_of(o.start) {
                Some((i, j)) => self.cell_mut(i, j).push(o.velocity(), params.buffer_capacity),
                None => dropped += 1,
            }
        }
        self.dropped += dropped as u64;
        dropped
    }

    /// Re-clusters every cell whose counter reached the refresh threshold and
    /// returns the cells whose components changed.
    pub fn refresh_due(&mut self, params: &MapperParams) -> Vec<(usize, usize)> {
        let mut changed = Vec::new();
        for j in 0..self.height {
            for i in 0..self.width {
                let cell = self.cell_mut(i, j);
                if cell.samples_since_cluster >= params.refresh_every {
                    let before = cell.components.clone();
                    cell.refresh(params);
                    if cell.components != before {
                        changed.push((i, j));
                    }
                }
            }
        }
        changed
    }

    /// Assignment followed by refresh of the cells that became due.
    pub fn fuse(&mut self, observations: &[MovementObservation], params: &MapperParams) -> Vec<(usize, usize)> {
        self.assign_to_cells(observations, params);
        self.refresh_due(params)
    }

    /// Re-clusters every cell holding samples not yet clustered, regardless
    /// of the refresh threshold. Returns the cells whose components changed.
    pub fn flush(&mut self, params: &MapperParams) -> Vec<(usize, usize)> {
        let mut changed = Vec::new();
        for j in 0..self.height {
            for i in 0..self.width {
                let cell = self.cell_mut(i, j);
                if cell.samples_since_cluster > 0 {
                    let before = cell.components.clone();
                    cell.refresh(params);
                    if cell.components != before {
                        changed.push((i, j));
                    }
                }
            }
        }
        changed
    }

    /// Drops the raw sample buffers, keeping only components.
    pub fn strip_buffers(&mut self) {
        for c in &mut self.cells {
            c.samples.clear();
            c.samples_since_cluster = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn obs(x: f64, y: f64, len: f64, dir: f64) -> MovementObservation {
        MovementObservation {
            start: Vec2::new(x, y),
            length: len,
            direction: dir,
            pedestrian_id: 0,
            t: 0.0,
            span: 1.0,
            frame: Frame::Global,
        }
    }

    #[test]
    fn quantization_examples() {
        assert_eq!(quantize_direction(0.0), 0);
        assert_eq!(quantize_direction(PI), 4);
        assert_eq!(quantize_direction(-PI), 4);
        assert_eq!(quantize_direction(PI / 8.0), 1);
        assert_eq!(quantize_direction(-PI / 2.0), 6);
        assert_eq!(quantize_direction(0.99 * PI / 8.0), 0);
    }

    #[test]
    fn floor_indexing() {
        let m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 10, 10);
        assert_eq!(m.cell_of(Vec2::new(2.5, 2.5)), Some((2, 2)));
        assert_eq!(m.cell_of(Vec2::new(3.0, 3.0)), Some((3, 3)));
        assert_eq!(m.cell_of(Vec2::new(-0.01, 3.0)), None);
        assert_eq!(m.cell_of(Vec2::new(10.0, 3.0)), None);
    }

    #[test]
    fn buffer_keeps_newest() {
        let mut m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 4, 4);
        let p = MapperParams::default();
        let o: Vec<_> = (0..300).map(|k| obs(1.5, 1.5, k as f64 * 0.001, 0.0)).collect();
        m.assign_to_cells(&o, &p);
        let c = m.cell(1, 1);
        assert_eq!(c.samples.len(), 256);
        assert!((c.samples.front().unwrap().x - 0.044).abs() < 1e-12);
        assert!((c.samples.back().unwrap().x - 0.299).abs() < 1e-12);
        assert_eq!(c.total_assigned, 300);
    }

    #[test]
    fn off_grid_observations_are_counted() {
        let mut m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 4, 4);
        let n = m.assign_to_cells(&[obs(5.0, 1.0, 1.0, 0.0), obs(1.0, 1.0, 1.0, 0.0)], &MapperParams::default());
        assert_eq!(n, 1);
        assert_eq!(m.dropped, 1);
    }

    #[test]
    fn eastward_cluster_becomes_bin_zero() {
        let mut cell = FlowCell::default();
        for k in 0..20 {
            cell.push(Vec2::new(1.0 + 0.01 * (k % 3) as f64, 0.0), 256);
        }
        cell.refresh(&MapperParams::default());
        assert_eq!(cell.components.len(), 1);
        assert_eq!(cell.components[0].bin, 0);
        assert!((cell.components[0].speed - 1.0095).abs() < 1e-3);
        assert_eq!(cell.samples_since_cluster, 0);
    }

    #[test]
    fn clusters_sharing_a_bin_merge() {
        let mut cell = FlowCell::default();
        for _ in 0..10 {
            cell.push(Vec2::from_polar(2.0, 0.1), 256);
            cell.push(Vec2::from_polar(1.0, -0.1), 256);
        }
        let p = MapperParams {
            elbow: ElbowParams {
                max_clusters: 4,
                wss_threshold: 0.0,
                relative_drop: 0.25,
            },
            ..MapperParams::default()
        };
        cell.refresh(&p);
        assert_eq!(cell.components.len(), 1);
        assert_eq!(cell.components[0].bin, 0);
        assert_eq!(cell.components[0].support, 20);
        assert!((cell.components[0].speed - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_buffer_clears_components() {
        let mut cell = FlowCell {
            components: vec![FlowComponent { bin: 3, speed: 1.0, support: 4 }],
            ..FlowCell::default()
        };
        cell.refresh(&MapperParams::default());
        assert!(cell.components.is_empty());
    }

    #[test]
    fn refresh_is_idempotent() {
        let mut cell = FlowCell::default();
        for k in 0..40 {
            cell.push(Vec2::from_polar(1.0 + 0.05 * (k % 4) as f64, if k % 2 == 0 { 0.2 } else { 2.0 }), 256);
        }
        let p = MapperParams::default();
        cell.refresh(&p);
        let once = cell.clone();
        cell.refresh(&p);
        assert_eq!(cell, once);
    }
}
