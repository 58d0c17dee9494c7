//! Map quality against reference (bird-view) observations.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::grid::{bin_center, CrowdFlowMap, FlowCell};
use crate::crowd_sim::MovementObservation;
use crate::error::{Error, Result};
use crate::geometry::angle_diff;

/// Smallest angular gap between `direction` and the cell's bin centers; π for
/// an empty cell.
pub fn min_direction_gap(direction: f64, cell: &FlowCell) -> f64 {
    cell.bins()
        .map(|b| angle_diff(direction, bin_center(b)))
        .fold(PI, f64::min)
}

/// Unpenalized match score q̂ = (π − θ_m) / π.
pub fn direction_match(direction: f64, cell: &FlowCell) -> f64 {
    (PI - min_direction_gap(direction, cell)) / PI
}

/// Mean q̂ per referenced cell, keyed by (i, j). References off the grid are ignored.
pub fn cell_quality(map: &CrowdFlowMap, references: &[MovementObservation]) -> BTreeMap<(usize, usize), f64> {
    let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for r in references {
        if let Some((i, j)) = map.cell_of(r.start) {
            let e = acc.entry((i, j)).or_insert((0.0, 0));
            e.0 += direction_match(r.direction, map.cell(i, j));
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Average over referenced cells of the per-cell mean q̂, in [0, 1].
pub fn map_quality(map: &CrowdFlowMap, references: &[MovementObservation]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::NoReferences);
    }
    let per_cell = cell_quality(map, references);
    if per_cell.is_empty() {
        return Ok(0.0);
    }
    Ok(per_cell.values().sum::<f64>() / per_cell.len() as f64)
}
