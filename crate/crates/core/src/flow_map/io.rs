//! Map file (JSON, `"schema": 1`) and PGM heatmap export.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::grid::{CrowdFlowMap, FlowComponent};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const MAP_SCHEMA: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    i: usize,
    j: usize,
    components: Vec<FlowComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pending: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assigned: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    schema: u64,
    origin: [f64; 2],
    resolution: f64,
    width: usize,
    height: usize,
    #[serde(default)]
    buffers: bool,
    cells: Vec<CellRecord>,
}

/// Serializes the map. With `with_buffers` the raw sample buffers travel too,
/// so fusion can resume after loading.
pub fn save_map(map: &CrowdFlowMap, with_buffers: bool) -> Vec<u8> {
    let cells = map
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.components.is_empty() || (with_buffers && !c.samples.is_empty()))
        .map(|(k, c)| CellRecord {
            i: k % map.width,
            j: k / map.width,
            components: c.components.clone(),
            samples: with_buffers.then(|| c.samples.iter().map(|v| [v.x, v.y]).collect()),
            pending: with_buffers.then_some(c.samples_since_cluster),
            assigned: with_buffers.then_some(c.total_assigned),
        })
        .collect();
    let file = MapFile {
        schema: MAP_SCHEMA,
        origin: [map.origin.x, map.origin.y],
        resolution: map.resolution,
        width: map.width,
        height: map.height,
        buffers: with_buffers,
        cells,
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("map serializes");
    out.push(b'\n');
    out
}

pub fn load_map(bytes: &[u8]) -> Result<CrowdFlowMap> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptPayload(format!("map file: {e}")))?;
    let schema = value.get("schema").and_then(|s| s.as_u64());
    match schema {
        Some(MAP_SCHEMA) => {}
        Some(found) => return Err(Error::VersionMismatch { found, expected: MAP_SCHEMA }),
        None => return Err(Error::CorruptPayload("missing schema field".into())),
    }
    let file: MapFile = serde_json::from_value(value).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    if !(file.resolution > 0.0) || file.width == 0 || file.height == 0 {
        return Err(Error::CorruptPayload("grid metadata must be positive".into()));
    }
    let mut map = CrowdFlowMap::new(Vec2::new(file.origin[0], file.origin[1]), file.resolution, file.width, file.height);
    for c in file.cells {
        if c.i >= map.width || c.j >= map.height {
            return Err(Error::CorruptPayload(format!("cell ({}, {}) outside grid", c.i, c.j)));
        }
        let mut seen = [false; 8];
        for comp in &c.components {
            if comp.bin >= 8 || seen[comp.bin as usize] || comp.support == 0 || !(0.0..=3.0).contains(&comp.speed) {
                return Err(Error::CorruptPayload(format!("bad component in cell ({}, {})", c.i, c.j)));
            }
            seen[comp.bin as usize] = true;
        }
        let cell = map.cell_mut(c.i, c.j);
        cell.components = c.components;
        cell.components.sort_by_key(|k| k.bin);
        if let Some(s) = c.samples {
            cell.samples = s.into_iter().map(|v| Vec2::new(v[0], v[1])).collect::<VecDeque<_>>();
        }
        cell.samples_since_cluster = c.pending.unwrap_or(0);
        cell.total_assigned = c.assigned.unwrap_or(cell.samples.len() as u64);
    }
    Ok(map)
}

/// Binary PGM, one pixel per cell, north up. Gray is 255 × per-cell quality;
/// cells without references are white.
pub fn write_heatmap<W: Write>(
    mut out: W,
    map: &CrowdFlowMap,
    cell_quality: &BTreeMap<(usize, usize), f64>,
) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", map.width, map.height)?;
    let mut row = vec![0u8; map.width];
    for j in (0..map.height).rev() {
        for (i, px) in row.iter_mut().enumerate() {
            let q = cell_quality.get(&(i, j)).copied().unwrap_or(1.0);
            *px = (255.0 * q.clamp(0.0, 1.0)).round() as u8;
        }
        out.write_all(&row)?;
    }
    Ok(())
}
