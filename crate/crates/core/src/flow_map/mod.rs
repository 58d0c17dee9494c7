//! Crowd-flow mapping: per-cell elbow K-means over pedestrian velocities,
//! fused into one global grid of quantized flow directions.

mod cluster;
mod grid;
mod io;
mod quality;

pub use cluster::{cluster_cell, kmeans_sweep, select_k, Cluster, ElbowParams, ElbowResult, KMeansResult};
pub use grid::{
    bin_center, bin_unit, quantize_direction, CrowdFlowMap, FlowCell, FlowComponent, MapperParams, DIRECTION_BINS,
};
pub use io::{load_map, save_map, write_heatmap, MAP_SCHEMA};
pub use quality::{cell_quality, direction_match, map_quality, min_direction_gap};
