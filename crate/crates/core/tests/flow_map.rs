mod common;

use std::collections::BTreeMap;

use common::{cluster_oracle_hits, optimal_wss_curve, random_flow_map, random_samples, rng};
use crowdnav::crowd_sim::{Frame, MovementObservation};
use crowdnav::flow_map::{
    cluster_cell, kmeans_sweep, load_map, map_quality, save_map, write_heatmap, CrowdFlowMap, ElbowParams,
    FlowComponent, MapperParams,
};
use crowdnav::geometry::Vec2;
use crowdnav::Error;
use proptest::prelude::*;
use rand::Rng;

fn obs(x: f64, y: f64, speed: f64, dir: f64) -> MovementObservation {
    MovementObservation {
        start: Vec2::new(x, y),
        length: speed,
        direction: dir,
        pedestrian_id: 0,
        t: 0.0,
        span: 1.0,
        frame: Frame::Global,
    }
}

#[test]
fn elbow_clustering_agrees_with_exhaustive_partitions() {
    let hits = cluster_oracle_hits(21, 200);
    assert!(hits >= 190, "{hits}/200 matched");
}

#[test]
fn sweep_wss_never_below_optimum() {
    let mut r = rng(22, "sweep-bound");
    for _ in 0..100 {
        let s = random_samples(&mut r);
        let sweep = kmeans_sweep(&s, 3);
        let opt = optimal_wss_curve(&s, 3);
        for (k, res) in sweep.iter().enumerate() {
            assert!(res.wss >= opt[k] - 1e-9);
            assert_eq!(res.clusters.iter().map(|c| c.size).sum::<usize>(), s.len());
        }
    }
}

#[test]
fn opposing_lane_cell_gets_two_components() {
    let mut m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 4, 4);
    let p = MapperParams::default();
    let mut o = Vec::new();
    for k in 0..40 {
        let jitter = 0.02 * (k % 5) as f64;
        o.push(obs(1.5, 1.5, 1.2 + jitter, 0.0));
        o.push(obs(1.5, 1.5, 1.0 - jitter, std::f64::consts::PI));
    }
    let changed = m.fuse(&o, &p);
    assert!(changed.contains(&(1, 1)));
    let mut bins: Vec<u8> = m.cell(1, 1).components.iter().map(|c| c.bin).collect();
    bins.sort_unstable();
    assert_eq!(bins, vec![0, 4]);
    assert_eq!(m.mapped_cells(), 1);
}

#[test]
fn slow_samples_leave_cell_unmapped() {
    let mut m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 2, 2);
    let p = MapperParams::default();
    let o: Vec<_> = (0..20).map(|_| obs(0.5, 0.5, 0.02, 1.0)).collect();
    m.fuse(&o, &p);
    m.flush(&p);
    assert_eq!(m.mapped_cells(), 0);
}

#[test]
fn flush_clusters_below_refresh_threshold() {
    let mut m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 2, 2);
    let p = MapperParams::default();
    let o: Vec<_> = (0..3).map(|_| obs(0.5, 0.5, 1.0, 0.0)).collect();
    assert!(m.fuse(&o, &p).is_empty());
    assert_eq!(m.mapped_cells(), 0);
    assert_eq!(m.flush(&p), vec![(0, 0)]);
    assert_eq!(m.mapped_cells(), 1);
}

#[test]
fn quality_is_one_for_exact_map_and_errors_without_references() {
    let mut m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 3, 1);
    for i in 0..3 {
        m.cell_mut(i, 0).components.push(FlowComponent { bin: 0, speed: 1.0, support: 4 });
    }
    let refs: Vec<_> = (0..3).map(|i| obs(i as f64 + 0.5, 0.5, 1.0, 0.0)).collect();
    assert!((map_quality(&m, &refs).unwrap() - 1.0).abs() < 1e-12);
    let against: Vec<_> = (0..3).map(|i| obs(i as f64 + 0.5, 0.5, 1.0, std::f64::consts::PI)).collect();
    assert!(map_quality(&m, &against).unwrap().abs() < 1e-12);
    assert!(matches!(map_quality(&m, &[]), Err(Error::NoReferences)));
}

#[test]
fn save_load_round_trip() {
    let mut r = rng(23, "io");
    let mut m = random_flow_map(&mut r, 7, 5, 0.5);
    for _ in 0..30 {
        let c = (r.random_range(0..7), r.random_range(0..5));
        m.cell_mut(c.0, c.1).samples.push_back(Vec2::new(r.random(), r.random()));
    }
    let back = load_map(&save_map(&m, true)).unwrap();
    assert_eq!(back.width, 7);
    assert_eq!(back.height, 5);
    for (a, b) in m.cells.iter().zip(&back.cells) {
        assert_eq!(a.components, b.components);
        assert_eq!(a.samples, b.samples);
    }
    let lean = load_map(&save_map(&m, false)).unwrap();
    assert!(lean.cells.iter().all(|c| c.samples.is_empty()));
    assert_eq!(lean.mapped_cells(), m.mapped_cells());
}

#[test]
fn corrupt_map_is_rejected() {
    assert!(load_map(b"{not json").is_err());
    assert!(load_map(br#"{"schema": 999}"#).is_err());
}

#[test]
fn heatmap_is_pgm_with_one_pixel_per_cell() {
    let m = CrowdFlowMap::new(Vec2::ZERO, 1.0, 3, 2);
    let mut q = BTreeMap::new();
    q.insert((0, 0), 0.5);
    let mut out = Vec::new();
    write_heatmap(&mut out, &m, &q).unwrap();
    let header = b"P5\n3 2\n255\n";
    assert_eq!(&out[..header.len()], header);
    // north up: cell (0, 0) is the first pixel of the last row
    assert_eq!(&out[header.len()..], &[255, 255, 255, 128, 255, 255]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn wss_curve_is_non_increasing(pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..40)) {
        let s: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let res = cluster_cell(&s, &ElbowParams::default());
        prop_assert!(res.k >= 1 && res.k <= res.wss_curve.len());
        for w in res.wss_curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn clustering_ignores_sample_order(pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..30), rot in 0usize..30) {
        let s: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let mut t = s.clone();
        t.rotate_left(rot % s.len());
        t.reverse();
        prop_assert_eq!(cluster_cell(&s, &ElbowParams::default()), cluster_cell(&t, &ElbowParams::default()));
    }
}

