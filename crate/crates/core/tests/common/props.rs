//! Randomized invariant suites, parameterized by case count so the
//! acceptance run and the regular test targets can share them.

use std::f64::consts::PI;

use crowdnav::crowd_sim::{Extent, Lane, RobotSpec, Scenario, SimParams, World};
use crowdnav::eval::{detect_ca_actions, CaParams};
use crowdnav::flow_map::{bin_center, CrowdFlowMap, FlowCell, FlowComponent};
use crowdnav::geometry::Vec2;
use crowdnav::localizer::{discounted_score, flow_match_score, systematic_indices};
use crowdnav::planner::{lubrication, move_cost, plan_astar, resistance, CostWeights};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Suite = fn(u32) -> Result<(), String>;

pub const SUITES: &[(&str, Suite)] = &[
    ("score bounds and monotonicity", score_bounds),
    ("resistance/lubrication algebra", cost_algebra),
    ("empty-map cost equivalence", empty_map_equivalence),
    ("simulation determinism", determinism),
    ("systematic resampler oracle", resampler_oracle),
    ("CA-detector invariances", ca_invariances),
];

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn cell(bins: &[u8]) -> FlowCell {
    let mut c = FlowCell::default();
    for &bin in bins {
        if !c.components.iter().any(|k| k.bin == bin) {
            c.components.push(FlowComponent { bin, speed: 1.0, support: 1 });
        }
    }
    c
}

pub fn score_bounds(cases: u32) -> Result<(), String> {
    let strat = (
        -PI..PI,
        prop::collection::vec(0u8..8, 0..8),
        0.0f64..=1.0,
        0.0f64..=1.0,
        1usize..8,
    );
    run(cases, strat, |(theta, bins, gamma, q_hat, n)| {
        let c = cell(&bins);
        let q = flow_match_score(theta, &c, gamma);
        prop_assert!((0.0..=1.0).contains(&q), "q = {q}");
        // more directions in a cell never raise the score
        prop_assert!(discounted_score(q_hat, n + 1, gamma) <= discounted_score(q_hat, n, gamma) + 1e-15);
        prop_assert!(discounted_score(q_hat, n, gamma) <= q_hat + 1e-15);
        if !c.components.is_empty() {
            // heading straight along a stored bin is the best possible match
            let best = flow_match_score(bin_center(c.components[0].bin), &c, gamma);
            prop_assert!(q <= best + 1e-12);
            prop_assert!((best - discounted_score(1.0, c.components.len(), gamma)).abs() < 1e-12);
        } else {
            prop_assert_eq!(q, 0.0);
        }
        Ok(())
    })
}

fn vec2() -> impl Strategy<Value = Vec2> {
    (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y)| Vec2::new(x, y))
}

pub fn cost_algebra(cases: u32) -> Result<(), String> {
    let strat = (vec2(), prop::collection::vec(vec2(), 0..4), 0.1f64..4.0, -PI..PI);
    run(cases, strat, |(v, flows, a, phi)| {
        let tol = 1e-9 * (1.0 + v.norm()) * (1.0 + flows.len() as f64) * 10.0;
        prop_assert!((resistance(v * a, &flows) - a * resistance(v, &flows)).abs() < tol * a);
        prop_assert!((resistance(-v, &flows) + resistance(v, &flows)).abs() < tol);
        prop_assert!(lubrication(v, &flows) >= 0.0);
        prop_assert!((lubrication(-v, &flows) - lubrication(v, &flows)).abs() < tol);
        let split: f64 = flows.iter().map(|f| resistance(v, std::slice::from_ref(f))).sum();
        prop_assert!((split - resistance(v, &flows)).abs() < tol);
        let w = CostWeights::default();
        prop_assert!(move_cost(v, &flows, &w) >= w.eps_min * v.norm() - 1e-12);
        // one unit flow at angle phi to a unit move
        let u = Vec2::new(1.0, 0.0);
        let f = [Vec2::from_polar(1.0, phi)];
        let expect = (1.0 - w.w_rc * phi.cos() + w.w_lc * phi.sin().abs()).max(w.eps_min);
        prop_assert!((move_cost(u, &f, &w) - expect).abs() < 1e-12);
        Ok(())
    })
}

pub fn empty_map_equivalence(cases: u32) -> Result<(), String> {
    let strat = (1usize..16, 1usize..16, any::<(u16, u16, u16, u16)>());
    run(cases, strat, |(w, h, (a, b, c, d))| {
        let m = CrowdFlowMap::new(Vec2::ZERO, 1.0, w, h);
        let s = (a as usize % w, b as usize % h);
        let g = (c as usize % w, d as usize % h);
        let social = plan_astar(&m, s, g, CostWeights::default(), true).path.unwrap();
        let plain = plan_astar(&m, s, g, CostWeights::default(), false).path.unwrap();
        prop_assert!((social.total_cost - plain.total_cost).abs() < 1e-9);
        Ok(())
    })
}

fn tiny_scenario(seed: u64) -> Scenario {
    Scenario {
        schema: 1,
        name: "tiny".into(),
        extent: Extent { w: 12.0, h: 6.0 },
        obstacles: vec![],
        lanes: vec![
            Lane { waypoints: vec![[1.0, 2.0], [11.0, 2.0]], rate: 1.0, bidirectional: false },
            Lane { waypoints: vec![[11.0, 4.0], [1.0, 4.0]], rate: 1.0, bidirectional: true },
        ],
        density: 0.1,
        robot: RobotSpec { start: [1.0, 3.0, 0.0], goal: [11.0, 3.0] },
        seed,
        tour: None,
    }
}

pub fn determinism(cases: u32) -> Result<(), String> {
    let strat = (any::<u64>(), any::<u64>(), 1usize..15, vec2());
    run(cases, strat, |(scenario_seed, seed, steps, cmd)| {
        let go = || {
            let mut w = World::with_seed(tiny_scenario(scenario_seed), SimParams::default(), seed);
            w.robot.commanded_velocity = cmd * 0.3;
            for _ in 0..steps {
                w.step(0.1);
            }
            (w.state_hash(), w.read_odometry(), w.sense_pedestrians())
        };
        prop_assert_eq!(go(), go());
        Ok(())
    })
}

/// Index picked for pointer `u`: first k whose running weight sum exceeds u,
/// found by binary search over the prefix sums.
fn oracle_index(prefix: &[f64], u: f64) -> usize {
    prefix.partition_point(|&c| c <= u).min(prefix.len() - 1)
}

pub fn resampler_oracle(cases: u32) -> Result<(), String> {
    let strat = (prop::collection::vec(0.0f64..1.0, 1..60), 0.0f64..1.0);
    run(cases, strat, |(raw, frac)| {
        let total: f64 = raw.iter().sum();
        let n = raw.len();
        let w: Vec<f64> = if total > 0.0 { raw.iter().map(|x| x / total).collect() } else { vec![1.0 / n as f64; n] };
        let u0 = frac / n as f64;
        let got = systematic_indices(&w, u0);
        prop_assert_eq!(got.len(), n);
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        for &x in &w {
            acc += x;
            prefix.push(acc);
        }
        for (m, &k) in got.iter().enumerate() {
            prop_assert_eq!(k, oracle_index(&prefix, u0 + m as f64 / n as f64));
        }
        prop_assert!(got.windows(2).all(|p| p[0] <= p[1]));
        // low variance: each index is copied floor or ceil of n·w times
        for (k, &wk) in w.iter().enumerate() {
            let copies = got.iter().filter(|&&i| i == k).count() as f64;
            prop_assert!((copies - n as f64 * wk).abs() < 1.0 + 1e-9, "index {} copies {} expected {}", k, copies, n as f64 * wk);
        }
        Ok(())
    })
}

pub fn ca_invariances(cases: u32) -> Result<(), String> {
    let strat = (
        prop::collection::vec(vec2(), 2..12),
        vec2(),
        -PI..PI,
        vec2(),
    );
    run(cases, strat, |(knots, shift, rot, vel)| {
        // smooth-ish trajectory: straight segments between knots, 10 samples each
        let mut path = Vec::new();
        for k in knots.windows(2) {
            for s in 0..10 {
                path.push(k[0] + (k[1] - k[0]) * (s as f64 / 10.0));
            }
        }
        let p = CaParams::default();
        let base = detect_ca_actions(&path, 0.1, &p).unwrap();
        let moved: Vec<Vec2> = path.iter().map(|&q| q + shift).collect();
        let turned: Vec<Vec2> = path.iter().map(|&q| q.rotate(rot)).collect();
        let mut reversed = path.clone();
        reversed.reverse();
        prop_assert_eq!(detect_ca_actions(&moved, 0.1, &p).unwrap(), base);
        prop_assert_eq!(detect_ca_actions(&turned, 0.1, &p).unwrap(), base);
        prop_assert_eq!(detect_ca_actions(&reversed, 0.1, &p).unwrap(), base);
        // constant velocity never counts
        let straight: Vec<Vec2> = (0..40).map(|k| vel * (0.1 * k as f64)).collect();
        prop_assert_eq!(detect_ca_actions(&straight, 0.1, &p).unwrap(), 0);
        Ok(())
    })
}
