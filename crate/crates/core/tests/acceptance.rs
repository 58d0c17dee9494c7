//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 1 2 4`.

mod common;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use crowdnav::crowd_sim::{load_scenario, Scenario};
use crowdnav::eval::{
    format_table, localization_run, mapping_session, par_seeds, run_batch, summarize, LocalizationConfig, LocalizerChoice,
    MappingConfig, EpisodeConfig, PlannerChoice,
};
use crowdnav::flow_map::{direction_match, CrowdFlowMap, FlowCell, FlowComponent};
use crowdnav::geometry::Vec2;
use crowdnav::localizer::{discounted_score, flow_match_score};
use crowdnav::planner::{edge_cost, lubrication, resistance, CostWeights};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

const DENSE: [&str; 2] = ["fountain", "canteen"];
const ANALOGS: [&str; 3] = ["fountain", "conference", "canteen"];
/// Seed and length of the mapping session whose map later runs navigate with.
const NAV_MAP_SEED: u64 = 1000;
const NAV_MAP_DURATION: f64 = 600.0;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Navigation map per scenario, built once and shared by the later criteria.
fn nav_map(name: &str) -> CrowdFlowMap {
    static CACHE: OnceLock<Mutex<HashMap<String, CrowdFlowMap>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(m) = cache.lock().unwrap().get(name) {
        return m.clone();
    }
    let sc = scenario(name);
    let cfg = MappingConfig {
        duration: NAV_MAP_DURATION,
        ..MappingConfig::default()
    };
    let map = mapping_session(&sc, NAV_MAP_SEED, &sc.tour_points(), &cfg).map;
    cache.lock().unwrap().insert(name.to_string(), map.clone());
    map
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn c1_score_formula() -> Outcome {
    let cell = |bins: &[u8]| FlowCell {
        components: bins.iter().map(|&bin| FlowComponent { bin, speed: 1.0, support: 1 }).collect(),
        ..FlowCell::default()
    };
    // (observed heading, cell bins, gamma, expected q)
    let cells: [(f64, &[u8], f64, f64); 6] = [
        (0.0, &[0], 0.5, 1.0),
        (0.0, &[0], 0.0, 1.0),
        (0.0, &[0], 1.0, 1.0),
        (0.0, &[0, 4], 0.5, 2.0 / 3.0),
        (PI / 2.0, &[0], 0.5, 0.5),
        (0.0, &[0, 3, 5], 0.5, 0.5),
    ];
    let mut worst: f64 = 0.0;
    for (theta, bins, gamma, want) in cells {
        let got = flow_match_score(theta, &cell(bins), gamma);
        worst = worst.max((got - want).abs());
    }
    // a full reversal scores zero whatever the cell's direction count
    let reversed = direction_match(PI, &cell(&[0]));
    let mut n_cases = cells.len();
    for n in 1..=8 {
        for gamma in [0.0, 0.5, 1.0] {
            worst = worst.max(discounted_score(reversed, n, gamma).abs());
            n_cases += 1;
        }
    }
    check(worst <= 1e-9, format!("{n_cases} cases, max error {worst:.1e}"))
}

fn c2_edge_costs() -> Outcome {
    let w = CostWeights {
        w_rc: 1.0,
        w_lc: 0.5,
        ..CostWeights::default()
    };
    let mv = Vec2::new(1.0, 0.0);
    let raw = |f: Vec2| mv.norm() + w.w_rc * resistance(mv, &[f]) + w.w_lc * lubrication(mv, &[f]);
    let flow = |bin| FlowCell {
        components: vec![FlowComponent { bin, speed: 1.0, support: 1 }],
        ..FlowCell::default()
    };
    let aligned = raw(Vec2::new(1.0, 0.0));
    let perpendicular = raw(Vec2::new(0.0, 1.0));
    let opposing = raw(Vec2::new(-1.0, 0.0));
    let errs = [
        aligned.abs(),
        (perpendicular - 1.5).abs(),
        (opposing - 2.0).abs(),
        (edge_cost(mv, &flow(0), &w) - w.eps_min).abs(),
        (edge_cost(mv, &flow(2), &w) - 1.5).abs(),
        (edge_cost(mv, &flow(4), &w) - 2.0).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    check(
        worst <= 1e-9,
        format!("raw {aligned} / {perpendicular} / {opposing}, aligned clamped to {}, max error {worst:.1e}", w.eps_min),
    )
}

fn c3_cluster_oracle() -> Outcome {
    let hits = common::cluster_oracle_hits(21, 200);
    check(hits * 100 >= 95 * 200, format!("{hits}/200 sets match the exhaustive oracle ({} differ)", 200 - hits))
}

fn c4_dstar_equivalence() -> Outcome {
    match common::dstar_agreement(12, 100, 5) {
        Ok(n) => check(n == 500, format!("{n}/500 repaired plans equal fresh A* cost")),
        Err(e) => Err(e),
    }
}

fn c5_mapping_convergence() -> Outcome {
    let seeds: Vec<u64> = (1..=5).collect();
    let cfg = MappingConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["corridor", "fountain", "conference", "canteen"] {
        let sc = scenario(name);
        let tour = sc.tour_points();
        let series = par_seeds(&seeds, |s| mapping_session(&sc, s, &tour, &cfg).quality);
        let mut rising = 0;
        let mut finals = Vec::new();
        for q in &series {
            let n = q.len() / 4;
            let first = mean(&q[..n].iter().map(|p| p.1).collect::<Vec<_>>());
            let last = mean(&q[q.len() - n..].iter().map(|p| p.1).collect::<Vec<_>>());
            if last > first {
                rising += 1;
            }
            finals.push(q.last().unwrap().1);
        }
        let final_mean = mean(&finals);
        let floor = match name {
            "corridor" => 0.9,
            "fountain" => 0.7,
            _ => 0.0,
        };
        ok &= rising == seeds.len() && final_mean >= floor;
        parts.push(format!("{name} rising {rising}/5 final {final_mean:.2}"));
    }
    check(ok, parts.join(", "))
}

fn c6_localization() -> Outcome {
    let seeds: Vec<u64> = (1..=10).collect();
    let cfg = LocalizationConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ANALOGS {
        let sc = scenario(name);
        let map = nav_map(name);
        let outs = par_seeds(&seeds, |s| localization_run(&sc, s, &map, &cfg));
        let mut crowd = Vec::new();
        let mut odom = Vec::new();
        for o in outs {
            let o = o.map_err(|e| format!("{name}: {e}"))?;
            crowd.push(o.crowd_mse);
            odom.push(o.odometry_mse);
        }
        let ratio = mean(&crowd) / mean(&odom);
        let bound = if DENSE.contains(&name) { 0.5 } else { 1.0 };
        ok &= ratio < bound;
        parts.push(format!("{name} {:.2}/{:.2} m² ({:.0}%)", mean(&crowd), mean(&odom), 100.0 * ratio));
    }
    check(ok, parts.join(", "))
}

fn c7_social_planning() -> Outcome {
    let seeds: Vec<u64> = (1..=30).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ANALOGS {
        let sc = scenario(name);
        let map = nav_map(name);
        let mut ca = HashMap::new();
        for planner in [PlannerChoice::AstarShortest, PlannerChoice::AstarSocial, PlannerChoice::DstarCrowd] {
            let cfg = EpisodeConfig {
                localizer: LocalizerChoice::Truth,
                planner,
                ..EpisodeConfig::default()
            };
            let reports = run_batch(&sc, &seeds, Some(&map), &cfg).map_err(|e| format!("{name}: {e}"))?;
            ca.insert(planner, summarize(&reports).ca_mean);
        }
        let short = ca[&PlannerChoice::AstarShortest];
        let social = ca[&PlannerChoice::AstarSocial];
        let crowd = ca[&PlannerChoice::DstarCrowd];
        ok &= social < short && crowd < short;
        parts.push(format!("{name} CA {short:.1} / {social:.1} / {crowd:.1}"));
    }
    check(ok, format!("shortest / social / crowd: {}", parts.join(", ")))
}

fn c8_closed_loop() -> Outcome {
    let seeds: Vec<u64> = (1..=50).collect();
    let cfg = EpisodeConfig::default();
    let mut ok = true;
    let mut summaries = Vec::new();
    for name in DENSE {
        let sc = scenario(name);
        let map = nav_map(name);
        let reports = run_batch(&sc, &seeds, Some(&map), &cfg).map_err(|e| format!("{name}: {e}"))?;
        let s = summarize(&reports);
        ok &= s.success_rate >= 0.8;
        summaries.push(s);
    }
    let table = format_table(&summaries);
    for line in table.lines() {
        println!("    {line}");
    }
    let rates: Vec<String> = summaries
        .iter()
        .map(|s| format!("{} {:.0}%", s.scenario, 100.0 * s.success_rate))
        .collect();
    check(ok, format!("success {}", rates.join(", ")))
}

fn c9_properties() -> Outcome {
    let mut failed = Vec::new();
    for (name, suite) in common::props::SUITES {
        if let Err(e) = suite(1000) {
            failed.push(format!("{name}: {e}"));
        }
    }
    if failed.is_empty() {
        Ok(format!("{} suites × 1000 cases", common::props::SUITES.len()))
    } else {
        Err(failed.join("; "))
    }
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "flow-matching score examples", limit: Duration::from_secs(1), run: c1_score_formula },
        Criterion { id: 2, name: "edge-cost examples", limit: Duration::from_secs(1), run: c2_edge_costs },
        Criterion { id: 3, name: "clustering vs exhaustive oracle", limit: Duration::from_secs(30), run: c3_cluster_oracle },
        Criterion { id: 4, name: "D* Lite repair vs fresh A*", limit: Duration::from_secs(60), run: c4_dstar_equivalence },
        Criterion { id: 5, name: "mapping convergence", limit: Duration::from_secs(600), run: c5_mapping_convergence },
        Criterion { id: 6, name: "localization vs odometry", limit: Duration::from_secs(900), run: c6_localization },
        Criterion { id: 7, name: "social planners avoid disturbance", limit: Duration::from_secs(1200), run: c7_social_planning },
        Criterion { id: 8, name: "closed-loop success", limit: Duration::from_secs(1800), run: c8_closed_loop },
        Criterion { id: 9, name: "property suites", limit: Duration::from_secs(300), run: c9_properties },
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = t.elapsed();
        let in_time = elapsed <= c.limit;
        let (verdict, detail) = match (&result, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over time limit")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!(
            "criterion {} {verdict} {}: {detail} [{:.1} s, limit {} s]",
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
