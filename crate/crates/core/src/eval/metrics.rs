use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Mean squared position error of `estimate` against `truth`.
///
/// The estimate is linearly interpolated at each truth stamp inside its own
/// time span; truth samples outside that span are skipped. Both inputs must be
/// sorted by time.
pub fn localization_mse(estimate: &[(f64, Vec2)], truth: &[(f64, Vec2)]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0;
    let mut k = 0;
    for &(t, p) in truth {
        let Some(first) = estimate.first() else { break };
        let last = estimate[estimate.len() - 1];
        if t < first.0 || t > last.0 {
            continue;
        }
        while k + 1 < estimate.len() && estimate[k + 1].0 < t {
            k += 1;
        }
        let q = if k + 1 < estimate.len() {
            let (t0, p0) = estimate[k];
            let (t1, p1) = estimate[k + 1];
            if t1 > t0 {
                p0 + (p1 - p0) * ((t - t0) / (t1 - t0))
            } else {
                p1
            }
        } else {
            estimate[k].1
        };
        sum += (q - p).norm_sq();
        n += 1;
    }
    if n < 2 {
        return Err(Error::InsufficientOverlap(n));
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaParams {
    /// Window length (s).
    pub t_traj: f64,
    /// Mean acceleration above which a window counts as a maneuver (m/s²).
    pub a_thres: f64,
}

impl Default for CaParams {
    fn default() -> Self {
        Self {
            t_traj: 0.5,
            a_thres: 0.15,
        }
    }
}

/// Counts collision-avoidance maneuvers in a trajectory sampled every `dt`.
///
/// Velocity and acceleration come from central differences. Each window of
/// `t_traj` seconds is flagged when its mean acceleration magnitude exceeds
/// `a_thres`; every maximal run of flagged windows is one event.
pub fn detect_ca_actions(positions: &[Vec2], dt: f64, params: &CaParams) -> Result<usize> {
    if !(dt > 0.0 && dt <= params.t_traj / 2.0) {
        return Err(Error::Config(format!(
            "sampling step {dt} s too coarse for {} s windows",
            params.t_traj
        )));
    }
    let n = positions.len();
    if n < 2 || (n - 1) as f64 * dt < params.t_traj {
        return Ok(0);
    }
    let v: Vec<Vec2> = (1..n - 1)
        .map(|k| (positions[k + 1] - positions[k - 1]) / (2.0 * dt))
        .collect();
    if v.len() < 3 {
        return Ok(0);
    }
    let a: Vec<f64> = (1..v.len() - 1)
        .map(|k| ((v[k + 1] - v[k - 1]) / (2.0 * dt)).norm())
        .collect();
    let w = ((params.t_traj / dt).round() as usize).max(1);
    if a.len() < w {
        return Ok(0);
    }
    let mut events = 0;
    let mut inside = false;
    let mut window: f64 = a[..w].iter().sum();
    for start in 0..=a.len() - w {
        if start > 0 {
            window += a[start + w - 1] - a[start - 1];
        }
        let hot = window / w as f64 > params.a_thres;
        if hot && !inside {
            events += 1;
        }
        inside = hot;
    }
    Ok(events)
}
