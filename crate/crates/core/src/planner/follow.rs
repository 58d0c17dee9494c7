//! Pure-pursuit path follower with a cone-based pedestrian avoider.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FollowerParams {
    pub v_max: f64,
    pub lookahead: f64,
    pub goal_tolerance: f64,
    /// Half-angle of the avoidance cone around the direction of travel (rad).
    pub cone_half_angle: f64,
    pub cone_range: f64,
}

impl Default for FollowerParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            lookahead: 1.5,
            goal_tolerance: 0.3,
            cone_half_angle: std::f64::consts::FRAC_PI_3,
            cone_range: 1.5,
        }
    }
}

/// Lookahead point: where the circle of radius `lookahead` around `p` first
/// leaves the path, searching forward from the projection of `p` onto the
/// path. Interpolating along segments keeps the target continuous as the
/// robot moves; the goal is returned once it lies within the circle.
pub fn lookahead_point(path: &[Vec2], p: Vec2, lookahead: f64) -> Vec2 {
    let last = path[path.len() - 1];
    if path.len() == 1 {
        return last;
    }
    let (mut seg, mut u_min, mut best) = (0, 0.0, f64::INFINITY);
    for (k, w) in path.windows(2).enumerate() {
        let d = w[1] - w[0];
        let l2 = d.norm_sq();
        let u = if l2 > 0.0 { ((p - w[0]).dot(d) / l2).clamp(0.0, 1.0) } else { 0.0 };
        let dist = (w[0] + d * u).distance(p);
        if dist < best {
            (seg, u_min, best) = (k, u, dist);
        }
    }
    for (k, w) in path.windows(2).enumerate().skip(seg) {
        let d = w[1] - w[0];
        let a = d.norm_sq();
        if a == 0.0 {
            continue;
        }
        let f = w[0] - p;
        let b = 2.0 * f.dot(d);
        let c = f.norm_sq() - lookahead * lookahead;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            continue;
        }
        let u = (-b + disc.sqrt()) / (2.0 * a);
        let lo = if k == seg { u_min } else { 0.0 };
        if (lo..=1.0).contains(&u) {
            return w[0] + d * u;
        }
    }
    last
}

/// Commanded world-frame velocity for a robot believed to be at `pose`.
/// `pedestrians` are world-frame positions in the same (believed) frame.
pub fn follow(path: &[Vec2], pose: &Pose, pedestrians: &[Vec2], params: &FollowerParams) -> Vec2 {
    assert!(!path.is_empty(), "cannot follow an empty path");
    let p = pose.position();
    let goal = path[path.len() - 1];
    if p.distance(goal) < params.goal_tolerance {
        return Vec2::ZERO;
    }
    pursue(p, lookahead_point(path, p, params.lookahead), pedestrians, params)
}

/// Velocity toward `target` at `v_max`, reshaped by the avoidance cone.
pub fn pursue(p: Vec2, target: Vec2, pedestrians: &[Vec2], params: &FollowerParams) -> Vec2 {
    let dir = (target - p).normalized();
    if dir == Vec2::ZERO {
        return Vec2::ZERO;
    }
    let mut nearest: Option<(f64, Vec2)> = None;
    for &q in pedestrians {
        let rel = q - p;
        let d = rel.norm();
        if d > params.cone_range || d == 0.0 {
            continue;
        }
        let off = rel.cross(dir).atan2(rel.dot(dir)).abs();
        if off <= params.cone_half_angle && nearest.is_none_or(|n| d < n.0) {
            nearest = Some((d, rel));
        }
    }
    match nearest {
        None => dir * params.v_max,
        Some((d, rel)) => {
            let scale = d / params.cone_range;
            // slide right unless the pedestrian is to the right
            let side = if dir.cross(rel) < 0.0 { 1.0 } else { -1.0 };
            dir * (params.v_max * scale) + dir.perp() * (side * (1.0 - scale) * params.v_max)
        }
    }
}
