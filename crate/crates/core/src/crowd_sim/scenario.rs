//! Scenario description and its JSON file format (`"schema": 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_on_segment, Pose, Rect, Vec2};

pub const SCENARIO_SCHEMA: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Obstacle {
    Rect { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

impl Obstacle {
    pub fn rect(min: Vec2, max: Vec2) -> Self {
        Obstacle::Rect {
            min: [min.x, min.y],
            max: [max.x, max.y],
        }
    }

    pub fn circle(center: Vec2, radius: f64) -> Self {
        Obstacle::Circle {
            center: [center.x, center.y],
            radius,
        }
    }

    fn as_rect(min: &[f64; 2], max: &[f64; 2]) -> Rect {
        Rect {
            min: Vec2::new(min[0], min[1]),
            max: Vec2::new(max[0], max[1]),
        }
    }

    /// Signed clearance of `p` from the obstacle surface (negative inside) and
    /// the outward unit normal at the closest surface point.
    pub fn clearance(&self, p: Vec2) -> (f64, Vec2) {
        match self {
            Obstacle::Rect { min, max } => {
                let r = Self::as_rect(min, max);
                if r.contains(p) {
                    // inside: leave through the nearest face
                    let faces = [
                        (p.x - r.min.x, Vec2::new(-1.0, 0.0)),
                        (r.max.x - p.x, Vec2::new(1.0, 0.0)),
                        (p.y - r.min.y, Vec2::new(0.0, -1.0)),
                        (r.max.y - p.y, Vec2::new(0.0, 1.0)),
                    ];
                    let (depth, n) = faces
                        .into_iter()
                        .fold((f64::INFINITY, Vec2::ZERO), |acc, f| if f.0 < acc.0 { f } else { acc });
                    (-depth, n)
                } else {
                    let c = r.closest_point(p);
                    let d = p - c;
                    (d.norm(), d.normalized())
                }
            }
            Obstacle::Circle { center, radius } => {
                let c = Vec2::new(center[0], center[1]);
                let d = p - c;
                let n = d.norm();
                let normal = if n > 0.0 { d * (1.0 / n) } else { Vec2::new(1.0, 0.0) };
                (n - radius, normal)
            }
        }
    }

    pub fn blocks_segment(&self, a: Vec2, b: Vec2) -> bool {
        match self {
            Obstacle::Rect { min, max } => Self::as_rect(min, max).intersects_segment(a, b),
            Obstacle::Circle { center, radius } => {
                let c = Vec2::new(center[0], center[1]);
                closest_on_segment(c, a, b).distance(c) <= *radius
            }
        }
    }

    fn bounds(&self) -> (Vec2, Vec2) {
        match self {
            Obstacle::Rect { min, max } => (Vec2::new(min[0], min[1]), Vec2::new(max[0], max[1])),
            Obstacle::Circle { center, radius } => (
                Vec2::new(center[0] - radius, center[1] - radius),
                Vec2::new(center[0] + radius, center[1] + radius),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub waypoints: Vec<[f64; 2]>,
    /// Relative spawn rate (agents/s); sets each lane's share of the population.
    pub rate: f64,
    #[serde(default)]
    pub bidirectional: bool,
}

impl Lane {
    pub fn points(&self) -> Vec<Vec2> {
        self.waypoints.iter().map(|w| Vec2::new(w[0], w[1])).collect()
    }

    pub fn length(&self) -> f64 {
        self.points().windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extent {
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub start: [f64; 3],
    pub goal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u64,
    pub name: String,
    pub extent: Extent,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub lanes: Vec<Lane>,
    pub density: f64,
    pub robot: RobotSpec,
    pub seed: u64,
    /// Mapping tour waypoints; a lawnmower sweep is generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tour: Option<Vec<[f64; 2]>>,
}

impl Scenario {
    pub fn robot_start(&self) -> Pose {
        let s = self.robot.start;
        Pose::new(s[0], s[1], s[2])
    }

    pub fn robot_goal(&self) -> Vec2 {
        Vec2::new(self.robot.goal[0], self.robot.goal[1])
    }

    pub fn area(&self) -> f64 {
        self.extent.w * self.extent.h
    }

    pub fn agent_count(&self) -> usize {
        (self.density * self.area()).round() as usize
    }

    pub fn inside(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.extent.w && p.y <= self.extent.h
    }

    pub fn is_free(&self, p: Vec2, clearance: f64) -> bool {
        self.obstacles.iter().all(|o| o.clearance(p).0 >= clearance)
    }

    pub fn line_of_sight(&self, a: Vec2, b: Vec2) -> bool {
        !self.obstacles.iter().any(|o| o.blocks_segment(a, b))
    }

    /// Mapping tour: the explicit one, or a lawnmower sweep with 8 m spacing
    /// that skips points inside obstacles.
    pub fn tour_points(&self) -> Vec<Vec2> {
        if let Some(t) = &self.tour {
            return t.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        }
        let spacing = 8.0;
        let margin = 3.0;
        let mut pts = Vec::new();
        let mut y = margin;
        let mut flip = false;
        while y <= self.extent.h - margin + 1e-9 {
            let row = [Vec2::new(margin, y), Vec2::new(self.extent.w - margin, y)];
            let row = if flip { [row[1], row[0]] } else { row };
            pts.extend(row.into_iter().filter(|p| self.is_free(*p, 0.5)));
            flip = !flip;
            y += spacing;
        }
        pts
    }

    /// Parses and validates a scenario file.
    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text).map_err(Error::from_json)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::VersionMismatch {
                found: self.schema,
                expected: SCENARIO_SCHEMA,
            });
        }
        let (w, h) = (self.extent.w, self.extent.h);
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return bad(format!("extent must be positive, got {w}x{h}"));
        }
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return bad(format!("density must be >= 0, got {}", self.density));
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            let (lo, hi) = o.bounds();
            if let Obstacle::Circle { radius, .. } = o {
                if !(*radius > 0.0) {
                    return bad(format!("obstacle {k}: radius must be positive"));
                }
            }
            if let Obstacle::Rect { min, max } = o {
                if !(min[0] < max[0] && min[1] < max[1]) {
                    return bad(format!("obstacle {k}: rect min must be below max"));
                }
            }
            if !(self.inside(lo) && self.inside(hi)) {
                return bad(format!("obstacle {k} lies outside the {w}x{h} extent"));
            }
        }
        if self.lanes.is_empty() {
            return bad("at least one lane is required".into());
        }
        for (k, lane) in self.lanes.iter().enumerate() {
            if lane.waypoints.len() < 2 {
                return bad(format!("lane {k} needs at least 2 waypoints"));
            }
            if !(lane.rate >= 0.0 && lane.rate.is_finite()) {
                return bad(format!("lane {k}: spawn rate must be >= 0"));
            }
            for p in lane.points() {
                if !self.inside(p) {
                    return bad(format!("lane {k}: waypoint ({}, {}) outside extent", p.x, p.y));
                }
            }
            if lane.length() <= 0.0 {
                return bad(format!("lane {k} has zero length"));
            }
        }
        let start = self.robot_start();
        for (what, p) in [("robot start", start.position()), ("robot goal", self.robot_goal())] {
            if !self.inside(p) {
                return bad(format!("{what} ({}, {}) outside extent", p.x, p.y));
            }
        }
        if let Some(t) = &self.tour {
            for p in t {
                if !self.inside(Vec2::new(p[0], p[1])) {
                    return bad(format!("tour point ({}, {}) outside extent", p[0], p[1]));
                }
            }
        }
        Ok(())
    }
}
