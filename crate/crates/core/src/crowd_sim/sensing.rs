//! Pedestrian movement observations over the last window Δt.

use serde::{Deserialize, Serialize};

use super::world::{AgentState, World};
use crate::geometry::{normalize_angle, Pose, Vec2};

/// Observations implying more than this speed are treated as tracking glitches.
pub const MAX_OBSERVED_SPEED: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Global,
    /// Body frame of the robot's true pose at observation time.
    Robot,
}

/// One pedestrian's movement over the window: start point, path length and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementObservation {
    pub start: Vec2,
    pub length: f64,
    pub direction: f64,
    pub pedestrian_id: u64,
    pub t: f64,
    /// Duration the movement actually spans (s).
    pub span: f64,
    pub frame: Frame,
}

impl MovementObservation {
    /// Velocity implied by the movement, in the observation's frame.
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_polar(self.length / self.span, self.direction)
    }

    /// Re-expresses a robot-frame observation in the parent frame of `pose`.
    pub fn to_global(&self, pose: &Pose) -> MovementObservation {
        match self.frame {
            Frame::Global => *self,
            Frame::Robot => MovementObservation {
                start: pose.to_world(self.start),
                direction: normalize_angle(self.direction + pose.theta),
                frame: Frame::Global,
                ..*self
            },
        }
    }
}

/// Raw (start, end, span) of an agent's movement over the last window, if the
/// agent has been tracked for the whole window.
fn window_motion(a: &AgentState, now: f64, window: f64) -> Option<(Vec2, Vec2, f64)> {
    let &(t0, p0) = a.history.front()?;
    let span = now - t0;
    if span < window - 1e-9 {
        return None;
    }
    Some((p0, a.position, span))
}

fn observe(a: &AgentState, now: f64, window: f64) -> Option<MovementObservation> {
    let (p0, p1, span) = window_motion(a, now, window)?;
    let d = p1 - p0;
    let length = d.norm();
    if length / span > MAX_OBSERVED_SPEED {
        return None;
    }
    Some(MovementObservation {
        start: p0,
        length,
        direction: if length > 0.0 { d.angle() } else { 0.0 },
        pedestrian_id: a.id,
        t: now,
        span,
        frame: Frame::Global,
    })
}

impl World {
    /// Global-frame observations of every tracked pedestrian in the scene.
    pub fn birdview_observations(&self) -> Vec<MovementObservation> {
        self.agents
            .iter()
            .filter_map(|a| observe(a, self.time, self.params.window))
            .collect()
    }

    /// Robot-frame observations of pedestrians within perception range and
    /// line of sight of the robot.
    pub fn sense_pedestrians(&self) -> Vec<MovementObservation> {
        let pose = self.robot.true_pose;
        let eye = pose.position();
        let range = self.robot.perception_range;
        self.agents
            .iter()
            .filter(|a| a.position.distance(eye) <= range && self.scenario.line_of_sight(eye, a.position))
            .filter_map(|a| observe(a, self.time, self.params.window))
            .map(|o| MovementObservation {
                start: pose.to_body(o.start),
                direction: normalize_angle(o.direction - pose.theta),
                frame: Frame::Robot,
                ..o
            })
            .collect()
    }
}
