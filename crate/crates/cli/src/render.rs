//! Binary PPM frames of a trajectory log, north up.
//!
//! Legend: white free space, gray obstacles, black goal cross, pink trail of
//! the true path, green odometry pose, blue estimated pose, red true pose
//! (drawn last, so it wins where markers overlap).

use std::io::Write;

use crowdnav::crowd_sim::{Obstacle, Scenario, TrajectoryRecord};
use crowdnav::geometry::Vec2;

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [255, 255, 255];
pub const OBSTACLE: Rgb = [150, 150, 150];
pub const GOAL: Rgb = [0, 0, 0];
pub const TRAIL: Rgb = [255, 180, 180];
pub const ODOMETRY: Rgb = [0, 160, 0];
pub const ESTIMATE: Rgb = [0, 0, 255];
pub const ROBOT: Rgb = [255, 0, 0];

/// World rectangle shown and its pixel scale.
#[derive(Debug, Clone, Copy)]
pub struct View {
    pub origin: Vec2,
    pub width: usize,
    pub height: usize,
    /// Pixels per meter.
    pub scale: f64,
}

impl View {
    pub fn of_scenario(sc: &Scenario, scale: f64) -> Self {
        View {
            origin: Vec2::ZERO,
            width: ((sc.extent.w * scale).ceil() as usize).max(1),
            height: ((sc.extent.h * scale).ceil() as usize).max(1),
            scale,
        }
    }

    /// Bounding box of every pose in the log plus a 1 m margin.
    pub fn of_log(rows: &[TrajectoryRecord], scale: f64) -> Self {
        let pts = rows.iter().flat_map(|r| [r.true_pose.position(), r.odom_pose.position(), r.est_pose.position()]);
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in pts {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = Vec2::ZERO;
            hi = Vec2::ZERO;
        }
        let origin = lo - Vec2::new(1.0, 1.0);
        let size = hi - lo + Vec2::new(2.0, 2.0);
        View {
            origin,
            width: ((size.x * scale).ceil() as usize).max(1),
            height: ((size.y * scale).ceil() as usize).max(1),
            scale,
        }
    }

    /// Pixel (column, row) holding `p`, if visible.
    pub fn pixel(&self, p: Vec2) -> Option<(usize, usize)> {
        let c = ((p.x - self.origin.x) * self.scale).floor();
        let r = ((p.y - self.origin.y) * self.scale).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((c as usize, self.height - 1 - r as usize))
    }

    fn center(&self, col: usize, row: usize) -> Vec2 {
        let y_px = (self.height - 1 - row) as f64;
        self.origin + Vec2::new((col as f64 + 0.5) / self.scale, (y_px + 0.5) / self.scale)
    }
}

pub struct Canvas {
    pub view: View,
    pub pixels: Vec<Rgb>,
}

impl Canvas {
    pub fn new(view: View) -> Self {
        Canvas {
            view,
            pixels: vec![BACKGROUND; view.width * view.height],
        }
    }

    #[cfg(test)]
    pub fn get(&self, col: usize, row: usize) -> Rgb {
        self.pixels[row * self.view.width + col]
    }

    fn put(&mut self, col: i64, row: i64, color: Rgb) {
        if col >= 0 && row >= 0 && (col as usize) < self.view.width && (row as usize) < self.view.height {
            self.pixels[row as usize * self.view.width + col as usize] = color;
        }
    }

    /// Filled disk of `radius` pixels (at least the center pixel).
    fn disk(&mut self, p: Vec2, radius: i64, color: Rgb) {
        let Some((c, r)) = self.view.pixel(p) else { return };
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                if dr * dr + dc * dc <= radius * radius {
                    self.put(c as i64 + dc, r as i64 + dr, color);
                }
            }
        }
    }

    fn cross(&mut self, p: Vec2, arm: i64, color: Rgb) {
        let Some((c, r)) = self.view.pixel(p) else { return };
        for d in -arm..=arm {
            self.put(c as i64 + d, r as i64 + d, color);
            self.put(c as i64 + d, r as i64 - d, color);
        }
    }

    fn obstacles(&mut self, obstacles: &[Obstacle]) {
        for row in 0..self.view.height {
            for col in 0..self.view.width {
                let p = self.view.center(col, row);
                if obstacles.iter().any(|o| o.clearance(p).0 < 0.0) {
                    self.pixels[row * self.view.width + col] = OBSTACLE;
                }
            }
        }
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.view.width, self.view.height)?;
        for px in &self.pixels {
            out.write_all(px)?;
        }
        Ok(())
    }
}

/// Static layer shared by every frame.
pub fn background(view: View, scenario: Option<&Scenario>) -> Canvas {
    let mut c = Canvas::new(view);
    if let Some(sc) = scenario {
        c.obstacles(&sc.obstacles);
        let arm = (0.4 * view.scale).round().max(1.0) as i64;
        c.cross(sc.robot_goal(), arm, GOAL);
    }
    c
}

/// Frame `k`: the true path up to row `k` and the three poses at row `k`.
pub fn frame(base: &Canvas, rows: &[TrajectoryRecord], k: usize) -> Canvas {
    let mut c = Canvas {
        view: base.view,
        pixels: base.pixels.clone(),
    };
    let radius = (0.3 * c.view.scale).round() as i64;
    for r in &rows[..k] {
        c.disk(r.true_pose.position(), 0, TRAIL);
    }
    let r = rows[k];
    c.disk(r.odom_pose.position(), radius, ODOMETRY);
    c.disk(r.est_pose.position(), radius, ESTIMATE);
    c.disk(r.true_pose.position(), radius, ROBOT);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crowdnav::geometry::Pose;

    fn record(t: f64, x: f64, y: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            t,
            true_pose: Pose::new(x, y, 0.0),
            odom_pose: Pose::new(x + 2.0, y, 0.0),
            est_pose: Pose::new(x, y + 2.0, 0.0),
            cmd: Vec2::ZERO,
        }
    }

    #[test]
    fn robot_pixel_uses_legend_colors() {
        let rows = [record(0.0, 3.0, 4.0)];
        let view = View {
            origin: Vec2::ZERO,
            width: 100,
            height: 80,
            scale: 10.0,
        };
        let f = frame(&background(view, None), &rows, 0);
        let (c, r) = view.pixel(Vec2::new(3.0, 4.0)).unwrap();
        assert_eq!(f.get(c, r), ROBOT);
        let (c, r) = view.pixel(Vec2::new(5.0, 4.0)).unwrap();
        assert_eq!(f.get(c, r), ODOMETRY);
        let (c, r) = view.pixel(Vec2::new(3.0, 6.0)).unwrap();
        assert_eq!(f.get(c, r), ESTIMATE);
        assert_eq!(f.get(0, 0), BACKGROUND);
    }

    #[test]
    fn north_is_up() {
        let view = View {
            origin: Vec2::ZERO,
            width: 10,
            height: 10,
            scale: 1.0,
        };
        assert_eq!(view.pixel(Vec2::new(0.5, 9.5)), Some((0, 0)));
        assert_eq!(view.pixel(Vec2::new(0.5, 0.5)), Some((0, 9)));
        assert_eq!(view.pixel(Vec2::new(-0.5, 0.5)), None);
    }

    #[test]
    fn ppm_header_and_size() {
        let c = Canvas::new(View {
            origin: Vec2::ZERO,
            width: 3,
            height: 2,
            scale: 1.0,
        });
        let mut out = Vec::new();
        c.write_ppm(&mut out).unwrap();
        assert!(out.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(out.len(), b"P6\n3 2\n255\n".len() + 18);
    }

    #[test]
    fn log_view_covers_all_poses() {
        let rows = [record(0.0, -3.0, 1.0), record(0.1, 8.0, 5.0)];
        let v = View::of_log(&rows, 4.0);
        for r in &rows {
            for p in [r.true_pose, r.odom_pose, r.est_pose] {
                assert!(v.pixel(p.position()).is_some());
            }
        }
    }
}
