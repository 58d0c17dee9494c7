use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec2};

pub const TRAJECTORY_HEADER: &str = "t,true_x,true_y,true_th,odom_x,odom_y,odom_th,est_x,est_y,est_th,cmd_vx,cmd_vy";

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub true_pose: Pose,
    pub odom_pose: Pose,
    pub est_pose: Pose,
    pub cmd: Vec2,
}

impl TrajectoryRecord {
    fn fields(&self) -> [f64; 12] {
        let (a, b, c) = (self.true_pose, self.odom_pose, self.est_pose);
        [self.t, a.x, a.y, a.theta, b.x, b.y, b.theta, c.x, c.y, c.theta, self.cmd.x, self.cmd.y]
    }
}

pub fn write_trajectory_log<W: Write>(mut out: W, rows: &[TrajectoryRecord]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        let f = r.fields().map(|v| v.to_string());
        writeln!(out, "{}", f.join(","))?;
    }
    Ok(())
}

pub fn read_trajectory_log<R: BufRead>(input: R) -> Result<Vec<TrajectoryRecord>> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != TRAJECTORY_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .enumerate()
            .map(|(k, s)| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: n + 1,
                    column: k + 1,
                    message: format!("{s:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != 12 {
            return Err(Error::Parse {
                line: n + 1,
                column: 1,
                message: format!("expected 12 fields, found {}", vals.len()),
            });
        }
        rows.push(TrajectoryRecord {
            t: vals[0],
            true_pose: Pose::new(vals[1], vals[2], vals[3]),
            odom_pose: Pose::new(vals[4], vals[5], vals[6]),
            est_pose: Pose::new(vals[7], vals[8], vals[9]),
            cmd: Vec2::new(vals[10], vals[11]),
        });
    }
    Ok(rows)
}
