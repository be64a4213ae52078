//! Pose files: KITTI odometry (row-major 3x4 per line) and TUM
//! (`timestamp tx ty tz qx qy qz qw`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseFormat {
    KittiOdometry,
    Tum,
}

impl FromStr for PoseFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kitti" | "kitti_odometry" => Ok(PoseFormat::KittiOdometry),
            "tum" => Ok(PoseFormat::Tum),
            other => Err(format!("unknown pose format `{other}` (expected kitti|tum)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StampedPose {
    /// Seconds; KITTI files carry none and use the line index.
    pub timestamp: f64,
    pub pose: Pose,
}

pub fn read_poses(path: &Path, format: PoseFormat) -> Result<Vec<StampedPose>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text, format).map_err(|(line, msg)| Error::format_at(path, line, msg))
}

/// Parses pose text. Blank lines and lines starting with `#` are skipped.
/// Errors carry the 1-based line number.
pub fn parse_poses(text: &str, format: PoseFormat) -> Result<Vec<StampedPose>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = trimmed
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| (line_no, format!("not a number: `{t}`"))))
            .collect::<Result<_, _>>()?;
        let stamped = match format {
            PoseFormat::KittiOdometry => {
                let m: [f64; 12] = values
                    .as_slice()
                    .try_into()
                    .map_err(|_| (line_no, format!("expected 12 values, found {}", values.len())))?;
                let pose = Pose::from_row_major_3x4(&m).map_err(|e| (line_no, e.to_string()))?;
                StampedPose {
                    timestamp: out.len() as f64,
                    pose,
                }
            }
            PoseFormat::Tum => {
                let [ts, tx, ty, tz, qx, qy, qz, qw]: [f64; 8] = values
                    .as_slice()
                    .try_into()
                    .map_err(|_| (line_no, format!("expected 8 values, found {}", values.len())))?;
                if !values.iter().all(|v| v.is_finite()) {
                    return Err((line_no, "non-finite value".into()));
                }
                let q = Quaternion::new(qw, qx, qy, qz);
                if q.norm() < 1e-9 {
                    return Err((line_no, "zero quaternion".into()));
                }
                StampedPose {
                    timestamp: ts,
                    pose: Pose::from_quaternion(UnitQuaternion::from_quaternion(q), Vector3::new(tx, ty, tz)),
                }
            }
        };
        out.push(stamped);
    }
    Ok(out)
}

/// KITTI layout, one pose per line, preceded by optional `#` comment lines.
pub fn format_kitti_poses<'a>(header: &[&str], poses: impl IntoIterator<Item = &'a Pose>) -> String {
    let mut s = String::new();
    for h in header {
        let _ = writeln!(s, "# {h}");
    }
    for p in poses {
        let m = p.to_row_major_3x4();
        let line: Vec<String> = m.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}
