use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundLabel {
    Ground,
    NonGround,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Static,
    Dynamic,
    Undetermined,
}

/// A return as read from disk or produced by the simulator, in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub position: Point3,
    pub intensity: f32,
    /// Laser index counted from the lowest beam, when the source provides it.
    pub ring: Option<u16>,
}

impl RawPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: Point3::new(x, y, z),
            intensity: 0.0,
            ring: None,
        }
    }

    pub fn with_ring(mut self, ring: u16) -> Self {
        self.ring = Some(ring);
        self
    }

    pub fn range(&self) -> f64 {
        self.position.coords.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
    }
}

/// One point as it moves through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position_sensor: Point3,
    pub position_world: Point3,
    pub ground_label: GroundLabel,
    pub class: Option<PointClass>,
    pub ring: u16,
    pub range: f64,
    /// Index of the originating return within its sweep file.
    pub source_index: u32,
}

impl LabeledPoint {
    pub fn new(position_sensor: Point3, ring: u16, source_index: u32) -> Self {
        Self {
            position_sensor,
            position_world: position_sensor,
            ground_label: GroundLabel::NonGround,
            class: None,
            ring,
            range: position_sensor.coords.norm(),
            source_index,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.ground_label == GroundLabel::Ground
    }
}

/// One LiDAR revolution.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub index: u64,
    pub points: Vec<RawPoint>,
    /// Maps this sweep's LiDAR frame into the world frame.
    pub pose_world_lidar: Pose,
}

impl Sweep {
    pub fn new(index: u64, points: Vec<RawPoint>, pose_world_lidar: Pose) -> Self {
        Self {
            index,
            points,
            pose_world_lidar,
        }
    }
}
