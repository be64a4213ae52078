//! Synthetic spinning-LiDAR scenes with ground-truth static/dynamic tags.
//!
//! A scene is a ground plane, static boxes (walls, buildings) and boxes
//! moving at constant velocity on the ground. Every (ring, azimuth) ray is
//! cast from the platform pose and the nearest hit is kept.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::{format_kitti_poses, write_kitti_bin, write_semantic_labels};
use crate::error::{Error, Result};
use crate::eval::GtTag;
use crate::geometry::{Point3, Pose};
use crate::types::{RawPoint, Sweep};

/// Semantic-KITTI ids written to `.label` files.
pub mod class_id {
    pub const ROAD: u32 = 40;
    pub const BUILDING: u32 = 50;
    pub const CAR: u32 = 10;
    pub const MOVING_CAR: u32 = 252;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub rings: usize,
    /// Lowest and highest beam elevation, degrees; beams are evenly spaced.
    pub vertical_fov: [f64; 2],
    pub azimuth_bins: usize,
    pub max_range: f64,
    pub sweep_rate_hz: f64,
    /// Standard deviation of additive range noise in meters.
    pub range_noise_sigma: f64,
    /// Per-sweep advance of the firing azimuth, as a fraction of one bin.
    /// Unsynchronized spinning sensors do not repeat the same azimuths.
    pub azimuth_phase_step: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            rings: 64,
            vertical_fov: [-24.8, 2.0],
            azimuth_bins: 1800,
            max_range: 80.0,
            sweep_rate_hz: 10.0,
            range_noise_sigma: 0.0,
            azimuth_phase_step: 0.618_034,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Trajectory {
    /// Sensor position at sweep 0.
    pub start: [f64; 3],
    /// Meters per second.
    pub velocity: [f64; 3],
    /// Heading about +z, radians.
    pub yaw: f64,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            start: [0.0; 3],
            velocity: [0.0; 3],
            yaw: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticBox {
    pub center: [f64; 3],
    /// Full extents along the box axes.
    pub size: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

/// A box resting on the ground plane, moving at constant velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicBox {
    /// Ground-plane position of the box center at sweep 0.
    pub center: [f64; 2],
    pub size: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    /// Meters per second in the ground plane.
    pub velocity: [f64; 2],
    /// Sweeps before this one do not contain the box (it is off-scene or
    /// hidden).
    #[serde(default)]
    pub first_sweep: u64,
    #[serde(default)]
    pub last_sweep: Option<u64>,
}

impl DynamicBox {
    pub fn is_moving(&self) -> bool {
        self.velocity[0] != 0.0 || self.velocity[1] != 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    /// Height of the ground plane; `None` for no ground.
    pub ground_height: Option<f64>,
    pub seed: u64,
    pub sensor: SensorSpec,
    pub trajectory: Trajectory,
    pub static_boxes: Vec<StaticBox>,
    pub dynamic_boxes: Vec<DynamicBox>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            ground_height: Some(-1.73),
            seed: 0,
            sensor: SensorSpec::default(),
            trajectory: Trajectory::default(),
            static_boxes: Vec::new(),
            dynamic_boxes: Vec::new(),
        }
    }
}

/// A generated sweep and its per-point ground truth.
#[derive(Debug, Clone)]
pub struct SynthSweep {
    pub sweep: Sweep,
    pub gt: Vec<GtTag>,
    /// Semantic-KITTI style label per point.
    pub labels: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Surface {
    Ground,
    Static,
    Dynamic { moving: bool },
}

/// Box in world coordinates ready for ray tests.
#[derive(Debug, Clone, Copy)]
pub struct OrientedBox {
    pub center: Point3,
    pub half: Vector3<f64>,
    /// Heading of the box x axis.
    pub yaw: f64,
}

impl OrientedBox {
    /// Entry distance along `dir` from `origin`, if the ray enters the box
    /// at `t > 0`. Rays starting inside the box report no hit.
    pub fn intersect(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<f64> {
        let (s, c) = self.yaw.sin_cos();
        let d = origin - self.center;
        // world → box frame is a rotation by -yaw
        let o = Vector3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z);
        let v = Vector3::new(c * dir.x + s * dir.y, -s * dir.x + c * dir.y, dir.z);
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for i in 0..3 {
            if v[i].abs() < 1e-15 {
                if o[i].abs() > self.half[i] {
                    return None;
                }
                continue;
            }
            let a = (-self.half[i] - o[i]) / v[i];
            let b = (self.half[i] - o[i]) / v[i];
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            t_near = t_near.max(lo);
            t_far = t_far.min(hi);
            if t_near > t_far {
                return None;
            }
        }
        (t_near > 0.0).then_some(t_near)
    }

    /// Whether `p` lies inside or on the box, with tolerance `eps`.
    pub fn contains(&self, p: &Point3, eps: f64) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.center;
        let q = Vector3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z);
        (0..3).all(|i| q[i].abs() <= self.half[i] + eps)
    }
}

/// Distance along `dir` to the plane `z = height`, for rays heading into it.
pub fn intersect_ground(origin: &Point3, dir: &Vector3<f64>, height: f64) -> Option<f64> {
    if dir.z.abs() < 1e-15 {
        return None;
    }
    let t = (height - origin.z) / dir.z;
    (t > 0.0).then_some(t)
}

impl SceneSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        if s.rings < 2 {
            return Err(Error::Config(format!("sensor.rings must be >= 2, got {}", s.rings)));
        }
        if s.azimuth_bins < 8 {
            return Err(Error::Config(format!(
                "sensor.azimuth_bins must be >= 8, got {}",
                s.azimuth_bins
            )));
        }
        let [lo, hi] = s.vertical_fov;
        let fov_ok = lo < hi && lo > -90.0 && hi < 90.0;
        if !fov_ok {
            return Err(Error::Config(format!("sensor.vertical_fov {:?} is degenerate", s.vertical_fov)));
        }
        if !(s.max_range > 0.0 && s.max_range.is_finite()) {
            return Err(Error::Config("sensor.max_range must be > 0".into()));
        }
        if !(s.sweep_rate_hz > 0.0 && s.sweep_rate_hz.is_finite()) {
            return Err(Error::Config("sensor.sweep_rate_hz must be > 0".into()));
        }
        if !(s.range_noise_sigma.is_finite() && s.range_noise_sigma >= 0.0) {
            return Err(Error::Config("sensor.range_noise_sigma must be >= 0".into()));
        }
        let positive = |v: &[f64; 3]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        for (i, b) in self.static_boxes.iter().enumerate() {
            if !positive(&b.size) {
                return Err(Error::Config(format!("static_boxes[{i}].size must be positive")));
            }
        }
        if !self.dynamic_boxes.is_empty() && self.ground_height.is_none() {
            return Err(Error::Config("dynamic boxes need a ground plane to rest on".into()));
        }
        for (i, b) in self.dynamic_boxes.iter().enumerate() {
            if !positive(&b.size) {
                return Err(Error::Config(format!("dynamic_boxes[{i}].size must be positive")));
            }
        }
        Ok(())
    }

    pub fn sweep_period(&self) -> f64 {
        1.0 / self.sensor.sweep_rate_hz
    }

    /// World pose of the sensor at `sweep`.
    pub fn platform_pose(&self, sweep: u64) -> Pose {
        let t = sweep as f64 * self.sweep_period();
        let tr = &self.trajectory;
        let pos = Vector3::from(tr.start) + Vector3::from(tr.velocity) * t;
        Pose::from_yaw(tr.yaw, pos)
    }

    pub fn beam_elevation(&self, ring: usize) -> f64 {
        let [lo, hi] = self.sensor.vertical_fov;
        (lo + ring as f64 * (hi - lo) / (self.sensor.rings - 1) as f64).to_radians()
    }

    /// Dynamic boxes present at `sweep`, placed in the world.
    pub fn dynamic_boxes_at(&self, sweep: u64) -> Vec<(OrientedBox, bool)> {
        let Some(g) = self.ground_height else {
            return Vec::new();
        };
        let t = sweep as f64 * self.sweep_period();
        self.dynamic_boxes
            .iter()
            .filter(|b| sweep >= b.first_sweep && b.last_sweep.map_or(true, |l| sweep <= l))
            .map(|b| {
                let c = Vector2::from(b.center) + Vector2::from(b.velocity) * t;
                let ob = OrientedBox {
                    center: Point3::new(c.x, c.y, g + b.size[2] / 2.0),
                    half: Vector3::from(b.size) / 2.0,
                    yaw: b.yaw,
                };
                (ob, b.is_moving())
            })
            .collect()
    }

    pub fn static_boxes_world(&self) -> Vec<OrientedBox> {
        self.static_boxes
            .iter()
            .map(|b| OrientedBox {
                center: Point3::from(b.center),
                half: Vector3::from(b.size) / 2.0,
                yaw: b.yaw,
            })
            .collect()
    }

    /// Casts one sweep. Points are in the sensor frame and carry their ring.
    pub fn raycast_sweep(&self, sweep: u64) -> Result<SynthSweep> {
        self.validate()?;
        let pose = self.platform_pose(sweep);
        let origin = pose.position();
        let statics = self.static_boxes_world();
        let dynamics = self.dynamic_boxes_at(sweep);
        let s = &self.sensor;
        let bin = 2.0 * PI / s.azimuth_bins as f64;
        // phase offset in (-0.4, 0.4) bins keeps every ray inside its own column
        let phase = ((sweep as f64 * s.azimuth_phase_step).fract() - 0.5) * 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ sweep.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let noise = (s.range_noise_sigma > 0.0).then(|| Normal::new(0.0, s.range_noise_sigma).unwrap());

        let mut points = Vec::new();
        let mut gt = Vec::new();
        let mut labels = Vec::new();
        for ring in 0..s.rings {
            let elev = self.beam_elevation(ring);
            let (se, ce) = elev.sin_cos();
            for k in 0..s.azimuth_bins {
                let az = -PI + (k as f64 + 0.5 + phase) * bin;
                let (sa, ca) = az.sin_cos();
                let dir_sensor = Vector3::new(ce * ca, ce * sa, se);
                let dir = pose.rotation() * dir_sensor;

                let mut best: Option<(f64, Surface)> = None;
                let mut consider = |t: Option<f64>, surf: Surface| {
                    if let Some(t) = t {
                        if best.map_or(true, |(bt, _)| t < bt) {
                            best = Some((t, surf));
                        }
                    }
                };
                if let Some(g) = self.ground_height {
                    consider(intersect_ground(&origin, &dir, g), Surface::Ground);
                }
                for b in &statics {
                    consider(b.intersect(&origin, &dir), Surface::Static);
                }
                for (b, moving) in &dynamics {
                    consider(b.intersect(&origin, &dir), Surface::Dynamic { moving: *moving });
                }
                let Some((mut t, surf)) = best else { continue };
                if let Some(n) = &noise {
                    t += n.sample(&mut rng);
                }
                if t > s.max_range || t <= 0.0 {
                    continue;
                }
                let p = dir_sensor * t;
                points.push(RawPoint::new(p.x, p.y, p.z).with_ring(ring as u16));
                let (tag, label) = match surf {
                    Surface::Ground => (GtTag::Static, class_id::ROAD),
                    Surface::Static => (GtTag::Static, class_id::BUILDING),
                    Surface::Dynamic { moving: true } => (GtTag::Dynamic, class_id::MOVING_CAR),
                    Surface::Dynamic { moving: false } => (GtTag::Static, class_id::CAR),
                };
                gt.push(tag);
                labels.push(label);
            }
        }
        Ok(SynthSweep {
            sweep: Sweep::new(sweep, points, pose),
            gt,
            labels,
        })
    }

    /// Writes `n` sweeps as `velodyne/NNNNNN.bin`, `labels/NNNNNN.label` and
    /// a KITTI-format `poses.txt` of LiDAR-frame poses.
    pub fn write_dataset(&self, n: u64, out: &Path) -> Result<()> {
        self.validate()?;
        let velo = out.join("velodyne");
        let lab = out.join("labels");
        for d in [&velo, &lab] {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let mut poses = Vec::new();
        for i in 0..n {
            let s = self.raycast_sweep(i)?;
            write_kitti_bin(&velo.join(format!("{i:06}.bin")), &s.sweep.points)?;
            write_semantic_labels(&lab.join(format!("{i:06}.label")), &s.labels)?;
            poses.push(s.sweep.pose_world_lidar);
        }
        let text = format_kitti_poses(&["dynmap synthetic sequence: LiDAR-frame poses, KITTI 3x4 row-major"], &poses);
        let path = out.join("poses.txt");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}
