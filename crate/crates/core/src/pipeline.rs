//! Per-sweep orchestration.
//!
//! Each sweep goes through: input validation, ground labeling, downsampling,
//! transformation into the world frame, classification of non-ground points
//! against the tracking-map, map updates, and finally one pass over the
//! undetermined container.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detector::{self, DetectorConfig, Resolution, UndeterminedContainer, UndeterminedEntry, Verdict};
use crate::downsample::voxel_downsample;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};
use crate::ground_seg::{GroundFitter, GroundSegConfig};
use crate::types::{GroundLabel, LabeledPoint, PointClass, RawPoint, Sweep};
use crate::voxel_map::{MapPoint, VoxelMap, VoxelMapConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseFrame {
    /// Poses already place the LiDAR in the world.
    #[default]
    Lidar,
    /// Poses place the body (IMU / camera) frame; the extrinsic is appended.
    Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Returns closer than this (meters) are dropped as ego-vehicle hits.
    pub min_range: f64,
    /// Sensor-frame downsampling cell in meters.
    pub downsample_cell: f64,
    /// Every point is accepted as static while the tracking-map holds fewer
    /// points than this.
    pub bootstrap_map_points: usize,
    /// When false, reported timings are zero so report streams are
    /// reproducible byte for byte.
    pub record_timings: bool,
    pub pose_frame: PoseFrame,
    /// LiDAR → body transform, used when `pose_frame = "body"`.
    pub extrinsic: Pose,
    pub ground_seg: GroundSegConfig,
    pub tracking_map: VoxelMapConfig,
    pub output_map: VoxelMapConfig,
    pub detector: DetectorConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_range: 0.5,
            downsample_cell: 0.5,
            bootstrap_map_points: 10_000,
            record_timings: true,
            pose_frame: PoseFrame::Lidar,
            extrinsic: Pose::identity(),
            ground_seg: GroundSegConfig::default(),
            tracking_map: VoxelMapConfig::default(),
            output_map: VoxelMapConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_range >= 0.0 && self.min_range.is_finite()) {
            return Err(Error::Config("min_range must be >= 0".into()));
        }
        if !(self.downsample_cell > 0.0 && self.downsample_cell.is_finite()) {
            return Err(Error::Config("downsample_cell must be > 0".into()));
        }
        self.ground_seg.validate()?;
        self.tracking_map.validate("tracking_map")?;
        self.output_map.validate("output_map")?;
        self.detector.validate()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// World pose of the LiDAR given the pose read from a pose file.
    pub fn lidar_pose(&self, file_pose: &Pose) -> Pose {
        match self.pose_frame {
            PoseFrame::Lidar => *file_pose,
            PoseFrame::Body => file_pose.compose(&self.extrinsic),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCounts {
    /// Returns in the sweep before validation.
    pub input: usize,
    /// Points left after validation and downsampling.
    pub processed: usize,
    pub ground: usize,
    #[serde(rename = "static")]
    pub static_: usize,
    pub dynamic: usize,
    pub undetermined_born: usize,
    pub undetermined_resolved: usize,
    pub resolved_static: usize,
    pub resolved_dynamic: usize,
    /// Container size after this sweep.
    pub undetermined_pending: usize,
}

/// Stage timings in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub ground_fitting: f64,
    pub cloud_processing: f64,
    pub detection: f64,
    pub map_update: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub sweep: u64,
    pub bootstrap: bool,
    pub counts: SweepCounts,
    pub timings_ms: StageTimings,
}

impl SweepReport {
    pub fn counts_balance(&self) -> bool {
        let c = &self.counts;
        c.ground + c.static_ + c.dynamic + c.undetermined_born == c.processed
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Verdict for one processed point of the current sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub source_index: u32,
    pub ground_label: GroundLabel,
    pub position_world: Point3,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: SweepReport,
    pub points: Vec<PointRecord>,
    /// Undetermined points from earlier sweeps settled during this one.
    pub resolutions: Vec<Resolution>,
}

struct Stopwatch {
    enabled: bool,
    last: Instant,
}

impl Stopwatch {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            last: Instant::now(),
        }
    }

    /// Milliseconds since the previous lap.
    fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let ms = now.duration_since(self.last).as_secs_f64() * 1e3;
        self.last = now;
        if self.enabled {
            ms
        } else {
            0.0
        }
    }
}

/// Validated points paired with their index in the original sweep.
pub fn validate_points(points: &[RawPoint], min_range: f64) -> Vec<(u32, RawPoint)> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_finite() && p.range() >= min_range)
        .map(|(i, p)| (i as u32, *p))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    tracking: VoxelMap,
    output: VoxelMap,
    container: UndeterminedContainer,
    ground: GroundFitter,
    last_sweep: Option<u64>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            tracking: VoxelMap::new(cfg.tracking_map.clone()),
            output: VoxelMap::new(cfg.output_map.clone()),
            container: UndeterminedContainer::new(),
            ground: GroundFitter::new(cfg.ground_seg.clone()),
            last_sweep: None,
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn tracking_map(&self) -> &VoxelMap {
        &self.tracking
    }

    pub fn output_map(&self) -> &VoxelMap {
        &self.output
    }

    pub fn undetermined(&self) -> &UndeterminedContainer {
        &self.container
    }

    fn check_order(&self, index: u64) -> Result<()> {
        match self.last_sweep {
            Some(last) if index <= last => Err(Error::Order { last, got: index }),
            _ => Ok(()),
        }
    }

    /// Runs one raw sensor sweep through the full pipeline.
    pub fn process_sweep(&mut self, sweep: &Sweep) -> Result<SweepOutcome> {
        self.check_order(sweep.index)?;
        let pose = Pose::new(*sweep.pose_world_lidar.rotation(), *sweep.pose_world_lidar.translation())
            .map_err(|source| Error::Pose {
                sweep: sweep.index,
                source,
            })?;

        let mut watch = Stopwatch::new(self.cfg.record_timings);
        let start = Instant::now();

        let valid = validate_points(&sweep.points, self.cfg.min_range);
        let mut points = self.cfg.ground_seg.assign_rings(&valid)?;
        let prep_ms = watch.lap();

        self.ground.label(&mut points);
        let ground_ms = watch.lap();

        let mut points = voxel_downsample(&points, self.cfg.downsample_cell);
        for p in &mut points {
            p.position_world = pose.transform_point(&p.position_sensor);
        }
        let cloud_ms = prep_ms + watch.lap();

        let mut outcome = self.update_world_points(sweep.index, &pose.position(), &mut points)?;
        outcome.report.counts.input = sweep.points.len();
        let t = &mut outcome.report.timings_ms;
        t.ground_fitting = ground_ms;
        t.cloud_processing = cloud_ms;
        t.total = if self.cfg.record_timings {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        Ok(outcome)
    }

    /// Detection and map maintenance for points already labeled and placed
    /// in the world frame. `platform` is the sensor position for this sweep.
    pub fn update_world_points(
        &mut self,
        sweep: u64,
        platform: &Point3,
        points: &mut [LabeledPoint],
    ) -> Result<SweepOutcome> {
        self.check_order(sweep)?;
        self.last_sweep = Some(sweep);
        let cfg = &self.cfg.detector;
        let bootstrap = self.tracking.len() < self.cfg.bootstrap_map_points;
        let mut watch = Stopwatch::new(self.cfg.record_timings);
        let mut counts = SweepCounts {
            input: points.len(),
            processed: points.len(),
            ..Default::default()
        };

        // classification reads the tracking-map only; no writes until all
        // points of the sweep have a verdict
        let verdicts: Vec<Verdict> = points
            .iter()
            .map(|p| {
                if p.is_ground() {
                    Verdict::Ground
                } else if bootstrap {
                    Verdict::Bootstrap
                } else {
                    detector::classify(&p.position_world, platform, &self.tracking, cfg)
                }
            })
            .collect();
        let mut detection_ms = watch.lap();

        let mut records = Vec::with_capacity(points.len());
        for (p, &verdict) in points.iter_mut().zip(&verdicts) {
            let class = verdict.class();
            p.class = Some(class);
            let map_point = MapPoint {
                position: p.position_world,
                label: p.ground_label,
                class,
            };
            match verdict {
                Verdict::Ground => counts.ground += 1,
                _ => match class {
                    PointClass::Static => counts.static_ += 1,
                    PointClass::Dynamic => counts.dynamic += 1,
                    PointClass::Undetermined => counts.undetermined_born += 1,
                },
            }
            match class {
                PointClass::Static => {
                    self.tracking.insert_point(map_point);
                    self.output.insert_point(map_point);
                }
                PointClass::Undetermined => {
                    let in_tracking_map = self.tracking.insert_point(map_point);
                    self.container.push(UndeterminedEntry {
                        position_world: p.position_world,
                        far_sweep_count: 0,
                        birth_sweep: sweep,
                        source_index: p.source_index,
                        in_tracking_map,
                    });
                }
                PointClass::Dynamic => {}
            }
            records.push(PointRecord {
                source_index: p.source_index,
                ground_label: p.ground_label,
                position_world: p.position_world,
                verdict,
            });
        }
        let mut map_ms = watch.lap();

        let resolutions = self.container.resolve(sweep, platform, &self.tracking, cfg);
        detection_ms += watch.lap();
        for r in &resolutions {
            counts.undetermined_resolved += 1;
            match r.verdict.class() {
                PointClass::Static => {
                    counts.resolved_static += 1;
                    self.output.insert_point(MapPoint {
                        position: r.entry.position_world,
                        label: GroundLabel::NonGround,
                        class: PointClass::Static,
                    });
                }
                _ => {
                    counts.resolved_dynamic += 1;
                    if cfg.rollback_tracking && r.entry.in_tracking_map {
                        self.tracking.remove_exact(&r.entry.position_world);
                    }
                }
            }
        }
        map_ms += watch.lap();
        counts.undetermined_pending = self.container.len();

        let report = SweepReport {
            sweep,
            bootstrap,
            counts,
            timings_ms: StageTimings {
                detection: detection_ms,
                map_update: map_ms,
                total: detection_ms + map_ms,
                ..Default::default()
            },
        };
        debug_assert!(report.counts_balance());
        Ok(SweepOutcome {
            report,
            points: records,
            resolutions,
        })
    }

    /// Ends the sequence. Entries still pending are returned; they count as
    /// static for scoring, but are not added to the output-map.
    pub fn finish(&mut self) -> Vec<UndeterminedEntry> {
        self.container.take_all()
    }
}
