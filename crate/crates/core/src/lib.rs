//! Online dynamic point removal for spinning-LiDAR mapping.
//!
//! Sweeps with known poses are ground-labeled, downsampled and moved into
//! the world frame. Non-ground points are then checked for label
//! consistency against a hash voxel *tracking-map*: a point that lands in
//! free space, or among ground only, belongs to a moving object. Two maps
//! are maintained. The tracking-map tolerates a few unresolved far-away
//! points; the *output-map* receives only points judged static.

pub mod dataio;
pub mod detector;
pub mod downsample;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod ground_seg;
pub mod pipeline;
pub mod synth;
pub mod types;
pub mod voxel_map;

pub use detector::{DetectorConfig, RatioRule, Verdict};
pub use error::{Error, PoseError, Result};
pub use eval::{GtTag, PrRrResult, TimingSummary};
pub use geometry::{Point3, Pose};
pub use pipeline::{Pipeline, PipelineConfig, SweepOutcome, SweepReport};
pub use synth::SceneSpec;
pub use types::{GroundLabel, LabeledPoint, PointClass, RawPoint, Sweep};
pub use voxel_map::{VoxelKey, VoxelMap, VoxelMapConfig};
