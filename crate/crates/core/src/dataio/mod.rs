//! Dataset readers and map / verdict writers.

pub mod kitti;
pub mod ply;
pub mod poses;
pub mod verdicts;

pub use kitti::{
    list_files, read_kitti_bin, read_semantic_labels, write_kitti_bin, write_semantic_labels, DynamicClasses,
};
pub use ply::{read_ply, write_ply, ColorBy};
pub use poses::{format_kitti_poses, read_poses, PoseFormat, StampedPose};
pub use verdicts::{read_verdicts, VerdictTable, VerdictWriter};
