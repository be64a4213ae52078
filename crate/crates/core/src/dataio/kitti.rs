//! KITTI velodyne scans and Semantic-KITTI labels.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::GtTag;
use crate::types::RawPoint;

const POINT_BYTES: usize = 16;

/// Reads a `.bin` scan: little-endian `f32` quadruples `x y z intensity`.
pub fn read_kitti_bin(path: &Path) -> Result<Vec<RawPoint>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let points = parse_kitti_bin(&bytes).map_err(|m| Error::format(path, m))?;
    if points.is_empty() {
        log::warn!("{}: empty scan", path.display());
    }
    Ok(points)
}

pub fn parse_kitti_bin(bytes: &[u8]) -> Result<Vec<RawPoint>, String> {
    if bytes.len() % POINT_BYTES != 0 {
        return Err(format!(
            "length {} is not a multiple of {POINT_BYTES} bytes",
            bytes.len()
        ));
    }
    Ok(bytes
        .chunks_exact(POINT_BYTES)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]);
            RawPoint {
                position: crate::geometry::Point3::new(f(0).into(), f(4).into(), f(8).into()),
                intensity: f(12),
                ring: None,
            }
        })
        .collect())
}

pub fn encode_kitti_bin(points: &[RawPoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * POINT_BYTES);
    for p in points {
        for v in [p.position.x as f32, p.position.y as f32, p.position.z as f32, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_kitti_bin(path: &Path, points: &[RawPoint]) -> Result<()> {
    fs::write(path, encode_kitti_bin(points)).map_err(|e| Error::io(path, e))
}

/// Reads a `.label` file of little-endian `u32`s. With `expected` set, the
/// count must match the paired scan.
pub fn read_semantic_labels(path: &Path, expected: Option<usize>) -> Result<Vec<u32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, format!("length {} is not a multiple of 4", bytes.len())));
    }
    let labels: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(n) = expected {
        if labels.len() != n {
            return Err(Error::format(
                path,
                format!("{} labels for a scan of {n} points", labels.len()),
            ));
        }
    }
    Ok(labels)
}

pub fn write_semantic_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Semantic class ids that count as ground-truth dynamic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicClasses {
    classes: BTreeSet<u16>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicClassesFile {
    dynamic: Vec<u16>,
}

pub const DEFAULT_DYNAMIC_CLASSES: &str = include_str!("../../data/semantic_kitti_dynamic.toml");

impl Default for DynamicClasses {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_DYNAMIC_CLASSES).expect("bundled class file parses")
    }
}

impl DynamicClasses {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let f: DynamicClassesFile = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        Ok(Self {
            classes: f.dynamic.into_iter().collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Tag for a raw label; only the lower 16 bits (the class) are used.
    pub fn tag(&self, label: u32) -> GtTag {
        if self.classes.contains(&((label & 0xffff) as u16)) {
            GtTag::Dynamic
        } else {
            GtTag::Static
        }
    }
}

/// Files in `dir` with the given extension, sorted by file name.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().and_then(|e| e.to_str()) == Some(ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
