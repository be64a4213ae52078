//! Binary little-endian PLY export of voxel maps.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::types::{GroundLabel, PointClass};
use crate::voxel_map::{MapPoint, VoxelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorBy {
    /// Ground orange, non-ground white.
    #[default]
    Label,
    /// Static gray, undetermined blue, dynamic green.
    Class,
}

impl FromStr for ColorBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "label" => Ok(ColorBy::Label),
            "class" => Ok(ColorBy::Class),
            other => Err(format!("unknown color mode `{other}` (expected label|class)")),
        }
    }
}

fn color(p: &MapPoint, by: ColorBy) -> [u8; 3] {
    match by {
        ColorBy::Label => match p.label {
            GroundLabel::Ground => [255, 140, 0],
            GroundLabel::NonGround => [255, 255, 255],
        },
        ColorBy::Class => match p.class {
            PointClass::Static => [160, 160, 160],
            PointClass::Undetermined => [40, 90, 255],
            PointClass::Dynamic => [0, 220, 60],
        },
    }
}

pub fn encode_ply(points: &[MapPoint], by: ColorBy) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\ncomment dynmap\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        points.len()
    );
    let mut out = Vec::with_capacity(header.len() + points.len() * 15);
    out.extend_from_slice(header.as_bytes());
    for p in points {
        for v in [p.position.x, p.position.y, p.position.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&color(p, by));
    }
    out
}

/// Writes every map point, ordered by voxel key then insertion order.
pub fn write_ply(map: &VoxelMap, path: &Path, by: ColorBy) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(&encode_ply(&map.points_sorted(), by))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads vertices and colors back from a file written by [`write_ply`].
pub fn read_ply(path: &Path) -> Result<Vec<(Point3, [u8; 3])>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ply(&bytes).map_err(|m| Error::format(path, m))
}

pub fn decode_ply(bytes: &[u8]) -> Result<Vec<(Point3, [u8; 3])>, String> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or("missing end_header")?
        + END.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| "header is not utf-8")?;
    if !header.starts_with("ply\nformat binary_little_endian 1.0\n") {
        return Err("not a binary little-endian PLY".into());
    }
    let count: usize = header
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .ok_or("missing vertex count")?
        .trim()
        .parse()
        .map_err(|_| "bad vertex count")?;
    let body = &bytes[end..];
    if body.len() != count * 15 {
        return Err(format!("expected {} body bytes, found {}", count * 15, body.len()));
    }
    Ok(body
        .chunks_exact(15)
        .map(|c| {
            let f = |i: usize| f64::from(f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]));
            (Point3::new(f(0), f(4), f(8)), [c[12], c[13], c[14]])
        })
        .collect())
}
