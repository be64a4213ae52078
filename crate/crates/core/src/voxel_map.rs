//! Hash voxel map in the style of CT-ICP: integer voxel keys mapping to
//! small bounded point lists, with a minimum spacing between stored points.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::types::{GroundLabel, PointClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub ix: i32,
    pub iy: i32,
    pub iz: i32,
}

impl VoxelKey {
    pub const fn new(ix: i32, iy: i32, iz: i32) -> Self {
        Self { ix, iy, iz }
    }

    /// Floor-division key. A coordinate on a boundary belongs to the voxel
    /// whose lower corner it is.
    #[inline]
    pub fn of(p: &Point3, voxel_size: f64) -> Self {
        Self {
            ix: (p.x / voxel_size).floor() as i32,
            iy: (p.y / voxel_size).floor() as i32,
            iz: (p.z / voxel_size).floor() as i32,
        }
    }

    pub fn center(&self, voxel_size: f64) -> Point3 {
        Point3::new(
            (f64::from(self.ix) + 0.5) * voxel_size,
            (f64::from(self.iy) + 0.5) * voxel_size,
            (f64::from(self.iz) + 0.5) * voxel_size,
        )
    }

    fn offset(&self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.ix + dx, self.iy + dy, self.iz + dz)
    }
}

impl Hash for VoxelKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // the usual three-prime spatial hash
        let h = (i64::from(self.ix).wrapping_mul(73_856_093))
            ^ (i64::from(self.iy).wrapping_mul(19_349_663))
            ^ (i64::from(self.iz).wrapping_mul(83_492_791));
        state.write_u64(h as u64);
    }
}

/// Hasher for [`VoxelKey`]s: spreads the spatial hash over all 64 bits.
/// Deterministic, so map layouts do not vary between runs.
#[derive(Debug, Default, Clone, Copy)]
pub struct KeyHasher(u64);

impl Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        let h = self.0.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        h ^ (h >> 29)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(8) ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 ^= v;
    }
}

pub type KeyMap<V> = HashMap<VoxelKey, V, BuildHasherDefault<KeyHasher>>;

pub fn key_of(p: &Point3, voxel_size: f64) -> VoxelKey {
    VoxelKey::of(p, voxel_size)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub position: Point3,
    pub label: GroundLabel,
    /// How the point entered the map; `Undetermined` only in the tracking-map.
    pub class: PointClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoxelMapConfig {
    pub voxel_size: f64,
    pub max_points_per_voxel: usize,
    pub min_point_spacing: f64,
    /// Also search the 26 surrounding voxels. Off by default.
    pub search_adjacent: bool,
}

impl Default for VoxelMapConfig {
    fn default() -> Self {
        Self {
            voxel_size: 1.0,
            max_points_per_voxel: 20,
            min_point_spacing: 0.1,
            search_adjacent: false,
        }
    }
}

impl VoxelMapConfig {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::Config(format!("{name}.voxel_size must be > 0")));
        }
        if self.max_points_per_voxel == 0 {
            return Err(Error::Config(format!("{name}.max_points_per_voxel must be >= 1")));
        }
        if !(self.min_point_spacing >= 0.0 && self.min_point_spacing.is_finite()) {
            return Err(Error::Config(format!("{name}.min_point_spacing must be >= 0")));
        }
        Ok(())
    }
}

/// Ground / non-ground tally of a neighbor set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NeighborCounts {
    pub total: usize,
    pub nonground: usize,
}

impl NeighborCounts {
    pub fn ground(&self) -> usize {
        self.total - self.nonground
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a MapPoint>) -> Self {
        points.into_iter().fold(Self::default(), |mut c, p| {
            c.total += 1;
            if p.label == GroundLabel::NonGround {
                c.nonground += 1;
            }
            c
        })
    }
}

#[derive(Debug, Clone)]
pub struct VoxelMap {
    cfg: VoxelMapConfig,
    cells: KeyMap<Vec<MapPoint>>,
    len: usize,
}

impl VoxelMap {
    pub fn new(cfg: VoxelMapConfig) -> Self {
        Self {
            cfg,
            cells: KeyMap::default(),
            len: 0,
        }
    }

    pub fn config(&self) -> &VoxelMapConfig {
        &self.cfg
    }

    pub fn voxel_size(&self) -> f64 {
        self.cfg.voxel_size
    }

    /// Total stored points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn key_of(&self, p: &Point3) -> VoxelKey {
        VoxelKey::of(p, self.cfg.voxel_size)
    }

    pub fn insert(&mut self, p: Point3, label: GroundLabel) -> bool {
        self.insert_point(MapPoint {
            position: p,
            label,
            class: PointClass::Static,
        })
    }

    /// Stores `p` unless its voxel is full or already holds a point closer
    /// than `min_point_spacing`.
    pub fn insert_point(&mut self, p: MapPoint) -> bool {
        debug_assert!(p.position.iter().all(|v| v.is_finite()));
        let key = self.key_of(&p.position);
        let spacing2 = self.cfg.min_point_spacing * self.cfg.min_point_spacing;
        let cell = self.cells.entry(key).or_default();
        if cell.len() >= self.cfg.max_points_per_voxel {
            return false;
        }
        if cell
            .iter()
            .any(|q| (q.position - p.position).norm_squared() < spacing2)
        {
            return false;
        }
        cell.push(p);
        self.len += 1;
        true
    }

    /// Stored points of the voxel containing `p`; adjacent voxels are not
    /// consulted.
    pub fn neighbors_in_voxel(&self, p: &Point3) -> &[MapPoint] {
        self.cells
            .get(&self.key_of(p))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Label tally of the neighbor set used for detection. Honors
    /// `search_adjacent`.
    pub fn neighbor_counts(&self, p: &Point3) -> NeighborCounts {
        if !self.cfg.search_adjacent {
            return NeighborCounts::from_points(self.neighbors_in_voxel(p));
        }
        let key = self.key_of(p);
        let mut counts = NeighborCounts::default();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(cell) = self.cells.get(&key.offset(dx, dy, dz)) {
                        let c = NeighborCounts::from_points(cell);
                        counts.total += c.total;
                        counts.nonground += c.nonground;
                    }
                }
            }
        }
        counts
    }

    /// Removes a point with exactly these coordinates, if stored. Cells left
    /// empty are dropped.
    pub fn remove_exact(&mut self, p: &Point3) -> bool {
        let key = self.key_of(p);
        let Some(cell) = self.cells.get_mut(&key) else {
            return false;
        };
        let Some(pos) = cell.iter().position(|q| q.position == *p) else {
            return false;
        };
        cell.remove(pos);
        self.len -= 1;
        if cell.is_empty() {
            self.cells.remove(&key);
        }
        true
    }

    pub fn clear_cell(&mut self, key: &VoxelKey) -> usize {
        let n = self.cells.remove(key).map_or(0, |c| c.len());
        self.len -= n;
        n
    }

    pub fn contains_exact(&self, p: &Point3) -> bool {
        self.neighbors_in_voxel(p).iter().any(|q| q.position == *p)
    }

    /// All points, ordered by voxel key and then insertion order.
    pub fn points_sorted(&self) -> Vec<MapPoint> {
        let mut keys: Vec<&VoxelKey> = self.cells.keys().collect();
        keys.sort_unstable();
        let mut out = Vec::with_capacity(self.len);
        for k in keys {
            out.extend_from_slice(&self.cells[k]);
        }
        out
    }

    /// Unordered iteration over every cell.
    pub fn cells(&self) -> impl Iterator<Item = (&VoxelKey, &[MapPoint])> {
        self.cells.iter().map(|(k, v)| (k, v.as_slice()))
    }
}
