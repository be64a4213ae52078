//! Sensor-frame voxel downsampling.

use crate::types::LabeledPoint;
use crate::voxel_map::{KeyMap, VoxelKey};

/// Keeps at most one point per cube of side `cell`, the one closest to the
/// cube center (ties go to the earlier point). Output is sorted by cell key,
/// so it does not depend on input order.
pub fn voxel_downsample(points: &[LabeledPoint], cell: f64) -> Vec<LabeledPoint> {
    assert!(cell > 0.0, "downsample cell must be positive");
    let mut best: KeyMap<(f64, usize)> = KeyMap::with_capacity_and_hasher(points.len() / 2, Default::default());
    for (i, p) in points.iter().enumerate() {
        let key = VoxelKey::of(&p.position_sensor, cell);
        let center = key.center(cell);
        let d2 = (p.position_sensor - center).norm_squared();
        best.entry(key)
            .and_modify(|slot| {
                if d2 < slot.0 {
                    *slot = (d2, i);
                }
            })
            .or_insert((d2, i));
    }
    let mut kept: Vec<(VoxelKey, usize)> = best.into_iter().map(|(k, (_, i))| (k, i)).collect();
    kept.sort_unstable_by_key(|&(k, _)| k);
    kept.into_iter().map(|(_, i)| points[i]).collect()
}
