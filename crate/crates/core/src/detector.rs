//! Label-consistency dynamic point detection.
//!
//! A non-ground point is judged by the map points that share its voxel in
//! the tracking-map:
//!
//! * too few neighbors means the location was free space before, so the
//!   point is dynamic when it is near the platform (a *fore-point*) and
//!   deferred as *undetermined* when it is far (a *back-point*), since far
//!   structure may simply not be reconstructed yet;
//! * with enough neighbors, the ground / non-ground make-up of the neighbor
//!   set decides (see [`RatioRule`]).
//!
//! Undetermined points wait in an [`UndeterminedContainer`] until the
//! platform comes within range of them, or until they have stayed far away
//! for a fixed number of consecutive sweeps, in which case they are kept as
//! static.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::types::PointClass;
use crate::voxel_map::{MapPoint, NeighborCounts, VoxelMap};

/// How the neighbor label ratio turns into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioRule {
    /// Static iff the non-ground share of the neighbors is below
    /// `nonground_ratio_threshold`; dynamic otherwise.
    Literal,
    /// Dynamic iff the ground share of the neighbors exceeds
    /// `ground_ratio_cutoff`, i.e. a non-ground point sitting among ground.
    /// A neighborhood made of non-ground structure is treated as existing
    /// static geometry.
    #[default]
    Reconciled,
}

impl FromStr for RatioRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(RatioRule::Literal),
            "reconciled" => Ok(RatioRule::Reconciled),
            other => Err(format!("unknown ratio rule `{other}` (expected literal|reconciled)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Fore/back separation distance in meters; the boundary is a fore-point.
    pub fore_back_threshold: f64,
    /// Fewer neighbors than this means "no neighbor found".
    pub min_neighbors: usize,
    /// Used by [`RatioRule::Literal`].
    pub nonground_ratio_threshold: f64,
    /// Used by [`RatioRule::Reconciled`].
    pub ground_ratio_cutoff: f64,
    pub undetermined_max_far_sweeps: u32,
    pub ratio_rule: RatioRule,
    /// Remove an undetermined point from the tracking-map when it later
    /// resolves dynamic.
    pub rollback_tracking: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            fore_back_threshold: 30.0,
            min_neighbors: 5,
            nonground_ratio_threshold: 0.30,
            ground_ratio_cutoff: 0.70,
            undetermined_max_far_sweeps: 10,
            ratio_rule: RatioRule::Reconciled,
            rollback_tracking: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fore_back_threshold > 0.0 && self.fore_back_threshold.is_finite()) {
            return Err(Error::Config("detector.fore_back_threshold must be > 0".into()));
        }
        if self.min_neighbors < 1 {
            return Err(Error::Config("detector.min_neighbors must be >= 1".into()));
        }
        for (name, v) in [
            ("nonground_ratio_threshold", self.nonground_ratio_threshold),
            ("ground_ratio_cutoff", self.ground_ratio_cutoff),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("detector.{name} must be in (0, 1), got {v}")));
            }
        }
        if self.undetermined_max_far_sweeps < 1 {
            return Err(Error::Config("detector.undetermined_max_far_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Final or provisional classification of one point, carrying its reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Ground-labeled points skip detection.
    Ground,
    /// Inserted while the tracking-map was still being seeded.
    Bootstrap,
    RatioLow,
    TimeoutStatic,
    NoNeighbors,
    RatioHigh,
    BackNoNeighbors,
}

impl Verdict {
    pub const ALL: [Verdict; 7] = [
        Verdict::Ground,
        Verdict::Bootstrap,
        Verdict::RatioLow,
        Verdict::TimeoutStatic,
        Verdict::NoNeighbors,
        Verdict::RatioHigh,
        Verdict::BackNoNeighbors,
    ];

    pub fn class(self) -> PointClass {
        match self {
            Verdict::Ground | Verdict::Bootstrap | Verdict::RatioLow | Verdict::TimeoutStatic => {
                PointClass::Static
            }
            Verdict::NoNeighbors | Verdict::RatioHigh => PointClass::Dynamic,
            Verdict::BackNoNeighbors => PointClass::Undetermined,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ground => "ground",
            Verdict::Bootstrap => "bootstrap",
            Verdict::RatioLow => "ratio_low",
            Verdict::TimeoutStatic => "timeout_static",
            Verdict::NoNeighbors => "no_neighbors",
            Verdict::RatioHigh => "ratio_high",
            Verdict::BackNoNeighbors => "back_no_neighbors",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verdict::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown verdict `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Fore,
    Back,
}

pub fn separate(p_world: &Point3, platform: &Point3, cfg: &DetectorConfig) -> Region {
    if (p_world - platform).norm() <= cfg.fore_back_threshold {
        Region::Fore
    } else {
        Region::Back
    }
}

/// The ratio rule alone, for a neighbor set already known to be large enough.
pub fn ratio_verdict(counts: NeighborCounts, cfg: &DetectorConfig) -> Verdict {
    debug_assert!(counts.total > 0);
    let n = counts.total as f64;
    let dynamic = match cfg.ratio_rule {
        RatioRule::Literal => counts.nonground as f64 / n >= cfg.nonground_ratio_threshold,
        RatioRule::Reconciled => counts.ground() as f64 / n > cfg.ground_ratio_cutoff,
    };
    if dynamic {
        Verdict::RatioHigh
    } else {
        Verdict::RatioLow
    }
}

pub fn classify_fore_counts(counts: NeighborCounts, cfg: &DetectorConfig) -> Verdict {
    if counts.total < cfg.min_neighbors {
        Verdict::NoNeighbors
    } else {
        ratio_verdict(counts, cfg)
    }
}

pub fn classify_back_counts(counts: NeighborCounts, cfg: &DetectorConfig) -> Verdict {
    if counts.total < cfg.min_neighbors {
        Verdict::BackNoNeighbors
    } else {
        ratio_verdict(counts, cfg)
    }
}

pub fn classify_fore(neighbors: &[MapPoint], cfg: &DetectorConfig) -> Verdict {
    classify_fore_counts(NeighborCounts::from_points(neighbors), cfg)
}

pub fn classify_back(neighbors: &[MapPoint], cfg: &DetectorConfig) -> Verdict {
    classify_back_counts(NeighborCounts::from_points(neighbors), cfg)
}

/// Classifies one non-ground world point against the tracking-map.
pub fn classify(p_world: &Point3, platform: &Point3, tracking: &VoxelMap, cfg: &DetectorConfig) -> Verdict {
    let counts = tracking.neighbor_counts(p_world);
    match separate(p_world, platform, cfg) {
        Region::Fore => classify_fore_counts(counts, cfg),
        Region::Back => classify_back_counts(counts, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UndeterminedEntry {
    pub position_world: Point3,
    pub far_sweep_count: u32,
    pub birth_sweep: u64,
    /// Index of the point within its birth sweep.
    pub source_index: u32,
    /// Whether the point was actually stored in the tracking-map at birth.
    pub in_tracking_map: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub entry: UndeterminedEntry,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default)]
pub struct UndeterminedContainer {
    entries: Vec<UndeterminedEntry>,
}

impl UndeterminedContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: UndeterminedEntry) {
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[UndeterminedEntry] {
        &self.entries
    }

    /// Runs the undetermined-point mode once for `sweep`. Entries born in
    /// `sweep` itself are left alone; their far-sweep count starts with the
    /// next sweep.
    ///
    /// An entry within range is resolved against its voxel in the
    /// tracking-map (its own stored copy excluded); an entry out of range
    /// accumulates one far sweep and times out static at the cap.
    pub fn resolve(
        &mut self,
        sweep: u64,
        platform: &Point3,
        tracking: &VoxelMap,
        cfg: &DetectorConfig,
    ) -> Vec<Resolution> {
        let mut resolved = Vec::new();
        self.entries.retain_mut(|e| {
            if e.birth_sweep >= sweep {
                return true;
            }
            let verdict = match separate(&e.position_world, platform, cfg) {
                Region::Fore => {
                    let mut counts = tracking.neighbor_counts(&e.position_world);
                    if e.in_tracking_map && tracking.contains_exact(&e.position_world) {
                        counts.total -= 1;
                        counts.nonground -= 1;
                    }
                    classify_fore_counts(counts, cfg)
                }
                Region::Back => {
                    e.far_sweep_count += 1;
                    if e.far_sweep_count >= cfg.undetermined_max_far_sweeps {
                        Verdict::TimeoutStatic
                    } else {
                        return true;
                    }
                }
            };
            resolved.push(Resolution { entry: *e, verdict });
            false
        });
        resolved
    }

    /// Drains everything still pending.
    pub fn take_all(&mut self) -> Vec<UndeterminedEntry> {
        std::mem::take(&mut self.entries)
    }
}
