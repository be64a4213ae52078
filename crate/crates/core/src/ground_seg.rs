//! Range-image ground labeling for spinning LiDARs.
//!
//! Each sweep is projected onto a `rows × cols` image indexed by (ring,
//! azimuth). Walking up every column, two vertically adjacent returns whose
//! connecting vector is within `angle_threshold` of horizontal are both
//! marked as ground. Only ring pairs whose lower ring is inside the
//! `ground_rows` band are examined.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GroundLabel, LabeledPoint, RawPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSegConfig {
    pub rows: usize,
    pub cols: usize,
    /// Lowest and highest beam elevation in degrees.
    pub vertical_fov: [f64; 2],
    /// Ring pairs `(r, r + 1)` with `r < ground_rows` are examined. `None`
    /// takes every pair lying entirely below the horizon: 7 on a VLP-16,
    /// 58 on an HDL-64E.
    pub ground_rows: Option<usize>,
    pub angle_threshold_deg: f64,
}

impl Default for GroundSegConfig {
    /// HDL-64E geometry, as on KITTI.
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 1800,
            vertical_fov: [-24.8, 2.0],
            ground_rows: None,
            angle_threshold_deg: 10.0,
        }
    }
}

impl GroundSegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 {
            return Err(Error::Config(format!("ground_seg.rows must be >= 2, got {}", self.rows)));
        }
        if self.cols < 8 {
            return Err(Error::Config(format!("ground_seg.cols must be >= 8, got {}", self.cols)));
        }
        if !(self.angle_threshold_deg > 0.0 && self.angle_threshold_deg < 45.0) {
            return Err(Error::Config(format!(
                "ground_seg.angle_threshold_deg must be in (0, 45), got {}",
                self.angle_threshold_deg
            )));
        }
        if let Some(g) = self.ground_rows {
            if g > self.rows {
                return Err(Error::Config(format!(
                    "ground_seg.ground_rows ({g}) exceeds rows ({})",
                    self.rows
                )));
            }
        }
        if !self.vertical_fov.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("ground_seg.vertical_fov must be finite".into()));
        }
        Ok(())
    }

    fn fov_is_degenerate(&self) -> bool {
        self.vertical_fov[0] >= self.vertical_fov[1]
    }

    /// Ground band height actually used.
    pub fn effective_ground_rows(&self) -> usize {
        if let Some(g) = self.ground_rows {
            return g.min(self.rows);
        }
        if self.fov_is_degenerate() {
            return self.rows / 2;
        }
        let [lo, hi] = self.vertical_fov;
        let step = (hi - lo) / (self.rows - 1) as f64;
        let below = (0..self.rows).filter(|&r| lo + r as f64 * step < 0.0).count();
        below.saturating_sub(1)
    }

    /// Ring index by quantizing the elevation angle over the vertical FOV.
    pub fn ring_of(&self, p: &RawPoint) -> u16 {
        let [lo, hi] = self.vertical_fov;
        let c = &p.position;
        let elev = c.z.atan2(c.x.hypot(c.y)).to_degrees();
        let r = ((elev - lo) / (hi - lo) * (self.rows - 1) as f64).round();
        r.clamp(0.0, (self.rows - 1) as f64) as u16
    }

    /// Assigns ring indices to validated raw points, in order.
    pub fn assign_rings(&self, points: &[(u32, RawPoint)]) -> Result<Vec<LabeledPoint>> {
        let needs_quantization = points.iter().any(|(_, p)| p.ring.is_none());
        if needs_quantization && self.fov_is_degenerate() {
            return Err(Error::Config(format!(
                "vertical_fov {:?} is degenerate and the sweep has no ring field",
                self.vertical_fov
            )));
        }
        Ok(points
            .iter()
            .map(|(idx, p)| {
                let ring = p.ring.unwrap_or_else(|| self.ring_of(p));
                LabeledPoint::new(p.position, ring, *idx)
            })
            .collect())
    }
}

const EMPTY: u32 = u32::MAX;

/// Point indices laid out by (ring, column).
#[derive(Debug, Clone)]
pub struct RangeImage {
    rows: usize,
    cols: usize,
    cells: Vec<u32>,
}

impl RangeImage {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![EMPTY; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Index of the point holding the cell.
    pub fn cell(&self, row: usize, col: usize) -> Option<usize> {
        match self.cells[row * self.cols + col] {
            EMPTY => None,
            i => Some(i as usize),
        }
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|&&c| c != EMPTY).count()
    }

    /// Clears the image and projects `points` onto it. On collision the
    /// nearer return keeps the cell. Points whose ring lies outside the image
    /// are left out.
    pub fn fill(&mut self, points: &[LabeledPoint]) {
        self.cells.fill(EMPTY);
        for (i, p) in points.iter().enumerate() {
            let row = p.ring as usize;
            if row >= self.rows {
                continue;
            }
            let col = column_of(p.position_sensor.x, p.position_sensor.y, self.cols);
            let slot = &mut self.cells[row * self.cols + col];
            if *slot == EMPTY || p.range < points[*slot as usize].range {
                *slot = i as u32;
            }
        }
    }
}

/// Column for a sensor-frame direction; azimuth 0 (the +x axis) maps to `cols / 2`.
pub fn column_of(x: f64, y: f64, cols: usize) -> usize {
    let b = ((y.atan2(x) + PI) / (2.0 * PI) * cols as f64).floor();
    b.clamp(0.0, (cols - 1) as f64) as usize
}

pub fn project(points: &[LabeledPoint], rows: usize, cols: usize) -> RangeImage {
    let mut img = RangeImage::new(rows, cols);
    img.fill(points);
    img
}

/// Calls `mark` for both points of every ring pair that passes the slope
/// test. A pair may be reported more than once per point.
fn ground_pairs(
    img: &RangeImage,
    points: &[LabeledPoint],
    ground_rows: usize,
    angle_threshold_deg: f64,
    mut mark: impl FnMut(usize),
) {
    // |atan2(dz, h)| <= t  <=>  |dz| <= tan(t) h, for t below 90°
    let slope = angle_threshold_deg.to_radians().tan();
    let band = ground_rows.min(img.rows.saturating_sub(1));
    let cols = img.cols;
    for row in 0..band {
        let lower = &img.cells[row * cols..(row + 1) * cols];
        let upper = &img.cells[(row + 1) * cols..(row + 2) * cols];
        for (&l, &u) in lower.iter().zip(upper) {
            if l == EMPTY || u == EMPTY {
                continue;
            }
            let d = points[u as usize].position_sensor - points[l as usize].position_sensor;
            if d.z.abs() <= slope * (d.x * d.x + d.y * d.y).sqrt() {
                mark(l as usize);
                mark(u as usize);
            }
        }
    }
}

/// Labels every point; points never paired as ground are `NonGround`.
pub fn fit_ground(
    img: &RangeImage,
    points: &[LabeledPoint],
    ground_rows: usize,
    angle_threshold_deg: f64,
) -> Vec<GroundLabel> {
    let mut labels = vec![GroundLabel::NonGround; points.len()];
    ground_pairs(img, points, ground_rows, angle_threshold_deg, |i| {
        labels[i] = GroundLabel::Ground
    });
    labels
}

/// Ground labeling with a range image kept between sweeps.
#[derive(Debug, Clone)]
pub struct GroundFitter {
    cfg: GroundSegConfig,
    img: RangeImage,
    labels: Vec<GroundLabel>,
}

impl GroundFitter {
    pub fn new(cfg: GroundSegConfig) -> Self {
        let img = RangeImage::new(cfg.rows, cfg.cols);
        Self {
            cfg,
            img,
            labels: Vec::new(),
        }
    }

    /// Writes ground labels into `points`.
    pub fn label(&mut self, points: &mut [LabeledPoint]) {
        self.img.fill(points);
        let labels = &mut self.labels;
        labels.clear();
        labels.resize(points.len(), GroundLabel::NonGround);
        ground_pairs(
            &self.img,
            points,
            self.cfg.effective_ground_rows(),
            self.cfg.angle_threshold_deg,
            |i| labels[i] = GroundLabel::Ground,
        );
        for (p, &l) in points.iter_mut().zip(labels.iter()) {
            p.ground_label = l;
        }
    }
}

/// Projection plus fitting; writes the labels into `points`.
pub fn label_ground(points: &mut [LabeledPoint], cfg: &GroundSegConfig) {
    GroundFitter::new(cfg.clone()).label(points);
}
