//! Preservation / rejection rates and timing summaries.
//!
//! Rates are point-level: every processed (post-downsample) point with a
//! final verdict counts once. Ground points carry a static verdict.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detector::Verdict;
use crate::error::{Error, Result};
use crate::pipeline::SweepReport;
use crate::types::PointClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtTag {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrRrResult {
    pub preserved_static: u64,
    pub total_static: u64,
    pub rejected_dynamic: u64,
    pub total_dynamic: u64,
    /// Percent; absent when there are no static points.
    pub pr: Option<f64>,
    /// Percent; absent when there are no dynamic points.
    pub rr: Option<f64>,
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Class used for scoring once a sequence has ended: a point still
/// undetermined at the end would have timed out static.
pub fn settle(verdict: Verdict) -> PointClass {
    match verdict.class() {
        PointClass::Undetermined => PointClass::Static,
        c => c,
    }
}

/// Scores `(final class, ground truth)` pairs. Every point must be settled
/// to static or dynamic.
pub fn score<I>(points: I) -> Result<PrRrResult>
where
    I: IntoIterator<Item = (Option<PointClass>, GtTag)>,
{
    let mut r = PrRrResult {
        preserved_static: 0,
        total_static: 0,
        rejected_dynamic: 0,
        total_dynamic: 0,
        pr: None,
        rr: None,
    };
    for (i, (class, gt)) in points.into_iter().enumerate() {
        let kept = match class {
            Some(PointClass::Static) => true,
            Some(PointClass::Dynamic) => false,
            Some(PointClass::Undetermined) | None => {
                return Err(Error::Input(format!("point #{i} has no resolved verdict")));
            }
        };
        match gt {
            GtTag::Static => {
                r.total_static += 1;
                r.preserved_static += u64::from(kept);
            }
            GtTag::Dynamic => {
                r.total_dynamic += 1;
                r.rejected_dynamic += u64::from(!kept);
            }
        }
    }
    r.pr = percent(r.preserved_static, r.total_static);
    r.rr = percent(r.rejected_dynamic, r.total_dynamic);
    Ok(r)
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl fmt::Display for PrRrResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>12} {:>12} {:>8}", "metric", "kept/removed", "total", "%")?;
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>8}",
            "PR",
            self.preserved_static,
            self.total_static,
            fmt_pct(self.pr)
        )?;
        write!(
            f,
            "{:<10} {:>12} {:>12} {:>8}",
            "RR",
            self.rejected_dynamic,
            self.total_dynamic,
            fmt_pct(self.rr)
        )
    }
}

/// Mean per-sweep stage times in milliseconds, laid out like a per-module
/// runtime breakdown of a LIO system. State estimation is not part of this
/// crate and is always absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub sweeps: usize,
    pub cloud_processing: f64,
    pub state_estimation: Option<f64>,
    pub ground_fitting: f64,
    /// Classification, map update and undetermined-container upkeep.
    pub label_consistency_detection: f64,
    /// `ground_fitting + label_consistency_detection`.
    pub removal_total: f64,
    /// Mean wall time of the whole sweep.
    pub sum: f64,
}

pub fn timing_summary<'a, I>(reports: I) -> Result<TimingSummary>
where
    I: IntoIterator<Item = &'a SweepReport>,
{
    let mut n = 0usize;
    let (mut cloud, mut ground, mut detect, mut total) = (0.0, 0.0, 0.0, 0.0);
    for r in reports {
        let t = &r.timings_ms;
        n += 1;
        cloud += t.cloud_processing;
        ground += t.ground_fitting;
        detect += t.detection + t.map_update;
        total += t.total;
    }
    if n == 0 {
        return Err(Error::Input("timing summary needs at least one sweep report".into()));
    }
    let k = n as f64;
    Ok(TimingSummary {
        sweeps: n,
        cloud_processing: cloud / k,
        state_estimation: None,
        ground_fitting: ground / k,
        label_consistency_detection: detect / k,
        removal_total: (ground + detect) / k,
        sum: total / k,
    })
}

impl TimingSummary {
    pub const COLUMNS: [&'static str; 6] = [
        "Cloud Processing",
        "State Estimation",
        "Ground Fitting",
        "Label Consistency Detection",
        "Total",
        "Sum",
    ];
}

impl fmt::Display for TimingSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values = [
            format!("{:.2}", self.cloud_processing),
            self.state_estimation
                .map_or_else(|| "external".to_string(), |v| format!("{v:.2}")),
            format!("{:.2}", self.ground_fitting),
            format!("{:.2}", self.label_consistency_detection),
            format!("{:.2}", self.removal_total),
            format!("{:.2}", self.sum),
        ];
        let widths: Vec<usize> = Self::COLUMNS
            .iter()
            .zip(&values)
            .map(|(c, v)| c.len().max(v.len()))
            .collect();
        let row = |cells: &mut dyn Iterator<Item = String>| {
            cells
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
        };
        writeln!(f, "mean ms over {} sweeps", self.sweeps)?;
        writeln!(f, "{}", row(&mut Self::COLUMNS.iter().map(|s| s.to_string())))?;
        write!(f, "{}", row(&mut values.into_iter()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{StageTimings, SweepCounts};

    fn pts(s_ok: usize, s_bad: usize, d_ok: usize, d_bad: usize) -> Vec<(Option<PointClass>, GtTag)> {
        let mut v = Vec::new();
        v.extend(std::iter::repeat((Some(PointClass::Static), GtTag::Static)).take(s_ok));
        v.extend(std::iter::repeat((Some(PointClass::Dynamic), GtTag::Static)).take(s_bad));
        v.extend(std::iter::repeat((Some(PointClass::Dynamic), GtTag::Dynamic)).take(d_ok));
        v.extend(std::iter::repeat((Some(PointClass::Static), GtTag::Dynamic)).take(d_bad));
        v
    }

    #[test]
    fn all_correct() {
        let r = score(pts(100, 0, 10, 0)).unwrap();
        assert_eq!((r.pr, r.rr), (Some(100.0), Some(100.0)));
    }

    #[test]
    fn ninety_ninety() {
        let r = score(pts(90, 10, 9, 1)).unwrap();
        assert_eq!((r.pr, r.rr), (Some(90.0), Some(90.0)));
        assert_eq!(r.total_static, 100);
        assert_eq!(r.rejected_dynamic, 9);
    }

    #[test]
    fn no_dynamic_points() {
        let r = score(pts(5, 5, 0, 0)).unwrap();
        assert_eq!(r.rr, None);
        assert_eq!(r.pr, Some(50.0));
        assert!(r.to_string().contains('-'));
    }

    #[test]
    fn unresolved_point_is_input_error() {
        let v = vec![(Some(PointClass::Undetermined), GtTag::Static)];
        assert!(matches!(score(v), Err(Error::Input(_))));
        assert!(matches!(score(vec![(None, GtTag::Dynamic)]), Err(Error::Input(_))));
    }

    #[test]
    fn settle_maps_pending_to_static() {
        assert_eq!(settle(Verdict::BackNoNeighbors), PointClass::Static);
        assert_eq!(settle(Verdict::NoNeighbors), PointClass::Dynamic);
    }

    fn report(detection: f64) -> SweepReport {
        SweepReport {
            sweep: 0,
            bootstrap: false,
            counts: SweepCounts::default(),
            timings_ms: StageTimings {
                ground_fitting: 1.0,
                cloud_processing: 2.0,
                detection,
                map_update: 0.0,
                total: 3.0 + detection,
            },
        }
    }

    #[test]
    fn timing_single_report() {
        let s = timing_summary(&[report(4.28)]).unwrap();
        assert_eq!(s.label_consistency_detection, 4.28);
        assert_eq!(s.removal_total, 5.28);
        let table = s.to_string();
        for col in TimingSummary::COLUMNS {
            assert!(table.contains(col));
        }
    }

    #[test]
    fn timing_empty_stream_errors() {
        assert!(timing_summary(std::iter::empty()).is_err());
    }
}
