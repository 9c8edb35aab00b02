//! Interval geometry on normalized video time.
//!
//! Every label, proposal and prediction is an [`Interval`] inside `[0, 1]`.
//! Durations in seconds never appear; clip indices only show up when an
//! interval is rasterized into a [`ClipMask`].

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normalized temporal segment with `0 <= start < end <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    start: f64,
    end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if start.is_finite() && end.is_finite() && 0.0 <= start && start < end && end <= 1.0 {
            Ok(Self { start, end })
        } else {
            Err(Error::InvalidInterval { start, end })
        }
    }

    /// The whole video.
    pub fn full() -> Self {
        Self {
            start: 0.0,
            end: 1.0,
        }
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.end
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn intersection(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    pub fn iou(&self, other: &Interval) -> f64 {
        iou(self, other)
    }

    pub fn to_center_width(&self) -> CenterWidth {
        se_to_cw(self)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.start, i.end]
    }
}

/// Center/width parameterization of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct CenterWidth {
    center: f64,
    width: f64,
}

impl CenterWidth {
    /// Width must be positive and finite. The span may poke outside `[0, 1]`;
    /// [`cw_to_se`] clamps.
    pub fn new(center: f64, width: f64) -> Result<Self> {
        if center.is_finite() && width.is_finite() && width > 0.0 {
            Ok(Self { center, width })
        } else {
            Err(Error::InvalidWidth { center, width })
        }
    }

    #[inline]
    pub fn center(&self) -> f64 {
        self.center
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.width
    }
}

impl TryFrom<[f64; 2]> for CenterWidth {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        CenterWidth::new(v[0], v[1])
    }
}

impl From<CenterWidth> for [f64; 2] {
    fn from(c: CenterWidth) -> Self {
        [c.center, c.width]
    }
}

/// Clip membership of an interval over `T_v` clips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipMask {
    bits: Vec<bool>,
}

impl ClipMask {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Indices of set clips, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
    }
}

impl std::fmt::Display for ClipMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Temporal intersection over union.
pub fn iou(a: &Interval, b: &Interval) -> f64 {
    let inter = a.intersection(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.width() + b.width() - inter;
    inter / union
}

/// Total order used wherever scored intervals are ranked: score descending,
/// then earlier start, then shorter width.
pub fn rank_order(a: &(Interval, f64), b: &(Interval, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.0.start.total_cmp(&b.0.start))
        .then(a.0.width().total_cmp(&b.0.width()))
}

/// Greedy NMS returning indices into `items`, in keep order.
pub fn nms_indices(items: &[(Interval, f64)], iou_thresh: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| rank_order(&items[i], &items[j]).then(i.cmp(&j)));

    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let cand = &items[i].0;
        if kept.iter().all(|&k| iou(&items[k].0, cand) <= iou_thresh) {
            kept.push(i);
        }
    }
    kept
}

/// Greedy non-maximum suppression over scored intervals.
///
/// Kept pairs have IoU at most `iou_thresh`; output is sorted by score
/// descending with ties broken by earlier start, then shorter interval.
pub fn nms(items: &[(Interval, f64)], iou_thresh: f64) -> Vec<(Interval, f64)> {
    nms_indices(items, iou_thresh)
        .into_iter()
        .map(|i| items[i])
        .collect()
}

pub fn se_to_cw(a: &Interval) -> CenterWidth {
    CenterWidth {
        center: a.midpoint(),
        width: a.width(),
    }
}

/// Converts back to start/end, clamping to `[0, 1]`.
pub fn cw_to_se(c: &CenterWidth) -> Result<Interval> {
    if !(c.width > 0.0) {
        return Err(Error::InvalidWidth {
            center: c.center,
            width: c.width,
        });
    }
    let half = 0.5 * c.width;
    let start = (c.center - half).clamp(0.0, 1.0);
    let end = (c.center + half).clamp(0.0, 1.0);
    Interval::new(start, end)
}

/// Rasterizes `a` over `t_v` clips by clip-center containment.
///
/// Intervals too narrow to cover any clip center fall back to the single
/// clip holding their midpoint, so the mask is never empty.
pub fn interval_mask(a: &Interval, t_v: usize) -> Result<ClipMask> {
    if t_v == 0 {
        return Err(Error::InvalidArgument("clip count must be >= 1".into()));
    }
    let tf = t_v as f64;
    let mut bits: Vec<bool> = (0..t_v)
        .map(|j| {
            let c = (j as f64 + 0.5) / tf;
            a.start <= c && c <= a.end
        })
        .collect();
    if !bits.iter().any(|&b| b) {
        let j = ((a.midpoint() * tf).floor() as usize).min(t_v - 1);
        bits[j] = true;
    }
    Ok(ClipMask { bits })
}
