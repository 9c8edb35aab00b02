//! Multi-scale sparse proposal lattice.
//!
//! Proposals live on an `n`-cell grid. A candidate `(a, b)` of length
//! `l = b - a + 1` cells is kept when both ends sit on the stride
//! `s(l) = 2^max(0, ceil(log2(l / base)))`, i.e. `a % s == 0` and
//! `(b + 1) % s == 0`. With `base = 16` this yields 136, 428 and 1104
//! proposals for `n = 16, 32, 64`.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{interval_mask, Interval};

pub const DEFAULT_BASE: usize = 16;

/// Tolerance for treating two IoU values as tied.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSet {
    proposals: Vec<Interval>,
    cells: Vec<(usize, usize)>,
    resolution: usize,
    base: usize,
}

impl ProposalSet {
    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn proposals(&self) -> &[Interval] {
        &self.proposals
    }

    /// Inclusive cell-index pairs `(a, b)`, aligned with [`Self::proposals`].
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// Shortest proposal as a fraction of the video.
    pub fn min_frac(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    /// Row `i` averages the clips inside proposal `i`, so `P · V` pools
    /// a `T_v × d` feature matrix into `C × d` proposal features.
    pub fn pooling_matrix(&self, t_v: usize) -> Result<Array2<f64>> {
        let mut p = Array2::zeros((self.len(), t_v));
        for (i, prop) in self.proposals.iter().enumerate() {
            let mask = interval_mask(prop, t_v)?;
            let w = 1.0 / mask.count() as f64;
            for j in mask.indices() {
                p[[i, j]] = w;
            }
        }
        Ok(p)
    }
}

/// Single-positive supervision over a proposal set: one positive, the rest
/// unobserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalLabels {
    len: usize,
    positive: usize,
}

impl ProposalLabels {
    pub fn new(len: usize, positive: usize) -> Result<Self> {
        if positive >= len {
            return Err(Error::InvalidArgument(format!(
                "positive index {positive} out of range for {len} proposals"
            )));
        }
        Ok(Self { len, positive })
    }

    pub fn positive(&self) -> usize {
        self.positive
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_positive(&self, i: usize) -> bool {
        i == self.positive
    }
}

fn stride(len: usize, base: usize) -> usize {
    let mut s = 1;
    while s * base < len {
        s *= 2;
    }
    s
}

pub fn build_lattice(n: usize, base: usize) -> Result<ProposalSet> {
    if n < 1 {
        return Err(Error::InvalidArgument("lattice resolution must be >= 1".into()));
    }
    if base < 1 {
        return Err(Error::InvalidArgument("lattice base must be >= 1".into()));
    }
    let nf = n as f64;
    let mut proposals = Vec::new();
    let mut cells = Vec::new();
    for a in 0..n {
        for b in a..n {
            let s = stride(b - a + 1, base);
            if a % s == 0 && (b + 1) % s == 0 {
                cells.push((a, b));
                proposals.push(Interval::new(a as f64 / nf, (b + 1) as f64 / nf)?);
            }
        }
    }
    Ok(ProposalSet {
        proposals,
        cells,
        resolution: n,
        base,
    })
}

/// Index of the max-IoU candidate; near-ties go to the earlier start, then
/// the shorter interval.
pub fn closest_index(candidates: &[Interval], z: &Interval) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let v = c.iou(z);
        best = match best {
            None => Some((i, v)),
            Some((bi, bv)) => {
                let b = &candidates[bi];
                let better = if v > bv + TIE_EPS {
                    true
                } else if v < bv - TIE_EPS {
                    false
                } else {
                    (c.start(), c.width()) < (b.start(), b.width())
                };
                if better {
                    Some((i, v))
                } else {
                    Some((bi, bv))
                }
            }
        };
    }
    best.map(|(i, _)| i)
}

pub fn assign_single_positive(set: &ProposalSet, z: &Interval) -> Result<ProposalLabels> {
    let idx = closest_index(&set.proposals, z)
        .ok_or_else(|| Error::InvalidArgument("empty proposal set".into()))?;
    ProposalLabels::new(set.len(), idx)
}

/// Mean of the clip features (rows of `clips`) inside `p`.
pub fn pool_features(clips: ArrayView2<'_, f64>, p: &Interval) -> Result<Array1<f64>> {
    let t_v = clips.nrows();
    let mask = interval_mask(p, t_v)?;
    let mut out = Array1::zeros(clips.ncols());
    for j in mask.indices() {
        out += &clips.row(j);
    }
    out /= mask.count() as f64;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::collections::HashSet;

    fn iv(s: f64, e: f64) -> Interval {
        Interval::new(s, e).unwrap()
    }

    /// Counts by direct enumeration of the membership rule using float logs.
    fn enumerate_count(n: usize, base: usize) -> usize {
        let mut c = 0;
        for a in 0..n {
            for b in a..n {
                let l = (b - a + 1) as f64;
                let e = (l / base as f64).log2().ceil().max(0.0) as u32;
                let s = 2usize.pow(e);
                if a % s == 0 && (b + 1) % s == 0 {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(build_lattice(16, 16).unwrap().len(), 136);
        assert_eq!(build_lattice(32, 16).unwrap().len(), 428);
        assert_eq!(build_lattice(64, 16).unwrap().len(), 1104);
        for n in [1, 2, 4, 8, 16, 32, 64, 128] {
            assert_eq!(build_lattice(n, 16).unwrap().len(), enumerate_count(n, 16));
        }
        assert_eq!(build_lattice(16, 16).unwrap().len(), 16 * 17 / 2);
        assert!(build_lattice(0, 16).is_err());
    }

    #[test]
    fn lattice_structure() {
        for n in [16, 32, 64] {
            let set = build_lattice(n, 16).unwrap();
            let uniq: HashSet<_> = set.cells().iter().collect();
            assert_eq!(uniq.len(), set.len());
            for (&(a, b), p) in set.cells().iter().zip(set.proposals()) {
                assert!(b >= a && b < n);
                assert!(p.width() >= set.min_frac() - 1e-15);
            }
        }
    }

    #[test]
    fn single_positive_assignment() {
        let set = build_lattice(16, 16).unwrap();
        let exact = set.proposals()[40];
        assert_eq!(assign_single_positive(&set, &exact).unwrap().positive(), 40);

        let labels = assign_single_positive(&set, &iv(0.0, 0.125)).unwrap();
        assert_eq!(set.cells()[labels.positive()], (0, 1));

        // Brute force: the two-cell proposal spanning the boundary beats both
        // single-cell neighbours, which tie with each other.
        let z = iv(0.49, 0.51);
        let labels = assign_single_positive(&set, &z).unwrap();
        assert_eq!(set.cells()[labels.positive()], (7, 8));
        let ious: Vec<f64> = set.proposals().iter().map(|p| p.iou(&z)).collect();
        let max = ious.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(ious[labels.positive()], max);
    }

    #[test]
    fn closest_tie_break() {
        let z = iv(0.2, 0.4);
        let cands = [iv(0.3, 0.5), iv(0.1, 0.3)];
        assert_eq!(closest_index(&cands, &z), Some(1));
        let cands = [iv(0.1, 0.3), iv(0.1, 0.3)];
        assert_eq!(closest_index(&cands, &z), Some(0));
        assert_eq!(closest_index(&[], &z), None);
    }

    #[test]
    fn pooling() {
        let same = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        assert_eq!(pool_features(same.view(), &iv(0.25, 0.75)).unwrap(), array![1.0, 2.0]);

        let clips = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(pool_features(clips.view(), &Interval::full()).unwrap(), array![0.5, 0.5]);

        let set = build_lattice(4, 16).unwrap();
        let p = set.pooling_matrix(8).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }
}
