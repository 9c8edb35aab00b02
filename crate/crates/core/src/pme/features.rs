use ndarray::{concatenate, s, Axis};

use crate::error::{Error, Result};
use crate::kernel::Mat;
use crate::lattice::ProposalSet;

/// Linear pooling of per-clip features into per-proposal features.
///
/// Each proposal gets three `d`-blocks: the mean inside it, the mean over
/// one lattice unit to its left and the mean over one unit to its right.
/// Context blocks are zero at the video edges. Without the context blocks
/// a proposal and any sub-interval of it look the same to the match head.
#[derive(Debug, Clone)]
pub struct ProposalPooling {
    inside: Mat,
    left: Mat,
    right: Mat,
}

fn context_row(row: &mut ndarray::ArrayViewMut1<f64>, lo: f64, hi: f64, t_v: usize) {
    if hi <= lo {
        return;
    }
    let mut members: Vec<usize> = (0..t_v)
        .filter(|&j| {
            let c = (j as f64 + 0.5) / t_v as f64;
            c >= lo && c < hi
        })
        .collect();
    if members.is_empty() {
        let j = (((lo + hi) / 2.0) * t_v as f64).floor() as usize;
        members.push(j.min(t_v - 1));
    }
    let w = 1.0 / members.len() as f64;
    for j in members {
        row[j] = w;
    }
}

impl ProposalPooling {
    pub fn new(set: &ProposalSet, t_v: usize) -> Result<Self> {
        if t_v == 0 {
            return Err(Error::InvalidArgument("t_v must be positive".into()));
        }
        let inside = set.pooling_matrix(t_v)?;
        let unit = set.min_frac();
        let mut left = Mat::zeros((set.len(), t_v));
        let mut right = Mat::zeros((set.len(), t_v));
        for (i, p) in set.proposals().iter().enumerate() {
            context_row(&mut left.row_mut(i), (p.start() - unit).max(0.0), p.start(), t_v);
            context_row(&mut right.row_mut(i), p.end(), (p.end() + unit).min(1.0), t_v);
        }
        Ok(Self { inside, left, right })
    }

    pub fn len(&self) -> usize {
        self.inside.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.nrows() == 0
    }

    pub fn t_v(&self) -> usize {
        self.inside.ncols()
    }

    /// Row-stochastic inside-mean matrix (`C × T_v`).
    pub fn inside(&self) -> &Mat {
        &self.inside
    }

    /// `T_v × d` clip features to `C × 3d` proposal features.
    pub fn forward(&self, v: &Mat) -> Result<Mat> {
        if v.nrows() != self.t_v() {
            return Err(Error::ShapeMismatch {
                op: "proposal_pooling",
                expected: format!("{} clips", self.t_v()),
                got: format!("{}", v.nrows()),
            });
        }
        Ok(concatenate![
            Axis(1),
            self.inside.dot(v),
            self.left.dot(v),
            self.right.dot(v)
        ])
    }

    pub fn backward(&self, d_out: &Mat) -> Mat {
        let d = d_out.ncols() / 3;
        self.inside.t().dot(&d_out.slice(s![.., 0..d]))
            + self.left.t().dot(&d_out.slice(s![.., d..2 * d]))
            + self.right.t().dot(&d_out.slice(s![.., 2 * d..]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn context_is_zero_at_edges_and_stochastic_elsewhere() {
        let set = build_lattice(16, 16).unwrap();
        let pool = ProposalPooling::new(&set, 32).unwrap();
        for (i, p) in set.proposals().iter().enumerate() {
            let l: f64 = pool.left.row(i).sum();
            let r: f64 = pool.right.row(i).sum();
            assert!((pool.inside.row(i).sum() - 1.0).abs() < 1e-12);
            assert_eq!(l == 0.0, p.start() == 0.0);
            assert_eq!(r == 0.0, p.end() == 1.0);
            if l > 0.0 {
                assert!((l - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_is_transpose() {
        let set = build_lattice(4, 16).unwrap();
        let pool = ProposalPooling::new(&set, 8).unwrap();
        let v = Mat::from_shape_fn((8, 2), |(i, j)| (i * 2 + j) as f64 * 0.1 - 0.3);
        let w = Mat::from_shape_fn((set.len(), 6), |(i, j)| ((i + 3 * j) % 5) as f64 - 2.0);
        // <w, P v> == <P^T w, v>
        let lhs = (&pool.forward(&v).unwrap() * &w).sum();
        let rhs = (&pool.backward(&w) * &v).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
