use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sigmoid_backward, sigmoid_mat, tanh_backward, tanh_mat, Affine, Mat, ParamStore};
use crate::lattice::ProposalLabels;

/// Clamp applied inside every log.
pub const LOG_EPS: f64 = 1e-12;

/// Per-proposal matching probabilities, each in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScores(pub Vec<f64>);

impl MatchScores {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Two-layer scoring head: affine, tanh, affine, sigmoid.
#[derive(Debug, Clone, Copy)]
pub struct MatchHead {
    pub hidden: Affine,
    pub out: Affine,
}

#[derive(Debug, Clone)]
pub struct MatchCache {
    x: Mat,
    h: Mat,
    s: Mat,
}

impl MatchHead {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_hidden: usize) -> Result<Self> {
        Ok(Self {
            hidden: Affine::new(store, &format!("{name}.hidden"), d_in, d_hidden)?,
            out: Affine::new(store, &format!("{name}.out"), d_hidden, 1)?,
        })
    }

    pub fn forward(&self, store: &ParamStore, features: &Mat) -> Result<(MatchScores, MatchCache)> {
        let h = tanh_mat(&self.hidden.forward(store, features)?);
        let s = sigmoid_mat(&self.out.forward(store, &h)?);
        let scores = MatchScores(s.column(0).to_vec());
        Ok((
            scores,
            MatchCache {
                x: features.clone(),
                h,
                s,
            },
        ))
    }

    /// Returns the gradient wrt the proposal features.
    pub fn backward(&self, store: &mut ParamStore, cache: &MatchCache, d_scores: &[f64]) -> Mat {
        let ds = Array1::from(d_scores.to_vec()).insert_axis(ndarray::Axis(1));
        let dz = sigmoid_backward(&cache.s, &ds);
        let dh = self.out.backward(store, &cache.h, &dz);
        let dpre = tanh_backward(&cache.h, &dh);
        self.hidden.backward(store, &cache.x, &dpre)
    }
}

fn check_labels(scores: &[f64], labels: &ProposalLabels) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "match_loss",
            expected: format!("{} scores", labels.len()),
            got: format!("{}", scores.len()),
        });
    }
    Ok(())
}

fn neg_log(s: f64) -> (f64, f64) {
    if s > LOG_EPS {
        (-s.ln(), -1.0 / s)
    } else {
        (-LOG_EPS.ln(), 0.0)
    }
}

/// `-log s_j + γ₁ (Σ s - k)²` for the observed positive `j`. Unobserved
/// proposals only enter through the count penalty.
///
/// Returns the loss and its gradient wrt the scores.
pub fn epr_loss(scores: &[f64], labels: &ProposalLabels, k: f64, gamma1: f64) -> Result<(f64, Vec<f64>)> {
    check_labels(scores, labels)?;
    let j = labels.positive();
    let excess = scores.iter().sum::<f64>() - k;
    let (log_term, d_log) = neg_log(scores[j]);
    let mut grad = vec![2.0 * gamma1 * excess; scores.len()];
    grad[j] += d_log;
    Ok((log_term + gamma1 * excess * excess, grad))
}

/// Binary cross-entropy that treats every unobserved proposal as negative:
/// `-log s_j - Σ_{i≠j} log(1 - s_i)`, summed over proposals.
pub fn assume_negative_bce(scores: &[f64], labels: &ProposalLabels) -> Result<(f64, Vec<f64>)> {
    check_labels(scores, labels)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; scores.len()];
    for (i, &s) in scores.iter().enumerate() {
        let (l, g) = if labels.is_positive(i) {
            neg_log(s)
        } else {
            let (l, g) = neg_log(1.0 - s);
            (l, -g)
        };
        loss += l;
        grad[i] = g;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{grad_check, GradCheckOptions};
    use ndarray::array;

    fn labels(n: usize, j: usize) -> ProposalLabels {
        ProposalLabels::new(n, j).unwrap()
    }

    #[test]
    fn zero_weights_give_half() {
        let mut s = ParamStore::new(0);
        let head = MatchHead::new(&mut s, "m", 3, 4).unwrap();
        for id in s.ids().collect::<Vec<_>>() {
            s.value_mut(id).fill(0.0);
        }
        let (scores, _) = head.forward(&s, &array![[1.0, 2.0, 3.0], [-5.0, 0.0, 9.0]]).unwrap();
        assert_eq!(scores.0, vec![0.5, 0.5]);
    }

    #[test]
    fn hand_computed_forward() {
        let mut s = ParamStore::new(0);
        let head = MatchHead::new(&mut s, "m", 2, 2).unwrap();
        *s.value_mut(head.hidden.w) = array![[1.0, -1.0], [0.5, 2.0]];
        *s.value_mut(head.hidden.b) = array![[0.1, 0.0]];
        *s.value_mut(head.out.w) = array![[2.0], [-1.0]];
        *s.value_mut(head.out.b) = array![[0.3]];
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.2, -0.4]];
        let (scores, _) = head.forward(&s, &x).unwrap();
        let expect = |x0: f64, x1: f64| {
            let h0 = (x0 + 0.5 * x1 + 0.1).tanh();
            let h1 = (-x0 + 2.0 * x1).tanh();
            1.0 / (1.0 + (-(2.0 * h0 - h1 + 0.3)).exp())
        };
        for (i, r) in x.rows().into_iter().enumerate() {
            assert!((scores.0[i] - expect(r[0], r[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn epr_fixture_values() {
        let (l, _) = epr_loss(&[1.0, 2.0, 2.0], &labels(3, 0), 5.0, 0.1).unwrap();
        assert!(l.abs() < 1e-12);
        let (l, _) = epr_loss(&[0.5, 2.0, 2.5], &labels(3, 0), 5.0, 3.7).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let (l, _) = epr_loss(&[1.0, 3.0, 3.0], &labels(3, 0), 5.0, 0.1).unwrap();
        assert!((l - 0.4).abs() < 1e-12);
    }

    #[test]
    fn epr_clamps_zero_score() {
        let (l, g) = epr_loss(&[0.0, 0.5], &labels(2, 0), 1.0, 0.0).unwrap();
        assert!((l + LOG_EPS.ln()).abs() < 1e-9);
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn losses_reject_misaligned_labels() {
        assert!(epr_loss(&[0.5], &labels(2, 0), 1.0, 0.1).is_err());
        assert!(assume_negative_bce(&[0.5], &labels(2, 0)).is_err());
    }

    #[test]
    fn loss_gradients_wrt_scores() {
        let mut st = ParamStore::new(0);
        let p = st.add("s", array![[0.3, 0.8, 0.1, 0.55]]).unwrap();
        let l = labels(4, 1);
        for epr in [true, false] {
            let r = grad_check(&mut st, &GradCheckOptions::default(), |st| {
                let s = st.value(p).row(0).to_vec();
                let (loss, g) = if epr {
                    epr_loss(&s, &l, 5.0, 0.1)?
                } else {
                    assume_negative_bce(&s, &l)?
                };
                *st.grad_mut(p) += &Array1::from(g).insert_axis(ndarray::Axis(0));
                Ok(loss)
            })
            .unwrap();
            assert!(r.max_rel_err < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn epr_through_head_gradients() {
        let mut st = ParamStore::new(11);
        let head = MatchHead::new(&mut st, "m", 3, 5).unwrap();
        let x = Mat::from_shape_fn((6, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let l = labels(6, 2);
        let r = grad_check(&mut st, &GradCheckOptions::default(), |st| {
            let (sc, cache) = head.forward(st, &x)?;
            let (loss, g) = epr_loss(&sc.0, &l, 2.0, 0.1)?;
            head.backward(st, &cache, &g);
            Ok(loss)
        })
        .unwrap();
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }
}
