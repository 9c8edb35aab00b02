use ndarray::Axis;
use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::bleu::bleu1;
use super::generator::Generator;
use crate::error::{Error, Result};
use crate::kernel::{Mat, ParamStore};
use crate::lattice::ProposalSet;
use crate::rng::Rng;
use crate::temporal::{interval_mask, nms_indices, rank_order, Interval};

/// Per-proposal BLEU-1 agreement with the labelled moment, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticScores(pub Vec<f64>);

/// Pseudo-positive moments estimated for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSet {
    pub intervals: Vec<Interval>,
    /// `(s_match, s_semantic)` for each interval; `None` when that branch
    /// is switched off.
    pub scores: Vec<(Option<f64>, Option<f64>)>,
    pub epoch: usize,
}

impl PseudoLabelSet {
    pub fn empty(epoch: usize) -> Self {
        Self {
            intervals: Vec::new(),
            scores: Vec::new(),
            epoch,
        }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// What to compare a proposal's generated words against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticReference {
    /// Words generated from the labelled moment.
    #[default]
    Generated,
    /// The query's own content words.
    Query,
}

/// `n_s` random convex combinations of the clips inside `z`, with weights
/// drawn from a flat Dirichlet.
pub fn augment_interval_features(clips: &Mat, z: &Interval, n_s: usize, rng: &mut Rng) -> Result<Mat> {
    let mask = interval_mask(z, clips.nrows())?;
    let members: Vec<usize> = mask.indices().collect();
    let mut out = Mat::zeros((n_s, clips.ncols()));
    for mut row in out.rows_mut() {
        let mut w: Vec<f64> = members.iter().map(|_| rng.sample(Exp1)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        for (&j, &wj) in members.iter().zip(&w) {
            row.scaled_add(wj, &clips.row(j));
        }
    }
    Ok(out)
}

/// Mean of the clips inside `z`.
pub fn mean_interval_feature(clips: &Mat, z: &Interval) -> Result<Mat> {
    let mask = interval_mask(z, clips.nrows())?;
    let idx: Vec<usize> = mask.indices().collect();
    Ok(clips
        .select(Axis(0), &idx)
        .mean_axis(Axis(0))
        .expect("mask is never empty")
        .insert_axis(Axis(0)))
}

/// Decodes words for every proposal and scores them against the words for
/// the labelled moment (or the query's content words) with BLEU-1.
///
/// `pooled` is the `C × d` matrix of mean clip features per proposal.
pub fn semantic_scores(
    gen: &Generator,
    store: &ParamStore,
    pooled: &Mat,
    clips: &Mat,
    z: &Interval,
    reference: SemanticReference,
    query_targets: &[usize],
) -> Result<SemanticScores> {
    let ref_words = match reference {
        SemanticReference::Generated => gen
            .decode(store, &mean_interval_feature(clips, z)?)?
            .remove(0),
        SemanticReference::Query => query_targets.to_vec(),
    };
    if ref_words.is_empty() {
        return Err(Error::InvalidArgument("empty semantic reference".into()));
    }
    let words = gen.decode(store, pooled)?;
    Ok(SemanticScores(words.iter().map(|w| bleu1(w, &ref_words)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateParams {
    pub t_thresh: f64,
    pub nms_thresh: f64,
    /// Number of decoder outputs `N`; at most `N - 1` labels are returned.
    pub n_outputs: usize,
}

/// Keeps proposals where any available score reaches `t_thresh`, ranks the
/// survivors by matching score (semantic score when matching is absent),
/// suppresses overlaps and keeps the top `N - 1`.
pub fn estimate_positives(
    mscores: Option<&[f64]>,
    sscores: Option<&[f64]>,
    set: &ProposalSet,
    params: &EstimateParams,
    epoch: usize,
) -> Result<PseudoLabelSet> {
    let c = set.len();
    for s in [mscores, sscores].into_iter().flatten() {
        if s.len() != c {
            return Err(Error::ShapeMismatch {
                op: "estimate_positives",
                expected: format!("{c} scores"),
                got: format!("{}", s.len()),
            });
        }
    }
    let rank_by = mscores
        .or(sscores)
        .ok_or_else(|| Error::InvalidArgument("estimation needs at least one score vector".into()))?;

    let kept: Vec<usize> = (0..c)
        .filter(|&i| {
            let m = mscores.map_or(f64::NEG_INFINITY, |s| s[i]);
            let s = sscores.map_or(f64::NEG_INFINITY, |s| s[i]);
            m.max(s) >= params.t_thresh
        })
        .collect();
    let mut ranked: Vec<(Interval, f64, usize)> = kept
        .iter()
        .map(|&i| (set.proposals()[i], rank_by[i], i))
        .collect();
    ranked.sort_by(|a, b| rank_order(&(a.0, a.1), &(b.0, b.1)));
    let items: Vec<(Interval, f64)> = ranked.iter().map(|r| (r.0, r.1)).collect();
    let survivors = nms_indices(&items, params.nms_thresh);

    let mut out = PseudoLabelSet::empty(epoch);
    for k in survivors.into_iter().take(params.n_outputs.saturating_sub(1)) {
        let i = ranked[k].2;
        out.intervals.push(set.proposals()[i]);
        out.scores.push((mscores.map(|s| s[i]), sscores.map(|s| s[i])));
    }
    Ok(out)
}

/// `L_match + γ₂ L_semantic`.
pub fn pme_loss(match_loss: f64, semantic_loss: f64, gamma2: f64) -> Result<f64> {
    if !match_loss.is_finite() || !semantic_loss.is_finite() {
        return Err(Error::NonFinite("pme loss component".into()));
    }
    Ok(match_loss + gamma2 * semantic_loss)
}
