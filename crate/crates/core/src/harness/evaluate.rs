use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::EvalConfig;
use super::model::Model;
use super::train::{PseudoLabelAudit, PseudoQuality};
use crate::error::{Error, Result};
use crate::metrics::{metric_table, EvalRecord, MetricReport, MetricSpec};
use crate::pme::PseudoLabelSet;
use crate::synth::Sample;
use crate::temporal::{iou, CenterWidth, Interval};

/// One line of `predict` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub predictions: Vec<Interval>,
    pub cw: Vec<CenterWidth>,
}

/// One line of `estimate` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRecord {
    pub id: String,
    pub pseudo: Vec<Interval>,
    pub scores: Vec<(Option<f64>, Option<f64>)>,
    pub epoch: usize,
}

impl PseudoLabelRecord {
    pub fn new(id: &str, p: &PseudoLabelSet) -> Self {
        Self {
            id: id.to_string(),
            pseudo: p.intervals.clone(),
            scores: p.scores.clone(),
            epoch: p.epoch,
        }
    }
}

pub fn predict_all(model: &Model, samples: &[crate::synth::TrainSample]) -> Result<Vec<PredictionRecord>> {
    samples
        .iter()
        .map(|s| {
            let p = model.predict(s)?;
            Ok(PredictionRecord {
                id: s.id.clone(),
                predictions: p.intervals(),
                cw: p.0.iter().map(|x| x.cw).collect(),
            })
        })
        .collect()
}

/// Pairs predictions with oracle samples by id. Every oracle id needs a
/// prediction and vice versa.
pub fn join_records(
    preds: &[PredictionRecord],
    oracle: &[Sample],
) -> Result<(Vec<EvalRecord>, Vec<EvalRecord>)> {
    let by_id: HashMap<&str, &PredictionRecord> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    if by_id.len() != oracle.len() {
        return Err(Error::IdMismatch(format!(
            "{} predictions for {} oracle samples",
            by_id.len(),
            oracle.len()
        )));
    }
    let mut single = Vec::with_capacity(oracle.len());
    let mut multi = Vec::with_capacity(oracle.len());
    for s in oracle {
        let p = by_id
            .get(s.id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("no prediction for `{}`", s.id)))?;
        single.push(EvalRecord {
            id: s.id.clone(),
            predictions: p.predictions.clone(),
            annotations: vec![s.observed],
        });
        multi.push(EvalRecord {
            id: s.id.clone(),
            predictions: p.predictions.clone(),
            annotations: s.full_positives.clone(),
        });
    }
    Ok((single, multi))
}

pub fn metric_spec(ec: &EvalConfig) -> MetricSpec {
    MetricSpec {
        single_n: vec![1, ec.n],
        alphas: ec.alphas.clone(),
        n: ec.n,
        g: ec.g,
        betas: ec.betas.clone(),
        aggregation: ec.aggregation,
    }
}

/// Runs the decoder over `oracle` and scores it: single-label recall
/// against the observed moments, multi-label recall against the hidden
/// positives.
pub fn evaluate(model: &Model, oracle: &[Sample], ec: &EvalConfig) -> Result<Vec<MetricReport>> {
    let views: Vec<_> = oracle.iter().map(Sample::training_view).collect();
    let preds = predict_all(model, &views)?;
    let (single, multi) = join_records(&preds, oracle)?;
    metric_table(&single, &multi, &metric_spec(ec))
}

/// Looks up a metric row; `beta = None` selects the unfiltered row.
pub fn find_metric<'a>(
    rows: &'a [MetricReport],
    metric: &str,
    n: usize,
    alpha: f64,
    beta: Option<f64>,
) -> Option<&'a MetricReport> {
    rows.iter()
        .find(|r| r.metric == metric && r.n == n && r.alpha == alpha && r.beta == beta)
}

/// Pooled pseudo-label precision and recall against oracle positives.
#[derive(Debug, Clone)]
pub struct OracleAudit {
    positives: HashMap<String, Vec<Interval>>,
    iou: f64,
}

impl OracleAudit {
    pub fn new(oracle: &[Sample], iou: f64) -> Self {
        Self {
            positives: oracle.iter().map(|s| (s.id.clone(), s.full_positives.clone())).collect(),
            iou,
        }
    }
}

impl PseudoLabelAudit for OracleAudit {
    fn audit(&self, ids: &[&str], labels: &[PseudoLabelSet]) -> Result<PseudoQuality> {
        let (mut correct, mut emitted, mut found, mut total) = (0usize, 0usize, 0usize, 0usize);
        for (id, set) in ids.iter().zip(labels) {
            let pos = self
                .positives
                .get(*id)
                .ok_or_else(|| Error::IdMismatch(format!("`{id}` missing from oracle")))?;
            emitted += set.len();
            correct += set
                .intervals
                .iter()
                .filter(|p| pos.iter().any(|y| iou(p, y) >= self.iou))
                .count();
            total += pos.len();
            found += pos
                .iter()
                .filter(|y| set.intervals.iter().any(|p| iou(p, y) >= self.iou))
                .count();
        }
        Ok(PseudoQuality {
            precision: if emitted == 0 { 0.0 } else { correct as f64 / emitted as f64 },
            recall: if total == 0 { 0.0 } else { found as f64 / total as f64 },
        })
    }
}
