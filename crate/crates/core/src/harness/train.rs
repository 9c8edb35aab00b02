use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{OptimizerKind, RunConfig};
use super::model::{Model, StepLosses};
use crate::error::{Error, Result};
use crate::kernel::{clip_grad_norm, sgd_step, AdamLike};
use crate::metrics::{recall_single, EvalRecord};
use crate::pme::PseudoLabelSet;
use crate::rng::{self, rng_for};
use crate::synth::TrainSample;

/// Pseudo-label quality against hidden positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoQuality {
    pub precision: f64,
    pub recall: f64,
}

/// Scores pseudo-labels against information the trainer itself never sees.
pub trait PseudoLabelAudit {
    fn audit(&self, ids: &[&str], labels: &[PseudoLabelSet]) -> Result<PseudoQuality>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Per-sample means over the epoch.
    pub l_pme: f64,
    pub l_match: f64,
    pub l_semantic: f64,
    pub l_dmr: f64,
    pub l_total: f64,
    /// Mean `Σ s_match` per sample.
    pub score_sum: f64,
    /// Pseudo-labels consumed by the decoder during this epoch.
    pub pseudo_used: usize,
    /// Pseudo-labels estimated at the end of this epoch.
    pub pseudo_count: usize,
    pub pseudo_precision: Option<f64>,
    pub pseudo_recall: Option<f64>,
    /// R@1, IoU=0.5 of the first output against the observed labels.
    pub train_r1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub logs: Vec<EpochLog>,
    /// Final pseudo-labels, aligned with the training data.
    pub pseudo: Vec<PseudoLabelSet>,
}

enum Optimizer {
    Adam(AdamLike),
    Sgd(f64),
}

/// Joint training. Epoch 1 supervises the decoder with observed moments
/// only; every epoch ends with pseudo-label estimation, and those labels
/// feed the decoder during the next epoch.
pub fn train(
    cfg: &RunConfig,
    data: &[TrainSample],
    audit: Option<&dyn PseudoLabelAudit>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mut model = Model::new(cfg)?;
    let oc = &cfg.optim;
    let mut opt = match oc.kind {
        OptimizerKind::Adam => Optimizer::Adam(AdamLike::new(&model.store, oc.lr, oc.beta1, oc.beta2)),
        OptimizerKind::Sgd => Optimizer::Sgd(oc.lr),
    };
    let ids: Vec<&str> = data.iter().map(|s| s.id.as_str()).collect();
    let mut pseudo: Vec<PseudoLabelSet> = vec![PseudoLabelSet::empty(0); data.len()];
    let mut logs = Vec::with_capacity(oc.epochs);

    for epoch in 1..=oc.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, rng::stream::ORDER, epoch as u64));
        let mut sums = StepLosses::default();

        for batch in order.chunks(oc.batch_size) {
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let mut aug = rng_for(cfg.seed, rng::stream::AUGMENT, ((epoch as u64) << 32) | i as u64);
                let labels = (epoch > 1).then_some(&pseudo[i]);
                let l = model.accumulate(&data[i], labels, &mut aug, w)?;
                if !l.total.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        sample: data[i].id.clone(),
                        what: "loss".into(),
                    });
                }
                sums.matching += l.matching;
                sums.semantic += l.semantic;
                sums.pme += l.pme;
                sums.dmr += l.dmr;
                sums.total += l.total;
                sums.score_sum += l.score_sum;
                sums.pseudo_used += l.pseudo_used;
            }
            if let Some(max) = oc.clip_norm {
                clip_grad_norm(&mut model.store, max);
            }
            let step = match &mut opt {
                Optimizer::Adam(a) => a.step(&mut model.store),
                Optimizer::Sgd(lr) => sgd_step(&mut model.store, *lr),
            };
            step.map_err(|e| match e {
                Error::NonFiniteGradient(p) => Error::Diverged {
                    epoch,
                    sample: data[batch[0]].id.clone(),
                    what: format!("gradient of `{p}`"),
                },
                other => other,
            })?;
        }

        pseudo = data
            .iter()
            .map(|s| model.estimate(s, epoch))
            .collect::<Result<Vec<_>>>()?;
        let quality = audit.map(|a| a.audit(&ids, &pseudo)).transpose()?;

        let records: Vec<EvalRecord> = data
            .iter()
            .map(|s| {
                Ok(EvalRecord {
                    id: s.id.clone(),
                    predictions: model.predict(s)?.intervals(),
                    annotations: vec![s.observed],
                })
            })
            .collect::<Result<_>>()?;

        let n = data.len() as f64;
        let log = EpochLog {
            epoch,
            l_pme: sums.pme / n,
            l_match: sums.matching / n,
            l_semantic: sums.semantic / n,
            l_dmr: sums.dmr / n,
            l_total: sums.total / n,
            score_sum: sums.score_sum / n,
            pseudo_used: sums.pseudo_used,
            pseudo_count: pseudo.iter().map(PseudoLabelSet::len).sum(),
            pseudo_precision: quality.map(|q| q.precision),
            pseudo_recall: quality.map(|q| q.recall),
            train_r1: recall_single(&records, 1, 0.5)?,
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(TrainOutcome { model, logs, pseudo })
}
