use serde::{Deserialize, Serialize};

use super::config::{AblationMode, RunConfig};
use super::evaluate::{evaluate, OracleAudit};
use super::train::{train, EpochLog, PseudoLabelAudit};
use crate::error::Result;
use crate::metrics::MetricReport;
use crate::synth::{Sample, TrainSample};

/// One metric row evaluated for both arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub n: usize,
    pub g: Option<usize>,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub full: f64,
    pub variant: f64,
    /// `full - variant`, in percentage points.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    pub logs: Vec<EpochLog>,
    pub metrics: Vec<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub mode: AblationMode,
    pub seed: u64,
    pub full: ArmResult,
    pub variant: ArmResult,
    pub comparison: Vec<Comparison>,
}

fn run_arm(
    name: &str,
    cfg: &RunConfig,
    data: &[TrainSample],
    test: &[Sample],
    audit: Option<&dyn PseudoLabelAudit>,
) -> Result<ArmResult> {
    let out = train(cfg, data, audit, |_| {})?;
    Ok(ArmResult {
        name: name.to_string(),
        metrics: evaluate(&out.model, test, &cfg.eval)?,
        logs: out.logs,
    })
}

/// Trains the full model and one variant with the same seed (hence the
/// same initialization, data order and augmentation draws) and pairs up
/// their test metrics.
pub fn ablate(
    cfg: &RunConfig,
    mode: AblationMode,
    data: &[TrainSample],
    test: &[Sample],
    train_oracle: Option<&[Sample]>,
) -> Result<AblationReport> {
    let audit = train_oracle.map(|o| OracleAudit::new(o, cfg.eval.pseudo_iou));
    let audit = audit.as_ref().map(|a| a as &dyn PseudoLabelAudit);

    let mut full_cfg = cfg.clone();
    full_cfg.ablation = Default::default();
    let mut var_cfg = full_cfg.clone();
    mode.apply(&mut var_cfg.ablation);
    var_cfg.validate()?;

    let full = run_arm("full", &full_cfg, data, test, audit)?;
    let variant = run_arm(mode.name(), &var_cfg, data, test, audit)?;
    let comparison = full
        .metrics
        .iter()
        .filter_map(|f| {
            let v = variant
                .metrics
                .iter()
                .find(|v| v.metric == f.metric && v.n == f.n && v.g == f.g && v.alpha == f.alpha && v.beta == f.beta)?;
            Some(Comparison {
                metric: f.metric.clone(),
                n: f.n,
                g: f.g,
                alpha: f.alpha,
                beta: f.beta,
                full: f.value,
                variant: v.value,
                delta: f.value - v.value,
            })
        })
        .collect();
    Ok(AblationReport {
        mode,
        seed: cfg.seed,
        full,
        variant,
        comparison,
    })
}
