//! Run directories and the plot-ready report built from them.
//!
//! A run directory holds `config.toml`, `epochs.jsonl` (one [`EpochLog`]
//! per line), `metrics.json` (a list of [`MetricReport`]), plus the
//! checkpoint and final pseudo-labels.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::RunConfig;
use super::evaluate::{find_metric, PseudoLabelRecord};
use super::train::{EpochLog, TrainOutcome};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::synth::TrainSample;

pub const CONFIG_FILE: &str = "config.toml";
pub const EPOCHS_FILE: &str = "epochs.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PSEUDO_FILE: &str = "pseudo_labels.jsonl";

pub const SUMMARY_FORMAT: &str = "dtgspl-summary";
pub const SUMMARY_VERSION: u32 = 1;

pub fn write_json_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in BufReader::new(fs::File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes every artifact of a finished training run into `dir`.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    data: &[TrainSample],
    outcome: &TrainOutcome,
    metrics: Option<&[MetricReport]>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml_string()?)?;
    write_json_lines(&dir.join(EPOCHS_FILE), &outcome.logs)?;
    outcome.model.checkpoint()?.save(&dir.join(CHECKPOINT_FILE))?;
    let pseudo: Vec<_> = data
        .iter()
        .zip(&outcome.pseudo)
        .map(|(s, p)| PseudoLabelRecord::new(&s.id, p))
        .collect();
    write_json_lines(&dir.join(PSEUDO_FILE), &pseudo)?;
    if let Some(m) = metrics {
        write_json_pretty(&dir.join(METRICS_FILE), &m)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEpoch {
    pub epoch: usize,
    pub l_total: f64,
    pub l_pme: f64,
    pub l_dmr: f64,
    pub pseudo_count: usize,
    pub pseudo_precision: Option<f64>,
    pub pseudo_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub epochs: usize,
    pub final_epoch: FinalEpoch,
    /// R@(N,G), IoU=0.5 in percent, when present in the metric table.
    pub headline: Option<f64>,
    pub metrics: Vec<MetricReport>,
    pub files: Vec<String>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reads a run directory and writes `loss_curves.csv`,
/// `pseudo_quality.csv`, `metrics_table.csv` and `summary.json` into `out`.
pub fn report(dir: &Path, out: &Path) -> Result<Summary> {
    let missing: Vec<String> = [CONFIG_FILE, EPOCHS_FILE, METRICS_FILE]
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let logs: Vec<EpochLog> = read_json_lines(&dir.join(EPOCHS_FILE))?;
    let metrics: Vec<MetricReport> = serde_json::from_str(&fs::read_to_string(dir.join(METRICS_FILE))?)?;
    fs::create_dir_all(out)?;
    let last = logs
        .last()
        .ok_or_else(|| Error::Schema(format!("{EPOCHS_FILE} has no epochs")))?;

    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));

    let mut w = csv::Writer::from_path(out.join("loss_curves.csv")).map_err(csv_err)?;
    w.write_record(["epoch", "l_pme", "l_match", "l_semantic", "l_dmr", "l_total", "score_sum", "train_r1"])
        .map_err(csv_err)?;
    for l in &logs {
        w.write_record([
            l.epoch.to_string(),
            l.l_pme.to_string(),
            l.l_match.to_string(),
            l.l_semantic.to_string(),
            l.l_dmr.to_string(),
            l.l_total.to_string(),
            l.score_sum.to_string(),
            l.train_r1.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("pseudo_quality.csv")).map_err(csv_err)?;
    w.write_record(["epoch", "pseudo_used", "pseudo_count", "precision", "recall"])
        .map_err(csv_err)?;
    for l in &logs {
        w.write_record([
            l.epoch.to_string(),
            l.pseudo_used.to_string(),
            l.pseudo_count.to_string(),
            opt_cell(l.pseudo_precision),
            opt_cell(l.pseudo_recall),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("metrics_table.csv")).map_err(csv_err)?;
    w.write_record(["metric", "n", "g", "alpha", "beta", "value", "samples"])
        .map_err(csv_err)?;
    for m in &metrics {
        w.write_record([
            m.metric.clone(),
            m.n.to_string(),
            m.g.map(|g| g.to_string()).unwrap_or_default(),
            m.alpha.to_string(),
            opt_cell(m.beta),
            m.value.to_string(),
            m.samples.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let summary = Summary {
        format: SUMMARY_FORMAT.into(),
        version: SUMMARY_VERSION,
        seed: cfg.seed,
        epochs: logs.len(),
        final_epoch: FinalEpoch {
            epoch: last.epoch,
            l_total: last.l_total,
            l_pme: last.l_pme,
            l_dmr: last.l_dmr,
            pseudo_count: last.pseudo_count,
            pseudo_precision: last.pseudo_precision,
            pseudo_recall: last.pseudo_recall,
        },
        headline: find_metric(&metrics, "recall_multi", cfg.eval.n, 0.5, None).map(|m| m.value),
        files: ["loss_curves.csv", "pseudo_quality.csv", "metrics_table.csv"]
            .map(String::from)
            .to_vec(),
        metrics,
    };
    let value = serde_json::to_value(&summary)?;
    validate_summary(&value)?;
    write_json_pretty(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn want<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Schema(format!("missing `{key}`")))
}

/// `range` bounds the value and also allows null.
fn want_num(v: &Value, key: &str, range: Option<f64>) -> Result<()> {
    match want(v, key)? {
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if let Some(hi) = range {
                if !(0.0..=hi).contains(&x) {
                    return Err(Error::Schema(format!("`{key}` = {x} outside [0, {hi}]")));
                }
            }
            Ok(())
        }
        Value::Null if range.is_some() => Ok(()),
        other => Err(Error::Schema(format!("`{key}` should be a number, got {other}"))),
    }
}

/// Structural check of a summary document.
pub fn validate_summary(v: &Value) -> Result<()> {
    if want(v, "format")?.as_str() != Some(SUMMARY_FORMAT) {
        return Err(Error::Schema("wrong `format`".into()));
    }
    if want(v, "version")?.as_u64() != Some(SUMMARY_VERSION as u64) {
        return Err(Error::Schema("wrong `version`".into()));
    }
    want(v, "seed")?
        .as_u64()
        .ok_or_else(|| Error::Schema("`seed` should be an unsigned integer".into()))?;
    let epochs = want(v, "epochs")?
        .as_u64()
        .ok_or_else(|| Error::Schema("`epochs` should be an unsigned integer".into()))?;
    let fe = want(v, "final_epoch")?;
    if want(fe, "epoch")?.as_u64() != Some(epochs) {
        return Err(Error::Schema("`final_epoch.epoch` disagrees with `epochs`".into()));
    }
    for k in ["l_total", "l_pme", "l_dmr"] {
        want_num(fe, k, None)?;
    }
    for k in ["pseudo_precision", "pseudo_recall"] {
        want_num(fe, k, Some(1.0))?;
    }
    want_num(v, "headline", Some(100.0))?;
    let rows = want(v, "metrics")?
        .as_array()
        .ok_or_else(|| Error::Schema("`metrics` should be a list".into()))?;
    for r in rows {
        want(r, "metric")?
            .as_str()
            .ok_or_else(|| Error::Schema("`metric` should be a string".into()))?;
        want_num(r, "value", Some(100.0))?;
        want_num(r, "alpha", Some(1.0))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_lists_everything_missing() {
        let dir = tempfile::tempdir().unwrap();
        match report(dir.path(), dir.path()) {
            Err(Error::MissingArtifacts(files)) => assert_eq!(files, [CONFIG_FILE, EPOCHS_FILE, METRICS_FILE]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validator_rejects_out_of_range() {
        let mut v = serde_json::json!({
            "format": SUMMARY_FORMAT, "version": 1, "seed": 1, "epochs": 2,
            "final_epoch": {"epoch": 2, "l_total": 1.0, "l_pme": 0.5, "l_dmr": 0.5,
                            "pseudo_count": 3, "pseudo_precision": 0.5, "pseudo_recall": null},
            "headline": 0.3, "metrics": [], "files": []
        });
        validate_summary(&v).unwrap();
        v["final_epoch"]["pseudo_precision"] = serde_json::json!(1.5);
        assert!(validate_summary(&v).is_err());
        v["final_epoch"]["pseudo_precision"] = serde_json::json!(0.5);
        v["epochs"] = serde_json::json!(3);
        assert!(validate_summary(&v).is_err());
    }
}
