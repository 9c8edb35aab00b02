//! Single- and multi-label recall at temporal IoU thresholds.
//!
//! A prediction matches an annotation when their IoU is at least `α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{iou, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    /// Ranked, best first.
    pub predictions: Vec<Interval>,
    pub annotations: Vec<Interval>,
}

/// How multi-label recall averages over annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Every counted annotation weighs the same.
    #[default]
    Pooled,
    /// Per-record recall, then the mean over records.
    PerSample,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "per_sample" | "per-sample" => Ok(Self::PerSample),
            other => Err(Error::InvalidArgument(format!("unknown aggregation `{other}`"))),
        }
    }
}

fn hit(preds: &[Interval], n: usize, target: &Interval, alpha: f64) -> bool {
    preds.iter().take(n).any(|p| iou(p, target) >= alpha)
}

/// Percentage of records whose single annotation is matched by one of the
/// top `n` predictions.
pub fn recall_single(records: &[EvalRecord], n: usize, alpha: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mut hits = 0usize;
    for r in records {
        if r.annotations.len() != 1 {
            return Err(Error::NotSingleLabel {
                id: r.id.clone(),
                count: r.annotations.len(),
            });
        }
        hits += hit(&r.predictions, n, &r.annotations[0], alpha) as usize;
    }
    Ok(100.0 * hits as f64 / records.len() as f64)
}

/// Percentage of the first `g` annotations of each record matched by one of
/// its top `n` predictions.
pub fn recall_multi(records: &[EvalRecord], n: usize, g: usize, alpha: f64, agg: Aggregation) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let (mut hits, mut total, mut per_sample) = (0usize, 0usize, 0.0);
    let mut counted_records = 0usize;
    for r in records {
        if r.annotations.is_empty() {
            return Err(Error::InvalidArgument(format!("record `{}` has no annotations", r.id)));
        }
        let anns = &r.annotations[..r.annotations.len().min(g)];
        let h = anns.iter().filter(|a| hit(&r.predictions, n, a, alpha)).count();
        hits += h;
        total += anns.len();
        if !anns.is_empty() {
            per_sample += h as f64 / anns.len() as f64;
            counted_records += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok(match agg {
        Aggregation::Pooled => 100.0 * hits as f64 / total as f64,
        Aggregation::PerSample => 100.0 * per_sample / counted_records as f64,
    })
}

/// Mean IoU over all unordered pairs.
pub fn avg_pairwise_iou(annotations: &[Interval]) -> Result<f64> {
    let k = annotations.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "pairwise agreement needs at least 2 annotations, got {k}"
        )));
    }
    let mut sum = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            sum += iou(&annotations[i], &annotations[j]);
        }
    }
    Ok(sum / (k * (k - 1) / 2) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredRecall {
    pub value: f64,
    pub kept: usize,
    pub total: usize,
}

/// [`recall_multi`] over the records whose first `g` annotations agree with
/// each other at mean pairwise IoU ≥ `β`. Records with a single annotation
/// have nothing to disagree with and are kept.
pub fn recall_multi_filtered(
    records: &[EvalRecord],
    n: usize,
    g: usize,
    alpha: f64,
    beta: f64,
    agg: Aggregation,
) -> Result<FilteredRecall> {
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        let anns = &r.annotations[..r.annotations.len().min(g)];
        let keep = anns.len() < 2 || avg_pairwise_iou(anns)? >= beta;
        if keep {
            kept.push(r.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    Ok(FilteredRecall {
        value: recall_multi(&kept, n, g, alpha, agg)?,
        kept: kept.len(),
        total: records.len(),
    })
}

/// One row of a metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub n: usize,
    pub g: Option<usize>,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub value: f64,
    pub samples: usize,
    pub filtered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub single_n: Vec<usize>,
    pub alphas: Vec<f64>,
    pub n: usize,
    pub g: usize,
    pub betas: Vec<f64>,
    pub aggregation: Aggregation,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            single_n: vec![1, 5],
            alphas: vec![0.5, 0.7],
            n: 5,
            g: 5,
            betas: vec![0.5, 0.4],
            aggregation: Aggregation::Pooled,
        }
    }
}

/// Standard table: R@n single-label against `single` records, and
/// R@(N,G) plus the β-filtered variants against `multi` records. β rows
/// with nothing left after filtering are omitted.
pub fn metric_table(single: &[EvalRecord], multi: &[EvalRecord], spec: &MetricSpec) -> Result<Vec<MetricReport>> {
    let mut rows = Vec::new();
    for &alpha in &spec.alphas {
        if !single.is_empty() {
            for &n in &spec.single_n {
                rows.push(MetricReport {
                    metric: "recall".into(),
                    n,
                    g: None,
                    alpha,
                    beta: None,
                    value: recall_single(single, n, alpha)?,
                    samples: single.len(),
                    filtered: 0,
                });
            }
        }
        if !multi.is_empty() {
            rows.push(MetricReport {
                metric: "recall_multi".into(),
                n: spec.n,
                g: Some(spec.g),
                alpha,
                beta: None,
                value: recall_multi(multi, spec.n, spec.g, alpha, spec.aggregation)?,
                samples: multi.len(),
                filtered: 0,
            });
            for &beta in &spec.betas {
                match recall_multi_filtered(multi, spec.n, spec.g, alpha, beta, spec.aggregation) {
                    Ok(f) => rows.push(MetricReport {
                        metric: "recall_multi_filtered".into(),
                        n: spec.n,
                        g: Some(spec.g),
                        alpha,
                        beta: Some(beta),
                        value: f.value,
                        samples: f.kept,
                        filtered: f.total - f.kept,
                    }),
                    Err(Error::EmptyEvaluationSet) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(s: f64, e: f64) -> Interval {
        Interval::new(s, e).unwrap()
    }

    fn rec(id: &str, p: Vec<Interval>, a: Vec<Interval>) -> EvalRecord {
        EvalRecord {
            id: id.into(),
            predictions: p,
            annotations: a,
        }
    }

    #[test]
    fn single_fixtures() {
        let a = iv(0.2, 0.6);
        assert_eq!(recall_single(&[rec("x", vec![a], vec![a])], 1, 0.5).unwrap(), 100.0);
        assert_eq!(recall_single(&[rec("x", vec![iv(0.7, 0.9)], vec![a])], 1, 0.5).unwrap(), 0.0);
        // IoUs 0.6, 0.4, 0.55 against [0, 1]
        let full = iv(0.0, 1.0);
        let recs = [
            rec("a", vec![iv(0.0, 0.6)], vec![full]),
            rec("b", vec![iv(0.0, 0.4)], vec![full]),
            rec("c", vec![iv(0.0, 0.55)], vec![full]),
        ];
        assert!((recall_single(&recs, 1, 0.5).unwrap() - 200.0 / 3.0).abs() < 1e-9);
        let bad = rec("d", vec![full], vec![full, full]);
        assert!(matches!(recall_single(&[bad], 1, 0.5), Err(Error::NotSingleLabel { .. })));
    }

    #[test]
    fn multi_fixtures() {
        let anns = vec![iv(0.0, 0.2), iv(0.5, 0.7)];
        let r = rec("x", anns.clone(), anns.clone());
        assert_eq!(recall_multi(&[r], 5, 5, 0.5, Aggregation::Pooled).unwrap(), 100.0);
        let r = rec("x", vec![iv(0.0, 0.2), iv(0.9, 1.0)], anns);
        assert_eq!(recall_multi(&[r], 5, 5, 0.5, Aggregation::Pooled).unwrap(), 50.0);
    }

    #[test]
    fn pooled_versus_per_sample() {
        // record a: 1 of 1 matched; record b: 1 of 4 matched
        let a = rec("a", vec![iv(0.0, 0.1)], vec![iv(0.0, 0.1)]);
        let b = rec(
            "b",
            vec![iv(0.0, 0.1)],
            vec![iv(0.0, 0.1), iv(0.3, 0.4), iv(0.5, 0.6), iv(0.7, 0.8)],
        );
        let recs = [a, b];
        assert_eq!(recall_multi(&recs, 5, 5, 0.5, Aggregation::Pooled).unwrap(), 40.0);
        assert_eq!(recall_multi(&recs, 5, 5, 0.5, Aggregation::PerSample).unwrap(), 62.5);
    }

    #[test]
    fn pairwise_fixture() {
        let v = avg_pairwise_iou(&[iv(0.0, 0.5), iv(0.25, 0.75), iv(0.0, 0.75)]).unwrap();
        assert!((v - 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(avg_pairwise_iou(&[iv(0.1, 0.2), iv(0.1, 0.2)]).unwrap(), 1.0);
        assert_eq!(avg_pairwise_iou(&[iv(0.0, 0.2), iv(0.5, 0.7)]).unwrap(), 0.0);
        assert!(avg_pairwise_iou(&[iv(0.0, 0.2)]).is_err());
    }

    #[test]
    fn filtering() {
        let disjoint = rec("d", vec![iv(0.0, 0.2)], vec![iv(0.0, 0.2), iv(0.5, 0.7)]);
        let agree = rec("a", vec![iv(0.0, 0.5)], vec![iv(0.0, 0.5), iv(0.0, 0.4)]);
        let f = recall_multi_filtered(&[disjoint.clone(), agree], 5, 5, 0.5, 0.5, Aggregation::Pooled).unwrap();
        assert_eq!((f.kept, f.total), (1, 2));
        assert_eq!(f.value, 100.0);
        assert!(matches!(
            recall_multi_filtered(&[disjoint], 5, 5, 0.5, 0.5, Aggregation::Pooled),
            Err(Error::EmptyEvaluationSet)
        ));
    }

    fn arb_interval() -> impl Strategy<Value = Interval> {
        (0.0f64..0.95, 0.01f64..1.0).prop_map(|(s, w)| Interval::new(s, (s + w).min(1.0)).unwrap())
    }

    fn arb_records() -> impl Strategy<Value = Vec<EvalRecord>> {
        prop::collection::vec(
            (
                prop::collection::vec(arb_interval(), 1..6),
                prop::collection::vec(arb_interval(), 1..6),
            )
                .prop_map(|(p, a)| rec("r", p, a)),
            1..8,
        )
    }

    proptest! {
        #[test]
        fn monotone_in_n_and_alpha(recs in arb_records(), a1 in 0.1f64..0.9, da in 0.0f64..0.1) {
            let a2 = a1 + da;
            for agg in [Aggregation::Pooled, Aggregation::PerSample] {
                for n in 1..5 {
                    let lo = recall_multi(&recs, n, 5, a1, agg).unwrap();
                    let hi_n = recall_multi(&recs, n + 1, 5, a1, agg).unwrap();
                    let hi_a = recall_multi(&recs, n, 5, a2, agg).unwrap();
                    prop_assert!(hi_n >= lo);
                    prop_assert!(hi_a <= lo);
                }
            }
        }

        #[test]
        fn beta_zero_is_unfiltered(recs in arb_records(), alpha in 0.1f64..0.9) {
            let plain = recall_multi(&recs, 5, 5, alpha, Aggregation::Pooled).unwrap();
            let f = recall_multi_filtered(&recs, 5, 5, alpha, 0.0, Aggregation::Pooled).unwrap();
            prop_assert_eq!(plain, f.value);
            prop_assert_eq!(f.kept, recs.len());
        }

        #[test]
        fn g1_single_annotation_equals_single(recs in arb_records(), alpha in 0.1f64..0.9, n in 1usize..5) {
            let singles: Vec<EvalRecord> = recs
                .into_iter()
                .map(|mut r| { r.annotations.truncate(1); r })
                .collect();
            prop_assert_eq!(
                recall_multi(&singles, n, 1, alpha, Aggregation::Pooled).unwrap(),
                recall_single(&singles, n, alpha).unwrap()
            );
        }
    }
}
