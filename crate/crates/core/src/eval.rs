//! Per-API precision, recall and F1 with unweighted (macro) averages.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_positives: u64,
    #[serde(rename = "fp")]
    pub false_positives: u64,
    #[serde(rename = "fn")]
    pub false_negatives: u64,
}

impl ConfusionCounts {
    pub fn new(true_positives: u64, false_positives: u64, false_negatives: u64) -> Self {
        ConfusionCounts {
            true_positives,
            false_positives,
            false_negatives,
        }
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_positives += 1,
            (true, false) => self.false_positives += 1,
            (false, true) => self.false_negatives += 1,
            (false, false) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Zero denominators yield 0 for the affected metric.
pub fn prf1(c: ConfusionCounts) -> Prf {
    let precision = ratio(c.true_positives, c.true_positives + c.false_positives);
    let recall = ratio(c.true_positives, c.true_positives + c.false_negatives);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_api: BTreeMap<String, ApiMetrics>,
    pub avg_precision: f64,
    pub avg_recall: f64,
    pub avg_f1: f64,
}

#[derive(Serialize)]
struct ApiRow<'a> {
    fqn: &'a str,
    precision: f64,
    recall: f64,
    f1: f64,
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    summary: &'a str,
    apis: usize,
    avg_precision: f64,
    avg_recall: f64,
    avg_f1: f64,
}

impl EvalReport {
    pub fn from_counts(counts: BTreeMap<String, ConfusionCounts>) -> Self {
        let per_api: BTreeMap<String, ApiMetrics> = counts
            .into_iter()
            .map(|(fqn, c)| {
                let m = prf1(c);
                (
                    fqn,
                    ApiMetrics {
                        counts: c,
                        precision: m.precision,
                        recall: m.recall,
                        f1: m.f1,
                    },
                )
            })
            .collect();
        let n = per_api.len();
        let mean = |f: fn(&ApiMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_api.values().map(f).sum::<f64>() / n as f64
            }
        };
        EvalReport {
            avg_precision: mean(|m| m.precision),
            avg_recall: mean(|m| m.recall),
            avg_f1: mean(|m| m.f1),
            per_api,
        }
    }

    /// One record per API followed by a summary record named `label`.
    pub fn to_jsonl(&self, label: &str) -> String {
        let mut out = String::new();
        for (fqn, m) in &self.per_api {
            let row = ApiRow {
                fqn,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                tp: m.counts.true_positives,
                fp: m.counts.false_positives,
                fn_: m.counts.false_negatives,
            };
            out.push_str(&serde_json::to_string(&row).expect("serializable row"));
            out.push('\n');
        }
        let summary = SummaryRow {
            summary: label,
            apis: self.per_api.len(),
            avg_precision: self.avg_precision,
            avg_recall: self.avg_recall,
            avg_f1: self.avg_f1,
        };
        out.push_str(&serde_json::to_string(&summary).expect("serializable summary"));
        out.push('\n');
        out
    }

    pub fn to_table(&self, title: &str) -> String {
        let width = self.per_api.keys().map(String::len).max().unwrap_or(3).max(7);
        let mut out = String::new();
        let _ = writeln!(out, "{title}");
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>9}  {:>9}", "API", "precision", "recall", "f1");
        for (fqn, m) in &self.per_api {
            let _ = writeln!(
                out,
                "{fqn:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
                m.precision, m.recall, m.f1
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
            "average", self.avg_precision, self.avg_recall, self.avg_f1
        );
        out
    }
}

pub type Judgements = BTreeMap<String, BTreeMap<u64, bool>>;

/// Per-API confusion over each API's threads, then macro averages.
pub fn evaluate(predictions: &Judgements, truths: &Judgements) -> Result<EvalReport> {
    let missing_truth: Vec<&str> = predictions
        .keys()
        .filter(|k| !truths.contains_key(*k))
        .map(String::as_str)
        .collect();
    let missing_pred: Vec<&str> = truths
        .keys()
        .filter(|k| !predictions.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !missing_truth.is_empty() || !missing_pred.is_empty() {
        return Err(Error::contract(format!(
            "prediction/truth keys differ; without truth: [{}]; without prediction: [{}]",
            missing_truth.join(", "),
            missing_pred.join(", ")
        )));
    }
    let mut counts = BTreeMap::new();
    for (api, preds) in predictions {
        let truth = &truths[api];
        if preds.len() != truth.len() || preds.keys().any(|t| !truth.contains_key(t)) {
            return Err(Error::contract(format!("thread sets differ for `{api}`")));
        }
        let mut c = ConfusionCounts::default();
        for (thread, &p) in preds {
            c.record(p, truth[thread]);
        }
        counts.insert(api.clone(), c);
    }
    Ok(EvalReport::from_counts(counts))
}

/// Seeded shuffle, then the first `floor(2n/3)` items train and the rest test.
pub fn split_dataset<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.len() < 3 {
        return Err(Error::contract(format!(
            "need at least 3 items to split, got {}",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = items.len() * 2 / 3;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prf1_examples() {
        assert_eq!(
            prf1(ConfusionCounts::new(1, 0, 0)),
            Prf { precision: 1.0, recall: 1.0, f1: 1.0 }
        );
        assert_eq!(
            prf1(ConfusionCounts::new(0, 0, 0)),
            Prf { precision: 0.0, recall: 0.0, f1: 0.0 }
        );
        let m = prf1(ConfusionCounts::new(3, 1, 2));
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    fn judgements(rows: &[(&str, u64, bool)]) -> Judgements {
        let mut j = Judgements::new();
        for &(api, t, v) in rows {
            j.entry(api.to_string()).or_default().insert(t, v);
        }
        j
    }

    #[test]
    fn macro_average() {
        let truth = judgements(&[("a.b.C.x", 1, true), ("a.b.C.x", 2, false), ("a.b.D.y", 1, true), ("a.b.D.y", 2, true)]);
        let pred = judgements(&[("a.b.C.x", 1, true), ("a.b.C.x", 2, false), ("a.b.D.y", 1, true), ("a.b.D.y", 2, false)]);
        let r = evaluate(&pred, &truth).unwrap();
        // x: f1 1.0; y: p=1, r=0.5, f1=2/3
        assert!((r.avg_f1 - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(r.per_api.len(), 2);
    }

    #[test]
    fn single_api_report_equals_its_scores() {
        let truth = judgements(&[("a.b.C.x", 1, true), ("a.b.C.x", 2, true)]);
        let pred = judgements(&[("a.b.C.x", 1, true), ("a.b.C.x", 2, false)]);
        let r = evaluate(&pred, &truth).unwrap();
        let m = &r.per_api["a.b.C.x"];
        assert_eq!((r.avg_precision, r.avg_recall, r.avg_f1), (m.precision, m.recall, m.f1));
    }

    #[test]
    fn key_mismatch_lists_missing_apis() {
        let truth = judgements(&[("a.b.C.x", 1, true)]);
        let pred = judgements(&[("a.b.C.z", 1, true)]);
        match evaluate(&pred, &truth) {
            Err(Error::Contract(msg)) => {
                assert!(msg.contains("a.b.C.x") && msg.contains("a.b.C.z"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let pred_threads = judgements(&[("a.b.C.x", 2, true)]);
        assert!(evaluate(&pred_threads, &truth).is_err());
    }

    #[test]
    fn split_sizes() {
        let items: Vec<u32> = (0..380).collect();
        let (train, test) = split_dataset(&items, 1).unwrap();
        assert_eq!((train.len(), test.len()), (253, 127));
        let mut all: Vec<u32> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, items);

        let (a, b) = split_dataset(&[1, 2, 3], 5).unwrap();
        assert_eq!((a.len(), b.len()), (2, 1));
        assert_eq!(split_dataset(&items, 9).unwrap(), split_dataset(&items, 9).unwrap());
        assert!(split_dataset(&[1, 2], 0).is_err());
    }

    #[test]
    fn report_renderings() {
        let truth = judgements(&[("a.b.C.x", 1, true)]);
        let r = evaluate(&truth, &truth).unwrap();
        let jsonl = r.to_jsonl("fused");
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"fqn\":\"a.b.C.x\""));
        assert!(lines[1].contains("\"summary\":\"fused\""));
        assert!(r.to_table("fused").contains("average"));
    }
}
