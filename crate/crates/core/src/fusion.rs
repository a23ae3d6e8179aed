//! Joint relevance score `C = x * A + (1 - x) * B`, thresholding, and grid
//! selection of the weighting factor `x`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ConfusionCounts, EvalReport};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// `{0, 0.1, ..., 1.0}`.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub x: f64,
    pub t: f64,
    pub grid: Vec<f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            x: 0.5,
            t: DEFAULT_THRESHOLD,
            grid: default_grid(),
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::contract(format!("{name} = {v} is outside [0, 1]")))
    }
}

pub fn joint_score(a: f64, b: f64, x: f64) -> Result<f64> {
    check_unit("A", a)?;
    check_unit("B", b)?;
    check_unit("x", x)?;
    Ok(x * a + (1.0 - x) * b)
}

/// Relevant iff the joint score is strictly larger than the threshold.
pub fn classify_thread(c: f64, t: f64) -> bool {
    c > t
}

/// Syntactic and semantic scores of one (API, thread) pair with its truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub api_fqn: String,
    pub thread_id: u64,
    pub a: f64,
    pub b: f64,
    pub truth: bool,
}

/// Macro-averaged F1 of the fused classifier at weight `x`.
pub fn macro_f1_at(records: &[ScoredPair], x: f64, t: f64) -> Result<f64> {
    let mut counts: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for r in records {
        let c = joint_score(r.a, r.b, x)?;
        counts
            .entry(r.api_fqn.clone())
            .or_default()
            .record(classify_thread(c, t), r.truth);
    }
    Ok(EvalReport::from_counts(counts).avg_f1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub x: f64,
    pub f1: f64,
    /// Macro F1 of every grid value, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Grid value with the highest macro F1 on `records`; ties go to the larger x.
pub fn tune_weighting_factor(records: &[ScoredPair], grid: &[f64], t: f64) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::contract("weighting grid is empty"));
    }
    if records.is_empty() {
        return Err(Error::contract("no training records to tune on"));
    }
    check_unit("t", t)?;
    let scores = grid
        .iter()
        .map(|&x| macro_f1_at(records, x, t).map(|f| (x, f)))
        .collect::<Result<Vec<_>>>()?;
    let (x, f1) = scores
        .iter()
        .copied()
        .reduce(|best, cur| {
            if cur.1 > best.1 || (cur.1 == best.1 && cur.0 > best.0) {
                cur
            } else {
                best
            }
        })
        .expect("non-empty grid");
    Ok(TuneResult { x, f1, scores })
}
