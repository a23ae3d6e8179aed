//! End-to-end wiring: potential threads and candidates, both scorers, fusion.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::classifier::{MlpModel, TrainConfig, TrainReport};
use crate::corpus::{candidate_set, find_potential_threads, ApiMethod, Label, Thread};
use crate::embedding::{concat, embed_method, embed_thread, EmbeddingProvider, RelevanceEmbedding};
use crate::error::{Error, Result};
use crate::eval::{split_dataset, ConfusionCounts, EvalReport};
use crate::fusion::{classify_thread, joint_score, ScoredPair};
use crate::typescope::thread_syntactic_score;

/// Threads, API database and ground truth loaded together.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub threads: Vec<Thread>,
    pub apis: Vec<ApiMethod>,
    pub labels: Vec<Label>,
    truth: HashMap<(u64, String), bool>,
}

impl Dataset {
    pub fn new(threads: Vec<Thread>, apis: Vec<ApiMethod>, labels: Vec<Label>) -> Self {
        let truth = labels
            .iter()
            .map(|l| ((l.thread_id, l.api_fqn.clone()), l.relevant))
            .collect();
        Dataset {
            threads,
            apis,
            labels,
            truth,
        }
    }

    pub fn api(&self, fqn: &str) -> Result<&ApiMethod> {
        self.apis
            .iter()
            .find(|a| a.fqn == fqn)
            .ok_or_else(|| Error::UnknownApi(fqn.to_string()))
    }

    /// Unlabeled pairs count as not relevant.
    pub fn is_relevant(&self, thread_id: u64, fqn: &str) -> bool {
        self.truth
            .get(&(thread_id, fqn.to_string()))
            .copied()
            .unwrap_or(false)
    }

    /// Seeded 2:1 split of the threads.
    pub fn split(&self, seed: u64) -> Result<(Vec<Thread>, Vec<Thread>)> {
        split_dataset(&self.threads, seed)
    }

    /// APIs judged relevant to at least one of `threads`, sorted by fqn.
    pub fn evaluated_apis(&self, threads: &[Thread]) -> Vec<&ApiMethod> {
        let ids: BTreeSet<u64> = threads.iter().map(|t| t.id).collect();
        let fqns: BTreeSet<&str> = self
            .labels
            .iter()
            .filter(|l| l.relevant && ids.contains(&l.thread_id))
            .map(|l| l.api_fqn.as_str())
            .collect();
        self.apis.iter().filter(|a| fqns.contains(a.fqn.as_str())).collect()
    }
}

/// Memoizes thread-pair and method vectors for one run.
pub struct Embedder<'p> {
    provider: &'p dyn EmbeddingProvider,
    threads: HashMap<u64, Vec<Vec<f64>>>,
    methods: HashMap<String, Vec<f64>>,
}

impl<'p> Embedder<'p> {
    pub fn new(provider: &'p dyn EmbeddingProvider) -> Self {
        Embedder {
            provider,
            threads: HashMap::new(),
            methods: HashMap::new(),
        }
    }

    pub fn thread_vectors(&mut self, thread: &Thread) -> Result<&[Vec<f64>]> {
        if !self.threads.contains_key(&thread.id) {
            let v = embed_thread(thread, self.provider)?;
            self.threads.insert(thread.id, v);
        }
        Ok(&self.threads[&thread.id])
    }

    pub fn method_vector(&mut self, api: &ApiMethod) -> Result<&[f64]> {
        if !self.methods.contains_key(&api.fqn) {
            let v = embed_method(api, self.provider)?;
            self.methods.insert(api.fqn.clone(), v);
        }
        Ok(&self.methods[&api.fqn])
    }

    pub fn relevance_embeddings(&mut self, thread: &Thread, api: &ApiMethod, label: Option<bool>) -> Result<Vec<RelevanceEmbedding>> {
        let method = self.method_vector(api)?.to_vec();
        let threads = self.thread_vectors(thread)?;
        Ok(threads
            .iter()
            .map(|t| RelevanceEmbedding {
                vector: concat(t, &method),
                thread_id: thread.id,
                api_fqn: api.fqn.clone(),
                label,
            })
            .collect())
    }

    /// Mean classifier probability over the thread's pairs with `api`.
    pub fn semantic_score(&mut self, model: &MlpModel, thread: &Thread, api: &ApiMethod) -> Result<f64> {
        let embs = self.relevance_embeddings(thread, api, None)?;
        crate::classifier::thread_semantic_score(model, &embs)
    }
}

/// Labeled embeddings for training: every pair of a thread with each API it
/// refers to is positive; same-simple-name candidates it does not refer to
/// (and explicit negative labels) are negative.
pub fn training_examples(ds: &Dataset, threads: &[Thread], embedder: &mut Embedder<'_>) -> Result<Vec<RelevanceEmbedding>> {
    let mut by_thread: HashMap<u64, Vec<&Label>> = HashMap::new();
    for l in &ds.labels {
        by_thread.entry(l.thread_id).or_default().push(l);
    }
    let mut out = Vec::new();
    for thread in threads {
        let labels = by_thread.remove(&thread.id).unwrap_or_default();
        let positives: BTreeSet<&str> = labels
            .iter()
            .filter(|l| l.relevant)
            .map(|l| l.api_fqn.as_str())
            .collect();
        let mut negatives: BTreeSet<String> = labels
            .iter()
            .filter(|l| !l.relevant)
            .map(|l| l.api_fqn.clone())
            .collect();
        for fqn in &positives {
            let api = ds.api(fqn)?;
            for cand in candidate_set(api, &ds.apis) {
                if !positives.contains(cand.fqn.as_str()) {
                    negatives.insert(cand.fqn);
                }
            }
        }
        for fqn in &positives {
            out.extend(embedder.relevance_embeddings(thread, ds.api(fqn)?, Some(true))?);
        }
        for fqn in &negatives {
            out.extend(embedder.relevance_embeddings(thread, ds.api(fqn)?, Some(false))?);
        }
    }
    Ok(out)
}

pub fn train_classifier(
    ds: &Dataset,
    threads: &[Thread],
    embedder: &mut Embedder<'_>,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    let examples = training_examples(ds, threads, embedder)?;
    crate::classifier::train(&examples, config)
}

/// `A` (and `B` when a model is given) for every evaluated API over its
/// potential threads within `threads`. Without a model `B` is 0.
pub fn score_pairs(
    ds: &Dataset,
    threads: &[Thread],
    model: Option<&MlpModel>,
    embedder: &mut Embedder<'_>,
) -> Result<Vec<ScoredPair>> {
    let mut out = Vec::new();
    for api in ds.evaluated_apis(threads) {
        let candidates = candidate_set(api, &ds.apis);
        for thread in find_potential_threads(api, threads) {
            let a = thread_syntactic_score(thread, api, &candidates)?;
            let b = match model {
                Some(m) => embedder.semantic_score(m, thread, api)?,
                None => 0.0,
            };
            out.push(ScoredPair {
                api_fqn: api.fqn.clone(),
                thread_id: thread.id,
                a,
                b,
                truth: ds.is_relevant(thread.id, &api.fqn),
            });
        }
    }
    Ok(out)
}

/// Fused predictions at weight `x`, grouped per API, evaluated against truth.
pub fn evaluate_scored(records: &[ScoredPair], x: f64, t: f64) -> Result<EvalReport> {
    let mut counts: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for r in records {
        let c = joint_score(r.a, r.b, x)?;
        counts
            .entry(r.api_fqn.clone())
            .or_default()
            .record(classify_thread(c, t), r.truth);
    }
    Ok(EvalReport::from_counts(counts))
}

/// Fused, syntactic-only (x = 1) and semantic-only (x = 0) reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ablation {
    pub fused: EvalReport,
    pub syntactic_only: EvalReport,
    pub semantic_only: EvalReport,
}

pub fn ablation(records: &[ScoredPair], x: f64, t: f64) -> Result<Ablation> {
    Ok(Ablation {
        fused: evaluate_scored(records, x, t)?,
        syntactic_only: evaluate_scored(records, 1.0, t)?,
        semantic_only: evaluate_scored(records, 0.0, t)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub thread_id: u64,
    pub title: String,
    pub a: f64,
    pub b: Option<f64>,
    pub c: f64,
    pub relevant: bool,
}

/// Potential threads of `fqn` scored and sorted by joint score, highest
/// first (ties by thread id). Without a model only `x = 1` is allowed.
pub fn search(
    ds: &Dataset,
    fqn: &str,
    model: Option<&MlpModel>,
    x: f64,
    t: f64,
    embedder: &mut Embedder<'_>,
) -> Result<Vec<SearchHit>> {
    let api = ds.api(fqn)?;
    if model.is_none() && x != 1.0 {
        return Err(Error::contract("a trained model is required unless x = 1"));
    }
    let candidates = candidate_set(api, &ds.apis);
    let mut hits = Vec::new();
    for thread in find_potential_threads(api, &ds.threads) {
        let a = thread_syntactic_score(thread, api, &candidates)?;
        let b = match model {
            Some(m) => Some(embedder.semantic_score(m, thread, api)?),
            None => None,
        };
        let c = joint_score(a, b.unwrap_or(0.0), x)?;
        hits.push(SearchHit {
            thread_id: thread.id,
            title: thread.title.clone(),
            a,
            b,
            c,
            relevant: classify_thread(c, t),
        });
    }
    hits.sort_by(|p, q| q.c.total_cmp(&p.c).then(p.thread_id.cmp(&q.thread_id)));
    Ok(hits)
}
