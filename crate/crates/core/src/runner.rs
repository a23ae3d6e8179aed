//! The commands behind the CLI, usable in-process.

use std::fs::{self, File, OpenOptions};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::classifier::{MlpModel, TrainReport};
use crate::config::{ProviderSpec, RunConfig};
use crate::corpus::{candidate_set, find_potential_threads, read_api_db, read_labels, read_threads, Thread};
use crate::embedding::{EmbeddingProvider, ExternalProvider, HashEmbedder};
use crate::error::{Error, Result};
use crate::fusion::{tune_weighting_factor, TuneResult};
use crate::pipeline::{ablation, score_pairs, train_classifier, Ablation, Dataset, Embedder, SearchHit};
use crate::synth::{generate, SynthSpec};
use crate::typescope::{extract_mentions, score_breakdown, ApiMention, ScopeBreakdown, ThreadScope};

/// Exclusive marker file in an output directory, removed on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub fn make_provider(spec: &ProviderSpec, hash_seed: u64) -> Result<Box<dyn EmbeddingProvider>> {
    Ok(match spec {
        ProviderSpec::Hash => Box::new(HashEmbedder::new(hash_seed)),
        ProviderSpec::External(addr) => Box::new(ExternalProvider::connect(addr)?),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_threads(path: &Path) -> Result<Vec<Thread>> {
    read_threads(open(path)?)
}

/// With `require_labels` unset a missing label file reads as empty, which
/// is all search needs.
pub fn load_dataset(cfg: &RunConfig, require_labels: bool) -> Result<Dataset> {
    let threads = load_threads(&cfg.corpus_path)?;
    let apis = read_api_db(open(&cfg.api_db_path)?)?;
    let labels = if require_labels || cfg.labels_path.exists() {
        read_labels(open(&cfg.labels_path)?)?
    } else {
        Vec::new()
    };
    Ok(Dataset::new(threads, apis, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub threads: usize,
    pub apis: usize,
}

/// Parses corpus and API database and writes normalized copies
/// (`threads.jsonl`, `apis.jsonl`) into the output directory.
pub fn ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let threads = load_threads(&cfg.corpus_path)?;
    let apis = read_api_db(open(&cfg.api_db_path)?)?;
    write_jsonl(&cfg.output_dir.join("threads.jsonl"), &threads)?;
    write_jsonl(&cfg.output_dir.join("apis.jsonl"), &apis)?;
    Ok(IngestSummary {
        threads: threads.len(),
        apis: apis.len(),
    })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub tune: TuneResult,
    pub model_path: PathBuf,
    /// Copy of the input config with the tuned `x` and the model path.
    pub config_path: PathBuf,
}

/// Trains on the seeded training split, saves the model, then tunes `x`
/// on the same split and writes the resulting config next to the model.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let ds = load_dataset(cfg, true)?;
    let provider = make_provider(&cfg.provider_spec()?, cfg.hash_seed)?;
    let mut embedder = Embedder::new(provider.as_ref());
    let (train_threads, _) = ds.split(cfg.seed)?;
    let (model, report) = train_classifier(&ds, &train_threads, &mut embedder, &cfg.train_config())?;
    let model_path = cfg.model_file();
    model.save(&model_path)?;
    let tune = tune_on(&ds, &train_threads, &model, &mut embedder, cfg)?;
    let config_path = write_tuned_config(cfg, tune.x, &model_path)?;
    Ok(TrainOutcome {
        report,
        tune,
        model_path,
        config_path,
    })
}

fn tune_on(
    ds: &Dataset,
    threads: &[Thread],
    model: &MlpModel,
    embedder: &mut Embedder<'_>,
    cfg: &RunConfig,
) -> Result<TuneResult> {
    let records = score_pairs(ds, threads, Some(model), embedder)?;
    tune_weighting_factor(&records, &cfg.grid, cfg.t)
}

fn write_tuned_config(cfg: &RunConfig, x: f64, model_path: &Path) -> Result<PathBuf> {
    let mut out = cfg.clone();
    out.x = x;
    out.model_path = Some(absolute(model_path)?);
    for p in [&mut out.corpus_path, &mut out.api_db_path, &mut out.labels_path, &mut out.output_dir] {
        *p = absolute(p)?;
    }
    let path = cfg.output_dir.join("config.toml");
    out.save(&path)?;
    Ok(path)
}

fn absolute(p: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(p)?)
}

/// Re-tunes `x` for an existing model on the training split.
pub fn tune(cfg: &RunConfig) -> Result<(TuneResult, PathBuf)> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let ds = load_dataset(cfg, true)?;
    let model_path = cfg.model_file();
    let model = MlpModel::load(&model_path)?;
    let provider = make_provider(&cfg.provider_spec()?, cfg.hash_seed)?;
    let mut embedder = Embedder::new(provider.as_ref());
    let (train_threads, _) = ds.split(cfg.seed)?;
    let tune = tune_on(&ds, &train_threads, &model, &mut embedder, cfg)?;
    let path = write_tuned_config(cfg, tune.x, &model_path)?;
    Ok((tune, path))
}

/// Report file names written by [`eval`].
pub const REPORT_FILES: [&str; 3] = ["eval_fused.jsonl", "eval_syntactic.jsonl", "eval_semantic.jsonl"];

/// Fused, syntactic-only and semantic-only reports on the held-out split.
pub fn eval(cfg: &RunConfig) -> Result<Ablation> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let ds = load_dataset(cfg, true)?;
    let model = MlpModel::load(&cfg.model_file())?;
    let provider = make_provider(&cfg.provider_spec()?, cfg.hash_seed)?;
    let mut embedder = Embedder::new(provider.as_ref());
    let (_, test_threads) = ds.split(cfg.seed)?;
    let records = score_pairs(&ds, &test_threads, Some(&model), &mut embedder)?;
    let result = ablation(&records, cfg.x, cfg.t)?;
    let reports = [
        (&result.fused, "fused"),
        (&result.syntactic_only, "syntactic-only"),
        (&result.semantic_only, "semantic-only"),
    ];
    for ((report, label), file) in reports.into_iter().zip(REPORT_FILES) {
        fs::write(cfg.output_dir.join(file), report.to_jsonl(label))?;
    }
    Ok(result)
}

/// Per-candidate scope points for one mention, for `search --debug`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeTrace {
    pub mention: ApiMention,
    pub candidate: String,
    pub breakdown: ScopeBreakdown,
    pub total: u32,
}

pub fn scope_traces(ds: &Dataset, fqn: &str, thread_id: u64) -> Result<Vec<ScopeTrace>> {
    let api = ds.api(fqn)?;
    let thread = ds
        .threads
        .iter()
        .find(|t| t.id == thread_id)
        .ok_or_else(|| Error::contract(format!("no thread with id {thread_id}")))?;
    let scope = ThreadScope::new(thread);
    let candidates = candidate_set(api, &ds.apis);
    let mut out = Vec::new();
    for mention in extract_mentions(thread, api.simple_name()) {
        for cand in &candidates {
            let breakdown = score_breakdown(&mention, &scope, cand);
            out.push(ScopeTrace {
                mention: mention.clone(),
                candidate: cand.fqn.clone(),
                breakdown,
                total: breakdown.total(),
            });
        }
    }
    Ok(out)
}

/// Searches all threads of the corpus for `fqn`. The model is loaded when
/// present; without one only `x = 1` is accepted.
pub fn search(cfg: &RunConfig, fqn: &str) -> Result<(Dataset, Vec<SearchHit>)> {
    let ds = load_dataset(cfg, false)?;
    let model_path = cfg.model_file();
    let model = if model_path.exists() {
        Some(MlpModel::load(&model_path)?)
    } else {
        None
    };
    let provider = make_provider(&cfg.provider_spec()?, cfg.hash_seed)?;
    let mut embedder = Embedder::new(provider.as_ref());
    let hits = crate::pipeline::search(&ds, fqn, model.as_ref(), cfg.x, cfg.t, &mut embedder)?;
    Ok((ds, hits))
}

/// Number of potential threads of `fqn`, without scoring.
pub fn potential_thread_count(ds: &Dataset, fqn: &str) -> Result<usize> {
    Ok(find_potential_threads(ds.api(fqn)?, &ds.threads).len())
}

/// Writes corpus, API database, labels and a matching `config.toml` into `dir`.
pub fn write_synthetic(spec: &SynthSpec, dir: &Path) -> Result<RunConfig> {
    let corpus = generate(spec)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("corpus.jsonl"), corpus.corpus_jsonl())?;
    fs::write(dir.join("apis.jsonl"), corpus.api_db_jsonl())?;
    fs::write(dir.join("labels.jsonl"), corpus.labels_jsonl())?;
    let cfg = RunConfig {
        seed: spec.seed,
        ..RunConfig::default()
    };
    cfg.save(&dir.join("config.toml"))?;
    let mut rebased = cfg;
    rebased.corpus_path = dir.join("corpus.jsonl");
    rebased.api_db_path = dir.join("apis.jsonl");
    rebased.labels_path = dir.join("labels.jsonl");
    rebased.output_dir = dir.join("out");
    Ok(rebased)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = OutputLock::acquire(dir.path()).unwrap();
        assert!(matches!(OutputLock::acquire(dir.path()), Err(Error::Config(_))));
        drop(lock);
        OutputLock::acquire(dir.path()).unwrap();
    }

    #[test]
    fn train_eval_search_on_small_synthetic_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_apis: 4,
            n_threads_per_api: 6,
            ..SynthSpec::default()
        };
        let mut cfg = write_synthetic(&spec, dir.path()).unwrap();
        cfg.hidden_width = 16;
        let outcome = train(&cfg).unwrap();
        assert!(outcome.model_path.exists());
        assert_eq!(outcome.tune.scores.len(), 11);

        let tuned = RunConfig::load(&outcome.config_path).unwrap();
        assert_eq!(tuned.x, outcome.tune.x);
        let result = eval(&tuned).unwrap();
        for f in REPORT_FILES {
            assert!(tuned.output_dir.join(f).exists());
        }
        assert!((0.0..=1.0).contains(&result.fused.avg_f1));
        assert!(!tuned.output_dir.join(".lock").exists());

        let ds = load_dataset(&tuned, true).unwrap();
        let fqn = ds.labels.iter().find(|l| l.relevant).unwrap().api_fqn.clone();
        let (_, hits) = search(&tuned, &fqn).unwrap();
        assert_eq!(hits.len(), potential_thread_count(&ds, &fqn).unwrap());
        assert!(hits.windows(2).all(|w| w[0].c >= w[1].c));
        let traces = scope_traces(&ds, &fqn, hits[0].thread_id).unwrap();
        assert!(traces.iter().all(|t| t.total == t.breakdown.total()));
    }

    #[test]
    fn train_requires_labels_and_ingest_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_synthetic(&SynthSpec::default(), dir.path()).unwrap();
        let summary = ingest(&cfg).unwrap();
        assert_eq!(summary.threads, generate(&SynthSpec::default()).unwrap().records.len());
        assert!(cfg.output_dir.join("threads.jsonl").exists());
        cfg.labels_path = dir.path().join("missing.jsonl");
        assert!(matches!(train(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn search_without_model_needs_syntactic_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = write_synthetic(&SynthSpec::default(), dir.path()).unwrap();
        let ds = load_dataset(&cfg, true).unwrap();
        let fqn = ds.apis[0].fqn.clone();
        assert!(search(&cfg, &fqn).is_err());
        cfg.x = 1.0;
        let (_, hits) = search(&cfg, &fqn).unwrap();
        assert!(hits.iter().all(|h| h.b.is_none()));
    }
}
