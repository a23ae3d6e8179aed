//! Python bindings for the core library.

use std::path::PathBuf;

use engine::classifier::MlpModel;
use engine::config::RunConfig;
use engine::eval::ConfusionCounts;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: engine::Error) -> PyErr {
    match e {
        engine::Error::Io(_) | engine::Error::Connection(_) | engine::Error::ModelLoad { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Thread", frozen, from_py_object)]
#[derive(Clone)]
struct PyThread(engine::Thread);

#[pymethods]
impl PyThread {
    /// Parses one corpus record (`id`, `title`, `tags`, `body_html`).
    #[staticmethod]
    fn from_json(record: &str) -> PyResult<Self> {
        engine::corpus::parse_thread_record(record, 1).map(PyThread).map_err(err)
    }

    #[getter]
    fn id(&self) -> u64 {
        self.0.id
    }

    #[getter]
    fn title(&self) -> String {
        self.0.title.clone()
    }

    #[getter]
    fn tags(&self) -> Vec<String> {
        self.0.tags.clone()
    }

    #[getter]
    fn paragraphs(&self) -> Vec<String> {
        self.0.paragraphs.clone()
    }

    #[getter]
    fn code_snippets(&self) -> Vec<String> {
        self.0.code_snippets.clone()
    }

    fn __repr__(&self) -> String {
        format!("Thread(id={}, title={:?})", self.0.id, self.0.title)
    }
}

#[pyclass(name = "ApiMethod", frozen, from_py_object)]
#[derive(Clone)]
struct PyApiMethod(engine::ApiMethod);

#[pymethods]
impl PyApiMethod {
    #[new]
    #[pyo3(signature = (fqn, comment = String::new(), impl_code = String::new()))]
    fn new(fqn: String, comment: String, impl_code: String) -> PyResult<Self> {
        engine::ApiMethod::new(fqn, comment, impl_code).map(PyApiMethod).map_err(err)
    }

    #[getter]
    fn fqn(&self) -> String {
        self.0.fqn.clone()
    }

    #[getter]
    fn simple_name(&self) -> String {
        self.0.simple_name().to_string()
    }

    #[getter]
    fn type_name(&self) -> String {
        self.0.type_name().to_string()
    }

    fn __repr__(&self) -> String {
        format!("ApiMethod({:?})", self.0.fqn)
    }
}

#[pyclass(name = "Model", frozen)]
struct PyModel(MlpModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        MlpModel::load(&path).map(PyModel).map_err(err)
    }

    #[getter]
    fn hidden_width(&self) -> usize {
        self.0.hidden_width()
    }

    /// Relevance probability of one 1536-dimensional pair embedding.
    fn predict(&self, vector: Vec<f64>) -> PyResult<f64> {
        self.0.predict(&vector).map_err(err)
    }
}

/// `(simple_name, type_name)` of a fully-qualified method name.
#[pyfunction]
fn split_fqn(fqn: &str) -> PyResult<(String, String)> {
    engine::corpus::split_fqn(fqn)
        .map(|(t, m)| (t.to_string(), m.to_string()))
        .map_err(err)
}

#[pyfunction]
fn tokenize_identifiers(text: &str) -> Vec<String> {
    engine::typescope::tokens::tokenize_identifiers(text)
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// `(name, origin)` pairs of the possible types found in code snippets.
#[pyfunction]
fn extract_ptypes(snippets: Vec<String>) -> Vec<(String, String)> {
    engine::typescope::extract_ptypes(&snippets)
        .into_iter()
        .map(|p| {
            let origin = format!("{:?}", p.origin);
            (p.name, origin)
        })
        .collect()
}

#[pyfunction]
fn thread_syntactic_score(thread: &PyThread, api: &PyApiMethod, candidates: Vec<PyApiMethod>) -> PyResult<f64> {
    let cands: Vec<engine::ApiMethod> = candidates.into_iter().map(|c| c.0).collect();
    engine::typescope::thread_syntactic_score(&thread.0, &api.0, &cands).map_err(err)
}

/// Rendered 512-token pair as strings.
#[pyfunction]
fn build_pair(first: &str, second: &str) -> Vec<String> {
    engine::embedding::build_pair(first, second)
        .rendered
        .iter()
        .map(ToString::to_string)
        .collect()
}

#[pyfunction]
#[pyo3(signature = (first, second, seed = engine::embedding::DEFAULT_HASH_SEED))]
fn hash_embed(first: &str, second: &str, seed: u64) -> Vec<f64> {
    engine::embedding::HashEmbedder::new(seed).hash_embed(&engine::embedding::build_pair(first, second))
}

#[pyfunction]
fn joint_score(a: f64, b: f64, x: f64) -> PyResult<f64> {
    engine::fusion::joint_score(a, b, x).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (c, t = engine::fusion::DEFAULT_THRESHOLD))]
fn classify_thread(c: f64, t: f64) -> bool {
    engine::fusion::classify_thread(c, t)
}

/// `(precision, recall, f1)` from confusion counts.
#[pyfunction]
fn prf1(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let m = engine::eval::prf1(ConfusionCounts::new(tp, fp, fn_));
    (m.precision, m.recall, m.f1)
}

/// Writes a synthetic corpus with a matching `config.toml` into `out_dir`
/// and returns the config path.
#[pyfunction]
#[pyo3(signature = (out_dir, n_apis = 8, n_threads_per_api = 12, ambiguity = 1, syntactic_signal = 0.7, semantic_signal = 0.7, seed = 0))]
fn generate_synthetic(
    out_dir: PathBuf,
    n_apis: usize,
    n_threads_per_api: usize,
    ambiguity: usize,
    syntactic_signal: f64,
    semantic_signal: f64,
    seed: u64,
) -> PyResult<PathBuf> {
    let spec = engine::synth::SynthSpec {
        n_apis,
        n_threads_per_api,
        ambiguity,
        syntactic_signal,
        semantic_signal,
        seed,
    };
    engine::runner::write_synthetic(&spec, &out_dir).map_err(err)?;
    Ok(out_dir.join("config.toml"))
}

/// Trains and tunes; returns `(x, model_path, tuned_config_path)`.
#[pyfunction]
fn train(config_path: PathBuf) -> PyResult<(f64, PathBuf, PathBuf)> {
    let cfg = RunConfig::load(&config_path).map_err(err)?;
    let o = engine::runner::train(&cfg).map_err(err)?;
    Ok((o.tune.x, o.model_path, o.config_path))
}

/// Macro F1 of `(fused, syntactic_only, semantic_only)` on the test split.
#[pyfunction]
fn evaluate(config_path: PathBuf) -> PyResult<(f64, f64, f64)> {
    let cfg = RunConfig::load(&config_path).map_err(err)?;
    let r = engine::runner::eval(&cfg).map_err(err)?;
    Ok((r.fused.avg_f1, r.syntactic_only.avg_f1, r.semantic_only.avg_f1))
}

/// `(thread_id, a, b, c, relevant)`.
type HitRow = (u64, f64, Option<f64>, f64, bool);

/// Hit rows sorted by joint score.
#[pyfunction]
fn search(config_path: PathBuf, fqn: &str) -> PyResult<Vec<HitRow>> {
    let cfg = RunConfig::load(&config_path).map_err(err)?;
    let (_, hits) = engine::runner::search(&cfg, fqn).map_err(err)?;
    Ok(hits.into_iter().map(|h| (h.thread_id, h.a, h.b, h.c, h.relevant)).collect())
}

#[pymodule]
fn apiscope(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyThread>()?;
    m.add_class::<PyApiMethod>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(split_fqn, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize_identifiers, m)?)?;
    m.add_function(wrap_pyfunction!(extract_ptypes, m)?)?;
    m.add_function(wrap_pyfunction!(thread_syntactic_score, m)?)?;
    m.add_function(wrap_pyfunction!(build_pair, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(joint_score, m)?)?;
    m.add_function(wrap_pyfunction!(classify_thread, m)?)?;
    m.add_function(wrap_pyfunction!(prf1, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    Ok(())
}
