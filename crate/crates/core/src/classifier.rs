//! Relevance classifier: one hidden ReLU layer and a sigmoid output over
//! 1536-dimensional relevance embeddings.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{RelevanceEmbedding, RELEVANCE_DIM};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"APIRMLP\0";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8;
const MAX_HIDDEN: u64 = 1 << 16;
const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_width: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 6,
            learning_rate: 1e-3,
            batch_size: 64,
            seed: 0,
            hidden_width: 128,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self, allow_zero_epochs: bool) -> Result<()> {
        if self.epochs == 0 && !allow_zero_epochs {
            return Err(Error::contract("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::contract("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.hidden_width == 0 {
            return Err(Error::contract("batch size and hidden width must be positive"));
        }
        if self.hidden_width as u64 > MAX_HIDDEN {
            return Err(Error::contract(format!("hidden width above {MAX_HIDDEN}")));
        }
        Ok(())
    }
}

/// Two fully connected layers. `w1` is stored input-major: the weights
/// leaving input `i` are `w1[i * hidden..(i + 1) * hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    hidden: usize,
    seed: u64,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn bce(p: f64, y: f64) -> f64 {
    -(y * p.max(PROB_CLAMP).ln() + (1.0 - y) * (1.0 - p).max(PROB_CLAMP).ln())
}

impl MlpModel {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
    pub fn init(hidden: usize, seed: u64, rng: &mut impl Rng) -> Self {
        let b_in = 1.0 / (RELEVANCE_DIM as f64).sqrt();
        let b_hidden = 1.0 / (hidden as f64).sqrt();
        let mut draw = |n: usize, bound: f64| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let w1 = draw(RELEVANCE_DIM * hidden, b_in);
        let b1 = draw(hidden, b_in);
        let w2 = draw(hidden, b_hidden);
        let b2 = draw(1, b_hidden)[0];
        MlpModel { hidden, seed, w1, b1, w2, b2 }
    }

    pub fn zeros(hidden: usize) -> Self {
        MlpModel {
            hidden,
            seed: 0,
            w1: vec![0.0; RELEVANCE_DIM * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// All parameters flattened in file order: W1, b1, W2, b2.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let (w1, rest) = params.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, rest) = rest.split_at(self.hidden);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
        Ok(())
    }

    fn hidden_pre(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b1);
        let h = self.hidden;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w1[i * h..(i + 1) * h];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    fn output_logit(&self, hidden_pre: &[f64]) -> f64 {
        self.b2
            + hidden_pre
                .iter()
                .zip(&self.w2)
                .map(|(z, w)| z.max(0.0) * w)
                .sum::<f64>()
    }

    /// Probability in (0, 1) that the embedding comes from a relevant thread.
    pub fn predict(&self, v: &[f64]) -> Result<f64> {
        if v.len() != RELEVANCE_DIM {
            return Err(Error::contract(format!(
                "expected a {RELEVANCE_DIM}-dimensional vector, got {}",
                v.len()
            )));
        }
        let mut z = vec![0.0; self.hidden];
        self.hidden_pre(v, &mut z);
        Ok(sigmoid(self.output_logit(&z)))
    }

    /// Mean binary cross-entropy over the examples and its gradient, laid
    /// out like [`MlpModel::parameters`].
    pub fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = Gradient::zeros(self.hidden);
        let loss = self.accumulate(xs.iter().copied().zip(ys.iter().copied()), &mut grad);
        let n = xs.len().max(1) as f64;
        grad.scale(1.0 / n);
        let mut flat = grad.w1;
        flat.extend(grad.b1);
        flat.extend(grad.w2);
        flat.push(grad.b2);
        (loss / n, flat)
    }

    /// Adds the summed gradient of the batch into `grad`; returns the summed loss.
    fn accumulate<'a>(&self, batch: impl Iterator<Item = (&'a [f64], f64)>, grad: &mut Gradient) -> f64 {
        let h = self.hidden;
        let mut z = vec![0.0; h];
        let mut delta1 = vec![0.0; h];
        let mut total = 0.0;
        for (x, y) in batch {
            self.hidden_pre(x, &mut z);
            let p = sigmoid(self.output_logit(&z));
            total += bce(p, y);
            let delta = p - y;
            grad.b2 += delta;
            for j in 0..h {
                let a = z[j].max(0.0);
                grad.w2[j] += delta * a;
                delta1[j] = if z[j] > 0.0 { delta * self.w2[j] } else { 0.0 };
                grad.b1[j] += delta1[j];
            }
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut grad.w1[i * h..(i + 1) * h];
                for (g, d) in row.iter_mut().zip(&delta1) {
                    *g += xi * d;
                }
            }
        }
        total
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.hidden as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for p in self.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err("file shorter than header".into());
        }
        if &bytes[..8] != MAGIC {
            return Err("not a relevance model file".into());
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != FORMAT_VERSION {
            return Err(format!("unsupported format version {version}"));
        }
        let hidden = u64_at(12);
        if hidden == 0 || hidden > MAX_HIDDEN {
            return Err(format!("invalid hidden width {hidden}"));
        }
        let hidden = hidden as usize;
        let seed = u64_at(20);
        let mut model = MlpModel::zeros(hidden);
        model.seed = seed;
        let expected = HEADER_LEN + 8 * model.parameter_count();
        if bytes.len() != expected {
            return Err(format!("expected {expected} bytes, found {}", bytes.len()));
        }
        let params: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err("non-finite weight".into());
        }
        model.set_parameters(&params).map_err(|e| e.to_string())?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::ModelLoad {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_bytes(&bytes).map_err(|message| Error::ModelLoad {
            path: path.to_path_buf(),
            message,
        })
    }
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    MlpModel::load(path)
}

struct Gradient {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl Gradient {
    fn zeros(hidden: usize) -> Self {
        Gradient {
            w1: vec![0.0; RELEVANCE_DIM * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    fn reset(&mut self) {
        self.w1.iter_mut().for_each(|g| *g = 0.0);
        self.b1.iter_mut().for_each(|g| *g = 0.0);
        self.w2.iter_mut().for_each(|g| *g = 0.0);
        self.b2 = 0.0;
    }

    fn scale(&mut self, s: f64) {
        self.w1.iter_mut().for_each(|g| *g *= s);
        self.b1.iter_mut().for_each(|g| *g *= s);
        self.w2.iter_mut().for_each(|g| *g *= s);
        self.b2 *= s;
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(
    model: &mut MlpModel,
    grad: &Gradient,
    lr: f64,
    adam: Option<&mut AdamState>,
) {
    let params = [
        (&mut model.w1[..], &grad.w1[..]),
        (&mut model.b1[..], &grad.b1[..]),
        (&mut model.w2[..], &grad.w2[..]),
        (std::slice::from_mut(&mut model.b2), std::slice::from_ref(&grad.b2)),
    ];
    match adam {
        None => {
            for (p, g) in params {
                for (p, g) in p.iter_mut().zip(g) {
                    *p -= lr * g;
                }
            }
        }
        Some(state) => {
            state.step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(state.step);
            let c2 = 1.0 - ADAM_BETA2.powi(state.step);
            let mut k = 0;
            for (p, g) in params {
                for (p, &g) in p.iter_mut().zip(g) {
                    let m = &mut state.m[k];
                    let v = &mut state.v[k];
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                    k += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub positives: usize,
    pub negatives: usize,
    /// Example count after minority up-sampling.
    pub resampled_total: usize,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn labeled(examples: &[RelevanceEmbedding]) -> Result<Vec<f64>> {
    examples
        .iter()
        .map(|e| {
            if e.vector.len() != RELEVANCE_DIM {
                return Err(Error::contract(format!(
                    "embedding for thread {} has {} dimensions",
                    e.thread_id,
                    e.vector.len()
                )));
            }
            e.label
                .map(|l| if l { 1.0 } else { 0.0 })
                .ok_or_else(|| Error::contract(format!("unlabeled embedding for thread {}", e.thread_id)))
        })
        .collect()
}

/// Indices of all examples plus minority-class draws (with replacement) until
/// both classes have the majority count.
pub fn upsample_indices(labels: &[f64], rng: &mut impl Rng) -> Vec<usize> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0.5).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] <= 0.5).collect();
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let (minority, deficit) = if pos.len() < neg.len() {
        (&pos, neg.len() - pos.len())
    } else {
        (&neg, pos.len() - neg.len())
    };
    if !minority.is_empty() {
        order.extend((0..deficit).map(|_| minority[rng.random_range(0..minority.len())]));
    }
    order
}

/// Trains a fresh model: seeded initialization, minority up-sampling, then
/// `config.epochs` epochs of mini-batch descent on binary cross-entropy.
pub fn train(examples: &[RelevanceEmbedding], config: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    config.validate(false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::init(config.hidden_width, config.seed, &mut rng);
    let report = fit(&mut model, examples, config, &mut rng)?;
    Ok((model, report))
}

/// Further epochs on an existing model. Zero epochs leaves it untouched.
pub fn continue_training(
    model: &mut MlpModel,
    examples: &[RelevanceEmbedding],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate(true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    fit(model, examples, config, &mut rng)
}

fn fit(
    model: &mut MlpModel,
    examples: &[RelevanceEmbedding],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainReport> {
    let labels = labeled(examples)?;
    let positives = labels.iter().filter(|&&y| y > 0.5).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    let mut order = upsample_indices(&labels, rng);
    let mut grad = Gradient::zeros(model.hidden);
    let mut adam = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adam => Some(AdamState {
            m: vec![0.0; model.parameter_count()],
            v: vec![0.0; model.parameter_count()],
            step: 0,
        }),
    };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.reset();
            let loss = model.accumulate(
                batch.iter().map(|&i| (examples[i].vector.as_slice(), labels[i])),
                &mut grad,
            );
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss;
            grad.scale(1.0 / batch.len() as f64);
            apply_update(model, &grad, config.learning_rate, adam.as_mut());
        }
        let mean = epoch_loss / order.len() as f64;
        if !mean.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainReport {
        positives,
        negatives,
        resampled_total: order.len(),
        epoch_losses,
    })
}

pub fn predict(model: &MlpModel, v: &[f64]) -> Result<f64> {
    model.predict(v)
}

/// Mean predicted probability over a thread's relevance embeddings.
pub fn thread_semantic_score(model: &MlpModel, embs: &[RelevanceEmbedding]) -> Result<f64> {
    if embs.is_empty() {
        return Err(Error::contract("semantic score of a thread needs at least one embedding"));
    }
    let mut sum = 0.0;
    for e in embs {
        sum += model.predict(&e.vector)?;
    }
    Ok(sum / embs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(vector: Vec<f64>, label: bool) -> RelevanceEmbedding {
        RelevanceEmbedding {
            vector,
            thread_id: 1,
            api_fqn: "a.b.C.m".into(),
            label: Some(label),
        }
    }

    fn tiny_model() -> MlpModel {
        let mut m = MlpModel::zeros(2);
        // Input 0 feeds hidden 0, input 1 feeds hidden 1.
        m.w1[0] = 0.5; // (i=0, j=0)
        m.w1[1] = -1.0; // (i=0, j=1)
        m.w1[2] = 0.25; // (i=1, j=0)
        m.w1[3] = 2.0; // (i=1, j=1)
        m.b1 = vec![0.1, -0.2];
        m.w2 = vec![1.5, -0.75];
        m.b2 = 0.05;
        m
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = MlpModel::zeros(4);
        assert_eq!(m.predict(&vec![0.0; RELEVANCE_DIM]).unwrap(), 0.5);
    }

    #[test]
    fn hand_computed_prediction() {
        let mut v = vec![0.0; RELEVANCE_DIM];
        v[0] = 1.0;
        v[1] = 0.4;
        // hidden pre: j0 = 0.1 + 0.5*1 + 0.25*0.4 = 0.7; j1 = -0.2 - 1.0 + 0.8 = -0.4 -> relu 0
        // logit = 0.05 + 1.5*0.7 = 1.1
        let expected = 1.0 / (1.0 + (-1.1f64).exp());
        assert!((tiny_model().predict(&v).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn wrong_dimension_is_contract_error() {
        assert!(matches!(MlpModel::zeros(2).predict(&[0.0; 3]), Err(Error::Contract(_))));
    }

    #[test]
    fn output_strictly_inside_unit_interval() {
        let m = tiny_model();
        for scale in [-30.0, -5.0, 0.0, 5.0, 30.0] {
            let p = m.predict(&vec![scale; RELEVANCE_DIM]).unwrap();
            assert!(p > 0.0 && p < 1.0, "{p}");
        }
    }

    #[test]
    fn semantic_score_is_mean() {
        // Logit ln(p/(1-p)) through b2 alone gives exact probabilities.
        let mut m = MlpModel::zeros(1);
        let z = vec![0.0; RELEVANCE_DIM];
        m.b2 = (0.25f64 / 0.75).ln();
        let e = vec![emb(z.clone(), true), emb(z.clone(), false)];
        assert!((thread_semantic_score(&m, &e).unwrap() - 0.25).abs() < 1e-12);
        assert!(thread_semantic_score(&m, &[]).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let data = vec![emb(vec![0.0; RELEVANCE_DIM], true); 3];
        assert!(matches!(
            train(&data, &TrainConfig::default()),
            Err(Error::SingleClass { positives: 3, negatives: 0 })
        ));
    }

    #[test]
    fn unlabeled_rejected() {
        let mut e = emb(vec![0.0; RELEVANCE_DIM], true);
        e.label = None;
        assert!(train(&[e], &TrainConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let data = vec![emb(vec![0.0; RELEVANCE_DIM], true), emb(vec![0.0; RELEVANCE_DIM], false)];
        assert!(train(&data, &bad).is_err());
        let bad_lr = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&data, &bad_lr).is_err());
    }

    #[test]
    fn upsampling_balances_without_discarding() {
        let mut labels = vec![1.0; 3];
        labels.extend(vec![0.0; 10]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let order = upsample_indices(&labels, &mut rng);
        assert_eq!(order.len(), 20);
        for i in 0..labels.len() {
            assert!(order.contains(&i));
        }
        let pos = order.iter().filter(|&&i| labels[i] > 0.5).count();
        assert_eq!(pos, 10);

        let balanced = vec![1.0, 0.0, 1.0, 0.0];
        assert_eq!(upsample_indices(&balanced, &mut rng), vec![0, 1, 2, 3]);
    }

    #[test]
    fn large_corpus_counts_resample() {
        let mut labels = vec![1.0; 9_934];
        labels.extend(vec![0.0; 47_756]);
        let order = upsample_indices(&labels, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(order.iter().filter(|&&i| labels[i] > 0.5).count(), 47_756);
        assert_eq!(order.len(), 2 * 47_756);
    }

    #[test]
    fn bytes_round_trip_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpModel::init(3, 3, &mut rng);
        let bytes = m.to_bytes();
        assert_eq!(MlpModel::from_bytes(&bytes).unwrap(), m);
        assert!(MlpModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(MlpModel::from_bytes(&wrong_version).is_err());
        let mut wrong_magic = bytes;
        wrong_magic[0] = b'X';
        assert!(MlpModel::from_bytes(&wrong_magic).is_err());
    }
}
