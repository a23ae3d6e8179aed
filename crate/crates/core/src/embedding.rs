//! Text/code pair rendering and relevance embeddings.
//!
//! Every pair is rendered as `<cls> first <sep> second <eos>` with the first
//! side cut or padded to 254 tokens and the second to 255, so a rendered pair
//! is always 512 tokens long. A thread with `m` paragraphs and `n` snippets
//! yields `m * n` thread pairs (a text-only thread uses one empty snippet).
//! Each thread-pair vector is concatenated with the method-pair vector built
//! from the API's comment and implementation code.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{ApiMethod, Thread};
use crate::error::{Error, Result};
use crate::typescope::tokens::lexemes;

pub const FIRST_BUDGET: usize = 254;
pub const SECOND_BUDGET: usize = 255;
pub const PAIR_LEN: usize = FIRST_BUDGET + SECOND_BUDGET + 3;
pub const EMBED_DIM: usize = 768;
pub const RELEVANCE_DIM: usize = 2 * EMBED_DIM;

pub const SEP_POSITION: usize = 1 + FIRST_BUDGET;
pub const EOS_POSITION: usize = PAIR_LEN - 1;

/// Seed of the feature hash used by [`HashEmbedder::default`].
pub const DEFAULT_HASH_SEED: u64 = 0x5eed_a91c_0de5_7a11;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PairToken {
    Cls,
    Sep,
    Eos,
    Pad,
    Word(String),
}

impl fmt::Display for PairToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairToken::Cls => f.write_str("<cls>"),
            PairToken::Sep => f.write_str("<sep>"),
            PairToken::Eos => f.write_str("<eos>"),
            PairToken::Pad => f.write_str("<pad>"),
            PairToken::Word(w) => f.write_str(w),
        }
    }
}

pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Identifiers plus single punctuation characters; whitespace is dropped.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexemeTokenizer;

impl Tokenizer for LexemeTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        lexemes(text).into_iter().map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairText {
    pub first: String,
    pub second: String,
    pub rendered: Vec<PairToken>,
}

impl PairText {
    pub fn first_tokens(&self) -> &[PairToken] {
        &self.rendered[1..SEP_POSITION]
    }

    pub fn second_tokens(&self) -> &[PairToken] {
        &self.rendered[SEP_POSITION + 1..EOS_POSITION]
    }

    pub fn is_all_padding(&self) -> bool {
        self.first_tokens()
            .iter()
            .chain(self.second_tokens())
            .all(|t| *t == PairToken::Pad)
    }
}

fn fit(tokens: Vec<String>, budget: usize, out: &mut Vec<PairToken>) {
    let kept = tokens.len().min(budget);
    out.extend(tokens.into_iter().take(budget).map(PairToken::Word));
    out.extend(std::iter::repeat_n(PairToken::Pad, budget - kept));
}

pub fn build_pair_with(first: &str, second: &str, tokenizer: &dyn Tokenizer) -> PairText {
    let mut rendered = Vec::with_capacity(PAIR_LEN);
    rendered.push(PairToken::Cls);
    fit(tokenizer.tokenize(first), FIRST_BUDGET, &mut rendered);
    rendered.push(PairToken::Sep);
    fit(tokenizer.tokenize(second), SECOND_BUDGET, &mut rendered);
    rendered.push(PairToken::Eos);
    debug_assert_eq!(rendered.len(), PAIR_LEN);
    PairText {
        first: first.to_string(),
        second: second.to_string(),
        rendered,
    }
}

pub fn build_pair(first: &str, second: &str) -> PairText {
    build_pair_with(first, second, &LexemeTokenizer)
}

/// Paragraph-major cartesian product of paragraphs and snippets.
pub fn thread_pairs(thread: &Thread) -> Vec<PairText> {
    const EMPTY: &[String] = &[String::new()];
    let snippets: &[String] = if thread.code_snippets.is_empty() {
        EMPTY
    } else {
        &thread.code_snippets
    };
    thread
        .paragraphs
        .iter()
        .flat_map(|p| snippets.iter().map(move |c| build_pair(p, c)))
        .collect()
}

pub fn method_pair(api: &ApiMethod) -> PairText {
    build_pair(&api.comment, &api.impl_code)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderFailure {
    /// Index of the failing pair within a batch, when known.
    pub index: Option<usize>,
    pub message: String,
}

impl ProviderFailure {
    pub fn new(message: impl Into<String>) -> Self {
        ProviderFailure {
            index: None,
            message: message.into(),
        }
    }
}

/// Turns a rendered pair into a 768-dimensional vector.
pub trait EmbeddingProvider {
    fn embed(&self, pair: &PairText) -> Result<Vec<f64>, ProviderFailure>;

    fn embed_batch(&self, pairs: &[PairText]) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                self.embed(p).map_err(|mut e| {
                    e.index.get_or_insert(i);
                    e
                })
            })
            .collect()
    }

    /// Whether concurrent callers may share this provider without queuing.
    fn supports_concurrent_requests(&self) -> bool {
        true
    }
}

/// Deterministic feature-hashing embedder.
///
/// Unigrams and within-side bigrams of the non-padding tokens are hashed into
/// signed buckets; features are tagged with their side so swapping the two
/// texts changes the vector. The result is L2-normalized, and an all-padding
/// pair maps to the zero vector.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            seed: DEFAULT_HASH_SEED,
        }
    }
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

impl HashEmbedder {
    pub fn new(seed: u64) -> Self {
        HashEmbedder { seed }
    }

    fn feature_hash(&self, side: u8, words: &[&str]) -> u64 {
        let mut h = self.seed ^ 0xcbf2_9ce4_8422_2325;
        let mut feed = |b: u8| {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        };
        feed(side);
        for (i, w) in words.iter().enumerate() {
            if i > 0 {
                feed(0x1f);
            }
            w.bytes().for_each(&mut feed);
        }
        mix64(h)
    }

    fn add_side(&self, side: u8, tokens: &[PairToken], acc: &mut [f64]) {
        let words: Vec<&str> = tokens
            .iter()
            .filter_map(|t| match t {
                PairToken::Word(w) => Some(w.as_str()),
                _ => None,
            })
            .collect();
        let mut add = |feature: &[&str], weight: f64| {
            let h = self.feature_hash(side, feature);
            let bucket = (h % EMBED_DIM as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign * weight;
        };
        for w in &words {
            add(std::slice::from_ref(w), 1.0);
        }
        for pair in words.windows(2) {
            add(pair, 0.5);
        }
    }

    pub fn hash_embed(&self, pair: &PairText) -> Vec<f64> {
        let mut v = vec![0.0; EMBED_DIM];
        self.add_side(1, pair.first_tokens(), &mut v);
        self.add_side(2, pair.second_tokens(), &mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, pair: &PairText) -> Result<Vec<f64>, ProviderFailure> {
        Ok(self.hash_embed(pair))
    }
}

/// Request object of the provider wire protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub first: String,
    pub second: String,
    pub max_first: usize,
    pub max_second: usize,
}

impl From<&PairText> for EmbedRequest {
    fn from(pair: &PairText) -> Self {
        EmbedRequest {
            first: pair.first.clone(),
            second: pair.second.clone(),
            max_first: FIRST_BUDGET,
            max_second: SECOND_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vector: Vec<f64>,
}

fn check_vector(v: &[f64]) -> Result<(), String> {
    if v.len() != EMBED_DIM {
        return Err(format!("expected {EMBED_DIM} values, got {}", v.len()));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(format!("non-finite value at index {i}"));
    }
    Ok(())
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

/// Client for an external encoder speaking line-delimited JSON over TCP.
///
/// A single request is one `EmbedRequest` object per line; a batch is one JSON
/// array of requests answered by one array of responses.
pub struct ExternalProvider {
    address: String,
    conn: Mutex<Connection>,
}

impl ExternalProvider {
    pub fn connect(address: &str) -> Result<Self> {
        let stream = TcpStream::connect(address)
            .map_err(|e| Error::Connection(format!("{address}: {e}")))?;
        let writer = stream
            .try_clone()
            .map_err(|e| Error::Connection(format!("{address}: {e}")))?;
        Ok(ExternalProvider {
            address: address.to_string(),
            conn: Mutex::new(Connection {
                reader: BufReader::new(stream),
                writer,
            }),
        })
    }

    pub fn address(&self) -> &str {
        &self.address
    }

    fn round_trip(&self, body: &str) -> Result<String, ProviderFailure> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| ProviderFailure::new("connection lock poisoned"))?;
        let io = |e: std::io::Error| ProviderFailure::new(format!("{}: {e}", self.address));
        conn.writer.write_all(body.as_bytes()).map_err(io)?;
        conn.writer.write_all(b"\n").map_err(io)?;
        conn.writer.flush().map_err(io)?;
        let mut line = String::new();
        let n = conn.reader.read_line(&mut line).map_err(io)?;
        if n == 0 {
            return Err(ProviderFailure::new(format!("{}: connection closed", self.address)));
        }
        Ok(line)
    }
}

impl EmbeddingProvider for ExternalProvider {
    fn embed(&self, pair: &PairText) -> Result<Vec<f64>, ProviderFailure> {
        let body = serde_json::to_string(&EmbedRequest::from(pair))
            .map_err(|e| ProviderFailure::new(e.to_string()))?;
        let line = self.round_trip(&body)?;
        let resp: EmbedResponse = serde_json::from_str(&line)
            .map_err(|e| ProviderFailure::new(format!("bad response: {e}")))?;
        check_vector(&resp.vector).map_err(ProviderFailure::new)?;
        Ok(resp.vector)
    }

    fn embed_batch(&self, pairs: &[PairText]) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        let requests: Vec<EmbedRequest> = pairs.iter().map(EmbedRequest::from).collect();
        let body = serde_json::to_string(&requests).map_err(|e| ProviderFailure::new(e.to_string()))?;
        let line = self.round_trip(&body)?;
        let resp: Vec<EmbedResponse> = serde_json::from_str(&line)
            .map_err(|e| ProviderFailure::new(format!("bad batch response: {e}")))?;
        if resp.len() != pairs.len() {
            return Err(ProviderFailure::new(format!(
                "batch of {} answered with {} vectors",
                pairs.len(),
                resp.len()
            )));
        }
        resp.into_iter()
            .enumerate()
            .map(|(i, r)| {
                check_vector(&r.vector).map_err(|message| ProviderFailure {
                    index: Some(i),
                    message,
                })?;
                Ok(r.vector)
            })
            .collect()
    }

    fn supports_concurrent_requests(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceEmbedding {
    pub vector: Vec<f64>,
    pub thread_id: u64,
    pub api_fqn: String,
    pub label: Option<bool>,
}

pub fn concat(thread_vector: &[f64], method_vector: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(thread_vector.len() + method_vector.len());
    v.extend_from_slice(thread_vector);
    v.extend_from_slice(method_vector);
    v
}

fn provider_error(thread_id: u64, failure: ProviderFailure) -> Error {
    Error::Provider {
        thread_id,
        pair_index: failure.index.unwrap_or(0),
        message: failure.message,
    }
}

/// Thread-pair vectors of one thread, in [`thread_pairs`] order.
pub fn embed_thread(thread: &Thread, provider: &dyn EmbeddingProvider) -> Result<Vec<Vec<f64>>> {
    let pairs = thread_pairs(thread);
    let vectors = provider
        .embed_batch(&pairs)
        .map_err(|f| provider_error(thread.id, f))?;
    for (i, v) in vectors.iter().enumerate() {
        check_vector(v).map_err(|message| Error::Provider {
            thread_id: thread.id,
            pair_index: i,
            message,
        })?;
    }
    Ok(vectors)
}

pub fn embed_method(api: &ApiMethod, provider: &dyn EmbeddingProvider) -> Result<Vec<f64>> {
    let v = provider
        .embed(&method_pair(api))
        .map_err(|f| Error::Contract(format!("embedding method `{}`: {}", api.fqn, f.message)))?;
    check_vector(&v).map_err(|m| Error::Contract(format!("embedding method `{}`: {m}", api.fqn)))?;
    Ok(v)
}

/// One 1536-dimensional embedding per thread pair, each ending in the same
/// method vector.
pub fn relevance_embeddings(
    thread: &Thread,
    api: &ApiMethod,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<RelevanceEmbedding>> {
    let method = embed_method(api, provider)?;
    let threads = embed_thread(thread, provider)?;
    Ok(threads
        .iter()
        .map(|t| RelevanceEmbedding {
            vector: concat(t, &method),
            thread_id: thread.id,
            api_fqn: api.fqn.clone(),
            label: None,
        })
        .collect())
}
