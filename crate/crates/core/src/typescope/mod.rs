//! Syntactic relevance by type scoping.
//!
//! A candidate API earns one point for each scope in which its declaring type
//! shows up: the mention prefix, the thread's textual tokens, the raw code
//! tokens, and once per matching possible type parsed out of the code. Raw
//! candidate scores are min-max normalized over the candidate set and the
//! query API's normalized value is the thread's syntactic score.

pub mod ptypes;
pub mod tokens;

use std::collections::HashSet;

use serde::Serialize;

use crate::corpus::{ApiMethod, Thread};
use crate::error::{Error, Result};
use tokens::{identifier_spans, is_ident_byte, tokenize_identifiers};

pub use ptypes::{extract_ptypes, PType, PTypeOrigin};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MentionLocation {
    pub paragraph: usize,
    pub token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiMention {
    pub thread_id: u64,
    pub location: MentionLocation,
    pub prefix: Option<String>,
    pub surface: String,
}

/// Finds whole-token occurrences of `simple_name` in the thread's paragraphs.
/// A dotted identifier chain directly before the name (`a.b.Type.name`) is
/// recorded as the mention prefix.
pub fn extract_mentions(thread: &Thread, simple_name: &str) -> Vec<ApiMention> {
    let mut out = Vec::new();
    for (p_idx, paragraph) in thread.paragraphs.iter().enumerate() {
        let bytes = paragraph.as_bytes();
        for (t_idx, (offset, token)) in identifier_spans(paragraph).into_iter().enumerate() {
            if token != simple_name {
                continue;
            }
            let prefix_start = dotted_chain_start(bytes, offset);
            let (prefix, surface) = match prefix_start {
                Some(start) => (
                    Some(paragraph[start..offset - 1].to_string()),
                    paragraph[start..offset + token.len()].to_string(),
                ),
                None => (None, token.to_string()),
            };
            out.push(ApiMention {
                thread_id: thread.id,
                location: MentionLocation {
                    paragraph: p_idx,
                    token: t_idx,
                },
                prefix,
                surface,
            });
        }
    }
    out
}

/// If `text[..at]` ends with `ident(.ident)*.`, returns where that chain starts.
fn dotted_chain_start(bytes: &[u8], at: usize) -> Option<usize> {
    if at == 0 || bytes[at - 1] != b'.' {
        return None;
    }
    let mut start = None;
    let mut pos = at - 1; // index of a '.'
    loop {
        let seg_end = pos;
        let mut seg_start = seg_end;
        while seg_start > 0 && is_ident_byte(bytes[seg_start - 1]) {
            seg_start -= 1;
        }
        if seg_start == seg_end {
            break;
        }
        start = Some(seg_start);
        if seg_start > 0 && bytes[seg_start - 1] == b'.' {
            pos = seg_start - 1;
        } else {
            break;
        }
    }
    start
}

/// Token sets of one thread, computed once and shared by all candidates.
#[derive(Debug, Clone)]
pub struct ThreadScope {
    pub textual_tokens: HashSet<String>,
    pub code_tokens: HashSet<String>,
    pub ptypes: Vec<PType>,
}

impl ThreadScope {
    pub fn new(thread: &Thread) -> Self {
        Self::from_parts(thread.textual_parts(), &thread.code_snippets)
    }

    pub fn from_parts<'a, S: AsRef<str>>(
        textual: impl IntoIterator<Item = &'a str>,
        code_snippets: &[S],
    ) -> Self {
        let textual_tokens = textual
            .into_iter()
            .flat_map(tokenize_identifiers)
            .map(str::to_string)
            .collect();
        let code_tokens = code_snippets
            .iter()
            .flat_map(|s| tokenize_identifiers(s.as_ref()))
            .map(str::to_string)
            .collect();
        ThreadScope {
            textual_tokens,
            code_tokens,
            ptypes: extract_ptypes(code_snippets),
        }
    }
}

/// Per-scope points for one (mention, candidate) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ScopeBreakdown {
    pub mention: u32,
    pub text: u32,
    pub code_tokens: u32,
    pub code_types: u32,
}

impl ScopeBreakdown {
    pub fn total(&self) -> u32 {
        self.mention + self.text + self.code_tokens + self.code_types
    }
}

fn prefix_ends_with_type(prefix: &str, type_name: &str) -> bool {
    prefix == type_name
        || prefix
            .strip_suffix(type_name)
            .is_some_and(|head| head.ends_with('.'))
}

pub fn score_breakdown(mention: &ApiMention, scope: &ThreadScope, candidate: &ApiMethod) -> ScopeBreakdown {
    let ty = candidate.type_name();
    ScopeBreakdown {
        mention: mention
            .prefix
            .as_deref()
            .is_some_and(|p| prefix_ends_with_type(p, ty)) as u32,
        text: scope.textual_tokens.contains(ty) as u32,
        code_tokens: scope.code_tokens.contains(ty) as u32,
        code_types: scope.ptypes.iter().filter(|p| p.name == ty).count() as u32,
    }
}

/// Type-scoping score of one candidate for one mention.
///
/// `thread_text` is the thread's textual content (title, paragraphs, tags).
pub fn score_candidate<S: AsRef<str>>(
    mention: &ApiMention,
    ptypes: &[PType],
    candidate: &ApiMethod,
    thread_text: &str,
    code_snippets: &[S],
) -> u32 {
    let scope = ThreadScope {
        textual_tokens: tokenize_identifiers(thread_text)
            .into_iter()
            .map(str::to_string)
            .collect(),
        code_tokens: code_snippets
            .iter()
            .flat_map(|s| tokenize_identifiers(s.as_ref()))
            .map(str::to_string)
            .collect(),
        ptypes: ptypes.to_vec(),
    };
    score_breakdown(mention, &scope, candidate).total()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub candidate: ApiMethod,
    pub raw: u32,
    pub normalized: f64,
}

/// Min-max normalization; a flat range maps to 1.0 when positive, else 0.0.
pub fn normalize(raw: &[u32]) -> Vec<f64> {
    let (Some(&min), Some(&max)) = (raw.iter().min(), raw.iter().max()) else {
        return Vec::new();
    };
    raw.iter()
        .map(|&r| {
            if max == min {
                if max > 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                f64::from(r - min) / f64::from(max - min)
            }
        })
        .collect()
}

/// Raw and normalized scores for every candidate. The raw score of a
/// candidate is its best score over all mentions of the simple name.
pub fn candidate_scores(thread: &Thread, simple_name: &str, candidates: &[ApiMethod]) -> Vec<CandidateScore> {
    let mentions = extract_mentions(thread, simple_name);
    let scope = ThreadScope::new(thread);
    let raw: Vec<u32> = candidates
        .iter()
        .map(|c| {
            mentions
                .iter()
                .map(|m| score_breakdown(m, &scope, c).total())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let normalized = normalize(&raw);
    candidates
        .iter()
        .zip(raw)
        .zip(normalized)
        .map(|((c, raw), normalized)| CandidateScore {
            candidate: c.clone(),
            raw,
            normalized,
        })
        .collect()
}

/// Normalized type-scoping score of `api` in `thread`, in `[0, 1]`.
/// A thread without any mention of the simple name scores 0.
pub fn thread_syntactic_score(thread: &Thread, api: &ApiMethod, candidates: &[ApiMethod]) -> Result<f64> {
    let scores = candidate_scores(thread, api.simple_name(), candidates);
    scores
        .iter()
        .find(|s| s.candidate.fqn == api.fqn)
        .map(|s| s.normalized)
        .ok_or_else(|| Error::contract(format!("`{}` is not among its candidates", api.fqn)))
}
