//! Thread corpus and API database ingestion.
//!
//! Both inputs are line-delimited JSON. A thread record carries `id`, `title`,
//! `tags` and `body_html`; code blocks in the body are delimited by literal
//! `<pre><code>` / `</code></pre>`. An API record carries `fqn`, `comment` and
//! `impl_code`. Unknown fields are ignored.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typescope::tokens::contains_token;

const CODE_OPEN: &str = "<pre><code>";
const CODE_CLOSE: &str = "</code></pre>";

/// One discussion thread. `paragraphs[0]` is always the title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thread {
    pub id: u64,
    pub title: String,
    pub tags: Vec<String>,
    pub paragraphs: Vec<String>,
    pub code_snippets: Vec<String>,
}

impl Thread {
    /// Title, paragraphs and tags.
    pub fn textual_parts(&self) -> impl Iterator<Item = &str> {
        self.paragraphs
            .iter()
            .chain(self.tags.iter())
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApiMethod {
    pub fqn: String,
    #[serde(default)]
    pub comment: String,
    #[serde(default)]
    pub impl_code: String,
}

impl ApiMethod {
    pub fn new(fqn: impl Into<String>, comment: impl Into<String>, impl_code: impl Into<String>) -> Result<Self> {
        let fqn = fqn.into();
        split_fqn(&fqn)?;
        Ok(ApiMethod {
            fqn,
            comment: comment.into(),
            impl_code: impl_code.into(),
        })
    }

    pub fn simple_name(&self) -> &str {
        self.fqn.rsplit('.').next().unwrap_or(&self.fqn)
    }

    pub fn type_name(&self) -> &str {
        self.fqn.rsplit('.').nth(1).unwrap_or("")
    }
}

/// Ground truth: whether `thread_id` refers to `api_fqn`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub thread_id: u64,
    pub api_fqn: String,
    pub relevant: bool,
}

fn is_java_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Returns `(simple_name, type_name)` of a dotted method path.
pub fn split_fqn(fqn: &str) -> Result<(&str, &str)> {
    let segments: Vec<&str> = fqn.split('.').collect();
    if segments.len() < 3 || !segments.iter().all(|s| is_java_identifier(s)) {
        return Err(Error::MalformedFqn(fqn.to_string()));
    }
    let n = segments.len();
    Ok((segments[n - 1], segments[n - 2]))
}

#[derive(Deserialize)]
struct RawThread {
    id: Option<serde_json::Value>,
    title: Option<String>,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    body_html: String,
}

/// Parses one corpus line. `line` is the 1-based line number used in errors.
pub fn parse_thread_record(record: &str, line: usize) -> Result<Thread> {
    let err = |message: String| Error::Ingest { line, message };
    let raw: RawThread =
        serde_json::from_str(record).map_err(|e| err(format!("invalid thread record: {e}")))?;
    let id = match raw.id {
        None | Some(serde_json::Value::Null) => return Err(err("missing field `id`".into())),
        Some(v) => v
            .as_u64()
            .filter(|&id| id > 0)
            .ok_or_else(|| err(format!("`id` must be a positive integer, got {v}")))?,
    };
    let title = raw.title.ok_or_else(|| err("missing field `title`".into()))?;
    let (body_paragraphs, code_snippets) = split_body(&raw.body_html).map_err(err)?;

    let mut paragraphs = Vec::with_capacity(body_paragraphs.len() + 1);
    paragraphs.push(title.clone());
    paragraphs.extend(body_paragraphs);
    Ok(Thread {
        id,
        title,
        tags: raw.tags,
        paragraphs,
        code_snippets,
    })
}

pub fn parse_api_record(record: &str, line: usize) -> Result<ApiMethod> {
    let api: ApiMethod = serde_json::from_str(record).map_err(|e| Error::Ingest {
        line,
        message: format!("invalid API record: {e}"),
    })?;
    split_fqn(&api.fqn).map_err(|e| Error::Ingest {
        line,
        message: e.to_string(),
    })?;
    Ok(api)
}

pub fn parse_label_record(record: &str, line: usize) -> Result<Label> {
    serde_json::from_str(record).map_err(|e| Error::Ingest {
        line,
        message: format!("invalid label record: {e}"),
    })
}

fn read_records<T, R: BufRead>(
    reader: R,
    parse: impl Fn(&str, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Ingest {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(&line, line_no)?);
    }
    Ok(out)
}

/// Reads a thread corpus, rejecting duplicate ids.
pub fn read_threads<R: BufRead>(reader: R) -> Result<Vec<Thread>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Ingest {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let thread = parse_thread_record(&line, line_no)?;
        if !seen.insert(thread.id) {
            return Err(Error::Ingest {
                line: line_no,
                message: format!("duplicate thread id {}", thread.id),
            });
        }
        out.push(thread);
    }
    Ok(out)
}

pub fn read_api_db<R: BufRead>(reader: R) -> Result<Vec<ApiMethod>> {
    read_records(reader, parse_api_record)
}

pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<Label>> {
    read_records(reader, parse_label_record)
}

/// Splits an HTML body into prose paragraphs and code snippets.
///
/// Code blocks are removed from the prose and act as paragraph boundaries.
/// Remaining markup tags are stripped and the common entities decoded before
/// splitting on blank lines.
fn split_body(body: &str) -> Result<(Vec<String>, Vec<String>), String> {
    let mut paragraphs = Vec::new();
    let mut snippets = Vec::new();
    let mut rest = body;
    loop {
        let open = rest.find(CODE_OPEN);
        let text_end = open.unwrap_or(rest.len());
        let text = &rest[..text_end];
        if text.contains(CODE_CLOSE) {
            return Err("`</code></pre>` without a matching `<pre><code>`".into());
        }
        push_paragraphs(text, &mut paragraphs);
        let Some(open) = open else { break };
        let after = &rest[open + CODE_OPEN.len()..];
        let close = after
            .find(CODE_CLOSE)
            .ok_or_else(|| "unterminated `<pre><code>` block".to_string())?;
        let code = &after[..close];
        if code.contains(CODE_OPEN) {
            return Err("nested `<pre><code>` block".into());
        }
        let code = decode_entities(code);
        if !code.trim().is_empty() {
            snippets.push(code);
        }
        rest = &after[close + CODE_CLOSE.len()..];
    }
    Ok((paragraphs, snippets))
}

fn push_paragraphs(html: &str, out: &mut Vec<String>) {
    let text = decode_entities(&strip_tags(html));
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n").trim().to_string());
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n").trim().to_string());
    }
}

/// Removes `<tag ...>` and `</tag>` markup. A `<` that does not start a tag is
/// kept as text.
fn strip_tags(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        let tail = &rest[lt..];
        let starts_tag = tail[1..]
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '/' || c == '!');
        match tail.find('>') {
            Some(gt) if starts_tag => rest = &tail[gt + 1..],
            _ => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&nbsp;", " ")
        .replace("&amp;", "&")
}

/// Threads in which the API's simple name occurs as a whole identifier token
/// in the title, paragraphs, tags or code. Corpus order is preserved.
pub fn find_potential_threads<'a>(api: &ApiMethod, corpus: &'a [Thread]) -> Vec<&'a Thread> {
    let simple = api.simple_name();
    corpus
        .iter()
        .filter(|t| {
            t.textual_parts()
                .chain(t.code_snippets.iter().map(String::as_str))
                .any(|part| contains_token(part, simple))
        })
        .collect()
}

/// Every database method sharing the API's simple name, plus the API itself,
/// sorted by fqn.
pub fn candidate_set(api: &ApiMethod, api_db: &[ApiMethod]) -> Vec<ApiMethod> {
    let simple = api.simple_name();
    let mut out: Vec<ApiMethod> = api_db
        .iter()
        .filter(|m| m.simple_name() == simple)
        .cloned()
        .collect();
    if !out.iter().any(|m| m.fqn == api.fqn) {
        out.push(api.clone());
    }
    out.sort_by(|a, b| a.fqn.cmp(&b.fqn));
    out.dedup_by(|a, b| a.fqn == b.fqn);
    out
}
