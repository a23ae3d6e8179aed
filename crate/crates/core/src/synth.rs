//! Seeded synthetic corpora with controlled ground truth.
//!
//! Each target API gets `ambiguity` decoy APIs sharing its simple name. Every
//! API owns a private vocabulary pool. Threads about an API draw their words
//! from its pool at rate `semantic_signal` (the rest come from a shared filler
//! pool). Threads about a target API name its declaring type with probability
//! `syntactic_signal`; threads about a decoy always name the decoy's type.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ApiMethod, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_apis: usize,
    pub n_threads_per_api: usize,
    pub ambiguity: usize,
    pub syntactic_signal: f64,
    pub semantic_signal: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_apis: 8,
            n_threads_per_api: 12,
            ambiguity: 1,
            syntactic_signal: 0.7,
            semantic_signal: 0.7,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_apis == 0 || self.n_threads_per_api == 0 || self.ambiguity == 0 {
            return Err(Error::contract("synthetic counts must be positive"));
        }
        for (name, p) in [("syntactic_signal", self.syntactic_signal), ("semantic_signal", self.semantic_signal)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::contract(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Raw corpus records (the on-disk thread format) plus API database and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<ThreadRecord>,
    pub apis: Vec<ApiMethod>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadRecord {
    pub id: u64,
    pub title: String,
    pub tags: Vec<String>,
    pub body_html: String,
}

impl SynthCorpus {
    pub fn corpus_jsonl(&self) -> String {
        to_jsonl(&self.records)
    }

    pub fn api_db_jsonl(&self) -> String {
        to_jsonl(&self.apis)
    }

    pub fn labels_jsonl(&self) -> String {
        to_jsonl(&self.labels)
    }
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

const FILLER: &[&str] = &[
    "how", "can", "i", "use", "this", "when", "the", "a", "it", "with", "my", "code", "value",
    "works", "fails", "returns", "call", "method", "example", "problem", "here", "what", "why",
    "does", "not", "but", "after", "before", "some", "object", "list", "result", "error", "test",
    "need", "want", "try", "seems", "should", "would",
];

const TAGS: &[&str] = &["java", "api", "library", "unit-testing", "collections"];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ru", "ten", "vox", "pri", "dal", "sen", "qua", "bel", "tor", "nim", "zar",
    "fel", "gru", "hap", "jin", "mur", "pex", "ros", "sul", "tiv", "wen",
];

struct Names {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Names {
    fn word(&mut self, syllables: usize) -> String {
        loop {
            let w: String = (0..syllables)
                .map(|_| *SYLLABLES.choose(&mut self.rng).expect("syllables"))
                .collect();
            if !FILLER.contains(&w.as_str()) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

struct Family {
    api: ApiMethod,
    vocab: Vec<String>,
}

const VOCAB_SIZE: usize = 16;

fn family(names: &mut Names, simple: &str, rng: &mut ChaCha8Rng) -> Family {
    let vocab: Vec<String> = (0..VOCAB_SIZE).map(|_| names.word(3)).collect();
    let package = format!("com.{}.{}", names.word(2), names.word(2));
    let type_name = capitalize(&names.word(2)) + &capitalize(&names.word(3));
    let pick = |rng: &mut ChaCha8Rng| vocab.choose(rng).expect("vocab").clone();
    let comment: Vec<String> = (0..12).map(|_| pick(rng)).collect();
    let impl_code = format!(
        "{} {} = {}.{}({});\nreturn {}.{}({});",
        capitalize(&pick(rng)),
        pick(rng),
        pick(rng),
        pick(rng),
        pick(rng),
        pick(rng),
        pick(rng),
        pick(rng),
    );
    Family {
        api: ApiMethod {
            fqn: format!("{package}.{type_name}.{simple}"),
            comment: comment.join(" "),
            impl_code,
        },
        vocab,
    }
}

fn sentence(rng: &mut ChaCha8Rng, vocab: &[String], rate: f64, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| {
            if rng.random_bool(rate) {
                vocab.choose(rng).expect("vocab").clone()
            } else {
                FILLER.choose(rng).expect("filler").to_string()
            }
        })
        .collect()
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct ThreadDraft {
    title: String,
    tags: Vec<String>,
    body_html: String,
}

fn draft_thread(
    rng: &mut ChaCha8Rng,
    fam: &Family,
    type_present: bool,
    semantic_rate: f64,
) -> ThreadDraft {
    let simple = fam.api.simple_name();
    let ty = fam.api.type_name();
    let word = |rng: &mut ChaCha8Rng| -> String {
        if rng.random_bool(semantic_rate) {
            fam.vocab.choose(rng).expect("vocab").clone()
        } else {
            FILLER.choose(rng).expect("filler").to_string()
        }
    };

    let title_len = rng.random_range(3..6);
    let mut title = sentence(rng, &fam.vocab, semantic_rate, title_len);
    let at = rng.random_range(0..=title.len());
    title.insert(at, simple.to_string());
    let title = title.join(" ");

    let n_paragraphs = rng.random_range(1..=3);
    let mut paragraphs: Vec<String> = (0..n_paragraphs)
        .map(|_| {
            let len = rng.random_range(8..16);
            sentence(rng, &fam.vocab, semantic_rate, len).join(" ")
        })
        .collect();
    let mention = if type_present {
        format!("{ty}.{simple}")
    } else {
        simple.to_string()
    };
    let target = rng.random_range(0..paragraphs.len());
    let tail = word(rng);
    paragraphs[target] = format!("{} {mention} {tail}", paragraphs[target]);

    let n_snippets = rng.random_range(1..=2);
    let snippets: Vec<String> = (0..n_snippets)
        .map(|k| {
            let var = word(rng).to_lowercase();
            let var = if var.len() < 2 { format!("{var}x") } else { var };
            let arg = word(rng);
            let extra = word(rng);
            if k == 0 && type_present {
                format!("{ty} {var} = new {ty}();\n{var}.{simple}({arg}, {extra});")
            } else if k == 0 {
                format!("{var}.{simple}({arg});\n{extra}({arg});")
            } else {
                format!("{arg}.{extra}({var});")
            }
        })
        .collect();

    let mut body = String::new();
    for (i, p) in paragraphs.iter().enumerate() {
        body.push_str("<p>");
        body.push_str(&escape_html(p));
        body.push_str("</p>\n\n");
        if let Some(code) = snippets.get(i) {
            body.push_str("<pre><code>");
            body.push_str(&escape_html(code));
            body.push_str("</code></pre>\n\n");
        }
    }
    for code in snippets.iter().skip(paragraphs.len()) {
        body.push_str("<pre><code>");
        body.push_str(&escape_html(code));
        body.push_str("</code></pre>\n");
    }
    let tags = vec![TAGS.choose(rng).expect("tags").to_string()];
    ThreadDraft {
        title,
        tags,
        body_html: body,
    }
}

/// Generates the corpus, API database and complete labels for `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut names = Names {
        rng: ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6e61_6d65_7300_0000),
        used: HashSet::new(),
    };

    let mut apis = Vec::new();
    // (group index, family index within group, draft, type present)
    let mut drafts: Vec<(usize, usize, ThreadDraft)> = Vec::new();
    let mut groups: Vec<Vec<Family>> = Vec::new();
    for g in 0..spec.n_apis {
        let simple = format!("{}{}", names.word(2), capitalize(&names.word(2)));
        let fams: Vec<Family> = (0..=spec.ambiguity)
            .map(|_| family(&mut names, &simple, &mut rng))
            .collect();
        for (k, fam) in fams.iter().enumerate() {
            for _ in 0..spec.n_threads_per_api {
                let type_present = k > 0 || rng.random_bool(spec.syntactic_signal);
                drafts.push((g, k, draft_thread(&mut rng, fam, type_present, spec.semantic_signal)));
            }
        }
        apis.extend(fams.iter().map(|f| f.api.clone()));
        groups.push(fams);
    }

    drafts.shuffle(&mut rng);
    let mut records = Vec::with_capacity(drafts.len());
    let mut labels = Vec::new();
    for (i, (g, k, d)) in drafts.into_iter().enumerate() {
        let id = i as u64 + 1;
        for (j, fam) in groups[g].iter().enumerate() {
            labels.push(Label {
                thread_id: id,
                api_fqn: fam.api.fqn.clone(),
                relevant: j == k,
            });
        }
        records.push(ThreadRecord {
            id,
            title: d.title,
            tags: d.tags,
            body_html: d.body_html,
        });
    }
    apis.sort_by(|a, b| a.fqn.cmp(&b.fqn));
    Ok(SynthCorpus {
        records,
        apis,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{candidate_set, find_potential_threads, read_threads, split_fqn};

    fn small() -> SynthSpec {
        SynthSpec {
            n_apis: 2,
            n_threads_per_api: 4,
            ambiguity: 1,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn counts() {
        let c = generate(&small()).unwrap();
        assert_eq!(c.apis.len(), 4);
        assert!(c.records.len() >= 8);
        // Every thread labeled against both APIs of its group.
        assert_eq!(c.labels.len(), 2 * c.records.len());
        let relevant = c.labels.iter().filter(|l| l.relevant).count();
        assert_eq!(relevant, c.records.len());
        for api in &c.apis {
            split_fqn(&api.fqn).unwrap();
            assert_eq!(candidate_set(api, &c.apis).len(), 2);
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.corpus_jsonl(), b.corpus_jsonl());
        assert_eq!(a.api_db_jsonl(), b.api_db_jsonl());
        assert_eq!(a.labels_jsonl(), b.labels_jsonl());
        let other = generate(&SynthSpec { seed: 1, ..small() }).unwrap();
        assert_ne!(a.corpus_jsonl(), other.corpus_jsonl());
    }

    #[test]
    fn every_thread_is_potential_for_its_api() {
        let c = generate(&SynthSpec { n_apis: 4, ..small() }).unwrap();
        let threads = read_threads(c.corpus_jsonl().as_bytes()).unwrap();
        for l in c.labels.iter().filter(|l| l.relevant) {
            let api = c.apis.iter().find(|a| a.fqn == l.api_fqn).unwrap();
            let found = find_potential_threads(api, &threads);
            assert!(found.iter().any(|t| t.id == l.thread_id));
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(generate(&SynthSpec { syntactic_signal: 1.5, ..small() }).is_err());
        assert!(generate(&SynthSpec { n_apis: 0, ..small() }).is_err());
    }
}
