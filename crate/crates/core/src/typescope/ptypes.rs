//! Possible-type extraction from code snippets.
//!
//! Works on the lexeme stream of each snippet rather than a Java parse. Four
//! patterns contribute types: import paths, object creations, variable
//! declarations (with receivers of `v.m(...)` resolved through them), and
//! capitalized static receivers. Anything else is skipped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokens::{is_ident_byte, lexemes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PTypeOrigin {
    Import,
    ObjectCreation,
    VariableDeclaration,
    StaticReceiver,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PType {
    pub name: String,
    pub origin: PTypeOrigin,
}

fn is_identifier(lexeme: &str) -> bool {
    let b = lexeme.as_bytes();
    !b.is_empty() && is_ident_byte(b[0]) && !b[0].is_ascii_digit()
}

/// Starts with an uppercase letter or underscore and is not an ALL_CAPS constant.
pub fn looks_like_type(name: &str) -> bool {
    if !is_identifier(name) {
        return false;
    }
    let first = name.as_bytes()[0];
    if !(first.is_ascii_uppercase() || first == b'_') {
        return false;
    }
    name.len() == 1 || name.bytes().any(|b| b.is_ascii_lowercase())
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while", "var", "true", "false", "null",
];

fn is_variable_name(lexeme: &str) -> bool {
    is_identifier(lexeme) && !KEYWORDS.contains(&lexeme)
}

/// Skips a balanced `<...>` group starting at `i`; returns the index after it.
fn skip_generics(lx: &[&str], mut i: usize) -> Option<usize> {
    if lx.get(i) != Some(&"<") {
        return Some(i);
    }
    let mut depth = 0usize;
    while i < lx.len() {
        match lx[i] {
            "<" => depth += 1,
            ">" => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            "(" | ")" | ";" | "{" | "}" | "=" => return None,
            _ => {}
        }
        i += 1;
    }
    None
}

fn skip_array_dims(lx: &[&str], mut i: usize) -> usize {
    while lx.get(i) == Some(&"[") && lx.get(i + 1) == Some(&"]") {
        i += 2;
    }
    i
}

/// Extracts possible types from all snippets of one thread. Entries are unique
/// by `(name, origin)` and kept in order of first appearance.
pub fn extract_ptypes<S: AsRef<str>>(code_snippets: &[S]) -> Vec<PType> {
    let mut out: Vec<PType> = Vec::new();
    let mut push = |name: &str, origin: PTypeOrigin| {
        if looks_like_type(name) && !out.iter().any(|p| p.name == name && p.origin == origin) {
            out.push(PType {
                name: name.to_string(),
                origin,
            });
        }
    };

    for snippet in code_snippets {
        let lx = lexemes(snippet.as_ref());
        let mut declared: HashMap<&str, &str> = HashMap::new();
        let mut i = 0;
        while i < lx.len() {
            let cur = lx[i];
            let prev = if i > 0 { lx[i - 1] } else { "" };

            if cur == "import" {
                let mut j = i + 1;
                if lx.get(j) == Some(&"static") {
                    j += 1;
                }
                let mut segments = Vec::new();
                while let Some(&seg) = lx.get(j) {
                    if is_identifier(seg) {
                        segments.push(seg);
                        j += 1;
                        if lx.get(j) == Some(&".") {
                            j += 1;
                            continue;
                        }
                    }
                    break;
                }
                if lx.get(j) == Some(&";") || lx.get(j) == Some(&"*") {
                    for seg in segments {
                        push(seg, PTypeOrigin::Import);
                    }
                }
                i = j.max(i + 1);
                continue;
            }

            if cur == "new" {
                let mut j = i + 1;
                let mut last = None;
                while let Some(&seg) = lx.get(j) {
                    if !is_identifier(seg) {
                        break;
                    }
                    last = Some(seg);
                    j += 1;
                    if lx.get(j) == Some(&".") {
                        j += 1;
                    } else {
                        break;
                    }
                }
                if let Some(name) = last {
                    if let Some(k) = skip_generics(&lx, j) {
                        if matches!(lx.get(k), Some(&"(") | Some(&"[")) {
                            push(name, PTypeOrigin::ObjectCreation);
                        }
                    }
                }
                i = j.max(i + 1);
                continue;
            }

            if is_identifier(cur) && prev != "." {
                // Declaration: T [<..>] [[]...] v followed by = ; , )
                if looks_like_type(cur) {
                    if let Some(k) = skip_generics(&lx, i + 1) {
                        let k = skip_array_dims(&lx, k);
                        if let (Some(&var), Some(&after)) = (lx.get(k), lx.get(k + 1)) {
                            if is_variable_name(var)
                                && !looks_like_type(var)
                                && matches!(after, "=" | ";" | "," | ")" | ":")
                            {
                                push(cur, PTypeOrigin::VariableDeclaration);
                                declared.insert(var, cur);
                            }
                        }
                    }
                }
                // Receiver: v.m( or T.m(
                if lx.get(i + 1) == Some(&".")
                    && lx.get(i + 2).is_some_and(|m| is_identifier(m))
                    && lx.get(i + 3) == Some(&"(")
                {
                    if let Some(ty) = declared.get(cur) {
                        push(ty, PTypeOrigin::VariableDeclaration);
                    } else if looks_like_type(cur) {
                        push(cur, PTypeOrigin::StaticReceiver);
                    }
                }
            } else if prev == "." && looks_like_type(cur) {
                // Qualified static receiver: a.b.T.m(
                if lx.get(i + 1) == Some(&".")
                    && lx.get(i + 2).is_some_and(|m| is_identifier(m))
                    && lx.get(i + 3) == Some(&"(")
                {
                    push(cur, PTypeOrigin::StaticReceiver);
                }
            }
            i += 1;
        }
    }
    out
}
