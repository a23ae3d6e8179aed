//! Identifier scanning shared by type scoping, thread matching and pair budgeting.

/// Bytes that may appear inside an identifier token.
#[inline]
pub fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

/// A maximal run of either identifier bytes or separator bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment<'a> {
    Token(&'a str),
    Separator(&'a str),
}

impl<'a> Segment<'a> {
    pub fn as_str(&self) -> &'a str {
        match self {
            Segment::Token(s) | Segment::Separator(s) => s,
        }
    }
}

/// Splits `text` into alternating token and separator runs. Concatenating the
/// segments reproduces `text`.
pub fn scan(text: &str) -> Scanner<'_> {
    Scanner { text, pos: 0 }
}

pub struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Iterator for Scanner<'a> {
    type Item = Segment<'a>;

    fn next(&mut self) -> Option<Segment<'a>> {
        let bytes = self.text.as_bytes();
        let start = self.pos;
        if start >= bytes.len() {
            return None;
        }
        let ident = is_ident_byte(bytes[start]);
        let mut end = start + 1;
        while end < bytes.len() && is_ident_byte(bytes[end]) == ident {
            end += 1;
        }
        self.pos = end;
        // Identifier bytes are ASCII, so every run boundary is a char boundary.
        let run = &self.text[start..end];
        Some(if ident {
            Segment::Token(run)
        } else {
            Segment::Separator(run)
        })
    }
}

/// Maximal runs of `[A-Za-z0-9_$]`, in order, duplicates kept.
pub fn tokenize_identifiers(text: &str) -> Vec<&str> {
    scan(text)
        .filter_map(|s| match s {
            Segment::Token(t) => Some(t),
            Segment::Separator(_) => None,
        })
        .collect()
}

/// Identifier tokens with byte offsets into `text`.
pub(crate) fn identifier_spans(text: &str) -> Vec<(usize, &str)> {
    let mut offset = 0;
    let mut out = Vec::new();
    for seg in scan(text) {
        if let Segment::Token(t) = seg {
            out.push((offset, t));
        }
        offset += seg.as_str().len();
    }
    out
}

/// Identifier tokens plus every non-whitespace separator character as its own
/// token. Used as the budgeting tokenizer for text/code pairs and as the lexeme
/// stream for code pattern matching.
pub fn lexemes(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for seg in scan(text) {
        match seg {
            Segment::Token(t) => out.push(t),
            Segment::Separator(s) => {
                for (i, c) in s.char_indices() {
                    if !c.is_whitespace() {
                        out.push(&s[i..i + c.len_utf8()]);
                    }
                }
            }
        }
    }
    out
}

/// True when `word` occurs in `text` as a whole identifier token.
pub fn contains_token(text: &str, word: &str) -> bool {
    scan(text).any(|s| s == Segment::Token(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_separators() {
        assert_eq!(
            tokenize_identifiers("CharMatcher.is('x')"),
            vec!["CharMatcher", "is", "x"]
        );
        assert_eq!(
            tokenize_identifiers("new OngoingStubbing<Foo>()"),
            vec!["new", "OngoingStubbing", "Foo"]
        );
    }

    #[test]
    fn dollar_and_underscore_are_identifier_bytes() {
        assert_eq!(tokenize_identifiers("a$b _c-d"), vec!["a$b", "_c", "d"]);
    }

    #[test]
    fn non_ascii_is_separator() {
        assert_eq!(tokenize_identifiers("héllo→world"), vec!["h", "llo", "world"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize_identifiers("").is_empty());
        assert!(lexemes("   ").is_empty());
    }

    #[test]
    fn lexemes_keep_punctuation() {
        assert_eq!(
            lexemes("Foo f = new Foo();"),
            vec!["Foo", "f", "=", "new", "Foo", "(", ")", ";"]
        );
    }

    #[test]
    fn spans_carry_offsets() {
        assert_eq!(identifier_spans("a.bc d"), vec![(0, "a"), (2, "bc"), (5, "d")]);
    }

    #[test]
    fn whole_token_containment() {
        assert!(contains_token("use mock here", "mock"));
        assert!(!contains_token("mocking it", "mock"));
        assert!(contains_token("x.mock()", "mock"));
    }
}
