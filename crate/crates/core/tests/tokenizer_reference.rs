use apiscope::typescope::tokens::tokenize_identifiers;

/// One pass over the characters, no lookahead.
fn reference_scan(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[test]
fn kib_snippet_matches_reference_scanner() {
    let text = include_str!("fixtures/snippet.java");
    assert!(text.len() >= 1024);
    let tokens = tokenize_identifiers(text);
    assert_eq!(tokens, reference_scan(text));
    assert!(tokens.contains(&"hits$"));
    assert!(tokens.contains(&"1_024"));
    assert!(tokens.contains(&"na"), "non-ASCII letters separate tokens");
}

#[test]
fn spec_examples() {
    assert_eq!(tokenize_identifiers("CharMatcher.is('x')"), ["CharMatcher", "is", "x"]);
    assert_eq!(tokenize_identifiers("new OngoingStubbing<Foo>()"), ["new", "OngoingStubbing", "Foo"]);
}
