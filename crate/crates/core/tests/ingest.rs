use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use apiscope::corpus::{candidate_set, find_potential_threads, read_api_db, read_labels, read_threads};
use apiscope::Error;

fn fixture(name: &str) -> BufReader<File> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    BufReader::new(File::open(path).unwrap())
}

#[test]
fn paragraphs_and_snippets_of_fixture() {
    let threads = read_threads(fixture("corpus.jsonl")).unwrap();
    assert_eq!(threads.len(), 3);

    // Title plus two body paragraphs; three code blocks.
    let t = &threads[0];
    assert_eq!(t.paragraphs.len(), 3);
    assert_eq!(t.paragraphs[0], "Mockito mock returns null for a List");
    assert_eq!(t.code_snippets.len(), 3);
    assert!(t.code_snippets[0].starts_with("import org.mockito.Mockito;"));
    assert_eq!(t.code_snippets[2].trim(), "assertNull(repo.get(2));");

    let no_code = &threads[1];
    assert!(no_code.code_snippets.is_empty());
    assert_eq!(
        no_code.paragraphs[1],
        "Is there a difference between CharMatcher.is and \"equals\" & friends?"
    );
}

#[test]
fn five_same_named_candidates() {
    let apis = read_api_db(fixture("apis.jsonl")).unwrap();
    let mockito = apis.iter().find(|a| a.fqn == "org.mockito.Mockito.mock").unwrap();
    let cands = candidate_set(mockito, &apis);
    assert_eq!(cands.len(), 5);
    assert!(cands.iter().all(|c| c.simple_name() == "mock"));
    assert!(cands.windows(2).all(|w| w[0].fqn < w[1].fqn));

    let is = apis.iter().find(|a| a.simple_name() == "is").unwrap();
    assert_eq!(candidate_set(is, &apis).len(), 1);
}

#[test]
fn potential_threads_need_the_simple_name() {
    let threads = read_threads(fixture("corpus.jsonl")).unwrap();
    let apis = read_api_db(fixture("apis.jsonl")).unwrap();
    let ids = |fqn: &str| -> Vec<u64> {
        let api = apis.iter().find(|a| a.fqn == fqn).unwrap();
        find_potential_threads(api, &threads).iter().map(|t| t.id).collect()
    };
    assert_eq!(ids("org.mockito.Mockito.mock"), vec![101, 103]);
    // "The returned value is always null" also counts.
    assert_eq!(ids("com.google.common.base.CharMatcher.is"), vec![101, 102]);
    assert_eq!(ids("org.mockito.stubbing.OngoingStubbing.thenReturn"), vec![101]);
}

#[test]
fn labels_fixture() {
    let labels = read_labels(fixture("labels.jsonl")).unwrap();
    assert_eq!(labels.len(), 5);
    assert_eq!(labels.iter().filter(|l| l.relevant).count(), 3);
}

#[test]
fn malformed_line_is_named() {
    let mut text = String::new();
    for id in 1..=6 {
        text.push_str(&format!("{{\"id\":{id},\"title\":\"t\",\"tags\":[],\"body_html\":\"\"}}\n"));
    }
    text.push_str("{\"id\":7,\"title\":\"t\",\"body_html\":\"<pre><code>never closed\"}\n");
    match read_threads(text.as_bytes()) {
        Err(Error::Ingest { line, .. }) => assert_eq!(line, 7),
        other => panic!("unexpected {other:?}"),
    }
    assert!(read_threads("".as_bytes()).unwrap().is_empty());
}
