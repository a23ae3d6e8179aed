use apiscope::embedding::HashEmbedder;
use apiscope::pipeline::{search, Dataset, Embedder};
use apiscope::typescope::{
    candidate_scores, extract_mentions, extract_ptypes, score_candidate, thread_syntactic_score, PType, PTypeOrigin,
};
use apiscope::{ApiMethod, Thread};

fn api(fqn: &str) -> ApiMethod {
    ApiMethod::new(fqn, "", "").unwrap()
}

fn thread(id: u64, paragraphs: &[&str], code: &[&str]) -> Thread {
    Thread {
        id,
        title: paragraphs[0].to_string(),
        tags: Vec::new(),
        paragraphs: paragraphs.iter().map(|s| s.to_string()).collect(),
        code_snippets: code.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn char_matcher_scores_in_every_scope() {
    let t = thread(
        1,
        &["Matching one char", "use CharMatcher.is here"],
        &["import com.google.common.base.CharMatcher;"],
    );
    let mentions = extract_mentions(&t, "is");
    assert_eq!(mentions.len(), 1);
    assert_eq!(mentions[0].prefix.as_deref(), Some("CharMatcher"));
    let ptypes = extract_ptypes(&t.code_snippets);
    assert_eq!(
        ptypes,
        vec![PType {
            name: "CharMatcher".into(),
            origin: PTypeOrigin::Import
        }]
    );
    let text = t.paragraphs.join("\n");
    let charmatcher = api("com.google.common.base.CharMatcher.is");
    assert_eq!(score_candidate(&mentions[0], &ptypes, &charmatcher, &text, &t.code_snippets), 4);
    let other = api("org.hamcrest.Matchers.is");
    assert_eq!(score_candidate(&mentions[0], &ptypes, &other, &text, &t.code_snippets), 0);
}

#[test]
fn code_token_scope_alone() {
    // `Mockito` appears in code only as an argument, not as any possible type.
    let t = thread(2, &["Three bare calls", "mock, mock and mock again"], &["register(Mockito.class);"]);
    let mentions = extract_mentions(&t, "mock");
    assert_eq!(mentions.len(), 3);
    assert!(mentions.iter().all(|m| m.prefix.is_none()));
    let ptypes = extract_ptypes(&t.code_snippets);
    assert!(ptypes.is_empty());
    let text = t.paragraphs.join("\n");
    let mockito = api("org.mockito.Mockito.mock");
    assert_eq!(score_candidate(&mentions[0], &ptypes, &mockito, &text, &t.code_snippets), 1);
}

#[test]
fn ongoing_stubbing_receiver() {
    let ptypes = extract_ptypes(&["OngoingStubbing s = when(x); s.thenReturn(y);"]);
    assert_eq!(
        ptypes,
        vec![PType {
            name: "OngoingStubbing".into(),
            origin: PTypeOrigin::VariableDeclaration
        }]
    );
    let t = thread(
        3,
        &["Stubbing twice", "I call thenReturn twice"],
        &["OngoingStubbing s = when(x); s.thenReturn(y);"],
    );
    let stubbing = api("org.mockito.stubbing.OngoingStubbing.thenReturn");
    let other = api("org.example.Fluent.thenReturn");
    let cands = vec![stubbing.clone(), other.clone()];
    assert_eq!(thread_syntactic_score(&t, &stubbing, &cands).unwrap(), 1.0);
    assert_eq!(thread_syntactic_score(&t, &other, &cands).unwrap(), 0.0);
}

#[test]
fn mockito_versus_powermockito() {
    let t = thread(4, &["Mocking a collaborator", "I mock the service"], &["Service s = Mockito.mock(Service.class);"]);
    let mockito = api("org.mockito.Mockito.mock");
    let power = api("org.powermock.api.mockito.PowerMockito.mock");
    let cands = vec![mockito.clone(), power.clone()];
    let scores = candidate_scores(&t, "mock", &cands);
    // Mockito: code token + static receiver. PowerMockito: nothing.
    assert_eq!(scores[0].raw, 2);
    assert_eq!(scores[1].raw, 0);
    assert_eq!(thread_syntactic_score(&t, &mockito, &cands).unwrap(), 1.0);
    assert_eq!(thread_syntactic_score(&t, &power, &cands).unwrap(), 0.0);

    // `PowerMockito` does not end with the segment `Mockito`.
    let t = thread(5, &["Static", "PowerMockito.mock works"], &[]);
    let scores = candidate_scores(&t, "mock", &cands);
    assert_eq!(scores[0].raw, 0);
    assert_eq!(scores[1].raw, 2);
}

#[test]
fn pervasive_type_ranks_first() {
    let threads = vec![
        thread(10, &["Mocks everywhere", "mock it"], &["int x = 1;"]),
        thread(
            11,
            &["Mockito questions", "Mockito.mock returns null"],
            &["import org.mockito.Mockito;\nRepo r = Mockito.mock(Repo.class);"],
        ),
        thread(12, &["Another one", "I mock with PowerMockito.mock"], &[]),
    ];
    let apis = vec![api("org.mockito.Mockito.mock"), api("org.powermock.api.mockito.PowerMockito.mock")];
    let ds = Dataset::new(threads, apis, Vec::new());
    let provider = HashEmbedder::default();
    let mut embedder = Embedder::new(&provider);
    let hits = search(&ds, "org.mockito.Mockito.mock", None, 1.0, 0.5, &mut embedder).unwrap();
    assert_eq!(hits.iter().map(|h| h.thread_id).collect::<Vec<_>>(), vec![11, 10, 12]);
    assert!(hits[0].relevant && !hits[2].relevant);
    assert!(hits.iter().all(|h| h.c == h.a && h.b.is_none()));
}
