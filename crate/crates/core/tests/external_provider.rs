use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;

use apiscope::embedding::{
    build_pair, embed_thread, EmbedRequest, EmbedResponse, EmbeddingProvider, ExternalProvider, HashEmbedder,
    EMBED_DIM,
};
use apiscope::{Error, Thread};

/// Answers with the hash embedding of each request, or with a vector of the
/// wrong size when the first text is "short". Seen request lines go to `log`.
fn serve(stream: TcpStream, log: mpsc::Sender<String>) {
    let hash = HashEmbedder::default();
    let answer = |r: &EmbedRequest| {
        assert_eq!((r.max_first, r.max_second), (254, 255));
        let vector = if r.first == "short" {
            vec![0.0; 3]
        } else {
            hash.hash_embed(&build_pair(&r.first, &r.second))
        };
        EmbedResponse { vector }
    };
    let mut writer = stream.try_clone().unwrap();
    for line in BufReader::new(stream).lines() {
        let line = line.unwrap();
        let reply = if line.starts_with('[') {
            let reqs: Vec<EmbedRequest> = serde_json::from_str(&line).unwrap();
            serde_json::to_string(&reqs.iter().map(answer).collect::<Vec<_>>()).unwrap()
        } else {
            serde_json::to_string(&answer(&serde_json::from_str(&line).unwrap())).unwrap()
        };
        log.send(line).unwrap();
        writeln!(writer, "{reply}").unwrap();
    }
}

fn mock_server() -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let tx = tx.clone();
            thread::spawn(move || serve(stream.unwrap(), tx));
        }
    });
    (addr, rx)
}

#[test]
fn single_and_batch_requests() {
    let (addr, log) = mock_server();
    let provider = ExternalProvider::connect(&addr).unwrap();
    assert!(!provider.supports_concurrent_requests());

    let pair = build_pair("how do I mock a list", "List l = mock(List.class);");
    let v = provider.embed(&pair).unwrap();
    assert_eq!(v.len(), EMBED_DIM);
    assert_eq!(v, HashEmbedder::default().hash_embed(&pair));
    assert_eq!(v, provider.embed(&pair).unwrap(), "repeatable");

    let request: serde_json::Value = serde_json::from_str(&log.recv().unwrap()).unwrap();
    assert_eq!(request["first"], "how do I mock a list");
    assert_eq!(request["max_first"], 254);
    assert_eq!(request["max_second"], 255);

    let pairs = vec![build_pair("a", "b"), build_pair("c", ""), build_pair("", "")];
    let batch = provider.embed_batch(&pairs).unwrap();
    assert_eq!(batch.len(), 3);
    assert!(batch[2].iter().all(|&x| x == 0.0));
}

#[test]
fn bad_vector_names_the_thread_and_pair() {
    let (addr, _log) = mock_server();
    let provider = ExternalProvider::connect(&addr).unwrap();
    let thread = Thread {
        id: 77,
        title: "ok".into(),
        tags: Vec::new(),
        paragraphs: vec!["ok".into(), "short".into()],
        code_snippets: vec!["int x;".into()],
    };
    match embed_thread(&thread, &provider) {
        Err(Error::Provider {
            thread_id, pair_index, ..
        }) => assert_eq!((thread_id, pair_index), (77, 1)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn refused_connection() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    match ExternalProvider::connect(&format!("127.0.0.1:{port}")) {
        Err(Error::Connection(msg)) => assert!(msg.contains(&port.to_string())),
        Err(other) => panic!("unexpected {other:?}"),
        Ok(_) => panic!("connected to a closed port"),
    }
}
