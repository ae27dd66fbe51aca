use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use adg_feedback::alignment::embedding::{EmbeddingCache, EmbeddingError, HttpTransport, RemoteEmbedder};
use adg_feedback::alignment::{
    align_cue, AlignConfig, CharNgram, ProviderChain, ProviderKind, ProviderSpec, RemoteEmbedding,
};
use adg_feedback::graph::load_adg;
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Behavior {
    Vectors,
    Status500,
    Sleep(Duration),
    Ragged,
}

/// Minimal embedding server: one request per connection.
struct MockServer {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn vector_for(text: &str) -> Vec<f64> {
    // deterministic, deliberately not unit length
    let bytes = text.as_bytes();
    let sum: u32 = bytes.iter().map(|b| *b as u32).sum();
    vec![1.0 + bytes.len() as f64, (sum % 97) as f64, 3.0, if text.contains("symbol") { 40.0 } else { 0.5 }]
}

fn read_request(stream: &mut TcpStream) -> Value {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            length = v.trim().parse().unwrap();
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    serde_json::from_slice(&body).unwrap()
}

fn spawn(behavior: Behavior) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            let request = read_request(&mut stream);
            let (status, body) = match behavior {
                Behavior::Status500 => ("500 Internal Server Error", "{}".to_string()),
                Behavior::Sleep(d) => {
                    thread::sleep(d);
                    ("200 OK", json!({"vectors": []}).to_string())
                }
                Behavior::Vectors | Behavior::Ragged => {
                    assert!(request["model"].is_string());
                    let texts = request["texts"].as_array().unwrap();
                    let mut vectors: Vec<Vec<f64>> = texts.iter().map(|t| vector_for(t.as_str().unwrap())).collect();
                    if matches!(behavior, Behavior::Ragged) {
                        vectors.last_mut().unwrap().push(1.0);
                    }
                    ("200 OK", json!({ "vectors": vectors }).to_string())
                }
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    MockServer { url, hits }
}

fn embedder(server: &MockServer, cache: Arc<EmbeddingCache>, timeout: Duration) -> RemoteEmbedder {
    RemoteEmbedder::new("mock-model", Arc::new(HttpTransport::new(&server.url, timeout)), cache)
}

#[test]
fn vectors_are_normalized_and_cached() {
    let server = spawn(Behavior::Vectors);
    let e = embedder(&server, Arc::new(EmbeddingCache::in_memory()), Duration::from_secs(5));
    let texts = ["Language is a symbol", "Words are labels", "Language is a symbol"];
    let first = e.embed(&texts).unwrap();
    assert_eq!(first.len(), 3);
    for v in &first {
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-9);
    }
    assert_eq!(server.hits.load(Ordering::SeqCst), 1);
    let second = e.embed(&texts).unwrap();
    assert_eq!(first, second);
    assert_eq!(server.hits.load(Ordering::SeqCst), 1, "cache hits must not reach the service");
    assert!(e.embed(&[]).unwrap().is_empty());
}

#[test]
fn persistent_cache_survives_restart_without_network() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let server = spawn(Behavior::Vectors);
    let e = embedder(&server, Arc::new(EmbeddingCache::open(&path).unwrap()), Duration::from_secs(5));
    let a = e.embed(&["one", "two"]).unwrap();
    drop(e);

    // point the reopened cache at a dead endpoint: everything must come from disk
    let dead = spawn(Behavior::Status500);
    let e = embedder(&dead, Arc::new(EmbeddingCache::open(&path).unwrap()), Duration::from_secs(5));
    assert_eq!(e.embed(&["two", "one"]).unwrap(), vec![a[1].clone(), a[0].clone()]);
    assert_eq!(dead.hits.load(Ordering::SeqCst), 0);
}

#[test]
fn service_failures_map_to_errors() {
    let server = spawn(Behavior::Status500);
    let e = embedder(&server, Arc::new(EmbeddingCache::in_memory()), Duration::from_secs(5));
    assert!(matches!(e.embed(&["x"]), Err(EmbeddingError::Unavailable(_))));

    let slow = spawn(Behavior::Sleep(Duration::from_millis(1500)));
    let e = embedder(&slow, Arc::new(EmbeddingCache::in_memory()), Duration::from_millis(200));
    assert!(matches!(e.embed(&["x"]), Err(EmbeddingError::Timeout)));

    let ragged = spawn(Behavior::Ragged);
    let e = embedder(&ragged, Arc::new(EmbeddingCache::in_memory()), Duration::from_secs(5));
    assert!(matches!(e.embed(&["x", "y"]), Err(EmbeddingError::DimensionMismatch { .. })));
}

#[test]
fn remote_provider_aligns_and_falls_back() {
    let adg = load_adg(include_str!("../../../fixtures/fig3/adg.json")).unwrap();
    let server = spawn(Behavior::Vectors);
    let remote = RemoteEmbedding::new(embedder(&server, Arc::new(EmbeddingCache::in_memory()), Duration::from_secs(5)));
    let r = align_cue(&adg, "Language is a symbol,", &remote, &AlignConfig::default()).unwrap();
    assert_eq!(r.provider_kind, ProviderKind::RemoteEmbedding);
    assert_eq!(r.node_id, "c3a");

    // dead service: the chain answers with the lexical provider and says so
    let spec = ProviderSpec::RemoteEmbedding {
        endpoint: "http://127.0.0.1:9/embed".into(),
        model: "m".into(),
        timeout_ms: 500,
        cache_path: None,
    };
    let dead = spec.build(&[]).unwrap();
    let chain = ProviderChain::new(vec![dead.clone(), Arc::new(CharNgram::default())]);
    let r = align_cue(&adg, "Language is a symbol", &chain, &AlignConfig::default()).unwrap();
    assert_eq!(r.provider_kind, ProviderKind::CharNgram);
    let err = align_cue(&adg, "Language is a symbol", dead.as_ref(), &AlignConfig::default()).unwrap_err();
    assert_eq!(err.code(), "provider-unavailable");
    assert_eq!(dead.kind(), ProviderKind::RemoteEmbedding);
}
