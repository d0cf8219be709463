//! Exercises the embedding provider wire protocol against a real local HTTP
//! server: request shape, batching, order preservation, cache write-through,
//! and the dimension-drift protocol error.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use newsvol_core::embeddings::{remote_embed, EmbeddingProvider};
use newsvol_core::Error;

/// Serves `responses` (one per request) on an ephemeral local port and
/// records each request body. Closes connections after each response.
fn serve(responses: Vec<String>) -> (String, mpsc::Receiver<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind local port");
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for response in responses {
            let (mut stream, _) = match listener.accept() {
                Ok(pair) => pair,
                Err(_) => return,
            };
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let body = loop {
                let n = stream.read(&mut chunk).unwrap_or(0);
                if n == 0 {
                    break String::new();
                }
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| {
                            l.to_ascii_lowercase()
                                .strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap_or(0))
                        })
                        .unwrap_or(0);
                    let body_start = header_end + 4;
                    if buf.len() >= body_start + content_length {
                        break text[body_start..body_start + content_length].to_string();
                    }
                }
            };
            let _ = tx.send(body);
            let payload = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                response.len(),
                response
            );
            let _ = stream.write_all(payload.as_bytes());
        }
    });
    (endpoint, rx)
}

fn provider(endpoint: &str, dir: &tempfile::TempDir, batch_size: usize) -> EmbeddingProvider {
    EmbeddingProvider {
        endpoint: endpoint.to_string(),
        model_name: "toy-model".into(),
        batch_size,
        cache_path: dir.path().join("cache.tsv"),
    }
}

#[test]
fn batches_fetch_in_order_and_populate_cache() {
    let dir = tempfile::tempdir().unwrap();
    let (endpoint, requests) = serve(vec![
        r#"{"dimension": 2, "vectors": [[1.0, 2.0], [3.0, 4.0]]}"#.into(),
        r#"{"dimension": 2, "vectors": [[5.0, 6.0]]}"#.into(),
    ]);
    let texts = vec!["alpha".to_string(), "beta".to_string(), "gamma".to_string()];
    let p = provider(&endpoint, &dir, 2);

    // batch_size 2 over 3 texts: two HTTP calls, vectors in input order
    let vectors = remote_embed(&texts, &p).unwrap();
    assert_eq!(
        vectors,
        vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]
    );
    let first = requests.recv().unwrap();
    assert!(first.contains(r#""model":"toy-model""#), "{first}");
    assert!(first.contains("alpha") && first.contains("beta") && !first.contains("gamma"));
    let second = requests.recv().unwrap();
    assert!(second.contains("gamma"));

    // warm cache: a rerun needs no server at all
    let offline = EmbeddingProvider {
        endpoint: "http://127.0.0.1:1".into(),
        ..p
    };
    let again = remote_embed(&texts, &offline).unwrap();
    assert_eq!(again, vectors);
}

#[test]
fn dimension_drift_between_batches_is_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    let (endpoint, _requests) = serve(vec![
        r#"{"dimension": 3, "vectors": [[1.0, 2.0, 3.0]]}"#.into(),
        r#"{"dimension": 2, "vectors": [[1.0, 2.0]]}"#.into(),
    ]);
    let texts = vec!["one".to_string(), "two".to_string()];
    let err = remote_embed(&texts, &provider(&endpoint, &dir, 1)).unwrap_err();
    match err {
        Error::Protocol(msg) => assert!(msg.contains("drift"), "{msg}"),
        other => panic!("expected protocol error, got {other}"),
    }
}

#[test]
fn drift_against_cached_dimension_is_protocol_error() {
    let dir = tempfile::tempdir().unwrap();
    // first run caches dimension-2 vectors
    let (endpoint, _r) = serve(vec![r#"{"dimension": 2, "vectors": [[1.0, 2.0]]}"#.into()]);
    let p = provider(&endpoint, &dir, 4);
    remote_embed(&["seen".to_string()], &p).unwrap();

    // second run mixes a cached text with a fresh one at a new dimension
    let (endpoint2, _r2) = serve(vec![r#"{"dimension": 5, "vectors": [[1,2,3,4,5]]}"#.into()]);
    let p2 = EmbeddingProvider {
        endpoint: endpoint2,
        ..p
    };
    let err = remote_embed(&["seen".to_string(), "fresh".to_string()], &p2).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)), "{err}");
}

#[test]
fn non_200_response_is_provider_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        if let Ok((mut stream, _)) = listener.accept() {
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            let _ = stream.write_all(
                b"HTTP/1.1 503 Service Unavailable\r\nRetry-After: 7\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
            );
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let err = remote_embed(&["x".to_string()], &provider(&endpoint, &dir, 1)).unwrap_err();
    match err {
        Error::Provider {
            retry_after_secs, ..
        } => assert_eq!(retry_after_secs, 7),
        other => panic!("expected provider error, got {other}"),
    }
}
