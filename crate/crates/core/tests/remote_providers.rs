#![cfg(feature = "remote")]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use histoscope_core::embedding::{Embedder, EmbeddingError, EmbeddingProvider};
use histoscope_core::provider::{ProviderError, RetryPolicy, TextGenerator};
use histoscope_core::remote::{token_from_env, RemoteEmbeddingProvider, RemoteGenerator};

struct Seen {
    authorization: Option<String>,
    body: String,
}

/// Serves the scripted (status, body) responses in order, one per connection.
fn mock(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    authorization = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                authorization,
                body: String::from_utf8(buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        retries: 3,
        base_delay: Duration::ZERO,
        max_delay: Duration::ZERO,
    }
}

#[test]
fn embeddings_are_requested_and_normalized() {
    let (url, seen) = mock(vec![(200, r#"{"embeddings": [[3, 4, 0, 0, 0, 0, 0, 0], [0, 0, 2, 0, 0, 0, 0, 0]]}"#.into())]);
    let provider = RemoteEmbeddingProvider::new(&url, Some("sekrit".into()), 8, 16, fast_retry()).unwrap();
    assert!(provider.identity().starts_with("remote:"));
    let embedder = Embedder::new(Arc::new(provider));
    let out = embedder.embed_batch(&["alpha", "beta"]).unwrap();
    assert_eq!(&out[0].components()[..2], &[0.6, 0.8]);
    assert_eq!(out[1].components()[2], 1.0);
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sekrit"));
    let body: serde_json::Value = serde_json::from_str(&seen[0].body).unwrap();
    assert_eq!(body, serde_json::json!({"texts": ["alpha", "beta"]}));
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = mock(vec![
        (503, "{}".into()),
        (500, "{}".into()),
        (200, r#"{"text": "infectious diseases"}"#.into()),
    ]);
    let generator = RemoteGenerator::new(&url, None, fast_retry()).unwrap();
    assert_eq!(generator.generate("Entities: flu").unwrap(), "infectious diseases");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[0].authorization.is_none());
    assert_eq!(seen[2].body, r#"{"prompt":"Entities: flu"}"#);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = mock(vec![(400, "{}".into()), (200, r#"{"text": "x"}"#.into())]);
    let generator = RemoteGenerator::new(&url, None, fast_retry()).unwrap();
    assert!(matches!(generator.generate("p"), Err(ProviderError::BadResponse(_))));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_body_is_bad_response() {
    let (url, _) = mock(vec![(200, r#"{"vectors": []}"#.into())]);
    let provider = RemoteEmbeddingProvider::new(&url, None, 8, 16, fast_retry()).unwrap();
    let err = Embedder::new(Arc::new(provider)).embed_text("a").unwrap_err();
    assert!(matches!(err, EmbeddingError::Provider(ProviderError::BadResponse(_))), "{err:?}");
}

#[test]
fn wrong_dimension_is_reported() {
    let (url, _) = mock(vec![(200, r#"{"embeddings": [[1, 0]]}"#.into())]);
    let provider = RemoteEmbeddingProvider::new(&url, None, 8, 16, fast_retry()).unwrap();
    let err = Embedder::new(Arc::new(provider)).embed_text("a").unwrap_err();
    assert_eq!(err, EmbeddingError::DimensionMismatch { expected: 8, got: 2 });
}

#[test]
fn unreachable_endpoint_gives_up() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let generator = RemoteGenerator::new(&format!("http://127.0.0.1:{port}/"), None, fast_retry()).unwrap();
    assert!(matches!(generator.generate("p"), Err(ProviderError::Transport(_))));
}

#[test]
fn configuration_errors() {
    assert!(matches!(
        RemoteGenerator::new("ftp://x", None, fast_retry()),
        Err(ProviderError::Config(_))
    ));
    assert_eq!(token_from_env(None).unwrap(), None);
    assert!(matches!(
        token_from_env(Some("HISTOSCOPE_TEST_SURELY_UNSET")),
        Err(ProviderError::Config(m)) if m.contains("HISTOSCOPE_TEST_SURELY_UNSET")
    ));
}
