use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::Value;

use xamr_llm::{ClientError, DecodingParams, HttpClient, HttpConfig, LlmClient};

type Seen = Arc<Mutex<Vec<(String, Value)>>>;

/// Serves the given (status, body) pairs in order, one per connection, and
/// records the request bodies and authorization headers.
fn serve(replies: Vec<(u16, String)>) -> (String, Seen) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => auth = value.trim().to_string(),
                    _ => {}
                }
            }
            let mut request = vec![0; length];
            reader.read_exact(&mut request).unwrap();
            log.lock().unwrap().push((auth, serde_json::from_slice(&request).unwrap()));
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn config(base_url: String) -> HttpConfig {
    HttpConfig {
        base_url,
        model: "test-model".into(),
        timeout_secs: 5,
        max_retries: 2,
        backoff_ms: 1,
        trace: true,
    }
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"{\"Roleset ID\": \"agree.01\"}"}}]}"#;

#[test]
fn sends_chat_request_and_retries_server_errors() {
    let (url, seen) = serve(vec![(503, "{}".into()), (429, "{}".into()), (200, OK.into())]);
    let client = HttpClient::new(config(url), "sk-test".into());
    let text = client.send("hello", &DecodingParams::default()).unwrap();
    assert_eq!(text, r#"{"Roleset ID": "agree.01"}"#);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    let (auth, body) = &seen[2];
    assert_eq!(auth, "Bearer sk-test");
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["content"], "hello");
    assert_eq!(body["messages"][0]["role"], "user");
}

#[test]
fn gives_up_after_max_retries() {
    let (url, seen) = serve(vec![(500, "a".into()), (500, "b".into()), (500, "sk-test leaked".into())]);
    let client = HttpClient::new(config(url), "sk-test".into());
    let err = client.send("hello", &DecodingParams::default()).unwrap_err();
    match err {
        ClientError::Exhausted { attempts, last } => {
            assert_eq!(attempts, 3);
            assert_eq!(*last, ClientError::Status { status: 500, body: "[REDACTED] leaked".into() });
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(401, "{\"error\":\"bad key\"}".into())]);
    let client = HttpClient::new(config(url), "sk-test".into());
    let err = client.send("hello", &DecodingParams::default()).unwrap_err();
    assert!(matches!(err, ClientError::Status { status: 401, .. }));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn missing_key_is_reported() {
    std::env::remove_var(xamr_llm::API_KEY_ENV);
    assert!(matches!(
        HttpClient::from_env(HttpConfig::default()),
        Err(ClientError::MissingApiKey("XAMR_LLM_API_KEY"))
    ));
}
