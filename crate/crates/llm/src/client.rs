//! Provider-agnostic LLM client interface and offline implementations.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::prompt_key;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("no canned response for prompt {0}")]
    NoCannedResponse(String),
    #[error("missing API key; set {0}")]
    MissingApiKey(&'static str),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<ClientError> },
}

pub trait LlmClient: Send + Sync {
    fn send(&self, prompt: &str, params: &DecodingParams) -> Result<String, ClientError>;

    fn model(&self) -> &str;
}

type Responder = dyn Fn(&str) -> Result<String, ClientError> + Send + Sync;

/// Deterministic client answering from a prompt-keyed table, falling back
/// to an optional function. Counts every call.
pub struct MockClient {
    canned: HashMap<String, String>,
    fallback: Option<Box<Responder>>,
    calls: AtomicUsize,
}

impl Default for MockClient {
    fn default() -> Self {
        MockClient::new()
    }
}

impl MockClient {
    pub fn new() -> Self {
        MockClient {
            canned: HashMap::new(),
            fallback: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_fn(f: impl Fn(&str) -> Result<String, ClientError> + Send + Sync + 'static) -> Self {
        MockClient {
            fallback: Some(Box::new(f)),
            ..MockClient::new()
        }
    }

    pub fn insert(&mut self, prompt: &str, response: &str) {
        self.canned.insert(prompt_key(prompt), response.to_string());
    }

    /// Loads canned responses from `<sha256 of prompt>.txt` files.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut client = MockClient::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    client.canned.insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(client)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.canned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canned.is_empty()
    }
}

impl LlmClient for MockClient {
    fn send(&self, prompt: &str, _params: &DecodingParams) -> Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = prompt_key(prompt);
        if let Some(r) = self.canned.get(&key) {
            return Ok(r.clone());
        }
        match &self.fallback {
            Some(f) => f(prompt),
            None => Err(ClientError::NoCannedResponse(key)),
        }
    }

    fn model(&self) -> &str {
        "mock"
    }
}

/// Wraps a client and writes every successful response to
/// `<dir>/<sha256 of prompt>.txt`, the layout [`MockClient::from_dir`] reads.
pub struct RecordingClient<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: LlmClient> RecordingClient<C> {
    pub fn new(inner: C, dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(RecordingClient {
            inner,
            dir: dir.to_path_buf(),
        })
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn send(&self, prompt: &str, params: &DecodingParams) -> Result<String, ClientError> {
        let response = self.inner.send(prompt, params)?;
        let path = self.dir.join(format!("{}.txt", prompt_key(prompt)));
        std::fs::write(&path, &response).map_err(|e| ClientError::Transport(format!("{}: {e}", path.display())))?;
        Ok(response)
    }

    fn model(&self) -> &str {
        self.inner.model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canned_then_fallback() {
        let mut m = MockClient::with_fn(|p| Ok(format!("echo {}", p.len())));
        m.insert("hello", "world");
        let params = DecodingParams::default();
        assert_eq!(m.send("hello", &params).unwrap(), "world");
        assert_eq!(m.send("abc", &params).unwrap(), "echo 3");
        assert_eq!(m.calls(), 2);
        assert!(matches!(MockClient::new().send("x", &params), Err(ClientError::NoCannedResponse(_))));
    }

    #[test]
    fn recording_feeds_from_dir() {
        let dir = tempfile::tempdir().unwrap();
        let rec = RecordingClient::new(MockClient::with_fn(|p| Ok(p.to_uppercase())), dir.path()).unwrap();
        let params = DecodingParams::default();
        rec.send("abc", &params).unwrap();
        let replay = MockClient::from_dir(dir.path()).unwrap();
        assert_eq!(replay.len(), 1);
        assert_eq!(replay.send("abc", &params).unwrap(), "ABC");
    }
}
