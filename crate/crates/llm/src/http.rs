//! Blocking chat-completion client over HTTPS.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::client::{ClientError, DecodingParams, LlmClient};

pub const API_KEY_ENV: &str = "XAMR_LLM_API_KEY";
const REDACTED: &str = "[REDACTED]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Initial back-off between retries, doubled per attempt.
    pub backoff_ms: u64,
    pub trace: bool,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            timeout_secs: 120,
            max_retries: 3,
            backoff_ms: 500,
            trace: false,
        }
    }
}

pub struct HttpClient {
    config: HttpConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpClient {
    /// Reads the API key from the environment.
    pub fn from_env(config: HttpConfig) -> Result<Self, ClientError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| ClientError::MissingApiKey(API_KEY_ENV))?;
        Ok(HttpClient::new(config, key))
    }

    pub fn new(config: HttpConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient { config, api_key, agent }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn redact(&self, text: &str) -> String {
        if self.api_key.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.api_key, REDACTED)
        }
    }

    fn attempt(&self, body: &Value) -> Result<String, ClientError> {
        let mut response = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| ClientError::Transport(self.redact(&e.to_string())))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if self.config.trace {
            log::info!(target: "xamr_llm::trace", "response {status}: {}", self.redact(&text));
        }
        if !(200..300).contains(&status) {
            return Err(ClientError::Status {
                status,
                body: self.redact(&text),
            });
        }
        extract_content(&text)
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion body.
pub fn extract_content(body: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ClientError::Malformed("no choices[0].message.content".into()))
}

fn retryable(e: &ClientError) -> bool {
    match e {
        ClientError::Transport(_) => true,
        ClientError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl LlmClient for HttpClient {
    fn send(&self, prompt: &str, params: &DecodingParams) -> Result<String, ClientError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
        });
        if let Some(n) = params.max_tokens {
            body["max_tokens"] = json!(n);
        }
        if self.config.trace {
            log::info!(target: "xamr_llm::trace", "request {}: {}", self.endpoint(), self.redact(&body.to_string()));
        }
        let attempts = self.config.max_retries + 1;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = None;
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) if retryable(&e) && attempt < attempts => {
                    log::warn!("attempt {attempt}/{attempts} failed: {e}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    last = Some(e);
                }
                Err(e) if attempt == 1 && !retryable(&e) => return Err(e),
                Err(e) => {
                    last = Some(e);
                    break;
                }
            }
        }
        Err(ClientError::Exhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }

    fn model(&self) -> &str {
        &self.config.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_message_content() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"{\"a\":1}"}}]}"#;
        assert_eq!(extract_content(body).unwrap(), "{\"a\":1}");
        assert!(matches!(extract_content("{}"), Err(ClientError::Malformed(_))));
    }

    #[test]
    fn key_is_redacted() {
        let c = HttpClient::new(HttpConfig::default(), "sk-secret".into());
        assert_eq!(c.redact("Bearer sk-secret"), "Bearer [REDACTED]");
    }
}
