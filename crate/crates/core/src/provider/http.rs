//! Chat-completion transport over HTTP.
//!
//! Speaks the common `{"model": ..., "messages": [{"role","content"}]}` wire
//! protocol with a bearer token taken from a named environment variable.
//! Transient failures are retried with exponential backoff; auth failures
//! never are.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LlmProvider, ProviderError};

/// Transport settings for a live endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Decoding controls passed through opaquely (e.g. temperature).
    #[serde(default)]
    pub decoding: serde_json::Map<String, serde_json::Value>,
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.timeout_secs == 0 {
            return Err(ProviderError::Transport("timeout must be > 0".to_string()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    #[serde(flatten)]
    decoding: &'a serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReplyMessage,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    content: String,
}

pub struct HttpProvider {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
    base_backoff: Duration,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<HttpProvider, ProviderError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(HttpProvider {
            config,
            client,
            base_backoff: Duration::from_millis(500),
        })
    }

    /// Shrink the backoff base (tests exercising the retry loop).
    pub fn with_backoff(mut self, base: Duration) -> HttpProvider {
        self.base_backoff = base;
        self
    }

    fn token(&self) -> Result<String, ProviderError> {
        std::env::var(&self.config.auth_env).map_err(|_| {
            ProviderError::Auth(format!(
                "environment variable {} is not set",
                self.config.auth_env
            ))
        })
    }

    fn attempt(&self, prompt: &str, token: &str) -> Result<String, ProviderError> {
        let request = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            decoding: &self.config.decoding,
        };
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(token)
            .json(&request)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout(e.to_string())
                } else {
                    ProviderError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderError::Auth(format!("endpoint returned {status}")));
        }
        if status.as_u16() == 429 {
            return Err(ProviderError::RateLimited(format!(
                "endpoint returned {status}"
            )));
        }
        if !status.is_success() {
            return Err(ProviderError::Transport(format!(
                "endpoint returned {status}"
            )));
        }
        let body: ChatResponse = response
            .json()
            .map_err(|e| ProviderError::Transport(format!("bad response body: {e}")))?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::Transport("response carried no choices".to_string()))
    }
}

impl LlmProvider for HttpProvider {
    fn complete(&mut self, prompt: &str) -> Result<String, ProviderError> {
        let token = self.token()?;
        let mut last = None;
        for attempt in 0..=self.config.max_retries {
            match self.attempt(prompt, &token) {
                Ok(reply) => return Ok(reply),
                Err(e @ ProviderError::Auth(_)) => return Err(e),
                Err(e) => {
                    log::warn!("attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                    if attempt < self.config.max_retries {
                        std::thread::sleep(self.base_backoff * 2u32.pow(attempt));
                    }
                }
            }
        }
        Err(last.expect("at least one attempt was made"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn config(endpoint: &str, retries: u32, auth_env: &str) -> ProviderConfig {
        ProviderConfig {
            endpoint: endpoint.to_string(),
            model: "test-model".to_string(),
            auth_env: auth_env.to_string(),
            timeout_secs: 5,
            max_retries: retries,
            decoding: serde_json::Map::new(),
        }
    }

    /// One-shot HTTP server answering each connection with a fixed status.
    fn serve(listener: TcpListener, responses: Vec<(u16, String)>) -> std::thread::JoinHandle<usize> {
        std::thread::spawn(move || {
            let mut served = 0;
            for (status, body) in responses {
                let (mut stream, _) = match listener.accept() {
                    Ok(s) => s,
                    Err(_) => break,
                };
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\n\
                     content-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
                served += 1;
            }
            served
        })
    }

    #[test]
    fn unreachable_endpoint_exhausts_retries() {
        std::env::set_var("HTTP_TEST_TOKEN_A", "tok");
        // A bound-then-dropped port is refused immediately.
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let provider = HttpProvider::new(config(
            &format!("http://127.0.0.1:{port}/v1/chat"),
            2,
            "HTTP_TEST_TOKEN_A",
        ))
        .unwrap()
        .with_backoff(Duration::from_millis(1));
        let mut provider = provider;
        let err = provider.complete("hello").unwrap_err();
        assert!(matches!(err, ProviderError::Transport(_)), "{err}");
    }

    #[test]
    fn auth_failure_is_not_retried() {
        std::env::set_var("HTTP_TEST_TOKEN_B", "tok");
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}/v1/chat", listener.local_addr().unwrap());
        let handle = serve(listener, vec![(401, "{}".to_string()), (401, "{}".to_string())]);
        let mut provider = HttpProvider::new(config(&endpoint, 3, "HTTP_TEST_TOKEN_B"))
            .unwrap()
            .with_backoff(Duration::from_millis(1));
        let err = provider.complete("hello").unwrap_err();
        assert!(matches!(err, ProviderError::Auth(_)), "{err}");
        drop(provider);
        // Only the first canned response may have been consumed.
        // (Closing the listener ends the server thread.)
        let _ = handle;
    }

    #[test]
    fn transient_500_then_success() {
        std::env::set_var("HTTP_TEST_TOKEN_C", "tok");
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let endpoint = format!("http://{}/v1/chat", listener.local_addr().unwrap());
        let ok_body =
            r#"{"choices":[{"message":{"role":"assistant","content":"hi there"}}]}"#.to_string();
        let handle = serve(listener, vec![(500, "{}".to_string()), (200, ok_body)]);
        let mut provider = HttpProvider::new(config(&endpoint, 2, "HTTP_TEST_TOKEN_C"))
            .unwrap()
            .with_backoff(Duration::from_millis(1));
        assert_eq!(provider.complete("hello").unwrap(), "hi there");
        assert_eq!(handle.join().unwrap(), 2);
    }

    #[test]
    fn missing_token_is_auth_error() {
        let mut provider =
            HttpProvider::new(config("http://127.0.0.1:1/v1/chat", 0, "HTTP_TEST_TOKEN_UNSET"))
                .unwrap();
        assert!(matches!(
            provider.complete("x").unwrap_err(),
            ProviderError::Auth(_)
        ));
    }
}
