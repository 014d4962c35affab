//! Blocking JSON-over-HTTP client with bounded exponential backoff, shared by
//! the generation backend and the embedding provider.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(250),
            factor: 2.0,
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let scaled = self.base_delay.as_secs_f64() * self.factor.powi(retry as i32);
        Duration::from_secs_f64(scaled.min(self.max_delay.as_secs_f64()))
    }
}

fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
    retry: RetryPolicy,
}

impl JsonClient {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, retry: RetryPolicy, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            agent: config.into(),
            endpoint: endpoint.into(),
            token,
            retry,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// POSTs `body` and decodes the JSON response, retrying transport errors
    /// and 408/429/5xx responses. Other statuses fail immediately.
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            let mut req = self.agent.post(&self.endpoint);
            if let Some(token) = &self.token {
                req = req.header("Authorization", &format!("Bearer {token}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        return resp.body_mut().read_json::<R>().map_err(|e| Error::Transport {
                            attempts: attempt,
                            message: format!("undecodable response body: {e}"),
                        });
                    }
                    last = format!("HTTP {status} from {}", self.endpoint);
                    if !is_transient_status(status) {
                        return Err(Error::Transport {
                            attempts: attempt,
                            message: last,
                        });
                    }
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < self.retry.max_attempts {
                let delay = self.retry.delay(attempt - 1);
                log::warn!("request to {} failed ({last}); retrying in {delay:?}", self.endpoint);
                std::thread::sleep(delay);
            }
        }
        Err(Error::Transport {
            attempts: self.retry.max_attempts.max(1),
            message: last,
        })
    }
}
