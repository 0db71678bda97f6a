//! Client for the model bridge, an HTTP service that wraps a real masked
//! language model (and optionally a seq2seq template generator).
//!
//! Wire protocol, UTF-8 JSON over HTTP:
//!
//! | request | body | response |
//! |---|---|---|
//! | `POST /v1/tokenize` | `{"text"}` | `{"tokens": [str], "ids": [int]}` |
//! | `POST /v1/token_logprobs` | `{"text"}` | `{"logprobs": [float]}` |
//! | `POST /v1/mask_candidates` | `{"text_with_mask", "mask_token", "candidates"}` | `{"logprobs": {word: float}}` |
//! | `POST /v1/generate` | `{"input", "filled_label_word", "num_return", "max_new_tokens"}` | `{"templates": [str]}` |
//! | `GET /v1/health` | | `{"model", "vocab_size", ...}` |
//!
//! Log-probabilities are natural logs, finite and `<= 0`; anything else is a
//! protocol error.

mod client;
mod remote;
pub mod wire;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use client::BridgeClient;
pub use remote::{RemoteGenerator, RemoteScorer};

/// Environment variable holding the bridge base URL. An explicit URL wins.
pub const BRIDGE_URL_ENV: &str = "PPLPROMPT_BRIDGE_URL";
/// Optional request timeout override, in milliseconds.
pub const BRIDGE_TIMEOUT_ENV: &str = "PPLPROMPT_BRIDGE_TIMEOUT_MS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Attempts after the first failed one.
    pub retries: u32,
    /// Delay before the first retry; doubles after each further failure.
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            backoff_ms: 200,
        }
    }
}

impl RetryPolicy {
    pub(crate) fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1u64 << attempt.min(16)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeEndpoint {
    pub base_url: String,
    pub timeout_ms: u64,
    /// Most candidates sent in one `/v1/mask_candidates` request.
    pub max_batch: usize,
    /// Most requests in flight at once across all threads.
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl BridgeEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout_ms: 30_000,
            max_batch: 64,
            max_in_flight: 8,
            retry: RetryPolicy::default(),
        }
    }

    /// Uses `url` if given, else [`BRIDGE_URL_ENV`]. The timeout comes from
    /// [`BRIDGE_TIMEOUT_ENV`] when set; callers apply flag overrides on top.
    pub fn resolve(url: Option<&str>) -> Result<Self> {
        let mut endpoint = Self::resolve_url(url)?;
        if let Ok(raw) = std::env::var(BRIDGE_TIMEOUT_ENV) {
            endpoint.timeout_ms = raw.trim().parse().map_err(|_| {
                Error::Config(format!("{BRIDGE_TIMEOUT_ENV}={raw:?} is not a number of milliseconds"))
            })?;
        }
        Ok(endpoint)
    }

    fn resolve_url(url: Option<&str>) -> Result<Self> {
        match url.filter(|u| !u.is_empty()) {
            Some(u) => Ok(Self::new(u)),
            None => std::env::var(BRIDGE_URL_ENV)
                .ok()
                .filter(|u| !u.is_empty())
                .map(Self::new)
                .ok_or_else(|| {
                    Error::Config(format!("no bridge URL given and {BRIDGE_URL_ENV} is unset"))
                }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::Config("bridge timeout must be > 0".into()));
        }
        if self.max_batch == 0 || self.max_in_flight == 0 {
            return Err(Error::Config("bridge batch and in-flight limits must be >= 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Config(format!("bridge URL {:?} is not http(s)", self.base_url)));
        }
        Ok(())
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_validation() {
        let mut e = BridgeEndpoint::new("http://127.0.0.1:1/");
        assert!(e.validate().is_ok());
        assert_eq!(e.url("/v1/health"), "http://127.0.0.1:1/v1/health");
        e.timeout_ms = 0;
        assert!(e.validate().is_err());
        assert!(BridgeEndpoint::new("ftp://x").validate().is_err());
        let mut e = BridgeEndpoint::new("http://x");
        e.max_batch = 0;
        assert!(e.validate().is_err());
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            retries: 3,
            backoff_ms: 10,
        };
        assert_eq!(p.delay(0), Duration::from_millis(10));
        assert_eq!(p.delay(2), Duration::from_millis(40));
    }

    #[test]
    fn explicit_url_wins() {
        assert_eq!(
            BridgeEndpoint::resolve(Some("http://flag:1")).unwrap().base_url,
            "http://flag:1"
        );
    }
}
