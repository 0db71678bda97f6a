use std::thread;
use std::time::Duration;

use log::debug;
use parking_lot::{Condvar, Mutex};
use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::Agent;

use super::BridgeEndpoint;
use crate::error::{BridgeError, Error, Result};

/// Counting semaphore bounding concurrent requests.
struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock();
        while *n == 0 {
            self.freed.wait(&mut n);
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock() += 1;
        self.0.freed.notify_one();
    }
}

/// Blocking JSON-over-HTTP client shared by the remote scorer and generator.
pub struct BridgeClient {
    endpoint: BridgeEndpoint,
    agent: Agent,
    limiter: Limiter,
}

impl BridgeClient {
    pub fn new(endpoint: BridgeEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = Limiter::new(endpoint.max_in_flight);
        Ok(Self {
            endpoint,
            agent,
            limiter,
        })
    }

    pub fn endpoint(&self) -> &BridgeEndpoint {
        &self.endpoint
    }

    pub fn get<R: DeserializeOwned>(&self, path: &str) -> Result<R> {
        let url = self.endpoint.url(path);
        let body = self.with_retries(path, || {
            let resp = self.agent.get(&url).call();
            read_response(resp)
        })?;
        decode(path, &body)
    }

    /// POSTs `body`, retrying transport failures with the same bytes.
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R> {
        let url = self.endpoint.url(path);
        let payload = serde_json::to_string(body).expect("request serializes");
        let body = self.with_retries(path, || {
            let resp = self
                .agent
                .post(&url)
                .content_type("application/json")
                .send(payload.as_str());
            read_response(resp)
        })?;
        decode(path, &body)
    }

    fn with_retries(
        &self,
        path: &str,
        mut attempt: impl FnMut() -> Result<String, BridgeError>,
    ) -> Result<String> {
        let policy = self.endpoint.retry;
        let mut failures = 0u32;
        loop {
            let outcome = {
                let _permit = self.limiter.acquire();
                attempt()
            };
            match outcome {
                Ok(body) => return Ok(body),
                Err(e) if e.is_retryable() && failures < policy.retries => {
                    debug!("{path}: attempt {} failed ({e}), retrying", failures + 1);
                    thread::sleep(policy.delay(failures));
                    failures += 1;
                }
                Err(e) => return Err(Error::Bridge(e)),
            }
        }
    }
}

fn read_response(
    resp: std::result::Result<ureq::http::Response<ureq::Body>, ureq::Error>,
) -> Result<String, BridgeError> {
    let mut resp = resp.map_err(|e| BridgeError::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| BridgeError::Transport(format!("reading body: {e}")))?;
    match status {
        200..=299 => Ok(text),
        502..=504 => Err(BridgeError::Transport(format!("status {status}: {}", error_message(&text)))),
        _ => Err(BridgeError::Model {
            status,
            message: error_message(&text),
        }),
    }
}

/// Pulls `error`/`detail` out of a JSON error body, else the raw text.
fn error_message(body: &str) -> String {
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(body) {
        for key in ["error", "detail", "message"] {
            if let Some(m) = v.get(key) {
                return match m.as_str() {
                    Some(s) => s.to_string(),
                    None => m.to_string(),
                };
            }
        }
    }
    body.trim().to_string()
}

fn decode<R: DeserializeOwned>(path: &str, body: &str) -> Result<R> {
    serde_json::from_str(body)
        .map_err(|e| Error::Bridge(BridgeError::Protocol(format!("{path}: malformed response: {e}"))))
}
