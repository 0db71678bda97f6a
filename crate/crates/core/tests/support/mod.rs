//! In-process stand-in for the model bridge, speaking plain HTTP/1.1 over a
//! TCP socket. It serves a small deterministic fake model, can replay
//! recorded responses per path, and injects faults on request.

#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

pub mod protocol;

pub const STUB_MASK: &str = "<mask>";

#[derive(Debug, Clone, PartialEq)]
pub struct Captured {
    pub method: String,
    pub path: String,
    pub body: String,
}

#[derive(Default)]
struct State {
    captured: Mutex<Vec<Captured>>,
    /// Connections to drop, after reading the request, before answering.
    drops: AtomicUsize,
    /// Fixed `(status, body)` per path, served instead of the fake model.
    recorded: Mutex<HashMap<String, (u16, String)>>,
    delay_ms: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    stop: AtomicBool,
}

pub struct StubBridge {
    pub url: String,
    state: Arc<State>,
    addr: std::net::SocketAddr,
}

impl StubBridge {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let addr = listener.local_addr().expect("local addr");
        let state = Arc::new(State::default());
        let s = state.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                if s.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let s = s.clone();
                thread::spawn(move || handle(stream, &s));
            }
        });
        Self {
            url: format!("http://{addr}"),
            state,
            addr,
        }
    }

    pub fn drop_next(&self, n: usize) {
        self.state.drops.store(n, Ordering::SeqCst);
    }

    pub fn record(&self, path: &str, status: u16, body: &str) {
        self.state
            .recorded
            .lock()
            .unwrap()
            .insert(path.to_string(), (status, body.to_string()));
    }

    pub fn set_delay_ms(&self, ms: usize) {
        self.state.delay_ms.store(ms, Ordering::SeqCst);
    }

    pub fn captured(&self) -> Vec<Captured> {
        self.state.captured.lock().unwrap().clone()
    }

    pub fn captured_on(&self, path: &str) -> Vec<Captured> {
        self.captured().into_iter().filter(|c| c.path == path).collect()
    }

    pub fn clear(&self) {
        self.state.captured.lock().unwrap().clear();
    }

    pub fn peak_in_flight(&self) -> usize {
        self.state.peak_in_flight.load(Ordering::SeqCst)
    }
}

impl Drop for StubBridge {
    fn drop(&mut self) {
        self.state.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
    }
}

fn read_request(stream: &TcpStream) -> Option<Captured> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut length = 0usize;
    let mut chunked = false;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            match k.trim().to_ascii_lowercase().as_str() {
                "content-length" => length = v.trim().parse().ok()?,
                "transfer-encoding" => chunked = v.trim().eq_ignore_ascii_case("chunked"),
                _ => {}
            }
        }
    }
    let mut body = Vec::new();
    if chunked {
        loop {
            let mut size = String::new();
            reader.read_line(&mut size).ok()?;
            let n = usize::from_str_radix(size.trim(), 16).ok()?;
            let mut chunk = vec![0; n + 2];
            reader.read_exact(&mut chunk).ok()?;
            if n == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
    } else {
        body.resize(length, 0);
        reader.read_exact(&mut body).ok()?;
    }
    Some(Captured {
        method,
        path,
        body: String::from_utf8(body).ok()?,
    })
}

fn handle(mut stream: TcpStream, s: &State) {
    let Some(req) = read_request(&stream) else { return };
    s.captured.lock().unwrap().push(req.clone());
    let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    s.peak_in_flight.fetch_max(now, Ordering::SeqCst);
    let delay = s.delay_ms.load(Ordering::SeqCst);
    if delay > 0 {
        thread::sleep(Duration::from_millis(delay as u64));
    }
    let dropped = s
        .drops
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok();
    if dropped {
        s.in_flight.fetch_sub(1, Ordering::SeqCst);
        let _ = stream.shutdown(Shutdown::Both);
        return;
    }
    let recorded = s.recorded.lock().unwrap().get(&req.path).cloned();
    let (status, body) = recorded.unwrap_or_else(|| fake_model(&req));
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        422 => "Unprocessable Entity",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
}

/// Deterministic per-token log-probability of the fake model.
pub fn fake_token_logprob(token: &str) -> f64 {
    -0.1 * token.chars().count() as f64 - 0.05
}

/// Deterministic mask-candidate log-probability: a pure function of
/// `(text, candidate)`, so batching cannot change it.
pub fn fake_candidate_logprob(text_with_mask: &str, candidate: &str) -> f64 {
    let h = candidate
        .bytes()
        .chain(text_with_mask.bytes())
        .fold(17u64, |acc, b| acc.wrapping_mul(31).wrapping_add(b as u64));
    -((h % 97) as f64) / 10.0 - 0.01
}

fn bad_request(msg: &str) -> (u16, String) {
    (400, json!({ "error": msg }).to_string())
}

fn fake_model(req: &Captured) -> (u16, String) {
    let body: Value = if req.method == "POST" {
        match serde_json::from_str(&req.body) {
            Ok(v) => v,
            Err(_) => return bad_request("body is not JSON"),
        }
    } else {
        Value::Null
    };
    let text = || body.get("text").and_then(Value::as_str);
    match (req.method.as_str(), req.path.as_str()) {
        ("GET", "/v1/health") => (
            200,
            json!({"model": "stub-mlm", "vocab_size": 1000, "mask_token": STUB_MASK, "tokenizer": "whitespace-1"})
                .to_string(),
        ),
        ("POST", "/v1/tokenize") => {
            let Some(t) = text() else { return bad_request("missing text") };
            let tokens: Vec<&str> = t.split_whitespace().collect();
            let ids: Vec<u64> = tokens
                .iter()
                .map(|w| w.bytes().map(u64::from).sum::<u64>() % 1000)
                .collect();
            (200, json!({ "tokens": tokens, "ids": ids }).to_string())
        }
        ("POST", "/v1/token_logprobs") => {
            let Some(t) = text() else { return bad_request("missing text") };
            let lps: Vec<f64> = t.split_whitespace().map(fake_token_logprob).collect();
            (200, json!({ "logprobs": lps }).to_string())
        }
        ("POST", "/v1/mask_candidates") => {
            let (Some(t), Some(m), Some(cands)) = (
                body.get("text_with_mask").and_then(Value::as_str),
                body.get("mask_token").and_then(Value::as_str),
                body.get("candidates").and_then(Value::as_array),
            ) else {
                return bad_request("missing fields");
            };
            if t.matches(m).count() != 1 {
                return bad_request("text must contain the mask token exactly once");
            }
            let mut out = serde_json::Map::new();
            for c in cands {
                let c = c.as_str().unwrap_or_default();
                if c.starts_with("oov") {
                    return (422, json!({ "error": format!("{c} is out of vocabulary") }).to_string());
                }
                out.insert(c.to_string(), json!(fake_candidate_logprob(t, c)));
            }
            (200, json!({ "logprobs": out }).to_string())
        }
        ("POST", "/v1/generate") => {
            let input = body.get("input").and_then(Value::as_str).unwrap_or_default();
            let word = body.get("filled_label_word").and_then(Value::as_str).unwrap_or_default();
            let n = body.get("num_return").and_then(Value::as_u64).unwrap_or(1) as usize;
            if input == "EMPTY" {
                return (200, json!({ "templates": [] }).to_string());
            }
            let templates: Vec<String> = (0..n).map(|i| format!("[MASK] {word} take {i} .")).collect();
            (200, json!({ "templates": templates }).to_string())
        }
        _ => (404, json!({ "error": "no such endpoint" }).to_string()),
    }
}
