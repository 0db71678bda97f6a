//! Golden-file and batching conformance checks against [`StubBridge`],
//! shared by the protocol tests and the acceptance target.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use pplprompt::bridge::{BridgeClient, BridgeEndpoint, RemoteGenerator, RemoteScorer};
use pplprompt::selection::{GenerationRequest, TemplateGenerator};
use pplprompt::MaskedTokenScorer;
use serde::Deserialize;

use super::{fake_candidate_logprob, StubBridge, STUB_MASK};

#[derive(Debug, Deserialize)]
pub struct Golden {
    pub method: String,
    pub path: String,
    pub request: Option<String>,
    pub status: u16,
    pub response: String,
}

pub const ENDPOINTS: [&str; 5] = ["health", "tokenize", "token_logprobs", "mask_candidates", "generate"];

pub fn golden(name: &str) -> Golden {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden/bridge")
        .join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).expect("golden file parses")
}

pub fn fast_endpoint(url: &str) -> BridgeEndpoint {
    let mut e = BridgeEndpoint::new(url);
    e.timeout_ms = 5_000;
    e.retry.backoff_ms = 1;
    e
}

/// A stub replaying every golden response.
pub fn recorded_stub() -> StubBridge {
    let stub = StubBridge::start();
    for name in ENDPOINTS {
        let g = golden(name);
        stub.record(&g.path, g.status, &g.response);
    }
    stub
}

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn check_request(stub: &StubBridge, name: &str) -> Result<(), String> {
    let g = golden(name);
    let seen = stub.captured_on(&g.path);
    ensure(seen.len() == 1, format!("{name}: expected 1 request, saw {}", seen.len()))?;
    ensure(seen[0].method == g.method, format!("{name}: method {}", seen[0].method))?;
    let expected = g.request.unwrap_or_default();
    ensure(
        seen[0].body == expected,
        format!("{name}: body {:?} != golden {:?}", seen[0].body, expected),
    )
}

/// Drives one endpoint against the recorded stub and compares both the
/// request bytes and the decoded result with the golden file.
pub fn check_endpoint(name: &str) -> Result<(), String> {
    let stub = recorded_stub();
    let client = Arc::new(BridgeClient::new(fast_endpoint(&stub.url)).map_err(|e| e.to_string())?);
    let scorer = RemoteScorer::with_client(client.clone()).map_err(|e| e.to_string())?;
    let e = |err: pplprompt::Error| format!("{name}: {err}");
    match name {
        "health" => {
            let h = scorer.health();
            ensure(h.model == "recorded-mlm" && h.vocab_size == 21128, "health fields")?;
            ensure(scorer.mask_token() == "<mask>", "mask token")?;
            ensure(h.extra.get("tokenizer").and_then(|v| v.as_str()) == Some("wordpiece-2"), "extra metadata kept")?;
            ensure(scorer.vocab_size() == 21128, "vocab size")?;
            check_request(&stub, name)
        }
        "tokenize" => {
            let toks = scorer.tokenize("the film was great").map_err(e)?;
            ensure(toks == ["the", "film", "was", "great"], format!("tokens {toks:?}"))?;
            check_request(&stub, name)
        }
        "token_logprobs" => {
            let lps = scorer.token_logprobs("the film was great").map_err(e)?;
            let want = [0.5f64.ln(), 0.25f64.ln(), 0.125f64.ln(), 0.5f64.ln()];
            ensure(lps == want, format!("logprobs {lps:?}"))?;
            check_request(&stub, name)
        }
        "mask_candidates" => {
            let cands = vec!["very".to_string(), "not".to_string()];
            let lps = scorer
                .mask_candidate_logprobs("the film was great [MASK] pleased .", &cands)
                .map_err(e)?;
            ensure(lps == [-0.25, -2.5], format!("aligned scores {lps:?}"))?;
            check_request(&stub, name)
        }
        "generate" => {
            let generator = RemoteGenerator::with_client(client).map_err(e)?;
            let got = generator
                .generate(&GenerationRequest {
                    input: "the film was great".into(),
                    filled_label_word: "very".into(),
                    num_return: 2,
                    max_new_tokens: 20,
                })
                .map_err(e)?;
            ensure(got == ["[MASK] pleased .", "i am [MASK] happy"], format!("templates {got:?}"))?;
            check_request(&stub, name)
        }
        other => Err(format!("unknown endpoint {other}")),
    }
}

/// Same scores whether candidates go out in one request or in chunks of
/// two, and whether texts are scored one by one or fanned out.
pub fn check_batching_equivalence() -> Result<(), String> {
    let stub = StubBridge::start();
    let text = "the film was [MASK] good .";
    let candidates: Vec<String> = ["very", "not", "so", "quite", "really", "hardly", "barely"]
        .iter()
        .map(|s| s.to_string())
        .collect();

    let whole = RemoteScorer::connect(fast_endpoint(&stub.url)).map_err(|e| e.to_string())?;
    stub.clear();
    let a = whole.mask_candidate_logprobs(text, &candidates).map_err(|e| e.to_string())?;
    let whole_requests = stub.captured_on("/v1/mask_candidates").len();

    let mut small = fast_endpoint(&stub.url);
    small.max_batch = 2;
    let chunked = RemoteScorer::connect(small).map_err(|e| e.to_string())?;
    stub.clear();
    let b = chunked.mask_candidate_logprobs(text, &candidates).map_err(|e| e.to_string())?;
    let chunk_requests = stub.captured_on("/v1/mask_candidates");

    ensure(a == b, format!("batched {a:?} != unbatched {b:?}"))?;
    ensure(whole_requests == 1, format!("unchunked sent {whole_requests} requests"))?;
    ensure(chunk_requests.len() == 4, format!("chunked sent {} requests", chunk_requests.len()))?;
    let native = text.replace("[MASK]", STUB_MASK);
    for (c, lp) in candidates.iter().zip(&a) {
        ensure(*lp == fake_candidate_logprob(&native, c), format!("{c}: {lp}"))?;
    }

    let texts: Vec<String> = (0..9).map(|i| format!("review {i} was fine {}", "x".repeat(i))).collect();
    let fresh = RemoteScorer::connect(fast_endpoint(&stub.url)).map_err(|e| e.to_string())?;
    let many = fresh.token_logprobs_many(&texts).map_err(|e| e.to_string())?;
    let single = RemoteScorer::connect(fast_endpoint(&stub.url)).map_err(|e| e.to_string())?;
    for (t, lp) in texts.iter().zip(&many) {
        let one = single.token_logprobs(t).map_err(|e| e.to_string())?;
        ensure(&one == lp, format!("{t}: fan-out {lp:?} != single {one:?}"))?;
    }
    Ok(())
}
