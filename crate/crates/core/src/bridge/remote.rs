use std::collections::HashMap;
use std::sync::Arc;
use std::thread;

use parking_lot::RwLock;

use super::wire::{self, HealthResponse};
use super::{BridgeClient, BridgeEndpoint};
use crate::error::{Error, Result};
use crate::prompt::MASK;
use crate::scoring::MaskedTokenScorer;
use crate::selection::{GenerationRequest, TemplateGenerator};

/// [`MaskedTokenScorer`] served by a model bridge.
///
/// Results are memoized per text (and per text/candidate for mask
/// scoring). The canonical `[MASK]` placeholder is rewritten to the model's
/// own mask token before mask-candidate requests are sent.
pub struct RemoteScorer {
    client: Arc<BridgeClient>,
    health: HealthResponse,
    tokens: RwLock<HashMap<String, Vec<String>>>,
    logprobs: RwLock<HashMap<String, Vec<f64>>>,
    candidates: RwLock<HashMap<(String, String), f64>>,
}

fn health_check(client: &BridgeClient) -> Result<HealthResponse> {
    let health: HealthResponse = client.get(wire::HEALTH)?;
    health.validate()?;
    Ok(health)
}

impl RemoteScorer {
    /// Connects and runs the health check.
    pub fn connect(endpoint: BridgeEndpoint) -> Result<Self> {
        Self::with_client(Arc::new(BridgeClient::new(endpoint)?))
    }

    pub fn with_client(client: Arc<BridgeClient>) -> Result<Self> {
        let health = health_check(&client)?;
        log::info!(
            "bridge {} serving {} (vocab {})",
            client.endpoint().base_url,
            health.model,
            health.vocab_size
        );
        Ok(Self {
            client,
            health,
            tokens: RwLock::default(),
            logprobs: RwLock::default(),
            candidates: RwLock::default(),
        })
    }

    pub fn health(&self) -> &HealthResponse {
        &self.health
    }

    pub fn mask_token(&self) -> &str {
        self.health.mask_token.as_deref().unwrap_or(MASK)
    }

    fn fetch_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        let resp: wire::TokenLogprobsResponse = self.client.post(
            wire::TOKEN_LOGPROBS,
            &wire::TextRequest {
                text: text.to_string(),
            },
        )?;
        resp.validate()?;
        Ok(resp.logprobs)
    }

    /// Scores many texts, issuing up to `max_in_flight` requests at once.
    /// Output is positionally aligned with `texts`.
    pub fn token_logprobs_many(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let width = self.client.endpoint().max_in_flight.max(1);
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(width) {
            let results: Vec<Result<Vec<f64>>> = thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|t| s.spawn(move || self.token_logprobs(t)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("scoring thread panicked"))
                    .collect()
            });
            for r in results {
                out.push(r?);
            }
        }
        Ok(out)
    }

    fn fetch_candidates(&self, text_with_mask: &str, candidates: &[String]) -> Result<Vec<f64>> {
        let native = self.mask_token();
        let request = wire::MaskCandidatesRequest {
            text_with_mask: text_with_mask.replace(MASK, native),
            mask_token: native.to_string(),
            candidates: candidates.to_vec(),
        };
        let resp: wire::MaskCandidatesResponse = self.client.post(wire::MASK_CANDIDATES, &request)?;
        Ok(resp.aligned(candidates)?)
    }
}

impl MaskedTokenScorer for RemoteScorer {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        if let Some(hit) = self.tokens.read().get(text) {
            return Ok(hit.clone());
        }
        let resp: wire::TokenizeResponse = self.client.post(
            wire::TOKENIZE,
            &wire::TextRequest {
                text: text.to_string(),
            },
        )?;
        resp.validate()?;
        self.tokens.write().insert(text.to_string(), resp.tokens.clone());
        Ok(resp.tokens)
    }

    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        if let Some(hit) = self.logprobs.read().get(text) {
            return Ok(hit.clone());
        }
        let value = self.fetch_logprobs(text)?;
        self.logprobs.write().insert(text.to_string(), value.clone());
        Ok(value)
    }

    fn mask_candidate_logprobs(&self, text_with_mask: &str, candidates: &[String]) -> Result<Vec<f64>> {
        if text_with_mask.matches(MASK).count() != 1 {
            return Err(Error::ScorerFailure(format!(
                "expected exactly one {MASK} in the text"
            )));
        }
        let missing: Vec<String> = {
            let cache = self.candidates.read();
            let mut seen = std::collections::HashSet::new();
            candidates
                .iter()
                .filter(|c| !cache.contains_key(&(text_with_mask.to_string(), (*c).clone())))
                .filter(|c| seen.insert(c.as_str()))
                .cloned()
                .collect()
        };
        if !missing.is_empty() {
            let batch = self.client.endpoint().max_batch.max(1);
            let chunks: Vec<&[String]> = missing.chunks(batch).collect();
            let results: Vec<Result<Vec<f64>>> = if chunks.len() == 1 {
                vec![self.fetch_candidates(text_with_mask, chunks[0])]
            } else {
                thread::scope(|s| {
                    let handles: Vec<_> = chunks
                        .iter()
                        .map(|c| s.spawn(move || self.fetch_candidates(text_with_mask, c)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("scoring thread panicked"))
                        .collect()
                })
            };
            let mut fresh = Vec::with_capacity(missing.len());
            for r in results {
                fresh.extend(r?);
            }
            let mut cache = self.candidates.write();
            for (c, lp) in missing.into_iter().zip(fresh) {
                cache.insert((text_with_mask.to_string(), c), lp);
            }
        }
        let cache = self.candidates.read();
        Ok(candidates
            .iter()
            .map(|c| cache[&(text_with_mask.to_string(), c.clone())])
            .collect())
    }

    fn vocab_size(&self) -> usize {
        self.health.vocab_size as usize
    }
}

/// Template generator served by the bridge's `/v1/generate`.
pub struct RemoteGenerator {
    client: Arc<BridgeClient>,
    health: HealthResponse,
}

impl RemoteGenerator {
    pub fn connect(endpoint: BridgeEndpoint) -> Result<Self> {
        Self::with_client(Arc::new(BridgeClient::new(endpoint)?))
    }

    pub fn with_client(client: Arc<BridgeClient>) -> Result<Self> {
        let health = health_check(&client)?;
        Ok(Self { client, health })
    }

    pub fn health(&self) -> &HealthResponse {
        &self.health
    }
}

impl TemplateGenerator for RemoteGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>> {
        let body = wire::GenerateRequest {
            input: request.input.clone(),
            filled_label_word: request.filled_label_word.clone(),
            num_return: request.num_return,
            max_new_tokens: request.max_new_tokens,
        };
        let resp: wire::GenerateResponse = self.client.post(wire::GENERATE, &body)?;
        Ok(resp.templates)
    }
}
