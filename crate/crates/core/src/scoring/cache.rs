use std::collections::HashMap;

use parking_lot::RwLock;

use super::MaskedTokenScorer;
use crate::error::Result;

/// Memoizes a scorer on exact-string keys.
///
/// Scorers are pure, so a hit returns exactly what the inner scorer would
/// have returned. Concurrent misses on the same key may both compute; the
/// last write wins and the values are identical.
pub struct CachedScorer<S> {
    inner: S,
    tokens: RwLock<HashMap<String, Vec<String>>>,
    logprobs: RwLock<HashMap<String, Vec<f64>>>,
    candidates: RwLock<HashMap<(String, String), f64>>,
}

impl<S: MaskedTokenScorer> CachedScorer<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            tokens: RwLock::default(),
            logprobs: RwLock::default(),
            candidates: RwLock::default(),
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn cached_texts(&self) -> usize {
        self.logprobs.read().len()
    }
}

impl<S: MaskedTokenScorer> MaskedTokenScorer for CachedScorer<S> {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        if let Some(hit) = self.tokens.read().get(text) {
            return Ok(hit.clone());
        }
        let value = self.inner.tokenize(text)?;
        self.tokens.write().insert(text.to_string(), value.clone());
        Ok(value)
    }

    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        if let Some(hit) = self.logprobs.read().get(text) {
            return Ok(hit.clone());
        }
        let value = self.inner.token_logprobs(text)?;
        self.logprobs.write().insert(text.to_string(), value.clone());
        Ok(value)
    }

    fn mask_candidate_logprobs(&self, text_with_mask: &str, candidates: &[String]) -> Result<Vec<f64>> {
        let missing: Vec<String> = {
            let cache = self.candidates.read();
            candidates
                .iter()
                .filter(|c| !cache.contains_key(&(text_with_mask.to_string(), (*c).clone())))
                .cloned()
                .collect()
        };
        if !missing.is_empty() {
            let fresh = self.inner.mask_candidate_logprobs(text_with_mask, &missing)?;
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
        self.inner.vocab_size()
    }
}
