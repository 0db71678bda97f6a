//! Request and response bodies of the bridge protocol.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::BridgeError;

pub const HEALTH: &str = "/v1/health";
pub const TOKENIZE: &str = "/v1/tokenize";
pub const TOKEN_LOGPROBS: &str = "/v1/token_logprobs";
pub const MASK_CANDIDATES: &str = "/v1/mask_candidates";
pub const GENERATE: &str = "/v1/generate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub tokens: Vec<String>,
    pub ids: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprobsResponse {
    pub logprobs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskCandidatesRequest {
    pub text_with_mask: String,
    pub mask_token: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskCandidatesResponse {
    pub logprobs: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub input: String,
    pub filled_label_word: String,
    pub num_return: usize,
    pub max_new_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub templates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub model: String,
    pub vocab_size: u64,
    /// Native mask token of the model; `[MASK]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_token: Option<String>,
    #[serde(flatten)]
    pub extra: IndexMap<String, serde_json::Value>,
}

pub(crate) fn check_logprob(lp: f64, what: &str) -> Result<(), BridgeError> {
    if lp.is_finite() && lp <= 0.0 {
        Ok(())
    } else {
        Err(BridgeError::Protocol(format!("{what}: log-probability {lp} is not finite and <= 0")))
    }
}

impl TokenizeResponse {
    pub(crate) fn validate(&self) -> Result<(), BridgeError> {
        if self.tokens.len() != self.ids.len() {
            return Err(BridgeError::Protocol(format!(
                "tokenize returned {} tokens but {} ids",
                self.tokens.len(),
                self.ids.len()
            )));
        }
        Ok(())
    }
}

impl TokenLogprobsResponse {
    pub(crate) fn validate(&self) -> Result<(), BridgeError> {
        self.logprobs
            .iter()
            .try_for_each(|&lp| check_logprob(lp, "token_logprobs"))
    }
}

impl MaskCandidatesResponse {
    /// Scores for exactly `candidates`, in their order.
    pub(crate) fn aligned(&self, candidates: &[String]) -> Result<Vec<f64>, BridgeError> {
        if self.logprobs.len() != candidates.len() {
            return Err(BridgeError::Protocol(format!(
                "mask_candidates returned {} scores for {} candidates",
                self.logprobs.len(),
                candidates.len()
            )));
        }
        candidates
            .iter()
            .map(|c| {
                let lp = *self.logprobs.get(c).ok_or_else(|| {
                    BridgeError::Protocol(format!("mask_candidates response lacks {c:?}"))
                })?;
                check_logprob(lp, "mask_candidates")?;
                Ok(lp)
            })
            .collect()
    }
}

impl HealthResponse {
    pub(crate) fn validate(&self) -> Result<(), BridgeError> {
        if self.vocab_size == 0 {
            return Err(BridgeError::Protocol("health reports vocab_size 0".into()));
        }
        if let Some(m) = &self.mask_token {
            if m.is_empty() {
                return Err(BridgeError::Protocol("health reports an empty mask token".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_bodies_are_bit_exact() {
        let r = MaskCandidatesRequest {
            text_with_mask: "<mask> pleased.".into(),
            mask_token: "<mask>".into(),
            candidates: vec!["w1".into(), "w2".into()],
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"text_with_mask":"<mask> pleased.","mask_token":"<mask>","candidates":["w1","w2"]}"#
        );
        let g = GenerateRequest {
            input: "x".into(),
            filled_label_word: "very".into(),
            num_return: 1,
            max_new_tokens: 20,
        };
        assert_eq!(
            serde_json::to_string(&g).unwrap(),
            r#"{"input":"x","filled_label_word":"very","num_return":1,"max_new_tokens":20}"#
        );
    }

    #[test]
    fn candidate_alignment() {
        let r: MaskCandidatesResponse =
            serde_json::from_str(r#"{"logprobs": {"b": -2.0, "a": -0.5}}"#).unwrap();
        assert_eq!(r.aligned(&["a".into(), "b".into()]).unwrap(), vec![-0.5, -2.0]);
        assert!(r.aligned(&["a".into()]).is_err());
        assert!(r.aligned(&["a".into(), "c".into()]).is_err());
        let pos: MaskCandidatesResponse = serde_json::from_str(r#"{"logprobs": {"a": 0.5}}"#).unwrap();
        assert!(pos.aligned(&["a".into()]).is_err());
    }

    #[test]
    fn health_keeps_extra_metadata() {
        let h: HealthResponse = serde_json::from_str(
            r#"{"model": "m", "vocab_size": 21128, "mask_token": "[MASK]", "tokenizer_version": "1"}"#,
        )
        .unwrap();
        assert!(h.validate().is_ok());
        assert_eq!(h.extra["tokenizer_version"], "1");
        let zero: HealthResponse = serde_json::from_str(r#"{"model": "m", "vocab_size": 0}"#).unwrap();
        assert!(zero.validate().is_err());
    }
}
