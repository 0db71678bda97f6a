//! Masked-LM scoring: the scorer contract and pseudo-perplexity.
//!
//! Pseudo-perplexity masks each token of a sequence in turn, takes the
//! log-probability the model assigns to the true token given the rest of the
//! sequence, and exponentiates the mean negative log-likelihood. All logs are
//! natural logs.

mod cache;
mod count;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::{build_prompted_input, fill_mask, Template, Verbalizer};

pub use cache::CachedScorer;
pub use count::{CountScorer, BOS, EOS, UNK};
pub use table::{TableEntry, TableScorer, WILDCARD};

/// Per-token NLLs above this are clamped so one zero-probability token
/// cannot make a dataset mean infinite.
pub const MAX_TOKEN_NLL: f64 = 50.0;

/// The only model dependency of the toolkit.
///
/// Tokenization belongs to the scorer. Every log-probability returned must
/// be finite and `<= 0`, and all methods must be deterministic.
pub trait MaskedTokenScorer: Send + Sync {
    fn tokenize(&self, text: &str) -> Result<Vec<String>>;

    /// `log p(x_i | x with position i masked)` for each token `x_i` of `text`.
    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>>;

    /// Log-probability of each candidate at the single mask position of
    /// `text_with_mask`, aligned with `candidates`.
    fn mask_candidate_logprobs(&self, text_with_mask: &str, candidates: &[String])
        -> Result<Vec<f64>>;

    fn vocab_size(&self) -> usize;
}

impl<S: MaskedTokenScorer + ?Sized> MaskedTokenScorer for &S {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        (**self).tokenize(text)
    }
    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        (**self).token_logprobs(text)
    }
    fn mask_candidate_logprobs(&self, text: &str, candidates: &[String]) -> Result<Vec<f64>> {
        (**self).mask_candidate_logprobs(text, candidates)
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
}

impl<S: MaskedTokenScorer + ?Sized> MaskedTokenScorer for Box<S> {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        (**self).tokenize(text)
    }
    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        (**self).token_logprobs(text)
    }
    fn mask_candidate_logprobs(&self, text: &str, candidates: &[String]) -> Result<Vec<f64>> {
        (**self).mask_candidate_logprobs(text, candidates)
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoPerplexity {
    pub value: f64,
    pub token_count: usize,
    /// Per-token negative log-likelihood in nats, after clamping.
    pub per_token_nll: Vec<f64>,
    /// How many tokens hit [`MAX_TOKEN_NLL`].
    pub clamped: usize,
}

impl PseudoPerplexity {
    pub fn from_logprobs(logprobs: &[f64]) -> Result<Self> {
        if logprobs.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut clamped = 0;
        let mut per_token_nll = Vec::with_capacity(logprobs.len());
        for &lp in logprobs {
            if lp.is_nan() || lp > 0.0 {
                return Err(Error::ScorerFailure(format!(
                    "scorer returned invalid log-probability {lp}"
                )));
            }
            let nll = -lp;
            if nll > MAX_TOKEN_NLL {
                clamped += 1;
                per_token_nll.push(MAX_TOKEN_NLL);
            } else {
                // -0.0 -> 0.0
                per_token_nll.push(nll + 0.0);
            }
        }
        let mean = per_token_nll.iter().sum::<f64>() / per_token_nll.len() as f64;
        Ok(Self {
            value: mean.exp(),
            token_count: per_token_nll.len(),
            per_token_nll,
            clamped,
        })
    }

    pub fn mean_nll(&self) -> f64 {
        self.value.ln()
    }
}

pub fn pseudo_perplexity<S: MaskedTokenScorer + ?Sized>(
    text: &str,
    scorer: &S,
) -> Result<PseudoPerplexity> {
    let logprobs = scorer.token_logprobs(text)?;
    PseudoPerplexity::from_logprobs(&logprobs)
}

/// Verbalizer-averaged perplexity of one prompted input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPerplexity {
    /// Arithmetic mean of the per-word perplexity values.
    pub mean: f64,
    /// `(label word, perplexity of the filled sequence)` in verbalizer order.
    pub per_word: Vec<(String, PseudoPerplexity)>,
}

impl PromptPerplexity {
    pub fn clamped(&self) -> usize {
        self.per_word.iter().map(|(_, p)| p.clamped).sum()
    }

    pub fn get(&self, word: &str) -> Option<&PseudoPerplexity> {
        self.per_word.iter().find(|(w, _)| w == word).map(|(_, p)| p)
    }
}

/// Mean of `values` independent of their order. Sorting first makes the
/// floating-point sum identical for every permutation.
pub(crate) fn order_free_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

pub(crate) fn ensure_single_tokens<S: MaskedTokenScorer + ?Sized>(
    verbalizer: &Verbalizer,
    scorer: &S,
) -> Result<()> {
    for word in verbalizer.label_words() {
        let tokens = scorer.tokenize(word)?.len();
        if tokens != 1 {
            return Err(Error::MultiTokenLabelWord {
                word: word.to_string(),
                tokens,
            });
        }
    }
    Ok(())
}

pub fn prompt_perplexity<S: MaskedTokenScorer + ?Sized>(
    input: &str,
    template: &Template,
    verbalizer: &Verbalizer,
    scorer: &S,
) -> Result<PromptPerplexity> {
    ensure_single_tokens(verbalizer, scorer)?;
    let prompted = build_prompted_input(input, template)?;
    let mut per_word = Vec::with_capacity(verbalizer.len());
    for word in verbalizer.label_words() {
        let filled = fill_mask(&prompted, word)?;
        per_word.push((word.to_string(), pseudo_perplexity(filled.text(), scorer)?));
    }
    let values: Vec<f64> = per_word.iter().map(|(_, p)| p.value).collect();
    Ok(PromptPerplexity {
        mean: order_free_mean(&values),
        per_word,
    })
}

/// Mask-position log-probability of each label word, in verbalizer order.
pub fn mask_fill_logprobs<S: MaskedTokenScorer + ?Sized>(
    input: &str,
    template: &Template,
    verbalizer: &Verbalizer,
    scorer: &S,
) -> Result<Vec<(String, f64)>> {
    ensure_single_tokens(verbalizer, scorer)?;
    let prompted = build_prompted_input(input, template)?;
    let words: Vec<String> = verbalizer.label_words().map(str::to_string).collect();
    let logprobs = scorer.mask_candidate_logprobs(prompted.text(), &words)?;
    if logprobs.len() != words.len() {
        return Err(Error::ScorerFailure(format!(
            "expected {} candidate scores, got {}",
            words.len(),
            logprobs.len()
        )));
    }
    for &lp in &logprobs {
        if !lp.is_finite() || lp > 0.0 {
            return Err(Error::ScorerFailure(format!(
                "scorer returned invalid candidate log-probability {lp}"
            )));
        }
    }
    Ok(words.into_iter().zip(logprobs).collect())
}

/// Whitespace tokenization used by the toy scorers.
pub(crate) fn whitespace_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}
