use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{whitespace_tokens, MaskedTokenScorer};
use crate::error::{Error, Result};
use crate::prompt::MASK;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// A small stand-in for a pre-trained masked LM.
///
/// `p(w | left, right) = (count(left, w, right) + alpha) / (count(left, *, right) + alpha * |V|)`
/// where `left`/`right` are the neighbouring tokens (sentence boundaries at
/// the edges) and `V` is the corpus vocabulary plus `[MASK]`, `<s>`, `</s>`
/// and `<unk>`. Unseen tokens are scored as `<unk>`.
#[derive(Debug, Clone)]
pub struct CountScorer {
    alpha: f64,
    ids: HashMap<String, u32>,
    words: Vec<String>,
    /// (left, right) -> (middle -> count)
    middles: HashMap<(u32, u32), HashMap<u32, u32>>,
    totals: HashMap<(u32, u32), u32>,
    /// Ids of `[MASK]`, `<s>`, `</s>`, `<unk>`.
    specials: [u32; 4],
}

impl CountScorer {
    pub fn new<S: AsRef<str>>(sentences: &[Vec<S>], alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidSmoothing(alpha));
        }
        if sentences.iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let mut scorer = Self {
            alpha,
            ids: HashMap::new(),
            words: Vec::new(),
            middles: HashMap::new(),
            totals: HashMap::new(),
            specials: [0; 4],
        };
        scorer.specials = [
            scorer.intern(MASK),
            scorer.intern(BOS),
            scorer.intern(EOS),
            scorer.intern(UNK),
        ];
        let (bos, eos) = (scorer.specials[1], scorer.specials[2]);
        for sentence in sentences {
            if sentence.is_empty() {
                continue;
            }
            let mut padded = Vec::with_capacity(sentence.len() + 2);
            padded.push(bos);
            for tok in sentence {
                padded.push(scorer.intern(tok.as_ref()));
            }
            padded.push(eos);
            for w in padded.windows(3) {
                *scorer
                    .middles
                    .entry((w[0], w[2]))
                    .or_default()
                    .entry(w[1])
                    .or_default() += 1;
                *scorer.totals.entry((w[0], w[2])).or_default() += 1;
            }
        }
        Ok(scorer)
    }

    /// One sentence per line, whitespace-tokenized.
    pub fn from_text(corpus: &str, alpha: f64) -> Result<Self> {
        let sentences: Vec<Vec<String>> = corpus
            .lines()
            .map(whitespace_tokens)
            .filter(|s| !s.is_empty())
            .collect();
        Self::new(&sentences, alpha)
    }

    pub fn load(path: impl AsRef<Path>, alpha: f64) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Vocabulary in id order, special markers included.
    pub fn vocab(&self) -> &[String] {
        &self.words
    }

    fn intern(&mut self, tok: &str) -> u32 {
        if let Some(&id) = self.ids.get(tok) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(tok.to_string());
        self.ids.insert(tok.to_string(), id);
        id
    }

    fn id_of(&self, tok: &str) -> u32 {
        self.ids.get(tok).copied().unwrap_or(self.specials[3])
    }

    fn prob(&self, left: u32, middle: u32, right: u32) -> f64 {
        let count = self
            .middles
            .get(&(left, right))
            .and_then(|m| m.get(&middle))
            .copied()
            .unwrap_or(0) as f64;
        let total = self.totals.get(&(left, right)).copied().unwrap_or(0) as f64;
        (count + self.alpha) / (total + self.alpha * self.words.len() as f64)
    }

    /// Full distribution over [`Self::vocab`] for a given neighbour pair.
    pub fn context_distribution(&self, left: &str, right: &str) -> Vec<f64> {
        let (l, r) = (self.id_of(left), self.id_of(right));
        (0..self.words.len() as u32)
            .map(|m| self.prob(l, m, r))
            .collect()
    }

    fn padded_ids(&self, text: &str) -> Vec<u32> {
        let mut ids = vec![self.specials[1]];
        ids.extend(text.split_whitespace().map(|t| self.id_of(t)));
        ids.push(self.specials[2]);
        ids
    }
}

impl MaskedTokenScorer for CountScorer {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        Ok(whitespace_tokens(text))
    }

    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        let ids = self.padded_ids(text);
        Ok(ids
            .windows(3)
            .map(|w| self.prob(w[0], w[1], w[2]).ln())
            .collect())
    }

    fn mask_candidate_logprobs(&self, text_with_mask: &str, candidates: &[String]) -> Result<Vec<f64>> {
        let tokens = whitespace_tokens(text_with_mask);
        let positions: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| *t == MASK)
            .map(|(i, _)| i)
            .collect();
        if positions.len() != 1 {
            return Err(Error::ScorerFailure(format!(
                "expected exactly one standalone {MASK} token, found {}",
                positions.len()
            )));
        }
        let ids = self.padded_ids(text_with_mask);
        let pos = positions[0] + 1;
        let (left, right) = (ids[pos - 1], ids[pos + 1]);
        candidates
            .iter()
            .map(|c| match self.ids.get(c.as_str()) {
                Some(&id) if !self.specials.contains(&id) => Ok(self.prob(left, id, right).ln()),
                _ => Err(Error::UnknownLabelWord(c.clone())),
            })
            .collect()
    }

    fn vocab_size(&self) -> usize {
        self.words.len()
    }
}
