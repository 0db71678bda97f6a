use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{whitespace_tokens, MaskedTokenScorer};
use crate::error::{Error, Result};
use crate::prompt::MASK;

/// Context value matching any context without an explicit entry for the token.
pub const WILDCARD: &str = "*";

/// One row of a table-scorer fixture.
///
/// `context` is the whitespace-joined sequence with the scored position
/// replaced by `[MASK]`, or [`WILDCARD`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub context: String,
    pub token: String,
    pub logprob: f64,
}

impl TableEntry {
    pub fn new(context: impl Into<String>, token: impl Into<String>, logprob: f64) -> Self {
        Self {
            context: context.into(),
            token: token.into(),
            logprob,
        }
    }

    pub fn wildcard(token: impl Into<String>, logprob: f64) -> Self {
        Self::new(WILDCARD, token, logprob)
    }
}

/// Deterministic scorer backed by an explicit log-probability table.
///
/// Tokenizes on whitespace. Lookups try the exact context first and fall back
/// to the wildcard row; anything else is an error. Every context's effective
/// distribution must have total mass at most 1.
#[derive(Debug, Clone)]
pub struct TableScorer {
    entries: Vec<TableEntry>,
    lookup: HashMap<(String, String), f64>,
    vocab: BTreeSet<String>,
}

const MASS_TOLERANCE: f64 = 1e-6;

impl TableScorer {
    pub fn new(entries: Vec<TableEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::MalformedTable("table has no entries".into()));
        }
        let mut lookup = HashMap::with_capacity(entries.len());
        let mut vocab = BTreeSet::new();
        for e in &entries {
            if !e.logprob.is_finite() || e.logprob > 0.0 {
                return Err(Error::MalformedTable(format!(
                    "log-probability {} for token {:?} in context {:?} is not finite and <= 0",
                    e.logprob, e.token, e.context
                )));
            }
            if e.token.is_empty() || e.token.split_whitespace().count() != 1 {
                return Err(Error::MalformedTable(format!("bad token {:?}", e.token)));
            }
            let context = normalize(&e.context);
            if lookup
                .insert((context.clone(), e.token.clone()), e.logprob)
                .is_some()
            {
                return Err(Error::MalformedTable(format!(
                    "duplicate entry for token {:?} in context {:?}",
                    e.token, context
                )));
            }
            vocab.insert(e.token.clone());
        }
        let scorer = Self {
            entries,
            lookup,
            vocab,
        };
        scorer.check_mass()?;
        Ok(scorer)
    }

    /// Every token gets `ln(1 / vocab.len())` in every context.
    pub fn uniform<T: AsRef<str>>(vocab: &[T]) -> Result<Self> {
        let lp = -(vocab.len() as f64).ln();
        Self::new(
            vocab
                .iter()
                .map(|t| TableEntry::wildcard(t.as_ref(), lp))
                .collect(),
        )
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: TableEntry = serde_json::from_str(line)
                .map_err(|err| Error::MalformedTable(format!("line {}: {err}", i + 1)))?;
            entries.push(e);
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    /// Same table with every probability multiplied by `k` in `(0, 1]`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::MalformedTable(format!("scale {k} outside (0, 1]")));
        }
        let shift = k.ln();
        Self::new(
            self.entries
                .iter()
                .map(|e| TableEntry::new(e.context.clone(), e.token.clone(), e.logprob + shift))
                .collect(),
        )
    }

    fn check_mass(&self) -> Result<()> {
        let mut explicit: HashMap<&str, Vec<(&str, f64)>> = HashMap::new();
        let mut wildcard: HashMap<&str, f64> = HashMap::new();
        for ((context, token), &lp) in &self.lookup {
            if context == WILDCARD {
                wildcard.insert(token, lp);
            } else {
                explicit.entry(context).or_default().push((token, lp));
            }
        }
        let wildcard_mass: f64 = wildcard.values().map(|lp| lp.exp()).sum();
        if wildcard_mass > 1.0 + MASS_TOLERANCE {
            return Err(Error::MalformedTable(format!(
                "wildcard rows carry probability mass {wildcard_mass} > 1"
            )));
        }
        for (context, rows) in explicit {
            let mut mass: f64 = rows.iter().map(|(_, lp)| lp.exp()).sum();
            mass += wildcard
                .iter()
                .filter(|(t, _)| !rows.iter().any(|(r, _)| r == *t))
                .map(|(_, lp)| lp.exp())
                .sum::<f64>();
            if mass > 1.0 + MASS_TOLERANCE {
                return Err(Error::MalformedTable(format!(
                    "context {context:?} carries probability mass {mass} > 1"
                )));
            }
        }
        Ok(())
    }

    fn get(&self, context: &str, token: &str) -> Result<f64> {
        self.lookup
            .get(&(context.to_string(), token.to_string()))
            .or_else(|| self.lookup.get(&(WILDCARD.to_string(), token.to_string())))
            .copied()
            .ok_or_else(|| {
                Error::ScorerFailure(format!(
                    "no table entry for token {token:?} in context {context:?}"
                ))
            })
    }
}

fn normalize(context: &str) -> String {
    if context == WILDCARD {
        return WILDCARD.to_string();
    }
    whitespace_tokens(context).join(" ")
}

impl MaskedTokenScorer for TableScorer {
    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        Ok(whitespace_tokens(text))
    }

    fn token_logprobs(&self, text: &str) -> Result<Vec<f64>> {
        let tokens = whitespace_tokens(text);
        let mut out = Vec::with_capacity(tokens.len());
        for i in 0..tokens.len() {
            let mut masked = tokens.clone();
            masked[i] = MASK.to_string();
            out.push(self.get(&masked.join(" "), &tokens[i])?);
        }
        Ok(out)
    }

    fn mask_candidate_logprobs(&self, text_with_mask: &str, candidates: &[String]) -> Result<Vec<f64>> {
        let context = normalize(text_with_mask);
        let masks = context.split(' ').filter(|t| *t == MASK).count();
        if masks != 1 {
            return Err(Error::ScorerFailure(format!(
                "expected exactly one standalone {MASK} token, found {masks}"
            )));
        }
        candidates
            .iter()
            .map(|c| {
                if !self.vocab.contains(c) {
                    return Err(Error::UnknownLabelWord(c.clone()));
                }
                self.get(&context, c)
            })
            .collect()
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }
}
