//! Perplexity diagnostics: length bias and reversed label words.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::prompt::{build_prompted_input, fill_mask, Template, Verbalizer};
use crate::scoring::{ensure_single_tokens, pseudo_perplexity, MaskedTokenScorer};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucketing {
    /// One row per dataset.
    #[default]
    PerDataset,
    /// Rows per dataset and `[k*w, (k+1)*w)` token-length bucket.
    FixedWidth(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBiasRow {
    pub dataset: String,
    /// Inclusive lower token bound of the bucket, absent for per-dataset rows.
    pub bucket_start: Option<usize>,
    /// Exclusive upper token bound.
    pub bucket_end: Option<usize>,
    pub mean_tokens: f64,
    pub mean_ppl: f64,
    pub count: usize,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBiasReport {
    pub rows: Vec<LengthBiasRow>,
}

/// Raw-text pseudo-perplexity (no prompting) against length, per dataset or bucket.
pub fn length_bias_report<S: MaskedTokenScorer + ?Sized>(
    datasets: &[Dataset],
    scorer: &S,
    bucketing: Bucketing,
) -> Result<LengthBiasReport> {
    if let Bucketing::FixedWidth(0) = bucketing {
        return Err(Error::Config("bucket width must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for d in datasets {
        if d.examples.is_empty() {
            return Err(Error::Config(format!("dataset {:?} is empty", d.name)));
        }
        let scored = d
            .examples
            .par_iter()
            .map(|e| {
                let len = scorer.tokenize(&e.text)?.len();
                let ppl = pseudo_perplexity(&e.text, scorer)?;
                Ok((len, ppl.value, ppl.clamped))
            })
            .collect::<Result<Vec<_>>>()?;
        match bucketing {
            Bucketing::PerDataset => rows.push(aggregate(&d.name, None, &scored)),
            Bucketing::FixedWidth(w) => {
                let max_bucket = scored.iter().map(|(len, _, _)| len / w).max().unwrap_or(0);
                for b in 0..=max_bucket {
                    let members: Vec<_> = scored.iter().filter(|(len, _, _)| len / w == b).copied().collect();
                    if !members.is_empty() {
                        rows.push(aggregate(&d.name, Some((b * w, (b + 1) * w)), &members));
                    }
                }
            }
        }
    }
    Ok(LengthBiasReport { rows })
}

fn aggregate(name: &str, bounds: Option<(usize, usize)>, scored: &[(usize, f64, usize)]) -> LengthBiasRow {
    let n = scored.len() as f64;
    LengthBiasRow {
        dataset: name.to_string(),
        bucket_start: bounds.map(|b| b.0),
        bucket_end: bounds.map(|b| b.1),
        mean_tokens: scored.iter().map(|s| s.0 as f64).sum::<f64>() / n,
        mean_ppl: scored.iter().map(|s| s.1).sum::<f64>() / n,
        count: scored.len(),
        clamp_events: scored.iter().map(|s| s.2).sum(),
    }
}

impl LengthBiasReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dataset\tbucket_start\tbucket_end\tmean_tokens\tmean_ppl\tcount\n");
        for r in &self.rows {
            let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{}\n",
                r.dataset,
                opt(r.bucket_start),
                opt(r.bucket_end),
                r.mean_tokens,
                r.mean_ppl,
                r.count
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseLabelRow {
    pub dataset: String,
    pub template_id: String,
    /// Mean perplexity with the gold label word filled in.
    pub ppl_g: f64,
    /// Mean perplexity with the other label word filled in.
    pub ppl_r: f64,
    /// `ppl_g - ppl_r`
    pub diff: f64,
    pub count: usize,
}

pub fn reverse_label_report<S: MaskedTokenScorer + ?Sized>(
    dataset: &Dataset,
    template: &Template,
    verbalizer: &Verbalizer,
    scorer: &S,
) -> Result<ReverseLabelRow> {
    if verbalizer.len() != 2 {
        return Err(Error::NotBinaryVerbalizer(verbalizer.len()));
    }
    if dataset.examples.is_empty() {
        return Err(Error::Config(format!("dataset {:?} is empty", dataset.name)));
    }
    let mut cells = Vec::with_capacity(dataset.examples.len());
    for (i, e) in dataset.examples.iter().enumerate() {
        let gold = e.label.as_deref().ok_or(Error::UnlabeledExample(i))?;
        let gold_word = verbalizer
            .label_word_for(gold)
            .ok_or_else(|| Error::UncoveredLabel(gold.to_string()))?;
        let other = verbalizer
            .label_words()
            .find(|w| *w != gold_word)
            .expect("binary verbalizer");
        cells.push((e.text.as_str(), gold_word, other));
    }
    ensure_single_tokens(verbalizer, scorer)?;
    let pairs = cells
        .par_iter()
        .map(|(text, gold, other)| {
            let prompted = build_prompted_input(text, template)?;
            let g = pseudo_perplexity(fill_mask(&prompted, gold)?.text(), scorer)?.value;
            let r = pseudo_perplexity(fill_mask(&prompted, other)?.text(), scorer)?.value;
            Ok((g, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = pairs.len() as f64;
    let ppl_g = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let ppl_r = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(ReverseLabelRow {
        dataset: dataset.name.clone(),
        template_id: template.id().to_string(),
        ppl_g,
        ppl_r,
        diff: ppl_g - ppl_r,
        count: pairs.len(),
    })
}

pub fn reverse_label_tsv(rows: &[ReverseLabelRow]) -> String {
    let mut out = String::from("dataset\ttemplate_id\tppl_g\tppl_r\tdiff\tcount\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
            r.dataset, r.template_id, r.ppl_g, r.ppl_r, r.diff, r.count
        ));
    }
    out
}
