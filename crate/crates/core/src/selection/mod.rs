//! Zero-shot classification and per-example template selection.
//!
//! For every example, each template in a pool is applied, the mask is filled
//! with every label word, and the filled sequences' pseudo-perplexities are
//! averaged. The template with the lowest average wins (earliest in pool
//! order on exact ties) and the example is then classified with it from the
//! mask-position label-word probabilities.

mod auto_pool;

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::{self, LabeledExample, Template, Verbalizer};
use crate::scoring::{mask_fill_logprobs, prompt_perplexity, MaskedTokenScorer, PromptPerplexity};

pub use auto_pool::{
    build_auto_pool, AutoPoolConfig, AutoPoolOutcome, GenerationRequest, RejectedTemplate,
    TemplateGenerator, GENERATION_PROMPT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Manual,
    AutoGenerated,
}

/// Ordered, non-empty set of templates with unique ids. The order is the
/// tie-break order for selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplatePool {
    templates: Vec<Template>,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generation_prompt: Option<String>,
}

impl TemplatePool {
    pub fn new(templates: Vec<Template>, provenance: Provenance) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::InvalidPool("pool is empty".into()));
        }
        let mut ids = HashSet::new();
        for t in &templates {
            if !ids.insert(t.id()) {
                return Err(Error::InvalidPool(format!("duplicate template id {:?}", t.id())));
            }
        }
        Ok(Self {
            templates,
            provenance,
            generation_prompt: None,
        })
    }

    pub fn manual(templates: Vec<Template>) -> Result<Self> {
        Self::new(templates, Provenance::Manual)
    }

    pub fn load(path: impl AsRef<Path>, provenance: Provenance) -> Result<Self> {
        Self::new(prompt::load_templates(path)?, provenance)
    }

    pub fn with_generation_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.generation_prompt = Some(prompt.into());
        self
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn generation_prompt(&self) -> Option<&str> {
        self.generation_prompt.as_deref()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id() == id)
    }

    pub fn to_jsonl(&self) -> String {
        prompt::templates_to_jsonl(&self.templates)
    }
}

/// How the selected template turns into a prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyMode {
    /// Highest mask-position label-word log-probability.
    #[default]
    MaskLogprob,
    /// Label word whose filled sequence has the lowest perplexity (ablation).
    LowestPplFill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub example_index: usize,
    pub chosen_template_id: String,
    /// Mean prompt perplexity per evaluated template, in pool order.
    pub per_template_ppl: IndexMap<String, f64>,
    pub predicted_class: String,
    pub gold_class: Option<String>,
    /// Per-token NLL clamp events across all scored fills.
    #[serde(default)]
    pub clamp_events: usize,
}

impl SelectionTrace {
    pub fn is_correct(&self) -> Option<bool> {
        self.gold_class.as_ref().map(|g| *g == self.predicted_class)
    }
}

/// First index of the maximum; NaN never wins.
fn first_argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

pub fn zero_shot_classify<S: MaskedTokenScorer + ?Sized>(
    input: &str,
    template: &Template,
    verbalizer: &Verbalizer,
    scorer: &S,
) -> Result<String> {
    let scores = mask_fill_logprobs(input, template, verbalizer, scorer)?;
    let best = first_argmax(scores.iter().map(|(_, lp)| *lp))
        .ok_or_else(|| Error::ScorerFailure("no candidate scores".into()))?;
    Ok(verbalizer.entries()[best].1.clone())
}

fn classify_lowest_fill(verbalizer: &Verbalizer, ppl: &PromptPerplexity) -> String {
    let best = first_argmax(ppl.per_word.iter().map(|(_, p)| -p.value)).unwrap_or(0);
    verbalizer.entries()[best].1.clone()
}

fn classify<S: MaskedTokenScorer + ?Sized>(
    input: &str,
    template: &Template,
    verbalizer: &Verbalizer,
    scorer: &S,
    mode: ClassifyMode,
    ppl: &PromptPerplexity,
) -> Result<String> {
    match mode {
        ClassifyMode::MaskLogprob => zero_shot_classify(input, template, verbalizer, scorer),
        ClassifyMode::LowestPplFill => Ok(classify_lowest_fill(verbalizer, ppl)),
    }
}

pub fn select_template_ppl<S: MaskedTokenScorer + ?Sized>(
    example_index: usize,
    example: &LabeledExample,
    pool: &TemplatePool,
    verbalizer: &Verbalizer,
    scorer: &S,
    mode: ClassifyMode,
) -> Result<SelectionTrace> {
    let mut per_template_ppl = IndexMap::with_capacity(pool.len());
    let mut clamp_events = 0;
    let mut best: Option<(usize, PromptPerplexity)> = None;
    for (i, template) in pool.templates().iter().enumerate() {
        let ppl = prompt_perplexity(&example.text, template, verbalizer, scorer)?;
        per_template_ppl.insert(template.id().to_string(), ppl.mean);
        clamp_events += ppl.clamped();
        // strict `<` keeps the earliest template on exact ties
        if best.as_ref().map_or(true, |(_, b)| ppl.mean < b.mean) {
            best = Some((i, ppl));
        }
    }
    let (chosen, ppl) = best.expect("pool is non-empty");
    let template = &pool.templates()[chosen];
    let predicted_class = classify(&example.text, template, verbalizer, scorer, mode, &ppl)?;
    Ok(SelectionTrace {
        example_index,
        chosen_template_id: template.id().to_string(),
        per_template_ppl,
        predicted_class,
        gold_class: example.label.clone(),
        clamp_events,
    })
}

/// Uniform template index for one example, a pure function of `(seed, example_index)`.
pub fn random_template_index(pool_len: usize, seed: u64, example_index: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(example_index as u64);
    rng.gen_range(0..pool_len)
}

pub fn select_template_random<S: MaskedTokenScorer + ?Sized>(
    example_index: usize,
    example: &LabeledExample,
    pool: &TemplatePool,
    verbalizer: &Verbalizer,
    scorer: &S,
    seed: u64,
    mode: ClassifyMode,
) -> Result<SelectionTrace> {
    let template = &pool.templates()[random_template_index(pool.len(), seed, example_index)];
    let ppl = prompt_perplexity(&example.text, template, verbalizer, scorer)?;
    let predicted_class = classify(&example.text, template, verbalizer, scorer, mode, &ppl)?;
    let mut per_template_ppl = IndexMap::with_capacity(1);
    per_template_ppl.insert(template.id().to_string(), ppl.mean);
    Ok(SelectionTrace {
        example_index,
        chosen_template_id: template.id().to_string(),
        per_template_ppl,
        predicted_class,
        gold_class: example.label.clone(),
        clamp_events: ppl.clamped(),
    })
}

/// A fixed template applied to one example, recorded in the same shape as a selection.
pub fn apply_template<S: MaskedTokenScorer + ?Sized>(
    example_index: usize,
    example: &LabeledExample,
    template: &Template,
    verbalizer: &Verbalizer,
    scorer: &S,
    mode: ClassifyMode,
) -> Result<SelectionTrace> {
    let ppl = prompt_perplexity(&example.text, template, verbalizer, scorer)?;
    let predicted_class = classify(&example.text, template, verbalizer, scorer, mode, &ppl)?;
    let mut per_template_ppl = IndexMap::with_capacity(1);
    per_template_ppl.insert(template.id().to_string(), ppl.mean);
    Ok(SelectionTrace {
        example_index,
        chosen_template_id: template.id().to_string(),
        per_template_ppl,
        predicted_class,
        gold_class: example.label.clone(),
        clamp_events: ppl.clamped(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateFrequency {
    pub template_id: String,
    pub count: usize,
    pub frequency: f64,
    /// Accuracy of this template applied to every example, not just the
    /// ones where it was selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_hoc_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub rows: Vec<TemplateFrequency>,
    pub total: usize,
}

pub fn selection_frequency_report(
    traces: &[SelectionTrace],
    pool: &TemplatePool,
) -> Result<FrequencyReport> {
    if traces.is_empty() {
        return Err(Error::InvalidPool("no traces to aggregate".into()));
    }
    let mut counts: IndexMap<&str, usize> = pool.templates().iter().map(|t| (t.id(), 0)).collect();
    for trace in traces {
        let slot = counts.get_mut(trace.chosen_template_id.as_str()).ok_or_else(|| {
            Error::InvalidPool(format!(
                "trace chose template {:?} which is not in the pool",
                trace.chosen_template_id
            ))
        })?;
        *slot += 1;
    }
    let total = traces.len();
    let rows = counts
        .into_iter()
        .map(|(id, count)| TemplateFrequency {
            template_id: id.to_string(),
            count,
            frequency: count as f64 / total as f64,
            post_hoc_accuracy: None,
        })
        .collect();
    Ok(FrequencyReport { rows, total })
}

/// Fraction of `examples` a single template classifies correctly.
pub fn template_accuracy<S: MaskedTokenScorer + ?Sized>(
    examples: &[LabeledExample],
    template: &Template,
    verbalizer: &Verbalizer,
    scorer: &S,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Config("no examples to evaluate".into()));
    }
    let golds = examples
        .iter()
        .map(|e| e.label.as_deref().ok_or(Error::MissingGoldLabels))
        .collect::<Result<Vec<_>>>()?;
    let predictions = examples
        .par_iter()
        .map(|e| zero_shot_classify(&e.text, template, verbalizer, scorer))
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions
        .iter()
        .zip(golds)
        .filter(|(p, g)| p.as_str() == *g)
        .count();
    Ok(correct as f64 / examples.len() as f64)
}

impl FrequencyReport {
    /// Fills in the post-hoc accuracy of every pool template over `examples`.
    pub fn with_post_hoc_accuracy<S: MaskedTokenScorer + ?Sized>(
        mut self,
        traces: &[SelectionTrace],
        examples: &[LabeledExample],
        pool: &TemplatePool,
        verbalizer: &Verbalizer,
        scorer: &S,
    ) -> Result<Self> {
        if traces.iter().any(|t| t.gold_class.is_none()) || examples.iter().any(|e| e.label.is_none())
        {
            return Err(Error::MissingGoldLabels);
        }
        for row in &mut self.rows {
            let template = pool
                .get(&row.template_id)
                .ok_or_else(|| Error::InvalidPool(format!("unknown template {:?}", row.template_id)))?;
            row.post_hoc_accuracy = Some(template_accuracy(examples, template, verbalizer, scorer)?);
        }
        Ok(self)
    }

    /// `template_id`, `frequency`, `accuracy` columns; accuracy empty when unknown.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("template_id\tfrequency\taccuracy\n");
        for r in &self.rows {
            let acc = r
                .post_hoc_accuracy
                .map(|a| format!("{a:.6}"))
                .unwrap_or_default();
            out.push_str(&format!("{}\t{:.6}\t{}\n", r.template_id, r.frequency, acc));
        }
        out
    }
}

pub fn traces_to_jsonl(traces: &[SelectionTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t).expect("trace serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{TableEntry, TableScorer};

    fn very_not() -> Verbalizer {
        Verbalizer::new([("very", "++"), ("not", "--")]).unwrap()
    }

    fn pleased() -> Template {
        Template::prefix("pleased", "[MASK] pleased .").unwrap()
    }

    fn mask_table(p_very: f64) -> TableScorer {
        TableScorer::new(vec![
            TableEntry::new("[MASK] pleased . x", "very", p_very.ln()),
            TableEntry::new("[MASK] pleased . x", "not", (1.0 - p_very).ln()),
        ])
        .unwrap()
    }

    #[test]
    fn argmax_prediction() {
        let s = mask_table(0.7);
        assert_eq!(zero_shot_classify("x", &pleased(), &very_not(), &s).unwrap(), "++");
        let swapped = very_not().swapped_classes().unwrap();
        assert_eq!(zero_shot_classify("x", &pleased(), &swapped, &s).unwrap(), "--");
    }

    #[test]
    fn ties_follow_verbalizer_order() {
        let s = mask_table(0.5);
        assert_eq!(zero_shot_classify("x", &pleased(), &very_not(), &s).unwrap(), "++");
        let reordered = Verbalizer::new([("not", "--"), ("very", "++")]).unwrap();
        assert_eq!(zero_shot_classify("x", &pleased(), &reordered, &s).unwrap(), "--");
    }

    #[test]
    fn first_argmax_edge_cases() {
        assert_eq!(first_argmax([]), None);
        assert_eq!(first_argmax([f64::NAN, 1.0]), Some(1));
        assert_eq!(first_argmax([2.0, 2.0, 1.0]), Some(0));
        assert_eq!(first_argmax([f64::NEG_INFINITY, -1.0]), Some(1));
    }

    fn uniform_world() -> (TableScorer, TemplatePool) {
        let s = TableScorer::uniform(&["very", "not", "a", "b", "x", "[MASK]"]).unwrap();
        let pool = TemplatePool::manual(vec![
            Template::prefix("A", "[MASK] a").unwrap(),
            Template::prefix("B", "[MASK] b").unwrap(),
        ])
        .unwrap();
        (s, pool)
    }

    #[test]
    fn single_template_pool_always_chosen() {
        let (s, _) = uniform_world();
        let pool = TemplatePool::manual(vec![Template::prefix("only", "[MASK] a").unwrap()]).unwrap();
        let ex = LabeledExample::new("x", "++").unwrap();
        for i in 0..5 {
            assert_eq!(
                select_template_ppl(i, &ex, &pool, &very_not(), &s, ClassifyMode::MaskLogprob)
                    .unwrap()
                    .chosen_template_id,
                "only"
            );
            assert_eq!(
                select_template_random(i, &ex, &pool, &very_not(), &s, 9, ClassifyMode::MaskLogprob)
                    .unwrap()
                    .chosen_template_id,
                "only"
            );
        }
    }

    #[test]
    fn exact_ties_pick_pool_order() {
        let (s, pool) = uniform_world();
        let ex = LabeledExample::unlabeled("x").unwrap();
        let t = select_template_ppl(0, &ex, &pool, &very_not(), &s, ClassifyMode::MaskLogprob).unwrap();
        assert_eq!(t.chosen_template_id, "A");
        assert_eq!(t.per_template_ppl["A"], t.per_template_ppl["B"]);
        let reversed =
            TemplatePool::manual(pool.templates().iter().rev().cloned().collect()).unwrap();
        let t = select_template_ppl(0, &ex, &reversed, &very_not(), &s, ClassifyMode::MaskLogprob)
            .unwrap();
        assert_eq!(t.chosen_template_id, "B");
        assert_eq!(t.is_correct(), None);
    }

    #[test]
    fn random_choice_is_keyed_on_seed_and_index() {
        let a: Vec<usize> = (0..50).map(|i| random_template_index(7, 3, i)).collect();
        let b: Vec<usize> = (0..50).map(|i| random_template_index(7, 3, i)).collect();
        assert_eq!(a, b);
        let c: Vec<usize> = (0..50).map(|i| random_template_index(7, 4, i)).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn frequency_report_basics() {
        let (_, pool) = uniform_world();
        let trace = |i: usize, id: &str| SelectionTrace {
            example_index: i,
            chosen_template_id: id.into(),
            per_template_ppl: IndexMap::new(),
            predicted_class: "++".into(),
            gold_class: None,
            clamp_events: 0,
        };
        let traces: Vec<_> = (0..4).map(|i| trace(i, "A")).collect();
        let r = selection_frequency_report(&traces, &pool).unwrap();
        assert_eq!(r.rows[0].frequency, 1.0);
        assert_eq!(r.rows[1].frequency, 0.0);
        assert!(r.to_tsv().starts_with("template_id\tfrequency\taccuracy\nA\t1.000000\t\n"));
        assert!(selection_frequency_report(&[], &pool).is_err());
        assert!(selection_frequency_report(&[trace(0, "Z")], &pool).is_err());

        let (s, _) = uniform_world();
        let ex = vec![LabeledExample::new("x", "++").unwrap()];
        let err = r
            .clone()
            .with_post_hoc_accuracy(&traces, &ex, &pool, &very_not(), &s)
            .unwrap_err();
        assert!(matches!(err, Error::MissingGoldLabels));
    }

    #[test]
    fn pool_invariants() {
        assert!(TemplatePool::manual(vec![]).is_err());
        let t = Template::prefix("a", "[MASK]").unwrap();
        assert!(TemplatePool::manual(vec![t.clone(), t]).is_err());
    }
}
