//! Synthetic sentiment corpora for tests and examples.
//!
//! The main fixture is a "matched-template world": a count-scorer corpus in
//! which the prompted, gold-filled inputs for exactly one template appear
//! verbatim. Under that scorer the matched template has clearly lower
//! prompt perplexity than the others and is also the only template whose
//! mask prediction depends on the input.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasets::{examples_to_jsonl, Dataset};
use crate::error::{Error, Result};
use crate::prompt::{build_prompted_input, fill_mask, LabeledExample, Template, Verbalizer};
use crate::scoring::{CountScorer, TableEntry, TableScorer};
use crate::selection::{Provenance, TemplatePool};

pub const POSITIVE_WORDS: &[&str] = &["great", "lovely", "superb", "brilliant", "charming", "moving"];
pub const NEGATIVE_WORDS: &[&str] = &["awful", "boring", "dull", "clumsy", "tedious", "bland"];
pub const FILLER_WORDS: &[&str] = &[
    "the", "film", "plot", "cast", "story", "music", "ending", "was", "really", "quite", "and",
    "overall", "acting", "pace", "script", "honestly",
];

pub const POSITIVE: &str = "++";
pub const NEGATIVE: &str = "--";

pub fn very_not_verbalizer() -> Verbalizer {
    Verbalizer::new([("very", POSITIVE), ("not", NEGATIVE)]).expect("static verbalizer")
}

/// Balanced examples: a few filler words followed by one sentiment word.
pub fn sentiment_examples(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let len = rng.gen_range(3..=6);
            let mut words: Vec<&str> = (0..len)
                .map(|_| *FILLER_WORDS.choose(&mut rng).expect("non-empty"))
                .collect();
            let lexicon = if positive { POSITIVE_WORDS } else { NEGATIVE_WORDS };
            words.push(lexicon.choose(&mut rng).expect("non-empty"));
            let label = if positive { POSITIVE } else { NEGATIVE };
            LabeledExample::new(words.join(" "), label).expect("non-empty text")
        })
        .collect()
}

/// Table over `a b c` giving the true tokens probabilities 0.5, 0.25 and
/// 0.125 in turn, so `"a b c"` has pseudo-perplexity exactly 4.
pub fn three_token_table() -> TableScorer {
    TableScorer::new(vec![
        TableEntry::new("[MASK] b c", "a", 0.5f64.ln()),
        TableEntry::new("a [MASK] c", "b", 0.25f64.ln()),
        TableEntry::new("a b [MASK]", "c", 0.125f64.ln()),
    ])
    .expect("static table")
}

/// The template whose filled sequences make up the world's corpus.
pub fn matched_template() -> Template {
    Template::postfix("pleased", "[MASK] pleased .").expect("static template")
}

pub fn manual_pool() -> TemplatePool {
    let t = |id: &str, p: &str| Template::postfix(id, p).expect("static template");
    TemplatePool::manual(vec![
        t("happy", "[MASK] happy today ."),
        matched_template(),
        t("sure", "[MASK] sure about it ."),
        Template::prefix("prefix-good", "[MASK] good .").expect("static template"),
    ])
    .expect("static pool")
}

pub fn auto_pool() -> TemplatePool {
    let t = |id: &str, p: &str| Template::postfix(id, p).expect("static template");
    TemplatePool::new(
        vec![
            t("auto-000", "it is [MASK] fun ."),
            t("auto-001", "[MASK] worth watching"),
            t("auto-002", "i am [MASK] impressed"),
            t("auto-003", "[MASK] pleased ."),
            t("auto-004", "[MASK] recommended !"),
            t("auto-005", "a [MASK] good one"),
        ],
        Provenance::AutoGenerated,
    )
    .expect("static pool")
}

pub struct MatchedWorld {
    pub corpus: Vec<String>,
    pub scorer: CountScorer,
    pub verbalizer: Verbalizer,
    pub manual_pool: TemplatePool,
    pub auto_pool: TemplatePool,
    /// Examples whose gold-filled prompted text is in the corpus.
    pub in_corpus: Vec<LabeledExample>,
    /// Fresh examples drawn from the same generator.
    pub held_out: Vec<LabeledExample>,
    pub alpha: f64,
}

pub const WORLD_ALPHA: f64 = 0.1;

impl MatchedWorld {
    pub fn build(n_examples: usize, seed: u64) -> Result<Self> {
        let verbalizer = very_not_verbalizer();
        let template = matched_template();
        let in_corpus = sentiment_examples(n_examples, seed);
        let held_out: Vec<_> = sentiment_examples(n_examples, seed.wrapping_add(1_000_003))
            .into_iter()
            .filter(|e| !in_corpus.iter().any(|c| c.text == e.text))
            .collect();
        let mut corpus = Vec::with_capacity(in_corpus.len());
        for e in &in_corpus {
            let gold = e.label.as_deref().expect("labeled");
            let word = verbalizer.label_word_for(gold).expect("covered label");
            let prompted = build_prompted_input(&e.text, &template)?;
            corpus.push(fill_mask(&prompted, word)?.text().to_string());
        }
        let scorer = CountScorer::from_text(&corpus.join("\n"), WORLD_ALPHA)?;
        Ok(Self {
            corpus,
            scorer,
            verbalizer,
            manual_pool: manual_pool(),
            auto_pool: auto_pool(),
            in_corpus,
            held_out,
            alpha: WORLD_ALPHA,
        })
    }

    pub fn dataset(&self, name: &str) -> Dataset {
        Dataset::new(name, self.in_corpus.clone()).expect("non-empty name")
    }

    /// Writes corpus, pools, verbalizer, dataset and an experiment config
    /// into `dir`; returns the config path.
    pub fn write_to(&self, dir: &Path, method: &str, seeds: &[u64]) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, content: String| -> Result<()> {
            let p = dir.join(name);
            fs::write(&p, content).map_err(|e| Error::io(&p, e))
        };
        write("corpus.txt", self.corpus.join("\n") + "\n")?;
        write("manual.jsonl", self.manual_pool.to_jsonl())?;
        write("auto.jsonl", self.auto_pool.to_jsonl())?;
        write("verbalizer.json", self.verbalizer.to_json_string())?;
        write("world.jsonl", examples_to_jsonl(&self.in_corpus))?;
        let seeds = seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
        let config = format!(
            r#"method = "{method}"
seeds = [{seeds}]
output_dir = "out"
verbalizer = "verbalizer.json"
scorer = "count:corpus.txt"
count_alpha = {alpha}

[[datasets]]
path = "world.jsonl"

[[template_pools]]
name = "manual"
path = "manual.jsonl"
provenance = "manual"

[[template_pools]]
name = "auto"
path = "auto.jsonl"
provenance = "auto_generated"
"#,
            alpha = self.alpha
        );
        write("experiment.toml", config)?;
        Ok(dir.join("experiment.toml"))
    }
}
