use std::collections::HashSet;

use log::{debug, warn};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Provenance, TemplatePool};
use crate::error::{Error, Result};
use crate::prompt::{LabeledExample, Placement, Template, Verbalizer};

/// Shape of the conditional-fill prompt the generator builds for each
/// request: the input, then a span to generate, the label word, and a second
/// span. The generated spans around the label word become the template, with
/// the label word replaced by `[MASK]`.
pub const GENERATION_PROMPT: &str = "{input} <extra_id_0> {filled_label_word} <extra_id_1>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub input: String,
    pub filled_label_word: String,
    pub num_return: usize,
    pub max_new_tokens: usize,
}

/// Source of candidate template patterns, usually a seq2seq model behind the bridge.
pub trait TemplateGenerator: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>>;
}

impl<F> TemplateGenerator for F
where
    F: Fn(&GenerationRequest) -> Result<Vec<String>> + Send + Sync,
{
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>> {
        self(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoPoolConfig {
    pub n_examples: usize,
    pub seed: u64,
    pub num_return: usize,
    pub max_new_tokens: usize,
    /// Extra attempts after a failed request before the cell is skipped.
    pub retries: usize,
    pub dedupe: bool,
    pub placement: Placement,
    pub id_prefix: String,
}

impl Default for AutoPoolConfig {
    fn default() -> Self {
        Self {
            n_examples: 50,
            seed: 0,
            num_return: 1,
            max_new_tokens: 20,
            retries: 3,
            dedupe: true,
            placement: Placement::Postfix,
            id_prefix: "auto".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedTemplate {
    pub pattern: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoPoolOutcome {
    pub pool: TemplatePool,
    /// Indices into the input slice that were sampled, ascending.
    pub sampled: Vec<usize>,
    /// Raw patterns received, before dedup and validation.
    pub generated: usize,
    pub rejected: Vec<RejectedTemplate>,
    /// `(input index, label word)` cells whose requests kept failing.
    pub skipped_cells: Vec<(usize, String)>,
}

pub fn build_auto_pool<G: TemplateGenerator + ?Sized>(
    inputs: &[LabeledExample],
    verbalizer: &Verbalizer,
    generator: &G,
    config: &AutoPoolConfig,
) -> Result<AutoPoolOutcome> {
    if config.n_examples == 0 {
        return Err(Error::Config("n_examples must be >= 1".into()));
    }
    if inputs.is_empty() {
        return Err(Error::Config("no inputs to sample from".into()));
    }
    let amount = config.n_examples.min(inputs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampled = index::sample(&mut rng, inputs.len(), amount).into_vec();
    sampled.sort_unstable();

    let mut patterns: Vec<String> = Vec::new();
    let mut skipped_cells = Vec::new();
    let mut last_error = None;
    let mut successes = 0usize;
    for &i in &sampled {
        for word in verbalizer.label_words() {
            let request = GenerationRequest {
                input: inputs[i].text.clone(),
                filled_label_word: word.to_string(),
                num_return: config.num_return,
                max_new_tokens: config.max_new_tokens,
            };
            match generate_with_retries(generator, &request, config.retries) {
                Ok(got) => {
                    successes += 1;
                    patterns.extend(got);
                }
                Err(e) => {
                    warn!("generation for example {i} / {word:?} skipped: {e}");
                    skipped_cells.push((i, word.to_string()));
                    last_error = Some(e);
                }
            }
        }
    }
    if successes == 0 {
        let reason = last_error.map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::GeneratorUnavailable(reason));
    }

    let generated = patterns.len();
    let mut seen = HashSet::new();
    let mut templates = Vec::new();
    let mut rejected = Vec::new();
    for pattern in patterns {
        if config.dedupe && !seen.insert(pattern.clone()) {
            continue;
        }
        let id = format!("{}-{:03}", config.id_prefix, templates.len());
        match Template::new(id, pattern.clone(), config.placement) {
            Ok(t) => templates.push(t),
            Err(e) => {
                warn!("dropping generated template {pattern:?}: {e}");
                rejected.push(RejectedTemplate {
                    pattern,
                    reason: e.to_string(),
                });
            }
        }
    }
    if templates.is_empty() {
        return Err(Error::AllGenerationsInvalid);
    }
    debug!(
        "auto pool: {generated} generated, {} kept, {} rejected",
        templates.len(),
        rejected.len()
    );
    let pool = TemplatePool::new(templates, Provenance::AutoGenerated)?
        .with_generation_prompt(GENERATION_PROMPT);
    Ok(AutoPoolOutcome {
        pool,
        sampled,
        generated,
        rejected,
        skipped_cells,
    })
}

fn generate_with_retries<G: TemplateGenerator + ?Sized>(
    generator: &G,
    request: &GenerationRequest,
    retries: usize,
) -> Result<Vec<String>> {
    let mut attempt = 0;
    loop {
        match generator.generate(request) {
            Ok(v) => return Ok(v),
            Err(e) if attempt < retries => {
                debug!("generation attempt {} failed: {e}", attempt + 1);
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn inputs(n: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample::unlabeled(format!("review number {i}")).unwrap())
            .collect()
    }

    fn very_not() -> Verbalizer {
        Verbalizer::new([("very", "++"), ("not", "--")]).unwrap()
    }

    struct Echo;
    impl TemplateGenerator for Echo {
        fn generate(&self, r: &GenerationRequest) -> Result<Vec<String>> {
            Ok(vec![format!("{} [MASK] {}", r.input, r.filled_label_word)])
        }
    }

    struct Constant(&'static str);
    impl TemplateGenerator for Constant {
        fn generate(&self, _: &GenerationRequest) -> Result<Vec<String>> {
            Ok(vec![self.0.to_string()])
        }
    }

    struct Flaky {
        calls: AtomicUsize,
        fail_first: usize,
    }
    impl TemplateGenerator for Flaky {
        fn generate(&self, _: &GenerationRequest) -> Result<Vec<String>> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(Error::GeneratorUnavailable("down".into()))
            } else {
                Ok(vec!["it was [MASK] .".into()])
            }
        }
    }

    #[test]
    fn fifty_examples_two_words_at_most_hundred() {
        let out = build_auto_pool(&inputs(200), &very_not(), &Echo, &AutoPoolConfig::default()).unwrap();
        assert_eq!(out.sampled.len(), 50);
        assert_eq!(out.generated, 100);
        assert!(out.pool.len() <= 100);
        assert_eq!(out.pool.provenance(), Provenance::AutoGenerated);
        assert_eq!(out.pool.generation_prompt(), Some(GENERATION_PROMPT));
        let again = build_auto_pool(&inputs(200), &very_not(), &Echo, &AutoPoolConfig::default()).unwrap();
        assert_eq!(again.pool, out.pool);
    }

    #[test]
    fn constant_generator_collapses() {
        let out = build_auto_pool(
            &inputs(10),
            &very_not(),
            &Constant("[MASK] good ."),
            &AutoPoolConfig::default(),
        )
        .unwrap();
        assert_eq!(out.pool.len(), 1);
        assert_eq!(out.pool.templates()[0].id(), "auto-000");
        assert_eq!(out.generated, 20);
    }

    #[test]
    fn invalid_patterns_are_dropped_individually() {
        struct Mixed;
        impl TemplateGenerator for Mixed {
            fn generate(&self, r: &GenerationRequest) -> Result<Vec<String>> {
                Ok(vec![
                    format!("{} was [MASK] .", r.filled_label_word),
                    "no slot here".to_string(),
                ])
            }
        }
        let out = build_auto_pool(&inputs(3), &very_not(), &Mixed, &AutoPoolConfig::default()).unwrap();
        assert_eq!(out.pool.len(), 2);
        assert_eq!(out.rejected.len(), 1);
        assert!(matches!(
            build_auto_pool(&inputs(3), &very_not(), &Constant("nothing"), &AutoPoolConfig::default()),
            Err(Error::AllGenerationsInvalid)
        ));
    }

    #[test]
    fn retries_then_skip() {
        let flaky = Flaky {
            calls: AtomicUsize::new(0),
            fail_first: 3,
        };
        let cfg = AutoPoolConfig {
            n_examples: 1,
            ..Default::default()
        };
        let out = build_auto_pool(&inputs(1), &very_not(), &flaky, &cfg).unwrap();
        assert!(out.skipped_cells.is_empty());
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 5);

        let dead = Flaky {
            calls: AtomicUsize::new(0),
            fail_first: usize::MAX,
        };
        assert!(matches!(
            build_auto_pool(&inputs(2), &very_not(), &dead, &cfg),
            Err(Error::GeneratorUnavailable(_))
        ));
        // 1 initial + 3 retries per cell, 2 cells
        assert_eq!(dead.calls.load(Ordering::SeqCst), 8);

        let partly = Flaky {
            calls: AtomicUsize::new(0),
            fail_first: 4,
        };
        let out = build_auto_pool(&inputs(1), &very_not(), &partly, &cfg).unwrap();
        assert_eq!(out.skipped_cells, vec![(0, "very".to_string())]);
    }

    #[test]
    fn empty_generations_are_not_errors_until_nothing_survives() {
        struct Nothing;
        impl TemplateGenerator for Nothing {
            fn generate(&self, _: &GenerationRequest) -> Result<Vec<String>> {
                Ok(vec![])
            }
        }
        assert!(matches!(
            build_auto_pool(&inputs(2), &very_not(), &Nothing, &AutoPoolConfig::default()),
            Err(Error::AllGenerationsInvalid)
        ));
    }
}
