//! Cloze-prompt learning toolkit built around masked-LM pseudo-perplexity.
//!
//! The pieces, bottom-up:
//!
//! - [`prompt`]: templates with one `[MASK]` slot, verbalizers, prompted inputs.
//! - [`scoring`]: the [`MaskedTokenScorer`] contract, pseudo-perplexity, and two
//!   deterministic toy scorers (explicit table, smoothed neighbour counts).
//! - [`selection`]: zero-shot classification and per-example template selection
//!   by lowest prompt perplexity, random baselines, selection frequencies and
//!   generated template pools.
//! - [`diagnostics`]: length-bias and reverse-label-word reports.
//! - [`datasets`]: loading, balanced length-bounded subsampling, seeded splits.
//! - [`harness`]: config-driven experiments and report emission.
//! - [`bridge`]: HTTP client for a model bridge serving a real masked LM.
//! - [`cli`]: the `pplprompt` command line.
//!
//! Runnable walkthroughs live in this crate's `examples/` directory.

pub mod bridge;
pub mod cli;
pub mod datasets;
pub mod diagnostics;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod prompt;
pub mod scoring;
pub mod selection;

pub use error::{BridgeError, Error, Result};
pub use prompt::{
    build_prompted_input, fill_mask, map_label_word, LabeledExample, Placement, PromptedSequence,
    Template, Verbalizer, MASK,
};
pub use scoring::{
    mask_fill_logprobs, prompt_perplexity, pseudo_perplexity, CachedScorer, CountScorer,
    MaskedTokenScorer, PromptPerplexity, PseudoPerplexity, TableEntry, TableScorer,
};
