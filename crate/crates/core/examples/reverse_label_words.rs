//! Perplexity with the gold label word filled against the reversed one.
//! A scorer trained on gold-filled text prefers the gold fill (diff < 0);
//! a scorer with no preference between label words gives diff = 0.
//!
//!     cargo run --example reverse_label_words

use pplprompt::diagnostics::{reverse_label_report, reverse_label_tsv};
use pplprompt::fixtures::{matched_template, MatchedWorld};
use pplprompt::scoring::{TableEntry, TableScorer};
use pplprompt::Result;

fn main() -> Result<()> {
    let world = MatchedWorld::build(100, 2)?;
    let dataset = world.dataset("world");
    let template = matched_template();

    let memorizing = reverse_label_report(&dataset, &template, &world.verbalizer, &world.scorer)?;

    // same probability for every token in every context
    let mut vocab: Vec<String> = world.scorer.vocab().to_vec();
    vocab.retain(|w| !w.starts_with('<') && w != "[MASK]");
    let lp = -(vocab.len() as f64).ln();
    let flat = TableScorer::new(vocab.iter().map(|w| TableEntry::wildcard(w.as_str(), lp)).collect())?;
    let symmetric = reverse_label_report(&dataset, &template, &world.verbalizer, &flat)?;

    print!("{}", reverse_label_tsv(&[memorizing, symmetric]));
    Ok(())
}
