//! Length bias of pseudo-perplexity: appending tokens that are easier than
//! the running mean lowers perplexity, so longer text can look "better".
//!
//!     cargo run --example length_bias

use pplprompt::datasets::Dataset;
use pplprompt::diagnostics::{length_bias_report, Bucketing};
use pplprompt::scoring::{pseudo_perplexity, TableEntry, TableScorer};
use pplprompt::{LabeledExample, Result};

fn main() -> Result<()> {
    // unigram table: "the" is easy, "zeugma" is hard
    let scorer = TableScorer::new(vec![
        TableEntry::wildcard("the", 0.6f64.ln()),
        TableEntry::wildcard("film", 0.3f64.ln()),
        TableEntry::wildcard("zeugma", 0.01f64.ln()),
    ])?;

    let mut text = String::from("film zeugma");
    println!("{:<40} ppl", "text");
    for _ in 0..4 {
        println!("{text:<40} {:.6}", pseudo_perplexity(&text, &scorer)?.value);
        text.push_str(" the");
    }
    text.push_str(" zeugma");
    println!("{text:<40} {:.6}  (hard token appended)", pseudo_perplexity(&text, &scorer)?.value);

    let words = ["the", "film", "zeugma"];
    let examples = (0..60)
        .map(|i| {
            let len = 1 + i % 12;
            let text: Vec<&str> = (0..len).map(|j| words[(i * 7 + j * j) % 3]).collect();
            LabeledExample::unlabeled(text.join(" "))
        })
        .collect::<Result<Vec<_>>>()?;
    let short: Vec<_> = examples.iter().filter(|e| e.text.split(' ').count() <= 6).cloned().collect();
    let long: Vec<_> = examples.iter().filter(|e| e.text.split(' ').count() > 6).cloned().collect();
    let datasets = [Dataset::new("short", short)?, Dataset::new("long", long)?];

    print!("{}", length_bias_report(&datasets, &scorer, Bucketing::PerDataset)?.to_tsv());
    print!("{}", length_bias_report(&datasets[..1], &scorer, Bucketing::FixedWidth(2))?.to_tsv());
    Ok(())
}
