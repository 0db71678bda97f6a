//! Building an auto-generated template pool. Any closure with the right
//! signature is a generator; `RemoteGenerator` is the bridge-backed one.
//!
//!     cargo run --example auto_template_pool

use pplprompt::fixtures::{sentiment_examples, very_not_verbalizer};
use pplprompt::selection::{build_auto_pool, AutoPoolConfig, GenerationRequest, GENERATION_PROMPT};
use pplprompt::Result;

fn main() -> Result<()> {
    let inputs = sentiment_examples(120, 5);
    let verbalizer = very_not_verbalizer();

    // stands in for a seq2seq model: spans around the label word, with a
    // few collisions and one pattern that loses the slot
    let generator = |r: &GenerationRequest| -> Result<Vec<String>> {
        let n = r.input.split_whitespace().count();
        Ok(match n % 4 {
            0 => vec!["it was [MASK] good .".into()],
            1 => vec!["[MASK] pleased .".into(), "i am [MASK] happy".into()],
            2 => vec![format!("{} indeed", r.filled_label_word)],
            _ => vec!["[MASK] recommended !".into()],
        })
    };

    let config = AutoPoolConfig {
        n_examples: 50,
        seed: 1,
        ..AutoPoolConfig::default()
    };
    let out = build_auto_pool(&inputs, &verbalizer, &generator, &config)?;
    println!("request shape: {GENERATION_PROMPT}");
    println!(
        "sampled {} inputs, {} patterns generated, {} kept, {} rejected",
        out.sampled.len(),
        out.generated,
        out.pool.len(),
        out.rejected.len()
    );
    print!("{}", out.pool.to_jsonl());
    if let Some(r) = out.rejected.first() {
        println!("rejected e.g. {:?}: {}", r.pattern, r.reason);
    }
    Ok(())
}
