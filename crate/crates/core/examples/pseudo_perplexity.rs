//! Pseudo-perplexity with the two toy scorers.
//!
//!     cargo run --example pseudo_perplexity

use pplprompt::fixtures::{three_token_table, MatchedWorld};
use pplprompt::scoring::{prompt_perplexity, pseudo_perplexity, TableScorer};
use pplprompt::Result;

fn main() -> Result<()> {
    // p = 0.5, 0.25, 0.125 for the three true tokens
    let table = three_token_table();
    let ppl = pseudo_perplexity("a b c", &table)?;
    println!("table   \"a b c\"  ppl={:.6} nll={:?}", ppl.value, ppl.per_token_nll);

    // uniform model: ppl equals the vocabulary size at any length
    let vocab: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    let uniform = TableScorer::uniform(&vocab)?;
    for text in ["w0", "w1 w2 w3", "w7 w7 w7 w7 w7 w7"] {
        println!("uniform {text:<18} ppl={:.6}", pseudo_perplexity(text, &uniform)?.value);
    }

    // count scorer: sentences seen in the corpus score far lower than novel ones
    let world = MatchedWorld::build(40, 7)?;
    let seen = &world.corpus[0];
    let novel = "pleased the very . plot";
    for text in [seen.as_str(), novel] {
        let p = pseudo_perplexity(text, &world.scorer)?;
        println!("count   {text:<40} ppl={:.6} clamped={}", p.value, p.clamped);
    }

    // prompt perplexity: mean over the label-word fills of a template
    let example = &world.in_corpus[0];
    for t in world.manual_pool.templates() {
        let p = prompt_perplexity(&example.text, t, &world.verbalizer, &world.scorer)?;
        let fills: Vec<String> = p
            .per_word
            .iter()
            .map(|(w, q)| format!("{w}={:.3}", q.value))
            .collect();
        println!("template {:<12} prompt_ppl={:.6} [{}]", t.id(), p.mean, fills.join(" "));
    }
    Ok(())
}
