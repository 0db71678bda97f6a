//! Per-example template selection by lowest prompt perplexity, against the
//! seeded random baseline, plus the selection-frequency report.
//!
//!     cargo run --example template_selection

use pplprompt::fixtures::MatchedWorld;
use pplprompt::selection::{
    select_template_ppl, select_template_random, selection_frequency_report, ClassifyMode,
    SelectionTrace,
};
use pplprompt::Result;

fn accuracy(traces: &[SelectionTrace]) -> f64 {
    traces.iter().filter(|t| t.is_correct() == Some(true)).count() as f64 / traces.len() as f64
}

fn main() -> Result<()> {
    let world = MatchedWorld::build(200, 11)?;
    let (v, s, mode) = (&world.verbalizer, &world.scorer, ClassifyMode::MaskLogprob);

    for pool in [&world.manual_pool, &world.auto_pool] {
        let ppl: Vec<_> = world
            .in_corpus
            .iter()
            .enumerate()
            .map(|(i, e)| select_template_ppl(i, e, pool, v, s, mode))
            .collect::<Result<_>>()?;
        let mut random_acc = Vec::new();
        for seed in 0..5 {
            let traces: Vec<_> = world
                .in_corpus
                .iter()
                .enumerate()
                .map(|(i, e)| select_template_random(i, e, pool, v, s, seed, mode))
                .collect::<Result<_>>()?;
            random_acc.push(accuracy(&traces));
        }
        let random_mean = random_acc.iter().sum::<f64>() / random_acc.len() as f64;
        println!(
            "{:?} pool: ppl-select {:.4}  random {:.4} (5 seeds)",
            pool.provenance(),
            accuracy(&ppl),
            random_mean
        );

        let first = &ppl[0];
        println!("  example 0 picks {} from {:.3?}", first.chosen_template_id, first.per_template_ppl);

        let freq = selection_frequency_report(&ppl, pool)?.with_post_hoc_accuracy(
            &ppl,
            &world.in_corpus,
            pool,
            v,
            s,
        )?;
        print!("{}", freq.to_tsv());
    }
    Ok(())
}
