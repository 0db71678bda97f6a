//! Zero-shot classification: fill the mask, compare label-word scores.
//!
//!     cargo run --example zero_shot_classify

use pplprompt::fixtures::{sentiment_examples, MatchedWorld};
use pplprompt::scoring::mask_fill_logprobs;
use pplprompt::selection::{template_accuracy, zero_shot_classify};
use pplprompt::{build_prompted_input, Result};

fn main() -> Result<()> {
    let world = MatchedWorld::build(200, 3)?;
    let template = world.manual_pool.get("pleased").expect("matched template");

    for e in world.held_out.iter().take(4) {
        let prompted = build_prompted_input(&e.text, template)?;
        let scores = mask_fill_logprobs(&e.text, template, &world.verbalizer, &world.scorer)?;
        let predicted = zero_shot_classify(&e.text, template, &world.verbalizer, &world.scorer)?;
        println!("{:<50} {scores:.3?} -> {predicted} (gold {})", prompted.text(), e.label.as_deref().unwrap_or("?"));
    }

    // every template on fresh data; only the matched one carries signal
    let fresh = sentiment_examples(400, 99);
    for t in world.manual_pool.templates() {
        let acc = template_accuracy(&fresh, t, &world.verbalizer, &world.scorer)?;
        println!("{:<12} accuracy {:.4}", t.id(), acc);
    }
    Ok(())
}
