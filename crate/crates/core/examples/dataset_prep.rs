//! Loading, balanced length-bounded subsampling and seeded few-shot splits.
//!
//!     cargo run --example dataset_prep

use pplprompt::datasets::{make_splits, parse_dataset, subsample_balanced, Format, SplitSpec, SubsampleSpec};
use pplprompt::fixtures::MatchedWorld;
use pplprompt::Result;

fn main() -> Result<()> {
    let tsv = "\
text\tlabel
the film was great\t1
dull\t0
the plot was honestly quite boring\t0
music and cast were lovely overall\t1
tedious\t0
a charming and moving story\t1
";
    let small = parse_dataset("reviews", tsv, Format::Tsv, true, "inline")?;
    println!("{} examples, classes {:?}", small.len(), small.class_counts());

    // a count scorer doubles as a whitespace tokenizer for the length bounds
    let world = MatchedWorld::build(600, 4)?;
    let data = world.dataset("world");
    let spec = SubsampleSpec::new(4, 6, 17);
    let sub = subsample_balanced(&data, &spec, &world.scorer)?;
    println!("subsample 4..=6 tokens: {} of {} kept, {:?}", sub.len(), data.len(), sub.class_counts());

    let splits = make_splits(&sub, &SplitSpec::new(3, 8, 17))?;
    for (k, train) in splits.train.iter().enumerate() {
        println!("train_{k}: {} examples, first {:?}", train.len(), train[0].text);
    }
    println!("dev {} / test {}", splits.dev.len(), splits.test.len());
    Ok(())
}
