//! Scoring through a running model bridge.
//!
//!     PPLPROMPT_BRIDGE_URL=http://127.0.0.1:8000 cargo run --example remote_bridge

use pplprompt::bridge::{BridgeEndpoint, RemoteScorer, BRIDGE_URL_ENV};
use pplprompt::scoring::{mask_fill_logprobs, pseudo_perplexity};
use pplprompt::{Template, Verbalizer};

fn main() {
    let endpoint = match BridgeEndpoint::resolve(None) {
        Ok(e) => e,
        Err(_) => {
            eprintln!("set {BRIDGE_URL_ENV} to a running bridge, e.g. http://127.0.0.1:8000");
            return;
        }
    };
    if let Err(e) = run(endpoint) {
        eprintln!("error[{}]: {e}", e.kind());
        std::process::exit(1);
    }
}

fn run(endpoint: BridgeEndpoint) -> pplprompt::Result<()> {
    let scorer = RemoteScorer::connect(endpoint)?;
    let h = scorer.health();
    println!("model {} vocab {} mask {}", h.model, h.vocab_size, scorer.mask_token());

    let texts = ["the film was great .".to_string(), "great was . film the".to_string()];
    for t in &texts {
        println!("{t:<28} ppl={:.6}", pseudo_perplexity(t, &scorer)?.value);
    }
    // the same texts again, fanned out; served from the cache this time
    let batched = scorer.token_logprobs_many(&texts)?;
    println!("batched token counts: {:?}", batched.iter().map(Vec::len).collect::<Vec<_>>());

    let template = Template::postfix("t", "it was [MASK] .")?;
    let verbalizer = Verbalizer::new([("good", "pos"), ("bad", "neg")])?;
    let scores = mask_fill_logprobs("the film was great", &template, &verbalizer, &scorer)?;
    println!("label words: {scores:.4?}");
    Ok(())
}
