//! A full config-driven comparison: Manual/Auto pools, PPL selection against
//! random selection over five seeds, reports written to disk.
//!
//!     cargo run --release --example run_experiment [output-dir]

use std::path::PathBuf;

use pplprompt::fixtures::MatchedWorld;
use pplprompt::harness::{run_config_file, REPORT_TEXT};
use pplprompt::Result;

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pplprompt-run-experiment"));
    let world = MatchedWorld::build(300, 21)?;
    let config = world.write_to(&dir, "comparison", &[0, 1, 2, 3, 4])?;
    println!("config: {}", config.display());

    let report = run_config_file(&config)?;
    let text = std::fs::read_to_string(dir.join("out").join(REPORT_TEXT)).expect("report written");
    print!("{text}");

    let top: Vec<_> = report
        .frequencies
        .iter()
        .filter(|f| f.frequency > 0.0)
        .map(|f| format!("{}/{}={:.2}", f.pool, f.template_id, f.frequency))
        .collect();
    println!("\nselected templates: {}", top.join(" "));
    Ok(())
}
