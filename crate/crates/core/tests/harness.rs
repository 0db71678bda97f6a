use std::fs;
use std::path::{Path, PathBuf};

use pplprompt::harness::{
    load_report, mean_std, run, run_and_emit, run_method_comparison, run_zero_shot, ExperimentConfig,
    Method, RunStatus, FREQUENCIES_TSV, REPORT_JSONL, REPORT_TEXT,
};
use pplprompt::scoring::{TableEntry, TableScorer};
use pplprompt::{build_prompted_input, Template};
use tempfile::TempDir;

const POS: &str = "pos";
const NEG: &str = "neg";

struct Fixture {
    dir: TempDir,
}

fn text_for(i: usize) -> String {
    format!("item{i} w{} w{}", i % 3, i % 5)
}

fn gold(i: usize) -> &'static str {
    if i % 2 == 0 {
        POS
    } else {
        NEG
    }
}

/// Balanced dataset of `n` examples, a pool of `templates`, and a table
/// scorer. With `oracle`, the mask slot of every prompted example favours
/// the gold label word; otherwise both label words are equally likely.
fn fixture(n: usize, templates: &[(&str, &str)], oracle: bool, seeds: &[u64], method: &str) -> Fixture {
    let dir = TempDir::new().unwrap();
    let mut vocab: Vec<String> = vec!["yes".into(), "no".into(), ".".into(), "it".into(), "was".into()];
    vocab.extend((0..n).map(|i| format!("item{i}")));
    vocab.extend((0..5).map(|i| format!("w{i}")));
    for (_, p) in templates {
        for w in p.split_whitespace().filter(|w| *w != "[MASK]") {
            if !vocab.iter().any(|v| v == w) {
                vocab.push(w.to_string());
            }
        }
    }
    let lp = (0.5 / vocab.len() as f64).ln();
    let mut entries: Vec<TableEntry> = vocab.iter().map(|w| TableEntry::wildcard(w.as_str(), lp)).collect();
    if oracle {
        for i in 0..n {
            let (g, other) = if gold(i) == POS { ("yes", "no") } else { ("no", "yes") };
            let mut patterns: Vec<&str> = templates.iter().map(|(_, p)| *p).collect();
            patterns.dedup();
            for p in patterns {
                let t = Template::postfix("t", p).unwrap();
                let ctx = build_prompted_input(&text_for(i), &t).unwrap().text().to_string();
                entries.push(TableEntry::new(ctx.clone(), g, 0.4f64.ln()));
                entries.push(TableEntry::new(ctx, other, 0.05f64.ln()));
            }
        }
    }
    let table = TableScorer::new(entries).unwrap();
    let w = |name: &str, content: String| fs::write(dir.path().join(name), content).unwrap();
    w("table.jsonl", table.to_jsonl());
    w(
        "data.jsonl",
        (0..n)
            .map(|i| format!("{{\"text\":\"{}\",\"label\":\"{}\"}}\n", text_for(i), gold(i)))
            .collect(),
    );
    let pool: String = templates
        .iter()
        .map(|(id, p)| format!("{{\"id\":\"{id}\",\"pattern\":\"{p}\",\"placement\":\"postfix\"}}\n"))
        .collect();
    w("manual.jsonl", pool.clone());
    w("auto.jsonl", pool);
    w("verbalizer.json", r#"{"label_words":{"yes":"pos","no":"neg"}}"#.into());
    let seeds = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(", ");
    w(
        "experiment.toml",
        format!(
            r#"method = "{method}"
seeds = [{seeds}]
output_dir = "out"
verbalizer = "verbalizer.json"
scorer = "table:table.jsonl"

[[datasets]]
path = "data.jsonl"

[[template_pools]]
name = "manual"
path = "manual.jsonl"
provenance = "manual"

[[template_pools]]
name = "auto"
path = "auto.jsonl"
provenance = "auto_generated"
"#
        ),
    );
    Fixture { dir }
}

impl Fixture {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig::load(self.dir.path().join("experiment.toml")).unwrap()
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }
}

const TWO: &[(&str, &str)] = &[("t1", "[MASK] ."), ("t2", "it was [MASK] .")];

#[test]
fn oracle_scorer_scores_perfectly() {
    let f = fixture(40, TWO, true, &[0], "fixed_template");
    let report = run_zero_shot(&f.config()).unwrap();
    assert_eq!(report.rows.len(), 4, "two pools x two templates");
    for row in &report.rows {
        assert_eq!(row.method, "Fixed");
        assert_eq!(row.mean, 1.0, "{row:?}");
    }
}

#[test]
fn uniform_label_words_give_chance_accuracy() {
    let f = fixture(1000, &[("t1", "[MASK] .")], false, &[0], "fixed_template");
    let report = run_zero_shot(&f.config()).unwrap();
    for row in &report.rows {
        assert!((0.45..=0.55).contains(&row.mean), "{row:?}");
    }
}

#[test]
fn identical_templates_make_methods_indistinguishable() {
    let same = &[("a", "it was [MASK] ."), ("b", "it was [MASK] ."), ("c", "it was [MASK] .")];
    let f = fixture(30, same, true, &[0, 1, 2], "comparison");
    let report = run_method_comparison(&f.config()).unwrap();
    let methods: Vec<&str> = report.rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, ["Manual-PPL", "Manual-Random", "Auto-PPL", "Auto-Random"]);
    let first = report.rows[0].per_seed_accuracy.clone();
    assert!(report.rows.iter().all(|r| r.per_seed_accuracy == first));
}

#[test]
fn emitted_report_round_trips() {
    let f = fixture(20, TWO, true, &[3, 4], "comparison");
    let report = run_and_emit(&f.config()).unwrap();
    for name in [REPORT_JSONL, REPORT_TEXT, FREQUENCIES_TSV] {
        assert!(f.out().join(name).is_file(), "{name}");
    }
    assert_eq!(load_report(f.out()).unwrap(), report);
    assert_eq!(report.meta.std_kind, "population");
    assert_eq!(report.meta.run, RunStatus::Complete);
}

#[test]
fn fingerprints_track_config_and_files() {
    let a = fixture(10, TWO, true, &[1, 2], "ppl_select");
    let b = fixture(10, TWO, true, &[1, 2], "ppl_select");
    let c = fixture(10, TWO, true, &[1, 3], "ppl_select");
    let fp = |f: &Fixture| f.config().fingerprint().unwrap();
    assert_eq!(fp(&a), fp(&b));
    assert_ne!(fp(&a), fp(&c));

    fs::write(b.dir.path().join("data.jsonl"), "{\"text\":\"item0 w0 w0\",\"label\":\"pos\"}\n").unwrap();
    assert_ne!(fp(&a), fp(&b));
}

#[test]
fn emitted_mean_and_std_recompute_from_per_seed_values() {
    let f = fixture(24, TWO, false, &[0, 1, 2, 3, 4], "random_select");
    run_and_emit(&f.config()).unwrap();
    let text = fs::read_to_string(f.out().join(REPORT_JSONL)).unwrap();
    let mut rows = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v["record"] != "row" {
            continue;
        }
        rows += 1;
        let xs: Vec<f64> = v["per_seed_accuracy"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((v["mean"].as_f64().unwrap() - mean).abs() <= 1e-12);
        assert!((v["std"].as_f64().unwrap() - std).abs() <= 1e-12);
    }
    assert_eq!(rows, 2);
    assert_eq!(mean_std(&[0.25, 0.75]), (0.5, 0.25));
}

#[test]
fn accuracy_replays_from_exported_traces() {
    let f = fixture(30, TWO, false, &[5, 6, 7], "comparison");
    let report = run_and_emit(&f.config()).unwrap();
    let reloaded = load_report(f.out()).unwrap();
    for row in &reloaded.rows {
        for (k, seed) in reloaded.meta.seeds.iter().enumerate() {
            let traces: Vec<_> = reloaded
                .traces_for(&row.dataset, &row.method, &row.setting)
                .filter(|t| t.seed == *seed)
                .collect();
            let correct = traces
                .iter()
                .filter(|t| Some(&t.trace.predicted_class) == t.trace.gold_class.as_ref())
                .count();
            assert_eq!(row.per_seed_accuracy[k], correct as f64 / traces.len() as f64);
        }
    }
    assert_eq!(report.traces.len(), 4 * 3 * 30);
}

#[test]
fn scorer_failure_flushes_an_incomplete_report() {
    let f = fixture(12, TWO, true, &[0], "fixed_template");
    // example 5 contains a token the table has never seen
    let data = f.dir.path().join("data.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&data).unwrap().lines().map(String::from).collect();
    lines[5] = r#"{"text":"item5 unseenword","label":"neg"}"#.into();
    fs::write(&data, lines.join("\n") + "\n").unwrap();

    let err = run_and_emit(&f.config()).unwrap_err();
    assert_eq!(err.kind(), "scorer_failure");
    let text = fs::read_to_string(f.out().join(REPORT_JSONL)).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with(r#"{"record":"incomplete""#), "{last}");
    let partial = load_report(f.out()).unwrap();
    assert!(matches!(partial.meta.run, RunStatus::Incomplete { .. }));
    // the five examples before the failure are kept, nothing after
    assert_eq!(partial.traces.len(), 5);
    assert!(partial.traces.iter().all(|t| t.trace.example_index < 5));
    assert!(partial.rows.is_empty());
    assert!(fs::read_to_string(f.out().join(REPORT_TEXT)).unwrap().contains("INCOMPLETE"));
}

#[test]
fn per_seed_subsampling_is_recorded() {
    let f = fixture(40, TWO, true, &[1, 2], "ppl_select");
    let path = f.dir.path().join("experiment.toml");
    let text = fs::read_to_string(&path).unwrap().replace(
        "[[datasets]]",
        "[subsample]\nmin_tokens = 3\nmax_tokens = 3\n\n[[datasets]]",
    );
    fs::write(&path, text).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    let report = run(&cfg).unwrap();
    assert_eq!(report.meta.subsample, Some((3, 3)));
    assert_eq!(report.meta.method, Method::PplSelect);
    assert!(report.rows.iter().all(|r| r.mean == 1.0));
}

#[test]
fn config_errors_surface_before_running() {
    let f = fixture(4, TWO, true, &[0], "ppl_select");
    let path: &Path = &f.dir.path().join("experiment.toml");
    let text = fs::read_to_string(path).unwrap().replace("seeds = [0]", "seeds = []");
    fs::write(path, text).unwrap();
    let err = run(&ExperimentConfig::load(path).unwrap()).unwrap_err();
    assert!(err.partial.is_none());
    assert_eq!(err.error.kind(), "config_error");
}
