//! Config-driven experiments.
//!
//! A run walks datasets, then seeds, then template pools. With a toy scorer
//! every number in the report is reproducible bit for bit: examples are
//! scored in parallel but merged by index, and the only randomness comes
//! from the configured seeds (per-seed subsampling and random selection).

mod config;
mod report;

use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

pub use config::{
    DatasetRef, ExperimentConfig, LengthBounds, Method, PoolRef, ScorerBinding, ScorerOptions,
    DEFAULT_COUNT_ALPHA,
};
pub use report::{
    emit_report, load_report, mean_std, EvalReport, FrequencyRow, ReportFormat, ReportMeta,
    ReportRow, RunStatus, TraceRecord, FREQUENCIES_TSV, REPORT_JSONL, REPORT_TEXT, STD_KIND,
};

use crate::datasets::{check_unique_names, load_dataset, subsample_balanced, Dataset};
use crate::error::{Error, Result};
use crate::prompt::{LabeledExample, Template, Verbalizer};
use crate::scoring::{CachedScorer, MaskedTokenScorer};
use crate::selection::{
    apply_template, select_template_ppl, select_template_random, selection_frequency_report,
    ClassifyMode, Provenance, SelectionTrace, TemplatePool,
};

/// A run that stopped early. `partial` holds everything finished before the
/// error, marked incomplete; it is `None` when the failure happened before
/// any evaluation (bad config, unreachable scorer).
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub partial: Option<Box<EvalReport>>,
    pub error: Error,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self {
            partial: None,
            error,
        }
    }
}

pub type RunResult = std::result::Result<EvalReport, RunFailure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Strategy {
    Fixed(usize),
    Ppl,
    Random,
}

/// One evaluated column of the report.
struct Setting<'a> {
    method: String,
    setting: String,
    pool_name: &'a str,
    pool: &'a TemplatePool,
    strategy: Strategy,
}

fn provenance_label(p: Provenance) -> &'static str {
    match p {
        Provenance::Manual => "Manual",
        Provenance::AutoGenerated => "Auto",
    }
}

fn plan<'a>(pools: &'a [(String, TemplatePool)], method: Method) -> Vec<Setting<'a>> {
    let mut out = Vec::new();
    for (name, pool) in pools {
        let label = provenance_label(pool.provenance());
        let selector = |strategy: Strategy, suffix: &str| Setting {
            method: format!("{label}-{suffix}"),
            setting: name.clone(),
            pool_name: name,
            pool,
            strategy,
        };
        match method {
            Method::FixedTemplate => {
                for (i, t) in pool.templates().iter().enumerate() {
                    out.push(Setting {
                        method: "Fixed".into(),
                        setting: format!("{name}/{}", t.id()),
                        pool_name: name,
                        pool,
                        strategy: Strategy::Fixed(i),
                    });
                }
            }
            Method::PplSelect => out.push(selector(Strategy::Ppl, "PPL")),
            Method::RandomSelect => out.push(selector(Strategy::Random, "Random")),
            Method::Comparison => {
                out.push(selector(Strategy::Ppl, "PPL"));
                out.push(selector(Strategy::Random, "Random"));
            }
        }
    }
    out
}

/// Everything a run needs, loaded and checked up front.
struct Prepared {
    config: ExperimentConfig,
    datasets: Vec<Dataset>,
    pools: Vec<(String, TemplatePool)>,
    verbalizer: Verbalizer,
    scorer: CachedScorer<Box<dyn MaskedTokenScorer>>,
    meta: ReportMeta,
}

fn prepare(config: &ExperimentConfig, method: Method) -> Result<Prepared> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let verbalizer = Verbalizer::load(config.resolve(&config.verbalizer))?;
    let mut datasets = Vec::with_capacity(config.datasets.len());
    for d in &config.datasets {
        let mut ds = load_dataset(config.resolve(&d.path), config.dataset_format(d), d.header)?;
        if let Some(name) = &d.name {
            ds.name = name.clone();
        }
        for (i, e) in ds.examples.iter().enumerate() {
            let label = e.label.as_deref().ok_or(Error::UnlabeledExample(i))?;
            if verbalizer.label_word_for(label).is_none() {
                return Err(Error::UncoveredLabel(label.to_string()));
            }
        }
        datasets.push(ds);
    }
    check_unique_names(&datasets)?;
    let pools = config
        .template_pools
        .iter()
        .map(|p| Ok((p.name.clone(), TemplatePool::load(config.resolve(&p.path), p.provenance)?)))
        .collect::<Result<Vec<_>>>()?;
    let binding = config.scorer_binding()?;
    let scorer = CachedScorer::new(binding.build(&config.scorer_options())?);
    let meta = ReportMeta {
        fingerprint,
        method,
        seeds: config.seeds.clone(),
        scorer: config.scorer.clone(),
        classify_mode: config.classify_mode,
        std_kind: STD_KIND.into(),
        subsample: config.subsample.as_ref().map(|b| (b.min_tokens, b.max_tokens)),
        run: RunStatus::Complete,
    };
    Ok(Prepared {
        config: config.clone(),
        datasets,
        pools,
        verbalizer,
        scorer,
        meta,
    })
}

fn evaluate_examples(
    examples: &[LabeledExample],
    setting: &Setting<'_>,
    verbalizer: &Verbalizer,
    scorer: &dyn MaskedTokenScorer,
    seed: u64,
    mode: ClassifyMode,
) -> Vec<Result<SelectionTrace>> {
    examples
        .par_iter()
        .enumerate()
        .map(|(i, e)| match setting.strategy {
            Strategy::Fixed(t) => {
                let template: &Template = &setting.pool.templates()[t];
                apply_template(i, e, template, verbalizer, scorer, mode)
            }
            Strategy::Ppl => select_template_ppl(i, e, setting.pool, verbalizer, scorer, mode),
            Strategy::Random => select_template_random(i, e, setting.pool, verbalizer, scorer, seed, mode),
        })
        .collect()
}

fn accuracy(traces: &[SelectionTrace]) -> f64 {
    let correct = traces.iter().filter(|t| t.is_correct() == Some(true)).count();
    correct as f64 / traces.len() as f64
}

fn chosen_ppl(t: &SelectionTrace) -> f64 {
    t.per_template_ppl[t.chosen_template_id.as_str()]
}

struct Cell {
    per_seed_accuracy: Vec<f64>,
    ppl_sum: f64,
    clamp_events: usize,
    examples: usize,
}

fn execute(p: &Prepared) -> RunResult {
    let settings = plan(&p.pools, p.meta.method);
    let mut report = EvalReport {
        meta: p.meta.clone(),
        rows: vec![],
        frequencies: vec![],
        traces: vec![],
    };
    for dataset in &p.datasets {
        let mut cells: Vec<Cell> = settings
            .iter()
            .map(|_| Cell {
                per_seed_accuracy: vec![],
                ppl_sum: 0.0,
                clamp_events: 0,
                examples: 0,
            })
            .collect();
        // examples seen by each PPL setting, for post-hoc template accuracy
        let mut ppl_examples: Vec<Vec<LabeledExample>> = settings.iter().map(|_| vec![]).collect();
        for &seed in &p.config.seeds {
            let examples = match p.config.subsample_spec(seed) {
                Some(spec) => match subsample_balanced(dataset, &spec, &p.scorer) {
                    Ok(d) => d.examples,
                    Err(e) => return Err(abort(report, e)),
                },
                None => dataset.examples.clone(),
            };
            info!("{}: seed {seed}, {} examples", dataset.name, examples.len());
            for (si, setting) in settings.iter().enumerate() {
                let results = evaluate_examples(
                    &examples,
                    setting,
                    &p.verbalizer,
                    &p.scorer,
                    seed,
                    p.config.classify_mode,
                );
                let mut traces = Vec::with_capacity(results.len());
                let mut failure = None;
                for r in results {
                    match r {
                        Ok(t) => traces.push(t),
                        Err(e) => {
                            failure = Some(e);
                            break;
                        }
                    }
                }
                let cell = &mut cells[si];
                if failure.is_none() {
                    cell.per_seed_accuracy.push(accuracy(&traces));
                    cell.ppl_sum += traces.iter().map(chosen_ppl).sum::<f64>();
                    cell.clamp_events += traces.iter().map(|t| t.clamp_events).sum::<usize>();
                    cell.examples += traces.len();
                    if setting.strategy == Strategy::Ppl {
                        ppl_examples[si].extend(examples.iter().cloned());
                    }
                }
                report.traces.extend(traces.into_iter().map(|trace| TraceRecord {
                    dataset: dataset.name.clone(),
                    method: setting.method.clone(),
                    setting: setting.setting.clone(),
                    seed,
                    trace,
                }));
                if let Some(e) = failure {
                    return Err(abort(report, e));
                }
            }
        }
        for (si, setting) in settings.iter().enumerate() {
            let cell = &cells[si];
            let (mean, std) = mean_std(&cell.per_seed_accuracy);
            report.rows.push(ReportRow {
                dataset: dataset.name.clone(),
                method: setting.method.clone(),
                setting: setting.setting.clone(),
                per_seed_accuracy: cell.per_seed_accuracy.clone(),
                mean,
                std,
                mean_prompt_ppl: cell.ppl_sum / cell.examples as f64,
                clamp_events: cell.clamp_events,
                examples: cell.examples,
            });
            if setting.strategy == Strategy::Ppl {
                if let Err(e) = frequency_rows(&mut report, p, dataset, setting, &ppl_examples[si]) {
                    return Err(abort(report, e));
                }
            }
        }
    }
    Ok(report)
}

fn frequency_rows(
    report: &mut EvalReport,
    p: &Prepared,
    dataset: &Dataset,
    setting: &Setting<'_>,
    examples: &[LabeledExample],
) -> Result<()> {
    let traces: Vec<SelectionTrace> = report
        .traces_for(&dataset.name, &setting.method, &setting.setting)
        .map(|t| t.trace.clone())
        .collect();
    let freq = selection_frequency_report(&traces, setting.pool)?.with_post_hoc_accuracy(
        &traces,
        examples,
        setting.pool,
        &p.verbalizer,
        &p.scorer,
    )?;
    report.frequencies.extend(freq.rows.into_iter().map(|r| FrequencyRow {
        dataset: dataset.name.clone(),
        pool: setting.pool_name.to_string(),
        template_id: r.template_id,
        count: r.count,
        frequency: r.frequency,
        post_hoc_accuracy: r.post_hoc_accuracy,
    }));
    Ok(())
}

fn abort(mut report: EvalReport, error: Error) -> RunFailure {
    warn!("run aborted: {error}");
    report.meta.run = RunStatus::Incomplete {
        error: format!("{}: {error}", error.kind()),
    };
    RunFailure {
        partial: Some(Box::new(report)),
        error,
    }
}

/// Evaluates every template of every pool as a fixed prompting setting.
pub fn run_zero_shot(config: &ExperimentConfig) -> RunResult {
    execute(&prepare(config, Method::FixedTemplate)?)
}

/// PPL selection against random selection on every pool; needs a manual
/// and an auto-generated pool.
pub fn run_method_comparison(config: &ExperimentConfig) -> RunResult {
    let mut c = config.clone();
    c.method = Method::Comparison;
    execute(&prepare(&c, Method::Comparison)?)
}

/// Runs the config's own method.
pub fn run(config: &ExperimentConfig) -> RunResult {
    execute(&prepare(config, config.method)?)
}

/// Runs the config and writes all report formats to its output directory.
/// A failed run still writes whatever it finished, marked incomplete,
/// before the error is returned.
pub fn run_and_emit(config: &ExperimentConfig) -> Result<EvalReport> {
    let out = config.output_path();
    match run(config) {
        Ok(report) => {
            emit_report(&report, &out, &ReportFormat::ALL)?;
            Ok(report)
        }
        Err(RunFailure { partial, error }) => {
            if let Some(partial) = partial {
                emit_report(&partial, &out, &ReportFormat::ALL)?;
            }
            Err(error)
        }
    }
}

/// Loads a config file and runs it.
pub fn run_config_file(path: impl AsRef<Path>) -> Result<EvalReport> {
    run_and_emit(&ExperimentConfig::load(path)?)
}
