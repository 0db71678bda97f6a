//! The `pplprompt` command line.
//!
//! Standard output carries only data, one record per line, with numbers at
//! six decimal places. Logs go to standard error (`RUST_LOG`, `-v`).
//!
//! Exit codes: 0 on success, 2 for usage errors, 1 for runtime failures.
//! Runtime failures print one line `error[<kind>]: <message>` to standard
//! error, where `<kind>` is [`Error::kind`].

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bridge::{BridgeEndpoint, RemoteGenerator};
use crate::datasets::{
    check_unique_names, examples_to_jsonl, load_dataset, make_splits,
    subsample_balanced, Dataset, Format, SplitSpec, SubsampleSpec,
};
use crate::diagnostics::{length_bias_report, reverse_label_report, reverse_label_tsv, Bucketing};
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, Method, ScorerBinding, ScorerOptions};
use crate::prompt::{parse_templates, LabeledExample, Placement, Template, Verbalizer};
use crate::scoring::{pseudo_perplexity, CachedScorer, MaskedTokenScorer};
use crate::selection::{
    build_auto_pool, select_template_ppl, select_template_random, selection_frequency_report,
    zero_shot_classify, AutoPoolConfig, ClassifyMode, Provenance, SelectionTrace, TemplatePool,
};

#[derive(Debug, Parser)]
#[command(name = "pplprompt", version, about = "Cloze-prompt scoring, classification and template selection")]
struct Cli {
    /// Log more to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pseudo-perplexity of each input line.
    Score(ScoreArgs),
    /// Zero-shot class of each example under one template.
    Classify(ClassifyArgs),
    /// Per-example template selection; prints SelectionTrace records.
    Select(SelectArgs),
    /// Build an auto-generated template pool through the bridge.
    GenTemplates(GenArgs),
    /// Subsample a dataset and optionally cut seeded train/dev/test splits.
    PrepData(PrepArgs),
    /// Perplexity diagnostics.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
    /// Run an experiment config and write its report.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct ScorerArgs {
    /// table:<fixture.jsonl>, count:<corpus.txt>, remote:<url>, or remote
    /// (URL from PPLPROMPT_BRIDGE_URL).
    #[arg(long)]
    scorer: String,
    /// Add-alpha smoothing for count scorers.
    #[arg(long, default_value_t = harness::DEFAULT_COUNT_ALPHA)]
    count_alpha: f64,
    /// Bridge request timeout; overrides PPLPROMPT_BRIDGE_TIMEOUT_MS.
    #[arg(long)]
    timeout_ms: Option<u64>,
}

impl ScorerArgs {
    fn build(&self) -> Result<CachedScorer<Box<dyn MaskedTokenScorer>>> {
        let binding: ScorerBinding = self.scorer.parse()?;
        let opts = ScorerOptions {
            count_alpha: self.count_alpha,
            timeout_ms: self.timeout_ms,
        };
        Ok(CachedScorer::new(binding.build(&opts)?))
    }
}

/// Examples from `--data`, else `--text`, else stdin lines.
#[derive(Debug, Args)]
struct InputArgs {
    /// Dataset file: JSON lines of {text, label}, or .tsv with text<TAB>label.
    #[arg(long, conflicts_with = "text")]
    data: Option<PathBuf>,
    /// Force the dataset format instead of inferring it from the extension.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// The TSV file has a header line.
    #[arg(long)]
    header: bool,
    /// Literal input text; repeatable.
    #[arg(long)]
    text: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Tsv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => Format::Jsonl,
            FormatArg::Tsv => Format::Tsv,
        }
    }
}

impl InputArgs {
    fn load(&self) -> Result<Dataset> {
        if let Some(path) = &self.data {
            let format = self.format.map(Format::from).unwrap_or_else(|| Format::from_path(path));
            return load_dataset(path, format, self.header);
        }
        let examples = if self.text.is_empty() {
            read_lines(&None, &[])?
                .into_iter()
                .map(LabeledExample::unlabeled)
                .collect::<Result<Vec<_>>>()?
        } else {
            self.text
                .iter()
                .map(LabeledExample::unlabeled)
                .collect::<Result<Vec<_>>>()?
        };
        Dataset::new("text", examples)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlacementArg {
    Prefix,
    Postfix,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Prefix => Placement::Prefix,
            PlacementArg::Postfix => Placement::Postfix,
        }
    }
}

#[derive(Debug, Args)]
struct VerbalizerArgs {
    /// JSON file {"label_words": {"word": "class", ...}}.
    #[arg(long, required_unless_present = "label_word")]
    verbalizer: Option<PathBuf>,
    /// Inline word=class pair; repeat for each class.
    #[arg(long, conflicts_with = "verbalizer")]
    label_word: Vec<String>,
}

impl VerbalizerArgs {
    fn load(&self) -> Result<Verbalizer> {
        if let Some(p) = &self.verbalizer {
            return Verbalizer::load(p);
        }
        let pairs = self
            .label_word
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(w, c)| (w.to_string(), c.to_string()))
                    .ok_or_else(|| Error::Config(format!("--label-word {s:?} is not word=class")))
            })
            .collect::<Result<Vec<_>>>()?;
        Verbalizer::new(pairs)
    }
}

#[derive(Debug, Args)]
struct TemplateArgs {
    /// Inline template pattern containing [MASK].
    #[arg(long, required_unless_present = "templates")]
    template: Option<String>,
    #[arg(long, value_enum, default_value = "postfix")]
    placement: PlacementArg,
    /// Template file (JSON lines of {id, pattern, placement}).
    #[arg(long, conflicts_with = "template", requires = "template_id")]
    templates: Option<PathBuf>,
    /// Which template of --templates to use.
    #[arg(long)]
    template_id: Option<String>,
}

impl TemplateArgs {
    fn load(&self) -> Result<Template> {
        if let Some(pattern) = &self.template {
            return Template::new("cli", pattern.clone(), self.placement.into());
        }
        let path = self.templates.as_ref().expect("clap enforces one source");
        let id = self.template_id.as_deref().expect("clap enforces template_id");
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_templates(&text, &path.display().to_string())?
            .into_iter()
            .find(|t| t.id() == id)
            .ok_or_else(|| Error::Config(format!("no template {id:?} in {}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    MaskLogprob,
    LowestPplFill,
}

impl From<ModeArg> for ClassifyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::MaskLogprob => ClassifyMode::MaskLogprob,
            ModeArg::LowestPplFill => ClassifyMode::LowestPplFill,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    /// File with one text per line; stdin when neither this nor --text is given.
    #[arg(long, conflicts_with = "text")]
    input: Option<PathBuf>,
    /// Literal text; repeatable.
    #[arg(long)]
    text: Vec<String>,
    /// Print JSON records {text, ppl, tokens, clamped} instead of bare numbers.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    template: TemplateArgs,
    #[command(flatten)]
    verbalizer: VerbalizerArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SelectMethod {
    Ppl,
    Random,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    verbalizer: VerbalizerArgs,
    /// Template pool file (JSON lines).
    #[arg(long)]
    pool: PathBuf,
    /// Mark the pool as auto-generated.
    #[arg(long)]
    auto_generated: bool,
    #[arg(long, value_enum, default_value = "ppl")]
    method: SelectMethod,
    /// Seed for random selection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mask-logprob")]
    mode: ModeArg,
    /// Print per-template selection frequencies (with post-hoc accuracy when
    /// every example is labeled) instead of traces.
    #[arg(long)]
    frequencies: bool,
    /// Tab-separated frequencies: template_id, frequency, accuracy.
    #[arg(long, requires = "frequencies")]
    tsv: bool,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    verbalizer: VerbalizerArgs,
    /// Bridge URL; falls back to PPLPROMPT_BRIDGE_URL.
    #[arg(long)]
    bridge: Option<String>,
    /// Request timeout; overrides PPLPROMPT_BRIDGE_TIMEOUT_MS.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Labeled examples sampled as generation seeds.
    #[arg(long, default_value_t = 50)]
    n_examples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generations requested per example.
    #[arg(long, default_value_t = 1)]
    num_return: usize,
    #[arg(long, default_value_t = 20)]
    max_new_tokens: usize,
    #[arg(long, value_enum, default_value = "postfix")]
    placement: PlacementArg,
    /// Keep exact duplicate patterns.
    #[arg(long)]
    no_dedupe: bool,
}

#[derive(Debug, Args)]
struct PrepArgs {
    /// Tokenizer used for the length bounds.
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    header: bool,
    /// Keep examples with at least this many tokens (balanced subsample).
    #[arg(long, requires = "max_tokens")]
    min_tokens: Option<usize>,
    /// Keep examples with at most this many tokens.
    #[arg(long, requires = "min_tokens")]
    max_tokens: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of train splits; writes train_<k>.jsonl, dev.jsonl and test.jsonl.
    #[arg(long, requires_all = ["shots", "out_dir"])]
    splits: Option<usize>,
    /// Examples per class in each train split.
    #[arg(long)]
    shots: Option<usize>,
    /// Forbid overlap between train splits.
    #[arg(long)]
    disjoint: bool,
    /// Where the split files go.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum DiagnoseCommand {
    /// Raw-text pseudo-perplexity against token length.
    LengthBias(LengthBiasArgs),
    /// Perplexity with gold against reversed label words filled.
    ReverseLabel(ReverseLabelArgs),
}

#[derive(Debug, Args)]
struct LengthBiasArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    /// Dataset files; repeatable.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    header: bool,
    /// Token-length bucket width; one row per dataset when absent.
    #[arg(long)]
    bucket_width: Option<usize>,
    /// Tab-separated output.
    #[arg(long)]
    tsv: bool,
}

#[derive(Debug, Args)]
struct ReverseLabelArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    template: TemplateArgs,
    #[command(flatten)]
    verbalizer: VerbalizerArgs,
    #[arg(long)]
    tsv: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the config's method.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    FixedTemplate,
    PplSelect,
    RandomSelect,
    Comparison,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::FixedTemplate => Method::FixedTemplate,
            MethodArg::PplSelect => Method::PplSelect,
            MethodArg::RandomSelect => Method::RandomSelect,
            MethodArg::Comparison => Method::Comparison,
        }
    }
}

/// Rounds every float in a JSON value to six decimals.
fn round_floats(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let rounded: f64 = format!("{x:.6}").parse().expect("formatted float parses");
            if let Some(r) = serde_json::Number::from_f64(rounded) {
                *n = r;
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_floats),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("record serializes");
    round_floats(&mut v);
    serde_json::to_string(&v).expect("value serializes")
}

struct Out<W: Write> {
    inner: W,
}

impl<W: Write> Out<W> {
    fn line(&mut self, s: impl AsRef<str>) -> Result<()> {
        writeln!(self.inner, "{}", s.as_ref()).map_err(|e| Error::io("<stdout>", e))
    }

    fn raw(&mut self, s: &str) -> Result<()> {
        self.inner.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e))
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("<stdout>", e))
    }
}

fn read_lines(input: &Option<PathBuf>, text: &[String]) -> Result<Vec<String>> {
    if !text.is_empty() {
        return Ok(text.to_vec());
    }
    let content = match input {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => io::read_to_string(io::stdin().lock()).map_err(|e| Error::io("<stdin>", e))?,
    };
    Ok(content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn cmd_score<W: Write>(args: &ScoreArgs, out: &mut Out<W>) -> Result<()> {
    let scorer = args.scorer.build()?;
    for text in read_lines(&args.input, &args.text)? {
        let ppl = pseudo_perplexity(&text, &scorer)?;
        if args.json {
            #[derive(Serialize)]
            struct Row<'a> {
                text: &'a str,
                ppl: f64,
                tokens: usize,
                clamped: usize,
            }
            out.line(json_line(&Row {
                text: &text,
                ppl: ppl.value,
                tokens: ppl.token_count,
                clamped: ppl.clamped,
            }))?;
        } else {
            out.line(format!("{:.6}", ppl.value))?;
        }
    }
    Ok(())
}

fn cmd_classify<W: Write>(args: &ClassifyArgs, out: &mut Out<W>) -> Result<()> {
    let scorer = args.scorer.build()?;
    let template = args.template.load()?;
    let verbalizer = args.verbalizer.load()?;
    let dataset = args.input.load()?;
    use rayon::prelude::*;
    let predictions = dataset
        .examples
        .par_iter()
        .map(|e| zero_shot_classify(&e.text, &template, &verbalizer, &scorer))
        .collect::<Result<Vec<_>>>()?;
    for p in predictions {
        out.line(p)?;
    }
    Ok(())
}

fn cmd_select<W: Write>(args: &SelectArgs, out: &mut Out<W>) -> Result<()> {
    let scorer = args.scorer.build()?;
    let verbalizer = args.verbalizer.load()?;
    let provenance = if args.auto_generated {
        Provenance::AutoGenerated
    } else {
        Provenance::Manual
    };
    let pool = TemplatePool::load(&args.pool, provenance)?;
    let dataset = args.input.load()?;
    let mode = args.mode.into();
    use rayon::prelude::*;
    let traces = dataset
        .examples
        .par_iter()
        .enumerate()
        .map(|(i, e)| match args.method {
            SelectMethod::Ppl => select_template_ppl(i, e, &pool, &verbalizer, &scorer, mode),
            SelectMethod::Random => {
                select_template_random(i, e, &pool, &verbalizer, &scorer, args.seed, mode)
            }
        })
        .collect::<Result<Vec<SelectionTrace>>>()?;
    if !args.frequencies {
        for t in &traces {
            out.line(json_line(t))?;
        }
        return Ok(());
    }
    let mut report = selection_frequency_report(&traces, &pool)?;
    if dataset.examples.iter().all(|e| e.label.is_some()) {
        report = report.with_post_hoc_accuracy(&traces, &dataset.examples, &pool, &verbalizer, &scorer)?;
    } else {
        log::warn!("unlabeled examples present; post-hoc accuracy omitted");
    }
    if args.tsv {
        out.raw(&report.to_tsv())
    } else {
        for row in &report.rows {
            out.line(json_line(row))?;
        }
        Ok(())
    }
}

fn cmd_gen<W: Write>(args: &GenArgs, out: &mut Out<W>) -> Result<()> {
    let dataset = args.input.load()?;
    let verbalizer = args.verbalizer.load()?;
    let mut endpoint = BridgeEndpoint::resolve(args.bridge.as_deref())?;
    if let Some(t) = args.timeout_ms {
        endpoint.timeout_ms = t;
    }
    let generator = RemoteGenerator::connect(endpoint)?;
    let config = AutoPoolConfig {
        n_examples: args.n_examples,
        seed: args.seed,
        num_return: args.num_return,
        max_new_tokens: args.max_new_tokens,
        dedupe: !args.no_dedupe,
        placement: args.placement.into(),
        ..AutoPoolConfig::default()
    };
    let outcome = build_auto_pool(&dataset.examples, &verbalizer, &generator, &config)?;
    log::info!(
        "{} patterns generated, {} kept, {} rejected, {} cells skipped",
        outcome.generated,
        outcome.pool.len(),
        outcome.rejected.len(),
        outcome.skipped_cells.len()
    );
    out.raw(&outcome.pool.to_jsonl())
}

fn cmd_prep<W: Write>(args: &PrepArgs, out: &mut Out<W>) -> Result<()> {
    let format = args.format.map(Format::from).unwrap_or_else(|| Format::from_path(&args.data));
    let mut dataset = load_dataset(&args.data, format, args.header)?;
    if let (Some(lo), Some(hi)) = (args.min_tokens, args.max_tokens) {
        let scorer = args.scorer.build()?;
        dataset = subsample_balanced(&dataset, &SubsampleSpec::new(lo, hi, args.seed), &scorer)?;
        log::info!("subsampled to {} examples: {:?}", dataset.len(), dataset.class_counts());
    }
    let Some(k) = args.splits else {
        return out.raw(&dataset.to_jsonl());
    };
    let mut spec = SplitSpec::new(k, args.shots.expect("clap requires shots"), args.seed);
    spec.disjoint = args.disjoint;
    let splits = make_splits(&dataset, &spec)?;
    let dir = args.out_dir.as_ref().expect("clap requires out_dir");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut write = |name: String, examples: &[LabeledExample]| -> Result<()> {
        let path = dir.join(&name);
        fs::write(&path, examples_to_jsonl(examples)).map_err(|e| Error::io(&path, e))?;
        out.line(format!("{}\t{}", path.display(), examples.len()))
    };
    for (i, train) in splits.train.iter().enumerate() {
        write(format!("train_{i}.jsonl"), train)?;
    }
    write("dev.jsonl".into(), &splits.dev)?;
    write("test.jsonl".into(), &splits.test)
}

fn cmd_length_bias<W: Write>(args: &LengthBiasArgs, out: &mut Out<W>) -> Result<()> {
    let scorer = args.scorer.build()?;
    let datasets = args
        .data
        .iter()
        .map(|p| load_dataset(p, Format::from_path(p), args.header))
        .collect::<Result<Vec<_>>>()?;
    check_unique_names(&datasets)?;
    let bucketing = args.bucket_width.map_or(Bucketing::PerDataset, Bucketing::FixedWidth);
    let report = length_bias_report(&datasets, &scorer, bucketing)?;
    if args.tsv {
        return out.raw(&report.to_tsv());
    }
    for row in &report.rows {
        out.line(json_line(row))?;
    }
    Ok(())
}

fn cmd_reverse_label<W: Write>(args: &ReverseLabelArgs, out: &mut Out<W>) -> Result<()> {
    let scorer = args.scorer.build()?;
    let dataset = args.input.load()?;
    let template = args.template.load()?;
    let verbalizer = args.verbalizer.load()?;
    let row = reverse_label_report(&dataset, &template, &verbalizer, &scorer)?;
    if args.tsv {
        out.raw(&reverse_label_tsv(std::slice::from_ref(&row)))
    } else {
        out.line(json_line(&row))
    }
}

fn cmd_eval<W: Write>(args: &EvalArgs, out: &mut Out<W>) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        // relative overrides are relative to the working directory
        config.output_dir = std::path::absolute(dir).map_err(|e| Error::io(dir, e))?;
    }
    if let Some(m) = args.method {
        config.method = m.into();
    }
    let report = harness::run_and_emit(&config)?;
    log::info!("report written to {}", config.output_path().display());
    for row in &report.rows {
        out.line(json_line(row))?;
    }
    Ok(())
}

fn dispatch<W: Write>(command: &Command, out: &mut Out<W>) -> Result<()> {
    match command {
        Command::Score(a) => cmd_score(a, out),
        Command::Classify(a) => cmd_classify(a, out),
        Command::Select(a) => cmd_select(a, out),
        Command::GenTemplates(a) => cmd_gen(a, out),
        Command::PrepData(a) => cmd_prep(a, out),
        Command::Diagnose(DiagnoseCommand::LengthBias(a)) => cmd_length_bias(a, out),
        Command::Diagnose(DiagnoseCommand::ReverseLabel(a)) => cmd_reverse_label(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default))
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Parses `args` (program name first), runs the command writing data to
/// `stdout` and diagnostics to `stderr`, and returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    init_logging(cli.verbose);
    let mut out = Out { inner: stdout };
    let result = dispatch(&cli.command, &mut out).and_then(|()| out.finish());
    match result {
        Ok(()) => 0,
        Err(Error::Io { ref path, ref source })
            if path == Path::new("<stdout>") && source.kind() == io::ErrorKind::BrokenPipe =>
        {
            0
        }
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error[{}]: {message}", e.kind());
            1
        }
    }
}

/// Entry point for the binary: real stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let mut stdout = io::BufWriter::new(stdout.lock());
    let mut stderr = io::stderr();
    let code = run_with(args, &mut stdout, &mut stderr);
    let _ = stdout.flush();
    code
}
