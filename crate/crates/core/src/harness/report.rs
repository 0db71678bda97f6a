use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::error::{Error, Result};
use crate::selection::{ClassifyMode, SelectionTrace};

pub const REPORT_JSONL: &str = "report.jsonl";
pub const REPORT_TEXT: &str = "report.txt";
pub const FREQUENCIES_TSV: &str = "frequencies.tsv";

/// Standard deviation convention used for every `std` field.
pub const STD_KIND: &str = "population";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Complete,
    /// The run aborted; only the traces finished before `error` are present.
    Incomplete { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub fingerprint: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub scorer: String,
    pub classify_mode: ClassifyMode,
    pub std_kind: String,
    /// `Some((min, max))` token bounds when datasets were subsampled per seed.
    pub subsample: Option<(usize, usize)>,
    pub run: RunStatus,
}

impl ReportMeta {
    pub fn is_complete(&self) -> bool {
        self.run == RunStatus::Complete
    }
}

/// One `(dataset, method, setting)` cell aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    /// `Fixed`, `Manual-PPL`, `Manual-Random`, `Auto-PPL` or `Auto-Random`.
    pub method: String,
    /// `pool/template_id` for fixed templates, else the pool name.
    pub setting: String,
    pub per_seed_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Mean over all traces of the chosen template's prompt perplexity.
    pub mean_prompt_ppl: f64,
    pub clamp_events: usize,
    /// Examples evaluated, summed over seeds.
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub dataset: String,
    pub pool: String,
    pub template_id: String,
    pub count: usize,
    pub frequency: f64,
    pub post_hoc_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub dataset: String,
    pub method: String,
    pub setting: String,
    pub seed: u64,
    #[serde(flatten)]
    pub trace: SelectionTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
    pub frequencies: Vec<FrequencyRow>,
    pub traces: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Meta(ReportMeta),
    Row(ReportRow),
    Frequency(FrequencyRow),
    Trace(TraceRecord),
    Incomplete { error: String },
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReportFormat {
    /// `report.jsonl`: one tagged record per line.
    Jsonl,
    /// `report.txt`: aligned table for reading.
    Text,
    /// `frequencies.tsv`: selection frequencies for plotting.
    Tsv,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [Self::Jsonl, Self::Text, Self::Tsv];

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Jsonl => REPORT_JSONL,
            Self::Text => REPORT_TEXT,
            Self::Tsv => FREQUENCIES_TSV,
        }
    }
}

impl EvalReport {
    pub fn row(&self, dataset: &str, method: &str, setting: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.method == method && r.setting == setting)
    }

    pub fn traces_for<'a>(
        &'a self,
        dataset: &'a str,
        method: &'a str,
        setting: &'a str,
    ) -> impl Iterator<Item = &'a TraceRecord> + 'a {
        self.traces
            .iter()
            .filter(move |t| t.dataset == dataset && t.method == method && t.setting == setting)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        };
        push(&Record::Meta(self.meta.clone()));
        for r in &self.rows {
            push(&Record::Row(r.clone()));
        }
        for f in &self.frequencies {
            push(&Record::Frequency(f.clone()));
        }
        for t in &self.traces {
            push(&Record::Trace(t.clone()));
        }
        if let RunStatus::Incomplete { error } = &self.meta.run {
            push(&Record::Incomplete { error: error.clone() });
        }
        out
    }

    pub fn from_jsonl(text: &str, origin: &str) -> Result<Self> {
        let mut meta = None;
        let (mut rows, mut frequencies, mut traces) = (vec![], vec![], vec![]);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.into(),
                line: i + 1,
                message,
            };
            match serde_json::from_str::<Record>(line).map_err(|e| parse_err(e.to_string()))? {
                Record::Meta(m) if meta.is_none() => meta = Some(m),
                Record::Meta(_) => return Err(parse_err("second meta record".into())),
                Record::Row(r) => rows.push(r),
                Record::Frequency(f) => frequencies.push(f),
                Record::Trace(t) => traces.push(t),
                Record::Incomplete { .. } => {}
            }
        }
        let meta = meta.ok_or_else(|| Error::Parse {
            path: origin.into(),
            line: 0,
            message: "no meta record".into(),
        })?;
        Ok(Self {
            meta,
            rows,
            frequencies,
            traces,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "fingerprint  {}", self.meta.fingerprint);
        let _ = writeln!(out, "scorer       {}", self.meta.scorer);
        let _ = writeln!(
            out,
            "seeds        {}",
            self.meta.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        );
        if let Some((lo, hi)) = self.meta.subsample {
            let _ = writeln!(out, "subsample    {lo}..={hi} tokens");
        }
        let status = match &self.meta.run {
            RunStatus::Complete => "complete".to_string(),
            RunStatus::Incomplete { error } => format!("INCOMPLETE: {error}"),
        };
        let _ = writeln!(out, "status       {status}");
        let _ = writeln!(out, "accuracy is mean±std (population) over seeds, in percent");
        out.push('\n');

        let header = ["dataset", "method", "setting", "accuracy", "prompt_ppl", "clamps", "n"];
        let cells: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.dataset.clone(),
                    r.method.clone(),
                    r.setting.clone(),
                    format!("{:.2}±{:.2}", 100.0 * r.mean, 100.0 * r.std),
                    format!("{:.4}", r.mean_prompt_ppl),
                    r.clamp_events.to_string(),
                    r.examples.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |out: &mut String, row: &[&str]| {
            let padded: Vec<String> = row
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    let pad = w - c.chars().count();
                    // text columns left-aligned, numbers right-aligned
                    if i < 3 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut out, &header);
        for row in &cells {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }

    /// `dataset`, `pool`, `template_id`, `frequency`, `accuracy`; accuracy
    /// is the template's post-hoc accuracy on all examples, empty if unknown.
    pub fn frequencies_tsv(&self) -> String {
        let mut out = String::from("dataset\tpool\ttemplate_id\tfrequency\taccuracy\n");
        for f in &self.frequencies {
            let acc = f.post_hoc_accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}",
                f.dataset, f.pool, f.template_id, f.frequency, acc
            );
        }
        out
    }
}

/// Writes the requested formats into `dir`, creating it if needed.
pub fn emit_report(report: &EvalReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(formats.len());
    for &format in formats {
        let path = dir.join(format.file_name());
        let content = match format {
            ReportFormat::Jsonl => report.to_jsonl(),
            ReportFormat::Text => report.to_text(),
            ReportFormat::Tsv => report.frequencies_tsv(),
        };
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a `report.jsonl`, or the one inside a directory.
pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path = path.join(REPORT_JSONL);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    EvalReport::from_jsonl(&text, &path.display().to_string())
}
