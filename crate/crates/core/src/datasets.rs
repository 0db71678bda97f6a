//! Labeled text datasets: loading, balanced length-bounded subsampling and
//! seeded train/dev/test splits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::LabeledExample;
use crate::scoring::MaskedTokenScorer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<LabeledExample>,
    pub class_labels: BTreeSet<String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<LabeledExample>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Config("dataset name is empty".into()));
        }
        let class_labels = examples.iter().filter_map(|e| e.label.clone()).collect();
        Ok(Self {
            name,
            examples,
            class_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> =
            self.class_labels.iter().map(|c| (c.clone(), 0)).collect();
        for e in &self.examples {
            if let Some(l) = &e.label {
                *counts.entry(l.clone()).or_default() += 1;
            }
        }
        counts
    }

    pub fn to_jsonl(&self) -> String {
        examples_to_jsonl(&self.examples)
    }
}

pub fn examples_to_jsonl(examples: &[LabeledExample]) -> String {
    let mut out = String::new();
    for e in examples {
        out.push_str(&serde_json::to_string(e).expect("example serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Tsv,
}

impl Format {
    /// `.tsv` is TSV, everything else is treated as JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => Format::Tsv,
            _ => Format::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    text: String,
    #[serde(default)]
    label: Option<serde_json::Value>,
}

/// Parses `{text, label}` records. `skip_header` drops the first TSV line.
pub fn parse_dataset(
    name: &str,
    content: &str,
    format: Format,
    skip_header: bool,
    origin: &str,
) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut examples = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        if format == Format::Tsv && skip_header && i == 0 {
            continue;
        }
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (text, label) = match format {
            Format::Jsonl => {
                let rec: JsonRecord =
                    serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
                let label = match rec.label {
                    None | Some(serde_json::Value::Null) => None,
                    Some(serde_json::Value::String(s)) => Some(s),
                    Some(v @ serde_json::Value::Number(_)) | Some(v @ serde_json::Value::Bool(_)) => {
                        Some(v.to_string())
                    }
                    Some(other) => {
                        return Err(parse_err(line_no, format!("unsupported label {other}")))
                    }
                };
                (rec.text, label)
            }
            Format::Tsv => match line.rsplit_once('\t') {
                Some((t, l)) => (t.to_string(), Some(l.trim().to_string()).filter(|l| !l.is_empty())),
                None => (line.to_string(), None),
            },
        };
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(parse_err(line_no, "empty text".into()));
        }
        examples.push(LabeledExample { text, label });
    }
    Dataset::new(name, examples)
}

pub fn load_dataset(path: impl AsRef<Path>, format: Format, skip_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let ds = parse_dataset(&name, &content, format, skip_header, &path.display().to_string())?;
    log::info!("loaded {} ({} examples): {:?}", ds.name, ds.len(), ds.class_counts());
    Ok(ds)
}

/// Rejects collections where two datasets share a name.
pub fn check_unique_names(datasets: &[Dataset]) -> Result<()> {
    let mut seen = HashSet::new();
    for d in datasets {
        if !seen.insert(d.name.as_str()) {
            return Err(Error::DuplicateName(d.name.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    /// Inclusive token-length bounds.
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Target per-class proportions; `None` means equal shares over the
    /// dataset's classes.
    #[serde(default)]
    pub balance: Option<Vec<(String, f64)>>,
    #[serde(default)]
    pub seed: u64,
}

impl SubsampleSpec {
    pub fn new(min_tokens: usize, max_tokens: usize, seed: u64) -> Self {
        Self {
            min_tokens,
            max_tokens,
            balance: None,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.min_tokens < 1 || self.min_tokens > self.max_tokens {
            return Err(Error::InvalidSubsample(format!(
                "need 1 <= min_tokens <= max_tokens, got {}..={}",
                self.min_tokens, self.max_tokens
            )));
        }
        if let Some(b) = &self.balance {
            if b.is_empty() || b.iter().any(|(_, p)| !(*p > 0.0 && p.is_finite())) {
                return Err(Error::InvalidSubsample("proportions must be positive".into()));
            }
            let total: f64 = b.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSubsample(format!("proportions sum to {total}, not 1")));
            }
        }
        Ok(())
    }
}

/// Keeps examples whose token length is within bounds, then downsamples to
/// the target class balance. Output preserves the input order.
pub fn subsample_balanced<S: MaskedTokenScorer + ?Sized>(
    dataset: &Dataset,
    spec: &SubsampleSpec,
    tokenizer: &S,
) -> Result<Dataset> {
    spec.validate()?;
    let balance: Vec<(String, f64)> = match &spec.balance {
        Some(b) => b.clone(),
        None => {
            let n = dataset.class_labels.len() as f64;
            dataset.class_labels.iter().map(|c| (c.clone(), 1.0 / n)).collect()
        }
    };
    if balance.is_empty() {
        return Err(Error::InvalidSubsample("dataset has no class labels".into()));
    }

    let mut lengths: HashMap<&str, usize> = HashMap::new();
    let mut by_class: BTreeMap<&str, Vec<usize>> = balance.iter().map(|(c, _)| (c.as_str(), vec![])).collect();
    for (i, e) in dataset.examples.iter().enumerate() {
        let label = e.label.as_deref().ok_or(Error::UnlabeledExample(i))?;
        let len = match lengths.get(e.text.as_str()) {
            Some(&l) => l,
            None => {
                let l = tokenizer.tokenize(&e.text)?.len();
                lengths.insert(&e.text, l);
                l
            }
        };
        if len < spec.min_tokens || len > spec.max_tokens {
            continue;
        }
        if let Some(members) = by_class.get_mut(label) {
            members.push(i);
        }
    }

    let mut scale = f64::INFINITY;
    for (class, p) in &balance {
        let n = by_class[class.as_str()].len();
        if n == 0 {
            return Err(Error::InsufficientExamples {
                class: class.clone(),
                needed: 1,
                available: 0,
            });
        }
        scale = scale.min(n as f64 / p);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut keep = Vec::new();
    for (class, p) in &balance {
        let members = &by_class[class.as_str()];
        let target = ((p * scale) + 1e-9).floor() as usize;
        let target = target.clamp(1, members.len());
        let picked = index::sample(&mut rng, members.len(), target);
        keep.extend(picked.into_iter().map(|j| members[j]));
    }
    keep.sort_unstable();
    let examples = keep.into_iter().map(|i| dataset.examples[i].clone()).collect();
    Dataset::new(dataset.name.clone(), examples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub k_train_splits: usize,
    pub shots_per_class: usize,
    pub seed: u64,
    /// Forbid overlap between train splits.
    #[serde(default)]
    pub disjoint: bool,
    /// Dev size; defaults to one train split's size.
    #[serde(default)]
    pub dev_size: Option<usize>,
}

impl SplitSpec {
    pub fn new(k_train_splits: usize, shots_per_class: usize, seed: u64) -> Self {
        Self {
            k_train_splits,
            shots_per_class,
            seed,
            disjoint: false,
            dev_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<Vec<LabeledExample>>,
    pub dev: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

pub fn make_splits(dataset: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    if spec.k_train_splits == 0 || spec.shots_per_class == 0 {
        return Err(Error::Config("k_train_splits and shots_per_class must be >= 1".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in dataset.examples.iter().enumerate() {
        let label = e.label.as_deref().ok_or(Error::UnlabeledExample(i))?;
        by_class.entry(label).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(Error::Config("dataset has no examples".into()));
    }
    let per_class_needed = if spec.disjoint {
        spec.shots_per_class * spec.k_train_splits
    } else {
        spec.shots_per_class
    };
    for (class, members) in &by_class {
        if members.len() < per_class_needed {
            return Err(Error::InsufficientExamples {
                class: class.to_string(),
                needed: per_class_needed,
                available: members.len(),
            });
        }
    }

    let mut used: HashSet<usize> = HashSet::new();
    let mut train = Vec::with_capacity(spec.k_train_splits);
    for split in 0..spec.k_train_splits {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(split as u64);
        let mut chosen = Vec::new();
        for members in by_class.values() {
            let pool: Vec<usize> = if spec.disjoint {
                members.iter().copied().filter(|i| !used.contains(i)).collect()
            } else {
                members.clone()
            };
            let picked = index::sample(&mut rng, pool.len(), spec.shots_per_class);
            chosen.extend(picked.into_iter().map(|j| pool[j]));
        }
        chosen.sort_unstable();
        used.extend(chosen.iter().copied());
        train.push(chosen.iter().map(|&i| dataset.examples[i].clone()).collect::<Vec<_>>());
    }

    let mut remainder: Vec<usize> = (0..dataset.len()).filter(|i| !used.contains(i)).collect();
    let dev_size = spec
        .dev_size
        .unwrap_or(spec.shots_per_class * by_class.len());
    if remainder.len() < dev_size + 1 {
        return Err(Error::InsufficientExamples {
            class: "<dev+test remainder>".into(),
            needed: dev_size + 1,
            available: remainder.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.k_train_splits as u64);
    remainder.shuffle(&mut rng);
    let (dev_idx, test_idx) = remainder.split_at(dev_size);
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| dataset.examples[i].clone()).collect::<Vec<_>>()
    };
    Ok(Splits {
        train,
        dev: pick(dev_idx),
        test: pick(test_idx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::TableScorer;

    fn tok() -> TableScorer {
        TableScorer::uniform(&["w"]).unwrap()
    }

    fn synthetic(pos: usize, neg: usize, len: usize) -> Dataset {
        let text = vec!["w"; len].join(" ");
        let mut ex = Vec::new();
        for i in 0..pos {
            ex.push(LabeledExample::new(format!("{text} p{i}"), "++").unwrap());
        }
        for i in 0..neg {
            ex.push(LabeledExample::new(format!("{text} n{i}"), "--").unwrap());
        }
        Dataset::new("syn", ex).unwrap()
    }

    #[test]
    fn jsonl_and_tsv_agree() {
        let jsonl = "{\"text\": \"good film\", \"label\": \"++\"}\n{\"text\": \"bad film\", \"label\": \"--\"}\n{\"text\": \"meh\", \"label\": \"--\"}\n";
        let tsv = "good film\t++\nbad film\t--\nmeh\t--\n";
        let a = parse_dataset("d", jsonl, Format::Jsonl, false, "a").unwrap();
        let b = parse_dataset("d", tsv, Format::Tsv, false, "b").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a.class_counts()["--"], 2);
        let with_header = format!("text\tlabel\n{tsv}");
        assert_eq!(parse_dataset("d", &with_header, Format::Tsv, true, "c").unwrap(), a);
    }

    #[test]
    fn empty_text_names_line() {
        let bad = "{\"text\": \"ok\", \"label\": \"1\"}\n{\"text\": \"  \", \"label\": \"1\"}\n";
        let err = parse_dataset("d", bad, Format::Jsonl, false, "f.jsonl").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_dataset("d", "ok\t1\n\t1\n", Format::Tsv, false, "f.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_dataset("d", "{oops", Format::Jsonl, false, "f").is_err());
    }

    #[test]
    fn duplicate_names() {
        let a = synthetic(1, 1, 1);
        assert!(matches!(
            check_unique_names(&[a.clone(), a]),
            Err(Error::DuplicateName(_))
        ));
    }

    #[test]
    fn balanced_input_unchanged() {
        let d = synthetic(4, 4, 3);
        let out = subsample_balanced(&d, &SubsampleSpec::new(1, 10, 7), &tok()).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn majority_is_capped() {
        let d = synthetic(10, 2, 3);
        let out = subsample_balanced(&d, &SubsampleSpec::new(1, 10, 7), &tok()).unwrap();
        assert_eq!(out.class_counts()["++"], 2);
        assert_eq!(out.class_counts()["--"], 2);
        let again = subsample_balanced(&d, &SubsampleSpec::new(1, 10, 7), &tok()).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn length_filter_and_starvation() {
        let mut d = synthetic(3, 0, 2);
        d.examples.extend(synthetic(0, 3, 8).examples);
        d.class_labels.insert("--".into());
        let err = subsample_balanced(&d, &SubsampleSpec::new(1, 5, 0), &tok()).unwrap_err();
        assert!(matches!(err, Error::InsufficientExamples { ref class, .. } if class == "--"));
        assert!(subsample_balanced(&d, &SubsampleSpec::new(0, 5, 0), &tok()).is_err());
        assert!(subsample_balanced(&d, &SubsampleSpec::new(6, 5, 0), &tok()).is_err());
    }

    #[test]
    fn uneven_proportions() {
        let d = synthetic(10, 10, 1);
        let spec = SubsampleSpec {
            balance: Some(vec![("++".into(), 0.75), ("--".into(), 0.25)]),
            ..SubsampleSpec::new(1, 5, 1)
        };
        let out = subsample_balanced(&d, &spec, &tok()).unwrap();
        // scale = min(10/0.75, 10/0.25) = 13.33 -> 10 and 3
        assert_eq!(out.class_counts()["++"], 10);
        assert_eq!(out.class_counts()["--"], 3);
    }

    #[test]
    fn split_sizes() {
        let d = synthetic(200, 200, 1);
        let s = make_splits(&d, &SplitSpec::new(1, 1, 3)).unwrap();
        assert_eq!(s.train[0].len(), 2);
        let s = make_splits(&d, &SplitSpec::new(5, 16, 3)).unwrap();
        assert!(s.train.iter().all(|t| t.len() == 32));
        for split in &s.train {
            let unique: HashSet<_> = split.iter().map(|e| &e.text).collect();
            assert_eq!(unique.len(), split.len());
        }
        assert_eq!(s.dev.len(), 32);
        let again = make_splits(&d, &SplitSpec::new(5, 16, 3)).unwrap();
        assert_eq!(s, again);
        let disjoint = SplitSpec {
            disjoint: true,
            ..SplitSpec::new(5, 16, 3)
        };
        let small = synthetic(40, 40, 1);
        assert!(matches!(
            make_splits(&small, &disjoint),
            Err(Error::InsufficientExamples { needed: 80, .. })
        ));
    }
}
