use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bridge::{BridgeEndpoint, RemoteScorer};
use crate::datasets::{Format, SubsampleSpec};
use crate::error::{Error, Result};
use crate::scoring::{CountScorer, MaskedTokenScorer, TableScorer};
use crate::selection::{ClassifyMode, Provenance};

pub const DEFAULT_COUNT_ALPHA: f64 = 0.1;

/// Where scores come from: `table:<fixture>`, `count:<corpus>`,
/// `remote:<url>`, or bare `remote` to read the URL from the environment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScorerBinding {
    Table(PathBuf),
    Count(PathBuf),
    Remote(Option<String>),
}

impl FromStr for ScorerBinding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("table", p)) if !p.is_empty() => Ok(Self::Table(p.into())),
            Some(("count", p)) if !p.is_empty() => Ok(Self::Count(p.into())),
            Some(("remote", url)) => Ok(Self::Remote(Some(url.to_string()).filter(|u| !u.is_empty()))),
            None if s == "remote" => Ok(Self::Remote(None)),
            _ => Err(Error::Config(format!(
                "bad scorer binding {s:?}; expected table:<path>, count:<path> or remote[:<url>]"
            ))),
        }
    }
}

impl fmt::Display for ScorerBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Table(p) => write!(f, "table:{}", p.display()),
            Self::Count(p) => write!(f, "count:{}", p.display()),
            Self::Remote(Some(u)) => write!(f, "remote:{u}"),
            Self::Remote(None) => write!(f, "remote"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerOptions {
    pub count_alpha: f64,
    pub timeout_ms: Option<u64>,
}

impl Default for ScorerOptions {
    fn default() -> Self {
        Self {
            count_alpha: DEFAULT_COUNT_ALPHA,
            timeout_ms: None,
        }
    }
}

impl ScorerBinding {
    pub fn resolve(&self, base: &Path) -> Self {
        match self {
            Self::Table(p) => Self::Table(base.join(p)),
            Self::Count(p) => Self::Count(base.join(p)),
            Self::Remote(u) => Self::Remote(u.clone()),
        }
    }

    pub fn build(&self, opts: &ScorerOptions) -> Result<Box<dyn MaskedTokenScorer>> {
        Ok(match self {
            Self::Table(p) => Box::new(TableScorer::load(p)?),
            Self::Count(p) => Box::new(CountScorer::load(p, opts.count_alpha)?),
            Self::Remote(url) => {
                let mut endpoint = BridgeEndpoint::resolve(url.as_deref())?;
                if let Some(t) = opts.timeout_ms {
                    endpoint.timeout_ms = t;
                }
                Box::new(RemoteScorer::connect(endpoint)?)
            }
        })
    }

    fn local_file(&self) -> Option<&Path> {
        match self {
            Self::Table(p) | Self::Count(p) => Some(p),
            Self::Remote(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Every template of every pool evaluated as its own setting.
    #[serde(alias = "fixed-template")]
    FixedTemplate,
    /// Lowest-perplexity template per example.
    #[serde(alias = "ppl-select")]
    PplSelect,
    /// Seeded uniform template per example.
    #[serde(alias = "random-select")]
    RandomSelect,
    /// `PplSelect` and `RandomSelect` on every pool, side by side.
    Comparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub header: bool,
    /// Defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolRef {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "manual")]
    pub provenance: Provenance,
}

fn manual() -> Provenance {
    Provenance::Manual
}

fn default_alpha() -> f64 {
    DEFAULT_COUNT_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthBounds {
    pub min_tokens: usize,
    pub max_tokens: usize,
}

/// An experiment, as written in its TOML file. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetRef>,
    pub template_pools: Vec<PoolRef>,
    pub verbalizer: PathBuf,
    pub scorer: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub classify_mode: ClassifyMode,
    #[serde(default = "default_alpha")]
    pub count_alpha: f64,
    /// Balanced length-bounded subsample drawn per seed before evaluation.
    #[serde(default)]
    pub subsample: Option<LengthBounds>,
    #[serde(default)]
    pub bridge_timeout_ms: Option<u64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn scorer_binding(&self) -> Result<ScorerBinding> {
        Ok(self.scorer.parse::<ScorerBinding>()?.resolve(&self.base_dir))
    }

    pub fn scorer_options(&self) -> ScorerOptions {
        ScorerOptions {
            count_alpha: self.count_alpha,
            timeout_ms: self.bridge_timeout_ms,
        }
    }

    pub fn subsample_spec(&self, seed: u64) -> Option<SubsampleSpec> {
        self.subsample
            .as_ref()
            .map(|b| SubsampleSpec::new(b.min_tokens, b.max_tokens, seed))
    }

    pub fn dataset_format(&self, d: &DatasetRef) -> Format {
        d.format.unwrap_or_else(|| Format::from_path(&d.path))
    }

    fn referenced_files(&self) -> Result<Vec<PathBuf>> {
        let mut files: Vec<PathBuf> = self.datasets.iter().map(|d| self.resolve(&d.path)).collect();
        files.extend(self.template_pools.iter().map(|p| self.resolve(&p.path)));
        files.push(self.resolve(&self.verbalizer));
        if let Some(p) = self.scorer_binding()?.local_file() {
            files.push(p.to_path_buf());
        }
        Ok(files)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        if self.template_pools.is_empty() {
            return Err(Error::Config("at least one template pool is required".into()));
        }
        if !(self.count_alpha > 0.0) {
            return Err(Error::Config(format!("count_alpha {} must be > 0", self.count_alpha)));
        }
        let mut names = std::collections::HashSet::new();
        for p in &self.template_pools {
            if !names.insert(p.name.as_str()) {
                return Err(Error::Config(format!("duplicate pool name {:?}", p.name)));
            }
        }
        if self.method == Method::Comparison {
            let has = |prov| self.template_pools.iter().any(|p| p.provenance == prov);
            if !has(Provenance::Manual) || !has(Provenance::AutoGenerated) {
                return Err(Error::Config(
                    "comparison needs one manual and one auto_generated pool".into(),
                ));
            }
        }
        for f in self.referenced_files()? {
            if !f.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", f.display())));
            }
        }
        Ok(())
    }

    /// SHA-256 over the config and the bytes of every file it references.
    pub fn fingerprint(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        for f in self.referenced_files()? {
            let bytes = fs::read(&f).map_err(|e| Error::io(&f, e))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }
}
