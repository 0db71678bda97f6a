use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure talking to a model bridge.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgeError {
    /// Connection, timeout or 5xx. Retried according to the endpoint's policy.
    #[error("transport: {0}")]
    Transport(String),
    /// The bridge answered with something that does not follow the wire protocol.
    #[error("protocol: {0}")]
    Protocol(String),
    /// The bridge rejected the request (4xx) and said why.
    #[error("model error (status {status}): {message}")]
    Model { status: u16, message: String },
}

impl BridgeError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BridgeError::Transport(_))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input text is empty")]
    EmptyInput,
    #[error("sequence has no mask placeholder to fill")]
    NoMaskPresent,
    #[error("invalid template {id:?}: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("invalid verbalizer: {0}")]
    InvalidVerbalizer(String),
    #[error("invalid template pool: {0}")]
    InvalidPool(String),
    #[error("unknown label word {0:?}")]
    UnknownLabelWord(String),
    #[error("label word {word:?} is {tokens} tokens under the active scorer, expected 1")]
    MultiTokenLabelWord { word: String, tokens: usize },
    #[error("scorer produced no tokens for the sequence")]
    EmptySequence,
    #[error("scorer failure: {0}")]
    ScorerFailure(String),
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid smoothing constant {0}, expected > 0")]
    InvalidSmoothing(f64),
    #[error("post-hoc accuracy requested but gold labels are missing")]
    MissingGoldLabels,
    #[error("template generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("every generated template failed validation")]
    AllGenerationsInvalid,
    #[error("verbalizer has {0} entries, this operation needs exactly 2")]
    NotBinaryVerbalizer(usize),
    #[error("example {0} has no gold label")]
    UnlabeledExample(usize),
    #[error("gold label {0:?} is not covered by the verbalizer")]
    UncoveredLabel(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate dataset name {0:?}")]
    DuplicateName(String),
    #[error("insufficient examples for class {class:?}: need {needed}, have {available}")]
    InsufficientExamples {
        class: String,
        needed: usize,
        available: usize,
    },
    #[error("invalid subsample spec: {0}")]
    InvalidSubsample(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable snake_case tag used as the machine-parsable prefix of CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput => "empty_input",
            Error::NoMaskPresent => "no_mask_present",
            Error::InvalidTemplate { .. } => "invalid_template",
            Error::InvalidVerbalizer(_) => "invalid_verbalizer",
            Error::InvalidPool(_) => "invalid_pool",
            Error::UnknownLabelWord(_) => "unknown_label_word",
            Error::MultiTokenLabelWord { .. } => "multi_token_label_word",
            Error::EmptySequence => "empty_sequence",
            Error::ScorerFailure(_) => "scorer_failure",
            Error::MalformedTable(_) => "malformed_table",
            Error::EmptyCorpus => "empty_corpus",
            Error::InvalidSmoothing(_) => "invalid_smoothing",
            Error::MissingGoldLabels => "missing_gold_labels",
            Error::GeneratorUnavailable(_) => "generator_unavailable",
            Error::AllGenerationsInvalid => "all_generations_invalid",
            Error::NotBinaryVerbalizer(_) => "not_binary_verbalizer",
            Error::UnlabeledExample(_) => "unlabeled_example",
            Error::UncoveredLabel(_) => "uncovered_label",
            Error::Parse { .. } => "parse_error",
            Error::DuplicateName(_) => "duplicate_name",
            Error::InsufficientExamples { .. } => "insufficient_examples",
            Error::InvalidSubsample(_) => "invalid_subsample",
            Error::Config(_) => "config_error",
            Error::Bridge(BridgeError::Transport(_)) => "transport",
            Error::Bridge(BridgeError::Protocol(_)) => "protocol",
            Error::Bridge(BridgeError::Model { .. }) => "model_error",
            Error::Io { .. } => "io_error",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
