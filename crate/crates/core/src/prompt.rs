//! Templates, verbalizers and prompted inputs.
//!
//! A [`Template`] carries exactly one `[MASK]` placeholder and is either
//! prepended or appended to the input text, joined by a single space. The
//! resulting [`PromptedSequence`] can then be filled with a label word to
//! obtain the surface text that gets scored.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placeholder token for the single cloze slot of a template.
pub const MASK: &str = "[MASK]";

/// Joiner between template and input.
pub const SEPARATOR: &str = " ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Prefix,
    Postfix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate")]
pub struct Template {
    id: String,
    pattern: String,
    placement: Placement,
}

#[derive(Deserialize)]
struct RawTemplate {
    id: String,
    pattern: String,
    placement: Placement,
}

impl TryFrom<RawTemplate> for Template {
    type Error = Error;

    fn try_from(raw: RawTemplate) -> Result<Self> {
        Template::new(raw.id, raw.pattern, raw.placement)
    }
}

impl Template {
    pub fn new(
        id: impl Into<String>,
        pattern: impl Into<String>,
        placement: Placement,
    ) -> Result<Self> {
        let id = id.into();
        let pattern = pattern.into();
        if id.trim().is_empty() {
            return Err(Error::InvalidTemplate {
                id,
                reason: "empty id".into(),
            });
        }
        let masks = pattern.matches(MASK).count();
        if masks != 1 {
            return Err(Error::InvalidTemplate {
                id,
                reason: format!("pattern must contain {MASK} exactly once, found {masks}"),
            });
        }
        Ok(Self {
            id,
            pattern,
            placement,
        })
    }

    pub fn prefix(id: impl Into<String>, pattern: impl Into<String>) -> Result<Self> {
        Self::new(id, pattern, Placement::Prefix)
    }

    pub fn postfix(id: impl Into<String>, pattern: impl Into<String>) -> Result<Self> {
        Self::new(id, pattern, Placement::Postfix)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }
}

/// Bijective map from label words to class labels, in a fixed order.
///
/// The order matters: it is the tie-break order for classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verbalizer {
    entries: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct VerbalizerFile {
    label_words: serde_json::Map<String, serde_json::Value>,
}

impl Verbalizer {
    pub fn new<W, C>(entries: impl IntoIterator<Item = (W, C)>) -> Result<Self>
    where
        W: Into<String>,
        C: Into<String>,
    {
        let entries: Vec<(String, String)> = entries
            .into_iter()
            .map(|(w, c)| (w.into(), c.into()))
            .collect();
        if entries.len() < 2 {
            return Err(Error::InvalidVerbalizer(format!(
                "need at least 2 entries, got {}",
                entries.len()
            )));
        }
        let mut words = HashSet::new();
        let mut classes = HashSet::new();
        for (w, c) in &entries {
            if w.trim().is_empty() || w.contains(MASK) {
                return Err(Error::InvalidVerbalizer(format!("bad label word {w:?}")));
            }
            if !words.insert(w.as_str()) {
                return Err(Error::InvalidVerbalizer(format!("duplicate label word {w:?}")));
            }
            if !classes.insert(c.as_str()) {
                return Err(Error::InvalidVerbalizer(format!("duplicate class label {c:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label_words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(_, c)| c.as_str())
    }

    pub fn map_label_word(&self, word: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(w, _)| w == word)
            .map(|(_, c)| c.as_str())
            .ok_or_else(|| Error::UnknownLabelWord(word.to_string()))
    }

    pub fn label_word_for(&self, class: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, c)| c == class)
            .map(|(w, _)| w.as_str())
    }

    /// Same label words with the class labels of a binary verbalizer exchanged.
    pub fn swapped_classes(&self) -> Result<Self> {
        if self.entries.len() != 2 {
            return Err(Error::NotBinaryVerbalizer(self.entries.len()));
        }
        let (w0, c0) = &self.entries[0];
        let (w1, c1) = &self.entries[1];
        Self::new([(w0.clone(), c1.clone()), (w1.clone(), c0.clone())])
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: VerbalizerFile = serde_json::from_str(s)
            .map_err(|e| Error::InvalidVerbalizer(format!("bad verbalizer document: {e}")))?;
        let mut entries = Vec::with_capacity(file.label_words.len());
        for (word, class) in file.label_words {
            let class = class
                .as_str()
                .ok_or_else(|| Error::InvalidVerbalizer(format!("class for {word:?} is not a string")))?
                .to_string();
            entries.push((word, class));
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let label_words = self
            .entries
            .iter()
            .map(|(w, c)| (w.clone(), serde_json::Value::String(c.clone())))
            .collect();
        serde_json::to_string(&VerbalizerFile { label_words }).expect("verbalizer serializes")
    }
}

/// An input example. The label is absent for pure zero-shot scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl LabeledExample {
    pub fn new(text: impl Into<String>, label: impl Into<String>) -> Result<Self> {
        Self::build(text.into(), Some(label.into()))
    }

    pub fn unlabeled(text: impl Into<String>) -> Result<Self> {
        Self::build(text.into(), None)
    }

    fn build(text: String, label: Option<String>) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self { text, label })
    }
}

/// Template applied to an input, optionally with the mask already filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptedSequence {
    text: String,
    /// Byte offset of the placeholder in `text`; `None` once filled. The
    /// token position is left to the scorer's tokenizer.
    mask_offset: Option<usize>,
    source_input: String,
    template_id: String,
}

impl PromptedSequence {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn mask_offset(&self) -> Option<usize> {
        self.mask_offset
    }

    pub fn has_mask(&self) -> bool {
        self.mask_offset.is_some()
    }

    pub fn source_input(&self) -> &str {
        &self.source_input
    }

    pub fn template_id(&self) -> &str {
        &self.template_id
    }
}

pub fn build_prompted_input(input: &str, template: &Template) -> Result<PromptedSequence> {
    if input.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let text = match template.placement {
        Placement::Prefix => format!("{}{SEPARATOR}{input}", template.pattern),
        Placement::Postfix => format!("{input}{SEPARATOR}{}", template.pattern),
    };
    let mask_offset = text.find(MASK);
    debug_assert!(mask_offset.is_some());
    Ok(PromptedSequence {
        text,
        mask_offset,
        source_input: input.to_string(),
        template_id: template.id.clone(),
    })
}

pub fn fill_mask(seq: &PromptedSequence, word: &str) -> Result<PromptedSequence> {
    let offset = seq.mask_offset.ok_or(Error::NoMaskPresent)?;
    let mut text = String::with_capacity(seq.text.len() + word.len());
    text.push_str(&seq.text[..offset]);
    text.push_str(word);
    text.push_str(&seq.text[offset + MASK.len()..]);
    Ok(PromptedSequence {
        text,
        mask_offset: None,
        source_input: seq.source_input.clone(),
        template_id: seq.template_id.clone(),
    })
}

pub fn map_label_word<'v>(verbalizer: &'v Verbalizer, word: &str) -> Result<&'v str> {
    verbalizer.map_label_word(word)
}

/// Reads a line-delimited template pool file. Blank lines are skipped.
pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<Template>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_templates(&text, &path.display().to_string())
}

pub fn parse_templates(text: &str, origin: &str) -> Result<Vec<Template>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: Template = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !ids.insert(t.id.clone()) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("duplicate template id {:?}", t.id),
            });
        }
        out.push(t);
    }
    Ok(out)
}

pub fn templates_to_jsonl(templates: &[Template]) -> String {
    let mut s = String::new();
    for t in templates {
        s.push_str(&serde_json::to_string(t).expect("template serializes"));
        s.push('\n');
    }
    s
}
