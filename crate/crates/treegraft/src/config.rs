//! Run configuration: a flat `key = value` file where every key is also a
//! command-line flag (dashes and underscores are interchangeable). Flags
//! override file values; file values override defaults.

use std::path::PathBuf;

use thiserror::Error;

use crate::decode::{DecoderConfig, WeightVector};
use crate::extract::{ExtractionConfig, LabelMode};
use crate::semtags::GraftOrder;

/// The three labeling regimes of the pipeline. `hiero` and `samt` read the
/// parse trees as given; `samt+sem` grafts semantic tags first so labels
/// like `NP-GPE` reach the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum PipelineMode {
    #[serde(rename = "hiero")]
    Hiero,
    #[serde(rename = "samt")]
    Samt,
    #[serde(rename = "samt+sem")]
    SamtSem,
}

impl PipelineMode {
    pub fn parse(s: &str) -> Option<PipelineMode> {
        match s {
            "hiero" => Some(PipelineMode::Hiero),
            "samt" => Some(PipelineMode::Samt),
            "samt+sem" => Some(PipelineMode::SamtSem),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::Hiero => "hiero",
            PipelineMode::Samt => "samt",
            PipelineMode::SamtSem => "samt+sem",
        }
    }

    pub fn label_mode(self) -> LabelMode {
        match self {
            PipelineMode::Hiero => LabelMode::Hiero,
            PipelineMode::Samt | PipelineMode::SamtSem => LabelMode::Samt,
        }
    }

    /// Whether this mode grafts standoff tags before extraction.
    pub fn uses_tags(self) -> bool {
        self == PipelineMode::SamtSem
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PipelineConfig {
    // Input paths.
    pub trees: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub align: Option<PathBuf>,
    /// Sentences to decode, one per line.
    pub input: Option<PathBuf>,
    /// Parallel reference files for BLEU.
    pub refs: Vec<PathBuf>,
    /// Hypothesis file for the standalone `bleu` subcommand.
    pub hyp: Option<PathBuf>,
    /// Grammar file: output of `extract`, input of `decode`.
    pub grammar: Option<PathBuf>,
    /// Directory all artifacts are written into.
    pub out_dir: PathBuf,

    pub mode: PipelineMode,
    pub precedence: GraftOrder,
    pub allow_extra_labels: bool,

    pub max_phrase_len: usize,
    pub max_rule_symbols: usize,
    pub max_nonterminals: usize,
    pub allow_adjacent_nts: bool,

    pub k: usize,
    pub weights: WeightVector,
    pub goal_label: String,
    pub glue_penalty: f64,
    pub oov_penalty: f64,

    pub lowercase: bool,
    /// Worker thread cap; `None` lets the runtime decide.
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let extraction = ExtractionConfig::default();
        let decoder = DecoderConfig::default();
        PipelineConfig {
            trees: None,
            tags: None,
            source: None,
            target: None,
            align: None,
            input: None,
            refs: Vec::new(),
            hyp: None,
            grammar: None,
            out_dir: PathBuf::from("treegraft-out"),
            mode: PipelineMode::Samt,
            precedence: GraftOrder::default(),
            allow_extra_labels: false,
            max_phrase_len: extraction.max_phrase_len,
            max_rule_symbols: extraction.max_rule_symbols,
            max_nonterminals: extraction.max_nonterminals,
            allow_adjacent_nts: extraction.allow_adjacent_nts,
            k: decoder.k,
            weights: WeightVector::default(),
            goal_label: decoder.goal_label,
            glue_penalty: decoder.glue_penalty,
            oov_penalty: decoder.oov_penalty,
            lowercase: false,
            jobs: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: bad value {value:?} for {key}: {reason}")]
    BadValue { line: usize, key: String, value: String, reason: String },
    #[error("mode samt+sem requires a standoff tag file (--tags)")]
    TagsRequired,
    #[error("{key} must be positive")]
    NonPositiveLimit { key: &'static str },
    #[error("max-nonterminals above 2 is unsupported")]
    TooManyNonterminals,
}

fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

impl PipelineConfig {
    /// Apply a config file on top of the current values. Keys use the flag
    /// names; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            self.apply_key(&key, value).map_err(|reason| match reason {
                KeyError::Unknown => ConfigError::UnknownKey { line, key },
                KeyError::Bad(reason) => {
                    ConfigError::BadValue { line, key, value: value.to_string(), reason }
                }
            })?;
        }
        Ok(())
    }

    fn apply_key(&mut self, key: &str, value: &str) -> Result<(), KeyError> {
        let bad = |reason: &str| KeyError::Bad(reason.to_string());
        match key {
            "trees" => self.trees = Some(PathBuf::from(value)),
            "tags" => self.tags = Some(PathBuf::from(value)),
            "source" => self.source = Some(PathBuf::from(value)),
            "target" => self.target = Some(PathBuf::from(value)),
            "align" => self.align = Some(PathBuf::from(value)),
            "input" => self.input = Some(PathBuf::from(value)),
            "refs" => {
                self.refs = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(PathBuf::from)
                    .collect();
            }
            "hyp" => self.hyp = Some(PathBuf::from(value)),
            "grammar" => self.grammar = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "mode" => {
                self.mode = PipelineMode::parse(value)
                    .ok_or_else(|| bad("expected hiero, samt, or samt+sem"))?;
            }
            "precedence" => {
                self.precedence = match value {
                    "ne-first" => GraftOrder::NamedEntitiesFirst,
                    "modality-first" => GraftOrder::ModalitiesFirst,
                    _ => return Err(bad("expected ne-first or modality-first")),
                };
            }
            "allow_extra_labels" => {
                self.allow_extra_labels =
                    parse_bool(value).ok_or_else(|| bad("expected a boolean"))?;
            }
            "max_phrase_len" => {
                self.max_phrase_len = value.parse().map_err(|_| bad("expected an integer"))?;
            }
            "max_rule_symbols" => {
                self.max_rule_symbols = value.parse().map_err(|_| bad("expected an integer"))?;
            }
            "max_nonterminals" => {
                self.max_nonterminals = value.parse().map_err(|_| bad("expected an integer"))?;
            }
            "allow_adjacent_nts" => {
                self.allow_adjacent_nts =
                    parse_bool(value).ok_or_else(|| bad("expected a boolean"))?;
            }
            "k" => self.k = value.parse().map_err(|_| bad("expected an integer"))?,
            "weights" => {
                self.weights = WeightVector::parse(value).map_err(|e| bad(&e.to_string()))?;
            }
            "goal_label" => self.goal_label = value.to_string(),
            "glue_penalty" => {
                self.glue_penalty = value.parse().map_err(|_| bad("expected a number"))?;
            }
            "oov_penalty" => {
                self.oov_penalty = value.parse().map_err(|_| bad("expected a number"))?;
            }
            "lowercase" => {
                self.lowercase = parse_bool(value).ok_or_else(|| bad("expected a boolean"))?;
            }
            "jobs" => {
                self.jobs = Some(value.parse().map_err(|_| bad("expected an integer"))?);
            }
            _ => return Err(KeyError::Unknown),
        }
        Ok(())
    }

    /// Cross-field checks shared by all subcommands.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mode.uses_tags() && self.tags.is_none() {
            return Err(ConfigError::TagsRequired);
        }
        for (key, value) in [
            ("max-phrase-len", self.max_phrase_len),
            ("max-rule-symbols", self.max_rule_symbols),
            ("max-nonterminals", self.max_nonterminals),
            ("k", self.k),
        ] {
            if value == 0 {
                return Err(ConfigError::NonPositiveLimit { key });
            }
        }
        if self.max_nonterminals > 2 {
            return Err(ConfigError::TooManyNonterminals);
        }
        Ok(())
    }

    pub fn extraction_config(&self) -> ExtractionConfig {
        ExtractionConfig {
            max_phrase_len: self.max_phrase_len,
            max_rule_symbols: self.max_rule_symbols,
            max_nonterminals: self.max_nonterminals,
            allow_adjacent_nts: self.allow_adjacent_nts,
            mode: self.mode.label_mode(),
        }
    }

    pub fn decoder_config(&self) -> DecoderConfig {
        DecoderConfig {
            k: self.k,
            goal_label: self.goal_label.clone(),
            glue_penalty: self.glue_penalty,
            oov_penalty: self.oov_penalty,
        }
    }
}

enum KeyError {
    Unknown,
    Bad(String),
}
