//! Standoff semantic tags and the precedence order that decides how they are
//! grafted.
//!
//! Tag files are tab-separated with one tag per line:
//!
//! ```text
//! sentence_id <TAB> start <TAB> end <TAB> kind <TAB> label
//! ```
//!
//! `kind` is `NE`, `TRIG`, or `TARG`; spans are half-open token offsets into
//! the target sentence; `#` starts a comment line. Labels must come from the
//! built-in inventories unless extra labels are explicitly allowed.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::treebank::Span;

/// Named-entity labels. Named entities have no precedence among themselves.
pub const NE_LABELS: [&str; 13] = [
    "AGE",
    "DATE",
    "FACILITY",
    "GPE",
    "GPE-ite",
    "LOCATION",
    "MONEY",
    "OCCUPATION",
    "ORGANIZATION",
    "ORGANIZATION-ite",
    "PERCENT",
    "PERSON",
    "TIME",
];

/// Modality labels ordered most specific first. `specificity_rank` inverts
/// this so that Require ranks highest and Negation lowest; less specific
/// tags are grafted earlier so more specific ones can overwrite them.
pub const MODALITY_LABELS: [&str; 27] = [
    "Require",
    "NOTPermit",
    "Permit",
    "NOTRequire",
    "Succeed",
    "NOTSucceed",
    "SucceedNegation",
    "NOTSucceedNegation",
    "Effort",
    "NOTEffort",
    "EffortNegation",
    "NOTEffortNegation",
    "Intend",
    "NOTIntend",
    "IntendNegation",
    "NOTIntendNegation",
    "Able",
    "NOTAble",
    "AbleNegation",
    "NOTAbleNegation",
    "Want",
    "NOTWant",
    "Belief",
    "NOTBelief",
    "Firm_Belief",
    "NOTFirm_Belief",
    "Negation",
];

pub fn is_ne_label(label: &str) -> bool {
    NE_LABELS.contains(&label)
}

pub fn is_modality_label(label: &str) -> bool {
    MODALITY_LABELS.contains(&label)
}

/// Rank of a modality label: Require 27 down to Negation 1. Labels outside
/// the inventory (admitted via `allow_extra_labels`) rank 0, below Negation.
pub fn specificity_rank(label: &str) -> u8 {
    match MODALITY_LABELS.iter().position(|&l| l == label) {
        Some(i) => (MODALITY_LABELS.len() - i) as u8,
        None => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TagKind {
    NamedEntity,
    ModalityTrigger,
    ModalityTarget,
}

impl TagKind {
    pub fn parse(s: &str) -> Option<TagKind> {
        match s {
            "NE" => Some(TagKind::NamedEntity),
            "TRIG" => Some(TagKind::ModalityTrigger),
            "TARG" => Some(TagKind::ModalityTarget),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TagKind::NamedEntity => "NE",
            TagKind::ModalityTrigger => "TRIG",
            TagKind::ModalityTarget => "TARG",
        }
    }
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One standoff tag. The span is target-side and validated at graft time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticTag {
    pub sentence_id: usize,
    pub span: Span,
    pub kind: TagKind,
    pub label: String,
}

/// Which tag family is grafted first. Later grafts overwrite earlier ones on
/// a contested node, so the first phase is the one that loses ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum GraftOrder {
    /// Named entities, then modality triggers, then modality targets.
    #[default]
    #[serde(rename = "ne-first")]
    NamedEntitiesFirst,
    /// Modality triggers, then targets, then named entities.
    #[serde(rename = "modality-first")]
    ModalitiesFirst,
}

/// Sort key for graft order: ascending `(phase, specificity)`. Tags applied
/// later overwrite earlier ones, so the highest key wins contested nodes.
/// Within a phase, named entities all share specificity 0; modality tags use
/// `specificity_rank`, so Negation is applied first and Require last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrecedenceKey {
    pub phase: u8,
    pub specificity: u8,
}

pub fn precedence_key_with_order(tag: &SemanticTag, order: GraftOrder) -> PrecedenceKey {
    let phase = match (order, tag.kind) {
        (GraftOrder::NamedEntitiesFirst, TagKind::NamedEntity) => 0,
        (GraftOrder::NamedEntitiesFirst, TagKind::ModalityTrigger) => 1,
        (GraftOrder::NamedEntitiesFirst, TagKind::ModalityTarget) => 2,
        (GraftOrder::ModalitiesFirst, TagKind::ModalityTrigger) => 0,
        (GraftOrder::ModalitiesFirst, TagKind::ModalityTarget) => 1,
        (GraftOrder::ModalitiesFirst, TagKind::NamedEntity) => 2,
    };
    let specificity = match tag.kind {
        TagKind::NamedEntity => 0,
        _ => specificity_rank(&tag.label),
    };
    PrecedenceKey { phase, specificity }
}

pub fn precedence_key(tag: &SemanticTag) -> PrecedenceKey {
    precedence_key_with_order(tag, GraftOrder::default())
}

/// Sort into application order. The precedence key decides who wins a
/// contested node (the later of two tags overwrites the earlier); ties are
/// broken by label and then span so the result is a function of the tag set
/// rather than of file order, making grafting permutation-insensitive.
pub fn sort_for_grafting(tags: &mut [SemanticTag], order: GraftOrder) {
    tags.sort_by(|a, b| {
        precedence_key_with_order(a, order)
            .cmp(&precedence_key_with_order(b, order))
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| (a.span.start, a.span.end).cmp(&(b.span.start, b.span.end)))
    });
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StandoffError {
    #[error("line {line}: expected 5 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid {field}: {value:?}")]
    InvalidField { line: usize, field: &'static str, value: String },
    #[error("line {line}: unknown tag kind {value:?} (expected NE, TRIG, or TARG)")]
    UnknownKind { line: usize, value: String },
    #[error("line {line}: unknown {kind} label {label:?}; pass --allow-extra-labels to accept it")]
    UnknownLabel { line: usize, kind: TagKind, label: String },
}

/// Parse a standoff tag file, grouping tags by sentence id in file order.
/// Spans are not validated against sentence length here; the grafter does
/// that once it can see the trees.
pub fn parse_standoff(
    text: &str,
    allow_extra_labels: bool,
) -> Result<BTreeMap<usize, Vec<SemanticTag>>, StandoffError> {
    let mut by_sentence: BTreeMap<usize, Vec<SemanticTag>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 5 {
            return Err(StandoffError::FieldCount { line, found: fields.len() });
        }
        let num = |field: &'static str, value: &str| {
            value.trim().parse::<usize>().map_err(|_| StandoffError::InvalidField {
                line,
                field,
                value: value.to_string(),
            })
        };
        let sentence_id = num("sentence id", fields[0])?;
        let start = num("span start", fields[1])?;
        let end = num("span end", fields[2])?;
        let kind = TagKind::parse(fields[3].trim())
            .ok_or_else(|| StandoffError::UnknownKind { line, value: fields[3].to_string() })?;
        let label = fields[4].trim().to_string();
        if label.is_empty() {
            return Err(StandoffError::InvalidField { line, field: "label", value: label });
        }
        let known = match kind {
            TagKind::NamedEntity => is_ne_label(&label),
            TagKind::ModalityTrigger | TagKind::ModalityTarget => is_modality_label(&label),
        };
        if !known && !allow_extra_labels {
            return Err(StandoffError::UnknownLabel { line, kind, label });
        }
        by_sentence.entry(sentence_id).or_default().push(SemanticTag {
            sentence_id,
            span: Span::new(start, end),
            kind,
            label,
        });
    }
    Ok(by_sentence)
}
