//! Graft standoff semantic tags onto parse trees.
//!
//! Each tag's span is matched against the tree: an exact constituent match
//! relabels the highest node of the unary chain (`NP` gains a semantic part,
//! rendering as `NP-GPE`); a named-entity span covering a run of adjacent
//! daughters splits the rule by inserting a new `NP` node over the run; a
//! span crossing constituent boundaries is skipped. Tags are applied in
//! precedence order and the last tag to touch a node wins, which is how
//! precedence is realized.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::semtags::{
    sort_for_grafting, GraftOrder, SemanticTag, TagKind, MODALITY_LABELS, NE_LABELS,
};
use crate::treebank::{build_span_index, NodePath, Span, SpanIndex, Tree};

/// A node label split into its syntactic category and an optional grafted
/// semantic part. Kept structural during grafting so labels that already
/// contain `-` (e.g. `GPE-ite`, PTB function tags) stay unambiguous; the two
/// parts are joined with `-` only at serialization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraftedLabel {
    pub syntactic: String,
    pub semantic: Option<String>,
}

impl GraftedLabel {
    pub fn plain(syntactic: impl Into<String>) -> Self {
        GraftedLabel { syntactic: syntactic.into(), semantic: None }
    }

    /// Parse a rendered label, splitting off a trailing inventory tag so a
    /// previously grafted tree lifts back to the same structure: `NP-GPE`
    /// becomes syntactic `NP` with semantic `GPE`. Suffixes outside the tag
    /// inventories (`PP-TMP`, `GPE-ite` as a whole label) stay syntactic.
    pub fn from_rendered(label: &str) -> Self {
        let tags = NE_LABELS.iter().chain(MODALITY_LABELS.iter());
        for tag in tags {
            if let Some(head) = label.strip_suffix(tag).and_then(|h| h.strip_suffix('-')) {
                if !head.is_empty() {
                    return GraftedLabel {
                        syntactic: head.to_string(),
                        semantic: Some((*tag).to_string()),
                    };
                }
            }
        }
        GraftedLabel::plain(label)
    }

    pub fn rendered(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GraftedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.semantic {
            None => f.write_str(&self.syntactic),
            Some(sem) => write!(f, "{}-{}", self.syntactic, sem),
        }
    }
}

/// A tree ready for grafting. Plain parse trees are lifted with [`lift`].
pub type GraftedTree = Tree<GraftedLabel>;

/// Lift a parsed tree for grafting. Labels already carrying an inventory tag
/// suffix are treated as previously grafted, so grafting is idempotent
/// through a render/parse round trip.
pub fn lift(tree: Tree<String>) -> GraftedTree {
    tree.map_labels(&|l: String| GraftedLabel::from_rendered(&l))
}

/// How a tag span relates to the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchCase {
    /// Some constituent covers exactly this span; the path is the highest
    /// node of the unary chain.
    Exact(NodePath),
    /// The span equals the union of a contiguous proper run of one node's
    /// children (half-open child index range).
    AdjacentDaughters { parent: NodePath, children: Range<usize> },
    /// The span straddles constituent boundaries.
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraftCase {
    ExactGraft,
    SplitInsert,
    Overlay,
    CrossingSkipped,
    NoNodeSkipped,
}

/// What one graft attempt did. Skips carry no path and leave the tree
/// unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraftOutcome {
    pub case: GraftCase,
    pub path: Option<NodePath>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraftError {
    #[error("tag span {span} invalid for sentence of length {len}")]
    SpanOutOfRange { span: Span, len: usize },
    #[error("tag refers to sentence {sentence_id} but the tree file has only {tree_count} lines")]
    TagSentenceOutOfRange { sentence_id: usize, tree_count: usize },
}

/// Classify a tag span against an already-built index.
pub fn classify_match_indexed(index: &SpanIndex, span: Span) -> Result<MatchCase, GraftError> {
    if !span.is_valid_for(index.sentence_len()) {
        return Err(GraftError::SpanOutOfRange { span, len: index.sentence_len() });
    }
    if let Some(path) = index.highest_at(span) {
        return Ok(MatchCase::Exact(path.clone()));
    }
    // At most one node can own a matching child run: a run equal to all
    // children would be an exact match on the node itself, and child spans
    // partition each node, so runs from distinct nodes cannot both equal
    // the span.
    for (path, node_span) in index.nodes() {
        if !node_span.contains(span) {
            continue;
        }
        let kids = index.child_spans(path);
        let first = kids.iter().position(|k| k.start == span.start);
        let last = kids.iter().position(|k| k.end == span.end);
        if let (Some(a), Some(b)) = (first, last) {
            if a <= b {
                debug_assert!(kids.len() > b - a + 1, "full runs are exact matches");
                return Ok(MatchCase::AdjacentDaughters {
                    parent: path.clone(),
                    children: a..b + 1,
                });
            }
        }
    }
    Ok(MatchCase::Crossing)
}

/// Classify a tag span against a tree.
pub fn classify_match<L>(tree: &Tree<L>, span: Span) -> Result<MatchCase, GraftError> {
    classify_match_indexed(&build_span_index(tree), span)
}

/// Apply one tag. Exact matches relabel (overlaying any earlier semantic
/// part); named-entity tags over adjacent daughters insert an `NP` node over
/// the run; modality tags in that position are skipped, as are crossing
/// spans.
pub fn graft_one(
    tree: &GraftedTree,
    tag: &SemanticTag,
) -> Result<(GraftedTree, GraftOutcome), GraftError> {
    let index = build_span_index(tree);
    let mut out = tree.clone();
    let outcome = graft_one_in_place(&mut out, &index, tag)?;
    Ok((out, outcome))
}

fn graft_one_in_place(
    tree: &mut GraftedTree,
    index: &SpanIndex,
    tag: &SemanticTag,
) -> Result<GraftOutcome, GraftError> {
    match classify_match_indexed(index, tag.span)? {
        MatchCase::Exact(path) => {
            let node = tree.node_mut(&path).expect("index path exists in tree");
            let label = node.label_mut();
            let case =
                if label.semantic.is_some() { GraftCase::Overlay } else { GraftCase::ExactGraft };
            label.semantic = Some(tag.label.clone());
            Ok(GraftOutcome { case, path: Some(path) })
        }
        MatchCase::AdjacentDaughters { parent, children } => {
            if tag.kind != TagKind::NamedEntity {
                return Ok(GraftOutcome { case: GraftCase::NoNodeSkipped, path: None });
            }
            let node = tree.node_mut(&parent).expect("index path exists in tree");
            let Tree::Internal { children: kids, .. } = node else {
                unreachable!("adjacent-daughter parents are internal")
            };
            let run: Vec<GraftedTree> = kids.drain(children.clone()).collect();
            kids.insert(
                children.start,
                Tree::Internal {
                    label: GraftedLabel {
                        syntactic: "NP".to_string(),
                        semantic: Some(tag.label.clone()),
                    },
                    children: run,
                },
            );
            let mut path = parent;
            path.push(children.start);
            Ok(GraftOutcome { case: GraftCase::SplitInsert, path: Some(path) })
        }
        MatchCase::Crossing => Ok(GraftOutcome { case: GraftCase::CrossingSkipped, path: None }),
    }
}

/// Per-case tallies. Every input tag lands in exactly one bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct GraftCounts {
    pub exact: usize,
    pub split: usize,
    pub overlay: usize,
    pub crossing: usize,
    pub no_node: usize,
    /// Tags whose span is zero-width, reversed, or past the sentence end.
    pub invalid: usize,
    /// Tags on sentences that have no parse.
    pub no_parse: usize,
}

impl GraftCounts {
    pub fn total(&self) -> usize {
        self.exact
            + self.split
            + self.overlay
            + self.crossing
            + self.no_node
            + self.invalid
            + self.no_parse
    }

    pub fn merge(&mut self, other: &GraftCounts) {
        self.exact += other.exact;
        self.split += other.split;
        self.overlay += other.overlay;
        self.crossing += other.crossing;
        self.no_node += other.no_node;
        self.invalid += other.invalid;
        self.no_parse += other.no_parse;
    }

    fn record(&mut self, case: GraftCase) {
        match case {
            GraftCase::ExactGraft => self.exact += 1,
            GraftCase::SplitInsert => self.split += 1,
            GraftCase::Overlay => self.overlay += 1,
            GraftCase::CrossingSkipped => self.crossing += 1,
            GraftCase::NoNodeSkipped => self.no_node += 1,
        }
    }
}

/// Corpus-level report: per-sentence tallies (sentences that had tags) plus
/// totals.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct GraftReport {
    pub per_sentence: BTreeMap<usize, GraftCounts>,
    pub totals: GraftCounts,
}

impl GraftReport {
    /// The `case TAB count` form used for report files.
    pub fn to_tsv(&self) -> String {
        let t = &self.totals;
        format!(
            "exact_graft\t{}\nsplit_insert\t{}\noverlay\t{}\ncrossing_skipped\t{}\n\
             no_node_skipped\t{}\ninvalid_span\t{}\nno_parse\t{}\n",
            t.exact, t.split, t.overlay, t.crossing, t.no_node, t.invalid, t.no_parse
        )
    }
}

/// Graft all of one sentence's tags. Tags are sorted into precedence order
/// first; spans are validated here, and invalid ones are counted and
/// skipped. The span index is rebuilt after each insertion (insertions never
/// change the yield, so later spans stay valid).
pub fn graft_sentence(
    tree: &GraftedTree,
    tags: &[SemanticTag],
    order: GraftOrder,
) -> (GraftedTree, GraftCounts) {
    let mut sorted = tags.to_vec();
    sort_for_grafting(&mut sorted, order);

    let mut out = tree.clone();
    let mut counts = GraftCounts::default();
    let mut index = build_span_index(&out);
    for tag in &sorted {
        if !tag.span.is_valid_for(index.sentence_len()) {
            counts.invalid += 1;
            continue;
        }
        let outcome =
            graft_one_in_place(&mut out, &index, tag).expect("span validated against this index");
        counts.record(outcome.case);
        if outcome.case == GraftCase::SplitInsert {
            index = build_span_index(&out);
        }
    }
    (out, counts)
}

/// Graft a whole corpus: `trees[i]` gets the tags filed under sentence id
/// `i`. Sentences without a parse pass through as `None` and their tags are
/// counted `no_parse`. Tags pointing past the last tree line are an error,
/// since that means the two files disagree about the corpus.
pub fn graft_corpus(
    trees: &[Option<Tree<String>>],
    tags: &BTreeMap<usize, Vec<SemanticTag>>,
    order: GraftOrder,
) -> Result<(Vec<Option<GraftedTree>>, GraftReport), GraftError> {
    if let Some((&sentence_id, _)) = tags.iter().next_back() {
        if sentence_id >= trees.len() {
            return Err(GraftError::TagSentenceOutOfRange { sentence_id, tree_count: trees.len() });
        }
    }

    static NO_TAGS: Vec<SemanticTag> = Vec::new();
    let grafted: Vec<(Option<GraftedTree>, GraftCounts)> = trees
        .par_iter()
        .enumerate()
        .map(|(i, tree)| {
            let sentence_tags = tags.get(&i).unwrap_or(&NO_TAGS);
            match tree {
                None => {
                    let counts =
                        GraftCounts { no_parse: sentence_tags.len(), ..GraftCounts::default() };
                    (None, counts)
                }
                Some(tree) => {
                    let (out, counts) = graft_sentence(&lift(tree.clone()), sentence_tags, order);
                    (Some(out), counts)
                }
            }
        })
        .collect();

    let mut report = GraftReport::default();
    let mut out = Vec::with_capacity(grafted.len());
    for (i, (tree, counts)) in grafted.into_iter().enumerate() {
        if counts.total() > 0 {
            report.per_sentence.insert(i, counts);
        }
        report.totals.merge(&counts);
        out.push(tree);
    }
    Ok((out, report))
}
