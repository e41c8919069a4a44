//! SCFG rule extraction from aligned sentence pairs.
//!
//! For each alignment-consistent phrase pair the lexical rule is emitted;
//! subtracting one or two disjoint inner phrase pairs yields hierarchical
//! rules whose gaps become co-indexed nonterminals. Nonterminal labels are
//! read off the (optionally grafted) target tree: a constituent label where
//! one covers the span exactly, a CCG-style composite (`A+B`, `A/B`, `B\A`)
//! where two constituents explain it, and the fallback `X` otherwise. Hiero
//! mode labels everything `X`.
//!
//! Grammar files are ` ||| `-separated: `[LHS] ||| source ||| target |||
//! name=value ...`, with nonterminal occurrences written `[LABEL,k]`. The
//! characters `+ / \ , [ ]` are structural in labels; syntactic categories
//! containing them are unsupported.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::corpus::SentencePair;
use crate::treebank::{build_span_index, Span, Tree};

/// An alignment-consistent, tight phrase pair (boundary words aligned).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhrasePair {
    pub source: Span,
    pub target: Span,
}

/// Labeling regime for nonterminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LabelMode {
    /// Single generic nonterminal `X`.
    #[serde(rename = "hiero")]
    Hiero,
    /// Tree-derived labels with composite fallbacks.
    #[serde(rename = "samt")]
    Samt,
}

/// A nonterminal label. Composite forms record their parts so rendering and
/// parsing stay unambiguous given the reserved-character convention.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// A tree node label covers the span exactly.
    Constituent(String),
    /// Two adjacent constituents `A` then `B` cover it; rendered `A+B`.
    Concat(String, String),
    /// A constituent `A` starting at the span but extending right past it,
    /// missing a constituent `B` on the right; rendered `A/B`.
    MissingRight(String, String),
    /// A constituent `A` ending with the span but starting left of it,
    /// missing a constituent `B` on the left; rendered `B\A`.
    MissingLeft(String, String),
    /// No syntactic explanation; rendered `X`.
    Fallback,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Constituent(a) => f.write_str(a),
            Label::Concat(a, b) => write!(f, "{a}+{b}"),
            Label::MissingRight(a, b) => write!(f, "{a}/{b}"),
            Label::MissingLeft(a, b) => write!(f, "{b}\\{a}"),
            Label::Fallback => f.write_str("X"),
        }
    }
}

impl Label {
    /// Inverse of `Display`, keyed on the reserved characters.
    pub fn parse(s: &str) -> Label {
        if s == "X" {
            return Label::Fallback;
        }
        if let Some((b, a)) = s.split_once('\\') {
            return Label::MissingLeft(a.to_string(), b.to_string());
        }
        if let Some((a, b)) = s.split_once('/') {
            return Label::MissingRight(a.to_string(), b.to_string());
        }
        if let Some((a, b)) = s.split_once('+') {
            return Label::Concat(a.to_string(), b.to_string());
        }
        Label::Constituent(s.to_string())
    }
}

/// One symbol of a rule side. Nonterminal indices are 1-based co-indices
/// shared between the two sides.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    Terminal(String),
    Nonterminal { label: Label, index: usize },
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::Terminal(t) => f.write_str(t),
            Sym::Nonterminal { label, index } => write!(f, "[{label},{index}]"),
        }
    }
}

/// A synchronous rule without features. Instances carry an implicit count
/// of one; scoring aggregates them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScfgRule {
    pub lhs: Label,
    pub source: Vec<Sym>,
    pub target: Vec<Sym>,
}

impl ScfgRule {
    pub fn nonterminal_count(&self) -> usize {
        self.source.iter().filter(|s| matches!(s, Sym::Nonterminal { .. })).count()
    }

    pub fn source_terminal_count(&self) -> usize {
        self.source.iter().filter(|s| matches!(s, Sym::Terminal(_))).count()
    }

    pub fn target_terminal_count(&self) -> usize {
        self.target.iter().filter(|s| matches!(s, Sym::Terminal(_))).count()
    }

    fn side_to_string(side: &[Sym]) -> String {
        side.iter().map(Sym::to_string).collect::<Vec<_>>().join(" ")
    }

    pub fn source_string(&self) -> String {
        Self::side_to_string(&self.source)
    }

    pub fn target_string(&self) -> String {
        Self::side_to_string(&self.target)
    }
}

impl fmt::Display for ScfgRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ||| {} ||| {}", self.lhs, self.source_string(), self.target_string())
    }
}

pub const FEAT_P_TS: &str = "p_ts";
pub const FEAT_P_ST: &str = "p_st";
pub const FEAT_COUNT: &str = "count";
pub const FEAT_SRC_WORDS: &str = "src_words";
pub const FEAT_TGT_WORDS: &str = "tgt_words";

/// A deduplicated rule with named features.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRule {
    pub rule: ScfgRule,
    pub features: BTreeMap<String, f64>,
}

impl fmt::Display for ScoredRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |||", self.rule)?;
        for (name, value) in &self.features {
            write!(f, " {name}={value}")?;
        }
        Ok(())
    }
}

/// Extraction limits. `max_phrase_len` bounds initial phrase pairs on both
/// sides; `max_rule_symbols` bounds the source side of every emitted rule.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExtractionConfig {
    pub max_phrase_len: usize,
    pub max_rule_symbols: usize,
    pub max_nonterminals: usize,
    pub allow_adjacent_nts: bool,
    pub mode: LabelMode,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            max_phrase_len: 10,
            max_rule_symbols: 5,
            max_nonterminals: 2,
            allow_adjacent_nts: false,
            mode: LabelMode::Samt,
        }
    }
}

/// A scored grammar plus the configuration that produced it (absent for
/// grammars read back from disk).
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    pub rules: Vec<ScoredRule>,
    pub config: Option<ExtractionConfig>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("span {span} out of range for sentence of length {len}")]
    SpanOutOfRange { span: Span, len: usize },
}

/// All alignment-consistent tight phrase pairs with both sides at most
/// `max_len` tokens, sorted by (source, target) span.
///
/// Consistent: at least one link inside, and no link connects a word inside
/// either span to a word outside the other. Tight: all four boundary words
/// are aligned, so unaligned edge words are never absorbed.
pub fn extract_phrase_pairs(pair: &SentencePair, max_len: usize) -> Vec<PhrasePair> {
    let links: Vec<(usize, usize)> = pair.alignment.links().collect();
    if links.is_empty() {
        return Vec::new();
    }
    let n = pair.source.len();
    let mut src_aligned = vec![false; n];
    for &(i, _) in &links {
        src_aligned[i] = true;
    }

    let mut out = Vec::new();
    for s1 in 0..n {
        if !src_aligned[s1] {
            continue;
        }
        for s2 in s1 + 1..=(s1 + max_len).min(n) {
            if !src_aligned[s2 - 1] {
                continue;
            }
            // Project the source span onto the target side.
            let (mut t1, mut t2) = (usize::MAX, 0);
            for &(i, j) in &links {
                if s1 <= i && i < s2 {
                    t1 = t1.min(j);
                    t2 = t2.max(j + 1);
                }
            }
            if t1 == usize::MAX || t2 - t1 > max_len {
                continue;
            }
            // Reverse check: nothing in the target span links outside the
            // source span. Tightness of t1/t2 holds by construction.
            let consistent =
                links.iter().all(|&(i, j)| !(t1 <= j && j < t2) || (s1 <= i && i < s2));
            if consistent {
                out.push(PhrasePair { source: Span::new(s1, s2), target: Span::new(t1, t2) });
            }
        }
    }
    out.sort();
    out
}

/// Rendered label of the highest node covering each span of one tree.
#[derive(Debug, Clone)]
pub struct LabelIndex {
    len: usize,
    by_span: HashMap<Span, String>,
}

impl LabelIndex {
    pub fn sentence_len(&self) -> usize {
        self.len
    }

    fn get(&self, start: usize, end: usize) -> Option<&String> {
        self.by_span.get(&Span::new(start, end))
    }
}

pub fn build_label_index<L: fmt::Display>(tree: &Tree<L>) -> LabelIndex {
    let index = build_span_index(tree);
    let mut by_span = HashMap::new();
    // Preorder puts the highest node of each unary chain first; keep it.
    for (path, span) in index.nodes() {
        by_span
            .entry(*span)
            .or_insert_with(|| tree.node(path).expect("indexed path exists").label().to_string());
    }
    LabelIndex { len: index.sentence_len(), by_span }
}

/// Label a target span. Clauses are tried in order: exact constituent,
/// concatenation `A+B` (leftmost split), missing-right `A/B` (smallest
/// extension), missing-left `B\A` (smallest extension), fallback `X`.
/// Composite parts always use the highest node of their unary chain.
pub fn samt_label(index: &LabelIndex, span: Span, mode: LabelMode) -> Result<Label, ExtractError> {
    if !span.is_valid_for(index.len) {
        return Err(ExtractError::SpanOutOfRange { span, len: index.len });
    }
    if mode == LabelMode::Hiero {
        return Ok(Label::Fallback);
    }
    if let Some(a) = index.get(span.start, span.end) {
        return Ok(Label::Constituent(a.clone()));
    }
    for mid in span.start + 1..span.end {
        if let (Some(a), Some(b)) = (index.get(span.start, mid), index.get(mid, span.end)) {
            return Ok(Label::Concat(a.clone(), b.clone()));
        }
    }
    for end in span.end + 1..=index.len {
        if let (Some(a), Some(b)) = (index.get(span.start, end), index.get(span.end, end)) {
            return Ok(Label::MissingRight(a.clone(), b.clone()));
        }
    }
    for start in (0..span.start).rev() {
        if let (Some(a), Some(b)) = (index.get(start, span.end), index.get(start, span.start)) {
            return Ok(Label::MissingLeft(a.clone(), b.clone()));
        }
    }
    Ok(Label::Fallback)
}

/// Extract all rule instances from one sentence pair. Each instance counts
/// once; `score_grammar` aggregates across a corpus.
pub fn extract_rules(pair: &SentencePair, config: &ExtractionConfig) -> Vec<ScfgRule> {
    let phrases = extract_phrase_pairs(pair, config.max_phrase_len);
    let labels = build_label_index(&pair.target_tree);
    let mut label_cache: HashMap<Span, Label> = HashMap::new();
    let mut label_of = |span: Span| -> Label {
        label_cache
            .entry(span)
            .or_insert_with(|| {
                samt_label(&labels, span, config.mode).expect("phrase spans are in range")
            })
            .clone()
    };

    let mut rules = Vec::new();
    for outer in &phrases {
        let lhs = label_of(outer.target);

        if outer.source.len() <= config.max_rule_symbols {
            rules.push(build_rule(pair, outer, &[], lhs.clone(), &mut label_of));
        }
        if config.max_nonterminals == 0 {
            continue;
        }

        let inners: Vec<&PhrasePair> = phrases
            .iter()
            .filter(|p| outer.source.contains(p.source) && p.source != outer.source)
            .collect();
        for (ii, &a) in inners.iter().enumerate() {
            if let Some(rule) = hierarchical(pair, outer, &[a], config, lhs.clone(), &mut label_of)
            {
                rules.push(rule);
            }
            if config.max_nonterminals < 2 {
                continue;
            }
            for &b in &inners[ii + 1..] {
                let (first, second) =
                    if a.source.start <= b.source.start { (a, b) } else { (b, a) };
                if first.source.end > second.source.start {
                    continue; // overlapping gaps
                }
                if first.source.end == second.source.start && !config.allow_adjacent_nts {
                    continue;
                }
                if let Some(rule) =
                    hierarchical(pair, outer, &[first, second], config, lhs.clone(), &mut label_of)
                {
                    rules.push(rule);
                }
            }
        }
    }
    rules
}

fn hierarchical(
    pair: &SentencePair,
    outer: &PhrasePair,
    inners: &[&PhrasePair],
    config: &ExtractionConfig,
    lhs: Label,
    label_of: &mut impl FnMut(Span) -> Label,
) -> Option<ScfgRule> {
    let removed: usize = inners.iter().map(|p| p.source.len()).sum();
    let symbols = outer.source.len() - removed + inners.len();
    let terminals = outer.source.len() - removed;
    if symbols > config.max_rule_symbols || terminals == 0 {
        return None;
    }
    // Inner targets nest inside the outer target and never overlap each
    // other when their source spans are disjoint; both follow from
    // consistency of tight phrase pairs.
    debug_assert!(inners.iter().all(|p| outer.target.contains(p.target)));
    debug_assert!(inners.len() < 2 || !inners[0].target.overlaps(inners[1].target));
    Some(build_rule(pair, outer, inners, lhs, label_of))
}

/// Assemble a rule by walking both sides of the outer phrase, replacing
/// each inner phrase with a co-indexed nonterminal. Co-indices follow
/// source order.
fn build_rule(
    pair: &SentencePair,
    outer: &PhrasePair,
    inners: &[&PhrasePair],
    lhs: Label,
    label_of: &mut impl FnMut(Span) -> Label,
) -> ScfgRule {
    let nt_labels: Vec<Label> = inners.iter().map(|p| label_of(p.target)).collect();

    let mut source = Vec::new();
    let mut pos = outer.source.start;
    while pos < outer.source.end {
        if let Some(k) = inners.iter().position(|p| p.source.start == pos) {
            source.push(Sym::Nonterminal { label: nt_labels[k].clone(), index: k + 1 });
            pos = inners[k].source.end;
        } else {
            source.push(Sym::Terminal(pair.source[pos].clone()));
            pos += 1;
        }
    }

    let mut target = Vec::new();
    let mut pos = outer.target.start;
    while pos < outer.target.end {
        if let Some(k) = inners.iter().position(|p| p.target.start == pos) {
            target.push(Sym::Nonterminal { label: nt_labels[k].clone(), index: k + 1 });
            pos = inners[k].target.end;
        } else {
            target.push(Sym::Terminal(pair.target[pos].clone()));
            pos += 1;
        }
    }

    ScfgRule { lhs, source, target }
}

/// Aggregate rule instances into a scored grammar.
///
/// Features per deduplicated rule: `p_ts` = P(target, lhs | source), `p_st`
/// = P(source | target, lhs), `count` = instance count, and the two sides'
/// terminal counts. Rules are sorted by their rendered line.
pub fn score_grammar(
    instances: impl IntoIterator<Item = ScfgRule>,
    config: &ExtractionConfig,
) -> Grammar {
    let mut joint: BTreeMap<ScfgRule, usize> = BTreeMap::new();
    let mut by_source: HashMap<Vec<Sym>, usize> = HashMap::new();
    let mut by_target_lhs: HashMap<(Vec<Sym>, Label), usize> = HashMap::new();
    for rule in instances {
        *by_source.entry(rule.source.clone()).or_default() += 1;
        *by_target_lhs.entry((rule.target.clone(), rule.lhs.clone())).or_default() += 1;
        *joint.entry(rule).or_default() += 1;
    }

    let mut rules: Vec<ScoredRule> = joint
        .into_iter()
        .map(|(rule, count)| {
            let p_ts = count as f64 / by_source[&rule.source] as f64;
            let p_st =
                count as f64 / by_target_lhs[&(rule.target.clone(), rule.lhs.clone())] as f64;
            let features = BTreeMap::from([
                (FEAT_P_TS.to_string(), p_ts),
                (FEAT_P_ST.to_string(), p_st),
                (FEAT_COUNT.to_string(), count as f64),
                (FEAT_SRC_WORDS.to_string(), rule.source_terminal_count() as f64),
                (FEAT_TGT_WORDS.to_string(), rule.target_terminal_count() as f64),
            ]);
            ScoredRule { rule, features }
        })
        .collect();
    rules.sort_by_key(|r| r.to_string());
    Grammar { rules, config: Some(config.clone()) }
}

/// Render a grammar, one rule per line, sorted.
pub fn write_grammar(grammar: &Grammar) -> String {
    let mut out = String::new();
    for rule in &grammar.rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarParseError {
    #[error("line {line}: expected 4 ` ||| `-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: malformed LHS {value:?} (expected [LABEL])")]
    BadLhs { line: usize, value: String },
    #[error("line {line}: malformed nonterminal {value:?} (expected [LABEL,k])")]
    BadNonterminal { line: usize, value: String },
    #[error("line {line}: malformed feature {value:?} (expected name=value)")]
    BadFeature { line: usize, value: String },
}

fn parse_sym(token: &str, line: usize) -> Result<Sym, GrammarParseError> {
    if token.starts_with('[') && token.ends_with(']') {
        let inner = &token[1..token.len() - 1];
        let (label, index) = inner
            .rsplit_once(',')
            .ok_or_else(|| GrammarParseError::BadNonterminal { line, value: token.to_string() })?;
        let index: usize = index
            .parse()
            .map_err(|_| GrammarParseError::BadNonterminal { line, value: token.to_string() })?;
        Ok(Sym::Nonterminal { label: Label::parse(label), index })
    } else {
        Ok(Sym::Terminal(token.to_string()))
    }
}

/// Parse a grammar file written by `write_grammar`.
pub fn read_grammar(text: &str) -> Result<Grammar, GrammarParseError> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(" ||| ").collect();
        if fields.len() != 4 {
            return Err(GrammarParseError::FieldCount { line, found: fields.len() });
        }
        let lhs_text = fields[0].trim();
        if !lhs_text.starts_with('[') || !lhs_text.ends_with(']') {
            return Err(GrammarParseError::BadLhs { line, value: lhs_text.to_string() });
        }
        let lhs = Label::parse(&lhs_text[1..lhs_text.len() - 1]);
        let source = fields[1]
            .split_whitespace()
            .map(|t| parse_sym(t, line))
            .collect::<Result<Vec<_>, _>>()?;
        let target = fields[2]
            .split_whitespace()
            .map(|t| parse_sym(t, line))
            .collect::<Result<Vec<_>, _>>()?;
        let mut features = BTreeMap::new();
        for item in fields[3].split_whitespace() {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| GrammarParseError::BadFeature { line, value: item.to_string() })?;
            let value: f64 = value
                .parse()
                .map_err(|_| GrammarParseError::BadFeature { line, value: item.to_string() })?;
            features.insert(name.to_string(), value);
        }
        rules.push(ScoredRule { rule: ScfgRule { lhs, source, target }, features });
    }
    Ok(Grammar { rules, config: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_alignment, Alignment};
    use crate::treebank::parse_tree;
    use proptest::prelude::*;

    fn pair(src: &str, tgt: &str, align: &str, tree: &str) -> SentencePair {
        let source: Vec<String> = src.split_whitespace().map(str::to_string).collect();
        let target: Vec<String> = tgt.split_whitespace().map(str::to_string).collect();
        let alignment = parse_alignment(align, source.len(), target.len()).unwrap();
        let target_tree = parse_tree(tree).unwrap();
        assert_eq!(target_tree.yield_tokens().len(), target.len());
        SentencePair { id: 0, source, target, alignment, target_tree }
    }

    fn spans(pairs: &[PhrasePair]) -> Vec<((usize, usize), (usize, usize))> {
        pairs
            .iter()
            .map(|p| ((p.source.start, p.source.end), (p.target.start, p.target.end)))
            .collect()
    }

    /// The consistency predicate, stated directly: at least one link inside,
    /// no link crossing either boundary, all four boundary words aligned.
    fn consistent_tight(links: &Alignment, s: Span, t: Span) -> bool {
        let inside = |i: usize, sp: Span| sp.start <= i && i < sp.end;
        let any_inside = links.links().any(|(i, j)| inside(i, s) && inside(j, t));
        let no_crossing = links.links().all(|(i, j)| inside(i, s) == inside(j, t));
        let aligned_src = |i: usize| links.links().any(|(x, _)| x == i);
        let aligned_tgt = |j: usize| links.links().any(|(_, y)| y == j);
        any_inside
            && no_crossing
            && aligned_src(s.start)
            && aligned_src(s.end - 1)
            && aligned_tgt(t.start)
            && aligned_tgt(t.end - 1)
    }

    fn brute_force(pair: &SentencePair, max_len: usize) -> Vec<PhrasePair> {
        let mut out = Vec::new();
        for s1 in 0..pair.source.len() {
            for s2 in s1 + 1..=pair.source.len().min(s1 + max_len) {
                for t1 in 0..pair.target.len() {
                    for t2 in t1 + 1..=pair.target.len().min(t1 + max_len) {
                        let (s, t) = (Span::new(s1, s2), Span::new(t1, t2));
                        if consistent_tight(&pair.alignment, s, t) {
                            out.push(PhrasePair { source: s, target: t });
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn monotone_two_word_pair() {
        let p = pair("a b", "x y", "0-0 1-1", "(S (NP (NNP x)) (VP (VBZ y)))");
        let got = extract_phrase_pairs(&p, 10);
        assert_eq!(spans(&got), vec![((0, 1), (0, 1)), ((0, 2), (0, 2)), ((1, 2), (1, 2))]);
        assert_eq!(got, brute_force(&p, 10));
    }

    #[test]
    fn single_link_pair() {
        let p = pair("a", "x", "0-0", "(X (A x))");
        assert_eq!(spans(&extract_phrase_pairs(&p, 10)), vec![((0, 1), (0, 1))]);
    }

    #[test]
    fn crossing_links_swap_targets() {
        let p = pair("a b", "x y", "0-1 1-0", "(S (NP (NNP x)) (VP (VBZ y)))");
        let got = extract_phrase_pairs(&p, 10);
        assert_eq!(spans(&got), vec![((0, 1), (1, 2)), ((0, 2), (0, 2)), ((1, 2), (0, 1))]);
        assert_eq!(got, brute_force(&p, 10));
    }

    #[test]
    fn unaligned_boundary_words_are_not_absorbed() {
        // "b" and "y" are unaligned: no tight phrase may start or end there.
        let p = pair("a b c", "x y z", "0-0 2-2", "(S (A x) (B y) (C z))");
        let got = extract_phrase_pairs(&p, 10);
        assert_eq!(spans(&got), vec![((0, 1), (0, 1)), ((0, 3), (0, 3)), ((2, 3), (2, 3))]);
        assert_eq!(got, brute_force(&p, 10));
    }

    #[test]
    fn empty_alignment_yields_no_pairs() {
        let p = pair("a", "x", "", "(X (A x))");
        assert!(extract_phrase_pairs(&p, 10).is_empty());
    }

    #[test]
    fn max_len_applies_to_both_sides() {
        let p = pair("a b c", "x y z", "0-0 1-1 2-2", "(S (A x) (B y) (C z))");
        let got = extract_phrase_pairs(&p, 2);
        assert!(got.iter().all(|p| p.source.len() <= 2 && p.target.len() <= 2));
        assert_eq!(got, brute_force(&p, 2));
    }

    proptest! {
        /// Implementation vs predicate on random small alignments.
        #[test]
        fn matches_brute_force(
            n in 1usize..7,
            m in 1usize..7,
            seed_links in prop::collection::vec((0usize..6, 0usize..6), 0..10)
        ) {
            let links: Vec<(usize, usize)> =
                seed_links.into_iter().map(|(i, j)| (i % n, j % m)).collect();
            let source: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let target: Vec<String> = (0..m).map(|j| format!("t{j}")).collect();
            // Flat tree; phrase extraction ignores it.
            let leaves: String =
                target.iter().map(|t| format!(" (W {t})")).collect();
            let tree = parse_tree(&format!("(S{leaves})")).unwrap();
            let p = SentencePair {
                id: 0,
                source,
                target,
                alignment: Alignment::from_links(links),
                target_tree: tree,
            };
            prop_assert_eq!(extract_phrase_pairs(&p, 10), brute_force(&p, 10));
        }
    }

    const HE_EATS_FISH: &str = "(S (NP he) (VP (VBZ eats) (NP fish)))";

    fn label_at(tree: &str, start: usize, end: usize, mode: LabelMode) -> String {
        let idx = build_label_index(&parse_tree(tree).unwrap());
        samt_label(&idx, Span::new(start, end), mode).unwrap().to_string()
    }

    #[test]
    fn label_constituent_uses_highest_node() {
        let grafted = "(S (NP-GPE (NNP Lebanon)) (VP (VBZ stands)))";
        assert_eq!(label_at(grafted, 0, 1, LabelMode::Samt), "NP-GPE");
    }

    #[test]
    fn label_concat() {
        assert_eq!(label_at(HE_EATS_FISH, 0, 2, LabelMode::Samt), "NP+VBZ");
    }

    #[test]
    fn label_preterminal_beats_composites() {
        assert_eq!(label_at(HE_EATS_FISH, 1, 2, LabelMode::Samt), "VBZ");
    }

    #[test]
    fn label_missing_right() {
        // "a b c" has no covering node and no split into two constituents;
        // the S chain over [0,4) minus the trailing D explains it. The part
        // label comes from the top of the unary chain (S, not X).
        let tree = "(S (X (A a) (Y (B b) (C c) (D d))))";
        assert_eq!(label_at(tree, 0, 3, LabelMode::Samt), "S/D");
    }

    #[test]
    fn label_missing_left() {
        // Mirror image: "c d a" is S minus the leading P.
        let tree = "(S (X (Y (P b) (Q c) (R d)) (A a)))";
        assert_eq!(label_at(tree, 1, 4, LabelMode::Samt), "P\\S");
    }

    #[test]
    fn label_concat_beats_missing_right() {
        // "the cat of" splits as NP + IN, so no A/B label is considered.
        let tree = "(S (NP (NP (DT the) (NN cat)) (PP (IN of) (NP (NN town)))) (VP (VBZ sat)))";
        assert_eq!(label_at(tree, 0, 3, LabelMode::Samt), "NP+IN");
    }

    #[test]
    fn label_falls_back_to_x() {
        // "eats" .. beyond: [1,3) in he-eats-fish is VP; craft a crossing
        // span with no composite: in a flat 3-leaf tree any 2-span is a
        // concat, so nest one side.
        let tree = "(S (NP (DT a) (NN b)) (VP (VBZ c) (NP (DT d) (NN e))))";
        // [1,3) = "b c": concat NN+VBZ exists. [1,4): "b c d": no
        // constituent; concat at 2: NN+? [2,4) no; at 3: [1,3) no. A/B:
        // A=[1,e): none. B\A: A=[0,4)? none ([0,3)? no). Fallback.
        assert_eq!(label_at(tree, 1, 4, LabelMode::Samt), "X");
    }

    #[test]
    fn hiero_mode_is_always_x() {
        assert_eq!(label_at(HE_EATS_FISH, 0, 1, LabelMode::Hiero), "X");
        assert_eq!(label_at(HE_EATS_FISH, 0, 2, LabelMode::Hiero), "X");
    }

    #[test]
    fn label_rejects_out_of_range() {
        let idx = build_label_index(&parse_tree(HE_EATS_FISH).unwrap());
        assert!(samt_label(&idx, Span::new(0, 9), LabelMode::Samt).is_err());
        assert!(samt_label(&idx, Span::new(1, 1), LabelMode::Samt).is_err());
    }

    #[test]
    fn labels_render_and_parse_round_trip() {
        let labels = [
            Label::Constituent("NP-GPE".into()),
            Label::Concat("NP".into(), "VBZ".into()),
            Label::MissingRight("NP".into(), "NN".into()),
            Label::MissingLeft("S".into(), "DT".into()),
            Label::Fallback,
        ];
        let rendered: Vec<String> = labels.iter().map(Label::to_string).collect();
        assert_eq!(rendered, ["NP-GPE", "NP+VBZ", "NP/NN", "DT\\S", "X"]);
        for (label, text) in labels.iter().zip(&rendered) {
            assert_eq!(&Label::parse(text), label);
        }
    }

    fn two_word_pair() -> SentencePair {
        pair("a b", "x y", "0-0 1-1", "(S (NP (NNP x)) (VP (VBZ y)))")
    }

    #[test]
    fn rules_from_two_word_pair() {
        let rules = extract_rules(&two_word_pair(), &ExtractionConfig::default());
        let mut rendered: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
        rendered.sort();
        // Three lexical rules plus one subtraction each way; subtracting
        // both leaves no source terminal and is banned.
        assert_eq!(
            rendered,
            vec![
                "[NP] ||| a ||| x",
                "[S] ||| [NP,1] b ||| [NP,1] y",
                "[S] ||| a [VP,1] ||| x [VP,1]",
                "[S] ||| a b ||| x y",
                "[VP] ||| b ||| y",
            ]
        );
    }

    #[test]
    fn single_link_pair_yields_one_lexical_rule() {
        let p = pair("a", "x", "0-0", "(X (A x))");
        let rules = extract_rules(&p, &ExtractionConfig::default());
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].to_string(), "[X] ||| a ||| x");
        assert_eq!(rules[0].lhs, Label::Constituent("X".into()));
    }

    #[test]
    fn hiero_mode_same_shapes_different_labels() {
        let samt = extract_rules(&two_word_pair(), &ExtractionConfig::default());
        let hiero = extract_rules(
            &two_word_pair(),
            &ExtractionConfig { mode: LabelMode::Hiero, ..Default::default() },
        );
        assert_eq!(samt.len(), hiero.len());
        let shape = |r: &ScfgRule| {
            let erase = |side: &[Sym]| {
                side.iter()
                    .map(|s| match s {
                        Sym::Terminal(t) => t.clone(),
                        Sym::Nonterminal { index, .. } => format!("<{index}>"),
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            (erase(&r.source), erase(&r.target))
        };
        let mut samt_shapes: Vec<_> = samt.iter().map(shape).collect();
        let mut hiero_shapes: Vec<_> = hiero.iter().map(shape).collect();
        samt_shapes.sort();
        hiero_shapes.sort();
        assert_eq!(samt_shapes, hiero_shapes);
        assert!(hiero.iter().all(|r| r.lhs == Label::Fallback));
    }

    #[test]
    fn adjacent_source_nonterminals_banned_by_default() {
        let p = pair("a b c", "x y z", "0-0 1-1 2-2", "(S (A x) (B y) (C z))");
        let banned = extract_rules(&p, &ExtractionConfig::default());
        assert!(
            banned.iter().all(|r| !r.source_string().contains("] [")),
            "no adjacent source nonterminals"
        );
        let allowed =
            extract_rules(&p, &ExtractionConfig { allow_adjacent_nts: true, ..Default::default() });
        assert!(allowed.iter().any(|r| r.source_string().contains("] [")));
    }

    #[test]
    fn no_rule_without_source_terminal() {
        let p = pair("a b", "x y", "0-0 1-1", "(S (A x) (B y))");
        let rules =
            extract_rules(&p, &ExtractionConfig { allow_adjacent_nts: true, ..Default::default() });
        assert!(rules.iter().all(|r| r.source_terminal_count() >= 1));
    }

    #[test]
    fn max_rule_symbols_caps_source_side() {
        let p = pair(
            "a b c d e f",
            "u v w x y z",
            "0-0 1-1 2-2 3-3 4-4 5-5",
            "(S (A u) (B v) (C w) (D x) (E y) (F z))",
        );
        let rules = extract_rules(&p, &ExtractionConfig::default());
        assert!(rules.iter().all(|r| r.source.len() <= 5));
        // The 6-word lexical rule is excluded, but subtractions of it exist.
        assert!(rules.iter().any(|r| r.source.len() == 5));
    }

    #[test]
    fn reordering_rule_swaps_co_indices_on_target() {
        let p = pair("s o v", "s v o", "0-0 1-2 2-1", "(S (NP s) (VP (VBZ v) (NP o)))");
        let rules = extract_rules(&p, &ExtractionConfig::default());
        let rendered: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
        assert!(
            rendered.contains(&"[S] ||| [NP,1] o v ||| [NP,1] v o".to_string()),
            "subject gap: {rendered:?}"
        );
        assert!(
            rendered.contains(&"[S] ||| [NP,1] o [VBZ,2] ||| [NP,1] [VBZ,2] o".to_string()),
            "subject+verb gaps with target reordering: {rendered:?}"
        );
    }

    #[test]
    fn scoring_single_instance_is_certain() {
        let rules =
            extract_rules(&pair("a", "x", "0-0", "(X (A x))"), &ExtractionConfig::default());
        let grammar = score_grammar(rules, &ExtractionConfig::default());
        assert_eq!(grammar.rules.len(), 1);
        let f = &grammar.rules[0].features;
        assert_eq!(f[FEAT_P_TS], 1.0);
        assert_eq!(f[FEAT_P_ST], 1.0);
        assert_eq!(f[FEAT_COUNT], 1.0);
    }

    #[test]
    fn scoring_splits_three_to_one() {
        let mk = |tgt: &str| ScfgRule {
            lhs: Label::Fallback,
            source: vec![Sym::Terminal("s".into())],
            target: vec![Sym::Terminal(tgt.into())],
        };
        let instances = vec![mk("t1"), mk("t1"), mk("t1"), mk("t2")];
        let grammar = score_grammar(instances, &ExtractionConfig::default());
        let p: BTreeMap<String, f64> =
            grammar.rules.iter().map(|r| (r.rule.target_string(), r.features[FEAT_P_TS])).collect();
        assert_eq!(p["t1"], 0.75);
        assert_eq!(p["t2"], 0.25);
        // Per-source probabilities sum to one.
        assert!(
            (grammar.rules.iter().map(|r| r.features[FEAT_P_TS]).sum::<f64>() - 1.0).abs() < 1e-9
        );
    }

    #[test]
    fn grammar_line_golden() {
        let rules = extract_rules(
            &pair("a", "Lebanon", "0-0", "(NP-GPE (NNP Lebanon))"),
            &ExtractionConfig::default(),
        );
        let grammar = score_grammar(rules, &ExtractionConfig::default());
        assert_eq!(
            write_grammar(&grammar),
            "[NP-GPE] ||| a ||| Lebanon ||| count=1 p_st=1 p_ts=1 src_words=1 tgt_words=1\n"
        );
    }

    #[test]
    fn nonterminal_renders_with_co_index() {
        let sym = Sym::Nonterminal { label: Label::Constituent("NP-GPE".into()), index: 1 };
        assert_eq!(sym.to_string(), "[NP-GPE,1]");
    }

    #[test]
    fn grammar_round_trips() {
        let p = pair("s o v", "s v o", "0-0 1-2 2-1", "(S (NP s) (VP (VBZ v) (NP o)))");
        let grammar = score_grammar(
            extract_rules(&p, &ExtractionConfig::default()),
            &ExtractionConfig::default(),
        );
        let text = write_grammar(&grammar);
        let back = read_grammar(&text).unwrap();
        assert_eq!(back.rules, grammar.rules);
        assert_eq!(write_grammar(&back), text);
    }

    #[test]
    fn read_grammar_reports_line_numbers() {
        assert_eq!(
            read_grammar("[S] ||| a ||| x\n"),
            Err(GrammarParseError::FieldCount { line: 1, found: 3 })
        );
        assert!(matches!(
            read_grammar("S ||| a ||| x ||| count=1\n"),
            Err(GrammarParseError::BadLhs { line: 1, .. })
        ));
        assert!(matches!(
            read_grammar("[S] ||| [NP] ||| x ||| count=1\n"),
            Err(GrammarParseError::BadNonterminal { line: 1, .. })
        ));
        assert!(matches!(
            read_grammar("[S] ||| a ||| x ||| count\n"),
            Err(GrammarParseError::BadFeature { line: 1, .. })
        ));
    }

    proptest! {
        /// Every hierarchical rule can be re-substituted: assigning each of
        /// its gaps some extracted phrase pair with the same label rebuilds
        /// an extracted (hence consistent) phrase pair.
        #[test]
        fn substitution_closure(
            n in 2usize..6,
            perm_seed in 0usize..24,
        ) {
            // Permutation alignments: every word aligned once, so phrase
            // structure is rich but deterministic.
            let mut targets: Vec<usize> = (0..n).collect();
            // Cheap permutation from the seed.
            let mut s = perm_seed;
            for i in (1..n).rev() {
                targets.swap(i, s % (i + 1));
                s /= i + 1;
            }
            let links: Vec<(usize, usize)> = (0..n).map(|i| (i, targets[i])).collect();
            let source: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let target: Vec<String> = (0..n).map(|j| format!("t{j}")).collect();
            let leaves: String = target.iter().map(|t| format!(" (W {t})")).collect();
            let tree = parse_tree(&format!("(S{leaves})")).unwrap();
            let p = SentencePair {
                id: 0,
                source,
                target,
                alignment: Alignment::from_links(links),
                target_tree: tree,
            };
            let config = ExtractionConfig::default();
            let phrases = extract_phrase_pairs(&p, config.max_phrase_len);
            let labels = build_label_index(&p.target_tree);
            for rule in extract_rules(&p, &config) {
                if rule.nonterminal_count() == 0 {
                    continue;
                }
                // For this corpus construction the nested phrase pairs used
                // as gaps are themselves extracted; check each gap label
                // belongs to at least one extracted pair.
                for sym in &rule.source {
                    if let Sym::Nonterminal { label, .. } = sym {
                        let found = phrases.iter().any(|ph| {
                            samt_label(&labels, ph.target, config.mode).unwrap() == *label
                        });
                        prop_assert!(found, "gap label {label} has no matching phrase pair");
                    }
                }
            }
        }
    }
}
