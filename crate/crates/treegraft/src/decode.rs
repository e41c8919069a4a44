//! CKY chart decoding over a synchronous grammar.
//!
//! Cells are keyed by (source span, label) and hold k-best derivation
//! lists. Spans are processed by increasing width; a rule's source side
//! must have two or more symbols or be a single terminal, so child spans
//! are always strictly narrower and the pass terminates. Glue rules
//! `[GOAL] -> item` and `[GOAL] -> [GOAL] item` concatenate adjacent
//! derivations monotonically, accepting any item label at a per-use
//! penalty, so full coverage never depends on the label inventory.
//!
//! Scoring is log-linear: features named `p_*` are probabilities and enter
//! as weight * ln(value); all other features enter linearly; the word
//! penalty multiplies the target terminal count. There is no language
//! model. Out-of-vocabulary tokens (never a source terminal in the
//! grammar) get a pass-through rule `[X] -> w / w` at a fixed penalty.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::extract::{Grammar, Label, ScfgRule, Sym, FEAT_P_ST, FEAT_P_TS};
use crate::treebank::Span;

/// Log-linear weights. Features with no weight score zero, and weights for
/// features a rule lacks score zero; the word penalty applies per target
/// terminal.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeightVector {
    pub feature_weights: BTreeMap<String, f64>,
    pub word_penalty: f64,
}

impl Default for WeightVector {
    /// Uniform weights over the two translation probabilities.
    fn default() -> Self {
        WeightVector {
            feature_weights: BTreeMap::from([
                (FEAT_P_TS.to_string(), 1.0),
                (FEAT_P_ST.to_string(), 1.0),
            ]),
            word_penalty: 0.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightParseError {
    #[error("malformed weight {entry:?} (expected name=value)")]
    Malformed { entry: String },
    #[error("weight {name} is not finite")]
    NotFinite { name: String },
}

impl WeightVector {
    /// Parse `name=value` pairs separated by commas, e.g.
    /// `p_ts=1,p_st=0.5,word_penalty=-0.1`. The special name
    /// `word_penalty` sets the per-word term; repeated names keep the last
    /// value. An empty string means all-zero weights.
    pub fn parse(text: &str) -> Result<WeightVector, WeightParseError> {
        let mut weights = WeightVector { feature_weights: BTreeMap::new(), word_penalty: 0.0 };
        for entry in text.split(',') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (name, value) = entry
                .split_once('=')
                .ok_or_else(|| WeightParseError::Malformed { entry: entry.to_string() })?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| WeightParseError::Malformed { entry: entry.to_string() })?;
            if !value.is_finite() {
                return Err(WeightParseError::NotFinite { name: name.trim().to_string() });
            }
            if name.trim() == "word_penalty" {
                weights.word_penalty = value;
            } else {
                weights.feature_weights.insert(name.trim().to_string(), value);
            }
        }
        Ok(weights)
    }
}

/// Where a rule came from; glue and pass-through rules are synthesized by
/// the decoder and carry a direct penalty instead of features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Grammar,
    Glue,
    OovPassThrough,
}

/// A rule prepared for decoding: its features, any direct penalty, and the
/// precomputed per-application score contribution under the decoder's
/// weights (weighted features + penalty + word penalty * target terminals).
#[derive(Debug)]
pub struct DecodedRule {
    pub rule: ScfgRule,
    pub features: BTreeMap<String, f64>,
    pub penalty: f64,
    pub kind: RuleKind,
    contribution: f64,
}

/// One rule application with children bound by co-index: `children[k - 1]`
/// substitutes for the nonterminal with index `k`.
#[derive(Debug)]
pub struct Derivation {
    pub rule: Arc<DecodedRule>,
    pub children: Vec<Arc<Derivation>>,
    pub score: f64,
}

impl Derivation {
    /// Target yield by recursive substitution in co-index order.
    pub fn target_tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_target(&mut out);
        out
    }

    fn collect_target(&self, out: &mut Vec<String>) {
        for sym in &self.rule.rule.target {
            match sym {
                Sym::Terminal(t) => out.push(t.clone()),
                Sym::Nonterminal { index, .. } => self.children[index - 1].collect_target(out),
            }
        }
    }

    pub fn target_string(&self) -> String {
        self.target_tokens().join(" ")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("feature {feature}={value} cannot enter the score as a log probability")]
    NonPositiveProbability { feature: String, value: f64 },
}

/// Score one rule application: weighted features plus any direct penalty
/// plus the word penalty for target terminals introduced by this rule.
fn rule_contribution(
    rule: &ScfgRule,
    features: &BTreeMap<String, f64>,
    penalty: f64,
    weights: &WeightVector,
) -> Result<f64, ScoreError> {
    let mut score = penalty + weights.word_penalty * rule.target_terminal_count() as f64;
    for (name, value) in features {
        let weight = weights.feature_weights.get(name).copied().unwrap_or(0.0);
        if weight == 0.0 {
            continue;
        }
        if name.starts_with("p_") {
            if *value <= 0.0 {
                return Err(ScoreError::NonPositiveProbability {
                    feature: name.clone(),
                    value: *value,
                });
            }
            score += weight * value.ln();
        } else {
            score += weight * value;
        }
    }
    Ok(score)
}

/// Recompute a derivation's score from its features, independently of the
/// incremental totals cached during search.
pub fn score_derivation(d: &Derivation, weights: &WeightVector) -> Result<f64, ScoreError> {
    let mut total = rule_contribution(&d.rule.rule, &d.rule.features, d.rule.penalty, weights)?;
    for child in &d.children {
        total += score_derivation(child, weights)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DecoderConfig {
    /// K-best list size, at least 1.
    pub k: usize,
    /// LHS label of glue derivations.
    pub goal_label: String,
    /// Added per glue application; a derivation glued from m chunks pays it
    /// m times, so fuller parses with fewer chunks win ties.
    pub glue_penalty: f64,
    /// Added per out-of-vocabulary pass-through.
    pub oov_penalty: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            k: 1,
            goal_label: "GOAL".to_string(),
            glue_penalty: -1.0,
            oov_penalty: -100.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecoderError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("rule {rule} has an empty source side")]
    EmptySource { rule: String },
    #[error("rule {rule} is a unit nonterminal rule, which cannot terminate")]
    UnitNonterminalSource { rule: String },
    #[error("rule {rule} does not use co-indices 1..=n exactly once per side")]
    BadCoindexing { rule: String },
    #[error("rule {rule}: feature {feature}={value} is not a positive probability")]
    NonPositiveProbability { rule: String, feature: String, value: f64 },
    #[error("rule {rule}: feature {feature} is not finite")]
    NonFiniteFeature { rule: String, feature: String },
    #[error("weight {name} is not finite")]
    NonFiniteWeight { name: String },
}

/// Result of decoding one sentence. `uncovered` lists the maximal token
/// runs no chart item covers; when every token is covered but no glue
/// chain spans the sentence, the whole span is reported.
#[derive(Debug)]
pub enum DecodeOutcome {
    Translated(Vec<Arc<Derivation>>),
    Untranslatable { uncovered: Vec<Span> },
}

impl DecodeOutcome {
    pub fn best(&self) -> Option<&Arc<Derivation>> {
        match self {
            DecodeOutcome::Translated(list) => list.first(),
            DecodeOutcome::Untranslatable { .. } => None,
        }
    }
}

/// K-best file lines for one sentence: `sent_id ||| rank ||| target |||
/// score`, rank 1-based, score to four decimals. Untranslatable sentences
/// produce no lines.
pub fn kbest_lines(sent_id: usize, outcome: &DecodeOutcome) -> String {
    let mut out = String::new();
    if let DecodeOutcome::Translated(list) = outcome {
        for (rank, d) in list.iter().enumerate() {
            out.push_str(&format!(
                "{} ||| {} ||| {} ||| {:.4}\n",
                sent_id,
                rank + 1,
                d.target_string(),
                d.score
            ));
        }
    }
    out
}

/// An immutable, shareable decoder: validated rules, the source lexicon,
/// and scoring weights.
pub struct Decoder {
    rules: Vec<Arc<DecodedRule>>,
    lexicon: HashSet<String>,
    config: DecoderConfig,
    weights: WeightVector,
    goal: Label,
}

type Chart = HashMap<(Span, Label), Vec<Arc<Derivation>>>;

impl Decoder {
    pub fn new(
        grammar: &Grammar,
        config: DecoderConfig,
        weights: WeightVector,
    ) -> Result<Decoder, DecoderError> {
        if config.k == 0 {
            return Err(DecoderError::InvalidK);
        }
        for (name, value) in &weights.feature_weights {
            if !value.is_finite() {
                return Err(DecoderError::NonFiniteWeight { name: name.clone() });
            }
        }
        if !weights.word_penalty.is_finite() {
            return Err(DecoderError::NonFiniteWeight { name: "word_penalty".to_string() });
        }

        let mut rules = Vec::with_capacity(grammar.rules.len());
        let mut lexicon = HashSet::new();
        for scored in &grammar.rules {
            let rule = &scored.rule;
            let name = || rule.to_string();
            if rule.source.is_empty() {
                return Err(DecoderError::EmptySource { rule: name() });
            }
            if rule.source.len() == 1 && matches!(rule.source[0], Sym::Nonterminal { .. }) {
                return Err(DecoderError::UnitNonterminalSource { rule: name() });
            }
            if !coindexing_is_bijective(rule) {
                return Err(DecoderError::BadCoindexing { rule: name() });
            }
            for (feature, value) in &scored.features {
                if !value.is_finite() {
                    return Err(DecoderError::NonFiniteFeature {
                        rule: name(),
                        feature: feature.clone(),
                    });
                }
                if feature.starts_with("p_") && *value <= 0.0 {
                    return Err(DecoderError::NonPositiveProbability {
                        rule: name(),
                        feature: feature.clone(),
                        value: *value,
                    });
                }
            }
            for sym in &rule.source {
                if let Sym::Terminal(t) = sym {
                    lexicon.insert(t.clone());
                }
            }
            let contribution = rule_contribution(rule, &scored.features, 0.0, &weights)
                .expect("positive probabilities validated above");
            rules.push(Arc::new(DecodedRule {
                rule: rule.clone(),
                features: scored.features.clone(),
                penalty: 0.0,
                kind: RuleKind::Grammar,
                contribution,
            }));
        }
        let goal = Label::Constituent(config.goal_label.clone());
        Ok(Decoder { rules, lexicon, config, weights, goal })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// Whether a token has no lexical evidence in the grammar.
    pub fn is_oov(&self, token: &str) -> bool {
        !self.lexicon.contains(token)
    }

    fn glue_rule(&self, unit: bool) -> Arc<DecodedRule> {
        let gap = |index| Sym::Nonterminal { label: Label::Fallback, index };
        let goal = |index| Sym::Nonterminal { label: self.goal.clone(), index };
        let side = if unit { vec![gap(1)] } else { vec![goal(1), gap(2)] };
        Arc::new(DecodedRule {
            rule: ScfgRule { lhs: self.goal.clone(), source: side.clone(), target: side },
            features: BTreeMap::new(),
            penalty: self.config.glue_penalty,
            kind: RuleKind::Glue,
            contribution: self.config.glue_penalty,
        })
    }

    fn oov_rule(&self, token: &str) -> Arc<DecodedRule> {
        let rule = ScfgRule {
            lhs: Label::Fallback,
            source: vec![Sym::Terminal(token.to_string())],
            target: vec![Sym::Terminal(token.to_string())],
        };
        let contribution = self.config.oov_penalty + self.weights.word_penalty;
        Arc::new(DecodedRule {
            rule,
            features: BTreeMap::new(),
            penalty: self.config.oov_penalty,
            kind: RuleKind::OovPassThrough,
            contribution,
        })
    }

    /// Decode one sentence into up to k goal derivations, scores
    /// non-increasing, ties broken by lexicographic target string.
    pub fn decode(&self, tokens: &[String]) -> DecodeOutcome {
        let n = tokens.len();
        let oov_rules: Vec<Arc<DecodedRule>> = tokens
            .iter()
            .filter(|t| self.is_oov(t))
            .collect::<HashSet<_>>()
            .into_iter()
            .map(|t| self.oov_rule(t))
            .collect();

        let mut chart: Chart = HashMap::new();
        for width in 1..=n {
            for start in 0..=n - width {
                let span = Span::new(start, start + width);
                let mut cells: HashMap<Label, Vec<Derivation>> = HashMap::new();
                for rule in self.rules.iter().chain(&oov_rules) {
                    if rule.rule.source.len() > width {
                        continue;
                    }
                    for bindings in match_source(&rule.rule.source, tokens, span, &chart) {
                        self.substitute(rule, &bindings, &chart, &mut cells);
                    }
                }
                for (label, items) in cells {
                    let kept = self.keep_best(items);
                    if !kept.is_empty() {
                        chart.insert((span, label), kept);
                    }
                }
            }
        }

        // Glue pass: best chains of chart items over each prefix.
        let mut goal: Vec<Vec<Arc<Derivation>>> = vec![Vec::new(); n + 1];
        for end in 1..=n {
            let mut items = Vec::new();
            for ((span, _), cell) in &chart {
                if span.end != end {
                    continue;
                }
                if span.start == 0 {
                    let rule = self.glue_rule(true);
                    for d in cell {
                        items.push(Derivation {
                            rule: rule.clone(),
                            children: vec![d.clone()],
                            score: d.score + self.config.glue_penalty,
                        });
                    }
                }
                if span.start > 0 {
                    let rule = self.glue_rule(false);
                    for g in &goal[span.start] {
                        for d in cell {
                            items.push(Derivation {
                                rule: rule.clone(),
                                children: vec![g.clone(), d.clone()],
                                score: g.score + d.score + self.config.glue_penalty,
                            });
                        }
                    }
                }
            }
            goal[end] = self.keep_best(items);
        }

        match goal.pop() {
            Some(best) if !best.is_empty() => DecodeOutcome::Translated(best),
            _ => DecodeOutcome::Untranslatable { uncovered: uncovered_spans(&chart, n) },
        }
    }

    /// Decode a batch in parallel; the decoder is shared read-only.
    pub fn decode_corpus(&self, sentences: &[Vec<String>]) -> Vec<DecodeOutcome> {
        sentences.par_iter().map(|s| self.decode(s)).collect()
    }

    /// Expand one matched rule into derivations, one per combination of
    /// child derivations, grouped under the rule's LHS.
    fn substitute(
        &self,
        rule: &Arc<DecodedRule>,
        bindings: &[(usize, Span, Label)],
        chart: &Chart,
        cells: &mut HashMap<Label, Vec<Derivation>>,
    ) {
        let mut child_cells: Vec<&[Arc<Derivation>]> = vec![&[]; bindings.len()];
        for &(index, span, ref label) in bindings {
            match chart.get(&(span, label.clone())) {
                Some(cell) => child_cells[index - 1] = cell,
                None => return,
            }
        }
        let out = cells.entry(rule.rule.lhs.clone()).or_default();
        let mut combo = Vec::with_capacity(child_cells.len());
        expand_combos(rule, &child_cells, &mut combo, out);
    }

    /// Sort by score descending then target string ascending, keep the best
    /// derivation per distinct target string, truncate to k.
    fn keep_best(&self, items: Vec<Derivation>) -> Vec<Arc<Derivation>> {
        let mut keyed: Vec<(String, Derivation)> =
            items.into_iter().map(|d| (d.target_string(), d)).collect();
        keyed.sort_by(|(ta, a), (tb, b)| b.score.total_cmp(&a.score).then_with(|| ta.cmp(tb)));
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (target, d) in keyed {
            if out.len() == self.config.k {
                break;
            }
            if seen.insert(target) {
                out.push(Arc::new(d));
            }
        }
        out
    }
}

fn coindexing_is_bijective(rule: &ScfgRule) -> bool {
    let indices = |side: &[Sym]| {
        let mut v: Vec<usize> = side
            .iter()
            .filter_map(|s| match s {
                Sym::Nonterminal { index, .. } => Some(*index),
                Sym::Terminal(_) => None,
            })
            .collect();
        v.sort_unstable();
        v
    };
    let src = indices(&rule.source);
    src == (1..=src.len()).collect::<Vec<_>>() && src == indices(&rule.target)
}

/// All ways a source side matches a span: terminals must equal tokens and
/// each nonterminal must bind a sub-span whose (span, label) cell exists.
/// Returns binding lists as (co-index, span, label).
fn match_source(
    source: &[Sym],
    tokens: &[String],
    span: Span,
    chart: &Chart,
) -> Vec<Vec<(usize, Span, Label)>> {
    let mut out = Vec::new();
    let mut acc = Vec::new();
    extend_match(source, tokens, span.start, span.end, chart, &mut acc, &mut out);
    out
}

fn extend_match(
    rest: &[Sym],
    tokens: &[String],
    pos: usize,
    end: usize,
    chart: &Chart,
    acc: &mut Vec<(usize, Span, Label)>,
    out: &mut Vec<Vec<(usize, Span, Label)>>,
) {
    match rest.first() {
        None => {
            if pos == end {
                out.push(acc.clone());
            }
        }
        Some(Sym::Terminal(t)) => {
            if pos < end && &tokens[pos] == t {
                extend_match(&rest[1..], tokens, pos + 1, end, chart, acc, out);
            }
        }
        Some(Sym::Nonterminal { label, index }) => {
            // Leave at least one token per remaining symbol.
            let max_end = end - (rest.len() - 1);
            for stop in pos + 1..=max_end {
                let span = Span::new(pos, stop);
                if chart.contains_key(&(span, label.clone())) {
                    acc.push((*index, span, label.clone()));
                    extend_match(&rest[1..], tokens, stop, end, chart, acc, out);
                    acc.pop();
                }
            }
        }
    }
}

/// Cross product of child cells in co-index order.
fn expand_combos(
    rule: &Arc<DecodedRule>,
    child_cells: &[&[Arc<Derivation>]],
    combo: &mut Vec<Arc<Derivation>>,
    out: &mut Vec<Derivation>,
) {
    if combo.len() == child_cells.len() {
        let score = rule.contribution + combo.iter().map(|c| c.score).sum::<f64>();
        out.push(Derivation { rule: rule.clone(), children: combo.clone(), score });
        return;
    }
    for child in child_cells[combo.len()] {
        combo.push(child.clone());
        expand_combos(rule, child_cells, combo, out);
        combo.pop();
    }
}

/// Maximal runs of tokens covered by no chart item; the whole span when
/// every token is covered yet no glue chain reached the end.
fn uncovered_spans(chart: &Chart, n: usize) -> Vec<Span> {
    let mut covered = vec![false; n];
    for (span, _) in chart.keys() {
        for slot in &mut covered[span.start..span.end] {
            *slot = true;
        }
    }
    let mut out = Vec::new();
    let mut run_start = None;
    for (t, &c) in covered.iter().enumerate() {
        match (c, run_start) {
            (false, None) => run_start = Some(t),
            (true, Some(s)) => {
                out.push(Span::new(s, t));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        out.push(Span::new(s, n));
    }
    if out.is_empty() && n > 0 {
        out.push(Span::new(0, n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::ScoredRule;

    fn rule(line: &str, features: &[(&str, f64)]) -> ScoredRule {
        let fields: Vec<&str> = line.split(" ||| ").collect();
        let full = format!(
            "{} ||| {} ||| {} ||| {}",
            fields[0],
            fields[1],
            fields[2],
            if features.is_empty() {
                "count=1".to_string()
            } else {
                features.iter().map(|(n, v)| format!("{n}={v}")).collect::<Vec<_>>().join(" ")
            }
        );
        let grammar = crate::extract::read_grammar(&full).unwrap();
        let mut scored = grammar.rules.into_iter().next().unwrap();
        if features.is_empty() {
            scored.features.clear();
        }
        scored
    }

    fn grammar(lines: &[(&str, &[(&str, f64)])]) -> Grammar {
        Grammar { rules: lines.iter().map(|(l, f)| rule(l, f)).collect(), config: None }
    }

    fn tokens(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn decoder(g: &Grammar, k: usize) -> Decoder {
        let config = DecoderConfig { k, ..Default::default() };
        Decoder::new(g, config, WeightVector::default()).unwrap()
    }

    fn targets(outcome: &DecodeOutcome) -> Vec<String> {
        match outcome {
            DecodeOutcome::Translated(list) => list.iter().map(|d| d.target_string()).collect(),
            DecodeOutcome::Untranslatable { .. } => panic!("expected a translation"),
        }
    }

    #[test]
    fn single_rule_grammar() {
        let g = grammar(&[("[S] ||| a ||| x", &[])]);
        let out = decoder(&g, 1).decode(&tokens("a"));
        assert_eq!(targets(&out), ["x"]);
        // One unit glue application on top of a zero-feature rule.
        assert_eq!(out.best().unwrap().score, -1.0);
    }

    #[test]
    fn sov_toy_grammar_reorders() {
        let g = grammar(&[
            ("[NP] ||| admi ||| man", &[]),
            ("[NP] ||| roti ||| bread", &[]),
            ("[V] ||| khata ||| eats", &[]),
            ("[S] ||| [NP,1] [NP,2] [V,3] ||| [NP,1] [V,3] [NP,2]", &[]),
        ]);
        let out = decoder(&g, 100).decode(&tokens("admi roti khata"));
        let list = targets(&out);
        assert_eq!(list[0], "man eats bread");
        assert_eq!(out.best().unwrap().score, -1.0);
        // The all-glue chain survives in the k-best, three penalties deep.
        let glued = list.iter().position(|t| t == "man bread eats").unwrap();
        match &out {
            DecodeOutcome::Translated(ds) => assert_eq!(ds[glued].score, -3.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn derivation_target_tokens_substitute_in_coindex_order() {
        let g = grammar(&[
            ("[NP] ||| admi ||| man", &[]),
            ("[NP] ||| roti ||| bread", &[]),
            ("[V] ||| khata ||| eats", &[]),
            ("[S] ||| [NP,1] [NP,2] [V,3] ||| [NP,1] [V,3] [NP,2]", &[]),
        ]);
        let out = decoder(&g, 1).decode(&tokens("admi roti khata"));
        assert_eq!(out.best().unwrap().target_tokens(), ["man", "eats", "bread"]);
    }

    #[test]
    fn kbest_ordered_by_score_then_target() {
        let g = grammar(&[
            ("[S] ||| a ||| x", &[("p_ts", 0.25)]),
            ("[S] ||| a ||| y", &[("p_ts", 0.75)]),
        ]);
        let out = decoder(&g, 2).decode(&tokens("a"));
        assert_eq!(targets(&out), ["y", "x"]);
        match &out {
            DecodeOutcome::Translated(ds) => {
                assert!((ds[0].score - (0.75f64.ln() - 1.0)).abs() < 1e-12);
                assert!((ds[1].score - (0.25f64.ln() - 1.0)).abs() < 1e-12);
                assert!(ds[0].score >= ds[1].score);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn equal_scores_tie_break_lexicographically() {
        let g = grammar(&[("[S] ||| a ||| y", &[]), ("[S] ||| a ||| x", &[])]);
        let out = decoder(&g, 2).decode(&tokens("a"));
        assert_eq!(targets(&out), ["x", "y"]);
    }

    #[test]
    fn duplicate_targets_collapse_to_best() {
        // The same string via two labels: glue sees both, keeps one entry.
        let g = grammar(&[
            ("[S] ||| a ||| x", &[("p_ts", 0.5)]),
            ("[A] ||| a ||| x", &[("p_ts", 0.25)]),
        ]);
        let out = decoder(&g, 10).decode(&tokens("a"));
        assert_eq!(targets(&out), ["x"]);
        assert!((out.best().unwrap().score - (0.5f64.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn oov_token_passes_through() {
        let g = grammar(&[("[S] ||| a ||| x", &[])]);
        let out = decoder(&g, 1).decode(&tokens("a zzz"));
        assert_eq!(targets(&out), ["x zzz"]);
        // Unit glue, concat glue, and the pass-through penalty.
        assert_eq!(out.best().unwrap().score, -102.0);
    }

    #[test]
    fn in_vocabulary_token_gets_no_pass_through() {
        // "b" appears as a source terminal, so it is not OOV, but no item
        // ever covers it alone: the sentence is untranslatable.
        let g = grammar(&[("[S] ||| a b ||| x", &[])]);
        let d = decoder(&g, 1);
        assert!(!d.is_oov("b"));
        assert!(d.is_oov("zzz"));
        match d.decode(&tokens("b")) {
            DecodeOutcome::Untranslatable { uncovered } => {
                assert_eq!(uncovered, [Span::new(0, 1)]);
            }
            _ => panic!("expected untranslatable"),
        }
    }

    #[test]
    fn untranslatable_reports_uncovered_runs() {
        // "b" is in-vocabulary via the unfirable two-token rule, so the
        // middle run gets no items and no pass-through.
        let g = grammar(&[("[S] ||| a ||| x", &[]), ("[T] ||| b c ||| y z", &[])]);
        match decoder(&g, 1).decode(&tokens("a b b a")) {
            DecodeOutcome::Untranslatable { uncovered } => {
                assert_eq!(uncovered, [Span::new(1, 3)]);
            }
            _ => panic!("expected untranslatable"),
        }
    }

    #[test]
    fn covered_but_unparseable_reports_whole_span() {
        let g = grammar(&[("[S] ||| a b ||| x", &[]), ("[T] ||| b c ||| y", &[])]);
        match decoder(&g, 1).decode(&tokens("a b c")) {
            DecodeOutcome::Untranslatable { uncovered } => {
                assert_eq!(uncovered, [Span::new(0, 3)]);
            }
            _ => panic!("expected untranslatable"),
        }
    }

    #[test]
    fn empty_input_is_untranslatable() {
        let g = grammar(&[("[S] ||| a ||| x", &[])]);
        match decoder(&g, 1).decode(&[]) {
            DecodeOutcome::Untranslatable { uncovered } => assert!(uncovered.is_empty()),
            _ => panic!("expected untranslatable"),
        }
    }

    #[test]
    fn labels_must_match_exactly() {
        let g = grammar(&[
            ("[NP] ||| a ||| x", &[]),
            ("[S] ||| [NP,1] b ||| [NP,1] y", &[]),
            ("[S] ||| [VP,1] b ||| [VP,1] z", &[]),
        ]);
        let out = decoder(&g, 10).decode(&tokens("a b"));
        let list = targets(&out);
        assert!(list.contains(&"x y".to_string()));
        assert!(!list.iter().any(|t| t.ends_with('z')), "VP rule must not fire: {list:?}");
    }

    #[test]
    fn word_penalty_counts_target_terminals() {
        let g = grammar(&[("[S] ||| a ||| x y z", &[])]);
        let weights = WeightVector { feature_weights: BTreeMap::new(), word_penalty: -0.5 };
        let config = DecoderConfig { k: 1, ..Default::default() };
        let d = Decoder::new(&g, config, weights).unwrap();
        let out = d.decode(&tokens("a"));
        assert_eq!(out.best().unwrap().score, 3.0 * -0.5 + -1.0);
    }

    #[test]
    fn score_recomputation_matches_search() {
        let g = grammar(&[
            ("[NP] ||| admi ||| man", &[("p_ts", 0.5), ("count", 2.0)]),
            ("[NP] ||| roti ||| bread", &[("p_ts", 1.0)]),
            ("[V] ||| khata ||| eats", &[("p_ts", 0.25)]),
            ("[S] ||| [NP,1] [NP,2] [V,3] ||| [NP,1] [V,3] [NP,2]", &[("p_ts", 1.0)]),
        ]);
        let config = DecoderConfig { k: 50, ..Default::default() };
        let weights = WeightVector::parse("p_ts=1,p_st=0.5,word_penalty=-0.1").unwrap();
        let d = Decoder::new(&g, config, weights.clone()).unwrap();
        match d.decode(&tokens("admi roti khata")) {
            DecodeOutcome::Translated(list) => {
                assert!(!list.is_empty());
                for der in &list {
                    let recomputed = score_derivation(der, &weights).unwrap();
                    assert!((recomputed - der.score).abs() < 1e-9, "{recomputed} vs {}", der.score);
                }
            }
            _ => panic!("expected translations"),
        }
    }

    #[test]
    fn decode_corpus_matches_sequential() {
        let g = grammar(&[("[S] ||| a ||| x", &[]), ("[S] ||| b ||| y", &[])]);
        let d = decoder(&g, 3);
        let sentences = vec![tokens("a"), tokens("b"), tokens("a b")];
        let batch = d.decode_corpus(&sentences);
        for (sent, outcome) in sentences.iter().zip(&batch) {
            assert_eq!(kbest_lines(0, outcome), kbest_lines(0, &d.decode(sent)));
        }
    }

    #[test]
    fn kbest_lines_format() {
        let g = grammar(&[("[S] ||| a ||| x", &[])]);
        let out = decoder(&g, 1).decode(&tokens("a"));
        assert_eq!(kbest_lines(7, &out), "7 ||| 1 ||| x ||| -1.0000\n");
        let untranslatable = DecodeOutcome::Untranslatable { uncovered: vec![] };
        assert_eq!(kbest_lines(7, &untranslatable), "");
    }

    #[test]
    fn unit_nonterminal_rule_rejected() {
        let g = grammar(&[("[A] ||| [B,1] ||| [B,1]", &[])]);
        let err = Decoder::new(&g, DecoderConfig::default(), WeightVector::default());
        assert!(matches!(err, Err(DecoderError::UnitNonterminalSource { .. })));
    }

    #[test]
    fn bad_coindexing_rejected() {
        let g = grammar(&[("[S] ||| [A,1] x [B,1] ||| [A,1] [B,1]", &[])]);
        let err = Decoder::new(&g, DecoderConfig::default(), WeightVector::default());
        assert!(matches!(err, Err(DecoderError::BadCoindexing { .. })));
    }

    #[test]
    fn nonpositive_probability_rejected() {
        let g = grammar(&[("[S] ||| a ||| x", &[("p_ts", 0.0)])]);
        let err = Decoder::new(&g, DecoderConfig::default(), WeightVector::default());
        assert!(matches!(err, Err(DecoderError::NonPositiveProbability { .. })));
    }

    #[test]
    fn zero_k_rejected() {
        let g = grammar(&[("[S] ||| a ||| x", &[])]);
        let config = DecoderConfig { k: 0, ..Default::default() };
        assert!(matches!(
            Decoder::new(&g, config, WeightVector::default()),
            Err(DecoderError::InvalidK)
        ));
    }

    #[test]
    fn weight_parsing() {
        let w = WeightVector::parse("p_ts=1, p_st=0.5 ,word_penalty=-0.1").unwrap();
        assert_eq!(w.feature_weights["p_ts"], 1.0);
        assert_eq!(w.feature_weights["p_st"], 0.5);
        assert_eq!(w.word_penalty, -0.1);
        assert_eq!(WeightVector::parse("").unwrap().feature_weights.len(), 0);
        assert!(WeightVector::parse("p_ts").is_err());
        assert!(WeightVector::parse("p_ts=abc").is_err());
    }

    #[test]
    fn unknown_features_score_zero() {
        let g = grammar(&[("[S] ||| a ||| x", &[("mystery", 5.0)])]);
        let out = decoder(&g, 1).decode(&tokens("a"));
        // No weight for "mystery", so only the glue penalty contributes.
        assert_eq!(out.best().unwrap().score, -1.0);
    }

    #[test]
    fn all_zero_weights_score_only_penalties() {
        let g = grammar(&[("[S] ||| a ||| x", &[("p_ts", 0.5), ("p_st", 0.5)])]);
        let config = DecoderConfig { k: 1, ..Default::default() };
        let d = Decoder::new(&g, config, WeightVector::parse("").unwrap()).unwrap();
        let out = d.decode(&tokens("a"));
        assert_eq!(out.best().unwrap().score, -1.0);
    }
}
