//! Aligned parallel corpus ingestion.
//!
//! A bitext is four parallel UTF-8 files with one sentence per line: source
//! tokens, target tokens, Pharaoh-format alignments, and target-side trees.
//! Tokens are whitespace-separated; no tokenization happens here. Alignment
//! pairs are `i-j` with `i` a source index and `j` a target index
//! (source→target; the convention is asserted here once so every consumer
//! agrees).

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{self, BufRead};

use thiserror::Error;

use crate::treebank::{parse_tree, Tree, TreeParseError};

/// Word alignment links as a set of (source index, target index) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alignment {
    links: BTreeSet<(usize, usize)>,
}

impl Alignment {
    pub fn from_links(links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Alignment { links: links.into_iter().collect() }
    }

    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.links.contains(&(source, target))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("malformed alignment pair {pair:?}")]
    Malformed { pair: String },
    #[error("alignment pair {pair:?} out of range for sentence lengths {src_len}/{tgt_len}")]
    OutOfRange { pair: String, src_len: usize, tgt_len: usize },
}

/// Parse one Pharaoh line (`i-j` pairs, whitespace-separated). Duplicates
/// collapse; an empty line is a valid unaligned sentence.
pub fn parse_alignment(
    line: &str,
    src_len: usize,
    tgt_len: usize,
) -> Result<Alignment, AlignmentError> {
    let mut links = BTreeSet::new();
    for pair in line.split_whitespace() {
        let parsed = pair
            .split_once('-')
            .and_then(|(i, j)| Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?)));
        let (i, j) = parsed.ok_or_else(|| AlignmentError::Malformed { pair: pair.to_string() })?;
        if i >= src_len || j >= tgt_len {
            return Err(AlignmentError::OutOfRange { pair: pair.to_string(), src_len, tgt_len });
        }
        links.insert((i, j));
    }
    Ok(Alignment { links })
}

/// One validated sentence pair: the tree's yield equals the target tokens
/// and all alignment indices are in range.
#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub id: usize,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub alignment: Alignment,
    pub target_tree: Tree<String>,
}

/// Why a line was dropped rather than emitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    /// Blank tree line: the sentence has no parse.
    NoParse,
    /// Tree yield and target token count/content disagree.
    YieldMismatch { tree_yield: usize, target_tokens: usize },
    /// Alignment line failed to parse or points out of range.
    BadAlignment(AlignmentError),
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::NoParse => write!(f, "no parse"),
            SkipReason::YieldMismatch { tree_yield, target_tokens } => write!(
                f,
                "yield mismatch: tree yields {tree_yield} tokens, target line has {target_tokens}"
            ),
            SkipReason::BadAlignment(e) => write!(f, "bad alignment: {e}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(
        "line count mismatch: source {source_lines}, target {target_lines}, alignment {alignment_lines}, trees {tree_lines}"
    )]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
        alignment_lines: usize,
        tree_lines: usize,
    },
    #[error("tree file line {line}: {source}")]
    Tree {
        line: usize,
        #[source]
        source: TreeParseError,
    },
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
}

/// Item from the bitext stream: a validated pair or a per-line skip.
#[derive(Debug, Clone, PartialEq)]
pub enum BitextItem {
    Pair(SentencePair),
    Skipped { id: usize, reason: SkipReason },
}

/// Streaming reader over the four parallel files. Memory use is one line
/// per file; validation happens per line. Unequal line counts surface as a
/// hard error once any file runs out early.
pub struct BitextReader<S, T, A, R> {
    source: io::Lines<S>,
    target: io::Lines<T>,
    alignment: io::Lines<A>,
    trees: io::Lines<R>,
    next_id: usize,
    done: bool,
}

impl<S: BufRead, T: BufRead, A: BufRead, R: BufRead> BitextReader<S, T, A, R> {
    pub fn new(source: S, target: T, alignment: A, trees: R) -> Self {
        BitextReader {
            source: source.lines(),
            target: target.lines(),
            alignment: alignment.lines(),
            trees: trees.lines(),
            next_id: 0,
            done: false,
        }
    }
}

impl<S: BufRead, T: BufRead, A: BufRead, R: BufRead> Iterator for BitextReader<S, T, A, R> {
    type Item = Result<BitextItem, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let read = |l: Option<io::Result<String>>| l.transpose();
        let (s, t, a, r) = match (
            read(self.source.next()),
            read(self.target.next()),
            read(self.alignment.next()),
            read(self.trees.next()),
        ) {
            (Ok(s), Ok(t), Ok(a), Ok(r)) => (s, t, a, r),
            (s, t, a, r) => {
                self.done = true;
                let err = [s.err(), t.err(), a.err(), r.err()]
                    .into_iter()
                    .flatten()
                    .next()
                    .expect("at least one read failed");
                return Some(Err(err.into()));
            }
        };
        match (&s, &t, &a, &r) {
            (None, None, None, None) => {
                self.done = true;
                return None;
            }
            (Some(_), Some(_), Some(_), Some(_)) => {}
            _ => {
                // One file ended early; drain the rest so the error can name
                // every file's line count.
                self.done = true;
                let base = self.next_id;
                let count =
                    |first: &Option<String>, rest: usize| base + first.is_some() as usize + rest;
                let src_rest = self.source.by_ref().count();
                let tgt_rest = self.target.by_ref().count();
                let aln_rest = self.alignment.by_ref().count();
                let tre_rest = self.trees.by_ref().count();
                return Some(Err(CorpusError::LineCountMismatch {
                    source_lines: count(&s, src_rest),
                    target_lines: count(&t, tgt_rest),
                    alignment_lines: count(&a, aln_rest),
                    tree_lines: count(&r, tre_rest),
                }));
            }
        }
        let (s, t, a, r) = (s.unwrap(), t.unwrap(), a.unwrap(), r.unwrap());
        let id = self.next_id;
        self.next_id += 1;

        if r.trim().is_empty() {
            return Some(Ok(BitextItem::Skipped { id, reason: SkipReason::NoParse }));
        }
        let tree = match parse_tree(&r) {
            Ok(tree) => tree,
            Err(source) => {
                self.done = true;
                return Some(Err(CorpusError::Tree { line: id + 1, source }));
            }
        };
        let source_tokens: Vec<String> = s.split_whitespace().map(str::to_string).collect();
        let target_tokens: Vec<String> = t.split_whitespace().map(str::to_string).collect();
        let tree_yield = tree.yield_tokens();
        if tree_yield != target_tokens.iter().map(String::as_str).collect::<Vec<_>>() {
            return Some(Ok(BitextItem::Skipped {
                id,
                reason: SkipReason::YieldMismatch {
                    tree_yield: tree_yield.len(),
                    target_tokens: target_tokens.len(),
                },
            }));
        }
        let alignment = match parse_alignment(&a, source_tokens.len(), target_tokens.len()) {
            Ok(alignment) => alignment,
            Err(e) => {
                return Some(Ok(BitextItem::Skipped { id, reason: SkipReason::BadAlignment(e) }))
            }
        };
        Some(Ok(BitextItem::Pair(SentencePair {
            id,
            source: source_tokens,
            target: target_tokens,
            alignment,
            target_tree: tree,
        })))
    }
}

/// Open a bitext over any four buffered readers.
pub fn load_bitext<S: BufRead, T: BufRead, A: BufRead, R: BufRead>(
    source: S,
    target: T,
    alignment: A,
    trees: R,
) -> BitextReader<S, T, A, R> {
    BitextReader::new(source, target, alignment, trees)
}

/// Pairs that loaded, plus `(sentence id, reason)` for each skipped line.
pub type LoadedBitext = (Vec<SentencePair>, Vec<(usize, SkipReason)>);

/// Drain a bitext into memory, splitting pairs from skips.
pub fn collect_bitext<S: BufRead, T: BufRead, A: BufRead, R: BufRead>(
    reader: BitextReader<S, T, A, R>,
) -> Result<LoadedBitext, CorpusError> {
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for item in reader {
        match item? {
            BitextItem::Pair(p) => pairs.push(p),
            BitextItem::Skipped { id, reason } => skipped.push((id, reason)),
        }
    }
    Ok((pairs, skipped))
}

/// Line/token/type counts per side.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct CorpusStats {
    pub lines: usize,
    pub source_tokens: usize,
    pub source_types: usize,
    pub target_tokens: usize,
    pub target_types: usize,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lines          {:>8}", self.lines)?;
        writeln!(f, "source tokens  {:>8}", self.source_tokens)?;
        writeln!(f, "source types   {:>8}", self.source_types)?;
        writeln!(f, "target tokens  {:>8}", self.target_tokens)?;
        write!(f, "target types   {:>8}", self.target_types)
    }
}

/// Tally a pair stream.
pub fn corpus_stats<'a>(pairs: impl IntoIterator<Item = &'a SentencePair>) -> CorpusStats {
    let mut stats = CorpusStats::default();
    let mut source_types: HashSet<&str> = HashSet::new();
    let mut target_types: HashSet<&str> = HashSet::new();
    for pair in pairs {
        stats.lines += 1;
        stats.source_tokens += pair.source.len();
        stats.target_tokens += pair.target.len();
        source_types.extend(pair.source.iter().map(String::as_str));
        target_types.extend(pair.target.iter().map(String::as_str));
    }
    stats.source_types = source_types.len();
    stats.target_types = target_types.len();
    stats
}

/// Tally raw text sides without requiring alignments or trees.
pub fn text_stats(source: &str, target: &str) -> CorpusStats {
    let mut stats = CorpusStats::default();
    let mut source_types: HashSet<&str> = HashSet::new();
    let mut target_types: HashSet<&str> = HashSet::new();
    for (s, t) in source.lines().zip(target.lines()) {
        stats.lines += 1;
        stats.source_tokens += s.split_whitespace().count();
        stats.target_tokens += t.split_whitespace().count();
        source_types.extend(s.split_whitespace());
        target_types.extend(t.split_whitespace());
    }
    stats.source_types = source_types.len();
    stats.target_types = target_types.len();
    stats
}
