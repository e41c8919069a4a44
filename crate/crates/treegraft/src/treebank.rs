//! Bracketed parse trees, token spans, and the span index used for grafting
//! and rule labeling.
//!
//! Tree files hold one tree per line in Penn Treebank bracketing. A blank
//! line marks a sentence with no parse; downstream stages skip it. An outer
//! unlabeled wrapper `( ... )`, as written by some PTB tools, is stripped on
//! read and never written back.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Half-open token span `[start, end)` over a sentence's yield.
///
/// A span is meaningful for a sentence of length `n` when
/// `start < end && end <= n`. Spans read from standoff files are carried
/// as-is and validated at graft time, so construction does not enforce this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    /// True when the span is usable against a sentence of `len` tokens.
    pub fn is_valid_for(&self, len: usize) -> bool {
        self.start < self.end && self.end <= len
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// A parse tree node. The label type is generic so the grafting stage can
/// carry structured labels; plain trees read from files use `Tree<String>`.
///
/// Invariants: a node has a token iff it has zero children (a leaf is its own
/// preterminal), and parsed labels are non-empty with no whitespace or
/// parentheses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree<L = String> {
    Internal { label: L, children: Vec<Tree<L>> },
    Leaf { label: L, token: String },
}

/// Path from the root to a node: a sequence of child indices. The root is
/// the empty path.
pub type NodePath = Vec<usize>;

impl<L> Tree<L> {
    pub fn label(&self) -> &L {
        match self {
            Tree::Internal { label, .. } | Tree::Leaf { label, .. } => label,
        }
    }

    pub fn label_mut(&mut self) -> &mut L {
        match self {
            Tree::Internal { label, .. } | Tree::Leaf { label, .. } => label,
        }
    }

    pub fn children(&self) -> &[Tree<L>] {
        match self {
            Tree::Internal { children, .. } => children,
            Tree::Leaf { .. } => &[],
        }
    }

    pub fn token(&self) -> Option<&str> {
        match self {
            Tree::Leaf { token, .. } => Some(token),
            Tree::Internal { .. } => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf { .. })
    }

    /// Number of leaves, which equals the sentence length.
    pub fn leaf_count(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 1,
            Tree::Internal { children, .. } => children.iter().map(Tree::leaf_count).sum(),
        }
    }

    /// Leaf tokens in order.
    pub fn yield_tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf { token, .. } => out.push(token),
            Tree::Internal { children, .. } => {
                for c in children {
                    c.collect_tokens(out);
                }
            }
        }
    }

    pub fn node(&self, path: &[usize]) -> Option<&Tree<L>> {
        let mut cur = self;
        for &i in path {
            cur = cur.children().get(i)?;
        }
        Some(cur)
    }

    pub fn node_mut(&mut self, path: &[usize]) -> Option<&mut Tree<L>> {
        let mut cur = self;
        for &i in path {
            cur = match cur {
                Tree::Internal { children, .. } => children.get_mut(i)?,
                Tree::Leaf { .. } => return None,
            };
        }
        Some(cur)
    }

    pub fn map_labels<M>(self, f: &impl Fn(L) -> M) -> Tree<M> {
        match self {
            Tree::Leaf { label, token } => Tree::Leaf { label: f(label), token },
            Tree::Internal { label, children } => Tree::Internal {
                label: f(label),
                children: children.into_iter().map(|c| c.map_labels(f)).collect(),
            },
        }
    }
}

impl<L: fmt::Display> fmt::Display for Tree<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf { label, token } => write!(f, "({label} {token})"),
            Tree::Internal { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Render a tree in bracketed form, without an outer wrapper.
pub fn serialize_tree<L: fmt::Display>(tree: &Tree<L>) -> String {
    tree.to_string()
}

/// Errors from parsing a single bracketed tree. Offsets count characters
/// from the start of the line; end of input reports the line's length.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeParseError {
    #[error("unbalanced brackets at offset {0}")]
    Unbalanced(usize),
    #[error("empty constituent at offset {0}")]
    EmptyConstituent(usize),
    #[error("leaf with no token at offset {0}")]
    LeafWithoutToken(usize),
    #[error("unexpected content at offset {0}")]
    UnexpectedContent(usize),
}

struct TreeParser {
    chars: Vec<char>,
    pos: usize,
}

impl TreeParser {
    fn new(text: &str) -> Self {
        TreeParser { chars: text.chars().collect(), pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    /// Longest run of non-whitespace, non-paren chars at the cursor.
    fn word(&mut self) -> Option<String> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if !c.is_whitespace() && c != '(' && c != ')') {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            Some(self.chars[start..self.pos].iter().collect())
        }
    }

    fn node(&mut self) -> Result<Tree<String>, TreeParseError> {
        debug_assert_eq!(self.peek(), Some('('));
        let open = self.pos;
        self.pos += 1;
        self.skip_ws();
        let label = match self.peek() {
            Some(')') | None => return Err(TreeParseError::EmptyConstituent(open)),
            Some('(') => return Err(TreeParseError::UnexpectedContent(self.pos)),
            Some(_) => self.word().expect("non-paren, non-ws char starts a word"),
        };
        self.skip_ws();
        match self.peek() {
            None => Err(TreeParseError::Unbalanced(self.pos)),
            Some(')') => Err(TreeParseError::LeafWithoutToken(self.pos)),
            Some('(') => {
                let mut children = Vec::new();
                while self.peek() == Some('(') {
                    children.push(self.node()?);
                    self.skip_ws();
                }
                match self.peek() {
                    Some(')') => {
                        self.pos += 1;
                        Ok(Tree::Internal { label, children })
                    }
                    Some(_) => Err(TreeParseError::UnexpectedContent(self.pos)),
                    None => Err(TreeParseError::Unbalanced(self.pos)),
                }
            }
            Some(_) => {
                let token = self.word().expect("non-paren, non-ws char starts a word");
                self.skip_ws();
                match self.peek() {
                    Some(')') => {
                        self.pos += 1;
                        Ok(Tree::Leaf { label, token })
                    }
                    Some(_) => Err(TreeParseError::UnexpectedContent(self.pos)),
                    None => Err(TreeParseError::Unbalanced(self.pos)),
                }
            }
        }
    }
}

/// Parse one bracketed tree. An outer unlabeled wrapper `( (S ...) )` is
/// stripped; anything after the tree is an error.
pub fn parse_tree(text: &str) -> Result<Tree<String>, TreeParseError> {
    let mut p = TreeParser::new(text);
    p.skip_ws();
    match p.peek() {
        None => return Err(TreeParseError::EmptyConstituent(p.pos)),
        Some('(') => {}
        Some(_) => return Err(TreeParseError::UnexpectedContent(p.pos)),
    }
    // Look past the open bracket: a second bracket means an unlabeled wrapper.
    let open = p.pos;
    p.pos += 1;
    p.skip_ws();
    let tree = match p.peek() {
        Some('(') => {
            let inner = p.node()?;
            p.skip_ws();
            match p.peek() {
                Some(')') => {
                    p.pos += 1;
                    inner
                }
                Some(_) => return Err(TreeParseError::UnexpectedContent(p.pos)),
                None => return Err(TreeParseError::Unbalanced(p.pos)),
            }
        }
        _ => {
            p.pos = open;
            p.node()?
        }
    };
    p.skip_ws();
    match p.peek() {
        None => Ok(tree),
        Some(')') => Err(TreeParseError::Unbalanced(p.pos)),
        Some(_) => Err(TreeParseError::UnexpectedContent(p.pos)),
    }
}

/// Error from reading a tree file: the failing line (1-based) plus the
/// in-line parse error.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct TreeFileError {
    pub line: usize,
    #[source]
    pub source: TreeParseError,
}

/// Parse a whole tree file. Blank lines yield `None` (no parse for that
/// sentence).
pub fn read_trees(text: &str) -> Result<Vec<Option<Tree<String>>>, TreeFileError> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            if line.trim().is_empty() {
                Ok(None)
            } else {
                parse_tree(line).map(Some).map_err(|source| TreeFileError { line: i + 1, source })
            }
        })
        .collect()
}

/// Render trees one per line; `None` becomes a blank line.
pub fn write_trees<L: fmt::Display>(trees: &[Option<Tree<L>>]) -> String {
    let mut out = String::new();
    for t in trees {
        if let Some(t) = t {
            out.push_str(&serialize_tree(t));
        }
        out.push('\n');
    }
    out
}

/// Precomputed span information for one tree.
///
/// Every node covers a half-open token span; sibling spans partition the
/// parent's span; all nodes covering the same span form a single
/// root-to-leaf unary chain.
#[derive(Debug, Clone)]
pub struct SpanIndex {
    sentence_len: usize,
    preorder: Vec<(NodePath, Span)>,
    span_of: HashMap<NodePath, Span>,
    chains: HashMap<Span, Vec<NodePath>>,
}

impl SpanIndex {
    /// Token count of the tree's yield.
    pub fn sentence_len(&self) -> usize {
        self.sentence_len
    }

    /// Nodes in preorder with their spans.
    pub fn nodes(&self) -> &[(NodePath, Span)] {
        &self.preorder
    }

    pub fn span_of(&self, path: &[usize]) -> Option<Span> {
        self.span_of.get(path).copied()
    }

    /// All nodes whose span is exactly `span`, ordered root to leaf. They
    /// always form one unary chain. Empty when no node matches.
    pub fn chain_at(&self, span: Span) -> &[NodePath] {
        self.chains.get(&span).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The topmost node whose span is exactly `span`.
    pub fn highest_at(&self, span: Span) -> Option<&NodePath> {
        self.chain_at(span).first()
    }

    /// True when some constituent covers exactly `span`.
    pub fn has_constituent(&self, span: Span) -> bool {
        !self.chain_at(span).is_empty()
    }

    /// Child spans of the node at `path`, in order.
    pub fn child_spans(&self, path: &[usize]) -> Vec<Span> {
        let mut out = Vec::new();
        let mut child = path.to_vec();
        child.push(0);
        while let Some(&s) = self.span_of.get(&child) {
            out.push(s);
            *child.last_mut().expect("child path is never empty") += 1;
        }
        out
    }
}

/// Walk the tree once and record every node's span.
pub fn build_span_index<L>(tree: &Tree<L>) -> SpanIndex {
    fn walk<L>(
        tree: &Tree<L>,
        path: &mut NodePath,
        start: usize,
        acc: &mut Vec<(NodePath, Span)>,
    ) -> usize {
        match tree {
            Tree::Leaf { .. } => {
                acc.push((path.clone(), Span::new(start, start + 1)));
                start + 1
            }
            Tree::Internal { children, .. } => {
                let slot = acc.len();
                acc.push((path.clone(), Span::new(start, start))); // patched below
                let mut pos = start;
                for (i, c) in children.iter().enumerate() {
                    path.push(i);
                    pos = walk(c, path, pos, acc);
                    path.pop();
                }
                acc[slot].1 = Span::new(start, pos);
                pos
            }
        }
    }

    let mut preorder = Vec::new();
    let mut path = NodePath::new();
    let len = walk(tree, &mut path, 0, &mut preorder);

    let mut span_of = HashMap::with_capacity(preorder.len());
    let mut chains: HashMap<Span, Vec<NodePath>> = HashMap::new();
    // Preorder puts ancestors before descendants, so each chain comes out
    // root to leaf.
    for (p, s) in &preorder {
        span_of.insert(p.clone(), *s);
        chains.entry(*s).or_default().push(p.clone());
    }

    SpanIndex { sentence_len: len, preorder, span_of, chains }
}
