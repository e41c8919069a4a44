//! Syntax-directed machine translation at desk scale.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`graft`]: merge standoff semantic tags (named entities, modality
//!    triggers/targets) into Penn-Treebank-style parse trees, refining node
//!    labels like `NP` into `NP-GPE`.
//! 2. [`extract`]: extract synchronous context-free grammar rules from a
//!    word-aligned parallel corpus whose target side is parsed, labeling
//!    nonterminals from the (optionally grafted) tree.
//! 3. [`decode`]: translate new sentences with a CKY chart decoder over the
//!    extracted grammar, returning k-best derivations.
//! 4. [`bleu`]: score hypotheses against references with corpus-level BLEU.
//!
//! [`treebank`], [`semtags`], and [`corpus`] provide the input formats;
//! [`pipeline`] wires the stages together behind the `treegraft` binary.

pub mod bleu;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod decode;
pub mod extract;
pub mod graft;
pub mod pipeline;
pub mod semtags;
pub mod treebank;

pub use treebank::{Span, Tree};
