//! Stage runners behind the CLI: graft, extract, decode, bleu, stats, and
//! the full pipeline. Each stage writes its artifacts into `out_dir`, plus
//! a sibling `<artifact>.manifest.json` carrying the tool version, creation
//! time, a config echo, and stage counts. Timestamps live only in
//! manifests, so rerunning a config yields byte-identical artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use thiserror::Error;

use crate::bleu::{bleu, BleuError};
use crate::config::{ConfigError, PipelineConfig};
use crate::corpus::{collect_bitext, corpus_stats, load_bitext, text_stats, CorpusError};
use crate::decode::{kbest_lines, Decoder, DecoderError};
use crate::extract::{
    extract_rules, read_grammar, score_grammar, write_grammar, GrammarParseError, ScfgRule,
};
use crate::graft::{graft_corpus, GraftError};
use crate::semtags::{parse_standoff, StandoffError};
use crate::treebank::{read_trees, write_trees, TreeFileError};

pub const GRAFTED_TREES: &str = "grafted.trees";
pub const GRAFT_REPORT: &str = "graft_report.tsv";
pub const GRAMMAR: &str = "grammar.txt";
pub const KBEST: &str = "kbest.txt";
pub const HYPOTHESES: &str = "hyp.txt";
pub const BLEU_REPORT: &str = "bleu.txt";
pub const STATS: &str = "stats.txt";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing required input: {flag}")]
    MissingInput { flag: &'static str },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("reference file {path} has {found} lines, hypotheses have {expected}")]
    ReferenceCountMismatch { path: PathBuf, found: usize, expected: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trees(#[from] TreeFileError),
    #[error(transparent)]
    Standoff(#[from] StandoffError),
    #[error(transparent)]
    Graft(#[from] GraftError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    GrammarParse(#[from] GrammarParseError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Bleu(#[from] BleuError),
}

/// What a stage produced: the artifact paths (manifests excluded) and a
/// one-line-per-stage human summary.
#[derive(Debug)]
pub struct StageOutcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl StageOutcome {
    fn merge(&mut self, other: StageOutcome) {
        self.artifacts.extend(other.artifacts);
        if !self.summary.is_empty() {
            self.summary.push('\n');
        }
        self.summary.push_str(&other.summary);
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &'static str) -> Result<&'a Path, PipelineError> {
    path.as_deref().ok_or(PipelineError::MissingInput { flag })
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path)
        .map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

/// Write an artifact and its manifest; creates `out_dir` on first use.
fn write_artifact(
    config: &PipelineConfig,
    path: &Path,
    contents: &str,
    counts: BTreeMap<&'static str, u64>,
) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    fs::write(path, contents).map_err(io_err)?;

    let created_unix =
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let manifest = serde_json::json!({
        "tool": "treegraft",
        "version": env!("CARGO_PKG_VERSION"),
        "created_unix": created_unix,
        "config": config,
        "counts": counts,
    });
    let manifest_path = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text)
        .map_err(|source| PipelineError::Io { path: manifest_path.clone(), source })
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let name = artifact.file_name().unwrap_or_default().to_string_lossy();
    artifact.with_file_name(format!("{name}.manifest.json"))
}

/// Graft standoff tags onto the tree file; writes the grafted trees and a
/// per-case report. An empty tag file reproduces the input trees verbatim
/// (for canonically formatted tree files).
pub fn run_graft(config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let trees_path = require(&config.trees, "--trees")?;
    let tags_path = require(&config.tags, "--tags")?;
    let trees = read_trees(&read(trees_path)?)?;
    let tags = parse_standoff(&read(tags_path)?, config.allow_extra_labels)?;
    let (grafted, report) = graft_corpus(&trees, &tags, config.precedence)?;

    let t = &report.totals;
    let counts = BTreeMap::from([
        ("trees", trees.len() as u64),
        ("tags", t.total() as u64),
        ("exact_graft", t.exact as u64),
        ("split_insert", t.split as u64),
        ("overlay", t.overlay as u64),
        ("crossing_skipped", t.crossing as u64),
        ("no_node_skipped", t.no_node as u64),
        ("invalid_span", t.invalid as u64),
        ("no_parse", t.no_parse as u64),
    ]);
    let trees_out = config.out_dir.join(GRAFTED_TREES);
    let report_out = config.out_dir.join(GRAFT_REPORT);
    write_artifact(config, &trees_out, &write_trees(&grafted), counts.clone())?;
    write_artifact(config, &report_out, &report.to_tsv(), counts)?;

    Ok(StageOutcome {
        artifacts: vec![trees_out, report_out],
        summary: format!(
            "grafted {} tags onto {} trees: {} exact, {} split, {} overlay, {} crossing, {} no-node, {} invalid, {} no-parse",
            t.total(),
            trees.len(),
            t.exact,
            t.split,
            t.overlay,
            t.crossing,
            t.no_node,
            t.invalid,
            t.no_parse
        ),
    })
}

/// Extract and score a grammar from the aligned corpus. In samt+sem mode
/// the graft stage runs first and extraction reads its output, so the
/// grafted trees on disk are exactly the trees the grammar saw.
pub fn run_extract(config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let mut outcome = StageOutcome { artifacts: Vec::new(), summary: String::new() };
    let trees_text = if config.mode.uses_tags() {
        outcome.merge(run_graft(config)?);
        read(&config.out_dir.join(GRAFTED_TREES))?
    } else {
        read(require(&config.trees, "--trees")?)?
    };
    let source_text = read(require(&config.source, "--source")?)?;
    let target_text = read(require(&config.target, "--target")?)?;
    let align_text = read(require(&config.align, "--align")?)?;

    let (pairs, skipped) = collect_bitext(load_bitext(
        Cursor::new(source_text),
        Cursor::new(target_text),
        Cursor::new(align_text),
        Cursor::new(trees_text),
    ))?;

    let extraction = config.extraction_config();
    let instances: Vec<ScfgRule> = pairs
        .par_iter()
        .map(|pair| extract_rules(pair, &extraction))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let instance_count = instances.len();
    let grammar = score_grammar(instances, &extraction);

    let counts = BTreeMap::from([
        ("pairs", pairs.len() as u64),
        ("skipped", skipped.len() as u64),
        ("rule_instances", instance_count as u64),
        ("rules", grammar.rules.len() as u64),
    ]);
    let grammar_out = config.out_dir.join(GRAMMAR);
    write_artifact(config, &grammar_out, &write_grammar(&grammar), counts)?;

    outcome.merge(StageOutcome {
        artifacts: vec![grammar_out],
        summary: format!(
            "extracted {} rules ({} instances) from {} pairs ({} skipped) in {} mode",
            grammar.rules.len(),
            instance_count,
            pairs.len(),
            skipped.len(),
            config.mode.as_str()
        ),
    });
    Ok(outcome)
}

/// Decode the input sentences with a grammar file; writes the k-best list
/// and the one-best hypotheses (a blank line for untranslatable input).
pub fn run_decode(config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let grammar_path = require(&config.grammar, "--grammar")?;
    let input_path = require(&config.input, "--input")?;
    let grammar = read_grammar(&read(grammar_path)?)?;
    let decoder = Decoder::new(&grammar, config.decoder_config(), config.weights.clone())?;

    let sentences: Vec<Vec<String>> = read(input_path)?
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect();
    let outcomes = decoder.decode_corpus(&sentences);

    let mut kbest = String::new();
    let mut hyp = String::new();
    let mut untranslatable = 0u64;
    for (i, outcome) in outcomes.iter().enumerate() {
        kbest.push_str(&kbest_lines(i, outcome));
        match outcome.best() {
            Some(d) => hyp.push_str(&d.target_string()),
            None => untranslatable += 1,
        }
        hyp.push('\n');
    }

    let counts = BTreeMap::from([
        ("sentences", sentences.len() as u64),
        ("translated", sentences.len() as u64 - untranslatable),
        ("untranslatable", untranslatable),
    ]);
    let kbest_out = config.out_dir.join(KBEST);
    let hyp_out = config.out_dir.join(HYPOTHESES);
    write_artifact(config, &kbest_out, &kbest, counts.clone())?;
    write_artifact(config, &hyp_out, &hyp, counts)?;

    Ok(StageOutcome {
        artifacts: vec![kbest_out, hyp_out],
        summary: format!(
            "decoded {} sentences ({} untranslatable) with k={}",
            sentences.len(),
            untranslatable,
            config.k
        ),
    })
}

/// Score a hypothesis file against reference files; writes the report.
pub fn run_bleu(config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let hyp_path = require(&config.hyp, "--hyp")?;
    if config.refs.is_empty() {
        return Err(PipelineError::MissingInput { flag: "--refs" });
    }

    let tokenize = |text: String| -> Vec<Vec<String>> {
        text.lines().map(|l| l.split_whitespace().map(str::to_string).collect()).collect()
    };
    let hypotheses = tokenize(read(hyp_path)?);
    let mut references: Vec<Vec<Vec<String>>> = vec![Vec::new(); hypotheses.len()];
    for ref_path in &config.refs {
        let lines = tokenize(read(ref_path)?);
        if lines.len() != hypotheses.len() {
            return Err(PipelineError::ReferenceCountMismatch {
                path: ref_path.clone(),
                found: lines.len(),
                expected: hypotheses.len(),
            });
        }
        for (slot, line) in references.iter_mut().zip(lines) {
            slot.push(line);
        }
    }

    let report = bleu(&hypotheses, &references, config.lowercase)?;
    let counts = BTreeMap::from([
        ("sentences", hypotheses.len() as u64),
        ("references_per_sentence", config.refs.len() as u64),
        ("bleu_x10000", (report.bleu * 10000.0).round() as u64),
    ]);
    let report_out = config.out_dir.join(BLEU_REPORT);
    write_artifact(config, &report_out, &report.to_string(), counts)?;

    Ok(StageOutcome {
        artifacts: vec![report_out],
        summary: format!(
            "BLEU = {:.4} over {} sentences ({} references each)",
            report.bleu,
            hypotheses.len(),
            config.refs.len()
        ),
    })
}

/// Line/token/type counts for the training text.
pub fn run_stats(config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let source_text = read(require(&config.source, "--source")?)?;
    let target_text = read(require(&config.target, "--target")?)?;
    let stats = text_stats(&source_text, &target_text);

    let counts = BTreeMap::from([
        ("lines", stats.lines as u64),
        ("source_tokens", stats.source_tokens as u64),
        ("source_types", stats.source_types as u64),
        ("target_tokens", stats.target_tokens as u64),
        ("target_types", stats.target_types as u64),
    ]);
    let stats_out = config.out_dir.join(STATS);
    write_artifact(config, &stats_out, &format!("{stats}\n"), counts)?;

    Ok(StageOutcome {
        artifacts: vec![stats_out],
        summary: format!(
            "{} lines, {}/{} source tokens/types, {}/{} target tokens/types",
            stats.lines,
            stats.source_tokens,
            stats.source_types,
            stats.target_tokens,
            stats.target_types
        ),
    })
}

/// All stages in order: (graft +) extract, decode, bleu, stats. The decode
/// stage reads the grammar the extract stage just wrote, and bleu scores
/// the decode stage's one-best file.
pub fn run_pipeline(config: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let mut outcome = run_extract(config)?;

    let mut decode_config = config.clone();
    decode_config.grammar = Some(config.out_dir.join(GRAMMAR));
    outcome.merge(run_decode(&decode_config)?);

    let mut bleu_config = config.clone();
    bleu_config.hyp = Some(config.out_dir.join(HYPOTHESES));
    outcome.merge(run_bleu(&bleu_config)?);

    outcome.merge(run_stats(config)?);
    Ok(outcome)
}

/// Pair-level corpus statistics, exposed for tests and tooling that want
/// the post-filter view rather than the raw-text view.
pub fn run_pair_stats(
    config: &PipelineConfig,
) -> Result<crate::corpus::CorpusStats, PipelineError> {
    let trees_text = read(require(&config.trees, "--trees")?)?;
    let source_text = read(require(&config.source, "--source")?)?;
    let target_text = read(require(&config.target, "--target")?)?;
    let align_text = read(require(&config.align, "--align")?)?;
    let (pairs, _) = collect_bitext(load_bitext(
        Cursor::new(source_text),
        Cursor::new(target_text),
        Cursor::new(align_text),
        Cursor::new(trees_text),
    ))?;
    Ok(corpus_stats(&pairs))
}
