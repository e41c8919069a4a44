//! Command-line interface: one binary, one subcommand per stage. Every
//! config-file key is also a flag; flags win over file values.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{PipelineConfig, PipelineMode};
use crate::decode::WeightVector;
use crate::pipeline::{self, PipelineError, StageOutcome};
use crate::semtags::GraftOrder;

#[derive(Debug, Parser)]
#[command(
    name = "treegraft",
    version,
    about = "Graft semantic tags onto parse trees, extract labeled SCFG rules, decode, and score"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graft standoff semantic tags onto parse trees.
    Graft(ConfigArgs),
    /// Extract and score a grammar from the aligned corpus.
    Extract(ConfigArgs),
    /// Decode input sentences with a grammar.
    Decode(ConfigArgs),
    /// Score a hypothesis file against references.
    Bleu(ConfigArgs),
    /// Report corpus line/token/type counts.
    Stats(ConfigArgs),
    /// Run all stages: (graft,) extract, decode, bleu, stats.
    Pipeline(ConfigArgs),
}

fn parse_mode(s: &str) -> Result<PipelineMode, String> {
    PipelineMode::parse(s).ok_or_else(|| "expected hiero, samt, or samt+sem".to_string())
}

fn parse_precedence(s: &str) -> Result<GraftOrder, String> {
    match s {
        "ne-first" => Ok(GraftOrder::NamedEntitiesFirst),
        "modality-first" => Ok(GraftOrder::ModalitiesFirst),
        _ => Err("expected ne-first or modality-first".to_string()),
    }
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Flat key = value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Parse trees, one bracketed tree per line (blank line = no parse).
    #[arg(long)]
    pub trees: Option<PathBuf>,
    /// Standoff tags: sentence, start, end, kind, label (tab-separated).
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Tokenized source sentences, one per line.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Tokenized target sentences, one per line.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Word alignments, `i-j` pairs per line.
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// Sentences to decode, one per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Reference translation file; repeat for multiple references.
    #[arg(long)]
    pub refs: Vec<PathBuf>,
    /// Hypothesis file for the bleu subcommand.
    #[arg(long)]
    pub hyp: Option<PathBuf>,
    /// Grammar file: written by extract, read by decode.
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    /// Directory artifacts are written into.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,

    /// Label mode: hiero, samt, or samt+sem.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PipelineMode>,
    /// Graft order: ne-first or modality-first.
    #[arg(long, value_parser = parse_precedence)]
    pub precedence: Option<GraftOrder>,
    /// Accept tag labels outside the built-in inventories.
    #[arg(long)]
    pub allow_extra_labels: bool,

    /// Longest initial phrase pair, both sides.
    #[arg(long)]
    pub max_phrase_len: Option<usize>,
    /// Most source symbols per rule.
    #[arg(long)]
    pub max_rule_symbols: Option<usize>,
    /// Most nonterminals per rule (up to 2).
    #[arg(long)]
    pub max_nonterminals: Option<usize>,
    /// Allow adjacent nonterminals on rule source sides.
    #[arg(long)]
    pub allow_adjacent_nts: bool,

    /// K-best list size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated name=value weights; word_penalty is a valid name.
    #[arg(long, value_parser = WeightVector::parse)]
    pub weights: Option<WeightVector>,
    /// LHS label of glue derivations.
    #[arg(long)]
    pub goal_label: Option<String>,
    /// Score added per glue application.
    #[arg(long, allow_negative_numbers = true)]
    pub glue_penalty: Option<f64>,
    /// Score added per out-of-vocabulary pass-through.
    #[arg(long, allow_negative_numbers = true)]
    pub oov_penalty: Option<f64>,

    /// Lowercase both sides before BLEU.
    #[arg(long)]
    pub lowercase: bool,
    /// Worker thread cap.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ConfigArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let mut config = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|source| PipelineError::Io { path: path.clone(), source })?;
            config.apply_file(&text)?;
        }

        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    config.$field = Some(v.clone());
                }
            };
        }
        set!(trees);
        set!(tags);
        set!(source);
        set!(target);
        set!(align);
        set!(input);
        set!(hyp);
        set!(grammar);
        if !self.refs.is_empty() {
            config.refs = self.refs.clone();
        }
        if let Some(v) = &self.out_dir {
            config.out_dir = v.clone();
        }
        if let Some(v) = self.mode {
            config.mode = v;
        }
        if let Some(v) = self.precedence {
            config.precedence = v;
        }
        if self.allow_extra_labels {
            config.allow_extra_labels = true;
        }
        if let Some(v) = self.max_phrase_len {
            config.max_phrase_len = v;
        }
        if let Some(v) = self.max_rule_symbols {
            config.max_rule_symbols = v;
        }
        if let Some(v) = self.max_nonterminals {
            config.max_nonterminals = v;
        }
        if self.allow_adjacent_nts {
            config.allow_adjacent_nts = true;
        }
        if let Some(v) = self.k {
            config.k = v;
        }
        if let Some(v) = &self.weights {
            config.weights = v.clone();
        }
        if let Some(v) = &self.goal_label {
            config.goal_label = v.clone();
        }
        if let Some(v) = self.glue_penalty {
            config.glue_penalty = v;
        }
        if let Some(v) = self.oov_penalty {
            config.oov_penalty = v;
        }
        if self.lowercase {
            config.lowercase = true;
        }
        if let Some(v) = self.jobs {
            config.jobs = Some(v);
        }

        config.validate()?;
        Ok(config)
    }
}

/// Parse the process arguments and run the chosen stage.
pub fn run() -> Result<(), PipelineError> {
    run_command(&Cli::parse())
}

pub fn run_command(cli: &Cli) -> Result<(), PipelineError> {
    type Stage = fn(&PipelineConfig) -> Result<StageOutcome, PipelineError>;
    let (args, stage): (&ConfigArgs, Stage) = match &cli.command {
        Command::Graft(a) => (a, pipeline::run_graft),
        Command::Extract(a) => (a, pipeline::run_extract),
        Command::Decode(a) => (a, pipeline::run_decode),
        Command::Bleu(a) => (a, pipeline::run_bleu),
        Command::Stats(a) => (a, pipeline::run_stats),
        Command::Pipeline(a) => (a, pipeline::run_pipeline),
    };
    let config = args.resolve()?;
    if let Some(jobs) = config.jobs {
        // First caller wins; later invocations in the same process reuse
        // the existing pool.
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().ok();
    }
    let outcome = stage(&config)?;
    println!("{}", outcome.summary);
    for artifact in &outcome.artifacts {
        println!("wrote {}", artifact.display());
    }
    Ok(())
}
