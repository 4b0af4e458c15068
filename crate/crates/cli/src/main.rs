use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, ArgGroup, Parser, ValueEnum};
use geg_core::algebra::ContextMode;
use geg_core::corpus::{run, validate, RunConfig, TreeSource};
use geg_core::evaluator::{EvalConfig, Mode, SizeTarget, DEFAULT_RESULT_CAP};
use geg_core::substitution::{SubstitutionMode, DEFAULT_INSTANTIATION_CAP};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Enumerate,
    Sample,
}

/// Generates a corpus of graphs from a graph expansion grammar.
///
/// Trees come either from a tree file (-t) or as the N best trees of a
/// weighted regular tree grammar (--rtg). Each tree is evaluated with the
/// operations of -g and every resulting graph is written to the output
/// directory as `g<tree>_<variant>.gv`, together with `manifest.json`.
#[derive(Debug, Parser)]
#[command(name = "geg", version)]
#[command(group(ArgGroup::new("source").required(true).args(["trees", "rtg"])))]
struct Cli {
    /// Operation file.
    #[arg(short = 'g', long = "operations", value_name = "FILE")]
    operations: PathBuf,

    /// File of derivation trees, one per line.
    #[arg(short = 't', long = "trees", value_name = "FILE")]
    trees: Option<PathBuf>,

    /// Weighted regular tree grammar to draw the N best trees from.
    #[arg(long = "rtg", value_name = "FILE", requires = "best")]
    rtg: Option<PathBuf>,

    /// Number of best trees to take from the grammar.
    #[arg(short = 'N', long = "best", value_name = "N", requires = "rtg")]
    best: Option<usize>,

    /// Label definition file for instantiating abstract labels.
    #[arg(short = 'd', long = "definitions", value_name = "FILE")]
    definitions: Option<PathBuf>,

    /// Smallest number of nodes an emitted graph may have.
    #[arg(short = 'L', long = "min-nodes", value_name = "N")]
    min_nodes: Option<usize>,

    /// Largest number of nodes an emitted graph may have.
    #[arg(short = 'H', long = "max-nodes", value_name = "N")]
    max_nodes: Option<usize>,

    /// Keep only trees that use this operation at least once.
    #[arg(short = 'k', long = "require", value_name = "OP")]
    require: Option<String>,

    /// Keep every graph of a tree, or draw one at random
    #[arg(long, value_enum, default_value = "sample")]
    mode: ModeArg,

    /// Seed for sample mode
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory
    #[arg(long = "out", value_name = "DIR", default_value = "corpus")]
    out: PathBuf,

    /// Largest intermediate graph set in enumerate mode.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_RESULT_CAP)]
    result_cap: usize,

    /// Largest number of instantiations of a single graph.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_INSTANTIATION_CAP)]
    instantiation_cap: usize,

    /// Apply -L and -H to the number of tree nodes instead of graph nodes.
    #[arg(long)]
    size_on_tree: bool,

    /// Give every occurrence of an abstract label the same replacement.
    #[arg(long)]
    per_label: bool,

    /// Require distinct template context nodes to match distinct nodes.
    #[arg(long)]
    strict_context: bool,

    /// Drop graphs isomorphic to one produced for an earlier tree.
    #[arg(long)]
    dedup: bool,

    /// Evaluate trees in parallel; the output is the same.
    #[arg(long)]
    parallel: bool,

    /// Check the inputs and report problems without generating anything.
    #[arg(long)]
    validate: bool,
}

impl Cli {
    fn config(&self) -> RunConfig {
        let source = match (&self.trees, &self.rtg) {
            (Some(t), _) => TreeSource::Trees(t.clone()),
            (None, Some(g)) => TreeSource::Grammar {
                path: g.clone(),
                best: self.best.unwrap_or(1),
            },
            (None, None) => unreachable!("clap requires a tree source"),
        };
        RunConfig {
            operations: self.operations.clone(),
            source,
            definitions: self.definitions.clone(),
            eval: EvalConfig {
                mode: match self.mode {
                    ModeArg::Enumerate => Mode::Enumerate,
                    ModeArg::Sample => Mode::Sample,
                },
                seed: self.seed,
                result_cap: self.result_cap,
                min_nodes: self.min_nodes,
                max_nodes: self.max_nodes,
                size_target: if self.size_on_tree {
                    SizeTarget::Tree
                } else {
                    SizeTarget::Graph
                },
                required_op: self.require.clone(),
                context_mode: if self.strict_context {
                    ContextMode::Injective
                } else {
                    ContextMode::Permissive
                },
                dedup_across_trees: self.dedup,
                parallel: self.parallel,
            },
            substitution: if self.per_label {
                SubstitutionMode::PerLabel
            } else {
                SubstitutionMode::PerOccurrence
            },
            instantiation_cap: self.instantiation_cap,
            output_dir: self.out.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::FAILURE,
            };
        }
    };
    let cfg = cli.config();

    if cli.validate {
        let report = validate(&cfg);
        for finding in &report.findings {
            println!("{finding}");
        }
        if report.is_clean() {
            println!("no problems found");
        }
        return if report.is_fatal() {
            ExitCode::FAILURE
        } else {
            ExitCode::SUCCESS
        };
    }

    match run(&cfg) {
        Ok(summary) => {
            for w in summary.warnings() {
                eprintln!("warning: {w}");
            }
            println!("wrote {} graphs to {}", summary.files.len(), cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
