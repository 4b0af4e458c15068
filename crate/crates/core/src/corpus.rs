//! End-to-end corpus generation: trees (from a file or the n best of a
//! grammar) are evaluated, instantiated and written as gv files next to a
//! `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{check_extension, parse_operation_file, Algebra, OperationParseError};
use crate::evaluator::{evaluate_corpus, EvalConfig};
use crate::grammar::{n_best_trees, parse_rtg, parse_tree_file, DerivationTree, GrammarError, Weight, WeightedRtg};
use crate::graph::emit_gv;
use crate::substitution::{
    instantiate, parse_definitions, DefinitionError, DefinitionTable, SubstitutionError, SubstitutionMode,
    DEFAULT_INSTANTIATION_CAP,
};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeSource {
    /// A file of derivation trees, one per line.
    Trees(PathBuf),
    /// The `best` lightest trees of a weighted grammar.
    Grammar { path: PathBuf, best: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub operations: PathBuf,
    pub source: TreeSource,
    pub definitions: Option<PathBuf>,
    pub eval: EvalConfig,
    pub substitution: SubstitutionMode,
    pub instantiation_cap: usize,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(operations: impl Into<PathBuf>, source: TreeSource) -> Self {
        RunConfig {
            operations: operations.into(),
            source,
            definitions: None,
            eval: EvalConfig::default(),
            substitution: SubstitutionMode::default(),
            instantiation_cap: DEFAULT_INSTANTIATION_CAP,
            output_dir: PathBuf::from("corpus"),
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.eval.validate().map_err(|e| RunError::Config(e.to_string()))?;
        if let TreeSource::Grammar { best: 0, .. } = self.source {
            return Err(RunError::Config("the number of best trees must be at least 1".into()));
        }
        if self.instantiation_cap == 0 {
            return Err(RunError::Config("the instantiation cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Grammar { path: PathBuf, source: GrammarError },
    #[error("{}: {source}", path.display())]
    Operations { path: PathBuf, source: OperationParseError },
    #[error("{}: {source}", path.display())]
    Definitions { path: PathBuf, source: DefinitionError },
    #[error("{0}")]
    Config(String),
    #[error("symbols and operations disagree:\n  {}", .0.join("\n  "))]
    Inconsistent(Vec<String>),
    #[error("tree {tree_index}: {source}; raise the instantiation cap or use per-label substitution")]
    Instantiation {
        tree_index: usize,
        source: SubstitutionError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestRecord {
    pub file: String,
    pub tree_index: usize,
    pub tree: String,
    pub weight: Option<String>,
    /// Position of the graph among the tree's evaluation results.
    pub graph_index: usize,
    pub instantiation_index: usize,
    pub nodes: usize,
    pub edges: usize,
}

/// The settings that determine the output. Where the files go and whether
/// evaluation ran in parallel do not, so they are left out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigEcho {
    pub operations: String,
    pub trees: Option<String>,
    pub grammar: Option<String>,
    pub best: Option<usize>,
    pub definitions: Option<String>,
    pub mode: String,
    pub seed: u64,
    pub result_cap: usize,
    pub min_nodes: Option<usize>,
    pub max_nodes: Option<usize>,
    pub size_target: crate::evaluator::SizeTarget,
    pub required_op: Option<String>,
    pub context_mode: crate::algebra::ContextMode,
    pub dedup_across_trees: bool,
    pub substitution: SubstitutionMode,
    pub instantiation_cap: usize,
}

impl ConfigEcho {
    fn of(cfg: &RunConfig) -> Self {
        let show = |p: &Path| p.display().to_string();
        let (trees, grammar, best) = match &cfg.source {
            TreeSource::Trees(p) => (Some(show(p)), None, None),
            TreeSource::Grammar { path, best } => (None, Some(show(path)), Some(*best)),
        };
        ConfigEcho {
            operations: show(&cfg.operations),
            trees,
            grammar,
            best,
            definitions: cfg.definitions.as_deref().map(show),
            mode: cfg.eval.mode.to_string(),
            seed: cfg.eval.seed,
            result_cap: cfg.eval.result_cap,
            min_nodes: cfg.eval.min_nodes,
            max_nodes: cfg.eval.max_nodes,
            size_target: cfg.eval.size_target,
            required_op: cfg.eval.required_op.clone(),
            context_mode: cfg.eval.context_mode,
            dedup_across_trees: cfg.eval.dedup_across_trees,
            substitution: cfg.substitution,
            instantiation_cap: cfg.instantiation_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ConfigEcho,
    pub warnings: Vec<String>,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

impl RunSummary {
    pub fn warnings(&self) -> &[String] {
        &self.manifest.warnings
    }
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_algebra(path: &Path) -> Result<Algebra, RunError> {
    parse_operation_file(&read(path)?).map_err(|source| RunError::Operations {
        path: path.to_owned(),
        source,
    })
}

fn load_grammar(path: &Path) -> Result<WeightedRtg, RunError> {
    parse_rtg(&read(path)?).map_err(|source| RunError::Grammar {
        path: path.to_owned(),
        source,
    })
}

fn load_trees(path: &Path) -> Result<Vec<DerivationTree>, RunError> {
    parse_tree_file(&read(path)?).map_err(|source| RunError::Grammar {
        path: path.to_owned(),
        source,
    })
}

fn load_definitions(path: Option<&Path>) -> Result<DefinitionTable, RunError> {
    match path {
        None => Ok(DefinitionTable::default()),
        Some(p) => parse_definitions(&read(p)?).map_err(|source| RunError::Definitions {
            path: p.to_owned(),
            source,
        }),
    }
}

/// Ranked symbols that have no operation or whose operation takes a
/// different number of arguments.
fn symbol_mismatches(symbols: &BTreeMap<String, usize>, a: &Algebra) -> Vec<String> {
    symbols
        .iter()
        .filter_map(|(name, &rank)| match a.get(name) {
            None => Some(format!("symbol `{name}` (rank {rank}) has no operation")),
            Some(op) if !op.accepts_rank(rank) => Some(format!(
                "symbol `{name}` has rank {rank} but its operation is {op}"
            )),
            Some(_) => None,
        })
        .collect()
}

fn tree_symbols(trees: &[DerivationTree]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for t in trees {
        // the tree file parser has already rejected conflicting ranks
        if let Ok(ranks) = t.ranks() {
            out.extend(ranks);
        }
    }
    out
}

fn clear_previous_output(dir: &Path) -> Result<(), RunError> {
    let entries = fs::read_dir(dir).map_err(|source| RunError::Io {
        path: dir.to_owned(),
        source,
    })?;
    for entry in entries.flatten() {
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name == MANIFEST_FILE || is_corpus_file_name(&name) {
            let path = entry.path();
            fs::remove_file(&path).map_err(|source| RunError::Io { path, source })?;
        }
    }
    Ok(())
}

/// `g<digits>_<digits>.gv`
fn is_corpus_file_name(name: &str) -> bool {
    let Some(stem) = name.strip_prefix('g').and_then(|s| s.strip_suffix(".gv")) else {
        return false;
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    matches!(stem.split_once('_'), Some((t, v)) if digits(t) && digits(v))
}

/// Generates the corpus described by `cfg`. Earlier corpus files in the
/// output directory are replaced.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let algebra = load_algebra(&cfg.operations)?;
    let mut warnings = Vec::new();
    let (trees, weights): (Vec<DerivationTree>, Vec<Option<Weight>>) = match &cfg.source {
        TreeSource::Trees(path) => {
            let trees = load_trees(path)?;
            let mismatches = symbol_mismatches(&tree_symbols(&trees), &algebra);
            if !mismatches.is_empty() {
                return Err(RunError::Inconsistent(mismatches));
            }
            let n = trees.len();
            (trees, vec![None; n])
        }
        TreeSource::Grammar { path, best } => {
            let grammar = load_grammar(path)?;
            let mismatches = symbol_mismatches(grammar.terminals(), &algebra);
            if !mismatches.is_empty() {
                return Err(RunError::Inconsistent(mismatches));
            }
            let nbest = n_best_trees(&grammar, *best).map_err(|source| RunError::Grammar {
                path: path.clone(),
                source,
            })?;
            warnings.extend(nbest.warnings);
            if nbest.trees.len() < *best {
                warnings.push(format!(
                    "the grammar generates only {} distinct trees, fewer than the {best} requested",
                    nbest.trees.len()
                ));
            }
            nbest.trees.into_iter().map(|(t, w)| (t, Some(w))).unzip()
        }
    };
    let definitions = load_definitions(cfg.definitions.as_deref())?;

    let outcomes = evaluate_corpus(&trees, &algebra, &cfg.eval);
    let mut rendered: Vec<(String, String)> = Vec::new();
    let mut records = Vec::new();
    for outcome in &outcomes {
        warnings.extend(outcome.diagnostics.iter().map(ToString::to_string));
        let mut variant = 0;
        for (graph_index, g) in outcome.graphs.iter().enumerate() {
            let instances = instantiate(g, &definitions, cfg.substitution, cfg.instantiation_cap).map_err(
                |source| RunError::Instantiation {
                    tree_index: outcome.tree_index,
                    source,
                },
            )?;
            for (instantiation_index, h) in instances.iter().enumerate() {
                let file = format!("g{}_{}.gv", outcome.tree_index, variant);
                variant += 1;
                records.push(ManifestRecord {
                    file: file.clone(),
                    tree_index: outcome.tree_index,
                    tree: outcome.source_tree.to_string(),
                    weight: weights[outcome.tree_index].map(|w| w.to_string()),
                    graph_index,
                    instantiation_index,
                    nodes: h.node_count(),
                    edges: h.edge_count(),
                });
                rendered.push((file, emit_gv(h)));
            }
        }
    }
    if records.is_empty() && !trees.is_empty() {
        warnings.push("no graphs were generated".into());
    }

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        config: ConfigEcho::of(cfg),
        warnings,
        records,
    };
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    clear_previous_output(dir)?;
    let mut files = Vec::with_capacity(rendered.len());
    for (name, text) in rendered {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        files.push(path);
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest.to_json()).map_err(|source| RunError::Io {
        path: manifest_path,
        source,
    })?;
    Ok(RunSummary { files, manifest })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    /// `run` would refuse these inputs.
    Fatal,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Fatal => "fatal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.severity, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Fatal)
    }

    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, severity: Severity, message: impl Into<String>) {
        self.findings.push(Finding {
            severity,
            message: message.into(),
        });
    }
}

/// Checks the inputs of `cfg` without generating anything.
pub fn validate(cfg: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = cfg.validate() {
        report.push(Severity::Fatal, e.to_string());
    }
    let algebra = match load_algebra(&cfg.operations) {
        Ok(a) => Some(a),
        Err(e) => {
            report.push(Severity::Fatal, e.to_string());
            None
        }
    };
    let symbols = match &cfg.source {
        TreeSource::Trees(path) => match load_trees(path) {
            Ok(trees) => Some(tree_symbols(&trees)),
            Err(e) => {
                report.push(Severity::Fatal, e.to_string());
                None
            }
        },
        TreeSource::Grammar { path, .. } => match load_grammar(path) {
            Ok(g) => {
                for nt in g.unreachable_nonterminals() {
                    report.push(
                        Severity::Warning,
                        format!("nonterminal `{nt}` is unreachable from the start nonterminal"),
                    );
                }
                Some(g.terminals().clone())
            }
            Err(e) => {
                report.push(Severity::Fatal, e.to_string());
                None
            }
        },
    };
    if let Err(e) = load_definitions(cfg.definitions.as_deref()) {
        report.push(Severity::Fatal, e.to_string());
    }
    let Some(algebra) = algebra else {
        return report;
    };
    if let Some(symbols) = symbols {
        for m in symbol_mismatches(&symbols, &algebra) {
            report.push(Severity::Fatal, m);
        }
    }
    for op in algebra.expansions() {
        let ext = check_extension(op);
        if !ext.r1 {
            report.push(
                Severity::Info,
                format!("operation `{}` has an edge that does not run from a new node to an old one", op.name()),
            );
        }
        if !ext.r2 {
            report.push(
                Severity::Info,
                format!("operation `{}` forgets a dock that has no incoming edge", op.name()),
            );
        }
        if ext.is_extension() && !ext.distinct_docks {
            report.push(
                Severity::Info,
                format!(
                    "operation `{}` repeats a dock, so merged ports may still close a cycle",
                    op.name()
                ),
            );
        }
    }
    for (op, label) in unsatisfiable_context_labels(&algebra) {
        report.push(
            Severity::Warning,
            format!("operation `{op}` needs a context node labelled `{label}`, which no operation creates"),
        );
    }
    report
}

/// Context labels of each expansion that no operation can put on a node:
/// only new nodes and explicitly labelled docks introduce labels.
pub fn unsatisfiable_context_labels(a: &Algebra) -> Vec<(String, String)> {
    let mut producible: BTreeSet<&str> = BTreeSet::new();
    for op in a.expansions() {
        let t = op.template();
        for v in t.nodes() {
            if !op.context_nodes().contains(&v) && !op.is_wildcard(v) {
                producible.insert(t.label(v));
            }
        }
    }
    let mut out = BTreeSet::new();
    for op in a.expansions() {
        for &v in op.context_nodes() {
            let label = op.template().label(v);
            if !producible.contains(label) {
                out.insert((op.name().to_owned(), label.to_owned()));
            }
        }
    }
    out.into_iter().collect()
}
