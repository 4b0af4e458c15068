//! Bottom-up evaluation of derivation trees into graphs.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{
    apply_expansion, apply_expansion_all_with, context_candidates, Algebra, ContextMode, ExpansionOperation,
    Operation,
};
use crate::grammar::DerivationTree;
use crate::graph::{canonical_form, disjoint_union, form_key, Graph};

pub const DEFAULT_RESULT_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every graph the tree denotes, up to isomorphism.
    Enumerate,
    /// One graph per tree, drawn with a seeded generator.
    #[default]
    Sample,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Enumerate => "enumerate",
            Mode::Sample => "sample",
        })
    }
}

/// What the `min_nodes`/`max_nodes` bounds measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeTarget {
    #[default]
    Graph,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Largest intermediate set enumerate mode may build.
    pub result_cap: usize,
    pub min_nodes: Option<usize>,
    pub max_nodes: Option<usize>,
    pub size_target: SizeTarget,
    /// Only trees using this symbol at least once produce graphs.
    pub required_op: Option<String>,
    pub context_mode: ContextMode,
    /// Drop graphs isomorphic to one emitted for an earlier tree.
    pub dedup_across_trees: bool,
    pub parallel: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: Mode::default(),
            seed: 0,
            result_cap: DEFAULT_RESULT_CAP,
            min_nodes: None,
            max_nodes: None,
            size_target: SizeTarget::default(),
            required_op: None,
            context_mode: ContextMode::default(),
            dedup_across_trees: false,
            parallel: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.result_cap == 0 {
            return Err(EvalError::InvalidConfig("the result cap must be at least 1".into()));
        }
        if let (Some(lo), Some(hi)) = (self.min_nodes, self.max_nodes) {
            if lo > hi {
                return Err(EvalError::InvalidConfig(format!(
                    "minimum size {lo} exceeds maximum size {hi}"
                )));
            }
        }
        Ok(())
    }

    fn size_ok(&self, n: usize) -> bool {
        self.min_nodes.is_none_or(|lo| n >= lo) && self.max_nodes.is_none_or(|hi| n <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("symbol `{0}` has no operation")]
    UnknownSymbol(String),
    #[error("symbol `{symbol}` is used with {rank} children but denotes {operation}")]
    RankMismatch {
        symbol: String,
        rank: usize,
        operation: String,
    },
    #[error("more than {cap} graphs at `{symbol}`; raise the result cap or use sample mode")]
    CapExceeded { cap: usize, symbol: String },
    #[error("{0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    ZeroResults,
    SizeFiltered,
    RequiredOpMissing,
    Duplicate,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub tree_index: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tree {}: {}", self.tree_index, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOutcome {
    pub tree_index: usize,
    pub source_tree: DerivationTree,
    /// Pairwise non-isomorphic, in canonical form.
    pub graphs: Vec<Graph>,
    pub diagnostics: Vec<Diagnostic>,
}

impl EvalOutcome {
    fn empty(tree_index: usize, t: &DerivationTree) -> Self {
        EvalOutcome {
            tree_index,
            source_tree: t.clone(),
            graphs: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn note(&mut self, kind: DiagnosticKind, message: String) {
        self.diagnostics.push(Diagnostic {
            tree_index: self.tree_index,
            kind,
            message,
        });
    }
}

/// Checks that every symbol of `t` names an operation usable at its rank.
pub fn check_tree(t: &DerivationTree, a: &Algebra) -> Result<(), EvalError> {
    let op = a
        .get(t.symbol())
        .ok_or_else(|| EvalError::UnknownSymbol(t.symbol().to_owned()))?;
    if !op.accepts_rank(t.rank()) {
        return Err(EvalError::RankMismatch {
            symbol: t.symbol().to_owned(),
            rank: t.rank(),
            operation: op.to_string(),
        });
    }
    t.children().iter().try_for_each(|c| check_tree(c, a))
}

pub fn evaluate(t: &DerivationTree, a: &Algebra, cfg: &EvalConfig) -> Result<EvalOutcome, EvalError> {
    evaluate_indexed(t, 0, a, cfg)
}

/// Like [`evaluate`]; `tree_index` keys the sampling stream, so a tree draws
/// the same graph wherever it sits in a corpus run with the same index.
pub fn evaluate_indexed(
    t: &DerivationTree,
    tree_index: usize,
    a: &Algebra,
    cfg: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    cfg.validate()?;
    check_tree(t, a)?;
    let mut out = EvalOutcome::empty(tree_index, t);
    if let Some(op) = &cfg.required_op {
        if !t.contains_symbol(op) {
            out.note(
                DiagnosticKind::RequiredOpMissing,
                format!("skipped: `{t}` does not use `{op}`"),
            );
            return Ok(out);
        }
    }
    match cfg.size_target {
        SizeTarget::Tree if !cfg.size_ok(t.size()) => {
            out.note(
                DiagnosticKind::SizeFiltered,
                format!("skipped: tree has {} nodes, outside the size bounds", t.size()),
            );
            return Ok(out);
        }
        SizeTarget::Graph => {
            let (lo, hi) = node_bounds(t, a);
            if cfg.max_nodes.is_some_and(|max| lo > max) || cfg.min_nodes.is_some_and(|min| hi < min) {
                let sizes = if lo == hi {
                    format!("{lo} nodes")
                } else {
                    format!("between {lo} and {hi} nodes")
                };
                out.note(
                    DiagnosticKind::SizeFiltered,
                    format!("skipped: every graph of the tree has {sizes}, outside the size bounds"),
                );
                return Ok(out);
            }
        }
        SizeTarget::Tree => {}
    }

    let mut why_empty = None;
    let graphs = match cfg.mode {
        Mode::Enumerate => enumerate(t, a, cfg, &mut why_empty)?,
        Mode::Sample => {
            let mut path = Vec::new();
            sample(t, a, cfg, tree_index, &mut path, &mut why_empty)
                .into_iter()
                .collect()
        }
    };
    if graphs.is_empty() {
        let reason = why_empty.unwrap_or_else(|| "no admissible context mapping".into());
        out.note(DiagnosticKind::ZeroResults, format!("`{t}` yields no graph: {reason}"));
        return Ok(out);
    }
    let total = graphs.len();
    out.graphs = match cfg.size_target {
        SizeTarget::Graph => graphs.into_iter().filter(|g| cfg.size_ok(g.node_count())).collect(),
        SizeTarget::Tree => graphs,
    };
    if out.graphs.len() < total {
        out.note(
            DiagnosticKind::SizeFiltered,
            format!(
                "{} of {total} graphs fall outside the size bounds",
                total - out.graphs.len()
            ),
        );
    }
    Ok(out)
}

/// Bounds on the node count of every graph `t` can denote: expansions add
/// their new nodes and lose one node per repeated dock entry.
fn node_bounds(t: &DerivationTree, a: &Algebra) -> (usize, usize) {
    let children: Vec<(usize, usize)> = t.children().iter().map(|c| node_bounds(c, a)).collect();
    let lo: usize = children.iter().map(|c| c.0).sum();
    let hi: usize = children.iter().map(|c| c.1).sum();
    match a.get(t.symbol()) {
        Some(Operation::Expansion(op)) => {
            let added = op.new_nodes().len();
            let distinct: HashSet<_> = op.docks().iter().collect();
            let merged = op.docks().len() - distinct.len();
            ((lo + added).saturating_sub(merged), hi + added)
        }
        _ => (lo, hi),
    }
}

fn explain_failure(op: &ExpansionOperation, arg: &Graph) -> String {
    if arg.ports().len() != op.argument_type() {
        return format!(
            "`{}` expects an argument of type {}, got type {}",
            op.name(),
            op.argument_type(),
            arg.ports().len()
        );
    }
    let candidates = context_candidates(op, arg);
    match op.context_nodes().iter().zip(&candidates).find(|(_, c)| c.is_empty()) {
        Some((&u, _)) => format!(
            "`{}` finds no non-port node labelled `{}` for its context",
            op.name(),
            op.template().label(u)
        ),
        None => format!("`{}` has no injective context mapping", op.name()),
    }
}

/// Set-valued evaluation, deduplicated up to isomorphism at every node.
fn enumerate(
    t: &DerivationTree,
    a: &Algebra,
    cfg: &EvalConfig,
    why_empty: &mut Option<String>,
) -> Result<Vec<Graph>, EvalError> {
    let mut children = Vec::with_capacity(t.rank());
    for c in t.children() {
        let set = enumerate(c, a, cfg, why_empty)?;
        if set.is_empty() {
            return Ok(Vec::new());
        }
        children.push(set);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut add = |g: Graph| -> Result<(), EvalError> {
        let form = canonical_form(&g);
        if seen.insert(form_key(&form)) {
            if out.len() == cfg.result_cap {
                return Err(EvalError::CapExceeded {
                    cap: cfg.result_cap,
                    symbol: t.symbol().to_owned(),
                });
            }
            out.push(form);
        }
        Ok(())
    };
    match a.get(t.symbol()).expect("checked by check_tree") {
        Operation::Empty => add(Graph::empty())?,
        Operation::Union(u) => {
            for g in &children[0] {
                for h in &children[1] {
                    if g.ports().len() == u.left_arity && h.ports().len() == u.right_arity {
                        add(disjoint_union(g, h))?;
                    } else if why_empty.is_none() {
                        *why_empty = Some(format!(
                            "`{}` expects types {} and {}, got {} and {}",
                            t.symbol(),
                            u.left_arity,
                            u.right_arity,
                            g.ports().len(),
                            h.ports().len()
                        ));
                    }
                }
            }
        }
        Operation::Expansion(op) => {
            let empty = [Graph::empty()];
            let args: &[Graph] = children.first().map_or(&empty, |c| c.as_slice());
            for arg in args {
                let results = apply_expansion_all_with(op, arg, cfg.context_mode);
                if results.is_empty() && why_empty.is_none() {
                    *why_empty = Some(explain_failure(op, arg));
                }
                for g in results {
                    add(g)?;
                }
            }
        }
    }
    Ok(out)
}

/// One pseudo-random graph for `t`, or `None` when a sampled branch has no
/// admissible continuation.
fn sample(
    t: &DerivationTree,
    a: &Algebra,
    cfg: &EvalConfig,
    tree_index: usize,
    path: &mut Vec<usize>,
    why_empty: &mut Option<String>,
) -> Option<Graph> {
    let mut children = Vec::with_capacity(t.rank());
    for (i, c) in t.children().iter().enumerate() {
        path.push(i);
        let g = sample(c, a, cfg, tree_index, path, why_empty);
        path.pop();
        children.push(g?);
    }
    let result = match a.get(t.symbol()).expect("checked by check_tree") {
        Operation::Empty => Graph::empty(),
        Operation::Union(u) => {
            let (g, h) = (&children[0], &children[1]);
            if g.ports().len() != u.left_arity || h.ports().len() != u.right_arity {
                *why_empty = Some(format!(
                    "`{}` expects types {} and {}, got {} and {}",
                    t.symbol(),
                    u.left_arity,
                    u.right_arity,
                    g.ports().len(),
                    h.ports().len()
                ));
                return None;
            }
            disjoint_union(g, h)
        }
        Operation::Expansion(op) => {
            let arg = children.pop().unwrap_or_default();
            let assignment = draw_assignment(op, &arg, cfg, tree_index, path);
            match assignment.and_then(|asg| apply_expansion(op, &arg, &asg).ok()) {
                Some(g) => g,
                None => {
                    *why_empty = Some(explain_failure(op, &arg));
                    return None;
                }
            }
        }
    };
    Some(canonical_form(&result))
}

fn draw_assignment(
    op: &ExpansionOperation,
    arg: &Graph,
    cfg: &EvalConfig,
    tree_index: usize,
    path: &[usize],
) -> Option<Vec<crate::graph::NodeId>> {
    if arg.ports().len() != op.argument_type() {
        return None;
    }
    let candidates = context_candidates(op, arg);
    let mut chosen = Vec::with_capacity(candidates.len());
    for (k, options) in candidates.iter().enumerate() {
        let options: Vec<_> = match cfg.context_mode {
            ContextMode::Permissive => options.clone(),
            ContextMode::Injective => options.iter().filter(|v| !chosen.contains(*v)).copied().collect(),
        };
        if options.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stream_key(cfg.seed, tree_index, path, k));
        chosen.push(options[rng.gen_range(0..options.len())]);
    }
    Some(chosen)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one context draw, independent of any other draw in the run.
fn stream_key(seed: u64, tree_index: usize, path: &[usize], context_index: usize) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ tree_index as u64);
    for &step in path {
        h = splitmix64(h ^ (step as u64 + 1));
    }
    // separates the path from the context index
    h = splitmix64(h ^ u64::MAX);
    splitmix64(h ^ context_index as u64)
}

/// Evaluates every tree, turning per-tree errors into diagnostics. Outcomes
/// come back in input order whether or not `cfg.parallel` is set.
pub fn evaluate_corpus(trees: &[DerivationTree], a: &Algebra, cfg: &EvalConfig) -> Vec<EvalOutcome> {
    let one = |(i, t): (usize, &DerivationTree)| match evaluate_indexed(t, i, a, cfg) {
        Ok(outcome) => outcome,
        Err(e) => {
            let mut outcome = EvalOutcome::empty(i, t);
            outcome.note(DiagnosticKind::Error, e.to_string());
            outcome
        }
    };
    let mut outcomes: Vec<EvalOutcome> = if cfg.parallel {
        trees.par_iter().enumerate().map(one).collect()
    } else {
        trees.iter().enumerate().map(one).collect()
    };
    if cfg.dedup_across_trees {
        let mut seen = HashSet::new();
        for outcome in &mut outcomes {
            let before = outcome.graphs.len();
            outcome.graphs.retain(|g| seen.insert(form_key(g)));
            let dropped = before - outcome.graphs.len();
            if dropped > 0 {
                outcome.note(
                    DiagnosticKind::Duplicate,
                    format!("{dropped} graphs repeat graphs of earlier trees"),
                );
            }
        }
    }
    outcomes
}
