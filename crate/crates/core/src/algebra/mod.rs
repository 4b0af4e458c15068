//! The graph expansion algebra: expansion operations, disjoint unions and the
//! empty-graph constant.

mod parse;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{canonical_key, disjoint_union, Graph, NodeId};

pub use parse::{parse_operation_file, OperationParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("operation `{operation}` expects an argument of type {expected}, got type {found}")]
    TypeMismatch {
        operation: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid context assignment for operation `{operation}`: {message}")]
    InvalidAssignment { operation: String, message: String },
    #[error("operation `{operation}`: {message}")]
    Malformed { operation: String, message: String },
    #[error("operation `{0}` is defined twice")]
    DuplicateOperation(String),
}

/// Whether two context nodes may be identified with the same argument node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    #[default]
    Permissive,
    Injective,
}

/// Images of the context nodes, in the order of
/// [`ExpansionOperation::context_nodes`].
pub type Assignment = Vec<NodeId>;

/// A template graph whose ports become the ports of the result and whose dock
/// sequence is fused position by position with the ports of the argument.
///
/// A dock labelled with the empty string is a wildcard: the fused node keeps
/// the label of the argument port. Context nodes always carry a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionOperation {
    name: String,
    template: Graph,
    docks: Vec<NodeId>,
    context: Vec<NodeId>,
}

impl ExpansionOperation {
    /// `template.ports()` is the port sequence of the operation.
    pub fn new(name: impl Into<String>, template: Graph, docks: Vec<NodeId>) -> Result<Self, AlgebraError> {
        let name = name.into();
        let malformed = |message: String| AlgebraError::Malformed {
            operation: name.clone(),
            message,
        };
        if let Some(d) = docks.iter().find(|d| !template.contains(**d)) {
            return Err(malformed(format!("dock {d} is not a template node")));
        }
        let attached: BTreeSet<NodeId> = template.ports().iter().chain(&docks).copied().collect();
        let context: Vec<NodeId> = template.nodes().filter(|v| !attached.contains(v)).collect();
        if let Some(u) = context.iter().find(|u| template.label(**u).is_empty()) {
            return Err(malformed(format!("context node {u} has no label")));
        }
        Ok(ExpansionOperation {
            name,
            template,
            docks,
            context,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn template(&self) -> &Graph {
        &self.template
    }

    pub fn ports(&self) -> &[NodeId] {
        self.template.ports()
    }

    pub fn docks(&self) -> &[NodeId] {
        &self.docks
    }

    /// Template nodes that are neither ports nor docks, in template order.
    pub fn context_nodes(&self) -> &[NodeId] {
        &self.context
    }

    /// Ports that are not docks: the nodes the operation genuinely adds.
    pub fn new_nodes(&self) -> Vec<NodeId> {
        self.ports()
            .iter()
            .filter(|p| !self.docks.contains(p))
            .copied()
            .collect()
    }

    pub fn is_wildcard(&self, node: NodeId) -> bool {
        self.docks.contains(&node) && self.template.label(node).is_empty()
    }

    /// Type the argument must have.
    pub fn argument_type(&self) -> usize {
        self.docks.len()
    }

    pub fn result_type(&self) -> usize {
        self.ports().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnionOperation {
    pub left_arity: usize,
    pub right_arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operation {
    Expansion(ExpansionOperation),
    Union(UnionOperation),
    /// The constant `{φ}`.
    Empty,
}

impl Operation {
    /// Whether a tree symbol with `rank` children can denote this operation.
    /// An expansion without docks is also usable as a constant, applied to the
    /// empty graph.
    pub fn accepts_rank(&self, rank: usize) -> bool {
        match self {
            Operation::Expansion(op) => rank == 1 || (rank == 0 && op.docks.is_empty()),
            Operation::Union(_) => rank == 2,
            Operation::Empty => rank == 0,
        }
    }

    /// The rank a tree symbol most naturally has for this operation.
    pub fn rank(&self) -> usize {
        match self {
            Operation::Expansion(op) if op.docks.is_empty() => 0,
            Operation::Expansion(_) => 1,
            Operation::Union(_) => 2,
            Operation::Empty => 0,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::Expansion(op) => write!(
                f,
                "expansion ({} nodes, {} ports, {} docks)",
                op.template.node_count(),
                op.ports().len(),
                op.docks.len()
            ),
            Operation::Union(u) => write!(f, "union {} {}", u.left_arity, u.right_arity),
            Operation::Empty => f.write_str("empty"),
        }
    }
}

/// Interpretations of the terminal symbols, by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Algebra {
    operations: BTreeMap<String, Operation>,
}

impl Algebra {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, op: Operation) -> Result<(), AlgebraError> {
        let name = name.into();
        if self.operations.contains_key(&name) {
            return Err(AlgebraError::DuplicateOperation(name));
        }
        self.operations.insert(name, op);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Operation> {
        self.operations.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Operation)> + '_ {
        self.operations.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn expansions(&self) -> impl Iterator<Item = &ExpansionOperation> + '_ {
        self.operations.values().filter_map(|op| match op {
            Operation::Expansion(e) => Some(e),
            _ => None,
        })
    }

    pub fn len(&self) -> usize {
        self.operations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operations.is_empty()
    }
}

pub fn context_nodes(op: &ExpansionOperation) -> BTreeSet<NodeId> {
    op.context_nodes().iter().copied().collect()
}

pub fn new_nodes(op: &ExpansionOperation) -> BTreeSet<NodeId> {
    op.new_nodes().into_iter().collect()
}

/// Candidate images of each context node: non-port argument nodes with the
/// same label, in node order.
pub fn context_candidates(op: &ExpansionOperation, arg: &Graph) -> Vec<Vec<NodeId>> {
    op.context_nodes()
        .iter()
        .map(|&u| {
            let label = op.template.label(u);
            arg.nodes()
                .filter(|&v| !arg.is_port(v) && arg.label(v) == label)
                .collect()
        })
        .collect()
}

/// Every admissible assignment of context nodes, first context node varying
/// slowest. Distinct context nodes may share an image.
pub fn enumerate_context_assignments(op: &ExpansionOperation, arg: &Graph) -> Vec<Assignment> {
    enumerate_context_assignments_with(op, arg, ContextMode::Permissive)
}

pub fn enumerate_context_assignments_with(
    op: &ExpansionOperation,
    arg: &Graph,
    mode: ContextMode,
) -> Vec<Assignment> {
    let candidates = context_candidates(op, arg);
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(candidates.len());
    fn extend(
        candidates: &[Vec<NodeId>],
        mode: ContextMode,
        current: &mut Vec<NodeId>,
        out: &mut Vec<Assignment>,
    ) {
        let Some(options) = candidates.get(current.len()) else {
            out.push(current.clone());
            return;
        };
        for &v in options {
            if mode == ContextMode::Injective && current.contains(&v) {
                continue;
            }
            current.push(v);
            extend(candidates, mode, current, out);
            current.pop();
        }
    }
    extend(&candidates, mode, &mut current, &mut out);
    out
}

/// Applies `op` to `arg` with the given context assignment.
///
/// The template is added next to `arg`; the `i`-th dock is fused with the
/// `i`-th argument port (a repeated dock fuses several ports into one node,
/// labelled by the dock or, for a wildcard dock, by the first of those
/// ports); each context node is fused with its image; the ports of the result
/// are the ports of `op`. Argument nodes keep their indices unless they are
/// merged away, and the remaining template nodes follow in template order.
pub fn apply_expansion(op: &ExpansionOperation, arg: &Graph, assignment: &[NodeId]) -> Result<Graph, AlgebraError> {
    if arg.ports().len() != op.docks.len() {
        return Err(AlgebraError::TypeMismatch {
            operation: op.name.clone(),
            expected: op.docks.len(),
            found: arg.ports().len(),
        });
    }
    let invalid = |message: String| AlgebraError::InvalidAssignment {
        operation: op.name.clone(),
        message,
    };
    if assignment.len() != op.context.len() {
        return Err(invalid(format!(
            "{} images for {} context nodes",
            assignment.len(),
            op.context.len()
        )));
    }
    for (&u, &v) in op.context.iter().zip(assignment) {
        if !arg.contains(v) || arg.is_port(v) || arg.label(v) != op.template.label(u) {
            return Err(invalid(format!("{u} cannot be identified with {v}")));
        }
    }

    // argument node -> argument node it is merged into
    let mut rep: Vec<usize> = (0..arg.node_count()).collect();
    // template node -> argument node it is fused with
    let mut fused: Vec<Option<usize>> = vec![None; op.template.node_count()];
    for (&d, &p) in op.docks.iter().zip(arg.ports()) {
        match fused[d.index()] {
            Some(first) => rep[p.index()] = first,
            None => fused[d.index()] = Some(p.index()),
        }
    }
    for (&u, &v) in op.context.iter().zip(assignment) {
        fused[u.index()] = Some(v.index());
    }

    let mut result = Graph::empty();
    let mut arg_new: Vec<Option<NodeId>> = vec![None; arg.node_count()];
    for v in arg.nodes() {
        if rep[v.index()] == v.index() {
            arg_new[v.index()] = Some(result.add_node(arg.label(v)));
        }
    }
    let arg_map = |v: NodeId| arg_new[rep[v.index()]].expect("representatives are kept");
    let mut tmpl_map: Vec<NodeId> = Vec::with_capacity(op.template.node_count());
    for u in op.template.nodes() {
        let label = op.template.label(u);
        let image = match fused[u.index()] {
            Some(v) => {
                let image = arg_new[v].expect("fusion targets are representatives");
                if !label.is_empty() {
                    result.set_label(image, label);
                }
                image
            }
            None => result.add_node(label),
        };
        tmpl_map.push(image);
    }
    for e in arg.edges() {
        result.add_edge(arg_map(e.source), e.label.clone(), arg_map(e.target));
    }
    for e in op.template.edges() {
        result.add_edge(tmpl_map[e.source.index()], e.label.clone(), tmpl_map[e.target.index()]);
    }
    let ports = op.ports().iter().map(|p| tmpl_map[p.index()]).collect();
    result.set_ports(ports).expect("template ports are distinct");
    Ok(result)
}

/// All results of applying `op` to `arg`, one per isomorphism class, in order
/// of first appearance. Empty on a type mismatch.
pub fn apply_expansion_all(op: &ExpansionOperation, arg: &Graph) -> Vec<Graph> {
    apply_expansion_all_with(op, arg, ContextMode::Permissive)
}

pub fn apply_expansion_all_with(op: &ExpansionOperation, arg: &Graph, mode: ContextMode) -> Vec<Graph> {
    if arg.ports().len() != op.docks.len() {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    enumerate_context_assignments_with(op, arg, mode)
        .into_iter()
        .map(|a| apply_expansion(op, arg, &a).expect("enumerated assignments are admissible"))
        .filter(|g| seen.insert(canonical_key(g)))
        .collect()
}

/// `g ⊎ h`, checking both operand types.
pub fn apply_union(name: &str, u: UnionOperation, g: &Graph, h: &Graph) -> Result<Graph, AlgebraError> {
    for (expected, found) in [(u.left_arity, g.ports().len()), (u.right_arity, h.ports().len())] {
        if expected != found {
            return Err(AlgebraError::TypeMismatch {
                operation: name.to_owned(),
                expected,
                found,
            });
        }
    }
    Ok(disjoint_union(g, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtensionReport {
    /// Every template edge runs from a new node to a node that is not new.
    pub r1: bool,
    /// Every dock that is not also a port has an incoming template edge.
    pub r2: bool,
    /// No dock is repeated. Without this, `r1` and `r2` do not keep results
    /// acyclic: merging two argument ports joined by an edge makes a loop.
    pub distinct_docks: bool,
}

impl ExtensionReport {
    pub fn is_extension(self) -> bool {
        self.r1 && self.r2
    }
}

pub fn check_extension(op: &ExpansionOperation) -> ExtensionReport {
    let new: BTreeSet<NodeId> = new_nodes(op);
    let r1 = op
        .template
        .edges()
        .all(|e| new.contains(&e.source) && !new.contains(&e.target));
    let r2 = op
        .docks
        .iter()
        .filter(|d| !op.template.is_port(**d))
        .all(|d| op.template.edges().any(|e| e.target == *d));
    let distinct_docks = op.docks.iter().collect::<BTreeSet<_>>().len() == op.docks.len();
    ExtensionReport { r1, r2, distinct_docks }
}
