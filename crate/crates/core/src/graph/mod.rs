//! Node- and edge-labelled directed graphs with an ordered port sequence.
//!
//! Nodes are addressed by dense indices, so "renaming" two graphs apart is an
//! index shift and never clashes with user-provided identifiers (those only
//! exist in the gv text formats).

mod gv;
mod iso;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

pub use gv::{emit_gv, parse_gv, GvError};
pub use gv::Pos;
pub(crate) use gv::{build_graph, lex, parse_statements, resolve_ports, Stmt, Token, TokenKind};
pub use iso::{canonical_form, canonical_key, canonical_order, is_isomorphic};
pub(crate) use iso::form_key;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn new(index: usize) -> Self {
        NodeId(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A directed labelled edge. Graphs hold these in a set, so there is at most
/// one edge per `(source, label, target)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub source: NodeId,
    pub label: String,
    pub target: NodeId,
}

/// The type of a graph: its number of ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphType(pub usize);

impl fmt::Display for GraphType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("node {0} occurs more than once in the port sequence")]
    RepeatedPort(NodeId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<String>,
    edges: BTreeSet<Edge>,
    ports: Vec<NodeId>,
}

impl Graph {
    /// The empty graph: no nodes, no edges, no ports.
    pub fn empty() -> Self {
        Graph::default()
    }

    pub fn add_node(&mut self, label: impl Into<String>) -> NodeId {
        self.labels.push(label.into());
        NodeId(self.labels.len() - 1)
    }

    /// Inserts an edge. Returns `false` when the identical edge was already
    /// present.
    ///
    /// # Panics
    ///
    /// Panics if either endpoint is not a node of this graph.
    pub fn add_edge(&mut self, source: NodeId, label: impl Into<String>, target: NodeId) -> bool {
        assert!(self.contains(source), "edge source {source} is not a node");
        assert!(self.contains(target), "edge target {target} is not a node");
        self.edges.insert(Edge {
            source,
            label: label.into(),
            target,
        })
    }

    pub fn set_ports(&mut self, ports: Vec<NodeId>) -> Result<(), GraphError> {
        let mut seen = BTreeSet::new();
        for &p in &ports {
            if !self.contains(p) {
                return Err(GraphError::UnknownNode(p));
            }
            if !seen.insert(p) {
                return Err(GraphError::RepeatedPort(p));
            }
        }
        self.ports = ports;
        Ok(())
    }

    pub fn set_label(&mut self, node: NodeId, label: impl Into<String>) {
        self.labels[node.0] = label.into();
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.labels.len()
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.labels.len()).map(NodeId)
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter()
    }

    pub fn has_edge(&self, source: NodeId, label: &str, target: NodeId) -> bool {
        self.edges.contains(&Edge {
            source,
            label: label.to_owned(),
            target,
        })
    }

    pub fn ports(&self) -> &[NodeId] {
        &self.ports
    }

    pub fn is_port(&self, node: NodeId) -> bool {
        self.ports.contains(&node)
    }

    pub fn graph_type(&self) -> GraphType {
        GraphType(self.ports.len())
    }

    /// Places `other` next to `self`, renaming its nodes apart, and appends
    /// its ports after ours.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let offset = self.labels.len();
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|e| Edge {
            source: NodeId(e.source.0 + offset),
            label: e.label.clone(),
            target: NodeId(e.target.0 + offset),
        }));
        let mut ports = self.ports.clone();
        ports.extend(other.ports.iter().map(|p| NodeId(p.0 + offset)));
        Graph {
            labels,
            edges,
            ports,
        }
    }

    /// Returns a copy whose nodes are renumbered so that old node `v` becomes
    /// `order.position(v)`. `order` must be a permutation of the nodes.
    pub(crate) fn permuted(&self, order: &[NodeId]) -> Graph {
        let mut position = vec![0; order.len()];
        for (i, v) in order.iter().enumerate() {
            position[v.0] = i;
        }
        Graph {
            labels: order.iter().map(|v| self.labels[v.0].clone()).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    source: NodeId(position[e.source.0]),
                    label: e.label.clone(),
                    target: NodeId(position[e.target.0]),
                })
                .collect(),
            ports: self.ports.iter().map(|p| NodeId(position[p.0])).collect(),
        }
    }

    pub fn successors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.source == node)
            .map(|e| e.target)
    }

    pub fn is_acyclic(&self) -> bool {
        let n = self.node_count();
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            indegree[e.target.0] += 1;
            out[e.source.0].push(e.target.0);
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut visited = 0;
        while let Some(v) = queue.pop_front() {
            visited += 1;
            for &w in &out[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        visited == n
    }

    /// Nodes that cannot be reached along directed edges from any port.
    pub fn unreachable_from_ports(&self) -> Vec<NodeId> {
        let n = self.node_count();
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            out[e.source.0].push(e.target.0);
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = self.ports.iter().map(|p| p.0).collect();
        for &p in &stack {
            seen[p] = true;
        }
        while let Some(v) = stack.pop() {
            for &w in &out[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        (0..n).filter(|&v| !seen[v]).map(NodeId).collect()
    }
}

pub fn empty_graph() -> Graph {
    Graph::empty()
}

pub fn type_of(g: &Graph) -> GraphType {
    g.graph_type()
}

pub fn disjoint_union(g: &Graph, h: &Graph) -> Graph {
    g.disjoint_union(h)
}
