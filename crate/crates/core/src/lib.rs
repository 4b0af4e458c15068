//! Graph expansion grammars: weighted regular tree grammars whose trees are
//! evaluated into directed labelled graphs by an algebra of expansion and
//! union operations, plus the tooling to turn them into a graph bank.

pub mod algebra;
pub mod corpus;
pub mod evaluator;
pub mod grammar;
pub mod graph;
pub mod substitution;
