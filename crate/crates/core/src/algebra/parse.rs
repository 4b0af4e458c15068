use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{Algebra, ExpansionOperation, Operation, UnionOperation};
use crate::graph::{build_graph, lex, parse_statements, resolve_ports, GvError, NodeId, Pos, Stmt, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperationParseError {
    #[error("{pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: operation `{name}` is defined twice")]
    Duplicate { name: String, pos: Pos },
    #[error("{pos}: `{id}` is not a node of operation `{operation}`")]
    UnknownNode { operation: String, id: String, pos: Pos },
    #[error("{pos}: node `{id}` is listed twice in the ports of operation `{operation}`")]
    RepeatedPort { operation: String, id: String, pos: Pos },
    #[error("{pos}: context node `{id}` of operation `{operation}` needs a label")]
    UnlabelledContext { operation: String, id: String, pos: Pos },
}

fn syntax(pos: Pos, message: impl Into<String>) -> OperationParseError {
    OperationParseError::Syntax {
        pos,
        message: message.into(),
    }
}

fn from_gv(operation: &str, e: GvError) -> OperationParseError {
    match e {
        GvError::Syntax { pos, message } => OperationParseError::Syntax { pos, message },
        GvError::UnknownPort { pos, id } => OperationParseError::UnknownNode {
            operation: operation.to_owned(),
            id,
            pos,
        },
        GvError::RepeatedPort { pos, id } => OperationParseError::RepeatedPort {
            operation: operation.to_owned(),
            id,
            pos,
        },
    }
}

/// Parses a file of `operation NAME { BODY }` blocks.
///
/// A body of two numbers `k k'` is a union of a type-`k` and a type-`k'`
/// graph, the body `empty` is the empty-graph constant, and anything else is
/// an expansion: gv node and edge statements plus `port ...;` and
/// `dock ...;` lines. Unlabelled docks are wildcards; other unlabelled ports
/// are labelled by their id.
pub fn parse_operation_file(text: &str) -> Result<Algebra, OperationParseError> {
    let tokens = lex(text).map_err(|e| from_gv("", e))?;
    let mut algebra = Algebra::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if !tok.is_keyword("operation") {
            return Err(syntax(tok.pos, "expected `operation`"));
        }
        let Some(name) = tokens.get(i + 1).and_then(Token::id) else {
            return Err(syntax(tok.pos, "expected an operation name after `operation`"));
        };
        let name_pos = tokens[i + 1].pos;
        match tokens.get(i + 2) {
            Some(t) if t.kind == TokenKind::LBrace => {}
            Some(t) => return Err(syntax(t.pos, "expected `{`")),
            None => return Err(syntax(name_pos, "expected `{` after the operation name")),
        }
        let body_start = i + 3;
        let close = tokens[body_start..]
            .iter()
            .position(|t| matches!(t.kind, TokenKind::LBrace | TokenKind::RBrace))
            .map(|k| body_start + k);
        let close = match close {
            Some(c) if tokens[c].kind == TokenKind::RBrace => c,
            Some(c) => return Err(syntax(tokens[c].pos, "nested `{` in operation body")),
            None => return Err(syntax(tokens[i + 2].pos, format!("operation `{name}` is not closed"))),
        };
        let op = parse_body(name, &tokens[body_start..close], tokens[i + 2].pos)?;
        if algebra.get(name).is_some() {
            return Err(OperationParseError::Duplicate {
                name: name.to_owned(),
                pos: name_pos,
            });
        }
        algebra
            .insert(name, op)
            .expect("duplicates are rejected above");
        i = close + 1;
    }
    Ok(algebra)
}

fn parse_body(name: &str, body: &[Token], open: Pos) -> Result<Operation, OperationParseError> {
    let words: Vec<&Token> = body.iter().filter(|t| t.kind != TokenKind::Semi).collect();
    if let [w] = words[..] {
        if plain(w) == Some("empty") {
            return Ok(Operation::Empty);
        }
    }
    if let [a, b] = words[..] {
        let numbers = (plain(a).and_then(|s| s.parse().ok()), plain(b).and_then(|s| s.parse().ok()));
        if let (Some(left_arity), Some(right_arity)) = numbers {
            if a.pos.line == b.pos.line {
                return Ok(Operation::Union(UnionOperation {
                    left_arity,
                    right_arity,
                }));
            }
        }
    }
    if body.is_empty() {
        return Err(syntax(open, format!("operation `{name}` has an empty body")));
    }

    let stmts = parse_statements(body).map_err(|e| from_gv(name, e))?;
    let (mut template, ids) = build_graph(&stmts).map_err(|e| from_gv(name, e))?;
    let mut ports: Option<Vec<NodeId>> = None;
    let mut docks: Option<Vec<NodeId>> = None;
    for stmt in &stmts {
        match stmt {
            Stmt::Port { ids: list, pos } => {
                if ports.is_some() {
                    return Err(syntax(*pos, format!("operation `{name}` has two port lines")));
                }
                ports = Some(resolve_ports(list, *pos, &ids).map_err(|e| from_gv(name, e))?);
            }
            Stmt::Dock { ids: list, pos } => {
                if docks.is_some() {
                    return Err(syntax(*pos, format!("operation `{name}` has two dock lines")));
                }
                let resolved = list
                    .iter()
                    .map(|id| {
                        ids.get(id).copied().ok_or_else(|| OperationParseError::UnknownNode {
                            operation: name.to_owned(),
                            id: id.clone(),
                            pos: *pos,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                docks = Some(resolved);
            }
            _ => {}
        }
    }
    let ports = ports.unwrap_or_default();
    let docks = docks.unwrap_or_default();

    let labelled: HashSet<&str> = stmts
        .iter()
        .filter_map(|s| match s {
            Stmt::Node { id, label: Some(_), .. } => Some(id.as_str()),
            _ => None,
        })
        .collect();
    let first_mention: HashMap<&str, Pos> = stmts.iter().rev().flat_map(mentions).collect();
    let mut by_index: Vec<(&str, NodeId)> = ids.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    by_index.sort_by_key(|(_, v)| *v);
    for (id, v) in by_index {
        if labelled.contains(id) {
            continue;
        }
        if docks.contains(&v) {
            template.set_label(v, "");
        } else if !ports.contains(&v) {
            return Err(OperationParseError::UnlabelledContext {
                operation: name.to_owned(),
                id: id.to_owned(),
                pos: first_mention[id],
            });
        }
    }
    template.set_ports(ports).expect("ports resolved against the template");
    let op = ExpansionOperation::new(name, template, docks).map_err(|e| syntax(open, e.to_string()))?;
    Ok(Operation::Expansion(op))
}

fn plain(t: &Token) -> Option<&str> {
    match &t.kind {
        TokenKind::Ident(s) => Some(s),
        _ => None,
    }
}

fn mentions(stmt: &Stmt) -> Vec<(&str, Pos)> {
    match stmt {
        Stmt::Node { id, pos, .. } => vec![(id.as_str(), *pos)],
        Stmt::Edge {
            source, target, pos, ..
        } => vec![(source.as_str(), *pos), (target.as_str(), *pos)],
        Stmt::Port { .. } | Stmt::Dock { .. } => Vec::new(),
    }
}
