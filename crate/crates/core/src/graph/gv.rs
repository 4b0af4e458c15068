//! The gv (Graphviz DOT) subset used for graph files and operation bodies.
//!
//! Port sequences ride along either as `port a b c;` statements or as a
//! trailing `// ports: a b c` comment, which renderers ignore.

use std::collections::HashMap;
use std::fmt::{self, Write};

use thiserror::Error;

use super::{canonical_order, Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GvError {
    #[error("{pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: node `{id}` is listed twice in the port sequence")]
    RepeatedPort { pos: Pos, id: String },
    #[error("{pos}: port `{id}` is not a node of the graph")]
    UnknownPort { pos: Pos, id: String },
}

impl GvError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        GvError::Syntax {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokenKind {
    Ident(String),
    Quoted(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Equals,
    Arrow,
    PortsComment(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

impl Token {
    /// Identifier text for bare or quoted ids.
    pub fn id(&self) -> Option<&str> {
        match &self.kind {
            TokenKind::Ident(s) | TokenKind::Quoted(s) => Some(s),
            _ => None,
        }
    }

    pub(crate) fn is_keyword(&self, word: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(s) if s == word)
    }
}

fn is_id_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '\'')
}

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, GvError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && next == Some('/') {
            let start = i + 2;
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            let body: String = chars[start..i].iter().collect();
            if let Some(rest) = body.trim_start().strip_prefix("ports:") {
                let ids = rest.split_whitespace().map(str::to_owned).collect();
                tokens.push(Token {
                    kind: TokenKind::PortsComment(ids),
                    pos,
                });
            }
            continue;
        }
        if c == '/' && next == Some('*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(GvError::syntax(pos, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        if c == '-' && next == Some('>') {
            bump!();
            bump!();
            tokens.push(Token {
                kind: TokenKind::Arrow,
                pos,
            });
            continue;
        }
        let single = match c {
            '{' => Some(TokenKind::LBrace),
            '}' => Some(TokenKind::RBrace),
            '[' => Some(TokenKind::LBracket),
            ']' => Some(TokenKind::RBracket),
            ';' => Some(TokenKind::Semi),
            ',' => Some(TokenKind::Comma),
            '=' => Some(TokenKind::Equals),
            _ => None,
        };
        if let Some(kind) = single {
            bump!();
            tokens.push(Token { kind, pos });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(GvError::syntax(pos, "unterminated string")),
                    Some('"') => {
                        bump!();
                        break;
                    }
                    Some('\\') if matches!(chars.get(i + 1), Some('"') | Some('\\')) => {
                        bump!();
                        s.push(chars[i]);
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            tokens.push(Token {
                kind: TokenKind::Quoted(s),
                pos,
            });
            continue;
        }
        if is_id_char(c) || (c == '-' && next.is_some_and(|n| n.is_ascii_digit() || n == '.')) {
            let mut s = String::new();
            s.push(c);
            bump!();
            while i < chars.len() {
                let ch = chars[i];
                let dash_id = ch == '-' && chars.get(i + 1) != Some(&'>');
                if is_id_char(ch) || dash_id {
                    s.push(ch);
                    bump!();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident(s),
                pos,
            });
            continue;
        }
        return Err(GvError::syntax(pos, format!("unexpected character `{c}`")));
    }
    Ok(tokens)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Stmt {
    Node {
        id: String,
        label: Option<String>,
        pos: Pos,
    },
    Edge {
        source: String,
        target: String,
        label: Option<String>,
        pos: Pos,
    },
    Port {
        ids: Vec<String>,
        pos: Pos,
    },
    Dock {
        ids: Vec<String>,
        pos: Pos,
    },
}

/// Parses gv statements (the inside of a `{ ... }` block).
pub(crate) fn parse_statements(tokens: &[Token]) -> Result<Vec<Stmt>, GvError> {
    let mut stmts = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        match &tok.kind {
            TokenKind::Semi => {
                i += 1;
                continue;
            }
            TokenKind::PortsComment(ids) => {
                stmts.push(Stmt::Port {
                    ids: ids.clone(),
                    pos: tok.pos,
                });
                i += 1;
                continue;
            }
            _ => {}
        }
        let Some(first) = tok.id() else {
            return Err(GvError::syntax(tok.pos, "expected a statement"));
        };
        let follower = tokens.get(i + 1).map(|t| &t.kind);
        let plain_keyword = !matches!(follower, Some(TokenKind::Arrow) | Some(TokenKind::LBracket));

        if plain_keyword && (tok.is_keyword("port") || tok.is_keyword("dock")) {
            let mut ids = Vec::new();
            let mut j = i + 1;
            while let Some(t) = tokens.get(j) {
                if t.pos.line != tok.pos.line {
                    break;
                }
                match t.id() {
                    Some(id) => ids.push(id.to_owned()),
                    None if t.kind == TokenKind::Semi || t.kind == TokenKind::Comma => {}
                    None => return Err(GvError::syntax(t.pos, "expected a node id")),
                }
                j += 1;
                if t.kind == TokenKind::Semi {
                    break;
                }
            }
            stmts.push(if tok.is_keyword("port") {
                Stmt::Port { ids, pos: tok.pos }
            } else {
                Stmt::Dock { ids, pos: tok.pos }
            });
            i = j;
            continue;
        }

        // `graph [..]`, `node [..]`, `edge [..]` and `key = value` carry
        // rendering hints only
        if matches!(follower, Some(TokenKind::Equals)) {
            if tokens.get(i + 2).and_then(Token::id).is_none() {
                return Err(GvError::syntax(tok.pos, "expected a value after `=`"));
            }
            i += 3;
            continue;
        }
        if matches!(follower, Some(TokenKind::LBracket))
            && (tok.is_keyword("graph") || tok.is_keyword("node") || tok.is_keyword("edge"))
            && matches!(tok.kind, TokenKind::Ident(_))
        {
            let (_, next) = parse_attrs(tokens, i + 1)?;
            i = next;
            continue;
        }

        let mut chain = vec![(first.to_owned(), tok.pos)];
        let mut j = i + 1;
        while matches!(tokens.get(j).map(|t| &t.kind), Some(TokenKind::Arrow)) {
            let Some(target) = tokens.get(j + 1) else {
                return Err(GvError::syntax(tokens[j].pos, "edge without a target"));
            };
            let Some(id) = target.id() else {
                return Err(GvError::syntax(target.pos, "expected a node id after `->`"));
            };
            chain.push((id.to_owned(), target.pos));
            j += 2;
        }
        let mut label = None;
        if matches!(tokens.get(j).map(|t| &t.kind), Some(TokenKind::LBracket)) {
            let (attrs, next) = parse_attrs(tokens, j)?;
            label = attrs.into_iter().find(|(k, _)| k == "label").map(|(_, v)| v);
            j = next;
        }
        if chain.len() == 1 {
            stmts.push(Stmt::Node {
                id: chain[0].0.clone(),
                label,
                pos: chain[0].1,
            });
        } else {
            for pair in chain.windows(2) {
                stmts.push(Stmt::Edge {
                    source: pair[0].0.clone(),
                    target: pair[1].0.clone(),
                    label: label.clone(),
                    pos: pair[0].1,
                });
            }
        }
        i = j;
    }
    Ok(stmts)
}

/// Parses `[k=v, k=v; ...]` starting at the `[`; returns the pairs and the
/// index after `]`.
fn parse_attrs(tokens: &[Token], start: usize) -> Result<(Vec<(String, String)>, usize), GvError> {
    let mut attrs = Vec::new();
    let mut i = start + 1;
    loop {
        let Some(tok) = tokens.get(i) else {
            return Err(GvError::syntax(tokens[start].pos, "unclosed attribute list"));
        };
        match &tok.kind {
            TokenKind::RBracket => return Ok((attrs, i + 1)),
            TokenKind::Comma | TokenKind::Semi => i += 1,
            _ => {
                let Some(key) = tok.id() else {
                    return Err(GvError::syntax(tok.pos, "expected an attribute name"));
                };
                if !matches!(tokens.get(i + 1).map(|t| &t.kind), Some(TokenKind::Equals)) {
                    return Err(GvError::syntax(tok.pos, "expected `=` after attribute name"));
                }
                let Some(value) = tokens.get(i + 2).and_then(Token::id) else {
                    return Err(GvError::syntax(tok.pos, "expected an attribute value"));
                };
                attrs.push((key.to_owned(), value.to_owned()));
                i += 3;
            }
        }
    }
}

/// Builds a graph from gv statements. Nodes are numbered in order of first
/// mention; nodes without a `label` attribute are labelled by their id.
/// Edges without a label get the empty label.
pub(crate) fn build_graph(stmts: &[Stmt]) -> Result<(Graph, HashMap<String, NodeId>), GvError> {
    let mut g = Graph::empty();
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut explicit = Vec::new();
    let mut intern = |g: &mut Graph, id: &str| -> NodeId {
        *ids.entry(id.to_owned()).or_insert_with(|| g.add_node(id))
    };
    for stmt in stmts {
        match stmt {
            Stmt::Node { id, label, .. } => {
                let v = intern(&mut g, id);
                if let Some(l) = label {
                    explicit.push((v, l.clone()));
                }
            }
            Stmt::Edge {
                source,
                target,
                label,
                ..
            } => {
                let s = intern(&mut g, source);
                let t = intern(&mut g, target);
                g.add_edge(s, label.clone().unwrap_or_default(), t);
            }
            Stmt::Port { .. } | Stmt::Dock { .. } => {}
        }
    }
    for (v, l) in explicit {
        g.set_label(v, l);
    }
    Ok((g, ids))
}

pub(crate) fn resolve_ports(
    ids: &[String],
    pos: Pos,
    known: &HashMap<String, NodeId>,
) -> Result<Vec<NodeId>, GvError> {
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let Some(&v) = known.get(id) else {
            return Err(GvError::UnknownPort {
                pos,
                id: id.clone(),
            });
        };
        if out.contains(&v) {
            return Err(GvError::RepeatedPort {
                pos,
                id: id.clone(),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Parses a gv digraph into a graph. The port sequence comes from a `port`
/// statement or a `// ports:` comment; without either the graph has type 0.
pub fn parse_gv(text: &str) -> Result<Graph, GvError> {
    let tokens = lex(text)?;
    let mut i = 0;
    if tokens.first().is_some_and(|t| t.is_keyword("strict")) {
        i += 1;
    }
    match tokens.get(i) {
        Some(t) if t.is_keyword("digraph") => i += 1,
        Some(t) => return Err(GvError::syntax(t.pos, "expected `digraph`")),
        None => return Err(GvError::syntax(Pos { line: 1, col: 1 }, "empty input")),
    }
    if tokens.get(i).and_then(Token::id).is_some() {
        i += 1;
    }
    match tokens.get(i) {
        Some(t) if t.kind == TokenKind::LBrace => i += 1,
        Some(t) => return Err(GvError::syntax(t.pos, "expected `{`")),
        None => return Err(GvError::syntax(end_pos(&tokens), "expected `{`")),
    }
    let Some(close) = tokens.iter().rposition(|t| t.kind == TokenKind::RBrace) else {
        return Err(GvError::syntax(end_pos(&tokens), "missing closing `}`"));
    };
    if close < i {
        return Err(GvError::syntax(tokens[close].pos, "unexpected `}`"));
    }
    if let Some(extra) = tokens.get(close + 1) {
        return Err(GvError::syntax(extra.pos, "trailing input after graph"));
    }
    if let Some(bad) = tokens[i..close].iter().find(|t| matches!(t.kind, TokenKind::LBrace | TokenKind::RBrace)) {
        return Err(GvError::syntax(bad.pos, "subgraphs are not supported"));
    }

    let stmts = parse_statements(&tokens[i..close])?;
    if let Some(Stmt::Dock { pos, .. }) = stmts.iter().find(|s| matches!(s, Stmt::Dock { .. })) {
        return Err(GvError::syntax(*pos, "`dock` is only allowed in operation bodies"));
    }
    let (mut g, ids) = build_graph(&stmts)?;
    let mut ports = None;
    for stmt in &stmts {
        if let Stmt::Port { ids: port_ids, pos } = stmt {
            if ports.is_some() {
                return Err(GvError::syntax(*pos, "port sequence given twice"));
            }
            ports = Some(resolve_ports(port_ids, *pos, &ids)?);
        }
    }
    g.set_ports(ports.unwrap_or_default())
        .expect("ports resolved against the graph");
    Ok(g)
}

fn end_pos(tokens: &[Token]) -> Pos {
    tokens.last().map(|t| t.pos).unwrap_or(Pos { line: 1, col: 1 })
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Writes `g` as a gv digraph. Nodes are named `n0, n1, ...` in canonical
/// order (ports first), so isomorphic graphs produce identical text.
pub fn emit_gv(g: &Graph) -> String {
    let order = canonical_order(g);
    let c = g.permuted(&order);
    let mut out = String::from("digraph {\n");
    for v in c.nodes() {
        writeln!(out, "  \"{v}\" [label={}];", quote(c.label(v))).unwrap();
    }
    let mut edges: Vec<_> = c.edges().collect();
    edges.sort_by(|a, b| (a.source, &a.label, a.target).cmp(&(b.source, &b.label, b.target)));
    for e in edges {
        if e.label.is_empty() {
            writeln!(out, "  \"{}\" -> \"{}\";", e.source, e.target).unwrap();
        } else {
            writeln!(out, "  \"{}\" -> \"{}\" [label={}];", e.source, e.target, quote(&e.label)).unwrap();
        }
    }
    out.push_str("  // ports:");
    for p in c.ports() {
        write!(out, " {p}").unwrap();
    }
    out.push_str("\n}\n");
    out
}
