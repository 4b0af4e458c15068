//! Weighted regular tree grammars.

mod nbest;
mod tree;
mod weight;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use nbest::{n_best_trees, n_best_trees_with_budget, NBest, DEFAULT_EXPANSION_BUDGET};
pub use tree::{parse_tree_file, DerivationTree};
pub use weight::{Weight, WeightParseError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: symbol `{symbol}` is used with two different ranks")]
    RankConflict { symbol: String, line: usize },
    #[error("line {line}: `{symbol}` is used both as a nonterminal and as a terminal")]
    SymbolClash { symbol: String, line: usize },
    #[error("the grammar has no start nonterminal line")]
    MissingStart,
    #[error("requested {0} trees; the count must be at least 1")]
    InvalidCount(usize),
    #[error(
        "n-best extraction gave up after {budget} candidate expansions; \
         nonterminal `{nonterminal}` keeps producing trees that were already found"
    )]
    BudgetExceeded { budget: usize, nonterminal: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankedSymbol {
    pub name: String,
    pub rank: usize,
}

impl fmt::Display for RankedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.rank)
    }
}

/// `lhs -> symbol(rhs...) # weight`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: String,
    pub symbol: RankedSymbol,
    pub rhs: Vec<String>,
    pub weight: Weight,
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.symbol.name)?;
        if !self.rhs.is_empty() {
            write!(f, "({})", self.rhs.join(" "))?;
        }
        write!(f, " # {}", self.weight)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedRtg {
    start: String,
    nonterminals: BTreeSet<String>,
    terminals: BTreeMap<String, usize>,
    productions: Vec<Production>,
}

impl WeightedRtg {
    /// Builds a grammar from productions, checking rank consistency and that
    /// no symbol is both a terminal and a nonterminal.
    pub fn new(start: impl Into<String>, productions: Vec<Production>) -> Result<Self, GrammarError> {
        let start = start.into();
        let mut nonterminals = BTreeSet::from([start.clone()]);
        let mut terminals = BTreeMap::new();
        for (i, p) in productions.iter().enumerate() {
            nonterminals.insert(p.lhs.clone());
            nonterminals.extend(p.rhs.iter().cloned());
            if p.rhs.len() != p.symbol.rank {
                return Err(GrammarError::RankConflict {
                    symbol: p.symbol.name.clone(),
                    line: i + 1,
                });
            }
            match terminals.insert(p.symbol.name.clone(), p.symbol.rank) {
                Some(r) if r != p.symbol.rank => {
                    return Err(GrammarError::RankConflict {
                        symbol: p.symbol.name.clone(),
                        line: i + 1,
                    })
                }
                _ => {}
            }
        }
        if let Some(clash) = terminals.keys().find(|t| nonterminals.contains(*t)) {
            let line = productions
                .iter()
                .position(|p| &p.symbol.name == clash)
                .map_or(0, |i| i + 1);
            return Err(GrammarError::SymbolClash {
                symbol: clash.clone(),
                line,
            });
        }
        Ok(WeightedRtg {
            start,
            nonterminals,
            terminals,
            productions,
        })
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn nonterminals(&self) -> &BTreeSet<String> {
        &self.nonterminals
    }

    /// Terminal name → rank.
    pub fn terminals(&self) -> &BTreeMap<String, usize> {
        &self.terminals
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    /// Nonterminals not reachable from the start nonterminal.
    pub fn unreachable_nonterminals(&self) -> Vec<String> {
        let mut seen = BTreeSet::from([self.start.as_str()]);
        let mut stack = vec![self.start.as_str()];
        while let Some(a) = stack.pop() {
            for p in self.productions.iter().filter(|p| p.lhs == a) {
                for b in &p.rhs {
                    if seen.insert(b.as_str()) {
                        stack.push(b);
                    }
                }
            }
        }
        self.nonterminals
            .iter()
            .filter(|a| !seen.contains(a.as_str()))
            .cloned()
            .collect()
    }

    /// For every nonterminal that derives `t`, the least weight of such a
    /// derivation.
    fn derivation_weights(&self, t: &DerivationTree) -> HashMap<&str, Weight> {
        let children: Vec<HashMap<&str, Weight>> =
            t.children().iter().map(|c| self.derivation_weights(c)).collect();
        let mut out: HashMap<&str, Weight> = HashMap::new();
        for p in &self.productions {
            if p.symbol.name != t.symbol() || p.rhs.len() != t.rank() {
                continue;
            }
            let total: Option<Weight> = p
                .rhs
                .iter()
                .zip(&children)
                .map(|(a, ws)| ws.get(a.as_str()).copied())
                .sum::<Option<Weight>>()
                .map(|w| w + p.weight);
            if let Some(w) = total {
                out.entry(p.lhs.as_str())
                    .and_modify(|best| *best = (*best).min(w))
                    .or_insert(w);
            }
        }
        out
    }
}

/// Membership in the language generated from the start nonterminal.
pub fn language_contains(g: &WeightedRtg, t: &DerivationTree) -> bool {
    min_tree_weight(g, t).is_some()
}

/// The least weight over all derivations of `t` from the start nonterminal,
/// or `None` when `t` is not in the language.
pub fn min_tree_weight(g: &WeightedRtg, t: &DerivationTree) -> Option<Weight> {
    g.derivation_weights(t).get(g.start()).copied()
}

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | ',' | '#')
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_name_char) && !s.contains("->")
}

/// Parses the line-oriented rtg format: the first non-comment line names the
/// start nonterminal, each further line is `A -> f(B C) # w` (weight optional,
/// nullary terminals without parentheses). Lines starting with `//` are
/// comments.
pub fn parse_rtg(text: &str) -> Result<WeightedRtg, GrammarError> {
    let mut start = None;
    let mut productions = Vec::new();
    let mut rank_lines: HashMap<String, (usize, usize)> = HashMap::new();
    let mut lhs_lines: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let syntax = |message: String| GrammarError::Syntax {
            line: line_no,
            message,
        };
        if start.is_none() {
            if line.contains("->") {
                return Err(GrammarError::MissingStart);
            }
            let name = line.split('#').next().unwrap_or("").trim();
            if !valid_name(name) {
                return Err(syntax(format!("`{line}` is not a nonterminal name")));
            }
            start = Some(name.to_owned());
            continue;
        }

        let (rule, weight) = match line.split_once('#') {
            Some((rule, w)) => {
                let w = w.trim();
                let weight = w.parse::<Weight>().map_err(|e| syntax(e.to_string()))?;
                (rule.trim(), weight)
            }
            None => (line, Weight::ZERO),
        };
        let Some((lhs, rhs)) = rule.split_once("->") else {
            return Err(syntax(format!("expected `A -> f(...)`, found `{rule}`")));
        };
        let lhs = lhs.trim();
        let rhs = rhs.trim();
        if !valid_name(lhs) {
            return Err(syntax(format!("`{lhs}` is not a nonterminal name")));
        }
        let (symbol, args) = match rhs.find('(') {
            None => (rhs, Vec::new()),
            Some(open) => {
                let Some(inner) = rhs[open + 1..].strip_suffix(')') else {
                    return Err(syntax(format!("unbalanced parentheses in `{rhs}`")));
                };
                if inner.contains('(') || inner.contains(')') {
                    return Err(syntax(
                        "nested terminals on a right-hand side are not supported".into(),
                    ));
                }
                let args: Vec<String> = inner
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned)
                    .collect();
                if args.is_empty() {
                    return Err(syntax(format!("empty argument list in `{rhs}`")));
                }
                (rhs[..open].trim(), args)
            }
        };
        if !valid_name(symbol) {
            return Err(syntax(format!("`{symbol}` is not a terminal name")));
        }
        if let Some(bad) = args.iter().find(|a| !valid_name(a)) {
            return Err(syntax(format!("`{bad}` is not a nonterminal name")));
        }
        match rank_lines.get(symbol) {
            Some(&(rank, _)) if rank != args.len() => {
                return Err(GrammarError::RankConflict {
                    symbol: symbol.to_owned(),
                    line: line_no,
                })
            }
            Some(_) => {}
            None => {
                rank_lines.insert(symbol.to_owned(), (args.len(), line_no));
            }
        }
        lhs_lines.entry(lhs.to_owned()).or_insert(line_no);
        productions.push((
            line_no,
            Production {
                lhs: lhs.to_owned(),
                symbol: RankedSymbol {
                    name: symbol.to_owned(),
                    rank: args.len(),
                },
                rhs: args,
                weight,
            },
        ));
    }

    let start = start.ok_or(GrammarError::MissingStart)?;
    for (line, p) in &productions {
        let as_nonterminal = p.symbol.name == start
            || lhs_lines.contains_key(&p.symbol.name)
            || productions.iter().any(|(_, q)| q.rhs.contains(&p.symbol.name));
        if as_nonterminal {
            return Err(GrammarError::SymbolClash {
                symbol: p.symbol.name.clone(),
                line: *line,
            });
        }
    }
    WeightedRtg::new(start, productions.into_iter().map(|(_, p)| p).collect())
}
