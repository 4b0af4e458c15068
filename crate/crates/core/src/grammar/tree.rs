use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::GrammarError;

/// A tree over a ranked alphabet. The rank of a symbol is the number of its
/// children; consistency across a whole tree set is checked by the parsers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DerivationTree {
    symbol: String,
    children: Vec<DerivationTree>,
}

impl DerivationTree {
    pub fn new(symbol: impl Into<String>, children: Vec<DerivationTree>) -> Self {
        DerivationTree {
            symbol: symbol.into(),
            children,
        }
    }

    pub fn leaf(symbol: impl Into<String>) -> Self {
        Self::new(symbol, Vec::new())
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn rank(&self) -> usize {
        self.children.len()
    }

    pub fn children(&self) -> &[DerivationTree] {
        &self.children
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(DerivationTree::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(DerivationTree::depth).max().unwrap_or(0)
    }

    pub fn preorder(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_preorder(&mut out);
        out
    }

    fn collect_preorder<'a>(&'a self, out: &mut Vec<&'a str>) {
        out.push(&self.symbol);
        for c in &self.children {
            c.collect_preorder(out);
        }
    }

    pub fn contains_symbol(&self, symbol: &str) -> bool {
        self.symbol == symbol || self.children.iter().any(|c| c.contains_symbol(symbol))
    }

    /// Visits every node together with its child-index path from the root.
    pub fn for_each_with_path(&self, f: &mut impl FnMut(&DerivationTree, &[usize])) {
        fn walk(t: &DerivationTree, path: &mut Vec<usize>, f: &mut impl FnMut(&DerivationTree, &[usize])) {
            f(t, path);
            for (i, c) in t.children.iter().enumerate() {
                path.push(i);
                walk(c, path, f);
                path.pop();
            }
        }
        walk(self, &mut Vec::new(), f);
    }

    /// Symbol → rank for every symbol in the tree; `Err` names the first
    /// symbol seen with two ranks.
    pub fn ranks(&self) -> Result<HashMap<String, usize>, String> {
        let mut ranks = HashMap::new();
        self.check_ranks(&mut ranks)?;
        Ok(ranks)
    }

    fn check_ranks(&self, ranks: &mut HashMap<String, usize>) -> Result<(), String> {
        match ranks.get(&self.symbol) {
            Some(&r) if r != self.rank() => return Err(self.symbol.clone()),
            Some(_) => {}
            None => {
                ranks.insert(self.symbol.clone(), self.rank());
            }
        }
        self.children.iter().try_for_each(|c| c.check_ranks(ranks))
    }

    /// `op1[op2[op3[op4, op5]]]`
    pub fn to_bracket_string(&self) -> String {
        let mut s = self.symbol.clone();
        if !self.children.is_empty() {
            s.push('[');
            let parts: Vec<String> = self.children.iter().map(|c| c.to_bracket_string()).collect();
            s.push_str(&parts.join(", "));
            s.push(']');
        }
        s
    }
}

/// Functional notation, `op1(op2(op3(op4 op5)))`, as read back by
/// [`parse_tree_file`].
impl fmt::Display for DerivationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn is_symbol_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | '[' | ']' | ',' | '#')
}

struct TreeParser {
    chars: Vec<char>,
    i: usize,
    line: usize,
}

impl TreeParser {
    fn new(src: &str, line: usize) -> Self {
        TreeParser {
            chars: src.chars().collect(),
            i: 0,
            line,
        }
    }

    fn err(&self, message: impl Into<String>) -> GrammarError {
        GrammarError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn skip_space(&mut self) {
        while self.i < self.chars.len() && (self.chars[self.i].is_whitespace() || self.chars[self.i] == ',') {
            self.i += 1;
        }
    }

    fn tree(&mut self) -> Result<DerivationTree, GrammarError> {
        self.skip_space();
        let start = self.i;
        while self.i < self.chars.len() && is_symbol_char(self.chars[self.i]) {
            self.i += 1;
        }
        if start == self.i {
            return Err(self.err(format!("expected a symbol at column {}", self.i + 1)));
        }
        let symbol: String = self.chars[start..self.i].iter().collect();
        let close = match self.chars.get(self.i) {
            Some('(') => ')',
            Some('[') => ']',
            _ => return Ok(DerivationTree::leaf(symbol)),
        };
        self.i += 1;
        let mut children = Vec::new();
        loop {
            self.skip_space();
            match self.chars.get(self.i) {
                Some(&c) if c == close => {
                    self.i += 1;
                    break;
                }
                None => return Err(self.err(format!("missing `{close}` after children of `{symbol}`"))),
                _ => children.push(self.tree()?),
            }
        }
        if children.is_empty() {
            return Err(self.err(format!("`{symbol}` has an empty argument list")));
        }
        Ok(DerivationTree::new(symbol, children))
    }

    fn finish(&mut self) -> Result<(), GrammarError> {
        self.skip_space();
        match self.chars.get(self.i) {
            None | Some('#') => Ok(()),
            Some(c) => Err(self.err(format!("unexpected `{c}` at column {}", self.i + 1))),
        }
    }
}

impl FromStr for DerivationTree {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TreeParser::new(s, 1);
        let t = p.tree()?;
        p.finish()?;
        t.ranks().map_err(|symbol| GrammarError::RankConflict { symbol, line: 1 })?;
        Ok(t)
    }
}

/// One tree per non-empty line, in functional `f(a b)` or bracket `f[a, b]`
/// notation. `//` lines are comments and a trailing `# ...` is ignored, so
/// weighted n-best listings can be fed back in.
pub fn parse_tree_file(text: &str) -> Result<Vec<DerivationTree>, GrammarError> {
    let mut trees = Vec::new();
    let mut ranks: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let mut p = TreeParser::new(line, line_no);
        let t = p.tree()?;
        p.finish()?;
        let local = t
            .ranks()
            .map_err(|symbol| GrammarError::RankConflict { symbol, line: line_no })?;
        for (symbol, rank) in local {
            match ranks.get(&symbol) {
                Some(&r) if r != rank => {
                    return Err(GrammarError::RankConflict { symbol, line: line_no })
                }
                _ => {
                    ranks.insert(symbol, rank);
                }
            }
        }
        trees.push(t);
    }
    Ok(trees)
}
