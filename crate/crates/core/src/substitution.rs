//! Replacing abstract node labels by concrete ones.
//!
//! A definition file has one `key: v1, v2, ...` line per abstract label;
//! `//` starts a comment line. Every graph is expanded into all combinations
//! of replacements.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;

pub const DEFAULT_INSTANTIATION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DefinitionError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: `{key}` is defined twice")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: `{key}` has no replacements")]
    EmptyReplacements { key: String, line: usize },
    #[error("`{key}` replaces itself and also occurs in the replacements of `{other}`; definitions are applied once, not chained")]
    Chained { key: String, other: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstitutionError {
    #[error("{product} instantiations exceed the cap of {cap}")]
    CapExceeded { product: u128, cap: usize },
}

/// Abstract label to replacement labels, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefinitionTable {
    entries: Vec<(String, Vec<String>)>,
    index: HashMap<String, usize>,
}

impl DefinitionTable {
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<Self, DefinitionError> {
        let mut index = HashMap::new();
        for (i, (key, values)) in entries.iter().enumerate() {
            if index.insert(key.clone(), i).is_some() {
                return Err(DefinitionError::DuplicateKey {
                    key: key.clone(),
                    line: i + 1,
                });
            }
            if values.is_empty() {
                return Err(DefinitionError::EmptyReplacements {
                    key: key.clone(),
                    line: i + 1,
                });
            }
        }
        let table = DefinitionTable { entries, index };
        table.check_unchained()?;
        Ok(table)
    }

    fn check_unchained(&self) -> Result<(), DefinitionError> {
        for (key, values) in &self.entries {
            if !(values.contains(key) && values.len() > 1) {
                continue;
            }
            if let Some((other, _)) = self
                .entries
                .iter()
                .find(|(other, vs)| other != key && vs.contains(key))
            {
                return Err(DefinitionError::Chained {
                    key: key.clone(),
                    other: other.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&[String]> {
        self.index.get(label).map(|&i| self.entries[i].1.as_slice())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[String])> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn parse_definitions(text: &str) -> Result<DefinitionTable, DefinitionError> {
    let mut entries: Vec<(String, Vec<String>)> = Vec::new();
    let mut lines: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with("//") {
            continue;
        }
        let Some((key, rest)) = content.split_once(':') else {
            return Err(DefinitionError::Syntax {
                line,
                message: "expected `label: replacement, ...`".into(),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(DefinitionError::Syntax {
                line,
                message: "missing label before `:`".into(),
            });
        }
        if lines.insert(key.to_owned(), line).is_some() {
            return Err(DefinitionError::DuplicateKey {
                key: key.to_owned(),
                line,
            });
        }
        let rest = rest.trim();
        if rest.is_empty() {
            return Err(DefinitionError::EmptyReplacements {
                key: key.to_owned(),
                line,
            });
        }
        let values: Vec<String> = rest.split(',').map(|v| v.trim().to_owned()).collect();
        if values.iter().any(String::is_empty) {
            return Err(DefinitionError::Syntax {
                line,
                message: format!("empty replacement in the list for `{key}`"),
            });
        }
        entries.push((key.to_owned(), values));
    }
    DefinitionTable::new(entries)
}

/// How repeated occurrences of an abstract label are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubstitutionMode {
    /// Each node is replaced independently.
    #[default]
    PerOccurrence,
    /// All nodes with the same abstract label get the same replacement.
    PerLabel,
}

/// The replaceable positions of `g`: each is a list of nodes that receive
/// one common replacement, paired with its options.
fn slots<'d>(g: &Graph, d: &'d DefinitionTable, mode: SubstitutionMode) -> Vec<(Vec<usize>, &'d [String])> {
    match mode {
        SubstitutionMode::PerOccurrence => g
            .nodes()
            .filter_map(|v| d.get(g.label(v)).map(|opts| (vec![v.index()], opts)))
            .collect(),
        SubstitutionMode::PerLabel => {
            let mut order: Vec<&str> = Vec::new();
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for v in g.nodes() {
                let l = g.label(v);
                if d.get(l).is_some() {
                    if !groups.contains_key(l) {
                        order.push(l);
                    }
                    groups.entry(l).or_default().push(v.index());
                }
            }
            order
                .into_iter()
                .map(|l| (groups.remove(l).unwrap_or_default(), d.get(l).unwrap_or_default()))
                .collect()
        }
    }
}

/// Number of graphs [`instantiate`] produces, saturating at `u128::MAX`.
pub fn instantiation_count(g: &Graph, d: &DefinitionTable, mode: SubstitutionMode) -> u128 {
    slots(g, d, mode)
        .iter()
        .fold(1u128, |acc, (_, opts)| acc.saturating_mul(opts.len() as u128))
}

/// All instantiations of `g`, replacing each node independently.
pub fn instantiate_all(g: &Graph, d: &DefinitionTable) -> Vec<Graph> {
    instantiate(g, d, SubstitutionMode::PerOccurrence, usize::MAX).expect("no cap")
}

/// All instantiations of `g` in odometer order: nodes in node order, the
/// first varying slowest, replacements in list order. Labels without a
/// definition pass through.
pub fn instantiate(
    g: &Graph,
    d: &DefinitionTable,
    mode: SubstitutionMode,
    cap: usize,
) -> Result<Vec<Graph>, SubstitutionError> {
    let product = instantiation_count(g, d, mode);
    if product > cap as u128 {
        return Err(SubstitutionError::CapExceeded { product, cap });
    }
    let slots = slots(g, d, mode);
    let mut out = Vec::with_capacity(product as usize);
    let mut choice = vec![0usize; slots.len()];
    loop {
        let mut h = g.clone();
        for ((nodes, opts), &c) in slots.iter().zip(&choice) {
            for &v in nodes {
                h.set_label(crate::graph::NodeId::new(v), opts[c].clone());
            }
        }
        out.push(h);
        // advance the odometer, last slot fastest
        let mut k = slots.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < slots[k].1.len() {
                break;
            }
            choice[k] = 0;
        }
    }
}
