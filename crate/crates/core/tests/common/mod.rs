//! Brute-force oracles and random instance generators shared by the
//! integration tests and the acceptance suite. The oracles deliberately avoid
//! the library's own canonical forms, assignment enumeration and n-best
//! search.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use geg_core::algebra::{Algebra, ExpansionOperation, Operation, UnionOperation};
use geg_core::grammar::{DerivationTree, Production, RankedSymbol, Weight, WeightedRtg};
use geg_core::graph::{Graph, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------- fixtures

pub const RUNNING_OPS: &str = r#"
operation op1 {
  0 [label="persuade"]; 1 [label="she"]; 2; 3;
  0 -> 1 [label="arg0"]; 0 -> 2 [label="arg1"]; 0 -> 3 [label="arg2"];
  port 0;
  dock 2 3;
}
operation op2 {
  0 [label="believe"]; 1; 2;
  0 -> 1 [label="arg0"]; 0 -> 2 [label="arg1"];
  port 1 0;
  dock 1 2;
}
operation op3 { 1 1 }
operation op4 { 0 [label="they"]; port 0; }
operation op5 { 0 [label="she"]; port 0; }
"#;

pub const RUNNING_RTG: &str = "S\nS -> op1(C)\nC -> op2(U)\nU -> op3(S' S)\nS' -> op4\nS -> op5\n";

pub const RUNNING_TREE: &str = "op1(op2(op3(op4 op5)))";

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Builds a graph from labels, `(source, label, target)` edges and ports.
pub fn graph(labels: &[&str], edges: &[(usize, &str, usize)], ports: &[usize]) -> Graph {
    let mut g = Graph::empty();
    for l in labels {
        g.add_node(*l);
    }
    for &(s, l, t) in edges {
        g.add_edge(NodeId::new(s), l, NodeId::new(t));
    }
    g.set_ports(ports.iter().map(|&p| NodeId::new(p)).collect()).unwrap();
    g
}

/// The graph the running example evaluates to.
pub fn running_example_graph() -> Graph {
    graph(
        &["persuade", "believe", "she", "they"],
        &[
            (0, "arg0", 2),
            (0, "arg1", 3),
            (0, "arg2", 1),
            (1, "arg0", 3),
            (1, "arg1", 2),
        ],
        &[0],
    )
}

/// An expansion with wildcard docks, a repeated dock and two context nodes,
/// and an argument graph in which the context nodes have several images.
pub fn stacking_example() -> (ExpansionOperation, Graph) {
    // x1 x2 x3 y1 y2 y3 y4
    let t = graph(
        &["b", "a", "b", "", "c", "b", ""],
        &[(0, "e", 1), (0, "e", 3), (0, "e", 4), (1, "e", 4), (1, "e", 5), (1, "e", 6)],
        &[0, 1, 6, 2],
    );
    let docks = vec![NodeId::new(3), NodeId::new(6), NodeId::new(6)];
    let op = ExpansionOperation::new("phi", t, docks).unwrap();
    // z1 u2 z2 | u1 v1 v2 v3 w1 w2 w3
    let g = graph(
        &["c", "b", "a", "c", "a", "c", "c", "b", "b", "a"],
        &[
            (0, "e", 3),
            (2, "e", 6),
            (3, "e", 4),
            (3, "e", 5),
            (1, "e", 7),
            (5, "e", 7),
            (5, "e", 8),
            (6, "e", 8),
            (6, "e", 9),
        ],
        &[0, 1, 2],
    );
    (op, g)
}

/// Node indices of the argument of [`stacking_example`] by name.
pub fn stacking_node(name: &str) -> NodeId {
    let names = ["z1", "u2", "z2", "u1", "v1", "v2", "v3", "w1", "w2", "w3"];
    NodeId::new(names.iter().position(|n| *n == name).expect("known node"))
}

// ------------------------------------------------------------ isomorphism

type EdgeSet = HashSet<(usize, String, usize)>;

fn edge_set(g: &Graph) -> EdgeSet {
    g.edges()
        .map(|e| (e.source.index(), e.label.clone(), e.target.index()))
        .collect()
}

/// Searches all label-preserving bijections that map ports positionally.
pub fn brute_isomorphic(g: &Graph, h: &Graph) -> bool {
    if g.node_count() != h.node_count() || g.edge_count() != h.edge_count() || g.ports().len() != h.ports().len() {
        return false;
    }
    let mut lg: Vec<&str> = g.labels().iter().map(String::as_str).collect();
    let mut lh: Vec<&str> = h.labels().iter().map(String::as_str).collect();
    lg.sort_unstable();
    lh.sort_unstable();
    if lg != lh {
        return false;
    }
    let n = g.node_count();
    let mut map: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    for (p, q) in g.ports().iter().zip(h.ports()) {
        if g.label(*p) != h.label(*q) {
            return false;
        }
        map[p.index()] = Some(q.index());
        used[q.index()] = true;
    }
    let he = edge_set(h);
    let ge: Vec<(usize, String, usize)> = edge_set(g).into_iter().collect();
    let ok_so_far = |map: &[Option<usize>]| {
        ge.iter().all(|(s, l, t)| match (map[*s], map[*t]) {
            (Some(a), Some(b)) => he.contains(&(a, l.clone(), b)),
            _ => true,
        })
    };
    if !ok_so_far(&map) {
        return false;
    }
    let free: Vec<usize> = (0..n).filter(|&v| map[v].is_none()).collect();
    fn search(
        k: usize,
        free: &[usize],
        g: &Graph,
        h: &Graph,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        ok: &dyn Fn(&[Option<usize>]) -> bool,
    ) -> bool {
        let Some(&v) = free.get(k) else {
            return true;
        };
        for w in 0..h.node_count() {
            if used[w] || h.label(NodeId::new(w)) != g.label(NodeId::new(v)) {
                continue;
            }
            map[v] = Some(w);
            used[w] = true;
            if ok(map) && search(k + 1, free, g, h, map, used, ok) {
                return true;
            }
            map[v] = None;
            used[w] = false;
        }
        false
    }
    search(0, &free, g, h, &mut map, &mut used, &ok_so_far)
}

/// Keeps the first graph of every isomorphism class.
pub fn brute_dedup(graphs: Vec<Graph>) -> Vec<Graph> {
    let mut out: Vec<Graph> = Vec::new();
    for g in graphs {
        if !out.iter().any(|h| brute_isomorphic(&g, h)) {
            out.push(g);
        }
    }
    out
}

/// Whether `a` and `b` contain the same isomorphism classes, with `b`
/// holding exactly one graph per class.
pub fn same_classes(a: &[Graph], b: &[Graph]) -> Result<(), String> {
    for (i, g) in b.iter().enumerate() {
        if b[..i].iter().any(|h| brute_isomorphic(g, h)) {
            return Err(format!("result {i} repeats an earlier result"));
        }
        if !a.iter().any(|h| brute_isomorphic(g, h)) {
            return Err(format!("result {i} is not produced by the oracle"));
        }
    }
    for (i, g) in a.iter().enumerate() {
        if !b.iter().any(|h| brute_isomorphic(g, h)) {
            return Err(format!("oracle graph {i} is missing from the result"));
        }
    }
    Ok(())
}

// ------------------------------------------------------- expansion oracle

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Applies `op` by gluing: the template is laid next to `arg`, the listed
/// pairs are identified, and the quotient is taken.
pub fn oracle_apply(op: &ExpansionOperation, arg: &Graph, assignment: &[NodeId]) -> Graph {
    let t = op.template();
    let n_arg = arg.node_count();
    let n = n_arg + t.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    // the smaller index, so the argument side, represents a class
    fn glue(a: usize, b: usize, parent: &mut [usize]) {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    for (d, p) in op.docks().iter().zip(arg.ports()) {
        glue(p.index(), n_arg + d.index(), &mut parent);
    }
    for (c, v) in op.context_nodes().iter().zip(assignment) {
        glue(v.index(), n_arg + c.index(), &mut parent);
    }
    let mut class_of = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for x in 0..n {
        let r = find(&mut parent, x);
        if class_of[r] == usize::MAX {
            class_of[r] = reps.len();
            reps.push(r);
        }
        class_of[x] = class_of[r];
    }
    // label: an explicit template label wins, otherwise the argument label
    // of the earliest port in the class
    let mut labels: Vec<Option<String>> = vec![None; reps.len()];
    for u in t.nodes() {
        if !t.label(u).is_empty() {
            labels[class_of[n_arg + u.index()]] = Some(t.label(u).to_owned());
        }
    }
    for p in arg.ports() {
        let c = class_of[p.index()];
        labels[c].get_or_insert_with(|| arg.label(*p).to_owned());
    }
    for v in arg.nodes() {
        let c = class_of[v.index()];
        labels[c].get_or_insert_with(|| arg.label(v).to_owned());
    }
    let mut g = Graph::empty();
    for l in &labels {
        g.add_node(l.clone().unwrap_or_default());
    }
    for e in arg.edges() {
        g.add_edge(
            NodeId::new(class_of[e.source.index()]),
            e.label.clone(),
            NodeId::new(class_of[e.target.index()]),
        );
    }
    for e in t.edges() {
        g.add_edge(
            NodeId::new(class_of[n_arg + e.source.index()]),
            e.label.clone(),
            NodeId::new(class_of[n_arg + e.target.index()]),
        );
    }
    g.set_ports(op.ports().iter().map(|p| NodeId::new(class_of[n_arg + p.index()])).collect())
        .unwrap();
    g
}

/// Every map from context nodes to same-labelled non-port argument nodes.
pub fn oracle_assignments(op: &ExpansionOperation, arg: &Graph, injective: bool) -> Vec<Vec<NodeId>> {
    let t = op.template();
    let mut out = vec![Vec::new()];
    for &c in op.context_nodes() {
        let mut next = Vec::new();
        for partial in &out {
            for v in 0..arg.node_count() {
                let v = NodeId::new(v);
                if arg.is_port(v) || arg.label(v) != t.label(c) || (injective && partial.contains(&v)) {
                    continue;
                }
                let mut a: Vec<NodeId> = partial.clone();
                a.push(v);
                next.push(a);
            }
        }
        out = next;
    }
    out
}

fn oracle_union(g: &Graph, h: &Graph) -> Graph {
    let mut u = g.clone();
    let offset = g.node_count();
    for v in h.nodes() {
        u.add_node(h.label(v));
    }
    for e in h.edges() {
        u.add_edge(
            NodeId::new(offset + e.source.index()),
            e.label.clone(),
            NodeId::new(offset + e.target.index()),
        );
    }
    let mut ports = g.ports().to_vec();
    ports.extend(h.ports().iter().map(|p| NodeId::new(offset + p.index())));
    u.set_ports(ports).unwrap();
    u
}

/// Evaluates `t` straight from the definition, keeping every result with
/// no deduplication at any level.
pub fn oracle_evaluate(t: &DerivationTree, a: &Algebra, injective: bool) -> Vec<Graph> {
    let args: Vec<Vec<Graph>> = t.children().iter().map(|c| oracle_evaluate(c, a, injective)).collect();
    match a.get(t.symbol()).expect("symbol has an operation") {
        Operation::Empty => vec![Graph::empty()],
        Operation::Union(UnionOperation {
            left_arity,
            right_arity,
        }) => {
            let mut out = Vec::new();
            for g in &args[0] {
                for h in &args[1] {
                    if g.ports().len() == *left_arity && h.ports().len() == *right_arity {
                        out.push(oracle_union(g, h));
                    }
                }
            }
            out
        }
        Operation::Expansion(op) => {
            let inputs = if args.is_empty() { vec![Graph::empty()] } else { args[0].clone() };
            let mut out = Vec::new();
            for g in &inputs {
                if g.ports().len() != op.docks().len() {
                    continue;
                }
                for asg in oracle_assignments(op, g, injective) {
                    out.push(oracle_apply(op, g, &asg));
                }
            }
            out
        }
    }
}

/// Acyclicity by repeatedly removing nodes without incoming edges.
pub fn oracle_acyclic(g: &Graph) -> bool {
    let n = g.node_count();
    let mut indeg = vec![0usize; n];
    for e in g.edges() {
        indeg[e.target.index()] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut removed = 0;
    while let Some(v) = stack.pop() {
        removed += 1;
        for e in g.edges().filter(|e| e.source.index() == v) {
            indeg[e.target.index()] -= 1;
            if indeg[e.target.index()] == 0 {
                stack.push(e.target.index());
            }
        }
    }
    removed == n
}

pub fn oracle_all_reachable_from_ports(g: &Graph) -> bool {
    let mut seen = vec![false; g.node_count()];
    let mut stack: Vec<usize> = g.ports().iter().map(|p| p.index()).collect();
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(g.edges().filter(|e| e.source.index() == v).map(|e| e.target.index()));
    }
    seen.into_iter().all(|s| s)
}

// ---------------------------------------------------------- grammar oracle

pub type TreeKey = (u64, usize, Vec<String>);

pub fn tree_key(t: &DerivationTree, w: u64) -> TreeKey {
    fn pre(t: &DerivationTree, out: &mut Vec<String>) {
        out.push(t.symbol().to_owned());
        for c in t.children() {
            pre(c, out);
        }
    }
    let mut p = Vec::new();
    pre(t, &mut p);
    (w, p.len(), p)
}

fn weight_u64(w: Weight) -> u64 {
    w.to_string().parse().expect("integer weights")
}

type Pool = HashMap<DerivationTree, (u64, usize)>;

/// All trees of depth at most `depth` and at most `max_size` nodes
/// derivable from each nonterminal, with their least derivation weight.
/// `None` once any set would exceed `limit`.
pub fn bounded_trees(g: &WeightedRtg, depth: usize, max_size: usize, limit: usize) -> Option<HashMap<String, Pool>> {
    let empty = || -> HashMap<String, Pool> { g.nonterminals().iter().map(|a| (a.clone(), Pool::new())).collect() };
    let mut level = empty();
    for _ in 0..depth {
        let mut next = empty();
        for p in g.productions() {
            let base = weight_u64(p.weight);
            // partial combinations: children so far, weight, size
            let mut partial: Vec<(Vec<DerivationTree>, u64, usize)> = vec![(Vec::new(), base, 1)];
            for b in &p.rhs {
                let mut grown = Vec::new();
                for (kids, w, s) in &partial {
                    for (t, (tw, ts)) in &level[b] {
                        if s + ts > max_size {
                            continue;
                        }
                        let mut kids = kids.clone();
                        kids.push(t.clone());
                        grown.push((kids, w + tw, s + ts));
                        if grown.len() > limit {
                            return None;
                        }
                    }
                }
                partial = grown;
            }
            let slot = next.get_mut(&p.lhs).unwrap();
            for (kids, w, s) in partial {
                let t = DerivationTree::new(p.symbol.name.clone(), kids);
                let entry = slot.entry(t).or_insert((w, s));
                entry.0 = entry.0.min(w);
            }
            if slot.len() > limit {
                return None;
            }
        }
        level = next;
    }
    Some(level)
}

/// Least weight of any derivation from each nonterminal.
pub fn min_weights(g: &WeightedRtg) -> HashMap<String, Option<u64>> {
    let mut m: HashMap<String, Option<u64>> = g.nonterminals().iter().map(|a| (a.clone(), None)).collect();
    loop {
        let mut changed = false;
        for p in g.productions() {
            let mut w = Some(weight_u64(p.weight));
            for b in &p.rhs {
                w = w.zip(m[b]).map(|(x, y)| x + y);
            }
            if let Some(w) = w {
                if m[&p.lhs].is_none_or(|old| w < old) {
                    m.insert(p.lhs.clone(), Some(w));
                    changed = true;
                }
            }
        }
        if !changed {
            return m;
        }
    }
}

/// Least weight of a tree derivable from `start` with depth at least
/// `depth`.
pub fn min_weight_at_depth(g: &WeightedRtg, start: &str, depth: usize) -> Option<u64> {
    let mw = min_weights(g);
    let mut at: HashMap<String, Option<u64>> = mw.clone();
    for _ in 1..depth {
        let mut next: HashMap<String, Option<u64>> = g.nonterminals().iter().map(|a| (a.clone(), None)).collect();
        for p in g.productions() {
            let base = weight_u64(p.weight);
            for i in 0..p.rhs.len() {
                let mut w = Some(base);
                for (j, b) in p.rhs.iter().enumerate() {
                    let part = if i == j { at[b] } else { mw[b] };
                    w = w.zip(part).map(|(x, y)| x + y);
                }
                if let Some(w) = w {
                    let slot = next.get_mut(&p.lhs).unwrap();
                    if slot.is_none_or(|old| w < old) {
                        *slot = Some(w);
                    }
                }
            }
        }
        at = next;
    }
    at[start]
}

/// Least weight of a tree derivable from `start` with at least `size` nodes.
pub fn min_weight_at_size(g: &WeightedRtg, start: &str, size: usize) -> Option<u64> {
    let mw = min_weights(g);
    // at[n][A]: least weight of a tree from A with at least n nodes
    let mut at: Vec<HashMap<String, Option<u64>>> = vec![mw.clone(), mw.clone()];
    for n in 2..=size {
        let mut row: HashMap<String, Option<u64>> = g.nonterminals().iter().map(|a| (a.clone(), None)).collect();
        for p in g.productions() {
            if p.rhs.is_empty() {
                continue;
            }
            // distribute the n - 1 nodes below the root over the children
            let mut best: HashMap<usize, Option<u64>> = HashMap::from([(0, Some(weight_u64(p.weight)))]);
            for b in &p.rhs {
                let mut next: HashMap<usize, Option<u64>> = HashMap::new();
                for (&used, &w) in &best {
                    for (take, row) in at.iter().enumerate().take(n - used) {
                        let part = row[b];
                        let total = used + take;
                        let cand = w.zip(part).map(|(x, y)| x + y);
                        let slot = next.entry(total).or_insert(None);
                        if let Some(c) = cand {
                            if slot.is_none_or(|old| c < old) {
                                *slot = Some(c);
                            }
                        }
                    }
                }
                best = next;
            }
            if let Some(Some(w)) = best.get(&(n - 1)) {
                let slot = row.get_mut(&p.lhs).unwrap();
                if slot.is_none_or(|old| *w < old) {
                    *slot = Some(*w);
                }
            }
        }
        at.push(row);
    }
    at[size][start]
}

/// Least weight of deriving exactly `t` from `a`.
pub fn oracle_tree_weight(g: &WeightedRtg, a: &str, t: &DerivationTree) -> Option<u64> {
    g.productions()
        .iter()
        .filter(|p| p.lhs == a && p.symbol.name == t.symbol() && p.rhs.len() == t.children().len())
        .filter_map(|p| {
            let mut w = weight_u64(p.weight);
            for (b, c) in p.rhs.iter().zip(t.children()) {
                w += oracle_tree_weight(g, b, c)?;
            }
            Some(w)
        })
        .min()
}

/// How much of an n-best list the enumeration could vouch for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NBestCoverage {
    /// Leading entries whose order and content the enumeration fixes.
    pub certain: usize,
    pub listed: usize,
    /// Size bound the enumeration ended with.
    pub max_size: usize,
}

/// Checks an n-best list against exhaustive enumeration of the trees of
/// depth at most `depth`.
///
/// The enumeration is also bounded in tree size, growing the bound until
/// the first `n` keys are settled. A tree outside the enumeration has a key
/// no smaller than (least weight at depth > `depth`, `depth` + 1) or (least
/// weight at size > bound, bound + 1), so every enumerated tree below both
/// is compared position by position. Listed trees beyond that point are
/// checked for membership, weight and order on their own.
pub fn check_n_best(g: &WeightedRtg, n: usize, got: &[(DerivationTree, Weight)], depth: usize) -> Result<NBestCoverage, String> {
    let got_keys: Vec<TreeKey> = got.iter().map(|(t, w)| tree_key(t, weight_u64(*w))).collect();
    for pair in got_keys.windows(2) {
        if pair[0] >= pair[1] {
            return Err(format!("output is not strictly increasing at {:?}", pair[1].2));
        }
    }
    for (t, w) in got {
        let real = oracle_tree_weight(g, g.start(), t);
        if real != Some(weight_u64(*w)) {
            return Err(format!("{t} has weight {w} but derives with {real:?}"));
        }
    }
    let deeper = min_weight_at_depth(g, g.start(), depth + 1).map(|w| (w, depth + 1));

    let mut max_size = depth + 1;
    let mut last_good = None;
    while let Some(levels) = bounded_trees(g, depth, max_size, 200_000) {
        let larger = min_weight_at_size(g, g.start(), max_size + 1).map(|w| (w, max_size + 1));
        let bound = match (deeper, larger) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let mut enumerated: Vec<(TreeKey, DerivationTree)> = levels[g.start()]
            .iter()
            .map(|(t, (w, _))| (tree_key(t, *w), t.clone()))
            .collect();
        enumerated.sort_by(|a, b| a.0.cmp(&b.0));
        let certain = enumerated
            .iter()
            .filter(|(k, _)| bound.is_none_or(|b| (k.0, k.1) < b))
            .count()
            .min(n);
        let depth_limited = deeper.is_some_and(|d| larger.is_none_or(|l| d <= l));
        last_good = Some((enumerated, bound, certain));
        if certain == n || bound.is_none() || depth_limited || max_size >= 4 * depth {
            break;
        }
        max_size += 1;
    }
    let Some((enumerated, bound, certain)) = last_good else {
        return Err("enumeration too large even at the smallest size bound".into());
    };

    for (i, (k, t)) in enumerated.iter().take(certain).enumerate() {
        match got.get(i) {
            Some((gt, _)) if gt == t && got_keys[i] == *k => {}
            Some((gt, gw)) => return Err(format!("position {i}: expected {t} ({}), got {gt} ({gw})", k.0)),
            None => return Err(format!("position {i}: expected {t}, got nothing")),
        }
    }
    for ((t, _), k) in got.iter().zip(&got_keys) {
        let inside = t.depth() <= depth && t.size() <= max_size;
        if inside && !enumerated.iter().any(|(ek, et)| et == t && ek == k) {
            return Err(format!("{t} is missing from the enumeration"));
        }
    }
    if got.len() < n {
        // the list claims the language is exhausted
        if bound.is_some() {
            return Err(format!("only {} trees, but larger trees exist", got.len()));
        }
        if got.len() != enumerated.len() {
            return Err(format!("{} trees listed, {} exist", got.len(), enumerated.len()));
        }
    } else if let Some(last) = got_keys.last() {
        for (k, t) in &enumerated {
            if k < last && !got.iter().any(|(gt, _)| gt == t) {
                return Err(format!("{t} beats the last listed tree but is missing"));
            }
        }
    }
    Ok(NBestCoverage {
        certain,
        listed: got.len(),
        max_size,
    })
}

// --------------------------------------------------------------- generators

const TERMINALS: [(&str, usize); 6] = [("a", 0), ("b", 0), ("c", 0), ("f", 1), ("g", 1), ("h", 2)];

/// A weighted grammar with up to `max_nt` nonterminals and `max_rules`
/// rules, weights in `0..=5`.
pub fn random_rtg(rng: &mut impl Rng, max_nt: usize, max_rules: usize) -> WeightedRtg {
    let nts: Vec<String> = (0..rng.gen_range(1..=max_nt)).map(|i| format!("N{i}")).collect();
    let rules = rng.gen_range(1..=max_rules);
    let productions = (0..rules)
        .map(|_| {
            let (name, rank) = TERMINALS[rng.gen_range(0..TERMINALS.len())];
            Production {
                lhs: nts.choose(rng).unwrap().clone(),
                symbol: RankedSymbol {
                    name: name.to_owned(),
                    rank,
                },
                rhs: (0..rank).map(|_| nts.choose(rng).unwrap().clone()).collect(),
                weight: Weight::from_integer(rng.gen_range(0..=5)),
            }
        })
        .collect();
    WeightedRtg::new(nts[0].clone(), productions).unwrap()
}

/// The argument and result types of an operation.
#[derive(Debug, Clone)]
pub struct Signature {
    pub name: String,
    pub args: Vec<usize>,
    pub result: usize,
}

#[derive(Debug, Clone)]
pub struct RandomAlgebra {
    pub algebra: Algebra,
    pub signatures: Vec<Signature>,
}

const NODE_LABELS: [&str; 2] = ["a", "b"];
const EDGE_LABELS: [&str; 2] = ["x", "y"];

/// Graph types stay within `1..=2`. With `extension` every operation
/// satisfies both extension conditions. At most `context_budget` context
/// nodes are used across all operations. Docks may repeat.
pub fn random_algebra(rng: &mut impl Rng, extension: bool, context_budget: usize) -> RandomAlgebra {
    random_algebra_with(rng, extension, true, context_budget)
}

pub fn random_algebra_with(
    rng: &mut impl Rng,
    extension: bool,
    repeat_docks: bool,
    context_budget: usize,
) -> RandomAlgebra {
    let mut algebra = Algebra::new();
    let mut signatures = Vec::new();
    let mut budget = context_budget;

    for i in 0..2 {
        let n = rng.gen_range(1..=2);
        let mut t = Graph::empty();
        for _ in 0..n {
            t.add_node(*NODE_LABELS.choose(rng).unwrap());
        }
        if !extension {
            for s in 0..n {
                for d in 0..n {
                    if rng.gen_bool(0.3) {
                        t.add_edge(NodeId::new(s), *EDGE_LABELS.choose(rng).unwrap(), NodeId::new(d));
                    }
                }
            }
        }
        let mut ports: Vec<NodeId> = t.nodes().collect();
        ports.shuffle(rng);
        t.set_ports(ports).unwrap();
        let name = format!("k{i}");
        let op = ExpansionOperation::new(name.clone(), t, Vec::new()).unwrap();
        algebra.insert(name.clone(), Operation::Expansion(op)).unwrap();
        signatures.push(Signature { name, args: vec![], result: n });
    }

    for i in 0..3 {
        let k = rng.gen_range(1..=2);
        let distinct_docks = if repeat_docks { rng.gen_range(1..=k) } else { k };
        let new = rng.gen_range(if extension { 1 } else { 0 }..=2);
        let context = rng.gen_range(0..=budget.min(2));
        budget -= context;

        // 0: dock, 1: new, 2: context
        let mut kinds: Vec<u8> = std::iter::repeat_n(0, distinct_docks)
            .chain(std::iter::repeat_n(1, new))
            .chain(std::iter::repeat_n(2, context))
            .collect();
        kinds.shuffle(rng);
        let mut t = Graph::empty();
        for &kind in &kinds {
            let label = if kind == 0 && rng.gen_bool(0.5) {
                ""
            } else {
                NODE_LABELS.choose(rng).unwrap()
            };
            t.add_node(label);
        }
        let of = |kind: u8| -> Vec<NodeId> {
            kinds
                .iter()
                .enumerate()
                .filter(|(_, k)| **k == kind)
                .map(|(i, _)| NodeId::new(i))
                .collect()
        };
        let (dock_nodes, new_nodes) = (of(0), of(1));
        // a surjective dock sequence of length k
        let mut docks = dock_nodes.clone();
        while docks.len() < k {
            docks.push(*dock_nodes.choose(rng).unwrap());
        }
        docks.shuffle(rng);
        // ports: every new node plus some docks, one or two in total
        let mut ports = new_nodes.clone();
        let mut spare = dock_nodes.clone();
        spare.shuffle(rng);
        for d in spare {
            if ports.len() < 2 && (ports.is_empty() || rng.gen_bool(0.4)) {
                ports.push(d);
            }
        }
        ports.shuffle(rng);
        let nodes = t.node_count();
        for s in 0..nodes {
            for d in 0..nodes {
                let (s, d) = (NodeId::new(s), NodeId::new(d));
                let allowed = !extension || (new_nodes.contains(&s) && !new_nodes.contains(&d));
                if allowed && rng.gen_bool(0.35) {
                    t.add_edge(s, *EDGE_LABELS.choose(rng).unwrap(), d);
                }
            }
        }
        if extension {
            for &d in &dock_nodes {
                if !ports.contains(&d) && !t.edges().any(|e| e.target == d) {
                    let s = *new_nodes.choose(rng).unwrap();
                    t.add_edge(s, *EDGE_LABELS.choose(rng).unwrap(), d);
                }
            }
        }
        let result = ports.len();
        t.set_ports(ports).unwrap();
        let name = format!("x{i}");
        let op = ExpansionOperation::new(name.clone(), t, docks).unwrap();
        algebra.insert(name.clone(), Operation::Expansion(op)).unwrap();
        signatures.push(Signature {
            name,
            args: vec![k],
            result,
        });
    }

    algebra
        .insert(
            "u",
            Operation::Union(UnionOperation {
                left_arity: 1,
                right_arity: 1,
            }),
        )
        .unwrap();
    signatures.push(Signature {
        name: "u".into(),
        args: vec![1, 1],
        result: 2,
    });
    RandomAlgebra { algebra, signatures }
}

/// A random tree of at most `budget` nodes whose value has type `ty`.
pub fn random_tree(rng: &mut impl Rng, ra: &RandomAlgebra, ty: usize, budget: usize) -> Option<DerivationTree> {
    for _ in 0..8 {
        let options: Vec<&Signature> = ra
            .signatures
            .iter()
            .filter(|s| s.result == ty && s.args.len() < budget)
            .collect();
        let sig = options.choose(rng)?;
        let mut left = budget - 1;
        let mut children = Vec::new();
        for (i, &arg) in sig.args.iter().enumerate() {
            let reserve = sig.args.len() - i - 1;
            let share = if reserve == 0 { left } else { rng.gen_range(1..=left - reserve) };
            match random_tree(rng, ra, arg, share) {
                Some(c) => {
                    left -= c.size();
                    children.push(c);
                }
                None => break,
            }
        }
        if children.len() == sig.args.len() {
            return Some(DerivationTree::new(sig.name.clone(), children));
        }
    }
    None
}

/// A weighted grammar with one nonterminal per graph type, so every tree it
/// generates is well typed.
pub fn typed_grammar(rng: &mut impl Rng, ra: &RandomAlgebra) -> Option<WeightedRtg> {
    let productions: Vec<Production> = ra
        .signatures
        .iter()
        .map(|s| Production {
            lhs: format!("T{}", s.result),
            symbol: RankedSymbol {
                name: s.name.clone(),
                rank: s.args.len(),
            },
            rhs: s.args.iter().map(|a| format!("T{a}")).collect(),
            weight: Weight::from_integer(rng.gen_range(0..=5)),
        })
        .collect();
    let starts: Vec<String> = productions.iter().map(|p| p.lhs.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let start = starts.choose(rng)?.clone();
    WeightedRtg::new(start, productions).ok()
}

/// Random graph with up to `max_nodes` nodes over a small label alphabet.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize, labels: &[&str]) -> Graph {
    let n = rng.gen_range(0..=max_nodes);
    let mut g = Graph::empty();
    for _ in 0..n {
        g.add_node(*labels.choose(rng).unwrap());
    }
    for s in 0..n {
        for d in 0..n {
            if rng.gen_bool(0.25) {
                g.add_edge(NodeId::new(s), *EDGE_LABELS.choose(rng).unwrap(), NodeId::new(d));
            }
        }
    }
    let mut ports: Vec<NodeId> = g.nodes().filter(|_| rng.gen_bool(0.3)).collect();
    ports.shuffle(rng);
    g.set_ports(ports).unwrap();
    g
}

/// Per-label node counts, used for analytic instantiation counts.
pub fn label_counts(g: &Graph) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for v in g.nodes() {
        *m.entry(g.label(v).to_owned()).or_insert(0) += 1;
    }
    m
}

/// Reads every file of `dir` into a sorted name -> bytes map.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}
