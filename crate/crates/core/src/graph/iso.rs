//! Port-preserving isomorphism and canonical forms.
//!
//! Two independent routes: `is_isomorphic` is a direct backtracking matcher,
//! `canonical_key` is an individualization-refinement canonical labelling.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write;

use super::{Graph, NodeId};

/// True iff some bijection between the node sets preserves node labels, the
/// edge set, and maps the port sequence of `g` onto that of `h` position by
/// position.
pub fn is_isomorphic(g: &Graph, h: &Graph) -> bool {
    if g.node_count() != h.node_count()
        || g.edge_count() != h.edge_count()
        || g.ports().len() != h.ports().len()
    {
        return false;
    }
    let mut gl: Vec<&str> = g.labels().iter().map(String::as_str).collect();
    let mut hl: Vec<&str> = h.labels().iter().map(String::as_str).collect();
    gl.sort_unstable();
    hl.sort_unstable();
    if gl != hl {
        return false;
    }

    let gs = Matcher::side(g);
    let hs = Matcher::side(h);
    let n = g.node_count();
    let mut m = Matcher {
        g,
        h,
        gs,
        hs,
        forward: vec![None; n],
        used: vec![false; n],
        order: Vec::with_capacity(n),
    };

    for (&p, &q) in g.ports().iter().zip(h.ports()) {
        if m.gs.signature[p.index()] != m.hs.signature[q.index()] || !m.consistent(p, q) {
            return false;
        }
        m.assign(p, q);
    }
    m.order = m.search_order();
    m.extend(0)
}

struct Side<'a> {
    // labels of all edges between an ordered pair of nodes
    between: HashMap<(usize, usize), Vec<&'a str>>,
    signature: Vec<(&'a str, Vec<&'a str>, Vec<&'a str>)>,
    neighbours: Vec<BTreeSet<usize>>,
}

struct Matcher<'a> {
    g: &'a Graph,
    h: &'a Graph,
    gs: Side<'a>,
    hs: Side<'a>,
    forward: Vec<Option<usize>>,
    used: Vec<bool>,
    order: Vec<usize>,
}

impl<'a> Matcher<'a> {
    fn side(g: &'a Graph) -> Side<'a> {
        let n = g.node_count();
        let mut between: HashMap<(usize, usize), Vec<&str>> = HashMap::new();
        let mut outs = vec![Vec::new(); n];
        let mut ins = vec![Vec::new(); n];
        let mut neighbours = vec![BTreeSet::new(); n];
        for e in g.edges() {
            let (s, t) = (e.source.index(), e.target.index());
            between.entry((s, t)).or_default().push(&e.label);
            outs[s].push(e.label.as_str());
            ins[t].push(e.label.as_str());
            neighbours[s].insert(t);
            neighbours[t].insert(s);
        }
        for labels in between.values_mut() {
            labels.sort_unstable();
        }
        let signature = (0..n)
            .map(|v| {
                let mut o = std::mem::take(&mut outs[v]);
                let mut i = std::mem::take(&mut ins[v]);
                o.sort_unstable();
                i.sort_unstable();
                (g.label(NodeId(v)), o, i)
            })
            .collect();
        Side {
            between,
            signature,
            neighbours,
        }
    }

    fn assign(&mut self, p: NodeId, q: NodeId) {
        self.forward[p.index()] = Some(q.index());
        self.used[q.index()] = true;
    }

    fn unassign(&mut self, p: usize, q: usize) {
        self.forward[p] = None;
        self.used[q] = false;
    }

    /// Every pair formed with an already mapped node (and the self pair) has
    /// the same edge labels on both sides.
    fn consistent(&self, p: NodeId, q: NodeId) -> bool {
        let (p, q) = (p.index(), q.index());
        if self.forward[p].is_some() || self.used[q] {
            return false;
        }
        let empty: Vec<&str> = Vec::new();
        let lookup = |side: &Side<'a>, a: usize, b: usize| -> Vec<&'a str> {
            side.between.get(&(a, b)).cloned().unwrap_or_else(|| empty.clone())
        };
        if lookup(&self.gs, p, p) != lookup(&self.hs, q, q) {
            return false;
        }
        for w in &self.gs.neighbours[p] {
            if let Some(fw) = self.forward[*w] {
                if lookup(&self.gs, p, *w) != lookup(&self.hs, q, fw)
                    || lookup(&self.gs, *w, p) != lookup(&self.hs, fw, q)
                {
                    return false;
                }
            }
        }
        // mapped neighbours of q must be images of neighbours of p
        for x in &self.hs.neighbours[q] {
            if self.used[*x] {
                let pre = self.forward.iter().position(|f| *f == Some(*x));
                match pre {
                    Some(w) if self.gs.neighbours[p].contains(&w) => {}
                    Some(_) => return false,
                    None => {}
                }
            }
        }
        true
    }

    /// Unmapped nodes in an order that keeps each next node adjacent to the
    /// mapped region where possible.
    fn search_order(&self) -> Vec<usize> {
        let n = self.g.node_count();
        let mut placed: Vec<bool> = (0..n).map(|v| self.forward[v].is_some()).collect();
        let mut order = Vec::new();
        loop {
            let next = (0..n)
                .filter(|&v| !placed[v])
                .max_by_key(|&v| {
                    let touching = self.gs.neighbours[v].iter().filter(|w| placed[**w]).count();
                    (touching, self.gs.neighbours[v].len(), std::cmp::Reverse(v))
                });
            match next {
                Some(v) => {
                    placed[v] = true;
                    order.push(v);
                }
                None => return order,
            }
        }
    }

    fn extend(&mut self, depth: usize) -> bool {
        let Some(&p) = self.order.get(depth) else {
            return true;
        };
        for q in 0..self.h.node_count() {
            if self.used[q] || self.gs.signature[p] != self.hs.signature[q] {
                continue;
            }
            if !self.consistent(NodeId(p), NodeId(q)) {
                continue;
            }
            self.assign(NodeId(p), NodeId(q));
            if self.extend(depth + 1) {
                return true;
            }
            self.unassign(p, q);
        }
        false
    }
}

/// A string that is equal for two graphs exactly when they are isomorphic.
pub fn canonical_key(g: &Graph) -> String {
    form_key(&canonical_form(g))
}

/// Serialises a graph already in canonical form.
pub(crate) fn form_key(c: &Graph) -> String {
    let mut key = String::new();
    write!(key, "n{};L", c.node_count()).unwrap();
    for l in c.labels() {
        write!(key, ":{}.{}", l.len(), l).unwrap();
    }
    key.push_str(";P");
    for p in c.ports() {
        write!(key, ":{}", p.index()).unwrap();
    }
    key.push_str(";E");
    for e in c.edges() {
        write!(
            key,
            ":{},{}.{},{}",
            e.source.index(),
            e.label.len(),
            e.label,
            e.target.index()
        )
        .unwrap();
    }
    key
}

/// `g` renumbered into canonical order. Isomorphic graphs have equal
/// canonical forms.
pub fn canonical_form(g: &Graph) -> Graph {
    g.permuted(&canonical_order(g))
}

/// The nodes of `g` in canonical order: ports first in port order, then the
/// rest as fixed by the canonical labelling.
pub fn canonical_order(g: &Graph) -> Vec<NodeId> {
    let n = g.node_count();
    if n == 0 {
        return Vec::new();
    }
    let search = Canon::new(g);
    let colors = search.initial_colors();
    let mut canon = search;
    let mut prefix = Vec::new();
    canon.search(colors, &mut prefix);
    let best = canon.best.expect("non-empty graph has a leaf").1;
    let mut order = vec![NodeId(0); n];
    for (v, &pos) in best.iter().enumerate() {
        order[pos] = NodeId(v);
    }
    order
}

type Certificate = Vec<(usize, usize, usize)>;

/// Direction, edge label and colour of one neighbour.
type Neighbour = (u8, usize, usize);

struct Canon {
    n: usize,
    // (edge label rank, target) and (edge label rank, source)
    out: Vec<Vec<(usize, usize)>>,
    inc: Vec<Vec<(usize, usize)>>,
    node_key: Vec<(usize, usize, usize)>,
    edge_set: HashSet<(usize, usize, usize)>,
    best: Option<(Certificate, Vec<usize>)>,
    first: Option<(Certificate, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
}

impl Canon {
    fn new(g: &Graph) -> Self {
        let n = g.node_count();
        let edge_labels: BTreeSet<&str> = g.edges().map(|e| e.label.as_str()).collect();
        let edge_rank: BTreeMap<&str, usize> =
            edge_labels.into_iter().enumerate().map(|(i, l)| (l, i)).collect();
        let node_labels: BTreeSet<&str> = g.labels().iter().map(String::as_str).collect();
        let node_rank: BTreeMap<&str, usize> =
            node_labels.into_iter().enumerate().map(|(i, l)| (l, i)).collect();

        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for e in g.edges() {
            let l = edge_rank[e.label.as_str()];
            out[e.source.index()].push((l, e.target.index()));
            inc[e.target.index()].push((l, e.source.index()));
        }
        let mut port_pos = vec![None; n];
        for (i, p) in g.ports().iter().enumerate() {
            port_pos[p.index()] = Some(i);
        }
        // ports sort first, in port order
        let node_key = (0..n)
            .map(|v| match port_pos[v] {
                Some(i) => (0, i, node_rank[g.label(NodeId(v))]),
                None => (1, 0, node_rank[g.label(NodeId(v))]),
            })
            .collect();
        let edge_set = (0..n)
            .flat_map(|v| out[v].iter().map(move |&(l, t)| (v, l, t)))
            .collect();
        Canon {
            n,
            out,
            inc,
            node_key,
            edge_set,
            best: None,
            first: None,
            automorphisms: Vec::new(),
        }
    }

    fn initial_colors(&self) -> Vec<usize> {
        let colors = rank_by(&self.node_key);
        self.refine(colors)
    }

    /// Equitable refinement: split cells by the multiset of (direction, edge
    /// label, neighbour colour) until stable. Colour ids are ranks of
    /// isomorphism-invariant signatures, so the result is canonical.
    fn refine(&self, mut colors: Vec<usize>) -> Vec<usize> {
        let mut count = distinct(&colors);
        loop {
            let sigs: Vec<(usize, Vec<Neighbour>)> = (0..self.n)
                .map(|v| {
                    let mut s: Vec<Neighbour> = self.out[v]
                        .iter()
                        .map(|&(l, t)| (0, l, colors[t]))
                        .chain(self.inc[v].iter().map(|&(l, s)| (1, l, colors[s])))
                        .collect();
                    s.sort_unstable();
                    (colors[v], s)
                })
                .collect();
            colors = rank_by(&sigs);
            let next = distinct(&colors);
            if next == count {
                return colors;
            }
            count = next;
        }
    }

    fn individualize(&self, colors: &[usize], v: usize) -> Vec<usize> {
        let keys: Vec<(usize, usize)> = (0..self.n)
            .map(|u| {
                let behind = colors[u] == colors[v] && u != v;
                (colors[u], behind as usize)
            })
            .collect();
        self.refine(rank_by(&keys))
    }

    fn target_cell(&self, colors: &[usize]) -> Option<Vec<usize>> {
        let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (v, &c) in colors.iter().enumerate() {
            cells.entry(c).or_default().push(v);
        }
        cells.into_values().find(|cell| cell.len() > 1)
    }

    fn search(&mut self, colors: Vec<usize>, prefix: &mut Vec<usize>) {
        let Some(cell) = self.target_cell(&colors) else {
            self.leaf(colors);
            return;
        };
        let mut explored: Vec<usize> = Vec::new();
        for v in cell {
            if self.pruned(v, &explored, prefix) {
                continue;
            }
            let child = self.individualize(&colors, v);
            prefix.push(v);
            self.search(child, prefix);
            prefix.pop();
            explored.push(v);
        }
    }

    /// `v` is skipped when a known automorphism fixing the prefix maps it to
    /// an explored sibling: both subtrees then yield the same certificates.
    fn pruned(&self, v: usize, explored: &[usize], prefix: &[usize]) -> bool {
        let Some(&first) = explored.first() else {
            return false;
        };
        if self.swap_is_automorphism(first, v) {
            return true;
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for gamma in &self.automorphisms {
            if prefix.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            for (u, &image) in gamma.iter().enumerate() {
                let (a, b) = (find(&mut parent, u), find(&mut parent, image));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let root = find(&mut parent, v);
        explored.iter().any(|&e| find(&mut parent, e) == root)
    }

    /// Whether exchanging two same-coloured nodes preserves every edge. Twins
    /// such as isolated nodes with equal labels are caught here without
    /// descending into their subtrees.
    fn swap_is_automorphism(&self, a: usize, b: usize) -> bool {
        let swap = |x: usize| if x == a { b } else if x == b { a } else { x };
        self.node_key[a] == self.node_key[b]
            && [a, b].iter().all(|&v| {
                self.out[v].iter().all(|&(l, t)| self.edge_set.contains(&(swap(v), l, swap(t))))
                    && self.inc[v].iter().all(|&(l, s)| self.edge_set.contains(&(swap(s), l, swap(v))))
            })
    }

    fn leaf(&mut self, colors: Vec<usize>) {
        let mut cert: Certificate = (0..self.n)
            .flat_map(|v| self.out[v].iter().map(move |&(l, t)| (v, l, t)))
            .map(|(s, l, t)| (colors[s], l, colors[t]))
            .collect();
        cert.sort_unstable();

        for reference in [&self.first, &self.best].into_iter().flatten() {
            if reference.0 == cert {
                let gamma = automorphism(&reference.1, &colors);
                self.automorphisms.push(gamma);
                break;
            }
        }
        if self.first.is_none() {
            self.first = Some((cert.clone(), colors.clone()));
        }
        match &self.best {
            Some((b, _)) if *b <= cert => {}
            _ => self.best = Some((cert, colors)),
        }
    }
}

/// Given two discrete colourings with equal certificates, the map sending
/// each node to the node holding its colour in `reference`.
fn automorphism(reference: &[usize], colors: &[usize]) -> Vec<usize> {
    let mut holder = vec![0; reference.len()];
    for (v, &c) in reference.iter().enumerate() {
        holder[c] = v;
    }
    colors.iter().map(|&c| holder[c]).collect()
}

fn rank_by<K: Ord>(keys: &[K]) -> Vec<usize> {
    let sorted: BTreeSet<&K> = keys.iter().collect();
    let index: BTreeMap<&K, usize> = sorted.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    keys.iter().map(|k| index[k]).collect()
}

fn distinct(colors: &[usize]) -> usize {
    colors.iter().collect::<BTreeSet<_>>().len()
}
