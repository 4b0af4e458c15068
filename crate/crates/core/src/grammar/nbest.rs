//! N-best tree extraction under the tropical semiring.
//!
//! Candidates are ordered by `(weight, tree size, preorder symbol sequence)`.
//! That key is strictly larger than the key of every subtree, which makes a
//! Knuth-style best-first search sound: each nonterminal keeps a heap of
//! candidate derivations `(p, r)` whose `i`-th child is the `r_i`-th distinct
//! tree of that child nonterminal. Popping `(p, r)` queues the successors
//! `(p, r + e_i)`; a successor whose child tree is not known yet waits on it.
//!
//! Only nonterminals on which the start nonterminal (transitively) waits are
//! popped, so weight-0 cycles elsewhere cannot starve the search. Repeated
//! trees per nonterminal are dropped, so each reported weight is the minimum
//! over all derivations of its tree.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use super::{DerivationTree, GrammarError, Weight, WeightedRtg};

pub const DEFAULT_EXPANSION_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NBest {
    /// Pairwise distinct trees with their weights, best first.
    pub trees: Vec<(DerivationTree, Weight)>,
    pub warnings: Vec<String>,
}

/// The `n` best trees of `g` with the default expansion budget.
pub fn n_best_trees(g: &WeightedRtg, n: usize) -> Result<NBest, GrammarError> {
    n_best_trees_with_budget(g, n, DEFAULT_EXPANSION_BUDGET)
}

/// Like [`n_best_trees`], giving up with [`GrammarError::BudgetExceeded`]
/// after `budget` agenda pops.
pub fn n_best_trees_with_budget(g: &WeightedRtg, n: usize, budget: usize) -> Result<NBest, GrammarError> {
    if n == 0 {
        return Err(GrammarError::InvalidCount(n));
    }
    let mut agenda = Agenda::new(g);
    let found = agenda.run(n, budget)?;
    let trees: Vec<(DerivationTree, Weight)> = found
        .iter()
        .map(|d| (agenda.to_tree(d), d.key.weight))
        .collect();
    let mut warnings = Vec::new();
    if trees.is_empty() {
        warnings.push(format!(
            "the grammar generates no trees from start nonterminal `{}`",
            g.start()
        ));
    }
    Ok(NBest { trees, warnings })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    weight: Weight,
    size: usize,
    preorder: Rc<[u32]>,
}

struct Deriv {
    symbol: u32,
    children: Vec<Rc<Deriv>>,
    key: Key,
}

struct Candidate {
    key: Key,
    prod: usize,
    ranks: Vec<usize>,
    deriv: Rc<Deriv>,
}

impl Candidate {
    fn order(&self) -> (&Key, usize, &[usize]) {
        (&self.key, self.prod, &self.ranks)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.order() == other.order()
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order())
    }
}

struct Prod {
    lhs: usize,
    symbol: u32,
    rhs: Vec<usize>,
    weight: Weight,
}

struct Agenda {
    symbols: Vec<String>,
    nonterminals: Vec<String>,
    start: usize,
    prods: Vec<Prod>,
    found: Vec<Vec<Rc<Deriv>>>,
    trees_seen: Vec<HashSet<Rc<[u32]>>>,
    generated: HashSet<(usize, Vec<usize>)>,
    heaps: Vec<BinaryHeap<Reverse<Candidate>>>,
    /// Candidates parked on the next, not yet known, tree of a nonterminal.
    waiting: Vec<Vec<(usize, Vec<usize>)>>,
    /// owner nonterminal -> nonterminal waited on -> number of parked candidates
    waits_on: Vec<BTreeMap<usize, usize>>,
    repeats: Vec<usize>,
}

impl Agenda {
    fn new(g: &WeightedRtg) -> Self {
        // symbol ids in name order, so comparing id sequences compares names
        let symbols: Vec<String> = g.terminals().keys().cloned().collect();
        let symbol_id: BTreeMap<&str, u32> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let nonterminals: Vec<String> = g.nonterminals().iter().cloned().collect();
        let nt_id: HashMap<&str, usize> = nonterminals
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let start = nt_id[g.start()];
        let unreachable: HashSet<String> = g.unreachable_nonterminals().into_iter().collect();
        let prods: Vec<Prod> = g
            .productions()
            .iter()
            .filter(|p| !unreachable.contains(&p.lhs))
            .map(|p| Prod {
                lhs: nt_id[p.lhs.as_str()],
                symbol: symbol_id[p.symbol.name.as_str()],
                rhs: p.rhs.iter().map(|a| nt_id[a.as_str()]).collect(),
                weight: p.weight,
            })
            .collect();
        let n = nonterminals.len();
        Agenda {
            symbols,
            nonterminals,
            start,
            prods,
            found: vec![Vec::new(); n],
            trees_seen: vec![HashSet::new(); n],
            generated: HashSet::new(),
            heaps: (0..n).map(|_| BinaryHeap::new()).collect(),
            waiting: vec![Vec::new(); n],
            waits_on: vec![BTreeMap::new(); n],
            repeats: vec![0; n],
        }
    }

    fn run(&mut self, n: usize, budget: usize) -> Result<Vec<Rc<Deriv>>, GrammarError> {
        for p in 0..self.prods.len() {
            let zeros = vec![0; self.prods[p].rhs.len()];
            self.generate(p, zeros);
        }
        let mut pops = 0usize;
        while self.found[self.start].len() < n {
            let Some(a) = self.next_nonterminal() else {
                break;
            };
            let Some(Reverse(cand)) = self.heaps[a].pop() else {
                unreachable!("selected nonterminal has a candidate");
            };
            pops += 1;
            if pops > budget {
                let worst = (0..self.nonterminals.len())
                    .max_by_key(|&x| (self.repeats[x], Reverse(x)))
                    .unwrap_or(self.start);
                return Err(GrammarError::BudgetExceeded {
                    budget,
                    nonterminal: self.nonterminals[worst].clone(),
                });
            }
            if self.trees_seen[a].insert(cand.key.preorder.clone()) {
                self.found[a].push(cand.deriv.clone());
                for (p, ranks) in std::mem::take(&mut self.waiting[a]) {
                    let owner = self.prods[p].lhs;
                    if let Some(count) = self.waits_on[owner].get_mut(&a) {
                        *count -= 1;
                        if *count == 0 {
                            self.waits_on[owner].remove(&a);
                        }
                    }
                    self.place(p, ranks);
                }
            } else {
                self.repeats[a] += 1;
            }
            for i in 0..cand.ranks.len() {
                let mut next = cand.ranks.clone();
                next[i] += 1;
                self.generate(cand.prod, next);
            }
        }
        Ok(self.found[self.start].iter().take(n).cloned().collect())
    }

    /// Among the nonterminals the start nonterminal transitively waits on,
    /// the one holding the least candidate.
    fn next_nonterminal(&self) -> Option<usize> {
        let mut demanded = vec![false; self.nonterminals.len()];
        let mut stack = vec![self.start];
        demanded[self.start] = true;
        while let Some(x) = stack.pop() {
            for &y in self.waits_on[x].keys() {
                if !demanded[y] {
                    demanded[y] = true;
                    stack.push(y);
                }
            }
        }
        (0..self.nonterminals.len())
            .filter(|&x| demanded[x])
            .filter_map(|x| self.heaps[x].peek().map(|Reverse(c)| (&c.key, x)))
            .min()
            .map(|(_, x)| x)
    }

    fn generate(&mut self, prod: usize, ranks: Vec<usize>) {
        if self.generated.insert((prod, ranks.clone())) {
            self.place(prod, ranks);
        }
    }

    /// Queues `(prod, ranks)` if every child tree it refers to is known,
    /// otherwise parks it on the missing child. A missing child is always the
    /// next tree of its nonterminal, since ranks grow one step at a time.
    fn place(&mut self, prod: usize, ranks: Vec<usize>) {
        let missing = self.prods[prod]
            .rhs
            .iter()
            .zip(&ranks)
            .find(|(&a, &r)| self.found[a].len() <= r)
            .map(|(&a, _)| a);
        if let Some(a) = missing {
            let owner = self.prods[prod].lhs;
            *self.waits_on[owner].entry(a).or_default() += 1;
            self.waiting[a].push((prod, ranks));
            return;
        }
        let p = &self.prods[prod];
        let children: Vec<Rc<Deriv>> = p
            .rhs
            .iter()
            .zip(&ranks)
            .map(|(&a, &r)| self.found[a][r].clone())
            .collect();
        let weight = p.weight + children.iter().map(|c| c.key.weight).sum::<Weight>();
        let size = 1 + children.iter().map(|c| c.key.size).sum::<usize>();
        let mut preorder = Vec::with_capacity(size);
        preorder.push(p.symbol);
        for c in &children {
            preorder.extend_from_slice(&c.key.preorder);
        }
        let key = Key {
            weight,
            size,
            preorder: preorder.into(),
        };
        let deriv = Rc::new(Deriv {
            symbol: p.symbol,
            children,
            key: key.clone(),
        });
        let lhs = p.lhs;
        self.heaps[lhs].push(Reverse(Candidate {
            key,
            prod,
            ranks,
            deriv,
        }));
    }

    fn to_tree(&self, d: &Deriv) -> DerivationTree {
        DerivationTree::new(
            self.symbols[d.symbol as usize].clone(),
            d.children.iter().map(|c| self.to_tree(c)).collect(),
        )
    }
}
