//! Undirected graphs, tree decompositions and treewidth.
//!
//! Exact treewidth iterates a decision procedure over candidate widths `k`,
//! starting from the degeneracy lower bound. The decision procedure searches
//! elimination orders as sets of already-eliminated vertices: eliminating
//! `v` after the set `S` creates a bag of `v` plus every vertex outside `S`
//! that `v` reaches through `S`. Failed sets are memoised.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default vertex cap for exact search.
pub const DEFAULT_EXACT_CAP: usize = 20;
/// Default number of search states the exact solver may expand.
pub const DEFAULT_EXACT_STATES: u64 = 5_000_000;

/// Simple undirected graph on `0..n`. Self-loops are ignored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::new(n);
        for u in 0..n {
            for v in u + 1..n {
                g.add_edge(u, v);
            }
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Self::new(n);
        for u in 0..n {
            g.add_edge(u, (u + 1) % n);
        }
        g
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        if u != v {
            self.adj[u].insert(v);
            self.adj[v].insert(u);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(&v)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, ns) in self.adj.iter().enumerate() {
            out.extend(ns.range(u + 1..).map(|&v| (u, v)));
        }
        out
    }

    pub fn is_clique(&self, vs: &BTreeSet<usize>) -> bool {
        vs.iter()
            .all(|&u| vs.iter().all(|&v| u == v || self.has_edge(u, v)))
    }

    /// Largest `k` such that some subgraph has minimum degree `k`. A lower
    /// bound on treewidth.
    pub fn degeneracy(&self) -> usize {
        let n = self.vertex_count();
        let mut degree: Vec<usize> = self.adj.iter().map(BTreeSet::len).collect();
        let mut removed = vec![false; n];
        let mut best = 0;
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !removed[v])
                .min_by_key(|&v| degree[v])
                .expect("vertices remain");
            best = best.max(degree[v]);
            removed[v] = true;
            for &u in &self.adj[v] {
                if !removed[u] {
                    degree[u] -= 1;
                }
            }
        }
        best
    }

    /// PACE `.gr` text, 1-based vertex ids.
    pub fn to_pace(&self) -> String {
        let mut s = format!("p tw {} {}\n", self.vertex_count(), self.edge_count());
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{} {}", u + 1, v + 1);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreewidthError {
    #[error("graph has {vertices} vertices, above the exact-mode cap of {cap}")]
    TooLarge { vertices: usize, cap: usize },
    #[error("exact search exceeded its budget of {states} states")]
    BudgetExceeded { states: u64 },
    #[error("no bag contains the vertex set {0:?}")]
    NoCliqueBag(Vec<usize>),
}

/// Why a decomposition is not valid for a graph.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("decomposition has no nodes")]
    Empty,
    #[error("bag {node} mentions unknown vertex {vertex}")]
    UnknownVertex { node: usize, vertex: usize },
    #[error("tree edge ({0}, {1}) refers to a missing node")]
    BadTreeEdge(usize, usize),
    #[error("decomposition tree is not a tree")]
    NotATree,
    #[error("vertex {0} appears in no bag")]
    UncoveredVertex(usize),
    #[error("bags containing vertex {0} are not connected")]
    DisconnectedVertex(usize),
    #[error("edge ({0}, {1}) is contained in no bag")]
    UncoveredEdge(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<usize>>,
    pub tree: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    /// One bag holding every vertex.
    pub fn single_bag(n: usize) -> Self {
        Self {
            bags: vec![(0..n).collect()],
            tree: Vec::new(),
        }
    }

    /// Largest bag size minus one; 0 for a decomposition of no vertices.
    pub fn width(&self) -> usize {
        self.bags
            .iter()
            .map(BTreeSet::len)
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    pub fn node_count(&self) -> usize {
        self.bags.len()
    }

    fn tree_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.tree {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Checks both decomposition conditions; the error names the first
    /// violation found.
    pub fn validate(&self, g: &Graph) -> Result<(), Violation> {
        let nodes = self.bags.len();
        if nodes == 0 {
            return Err(Violation::Empty);
        }
        for (node, bag) in self.bags.iter().enumerate() {
            if let Some(&vertex) = bag.iter().find(|&&v| v >= g.vertex_count()) {
                return Err(Violation::UnknownVertex { node, vertex });
            }
        }
        if let Some(&(a, b)) = self.tree.iter().find(|&&(a, b)| a >= nodes || b >= nodes) {
            return Err(Violation::BadTreeEdge(a, b));
        }
        let adj = self.tree_adjacency();
        if self.tree.len() + 1 != nodes || component(&adj, 0, |_| true).len() != nodes {
            return Err(Violation::NotATree);
        }
        for v in 0..g.vertex_count() {
            let holding: Vec<usize> = (0..nodes).filter(|&i| self.bags[i].contains(&v)).collect();
            let Some(&first) = holding.first() else {
                return Err(Violation::UncoveredVertex(v));
            };
            if component(&adj, first, |i| self.bags[i].contains(&v)).len() != holding.len() {
                return Err(Violation::DisconnectedVertex(v));
            }
        }
        for (u, v) in g.edges() {
            if !self.bags.iter().any(|b| b.contains(&u) && b.contains(&v)) {
                return Err(Violation::UncoveredEdge(u, v));
            }
        }
        Ok(())
    }

    /// Contracts tree edges whose bags are in containment until none is
    /// left. Width and validity are preserved; a valid decomposition of a
    /// nonempty graph ends with at most `|V|` nodes.
    pub fn compact_node_count(&self) -> TreeDecomposition {
        let mut bags: Vec<Option<BTreeSet<usize>>> = self.bags.iter().cloned().map(Some).collect();
        let mut tree = self.tree.clone();
        loop {
            let hit = tree.iter().position(|&(a, b)| {
                let (ba, bb) = (bags[a].as_ref().unwrap(), bags[b].as_ref().unwrap());
                ba.is_subset(bb) || bb.is_subset(ba)
            });
            let Some(pos) = hit else { break };
            let (a, b) = tree.swap_remove(pos);
            let (keep, gone) = if bags[a].as_ref().unwrap().is_subset(bags[b].as_ref().unwrap()) {
                (b, a)
            } else {
                (a, b)
            };
            bags[gone] = None;
            for e in &mut tree {
                if e.0 == gone {
                    e.0 = keep;
                }
                if e.1 == gone {
                    e.1 = keep;
                }
            }
        }
        let mut renumber = vec![usize::MAX; bags.len()];
        let mut kept = Vec::new();
        for (i, b) in bags.into_iter().enumerate() {
            if let Some(b) = b {
                renumber[i] = kept.len();
                kept.push(b);
            }
        }
        let mut tree: Vec<(usize, usize)> = tree
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (renumber[a], renumber[b]);
                (a.min(b), a.max(b))
            })
            .collect();
        tree.sort_unstable();
        TreeDecomposition { bags: kept, tree }
    }

    /// A node whose bag contains all of `clique`. Every decomposition has
    /// one when `clique` induces a complete subgraph.
    pub fn clique_bag(&self, clique: &BTreeSet<usize>) -> Result<usize, TreewidthError> {
        self.bags
            .iter()
            .position(|b| clique.is_subset(b))
            .ok_or_else(|| TreewidthError::NoCliqueBag(clique.iter().copied().collect()))
    }

    /// PACE `.td` text, 1-based bag and vertex ids.
    pub fn to_pace(&self, vertex_count: usize) -> String {
        let mut s = format!(
            "s td {} {} {}\n",
            self.bags.len(),
            self.width() + 1,
            vertex_count
        );
        for (i, b) in self.bags.iter().enumerate() {
            let _ = write!(s, "b {}", i + 1);
            for v in b {
                let _ = write!(s, " {}", v + 1);
            }
            s.push('\n');
        }
        for &(a, b) in &self.tree {
            let _ = writeln!(s, "{} {}", a + 1, b + 1);
        }
        s
    }
}

fn component(adj: &[Vec<usize>], start: usize, allowed: impl Fn(usize) -> bool) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if allowed(y) && seen.insert(y) {
                stack.push(y);
            }
        }
    }
    seen
}

/// Builds the decomposition induced by eliminating vertices in `order`.
pub fn decomposition_from_order(g: &Graph, order: &[usize]) -> TreeDecomposition {
    let n = g.vertex_count();
    if n == 0 {
        return TreeDecomposition::single_bag(0);
    }
    let mut position = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let mut fill: Vec<BTreeSet<usize>> = g.adj.clone();
    let mut bags = Vec::with_capacity(n);
    let mut parent_vertex = Vec::with_capacity(n);
    for &v in order {
        let later: BTreeSet<usize> = fill[v]
            .iter()
            .copied()
            .filter(|&u| position[u] > position[v])
            .collect();
        for &a in &later {
            for &b in &later {
                if a != b {
                    fill[a].insert(b);
                }
            }
        }
        parent_vertex.push(later.iter().copied().min_by_key(|&u| position[u]));
        let mut bag = later;
        bag.insert(v);
        bags.push(bag);
    }
    // Bag i belongs to order[i]; its parent is the bag of the first later
    // neighbour. Roots of separate components are chained together.
    let mut tree = Vec::with_capacity(n - 1);
    let mut last_root: Option<usize> = None;
    for i in 0..n {
        match parent_vertex[i] {
            Some(p) => tree.push((i, position[p])),
            None => {
                if let Some(r) = last_root {
                    tree.push((r, i));
                }
                last_root = Some(i);
            }
        }
    }
    TreeDecomposition { bags, tree }
}

/// Width of the decomposition induced by `order`, computed directly.
pub fn elimination_width(g: &Graph, order: &[usize]) -> usize {
    decomposition_from_order(g, order).width()
}

/// Min-fill elimination order; ties go to the lowest vertex id, or are
/// broken by `rng` when one is given.
fn min_fill_order(g: &Graph, mut rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
    let n = g.vertex_count();
    let mut fill = g.adj.clone();
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    while !alive.is_empty() {
        let cost = |v: usize| {
            let ns: Vec<usize> = fill[v].iter().copied().collect();
            let mut missing = 0;
            for (i, &a) in ns.iter().enumerate() {
                for &b in &ns[i + 1..] {
                    if !fill[a].contains(&b) {
                        missing += 1;
                    }
                }
            }
            missing
        };
        let best = alive.iter().map(|&v| cost(v)).min().expect("alive");
        let ties: Vec<usize> = alive.iter().copied().filter(|&v| cost(v) == best).collect();
        let v = match rng.as_deref_mut() {
            Some(r) => *ties.choose(r).expect("nonempty"),
            None => ties[0],
        };
        let ns: Vec<usize> = fill[v].iter().copied().collect();
        for &a in &ns {
            fill[a].remove(&v);
            for &b in &ns {
                if a != b {
                    fill[a].insert(b);
                }
            }
        }
        fill[v].clear();
        alive.remove(&v);
        order.push(v);
    }
    order
}

/// Number of randomised min-fill runs tried after the deterministic one.
const HEURISTIC_TRIALS: usize = 8;

/// Upper bound from min-fill elimination. The deterministic lowest-id run
/// is always included; `seed` drives a few extra randomised tie-breaks and
/// the best result is kept.
pub fn heuristic_treewidth(g: &Graph, seed: u64) -> (usize, TreeDecomposition) {
    let mut best = decomposition_from_order(g, &min_fill_order(g, None));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..HEURISTIC_TRIALS {
        let td = decomposition_from_order(g, &min_fill_order(g, Some(&mut rng)));
        if td.width() < best.width() {
            best = td;
        }
    }
    (best.width(), best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactBudget {
    pub max_vertices: usize,
    pub max_states: u64,
}

impl Default for ExactBudget {
    fn default() -> Self {
        Self {
            max_vertices: DEFAULT_EXACT_CAP,
            max_states: DEFAULT_EXACT_STATES,
        }
    }
}

struct Search<'a> {
    adj: &'a [u64],
    all: u64,
    k: u32,
    failed: HashSet<u64>,
    states: u64,
    max_states: u64,
}

impl Search<'_> {
    /// Vertices outside `s ∪ {v}` reachable from `v` through `s`.
    fn q(&self, s: u64, v: usize) -> u64 {
        let mut frontier = self.adj[v];
        let mut visited = 0u64;
        let mut out = 0u64;
        loop {
            out |= frontier & !s;
            let inner = frontier & s & !visited;
            if inner == 0 {
                break;
            }
            visited |= inner;
            frontier = 0;
            let mut bits = inner;
            while bits != 0 {
                let u = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                frontier |= self.adj[u];
            }
        }
        out & !(1 << v)
    }

    /// Extends the elimination prefix `s` to a full order of width `≤ k`.
    fn extend(&mut self, s: u64, order: &mut Vec<usize>) -> Result<bool, TreewidthError> {
        let rest = self.all & !s;
        if rest.count_ones() <= self.k + 1 {
            push_bits(rest, order);
            return Ok(true);
        }
        if self.failed.contains(&s) {
            return Ok(false);
        }
        self.states += 1;
        if self.states > self.max_states {
            return Err(TreewidthError::BudgetExceeded {
                states: self.max_states,
            });
        }
        // A vertex whose neighbourhood is already a clique can be eliminated
        // first without loss.
        let mut bits = rest;
        let mut candidates = Vec::new();
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let qv = self.q(s, v);
            if qv.count_ones() > self.k {
                continue;
            }
            if self.is_clique(s | (1 << v), qv) {
                candidates.clear();
                candidates.push(v);
                break;
            }
            candidates.push(v);
        }
        for v in candidates {
            order.push(v);
            if self.extend(s | (1 << v), order)? {
                return Ok(true);
            }
            order.pop();
        }
        self.failed.insert(s);
        Ok(false)
    }

    fn is_clique(&self, s: u64, vs: u64) -> bool {
        let mut bits = vs;
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let others = vs & !(1 << u);
            if self.q(s, u) & others != others {
                return false;
            }
        }
        true
    }
}

fn push_bits(mut bits: u64, out: &mut Vec<usize>) {
    while bits != 0 {
        out.push(bits.trailing_zeros() as usize);
        bits &= bits - 1;
    }
}

/// Optimal treewidth with a witness decomposition.
pub fn exact_treewidth(
    g: &Graph,
    budget: ExactBudget,
) -> Result<(usize, TreeDecomposition), TreewidthError> {
    let n = g.vertex_count();
    let cap = budget.max_vertices.min(64);
    if n > cap {
        return Err(TreewidthError::TooLarge { vertices: n, cap });
    }
    let (ub, heuristic_td) = heuristic_treewidth(g, 0);
    let adj: Vec<u64> = g
        .adj
        .iter()
        .map(|ns| ns.iter().fold(0u64, |m, &v| m | (1 << v)))
        .collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut states = 0;
    for k in g.degeneracy()..ub {
        let mut search = Search {
            adj: &adj,
            all,
            k: k as u32,
            failed: HashSet::new(),
            states,
            max_states: budget.max_states,
        };
        let mut order = Vec::with_capacity(n);
        let found = search.extend(0, &mut order)?;
        states = search.states;
        if found {
            let td = decomposition_from_order(g, &order);
            debug_assert_eq!(td.width(), k);
            return Ok((td.width(), td));
        }
    }
    Ok((ub, heuristic_td))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum elimination width over every permutation, by simulating the
    /// fill graph independently of the solver.
    fn brute_force_tw(g: &Graph) -> usize {
        let n = g.vertex_count();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = usize::MAX;
        permute(&mut perm, 0, &mut |order| {
            let mut m = vec![vec![false; n]; n];
            for (u, v) in g.edges() {
                m[u][v] = true;
                m[v][u] = true;
            }
            let mut gone = vec![false; n];
            let mut width = 0;
            for &v in order {
                let ns: Vec<usize> = (0..n).filter(|&u| !gone[u] && m[v][u]).collect();
                width = width.max(ns.len());
                for &a in &ns {
                    for &b in &ns {
                        if a != b {
                            m[a][b] = true;
                        }
                    }
                }
                gone[v] = true;
            }
            best = best.min(width);
        });
        best
    }

    fn permute(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
        if i == p.len() {
            f(p);
            return;
        }
        for j in i..p.len() {
            p.swap(i, j);
            permute(p, i + 1, f);
            p.swap(i, j);
        }
    }

    fn maximal_cliques(g: &Graph) -> Vec<BTreeSet<usize>> {
        let n = g.vertex_count();
        let mut cliques: Vec<BTreeSet<usize>> = Vec::new();
        for mask in 1u32..(1 << n) {
            let set: BTreeSet<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
            if !g.is_clique(&set) {
                continue;
            }
            let maximal = (0..n).all(|v| {
                set.contains(&v) || !set.iter().all(|&u| g.has_edge(u, v))
            });
            if maximal {
                cliques.push(set);
            }
        }
        cliques
    }

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>())
    }

    #[test]
    fn single_bag_is_valid() {
        let g = Graph::complete(4);
        let td = TreeDecomposition::single_bag(4);
        assert_eq!(td.validate(&g), Ok(()));
        assert_eq!(td.width(), 3);
    }

    #[test]
    fn missing_edge_is_named() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]);
        let td = TreeDecomposition {
            bags: vec![BTreeSet::from([0, 1]), BTreeSet::from([2])],
            tree: vec![(0, 1)],
        };
        assert_eq!(td.validate(&g), Err(Violation::UncoveredEdge(1, 2)));
    }

    #[test]
    fn disconnected_occurrences_are_rejected() {
        let g = Graph::new(2);
        let td = TreeDecomposition {
            bags: vec![BTreeSet::from([0]), BTreeSet::from([1]), BTreeSet::from([0])],
            tree: vec![(0, 1), (1, 2)],
        };
        assert_eq!(td.validate(&g), Err(Violation::DisconnectedVertex(0)));
    }

    #[test]
    fn path_decomposition_has_width_one() {
        let g = path(5);
        let td = TreeDecomposition {
            bags: (0..4).map(|i| BTreeSet::from([i, i + 1])).collect(),
            tree: (0..3).map(|i| (i, i + 1)).collect(),
        };
        assert_eq!(td.validate(&g), Ok(()));
        assert_eq!(td.width(), 1);
    }

    #[test]
    fn exact_known_values() {
        let b = ExactBudget::default();
        for r in 1..=6 {
            let (tw, td) = exact_treewidth(&Graph::complete(r), b).unwrap();
            assert_eq!(tw, r - 1);
            td.validate(&Graph::complete(r)).unwrap();
        }
        assert_eq!(exact_treewidth(&Graph::cycle(5), b).unwrap().0, 2);
        assert_eq!(exact_treewidth(&path(6), b).unwrap().0, 1);
        let star = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(exact_treewidth(&star, b).unwrap().0, 1);
        assert_eq!(exact_treewidth(&Graph::new(3), b).unwrap().0, 0);
    }

    #[test]
    fn exact_on_grid() {
        // 4x4 grid has treewidth 4.
        let mut g = Graph::new(16);
        for r in 0..4 {
            for c in 0..4 {
                if c + 1 < 4 {
                    g.add_edge(r * 4 + c, r * 4 + c + 1);
                }
                if r + 1 < 4 {
                    g.add_edge(r * 4 + c, (r + 1) * 4 + c);
                }
            }
        }
        let (tw, td) = exact_treewidth(&g, ExactBudget::default()).unwrap();
        assert_eq!(tw, 4);
        td.validate(&g).unwrap();
    }

    #[test]
    fn exact_cap_and_budget() {
        let g = Graph::new(21);
        assert_eq!(
            exact_treewidth(&g, ExactBudget::default()),
            Err(TreewidthError::TooLarge { vertices: 21, cap: 20 })
        );
        // Petersen graph: treewidth 4, heuristic finds more than the
        // degeneracy bound so search must run.
        let mut pet = Graph::new(10);
        for i in 0..5 {
            pet.add_edge(i, (i + 1) % 5);
            pet.add_edge(i, i + 5);
            pet.add_edge(i + 5, (i + 2) % 5 + 5);
        }
        let tiny = ExactBudget {
            max_vertices: 20,
            max_states: 1,
        };
        assert_eq!(
            exact_treewidth(&pet, tiny),
            Err(TreewidthError::BudgetExceeded { states: 1 })
        );
        assert_eq!(exact_treewidth(&pet, ExactBudget::default()).unwrap().0, 4);
    }

    #[test]
    fn heuristic_examples() {
        assert_eq!(heuristic_treewidth(&Graph::new(4), 0).0, 0);
        assert_eq!(heuristic_treewidth(&Graph::complete(4), 0).0, 3);
    }

    #[test]
    fn compaction() {
        let g = path(3);
        let td = TreeDecomposition {
            bags: vec![
                BTreeSet::from([0, 1]),
                BTreeSet::from([0, 1]),
                BTreeSet::from([1]),
                BTreeSet::from([1, 2]),
            ],
            tree: vec![(0, 1), (1, 2), (2, 3)],
        };
        td.validate(&g).unwrap();
        let c = td.compact_node_count();
        c.validate(&g).unwrap();
        assert_eq!(c.node_count(), 2);
        assert_eq!(c.width(), 1);
        assert_eq!(c.compact_node_count(), c);
        let single = TreeDecomposition::single_bag(3);
        assert_eq!(single.compact_node_count(), single);
    }

    #[test]
    fn clique_bags() {
        let k3 = Graph::complete(3);
        let (_, td) = exact_treewidth(&k3, ExactBudget::default()).unwrap();
        let node = td.clique_bag(&BTreeSet::from([0, 1, 2])).unwrap();
        assert!(td.bags[node].len() >= 3);
        let g = path(4);
        let td = decomposition_from_order(&g, &[0, 1, 2, 3]);
        let node = td.clique_bag(&BTreeSet::from([1, 2])).unwrap();
        assert!(td.bags[node].contains(&1) && td.bags[node].contains(&2));
        assert!(td.clique_bag(&BTreeSet::from([3])).is_ok());
    }

    #[test]
    fn pace_output() {
        let g = path(3);
        assert_eq!(g.to_pace(), "p tw 3 2\n1 2\n2 3\n");
        let td = decomposition_from_order(&g, &[0, 1, 2]);
        let text = td.to_pace(3);
        assert!(text.starts_with("s td 3 2 3\n"));
        assert!(text.contains("b 1 1 2\n"));
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
                let mut g = Graph::new(n);
                let mut k = 0;
                for u in 0..n {
                    for v in u + 1..n {
                        if bits[k] {
                            g.add_edge(u, v);
                        }
                        k += 1;
                    }
                }
                g
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn exact_matches_brute_force(g in arb_graph(8)) {
            let (tw, td) = exact_treewidth(&g, ExactBudget::default()).unwrap();
            prop_assert_eq!(td.validate(&g), Ok(()));
            prop_assert_eq!(td.width(), tw);
            prop_assert_eq!(tw, brute_force_tw(&g));
            let (ub, htd) = heuristic_treewidth(&g, 3);
            prop_assert_eq!(htd.validate(&g), Ok(()));
            prop_assert!(ub >= tw);
        }

        #[test]
        fn compaction_preserves_validity(g in arb_graph(9), seed in any::<u64>()) {
            let (_, td) = heuristic_treewidth(&g, seed);
            let c = td.compact_node_count();
            prop_assert_eq!(c.validate(&g), Ok(()));
            prop_assert_eq!(c.width(), td.width());
            prop_assert!(c.node_count() <= g.vertex_count());
        }

        #[test]
        fn every_maximal_clique_has_a_bag(g in arb_graph(10), seed in any::<u64>()) {
            let (_, htd) = heuristic_treewidth(&g, seed);
            let mut tds = vec![htd.compact_node_count(), htd];
            if g.vertex_count() <= 9 {
                tds.push(exact_treewidth(&g, ExactBudget::default()).unwrap().1);
            }
            for clique in maximal_cliques(&g) {
                for td in &tds {
                    let node = td.clique_bag(&clique).unwrap();
                    prop_assert!(clique.is_subset(&td.bags[node]));
                }
            }
        }
    }
}
