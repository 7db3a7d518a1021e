//! The reachable states as a regular set, for automata too large to scan.
//!
//! Every rule rewrites only the last one or two pairs of a sequence, so the
//! automaton is a pushdown system whose stack holds the pairs, last pair on
//! top. The cap of two `Current` occurrences per variable becomes a finite
//! control: the vector of those counts. Rule 5 is split in two pushdown
//! steps, popping `(⊥, ∅)` into an auxiliary control and then rewriting the
//! pair below. Saturation then yields a finite automaton accepting exactly
//! the reachable states, read from the last pair down to the first, and
//! every state invariant is checked on its transitions instead of on the
//! states one by one.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use serde::Serialize;

use crate::automaton::{AutomatonError, ReminderPair, ReminderSequence};
use crate::grammar::{reachability, stats, Grammar, Var};
use crate::remgraph::ReminderGraph;

/// A reminder pair: `Current` (`None` is `⊥`) and sorted followup.
type Pair = (Option<u8>, Vec<u8>);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Control {
    /// Set between the two halves of rule 5.
    popped: bool,
    counts: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Node {
    Control(u32),
    /// Saturation state for a push to this control with this top symbol.
    Mid(u32, u32),
    Final,
}

enum Rule {
    Pop(u32),
    Swap(u32, u32),
    /// New control, new top, symbol below it.
    Push(u32, u32, u32),
}

const EPS: u32 = u32::MAX;

struct Interner<K> {
    map: HashMap<K, u32>,
    items: Vec<K>,
}

impl<K: Clone + Eq + std::hash::Hash> Interner<K> {
    fn new() -> Self {
        Self {
            map: HashMap::new(),
            items: Vec::new(),
        }
    }

    fn id(&mut self, k: K) -> u32 {
        if let Some(&i) = self.map.get(&k) {
            return i;
        }
        let i = self.items.len() as u32;
        self.map.insert(k.clone(), i);
        self.items.push(k);
        i
    }
}

fn without(sorted: &[u8], v: u8) -> Vec<u8> {
    let mut out = sorted.to_vec();
    let at = out.iter().position(|&x| x == v).expect("v is present");
    out.remove(at);
    out
}

fn distinct(sorted: &[u8]) -> Vec<u8> {
    let mut out = sorted.to_vec();
    out.dedup();
    out
}

struct Saturation<'g> {
    g: &'g Grammar,
    rhs_vars: Vec<Vec<u8>>,
    symbols: Interner<Pair>,
    controls: Interner<Control>,
    nodes: Interner<Node>,
    rel: HashSet<(u32, u32, u32)>,
    out: Vec<Vec<(u32, u32)>>,
    eps_in: Vec<Vec<u32>>,
    rules: HashMap<(u32, u32), Rc<Vec<Rule>>>,
}

impl<'g> Saturation<'g> {
    fn node(&mut self, n: Node) -> u32 {
        let id = self.nodes.id(n);
        while self.out.len() <= id as usize {
            self.out.push(Vec::new());
            self.eps_in.push(Vec::new());
        }
        id
    }

    fn control_node(&mut self, popped: bool, counts: Vec<u8>) -> u32 {
        let c = self.controls.id(Control { popped, counts });
        self.node(Node::Control(c))
    }

    fn rules(&mut self, ctrl: u32, sym: u32) -> Rc<Vec<Rule>> {
        if let Some(r) = self.rules.get(&(ctrl, sym)) {
            return r.clone();
        }
        let Control { popped, counts } = self.controls.items[ctrl as usize].clone();
        let (cur, follow) = self.symbols.items[sym as usize].clone();
        let mut out = Vec::new();
        // Counts after removing `gone` and adding `came` as `Current`, if
        // no variable passes two.
        let shift = |gone: Option<u8>, came: Option<u8>| {
            let mut c = counts.clone();
            if let Some(x) = gone {
                c[usize::from(x)] -= 1;
            }
            if let Some(x) = came {
                c[usize::from(x)] += 1;
            }
            c.iter().all(|&k| k <= 2).then_some(c)
        };
        match (popped, cur) {
            (false, Some(a)) => {
                for &prod in self.g.productions_of(Var(a.into())) {
                    let vars = self.rhs_vars[prod].clone();
                    if vars.is_empty() {
                        if follow.is_empty() {
                            let c = shift(Some(a), None).expect("removal keeps the cap");
                            let p = self.control_node(false, c);
                            let s = self.symbols.id((None, Vec::new()));
                            out.push(Rule::Swap(p, s));
                        } else {
                            for a2 in distinct(&follow) {
                                if let Some(c) = shift(Some(a), Some(a2)) {
                                    let p = self.control_node(false, c);
                                    let s = self.symbols.id((Some(a2), without(&follow, a2)));
                                    out.push(Rule::Swap(p, s));
                                }
                            }
                        }
                        continue;
                    }
                    for aj in distinct(&vars) {
                        let top = (Some(aj), without(&vars, aj));
                        if follow.is_empty() {
                            if let Some(c) = shift(Some(a), Some(aj)) {
                                let p = self.control_node(false, c);
                                let s = self.symbols.id(top);
                                out.push(Rule::Swap(p, s));
                            }
                        } else if let Some(c) = shift(None, Some(aj)) {
                            let p = self.control_node(false, c);
                            let s = self.symbols.id(top);
                            out.push(Rule::Push(p, s, sym));
                        }
                    }
                }
            }
            (false, None) => {
                if follow.is_empty() {
                    let p = self.control_node(true, counts.clone());
                    out.push(Rule::Pop(p));
                }
            }
            (true, Some(a)) => {
                for a2 in distinct(&follow) {
                    if let Some(c) = shift(Some(a), Some(a2)) {
                        let p = self.control_node(false, c);
                        let s = self.symbols.id((Some(a2), without(&follow, a2)));
                        out.push(Rule::Swap(p, s));
                    }
                }
            }
            (true, None) => {}
        }
        let out = Rc::new(out);
        self.rules.insert((ctrl, sym), out.clone());
        out
    }

    fn add_rel(&mut self, t: (u32, u32, u32)) -> bool {
        if !self.rel.insert(t) {
            return false;
        }
        self.out[t.0 as usize].push((t.1, t.2));
        if t.1 == EPS {
            self.eps_in[t.2 as usize].push(t.0);
        }
        true
    }

    fn run(&mut self, budget: usize) -> Result<(), AutomatonError> {
        let n = self.g.var_count();
        let axiom = self.g.axiom().0 as u8;
        let mut counts = vec![0u8; n];
        counts[usize::from(axiom)] = 1;
        let start = self.control_node(false, counts);
        let fin = self.node(Node::Final);
        let s0 = self.symbols.id((Some(axiom), Vec::new()));
        let mut work = vec![(start, s0, fin)];
        while let Some(t) = work.pop() {
            if !self.add_rel(t) {
                continue;
            }
            if self.rel.len() > budget {
                return Err(AutomatonError::SearchBudget { budget });
            }
            let (p, gamma, q) = t;
            if gamma == EPS {
                for i in 0..self.out[q as usize].len() {
                    let (g2, q2) = self.out[q as usize][i];
                    work.push((p, g2, q2));
                }
                continue;
            }
            let Node::Control(ctrl) = self.nodes.items[p as usize] else {
                unreachable!("worklist transitions leave control states")
            };
            let rules = self.rules(ctrl, gamma);
            for r in rules.iter() {
                match *r {
                    Rule::Pop(p2) => work.push((p2, EPS, q)),
                    Rule::Swap(p2, s2) => work.push((p2, s2, q)),
                    Rule::Push(p2, top, below) => {
                        let Node::Control(c2) = self.nodes.items[p2 as usize] else {
                            unreachable!()
                        };
                        let m = self.node(Node::Mid(c2, top));
                        work.push((p2, top, m));
                        if self.add_rel((m, below, q)) {
                            for i in 0..self.eps_in[m as usize].len() {
                                work.push((self.eps_in[m as usize][i], below, q));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A broken invariant found on the saturated automaton, with a witness
/// pair or path fact.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PatternViolation {
    pub check: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymbolicReport {
    /// Distinct reachable states; `None` when counting them would take
    /// more than the memo budget.
    pub states: Option<u128>,
    pub max_sequence_length: usize,
    pub length_bound: usize,
    pub control_states: usize,
    pub pair_symbols: usize,
    pub saturated_transitions: usize,
    pub violations: Vec<PatternViolation>,
}

impl SymbolicReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The saturated automaton restricted to transitions on some path from a
/// proper control state to the final node.
pub struct ReachableStates {
    variables: Vec<String>,
    symbols: Vec<Pair>,
    /// Start nodes, one per proper control state.
    starts: Vec<usize>,
    fin: usize,
    /// Useful outgoing edges `(symbol, target)` per node.
    out: Vec<Vec<(u32, usize)>>,
    /// Nodes in an order where every edge goes forward; `None` if cyclic.
    order: Option<Vec<usize>>,
    control_states: usize,
    saturated_transitions: usize,
}

/// Saturates the pushdown form of the automaton of `g`. `budget` caps the
/// number of saturated transitions.
pub fn reachable_states(g: &Grammar, budget: usize) -> Result<ReachableStates, AutomatonError> {
    if g.var_count() > 255 {
        return Err(AutomatonError::Invalid("too many variables".into()));
    }
    let rhs_vars = g
        .productions()
        .iter()
        .map(|p| {
            let mut v: Vec<u8> = p.vars().map(|x| x.0 as u8).collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut sat = Saturation {
        g,
        rhs_vars,
        symbols: Interner::new(),
        controls: Interner::new(),
        nodes: Interner::new(),
        rel: HashSet::new(),
        out: Vec::new(),
        eps_in: Vec::new(),
        rules: HashMap::new(),
    };
    sat.run(budget)?;
    let n = sat.nodes.items.len();
    let fin = sat.nodes.map[&Node::Final] as usize;
    let starts: Vec<usize> = sat
        .nodes
        .items
        .iter()
        .enumerate()
        .filter(|(_, node)| matches!(node, Node::Control(c) if !sat.controls.items[*c as usize].popped))
        .map(|(i, _)| i)
        .collect();
    // Forward from proper controls over symbol edges, backward from final.
    let mut fwd = vec![false; n];
    let mut stack = starts.clone();
    for &s in &starts {
        fwd[s] = true;
    }
    while let Some(x) = stack.pop() {
        for &(sym, y) in &sat.out[x] {
            if sym != EPS && !fwd[y as usize] {
                fwd[y as usize] = true;
                stack.push(y as usize);
            }
        }
    }
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (x, edges) in sat.out.iter().enumerate() {
        for &(sym, y) in edges {
            if sym != EPS && fwd[x] {
                rev[y as usize].push(x);
            }
        }
    }
    let mut bwd = vec![false; n];
    bwd[fin] = fwd[fin];
    let mut stack = if fwd[fin] { vec![fin] } else { Vec::new() };
    while let Some(y) = stack.pop() {
        for &x in &rev[y] {
            if !bwd[x] {
                bwd[x] = true;
                stack.push(x);
            }
        }
    }
    let out: Vec<Vec<(u32, usize)>> = (0..n)
        .map(|x| {
            if !bwd[x] {
                return Vec::new();
            }
            sat.out[x]
                .iter()
                .filter(|&&(sym, y)| sym != EPS && bwd[y as usize])
                .map(|&(sym, y)| (sym, y as usize))
                .collect()
        })
        .collect();
    let starts: Vec<usize> = starts.into_iter().filter(|&s| bwd[s]).collect();
    let order = topological(&out);
    Ok(ReachableStates {
        variables: g.variables().to_vec(),
        symbols: sat.symbols.items,
        starts,
        fin,
        out,
        order,
        control_states: sat.controls.items.len(),
        saturated_transitions: sat.rel.len(),
    })
}

/// Kahn's algorithm over nodes with edges; `None` on a cycle.
fn topological(out: &[Vec<(u32, usize)>]) -> Option<Vec<usize>> {
    let n = out.len();
    let mut indeg = vec![0usize; n];
    let mut has = vec![false; n];
    for (x, edges) in out.iter().enumerate() {
        for &(_, y) in edges {
            indeg[y] += 1;
            has[x] = true;
            has[y] = true;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&x| has[x] && indeg[x] == 0).collect();
    let mut order = Vec::new();
    while let Some(x) = ready.pop() {
        order.push(x);
        for &(_, y) in &out[x] {
            indeg[y] -= 1;
            if indeg[y] == 0 {
                ready.push(y);
            }
        }
    }
    let total = has.iter().filter(|&&h| h).count();
    (order.len() == total).then_some(order)
}

impl ReachableStates {
    fn pair(&self, sym: u32) -> ReminderPair {
        let (c, f) = &self.symbols[sym as usize];
        ReminderPair::new(c.map(|x| Var(x.into())), f.iter().map(|&v| Var(v.into())).collect())
    }

    fn pair_text(&self, sym: u32) -> String {
        ReminderSequence(vec![self.pair(sym)]).display(&self.variables)
    }

    /// Distinct accepted words, via subset construction with a memo of at
    /// most `memo_budget` subsets.
    pub fn count(&self, memo_budget: usize) -> Option<u128> {
        let mut memo: HashMap<Vec<usize>, u128> = HashMap::new();
        let mut total = 0u128;
        for &s in &self.starts {
            total = total.checked_add(self.count_from(vec![s], &mut memo, memo_budget)?)?;
        }
        Some(total)
    }

    fn count_from(&self, set: Vec<usize>, memo: &mut HashMap<Vec<usize>, u128>, budget: usize) -> Option<u128> {
        if let Some(&c) = memo.get(&set) {
            return Some(c);
        }
        if memo.len() >= budget {
            return None;
        }
        let mut total = u128::from(set.contains(&self.fin));
        let mut by_sym: HashMap<u32, BTreeSet<usize>> = HashMap::new();
        for &x in &set {
            for &(sym, y) in &self.out[x] {
                by_sym.entry(sym).or_default().insert(y);
            }
        }
        for (_, next) in by_sym {
            total = total.checked_add(self.count_from(next.into_iter().collect(), memo, budget)?)?;
        }
        memo.insert(set, total);
        Some(total)
    }

    /// All reachable states, or `None` if there are more than `limit`.
    pub fn enumerate(&self, limit: usize) -> Option<BTreeSet<ReminderSequence>> {
        let mut out = BTreeSet::new();
        let mut word = Vec::new();
        for &s in &self.starts {
            if !self.walk(s, &mut word, &mut out, limit) {
                return None;
            }
        }
        Some(out)
    }

    fn walk(&self, x: usize, word: &mut Vec<u32>, out: &mut BTreeSet<ReminderSequence>, limit: usize) -> bool {
        if x == self.fin {
            out.insert(ReminderSequence(word.iter().rev().map(|&s| self.pair(s)).collect()));
            if out.len() > limit {
                return false;
            }
        }
        for &(sym, y) in &self.out[x] {
            word.push(sym);
            let ok = self.walk(y, word, out, limit);
            word.pop();
            if !ok {
                return false;
            }
        }
        true
    }

    /// The checks of [`crate::automaton::check_state_invariants`], each
    /// decided exactly over all accepted words: per-pair facts on every
    /// useful transition, facts about two pairs on every transition
    /// together with the pairs that can lie below it, the occurrence cap
    /// as a longest-path count and the sequence length as a longest path.
    pub fn check(&self, g: &Grammar, rg: &ReminderGraph, d: usize, memo_budget: usize) -> SymbolicReport {
        let length_bound = 2 * d + 1;
        let m = stats(g).m;
        let reach = reachability(g);
        let wide: Vec<BTreeSet<Var>> = g
            .productions()
            .iter()
            .filter(|p| p.var_count() >= 2)
            .map(|p| p.vars().collect())
            .collect();
        let mut violations = BTreeSet::new();
        let mut fail = |check: &'static str, detail: String| {
            violations.insert(PatternViolation { check, detail });
        };
        let Some(order) = &self.order else {
            fail("length", "reachable sequences of unbounded length".into());
            return self.report(None, 0, length_bound, violations);
        };
        let nsym = self.symbols.len();
        let n = self.out.len();
        let starts: HashSet<usize> = self.starts.iter().copied().collect();
        // Symbols that can follow each node on the way to the final node,
        // longest remaining length, and most `Current` occurrences of each
        // variable.
        let mut below: Vec<Vec<bool>> = vec![Vec::new(); n];
        let mut longest = vec![0usize; n];
        let mut most: Vec<Vec<u8>> = vec![vec![0; g.var_count()]; n];
        for &x in order.iter().rev() {
            let mut b = vec![false; nsym];
            for &(sym, y) in &self.out[x] {
                b[sym as usize] = true;
                for (s, &v) in below[y].iter().enumerate() {
                    b[s] |= v;
                }
                longest[x] = longest[x].max(1 + longest[y]);
                let cur = self.symbols[sym as usize].0;
                for v in 0..g.var_count() {
                    let here = u8::from(cur == Some(v as u8));
                    most[x][v] = most[x][v].max(most[y][v].saturating_add(here));
                }
            }
            below[x] = b;
        }
        let mut max_len = 0;
        for &s in &self.starts {
            max_len = max_len.max(longest[s]);
            if longest[s] > length_bound {
                fail("length", format!("{} pairs > 2d+1 = {length_bound}", longest[s]));
            }
            for (v, &k) in most[s].iter().enumerate() {
                if k > 2 {
                    fail("occurrences", format!("{} is Current {k} times", g.var_name(Var(v as u32))));
                }
            }
        }
        let mut seen_edge = HashSet::new();
        for x in 0..n {
            for &(sym, y) in &self.out[x] {
                let top = starts.contains(&x);
                if !seen_edge.insert((sym, y, top)) {
                    continue;
                }
                let pair = self.pair(sym);
                let text = self.pair_text(sym);
                if pair.followup.len() > m {
                    fail("followup_degree", format!("{text} has {} > m = {m}", pair.followup.len()));
                }
                if pair.followup.is_empty() && !top {
                    fail("empty_followup_last", format!("{text} below the last pair"));
                }
                if pair.current.is_none() && (!top || !pair.followup.is_empty()) {
                    fail("bottom_last", format!("{text} is not a final (⊥, ∅)"));
                }
                if !pair.followup.is_empty() && !wide.iter().any(|w| pair.vars().is_subset(w)) {
                    fail("production_present", format!("{text} fits no production with r ≥ 2"));
                }
                let mine = pair.vars();
                if !rg.is_clique(&mine) {
                    fail("clique", format!("{text} is not a clique"));
                }
                for (s2, _) in below[y].iter().enumerate().filter(|(_, &b)| b) {
                    let lower = self.pair(s2 as u32);
                    let both: BTreeSet<Var> = mine.union(&lower.vars()).copied().collect();
                    if !rg.is_clique(&both) {
                        fail(
                            "clique",
                            format!("{} before {text} is not a clique", self.pair_text(s2 as u32)),
                        );
                    }
                    if let Some(a) = lower.current {
                        if let Some(b) = mine.iter().find(|&&b| !reach.contains(a, b)) {
                            fail(
                                "reachability",
                                format!(
                                    "{} does not reach {} of a later {text}",
                                    g.var_name(a),
                                    g.var_name(*b)
                                ),
                            );
                        }
                    }
                }
            }
        }
        let states = self.count(memo_budget);
        self.report(states, max_len, length_bound, violations)
    }

    fn report(
        &self,
        states: Option<u128>,
        max_len: usize,
        length_bound: usize,
        violations: BTreeSet<PatternViolation>,
    ) -> SymbolicReport {
        SymbolicReport {
            states,
            max_sequence_length: max_len,
            length_bound,
            control_states: self.control_states,
            pair_symbols: self.symbols.len(),
            saturated_transitions: self.saturated_transitions,
            violations: violations.into_iter().collect(),
        }
    }
}

/// Default cap on saturated transitions.
pub const DEFAULT_SATURATION_BUDGET: usize = 20_000_000;

/// Default cap on memoized subsets when counting states.
pub const DEFAULT_COUNT_MEMO: usize = 2_000_000;

/// Checks every reachable state of the automaton of `g` through its
/// saturated pushdown form.
pub fn check_invariants_symbolic(
    g: &Grammar,
    rg: &ReminderGraph,
    d: usize,
    budget: usize,
) -> Result<SymbolicReport, AutomatonError> {
    Ok(reachable_states(g, budget)?.check(g, rg, d, DEFAULT_COUNT_MEMO))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::build;
    use crate::grammar::parse_grammar;
    use crate::remgraph::{regularity_width, WidthMode};
    use crate::verify::{random_grammar, GrammarSpec};

    fn spec() -> GrammarSpec {
        GrammarSpec {
            n: 3,
            max_rhs_len: 3,
            ..GrammarSpec::default()
        }
    }

    #[test]
    fn same_states_as_the_built_automaton() {
        for seed in 0..40 {
            let g = random_grammar(&spec(), seed).unwrap();
            let Ok(nfa) = build(&g, 100_000) else { continue };
            let rs = reachable_states(&g, DEFAULT_SATURATION_BUDGET).unwrap();
            let want: BTreeSet<ReminderSequence> = nfa.states().iter().cloned().collect();
            assert_eq!(rs.enumerate(200_000).unwrap(), want, "seed {seed}");
            assert_eq!(rs.count(DEFAULT_COUNT_MEMO), Some(want.len() as u128));
        }
    }

    #[test]
    fn g3_states() {
        let g = parse_grammar("start: A3\nA3 -> A2 A2\nA2 -> A1 A1\nA1 -> a").unwrap();
        let nfa = build(&g, 1000).unwrap();
        let rg = ReminderGraph::build(&g);
        let report = check_invariants_symbolic(&g, &rg, 2, 100_000).unwrap();
        assert!(report.ok(), "{:?}", report.violations);
        assert_eq!(report.states, Some(nfa.state_count() as u128));
        let longest = nfa.states().iter().map(ReminderSequence::len).max().unwrap();
        assert_eq!(report.max_sequence_length, longest);
        assert_eq!(longest, 2);
    }

    #[test]
    fn clean_on_random_grammars() {
        for seed in 0..40 {
            let g = random_grammar(&spec(), seed).unwrap();
            let rg = ReminderGraph::build(&g);
            let d = regularity_width(&g, WidthMode::default()).unwrap().d;
            let report = check_invariants_symbolic(&g, &rg, d, DEFAULT_SATURATION_BUDGET).unwrap();
            assert!(report.ok(), "seed {seed}: {:?}", report.violations);
        }
    }

    /// Negative controls: an edgeless reminder graph breaks the clique
    /// check, a too small width breaks the length check.
    #[test]
    fn detects_wrong_graph_and_width() {
        let g = parse_grammar("start: A3\nA3 -> A2 A2\nA2 -> A1 A1\nA1 -> a").unwrap();
        let empty = ReminderGraph::build(&parse_grammar("start: A3\nA3 -> A2\nA2 -> A1\nA1 -> a").unwrap());
        let report = check_invariants_symbolic(&g, &empty, 2, 100_000).unwrap();
        assert!(report.violations.iter().any(|v| v.check == "clique"));
        let rg = ReminderGraph::build(&g);
        let report = check_invariants_symbolic(&g, &rg, 0, 100_000).unwrap();
        assert!(report.violations.iter().any(|v| v.check == "length"));
    }
}
