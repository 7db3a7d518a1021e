//! The automaton over reminder sequences.
//!
//! A state is a sequence of reminder pairs `(Current, Followup)`. The
//! automaton walks down one path of a parse tree; `Current` names the
//! subtree being handled at each stage and `Followup` the siblings still to
//! be visited. Transition labels are terminal words, possibly empty.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_word_over, reachability, stats, Grammar, Term, Var};
use crate::multiset::VarMultiset;
use crate::parikh::ParikhVector;
use crate::remgraph::ReminderGraph;

/// Default cap on the number of automaton states.
pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReminderPair {
    /// `None` is `⊥`.
    pub current: Option<Var>,
    pub followup: VarMultiset,
}

impl ReminderPair {
    pub fn new(current: Option<Var>, followup: VarMultiset) -> Self {
        Self { current, followup }
    }

    /// `RS{i}` for this pair: `Current` together with the `Followup` support.
    pub fn vars(&self) -> BTreeSet<Var> {
        self.current.into_iter().chain(self.followup.iter()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReminderSequence(pub Vec<ReminderPair>);

impl ReminderSequence {
    /// `(S, ∅)`.
    pub fn initial(axiom: Var) -> Self {
        Self(vec![ReminderPair::new(Some(axiom), VarMultiset::new())])
    }

    /// `(⊥, ∅)`.
    pub fn accepting() -> Self {
        Self(vec![ReminderPair::default()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[ReminderPair] {
        &self.0
    }

    pub fn last(&self) -> Option<&ReminderPair> {
        self.0.last()
    }

    /// Number of pairs whose `Current` is `v`.
    pub fn occurrences(&self, v: Var) -> usize {
        self.0.iter().filter(|p| p.current == Some(v)).count()
    }

    pub fn max_occurrences(&self) -> usize {
        let mut counts: HashMap<Var, usize> = HashMap::new();
        for v in self.0.iter().filter_map(|p| p.current) {
            *counts.entry(v).or_default() += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }

    /// Every variable mentioned anywhere in the sequence.
    pub fn vars(&self) -> BTreeSet<Var> {
        self.0.iter().flat_map(ReminderPair::vars).collect()
    }

    /// `⟦RS⟧`: all followups plus the last `Current`. This is the multiset
    /// of variables still to be rewritten.
    pub fn pending(&self) -> VarMultiset {
        let mut out: Vec<Var> = self.0.iter().flat_map(|p| p.followup.iter()).collect();
        if let Some(v) = self.last().and_then(|p| p.current) {
            out.push(v);
        }
        out.into_iter().collect()
    }

    pub fn prefix(&self, len: usize) -> Self {
        Self(self.0[..len].to_vec())
    }

    pub fn display(&self, variables: &[String]) -> String {
        let mut s = String::new();
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                s.push('·');
            }
            s.push('(');
            match p.current {
                Some(v) => s.push_str(&variables[v.index()]),
                None => s.push('⊥'),
            }
            s.push(',');
            if p.followup.is_empty() {
                s.push('∅');
            } else {
                s.push('⟦');
                let names: Vec<&str> = p.followup.iter().map(|v| variables[v.index()].as_str()).collect();
                s.push_str(&names.join(","));
                s.push('⟧');
            }
            s.push(')');
        }
        s
    }
}

/// One outgoing move of a state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Successor {
    pub label: Vec<Term>,
    pub rule: u8,
    pub production: Option<usize>,
    pub target: ReminderSequence,
}

/// All moves licensed by the five rules, with targets in which some
/// variable is `Current` three or more times removed. Sorted, no duplicates.
pub fn successors(rs: &ReminderSequence, g: &Grammar) -> Vec<Successor> {
    let mut out = BTreeSet::new();
    let Some(last) = rs.last() else {
        return Vec::new();
    };
    let body = &rs.0[..rs.len() - 1];
    let with_last = |pairs: Vec<ReminderPair>| {
        let mut v = body.to_vec();
        v.extend(pairs);
        ReminderSequence(v)
    };
    if let Some(a) = last.current {
        for &prod in g.productions_of(a) {
            let p = g.production(prod);
            let label = p.terminal_word();
            let vars: Vec<Var> = p.vars().collect();
            if vars.is_empty() {
                if last.followup.is_empty() {
                    // Rule 3.
                    out.insert(Successor {
                        label,
                        rule: 3,
                        production: Some(prod),
                        target: with_last(vec![ReminderPair::default()]),
                    });
                } else {
                    // Rule 4.
                    for a2 in last.followup.distinct() {
                        let rest = last.followup.without(a2).expect("a2 is in followup");
                        out.insert(Successor {
                            label: label.clone(),
                            rule: 4,
                            production: Some(prod),
                            target: with_last(vec![ReminderPair::new(Some(a2), rest)]),
                        });
                    }
                }
                continue;
            }
            let all: VarMultiset = vars.iter().copied().collect();
            for &aj in &vars {
                let pair = ReminderPair::new(Some(aj), all.without(aj).expect("aj is in rhs"));
                let (rule, target) = if last.followup.is_empty() {
                    (1, with_last(vec![pair]))
                } else {
                    (2, with_last(vec![last.clone(), pair]))
                };
                out.insert(Successor {
                    label: label.clone(),
                    rule,
                    production: Some(prod),
                    target,
                });
            }
        }
    } else if last.followup.is_empty() && rs.len() >= 2 {
        // Rule 5.
        let prev = &rs.0[rs.len() - 2];
        for a2 in prev.followup.distinct() {
            let rest = prev.followup.without(a2).expect("a2 is in followup");
            let mut v = rs.0[..rs.len() - 2].to_vec();
            v.push(ReminderPair::new(Some(a2), rest));
            out.insert(Successor {
                label: Vec::new(),
                rule: 5,
                production: None,
                target: ReminderSequence(v),
            });
        }
    }
    out.into_iter()
        .filter(|s| s.target.max_occurrences() <= 2)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub src: usize,
    pub label: Vec<Term>,
    pub rule: u8,
    pub production: Option<usize>,
    pub dst: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("state budget of {budget} exceeded ({states} states, {transitions} transitions so far)")]
    StateBudget {
        budget: usize,
        states: usize,
        transitions: usize,
    },
    #[error("search budget of {budget} configurations exceeded")]
    SearchBudget { budget: usize },
    #[error("invalid automaton: {0}")]
    Invalid(String),
}

/// The automaton with its states in breadth-first discovery order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nfa {
    variables: Vec<String>,
    terminals: Vec<String>,
    states: Vec<ReminderSequence>,
    index: HashMap<ReminderSequence, usize>,
    transitions: Vec<Transition>,
    outgoing: Vec<Vec<usize>>,
}

/// Breadth-first closure of [`successors`] from `(S, ∅)`. Each layer is
/// expanded in parallel and committed in order, so the result does not
/// depend on scheduling.
pub fn build(g: &Grammar, budget: usize) -> Result<Nfa, AutomatonError> {
    let mut nfa = Nfa {
        variables: g.variables().to_vec(),
        terminals: g.terminals().to_vec(),
        states: Vec::new(),
        index: HashMap::new(),
        transitions: Vec::new(),
        outgoing: Vec::new(),
    };
    nfa.intern(ReminderSequence::initial(g.axiom()));
    let mut frontier = vec![0usize];
    while !frontier.is_empty() {
        let expanded: Vec<Vec<Successor>> = frontier
            .par_iter()
            .map(|&s| successors(&nfa.states[s], g))
            .collect();
        let mut next = Vec::new();
        for (&src, succs) in frontier.iter().zip(expanded) {
            for s in succs {
                let before = nfa.states.len();
                let dst = nfa.intern(s.target);
                if nfa.states.len() > before {
                    if nfa.states.len() > budget {
                        return Err(AutomatonError::StateBudget {
                            budget,
                            states: nfa.states.len(),
                            transitions: nfa.transitions.len(),
                        });
                    }
                    next.push(dst);
                }
                nfa.push_transition(Transition {
                    src,
                    label: s.label,
                    rule: s.rule,
                    production: s.production,
                    dst,
                });
            }
        }
        frontier = next;
    }
    Ok(nfa)
}

impl Nfa {
    fn intern(&mut self, rs: ReminderSequence) -> usize {
        if let Some(&i) = self.index.get(&rs) {
            return i;
        }
        let i = self.states.len();
        self.index.insert(rs.clone(), i);
        self.states.push(rs);
        self.outgoing.push(Vec::new());
        i
    }

    fn push_transition(&mut self, t: Transition) {
        self.outgoing[t.src].push(self.transitions.len());
        self.transitions.push(t);
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn states(&self) -> &[ReminderSequence] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &ReminderSequence {
        &self.states[i]
    }

    pub fn state_index(&self, rs: &ReminderSequence) -> Option<usize> {
        self.index.get(rs).copied()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &Transition> {
        self.outgoing[state].iter().map(|&i| &self.transitions[i])
    }

    pub fn initial(&self) -> usize {
        0
    }

    /// Index of `(⊥, ∅)`, absent when it is unreachable.
    pub fn final_state(&self) -> Option<usize> {
        self.state_index(&ReminderSequence::accepting())
    }

    pub fn has_transition(&self, t: &Transition) -> bool {
        t.src < self.states.len() && self.outgoing(t.src).any(|x| x == t)
    }

    /// A copy without transition `idx`; used to build negative controls.
    pub fn without_transition(&self, idx: usize) -> Nfa {
        let mut out = Nfa {
            variables: self.variables.clone(),
            terminals: self.terminals.clone(),
            states: self.states.clone(),
            index: self.index.clone(),
            transitions: Vec::new(),
            outgoing: vec![Vec::new(); self.states.len()],
        };
        for (i, t) in self.transitions.iter().enumerate() {
            if i != idx {
                out.push_transition(t.clone());
            }
        }
        out
    }

    pub fn parse_word(&self, text: &str) -> Option<Vec<Term>> {
        parse_word_over(&self.terminals, text)
    }

    pub fn word_text(&self, word: &[Term]) -> String {
        word.iter()
            .map(|t| self.terminals[t.index()].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// An accepting run spelling `word`, as transition indices.
    pub fn accepts(&self, word: &[Term]) -> Option<Vec<usize>> {
        let fin = self.final_state()?;
        let start = (self.initial(), 0usize);
        let mut parent: HashMap<(usize, usize), Option<((usize, usize), usize)>> =
            HashMap::from([(start, None)]);
        let mut queue = VecDeque::from([start]);
        while let Some((s, pos)) = queue.pop_front() {
            if s == fin && pos == word.len() {
                let mut run = Vec::new();
                let mut at = (s, pos);
                while let Some(Some((prev, t))) = parent.get(&at) {
                    run.push(*t);
                    at = *prev;
                }
                run.reverse();
                return Some(run);
            }
            for &ti in &self.outgoing[s] {
                let t = &self.transitions[ti];
                let end = pos + t.label.len();
                if end <= word.len() && word[pos..end] == t.label[..] {
                    let key = (t.dst, end);
                    if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(key) {
                        e.insert(Some(((s, pos), ti)));
                        queue.push_back(key);
                    }
                }
            }
        }
        None
    }

    /// Parikh vectors of accepted words of length at most `k`.
    pub fn bounded_parikh(&self, k: u64, budget: usize) -> Result<BTreeSet<ParikhVector>, AutomatonError> {
        let mut out = BTreeSet::new();
        let Some(fin) = self.final_state() else {
            return Ok(out);
        };
        let start = (self.initial(), ParikhVector::zero());
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some((s, v)) = queue.pop_front() {
            if s == fin {
                out.insert(v.clone());
            }
            for t in self.outgoing(s) {
                if v.total() + t.label.len() as u64 > k {
                    continue;
                }
                let next = (t.dst, &v + &ParikhVector::of_word(&t.label));
                if seen.insert(next.clone()) {
                    if seen.len() > budget {
                        return Err(AutomatonError::SearchBudget { budget });
                    }
                    queue.push_back(next);
                }
            }
        }
        Ok(out)
    }

    /// Splits every label of length `ℓ ≥ 2` into `ℓ` single-letter steps
    /// through `ℓ − 1` fresh states.
    pub fn expand_letters(&self) -> LetterNfa {
        let mut state_count = self.states.len();
        let mut transitions = Vec::new();
        for t in &self.transitions {
            if t.label.len() <= 1 {
                transitions.push(LetterTransition {
                    src: t.src,
                    letter: t.label.first().copied(),
                    dst: t.dst,
                });
                continue;
            }
            let mut from = t.src;
            for (i, &a) in t.label.iter().enumerate() {
                let to = if i + 1 == t.label.len() {
                    t.dst
                } else {
                    state_count += 1;
                    state_count - 1
                };
                transitions.push(LetterTransition {
                    src: from,
                    letter: Some(a),
                    dst: to,
                });
                from = to;
            }
        }
        LetterNfa {
            state_count,
            initial: self.initial(),
            final_state: self.final_state(),
            transitions,
        }
    }

    pub fn to_json(&self) -> NfaJson {
        let var_name = |v: Var| self.variables[v.index()].clone();
        NfaJson {
            variables: self.variables.clone(),
            terminals: self.terminals.clone(),
            initial: self.initial(),
            final_state: self.final_state(),
            states: self
                .states
                .iter()
                .map(|rs| {
                    rs.0.iter()
                        .map(|p| PairJson {
                            current: p.current.map(var_name),
                            followup: p.followup.distinct().map(|v| (var_name(v), p.followup.count(v))).collect(),
                        })
                        .collect()
                })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionJson {
                    src: t.src,
                    label: t.label.iter().map(|x| self.terminals[x.index()].clone()).collect(),
                    rule: t.rule,
                    production_index: t.production,
                    dst: t.dst,
                })
                .collect(),
        }
    }

    pub fn from_json(j: &NfaJson) -> Result<Nfa, AutomatonError> {
        let bad = |m: String| AutomatonError::Invalid(m);
        let var = |name: &str| {
            j.variables
                .iter()
                .position(|v| v == name)
                .map(|i| Var(i as u32))
                .ok_or_else(|| bad(format!("unknown variable `{name}`")))
        };
        let term = |name: &str| {
            j.terminals
                .iter()
                .position(|v| v == name)
                .map(|i| Term(i as u32))
                .ok_or_else(|| bad(format!("unknown terminal `{name}`")))
        };
        let mut nfa = Nfa {
            variables: j.variables.clone(),
            terminals: j.terminals.clone(),
            states: Vec::new(),
            index: HashMap::new(),
            transitions: Vec::new(),
            outgoing: Vec::new(),
        };
        for s in &j.states {
            let mut pairs = Vec::new();
            for p in s {
                let current = p.current.as_deref().map(var).transpose()?;
                let mut followup = Vec::new();
                for (name, &count) in &p.followup {
                    let v = var(name)?;
                    followup.extend(std::iter::repeat_n(v, count));
                }
                pairs.push(ReminderPair::new(current, followup.into_iter().collect()));
            }
            let rs = ReminderSequence(pairs);
            if nfa.index.contains_key(&rs) {
                return Err(bad(format!("duplicate state {}", rs.display(&j.variables))));
            }
            nfa.intern(rs);
        }
        if j.initial != 0 || nfa.states.is_empty() {
            return Err(bad("the initial state must be state 0".into()));
        }
        if j.final_state != nfa.final_state() {
            return Err(bad("final state does not match (⊥, ∅)".into()));
        }
        for t in &j.transitions {
            if t.src >= nfa.states.len() || t.dst >= nfa.states.len() {
                return Err(bad(format!("transition {} -> {} out of range", t.src, t.dst)));
            }
            if !(1..=5).contains(&t.rule) {
                return Err(bad(format!("rule tag {}", t.rule)));
            }
            let label = t.label.iter().map(|x| term(x)).collect::<Result<Vec<_>, _>>()?;
            nfa.push_transition(Transition {
                src: t.src,
                label,
                rule: t.rule,
                production: t.production_index,
                dst: t.dst,
            });
        }
        Ok(nfa)
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph automaton {\n  rankdir=LR;\n  start [shape=point];\n");
        let fin = self.final_state();
        for (i, rs) in self.states.iter().enumerate() {
            let shape = if Some(i) == fin { "doublecircle" } else { "circle" };
            let _ = writeln!(
                s,
                "  {i} [shape={shape}, label=\"{}\"];",
                rs.display(&self.variables).replace('"', "\\\"")
            );
        }
        let _ = writeln!(s, "  start -> {};", self.initial());
        for t in &self.transitions {
            let label = if t.label.is_empty() {
                "ε".to_string()
            } else {
                self.word_text(&t.label)
            };
            let _ = writeln!(s, "  {} -> {} [label=\"{} ({})\"];", t.src, t.dst, label, t.rule);
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairJson {
    pub current: Option<String>,
    pub followup: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionJson {
    pub src: usize,
    pub label: Vec<String>,
    pub rule: u8,
    pub production_index: Option<usize>,
    pub dst: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NfaJson {
    pub variables: Vec<String>,
    pub terminals: Vec<String>,
    pub initial: usize,
    #[serde(rename = "final")]
    pub final_state: Option<usize>,
    pub states: Vec<Vec<PairJson>>,
    pub transitions: Vec<TransitionJson>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LetterTransition {
    pub src: usize,
    /// `None` reads ε.
    pub letter: Option<Term>,
    pub dst: usize,
}

/// Automaton whose labels have length at most one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LetterNfa {
    pub state_count: usize,
    pub initial: usize,
    pub final_state: Option<usize>,
    pub transitions: Vec<LetterTransition>,
}

impl LetterNfa {
    pub fn bounded_parikh(&self, k: u64, budget: usize) -> Result<BTreeSet<ParikhVector>, AutomatonError> {
        let mut out = BTreeSet::new();
        let Some(fin) = self.final_state else {
            return Ok(out);
        };
        let mut adj = vec![Vec::new(); self.state_count];
        for t in &self.transitions {
            adj[t.src].push(*t);
        }
        let start = (self.initial, ParikhVector::zero());
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some((s, v)) = queue.pop_front() {
            if s == fin {
                out.insert(v.clone());
            }
            for t in &adj[s] {
                let mut w = v.clone();
                if let Some(a) = t.letter {
                    if v.total() >= k {
                        continue;
                    }
                    w.add_letter(a, 1);
                }
                if seen.insert((t.dst, w.clone())) {
                    if seen.len() > budget {
                        return Err(AutomatonError::SearchBudget { budget });
                    }
                    queue.push_back((t.dst, w));
                }
            }
        }
        Ok(out)
    }
}

/// A broken structural fact about one state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StateViolation {
    pub state: usize,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub states_checked: usize,
    pub max_sequence_length: usize,
    pub length_bound: usize,
    /// Sequences longer than `d` pairs. Legal, but longer than the tighter
    /// count one might read off the occurrence argument.
    pub states_longer_than_d: usize,
    pub violations: Vec<StateViolation>,
}

impl InvariantReport {
    pub fn empty(length_bound: usize) -> Self {
        Self {
            states_checked: 0,
            max_sequence_length: 0,
            length_bound,
            states_longer_than_d: 0,
            violations: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the structural facts every state must satisfy: the variables of
/// a state form a clique in the reminder graph, followups are bounded by
/// the degree, only the last pair may have an empty followup, earlier
/// `Current`s reach everything later, each followup fits inside one
/// production with two or more variables, no variable is `Current` more
/// than twice, `⊥` appears only as a final `(⊥, ∅)`, and `|RS| ≤ 2d + 1`.
pub fn check_state_invariants(
    states: &[ReminderSequence],
    g: &Grammar,
    rg: &ReminderGraph,
    d: usize,
) -> InvariantReport {
    let m = stats(g).m;
    let reach = reachability(g);
    let wide: Vec<BTreeSet<Var>> = g
        .productions()
        .iter()
        .filter(|p| p.var_count() >= 2)
        .map(|p| p.vars().collect())
        .collect();
    let length_bound = 2 * d + 1;
    let mut violations = Vec::new();
    let mut max_len = 0;
    let mut longer = 0;
    for (state, rs) in states.iter().enumerate() {
        let mut fail = |check: &'static str, detail: String| {
            violations.push(StateViolation { state, check, detail });
        };
        let n = rs.len();
        max_len = max_len.max(n);
        if n > d {
            longer += 1;
        }
        if n == 0 {
            fail("nonempty", "empty sequence".into());
            continue;
        }
        if n > length_bound {
            fail("length", format!("{n} pairs > 2d+1 = {length_bound}"));
        }
        if !rg.is_clique(&rs.vars()) {
            fail("clique", format!("{:?} is not a clique", rs.vars()));
        }
        if rs.max_occurrences() > 2 {
            fail("occurrences", "a variable is Current three or more times".into());
        }
        for (i, p) in rs.pairs().iter().enumerate() {
            if p.followup.len() > m {
                fail("followup_degree", format!("pair {} has {} > m = {m}", i + 1, p.followup.len()));
            }
            if p.followup.is_empty() && i + 1 != n {
                fail("empty_followup_last", format!("pair {} of {n} has empty followup", i + 1));
            }
            if p.current.is_none() && (i + 1 != n || !p.followup.is_empty()) {
                fail("bottom_last", format!("⊥ at pair {} of {n}", i + 1));
            }
            if !p.followup.is_empty() {
                let vs = p.vars();
                if !wide.iter().any(|w| vs.is_subset(w)) {
                    fail("production_present", format!("pair {} fits no production with r ≥ 2", i + 1));
                }
            }
            if let Some(a) = p.current {
                for later in &rs.pairs()[i + 1..] {
                    for b in later.vars() {
                        if !reach.contains(a, b) {
                            fail("reachability", format!("pair {}: Current does not reach {b:?}", i + 1));
                        }
                    }
                }
            }
        }
    }
    InvariantReport {
        states_checked: states.len(),
        max_sequence_length: max_len,
        length_bound,
        states_longer_than_d: longer,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeReport {
    pub states: usize,
    pub transitions: usize,
    pub letter_states: usize,
    pub letter_transitions: usize,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub e: usize,
    pub productions: usize,
    /// `n · d^(2d(m+1))`; `None` if it does not fit in 128 bits.
    pub reference: Option<u128>,
    /// Observed word-level states above the reference value. Informational:
    /// the bound holds only up to an unspecified polynomial.
    pub exceeds_reference: bool,
    pub letter_exceeds_reference: bool,
}

pub fn size_reference(n: usize, d: usize, m: usize) -> Option<u128> {
    let exp = u32::try_from(2 * d * (m + 1)).ok()?;
    (d as u128).checked_pow(exp)?.checked_mul(n as u128)
}

pub fn size_report(nfa: &Nfa, g: &Grammar, d: usize) -> SizeReport {
    let st = stats(g);
    let letters = nfa.expand_letters();
    let reference = size_reference(st.n, d, st.m);
    let over = |x: usize| reference.is_some_and(|r| x as u128 > r);
    SizeReport {
        states: nfa.state_count(),
        transitions: nfa.transitions().len(),
        letter_states: letters.state_count,
        letter_transitions: letters.transitions.len(),
        n: st.n,
        d,
        m: st.m,
        e: st.e,
        productions: st.p_count,
        reference,
        exceeds_reference: over(nfa.state_count()),
        letter_exceeds_reference: over(letters.state_count),
    }
}
