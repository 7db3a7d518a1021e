//! Translations between parse trees and automaton runs.
//!
//! Completeness: a parse tree is walked down one path at a time. A
//! configuration pairs the automaton state with the subtree being handled
//! (`tree`) and a valuation holding, per reminder pair, the sibling
//! subtrees still to be visited. Every step deletes part of the trees,
//! emits the terminals it deleted, and keeps the valuation compact so the
//! state stays within the automaton.
//!
//! Soundness: an accepting run is replayed as a leftmost rewriting of
//! sentential forms whose variable content tracks `⟦RS⟧`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::automaton::{successors, Nfa, ReminderPair, ReminderSequence};
use crate::grammar::{Grammar, Sym, Term, Var};
use crate::multiset::VarMultiset;
use crate::parikh::ParikhVector;
use crate::parsetree::{reduce_recurrence, Label, ParseTree, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invariant violated at step {step}: {detail}")]
    Invariant { step: usize, detail: String },
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error("level {0} out of range")]
    OutOfRange(usize),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Per-level multisets of full parse trees. Level `i` (1-based in all
/// messages) belongs to reminder pair `R_i`, and its roots must be exactly
/// `R_i.Followup`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    levels: Vec<BTreeMap<ParseTree, usize>>,
}

impl Valuation {
    /// All levels empty.
    pub fn empty(len: usize) -> Self {
        Self {
            levels: vec![BTreeMap::new(); len],
        }
    }

    pub fn from_levels(levels: Vec<Vec<ParseTree>>) -> Self {
        let levels = levels
            .into_iter()
            .map(|trees| {
                let mut m = BTreeMap::new();
                for t in trees {
                    *m.entry(t).or_insert(0) += 1;
                }
                m
            })
            .collect();
        Self { levels }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Trees at 0-based level `i` with multiplicities.
    pub fn level(&self, i: usize) -> &BTreeMap<ParseTree, usize> {
        &self.levels[i]
    }

    /// Trees at 0-based level `i`, each repeated by its multiplicity.
    pub fn level_trees(&self, i: usize) -> Vec<ParseTree> {
        self.levels[i]
            .iter()
            .flat_map(|(t, &n)| std::iter::repeat(t.clone()).take(n))
            .collect()
    }

    pub fn tree_count(&self) -> usize {
        self.levels.iter().flat_map(|l| l.values()).sum()
    }

    /// The first `n` levels; `n` may be 0.
    fn truncated(&self, n: usize) -> Self {
        Self {
            levels: self.levels[..n].to_vec(),
        }
    }

    fn push_level(&mut self, trees: Vec<ParseTree>) {
        let mut m = BTreeMap::new();
        for t in trees {
            *m.entry(t).or_insert(0) += 1;
        }
        self.levels.push(m);
    }

    /// Checks level count and the root condition against `rs`.
    pub fn validate(&self, rs: &ReminderSequence, g: &Grammar) -> Result<(), TraceError> {
        if self.levels.len() != rs.len() {
            return Err(TraceError::Precondition(format!(
                "valuation has {} levels for a sequence of length {}",
                self.levels.len(),
                rs.len()
            )));
        }
        for (i, (level, pair)) in self.levels.iter().zip(rs.pairs()).enumerate() {
            let mut roots = VarMultiset::new();
            for (t, &n) in level {
                t.validate(g, false)?;
                let root = t.root_var().ok_or_else(|| {
                    TraceError::Precondition(format!("level {}: tree without a variable root", i + 1))
                })?;
                for _ in 0..n {
                    roots.insert(root);
                }
            }
            if roots != pair.followup {
                return Err(TraceError::Precondition(format!(
                    "level {}: roots {} differ from followup {}",
                    i + 1,
                    roots.display(g),
                    pair.followup.display(g)
                )));
            }
        }
        Ok(())
    }

    /// Variables occurring in trees at 0-based levels `range`.
    fn vars_in(&self, range: std::ops::Range<usize>) -> BTreeSet<Var> {
        self.levels[range]
            .iter()
            .flat_map(|l| l.keys())
            .flat_map(ParseTree::variables)
            .collect()
    }

    /// `V[val↓i]` for 1-based `i`.
    pub fn vars_up_to(&self, i: usize) -> BTreeSet<Var> {
        self.vars_in(0..i.min(self.levels.len()))
    }
}

/// `f(t)`: `⊥` counts 1, a node without variable children 2, otherwise 1
/// plus the sum over its variable-rooted immediate subtrees.
pub fn info_f(t: &ParseTree) -> u64 {
    if t.is_bottom() {
        return 1;
    }
    if !t.has_var_child() {
        return 2;
    }
    1 + t.var_subtrees().map(info_f).sum::<u64>()
}

/// `f` summed over a valuation, weighted by multiplicity.
pub fn valuation_f(val: &Valuation) -> u64 {
    val.levels
        .iter()
        .flat_map(|l| l.iter())
        .map(|(t, &n)| info_f(t) * n as u64)
        .sum()
}

/// Sum of the Parikh images of all yields, weighted by multiplicity.
pub fn valuation_parikh(val: &Valuation) -> ParikhVector {
    val.levels
        .iter()
        .flat_map(|l| l.iter())
        .map(|(t, &n)| t.parikh().scaled(n as u64))
        .sum()
}

/// The first `i` levels.
pub fn restrict(val: &Valuation, i: usize) -> Result<Valuation, TraceError> {
    if i == 0 || i > val.len() {
        return Err(TraceError::OutOfRange(i));
    }
    Ok(Valuation {
        levels: val.levels[..i].to_vec(),
    })
}

/// The first `i` reminder pairs.
pub fn restrict_sequence(rs: &ReminderSequence, i: usize) -> Result<ReminderSequence, TraceError> {
    if i == 0 || i > rs.len() {
        return Err(TraceError::OutOfRange(i));
    }
    Ok(rs.prefix(i))
}

/// Variables that occur twice on some root-to-leaf path of `t`.
fn recurring_vars(t: &ParseTree) -> BTreeSet<Var> {
    fn go(t: &ParseTree, path: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        let here = t.root_var();
        if let Some(v) = here {
            if path.contains(&v) {
                out.insert(v);
            }
            path.push(v);
        }
        for c in t.children() {
            go(c, path, out);
        }
        if here.is_some() {
            path.pop();
        }
    }
    let mut out = BTreeSet::new();
    go(t, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Compactness {
    /// A repeated `Current` with a nonempty later followup, yet higher
    /// levels still mention it.
    RepeatOccurs,
    /// Lower levels are free of `R_i.Current` but higher ones are not.
    OccurrenceLeaks,
    /// Lower levels mention `R_i.Current` and a higher one repeats it on a
    /// path.
    RecurrenceLeaks,
}

impl fmt::Display for Compactness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Compactness::RepeatOccurs => "CP.I",
            Compactness::OccurrenceLeaks => "CP.II",
            Compactness::RecurrenceLeaks => "CP.III",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompactViolation {
    pub property: Compactness,
    /// 1-based index of the reminder pair that triggers the condition.
    pub index: usize,
    /// 1-based level of an offending tree.
    pub level: usize,
    pub var: Var,
}

/// Cached per-level facts used by the compactness and step checks.
struct LevelFacts {
    occurs: Vec<BTreeSet<Var>>,
    recurs: Vec<BTreeSet<Var>>,
}

impl LevelFacts {
    fn of(val: &Valuation) -> Self {
        let occurs = val
            .levels
            .iter()
            .map(|l| l.keys().flat_map(ParseTree::variables).collect())
            .collect();
        let recurs = val
            .levels
            .iter()
            .map(|l| l.keys().flat_map(recurring_vars).collect())
            .collect();
        Self { occurs, recurs }
    }

    /// Whether `v` occurs at some 1-based level `≤ i`.
    fn occurs_up_to(&self, v: Var, i: usize) -> bool {
        self.occurs[..i.min(self.occurs.len())].iter().any(|s| s.contains(&v))
    }

    /// First 1-based level `≥ from` whose trees mention `v`.
    fn first_occurrence_from(&self, v: Var, from: usize) -> Option<usize> {
        (from..=self.occurs.len()).find(|&l| self.occurs[l - 1].contains(&v))
    }

    fn first_recurrence_from(&self, v: Var, from: usize) -> Option<usize> {
        (from..=self.recurs.len()).find(|&l| self.recurs[l - 1].contains(&v))
    }
}

/// Repeated-`Current` pairs `(k, A)`: `R_k.Current = A` equals an earlier
/// `Current` and `R_k.Followup ≠ ∅`. `k` is 1-based.
fn repeated_with_followup(rs: &ReminderSequence) -> Vec<(usize, Var)> {
    let pairs = rs.pairs();
    let mut out = Vec::new();
    for k in 1..pairs.len() {
        let Some(a) = pairs[k].current else { continue };
        if !pairs[k].followup.is_empty() && pairs[..k].iter().any(|p| p.current == Some(a)) {
            out.push((k + 1, a));
        }
    }
    out
}

fn current_var(rs: &ReminderSequence, i: usize) -> Option<Var> {
    rs.pairs()[i - 1].current
}

fn check_cp(
    val: &Valuation,
    rs: &ReminderSequence,
    only: &[Compactness],
) -> Option<CompactViolation> {
    let facts = LevelFacts::of(val);
    let len = rs.len().min(val.len());
    if only.contains(&Compactness::RepeatOccurs) {
        for (k, a) in repeated_with_followup(rs) {
            if let Some(level) = facts.first_occurrence_from(a, k + 1) {
                return Some(CompactViolation {
                    property: Compactness::RepeatOccurs,
                    index: k,
                    level,
                    var: a,
                });
            }
        }
    }
    for i in 1..len {
        let Some(a) = current_var(rs, i) else { continue };
        let low = facts.occurs_up_to(a, i + 1);
        if !low && only.contains(&Compactness::OccurrenceLeaks) {
            if let Some(level) = facts.first_occurrence_from(a, i + 2) {
                return Some(CompactViolation {
                    property: Compactness::OccurrenceLeaks,
                    index: i,
                    level,
                    var: a,
                });
            }
        }
        if low && only.contains(&Compactness::RecurrenceLeaks) {
            if let Some(level) = facts.first_recurrence_from(a, i + 2) {
                return Some(CompactViolation {
                    property: Compactness::RecurrenceLeaks,
                    index: i,
                    level,
                    var: a,
                });
            }
        }
    }
    None
}

const ALL_CP: [Compactness; 3] = [
    Compactness::RepeatOccurs,
    Compactness::OccurrenceLeaks,
    Compactness::RecurrenceLeaks,
];

/// First violated compactness property, checking CP.I, then CP.II and
/// CP.III by ascending index.
pub fn first_violation(val: &Valuation, rs: &ReminderSequence) -> Option<CompactViolation> {
    check_cp(val, rs, &ALL_CP)
}

pub fn is_compact(val: &Valuation, rs: &ReminderSequence) -> bool {
    first_violation(val, rs).is_none()
}

/// A compact valuation with the same Parikh image whose variable sets
/// `V[·↓i]` only grow. Recurrence loops in the top level that clash with
/// lower levels are moved into those lower trees, then the prefix is
/// compactified recursively, until no clash remains.
pub fn compactify(val: &Valuation, rs: &ReminderSequence) -> Result<Valuation, TraceError> {
    compactify_counting(val, rs).map(|(v, _)| v)
}

/// [`compactify`] together with the number of loops it moved.
pub fn compactify_counting(
    val: &Valuation,
    rs: &ReminderSequence,
) -> Result<(Valuation, usize), TraceError> {
    if val.len() != rs.len() {
        return Err(TraceError::Precondition(format!(
            "valuation has {} levels for a sequence of length {}",
            val.len(),
            rs.len()
        )));
    }
    if let Some(v) = check_cp(val, rs, &ALL_CP[..2]) {
        return Err(TraceError::Precondition(format!(
            "{} fails at index {}, level {}",
            v.property, v.index, v.level
        )));
    }
    let mut out = val.clone();
    let moved = compactify_levels(&mut out.levels, rs.pairs());
    Ok((out, moved))
}

fn compactify_levels(levels: &mut [BTreeMap<ParseTree, usize>], pairs: &[ReminderPair]) -> usize {
    let len = levels.len();
    if len <= 1 {
        return 0;
    }
    let mut moved = 0;
    loop {
        while let Some((low, high, a)) = witness(levels, pairs) {
            move_loop(levels, low, high, a);
            moved += 1;
        }
        moved += compactify_levels(&mut levels[..len - 1], &pairs[..len - 1]);
        if witness(levels, pairs).is_none() {
            return moved;
        }
    }
}

/// A clash `(t1, t2)`: for some `i < len − 1`, `t1` at level `≤ i + 1`
/// mentions `A = R_i.Current` and `t2` at the top level repeats `A` on a
/// path. Returns the two trees and `A`.
fn witness(
    levels: &[BTreeMap<ParseTree, usize>],
    pairs: &[ReminderPair],
) -> Option<((usize, ParseTree), ParseTree, Var)> {
    let top = levels.len() - 1;
    for i in 1..levels.len() - 1 {
        let Some(a) = pairs[i - 1].current else { continue };
        let Some(t2) = levels[top].keys().find(|t| !t.is_recurrence_free(a)) else {
            continue;
        };
        for (l, level) in levels.iter().enumerate().take(i + 1) {
            if let Some(t1) = level.keys().find(|t| t.occurs(a)) {
                return Some(((l, t1.clone()), t2.clone(), a));
            }
        }
    }
    None
}

fn take_one(level: &mut BTreeMap<ParseTree, usize>, t: &ParseTree) {
    let n = level.get_mut(t).expect("tree is present");
    *n -= 1;
    if *n == 0 {
        level.remove(t);
    }
}

fn put(level: &mut BTreeMap<ParseTree, usize>, t: ParseTree) {
    *level.entry(t).or_insert(0) += 1;
}

fn move_loop(
    levels: &mut [BTreeMap<ParseTree, usize>],
    (low, t1): (usize, ParseTree),
    t2: ParseTree,
    a: Var,
) {
    let top = levels.len() - 1;
    take_one(&mut levels[low], &t1);
    take_one(&mut levels[top], &t2);
    let mut t1 = t1;
    let mut t2 = t2;
    let pump = t2.excise_loop(a).expect("t2 repeats a");
    pump.insert_into(&mut t1).expect("t1 mentions a");
    put(&mut levels[low], t1);
    put(&mut levels[top], t2);
}

/// A state of the completeness walk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub rs: ReminderSequence,
    pub word: Vec<Term>,
    pub val: Valuation,
    /// Rooted at the last `Current`, or `⊥`.
    pub tree: ParseTree,
}

impl Configuration {
    /// `((S, ∅), ε, ∅, t)` for a full tree `t` rooted at the axiom.
    pub fn initial(g: &Grammar, tree: ParseTree) -> Result<Self, TraceError> {
        tree.validate(g, false)?;
        if tree.root_var() != Some(g.axiom()) {
            return Err(TraceError::Precondition("tree is not rooted at the axiom".into()));
        }
        Ok(Self {
            rs: ReminderSequence::initial(g.axiom()),
            word: Vec::new(),
            val: Valuation::empty(1),
            tree,
        })
    }

    /// `|c| = f(val) + f(tree)`.
    pub fn size(&self) -> u64 {
        valuation_f(&self.val) + info_f(&self.tree)
    }

    /// `Π(val) + Π(w) + Π(Y(tree))`.
    pub fn total_parikh(&self) -> ParikhVector {
        valuation_parikh(&self.val) + ParikhVector::of_word(&self.word) + self.tree.parikh()
    }

    /// Well-formedness: valuation roots, compactness and the tree root.
    pub fn validate(&self, g: &Grammar) -> Result<(), TraceError> {
        self.val.validate(&self.rs, g)?;
        if let Some(v) = first_violation(&self.val, &self.rs) {
            return Err(TraceError::Precondition(format!(
                "valuation not compact: {} at index {}, level {}",
                v.property, v.index, v.level
            )));
        }
        let last = self.rs.last().ok_or_else(|| TraceError::Precondition("empty sequence".into()))?;
        let root = match self.tree.label() {
            Label::Var(v) => Some(v),
            Label::Bottom => None,
            Label::Term(_) => {
                return Err(TraceError::Precondition("tree rooted at a terminal".into()));
            }
        };
        if root != last.current {
            return Err(TraceError::Precondition(
                "tree root differs from the last Current".into(),
            ));
        }
        if !self.tree.is_bottom() {
            self.tree.validate(g, false)?;
        }
        Ok(())
    }

    /// The three side conditions on the active tree that a step needs and
    /// re-establishes. Returns a description of the first failure.
    pub fn check_properties(&self) -> Result<(), String> {
        let rs = &self.rs;
        for (k, a) in repeated_with_followup(rs) {
            if self.tree.var_subtrees().any(|s| s.occurs(a)) {
                return Err(format!("I: immediate subtree mentions a repeated Current (index {k})"));
            }
        }
        let facts = LevelFacts::of(&self.val);
        for i in 1..rs.len() {
            let Some(a) = current_var(rs, i) else { continue };
            if rs.pairs()[i].followup.is_empty() {
                continue;
            }
            if facts.occurs_up_to(a, i + 1) {
                if !self.tree.is_recurrence_free(a) {
                    return Err(format!("III: tree repeats R_{i}.Current"));
                }
            } else if self.tree.occurs(a) {
                return Err(format!("II: tree mentions R_{i}.Current"));
            }
        }
        Ok(())
    }
}

/// One move of an automaton run, with both endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunStep {
    pub from: ReminderSequence,
    pub label: Vec<Term>,
    pub rule: u8,
    pub production: Option<usize>,
    pub to: ReminderSequence,
}

impl RunStep {
    pub fn from_nfa(nfa: &Nfa, transition: usize) -> Self {
        let t = &nfa.transitions()[transition];
        Self {
            from: nfa.state(t.src).clone(),
            label: t.label.clone(),
            rule: t.rule,
            production: t.production,
            to: nfa.state(t.dst).clone(),
        }
    }

    /// Whether the move is one of `successors(from)`.
    pub fn is_valid(&self, g: &Grammar) -> bool {
        successors(&self.from, g).iter().any(|s| {
            s.label == self.label
                && s.rule == self.rule
                && s.production == self.production
                && s.target == self.to
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub next: Configuration,
    pub run: RunStep,
    /// Which of the five cases fired, 1 to 5.
    pub case: u8,
    /// Loops moved while compactifying the new valuation.
    pub moved_loops: usize,
}

/// Takes one element out of `trees` to descend into. When there are
/// several and `guard` is set, prefers the lowest index that is
/// `guard`-occurrence free; failing that, the first tree is made
/// `guard`-recurrence free by pushing its loops into the second.
fn choose(mut trees: Vec<ParseTree>, guard: Option<Var>) -> Result<(ParseTree, Vec<ParseTree>), TraceError> {
    if trees.is_empty() {
        return Err(TraceError::Precondition("nothing to descend into".into()));
    }
    if let (Some(a), true) = (guard, trees.len() >= 2) {
        if let Some(i) = trees.iter().position(|t| t.is_occurrence_free(a)) {
            let t = trees.remove(i);
            return Ok((t, trees));
        }
        if !trees[0].is_recurrence_free(a) {
            let (t1, t2) = reduce_recurrence(&trees[0], &trees[1], a)?;
            trees[0] = t1;
            trees[1] = t2;
        }
    }
    let t = trees.remove(0);
    Ok((t, trees))
}

fn pair_of(chosen: &ParseTree, rest: &[ParseTree]) -> ReminderPair {
    ReminderPair::new(
        chosen.root_var(),
        rest.iter().filter_map(ParseTree::root_var).collect(),
    )
}

/// One move of the completeness walk. Requires a well-formed configuration
/// of size above 1 that satisfies [`Configuration::check_properties`].
pub fn step(c: &Configuration, g: &Grammar) -> Result<Step, TraceError> {
    c.validate(g)?;
    if c.size() <= 1 {
        return Err(TraceError::Precondition("configuration has size 1".into()));
    }
    c.check_properties().map_err(TraceError::Precondition)?;
    let pairs = c.rs.pairs();
    let len = pairs.len();
    let last = &pairs[len - 1];
    let below = |i: usize| if i >= 1 { pairs[i - 1].current } else { None };

    // (case, rule, label, new pairs, new levels, new tree)
    let (case, rule, label, new_pairs, levels, tree) = if c.tree.is_bottom() {
        if len < 2 {
            return Err(TraceError::Precondition("⊥ without a pair below".into()));
        }
        let trees = c.val.level_trees(len - 2);
        let (chosen, rest) = choose(trees, below(len - 2))?;
        let mut p = pairs[..len - 2].to_vec();
        p.push(pair_of(&chosen, &rest));
        let mut v = c.val.truncated(len - 2);
        v.push_level(rest);
        (3, 5, Vec::new(), p, v, chosen)
    } else {
        let label = c.tree.root_terminal_word();
        let subtrees: Vec<ParseTree> = c.tree.var_subtrees().cloned().collect();
        match (last.followup.is_empty(), subtrees.is_empty()) {
            (true, true) => {
                let mut p = pairs[..len - 1].to_vec();
                p.push(ReminderPair::default());
                (1, 3, label, p, c.val.clone(), ParseTree::bottom())
            }
            (true, false) => {
                let (chosen, rest) = choose(subtrees, below(len - 1))?;
                let mut p = pairs[..len - 1].to_vec();
                p.push(pair_of(&chosen, &rest));
                let mut v = c.val.truncated(len - 1);
                v.push_level(rest);
                (2, 1, label, p, v, chosen)
            }
            (false, true) => {
                let trees = c.val.level_trees(len - 1);
                let (chosen, rest) = choose(trees, below(len - 1))?;
                let mut p = pairs[..len - 1].to_vec();
                p.push(pair_of(&chosen, &rest));
                let mut v = c.val.truncated(len - 1);
                v.push_level(rest);
                (4, 4, label, p, v, chosen)
            }
            (false, false) => {
                let (chosen, rest) = choose(subtrees, last.current)?;
                let mut p = pairs.to_vec();
                p.push(pair_of(&chosen, &rest));
                let mut v = c.val.clone();
                v.push_level(rest);
                (5, 2, label, p, v, chosen)
            }
        }
    };
    let rs = ReminderSequence(new_pairs);
    let (val, moved_loops) = compactify_counting(&levels, &rs)?;
    let mut word = c.word.clone();
    word.extend(&label);
    let production = if rule == 5 { None } else { c.tree.production() };
    Ok(Step {
        run: RunStep {
            from: c.rs.clone(),
            label,
            rule,
            production,
            to: rs.clone(),
        },
        next: Configuration { rs, word, val, tree },
        case,
        moved_loops,
    })
}

/// One line of a completeness transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub case: u8,
    pub rule: u8,
    pub label: String,
    pub production: Option<String>,
    pub from: String,
    pub to: String,
    pub size_before: u64,
    pub size_after: u64,
    pub moved_loops: usize,
    /// `Π(val)`, `Π(w)` and `Π(Y(tree))` after the step.
    pub parikh_val: BTreeMap<String, u64>,
    pub parikh_word: BTreeMap<String, u64>,
    pub parikh_tree: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletenessTrace {
    pub word: Vec<Term>,
    pub run: Vec<RunStep>,
    pub records: Vec<TraceRecord>,
}

/// Drives [`step`] from the initial configuration of `tree` down to size 1
/// and returns the accepted word with its run. Each step is checked: the
/// size drops, `Π(val) + Π(w) + Π(Y(t))` is unchanged, the move is an
/// automaton transition, the valuation stays compact and the step
/// conditions hold again.
pub fn completeness_trace(g: &Grammar, tree: &ParseTree) -> Result<CompletenessTrace, TraceError> {
    let mut c = Configuration::initial(g, tree.clone())?;
    let total = c.total_parikh();
    let terms = g.terminals();
    let mut run = Vec::new();
    let mut records = Vec::new();
    while c.size() > 1 {
        let n = run.len();
        let fail = |detail: String| TraceError::Invariant { step: n, detail };
        let before = c.size();
        let s = step(&c, g)?;
        let next = &s.next;
        let after = next.size();
        if after >= before {
            return Err(fail(format!("size did not drop: {before} → {after}")));
        }
        if next.total_parikh() != total {
            return Err(fail("Parikh image not conserved".into()));
        }
        if !s.run.is_valid(g) {
            return Err(fail(format!(
                "{} → {} is not a transition",
                s.run.from.display(g.variables()),
                s.run.to.display(g.variables())
            )));
        }
        next.validate(g).map_err(|e| fail(e.to_string()))?;
        next.check_properties().map_err(fail)?;
        records.push(TraceRecord {
            step: n,
            case: s.case,
            rule: s.run.rule,
            label: g.word_text(&s.run.label),
            production: s.run.production.map(|p| g.production_text(p)),
            from: s.run.from.display(g.variables()),
            to: s.run.to.display(g.variables()),
            size_before: before,
            size_after: after,
            moved_loops: s.moved_loops,
            parikh_val: valuation_parikh(&next.val).to_named(terms),
            parikh_word: ParikhVector::of_word(&next.word).to_named(terms),
            parikh_tree: next.tree.parikh().to_named(terms),
        });
        run.push(s.run);
        c = s.next;
    }
    if c.rs != ReminderSequence::accepting() {
        return Err(TraceError::Invariant {
            step: run.len(),
            detail: format!("stopped in {}", c.rs.display(g.variables())),
        });
    }
    Ok(CompletenessTrace {
        word: c.word,
        run,
        records,
    })
}

/// One line of a soundness transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SoundRecord {
    pub step: usize,
    pub rule: u8,
    pub label: String,
    pub state: String,
    /// The sentential form after the step.
    pub form: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reconstruction {
    pub word: Vec<Term>,
    pub records: Vec<SoundRecord>,
}

fn form_text(g: &Grammar, u: &[Sym]) -> String {
    if u.is_empty() {
        return "ε".into();
    }
    u.iter().map(|&s| g.sym_name(s)).collect::<Vec<_>>().join(" ")
}

/// Replays an accepting run as a derivation: rules 1 to 4 rewrite the
/// leftmost occurrence of the production's left-hand side, rule 5 leaves
/// the form alone. After every move the variables of the form must be
/// `⟦RS⟧` and its terminals must match the labels read so far.
pub fn soundness_reconstruct(g: &Grammar, run: &[RunStep]) -> Result<Reconstruction, TraceError> {
    let mut state = ReminderSequence::initial(g.axiom());
    let mut u = vec![Sym::Var(g.axiom())];
    let mut read = ParikhVector::zero();
    let mut records = Vec::new();
    for (n, s) in run.iter().enumerate() {
        if s.from != state {
            return Err(TraceError::InvalidRun(format!("step {n} does not start where the last ended")));
        }
        if !s.is_valid(g) {
            return Err(TraceError::InvalidRun(format!("step {n} is not a transition")));
        }
        if s.rule != 5 {
            let prod = s.production.ok_or_else(|| {
                TraceError::InvalidRun(format!("step {n}: rule {} without a production", s.rule))
            })?;
            let p = g.production(prod);
            let at = u.iter().position(|&x| x == Sym::Var(p.lhs)).ok_or_else(|| {
                TraceError::Invariant {
                    step: n,
                    detail: format!("no {} to rewrite", g.var_name(p.lhs)),
                }
            })?;
            u.splice(at..=at, p.rhs.iter().copied());
        }
        read += &ParikhVector::of_word(&s.label);
        state = s.to.clone();
        let vars: VarMultiset = u
            .iter()
            .filter_map(|&x| match x {
                Sym::Var(v) => Some(v),
                Sym::Term(_) => None,
            })
            .collect();
        let terms: Vec<Term> = u
            .iter()
            .filter_map(|&x| match x {
                Sym::Term(t) => Some(t),
                Sym::Var(_) => None,
            })
            .collect();
        if vars != state.pending() {
            return Err(TraceError::Invariant {
                step: n,
                detail: format!(
                    "form variables {} differ from pending {}",
                    vars.display(g),
                    state.pending().display(g)
                ),
            });
        }
        if ParikhVector::of_word(&terms) != read {
            return Err(TraceError::Invariant {
                step: n,
                detail: "form terminals differ from labels read".into(),
            });
        }
        records.push(SoundRecord {
            step: n,
            rule: s.rule,
            label: g.word_text(&s.label),
            state: state.display(g.variables()),
            form: form_text(g, &u),
        });
    }
    if state != ReminderSequence::accepting() {
        return Err(TraceError::InvalidRun("run does not end in (⊥, ∅)".into()));
    }
    let word = u
        .into_iter()
        .map(|x| match x {
            Sym::Term(t) => t,
            Sym::Var(_) => unreachable!("pending is empty at (⊥, ∅)"),
        })
        .collect();
    Ok(Reconstruction { word, records })
}

/// A random accepting run of a built automaton: a seeded walk over
/// transitions that can still reach the final state, which switches to
/// shortest paths after `max_steps` moves. `None` when nothing is accepted.
pub fn random_accepted_run(nfa: &Nfa, seed: u64, max_steps: usize) -> Option<Vec<RunStep>> {
    let fin = nfa.final_state()?;
    let n = nfa.state_count();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in nfa.transitions() {
        incoming[t.dst].push(t.src);
    }
    let mut dist = vec![usize::MAX; n];
    dist[fin] = 0;
    let mut queue = VecDeque::from([fin]);
    while let Some(s) = queue.pop_front() {
        for &p in &incoming[s] {
            if dist[p] == usize::MAX {
                dist[p] = dist[s] + 1;
                queue.push_back(p);
            }
        }
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, t) in nfa.transitions().iter().enumerate() {
        out[t.src].push(i);
    }
    let mut at = nfa.initial();
    if dist[at] == usize::MAX {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = Vec::new();
    while at != fin {
        let options: Vec<usize> = out[at]
            .iter()
            .copied()
            .filter(|&i| {
                let dst = nfa.transitions()[i].dst;
                if run.len() < max_steps {
                    dist[dst] != usize::MAX
                } else {
                    dist[dst] + 1 == dist[at]
                }
            })
            .collect();
        let &pick = options.choose(&mut rng)?;
        run.push(RunStep::from_nfa(nfa, pick));
        at = nfa.transitions()[pick].dst;
    }
    (at == fin).then_some(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build, DEFAULT_STATE_BUDGET};
    use crate::grammar::parse_grammar;
    use crate::parsetree::TreeSampler;
    use crate::verify::{gn_grammar, random_grammar, GrammarSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn anbn() -> Grammar {
        parse_grammar("start: S\nS -> a S b | _eps_\n").unwrap()
    }

    fn full_gn(g: &Grammar) -> ParseTree {
        fn grow(g: &Grammar, v: Var) -> ParseTree {
            let prod = g.productions_of(v)[0];
            let subs = g.production(prod).vars().map(|x| grow(g, x)).collect();
            ParseTree::node(g, prod, subs).unwrap()
        }
        grow(g, g.axiom())
    }

    fn var(g: &Grammar, name: &str) -> Var {
        g.var_by_name(name).unwrap()
    }

    fn named(g: &Grammar, v: &ParikhVector) -> BTreeMap<String, u64> {
        v.to_named(g.terminals())
    }

    #[test]
    fn info_measure() {
        let g = gn_grammar(3).unwrap();
        assert_eq!(info_f(&ParseTree::bottom()), 1);
        let a1 = ParseTree::node(&g, g.productions_of(var(&g, "A1"))[0], vec![]).unwrap();
        assert_eq!(info_f(&a1), 2);
        assert_eq!(info_f(&full_gn(&g)), 11);
        // Childless root (an ε production) also counts 2.
        let h = anbn();
        let eps = h
            .productions()
            .iter()
            .position(|p| p.rhs.is_empty())
            .unwrap();
        assert_eq!(info_f(&ParseTree::node(&h, eps, vec![]).unwrap()), 2);
    }

    #[test]
    fn valuation_parikh_weights_multiplicity() {
        let g = gn_grammar(3).unwrap();
        assert!(valuation_parikh(&Valuation::empty(2)).is_zero());
        let a1 = ParseTree::node(&g, g.productions_of(var(&g, "A1"))[0], vec![]).unwrap();
        let one = Valuation::from_levels(vec![vec![a1.clone()]]);
        assert_eq!(named(&g, &valuation_parikh(&one)), BTreeMap::from([("a".into(), 1)]));
        let two = Valuation::from_levels(vec![vec![a1.clone(), a1]]);
        assert_eq!(two.level(0).values().copied().collect::<Vec<_>>(), vec![2]);
        assert_eq!(named(&g, &valuation_parikh(&two)), BTreeMap::from([("a".into(), 2)]));
        assert_eq!(valuation_f(&two), 4);
    }

    #[test]
    fn restrict_bounds() {
        let val = Valuation::empty(3);
        assert_eq!(restrict(&val, 3).unwrap(), val);
        assert_eq!(restrict(&val, 1).unwrap().len(), 1);
        assert!(matches!(restrict(&val, 0), Err(TraceError::OutOfRange(0))));
        assert!(restrict(&val, 4).is_err());
        let rs = ReminderSequence::initial(Var(0));
        assert!(restrict_sequence(&rs, 2).is_err());
        assert_eq!(restrict_sequence(&rs, 1).unwrap(), rs);
    }

    fn single(v: Var) -> VarMultiset {
        std::iter::once(v).collect()
    }

    #[test]
    fn compactness_basics() {
        let g = gn_grammar(3).unwrap();
        let rs = ReminderSequence::initial(g.axiom());
        assert!(is_compact(&Valuation::empty(1), &rs));
        // A single pair: every property is vacuous whatever the trees.
        let a2 = var(&g, "A2");
        let t2 = full_gn(&g.with_axiom(a2));
        let one = ReminderSequence(vec![ReminderPair::new(Some(g.axiom()), single(a2))]);
        let val = Valuation::from_levels(vec![vec![t2]]);
        val.validate(&one, &g).unwrap();
        assert!(is_compact(&val, &one));
    }

    /// `S ⇝ A A | a`, `A ⇝ S | a`: `S` can repeat inside an `A` tree.
    fn looping() -> Grammar {
        parse_grammar("start: S\nS -> A A | a\nA -> S | a\n").unwrap()
    }

    fn tree(g: &Grammar, s: &str) -> ParseTree {
        ParseTree::from_sexpr(g, s).unwrap()
    }

    #[test]
    fn cp_one_violation_is_located() {
        let g = looping();
        let (s, a) = (var(&g, "S"), var(&g, "A"));
        // (S, ⟦A⟧)·(S, ⟦A⟧)·(A, ⟦A⟧) with an S below level 2.
        let rs = ReminderSequence(vec![
            ReminderPair::new(Some(s), single(a)),
            ReminderPair::new(Some(s), single(a)),
            ReminderPair::new(Some(a), single(a)),
        ]);
        let plain = tree(&g, "(A a)");
        let with_s = tree(&g, "(A (S a))");
        let val = Valuation::from_levels(vec![vec![plain.clone()], vec![plain], vec![with_s]]);
        val.validate(&rs, &g).unwrap();
        let v = first_violation(&val, &rs).unwrap();
        assert_eq!(v.property, Compactness::RepeatOccurs);
        assert_eq!((v.index, v.level, v.var), (2, 3, s));
        assert!(!is_compact(&val, &rs));
    }

    #[test]
    fn cp_two_and_three_violations() {
        let g = looping();
        let (s, a) = (var(&g, "S"), var(&g, "A"));
        let rs = ReminderSequence(vec![
            ReminderPair::new(Some(s), single(a)),
            ReminderPair::new(Some(a), single(a)),
            ReminderPair::new(Some(a), single(a)),
        ]);
        let plain = tree(&g, "(A a)");
        let with_s = tree(&g, "(A (S a))");
        let val = Valuation::from_levels(vec![vec![plain.clone()], vec![plain.clone()], vec![with_s.clone()]]);
        let v = first_violation(&val, &rs).unwrap();
        assert_eq!((v.property, v.index, v.level), (Compactness::OccurrenceLeaks, 1, 3));

        let rec = tree(&g, "(A (S (A a) (A (S a))))");
        let val = Valuation::from_levels(vec![vec![with_s], vec![plain], vec![rec]]);
        let v = first_violation(&val, &rs).unwrap();
        assert_eq!((v.property, v.index, v.level), (Compactness::RecurrenceLeaks, 1, 3));
    }

    #[test]
    fn compactify_moves_the_loop_down() {
        let g = looping();
        let (s, a) = (var(&g, "S"), var(&g, "A"));
        let rs = ReminderSequence(vec![
            ReminderPair::new(Some(s), single(a)),
            ReminderPair::new(Some(a), single(a)),
            ReminderPair::new(Some(a), single(a)),
        ]);
        let low = tree(&g, "(A (S a))");
        let rec = tree(&g, "(A (S (A a) (A (S a))))");
        let val = Valuation::from_levels(vec![vec![low], vec![tree(&g, "(A a)")], vec![rec]]);
        let out = compactify(&val, &rs).unwrap();
        assert!(is_compact(&out, &rs));
        out.validate(&rs, &g).unwrap();
        assert_eq!(valuation_parikh(&out), valuation_parikh(&val));
        for i in 1..=3 {
            assert!(val.vars_up_to(i).is_subset(&out.vars_up_to(i)));
        }
        assert!(out.level(2).keys().all(|t| t.is_recurrence_free(s)));
        assert_eq!(compactify(&out, &rs).unwrap(), out);
    }

    #[test]
    fn compactify_rejects_cp_one_failures() {
        let g = looping();
        let (s, a) = (var(&g, "S"), var(&g, "A"));
        let rs = ReminderSequence(vec![
            ReminderPair::new(Some(s), single(a)),
            ReminderPair::new(Some(s), single(a)),
            ReminderPair::new(Some(a), single(a)),
        ]);
        let plain = tree(&g, "(A a)");
        let val = Valuation::from_levels(vec![vec![plain.clone()], vec![plain], vec![tree(&g, "(A (S a))")]]);
        assert!(matches!(compactify(&val, &rs), Err(TraceError::Precondition(_))));
    }

    #[test]
    fn g3_first_step_is_case_two() {
        let g = gn_grammar(3).unwrap();
        let c = Configuration::initial(&g, full_gn(&g)).unwrap();
        assert_eq!(c.size(), 11);
        let s = step(&c, &g).unwrap();
        assert_eq!(s.case, 2);
        assert_eq!(s.run.rule, 1);
        assert_eq!(s.next.rs.display(g.variables()), "(A2,⟦A2⟧)");
        assert!(s.next.size() < 11);
    }

    #[test]
    fn terminal_tree_with_empty_followup_is_case_one() {
        let g = parse_grammar("start: S\nS -> a b\n").unwrap();
        let t = tree(&g, "(S a b)");
        let c = Configuration::initial(&g, t.clone()).unwrap();
        let s = step(&c, &g).unwrap();
        assert_eq!((s.case, s.run.rule), (1, 3));
        assert!(s.next.tree.is_bottom());
        assert_eq!(s.next.rs, ReminderSequence::accepting());
        let trace = completeness_trace(&g, &t).unwrap();
        assert_eq!(g.word_text(&trace.word), "a b");
        assert_eq!(trace.run.len(), 1);
        let back = soundness_reconstruct(&g, &trace.run).unwrap();
        assert_eq!(g.word_text(&back.word), "a b");
    }

    #[test]
    fn bottom_collapses_with_case_three() {
        let g = gn_grammar(2).unwrap();
        let (a1, a2) = (var(&g, "A1"), var(&g, "A2"));
        let leaf = tree(&g, "(A1 a)");
        let c = Configuration {
            rs: ReminderSequence(vec![
                ReminderPair::new(Some(a1), single(a1)),
                ReminderPair::default(),
            ]),
            word: g.parse_word("a").unwrap(),
            val: Valuation::from_levels(vec![vec![leaf.clone()], vec![]]),
            tree: ParseTree::bottom(),
        };
        let s = step(&c, &g).unwrap();
        assert_eq!((s.case, s.run.rule), (3, 5));
        assert_eq!(s.next.rs, ReminderSequence::initial(a1));
        assert_eq!(s.next.tree, leaf);
        assert!(s.run.is_valid(&g));
        let _ = a2;
    }

    #[test]
    fn step_rejects_size_one() {
        let g = gn_grammar(1).unwrap();
        let c = Configuration {
            rs: ReminderSequence::accepting(),
            word: Vec::new(),
            val: Valuation::empty(1),
            tree: ParseTree::bottom(),
        };
        assert_eq!(c.size(), 1);
        assert!(matches!(step(&c, &g), Err(TraceError::Precondition(_))));
    }

    #[test]
    fn g3_round_trip() {
        let g = gn_grammar(3).unwrap();
        let nfa = build(&g, DEFAULT_STATE_BUDGET).unwrap();
        let trace = completeness_trace(&g, &full_gn(&g)).unwrap();
        assert_eq!(named(&g, &ParikhVector::of_word(&trace.word)), BTreeMap::from([("a".into(), 4)]));
        assert!(trace.run.len() <= 10);
        for s in &trace.run {
            let src = nfa.state_index(&s.from).unwrap();
            assert!(nfa.outgoing(src).any(|t| nfa.state(t.dst) == &s.to
                && t.label == s.label
                && t.rule == s.rule));
        }
        let back = soundness_reconstruct(&g, &trace.run).unwrap();
        assert_eq!(back.word, trace.word);
        let last = back.records.last().unwrap();
        assert_eq!(last.state, "(⊥,∅)");
    }

    #[test]
    fn anbn_traces_are_balanced() {
        let g = anbn();
        let sampler = TreeSampler::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let t = sampler.sample(g.axiom(), 40, &mut rng).unwrap();
            let trace = completeness_trace(&g, &t).unwrap();
            let p = ParikhVector::of_word(&trace.word);
            assert_eq!(p, t.parikh());
            let [a, b] = [g.term_by_name("a").unwrap(), g.term_by_name("b").unwrap()];
            assert_eq!(p.get(a), p.get(b));
        }
    }

    #[test]
    fn random_walk_runs_reconstruct() {
        let g = anbn();
        let nfa = build(&g, DEFAULT_STATE_BUDGET).unwrap();
        let [a, b] = [g.term_by_name("a").unwrap(), g.term_by_name("b").unwrap()];
        for seed in 0..40 {
            let run = random_accepted_run(&nfa, seed, 30).unwrap();
            let labels: Vec<Term> = run.iter().flat_map(|s| s.label.clone()).collect();
            let u = soundness_reconstruct(&g, &run).unwrap().word;
            assert_eq!(ParikhVector::of_word(&u), ParikhVector::of_word(&labels));
            let p = ParikhVector::of_word(&u);
            assert_eq!(p.get(a), p.get(b));
        }
    }

    #[test]
    fn soundness_rejects_broken_runs() {
        let g = gn_grammar(2).unwrap();
        let trace = completeness_trace(&g, &full_gn(&g)).unwrap();
        let mut cut = trace.run.clone();
        cut.pop();
        assert!(matches!(soundness_reconstruct(&g, &cut), Err(TraceError::InvalidRun(_))));
        let mut skipped = trace.run.clone();
        skipped.remove(0);
        assert!(soundness_reconstruct(&g, &skipped).is_err());
        let mut forged = trace.run;
        forged[0].label = g.parse_word("a").unwrap();
        assert!(soundness_reconstruct(&g, &forged).is_err());
    }

    #[test]
    fn traces_repair_valuations() {
        let g = parse_grammar("start: S\nS -> A A | a | S b A\nA -> S | a | A A\n").unwrap();
        let sampler = TreeSampler::new(&g);
        let moved = (0..3000u64).find_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = sampler.sample(g.axiom(), 400, &mut rng).unwrap();
            let trace = completeness_trace(&g, &t).unwrap();
            let n: usize = trace.records.iter().map(|r| r.moved_loops).sum();
            (n > 0).then_some(trace)
        });
        let trace = moved.expect("some trace moves a loop");
        assert!(soundness_reconstruct(&g, &trace.run).is_ok());
    }

    /// A random reachable state with a valuation of sampled trees.
    fn random_valued_state(g: &Grammar, rng: &mut ChaCha8Rng) -> Option<(ReminderSequence, Valuation)> {
        let sampler = TreeSampler::new(g);
        let mut rs = ReminderSequence::initial(g.axiom());
        for _ in 0..rng.gen_range(0..12) {
            let next = successors(&rs, g);
            let Some(s) = next.choose(rng) else { break };
            rs = s.target.clone();
        }
        let levels = rs
            .pairs()
            .iter()
            .map(|p| {
                p.followup
                    .iter()
                    .map(|v| sampler.sample(v, 25, rng))
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()?;
        Some((rs, Valuation::from_levels(levels)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn traces_check_out_on_random_trees(gseed in 0u64..400, tseed in any::<u64>()) {
            let g = random_grammar(&GrammarSpec::default(), gseed).unwrap();
            let sampler = TreeSampler::new(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(tseed);
            let t = sampler.sample(g.axiom(), 60, &mut rng).unwrap();
            let trace = completeness_trace(&g, &t).unwrap();
            let start = info_f(&t);
            prop_assert!(trace.run.len() as u64 <= start - 1);
            prop_assert_eq!(ParikhVector::of_word(&trace.word), t.parikh());
            let back = soundness_reconstruct(&g, &trace.run).unwrap();
            prop_assert_eq!(ParikhVector::of_word(&back.word), t.parikh());
        }

        #[test]
        fn compactify_postconditions(gseed in 0u64..400, vseed in any::<u64>()) {
            let g = random_grammar(&GrammarSpec::default(), gseed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(vseed);
            if let Some((rs, val)) = random_valued_state(&g, &mut rng) {
                val.validate(&rs, &g).unwrap();
                match compactify(&val, &rs) {
                    Ok(out) => {
                        prop_assert!(is_compact(&out, &rs));
                        out.validate(&rs, &g).unwrap();
                        prop_assert_eq!(valuation_parikh(&out), valuation_parikh(&val));
                        for i in 1..=rs.len() {
                            prop_assert!(val.vars_up_to(i).is_subset(&out.vars_up_to(i)));
                        }
                        prop_assert_eq!(compactify(&out, &rs).unwrap(), out.clone());
                        for i in 1..=rs.len() {
                            let r = restrict(&out, i).unwrap();
                            prop_assert!(is_compact(&r, &rs.prefix(i)));
                        }
                    }
                    Err(TraceError::Precondition(_)) => {
                        prop_assert!(check_cp(&val, &rs, &ALL_CP[..2]).is_some());
                    }
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }
}
