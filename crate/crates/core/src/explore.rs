//! Exploring the automaton without materializing it.
//!
//! Reachable state spaces grow into the tens of millions for grammars with
//! five variables, well past what [`crate::automaton::build`] can hold with
//! its transition list. Here a state is packed as a byte string: each pair
//! is a marker byte `0x80 | Current` (`0xFF` for `⊥`) followed by its
//! followup variables in ascending order. Visited states are kept in a set
//! that stores short strings as 128-bit nibble codes.

use std::collections::{BTreeSet, HashSet, VecDeque};

use crate::automaton::{AutomatonError, InvariantReport, ReminderPair, ReminderSequence, StateViolation};
use crate::grammar::{min_yield, reachability, stats, Grammar, Var};
use crate::parikh::ParikhVector;
use crate::remgraph::ReminderGraph;

const MARK: u8 = 0x80;
const BOTTOM: u8 = 0xFF;

/// Largest variable count the packed encoding supports.
pub const MAX_PACKED_VARS: usize = 127;

fn check_size(g: &Grammar) -> Result<(), AutomatonError> {
    if g.var_count() > MAX_PACKED_VARS {
        return Err(AutomatonError::Invalid(format!(
            "{} variables; packed exploration supports at most {MAX_PACKED_VARS}",
            g.var_count()
        )));
    }
    Ok(())
}

pub fn pack(rs: &ReminderSequence) -> Vec<u8> {
    let mut out = Vec::new();
    for p in rs.pairs() {
        out.push(p.current.map_or(BOTTOM, |v| MARK | v.0 as u8));
        out.extend(p.followup.iter().map(|v| v.0 as u8));
    }
    out
}

pub fn unpack(bytes: &[u8]) -> ReminderSequence {
    ReminderSequence(
        pairs(bytes)
            .into_iter()
            .map(|(cur, follow)| {
                ReminderPair::new(cur.map(|c| Var(c.into())), follow.iter().map(|&v| Var(v.into())).collect())
            })
            .collect(),
    )
}

/// `(Current, Followup)` of each packed pair.
fn pairs(bytes: &[u8]) -> Vec<(Option<u8>, &[u8])> {
    let mut out = Vec::new();
    let mut rest = bytes;
    while let Some((&c, tail)) = rest.split_first() {
        let len = tail.iter().position(|&b| b & MARK != 0).unwrap_or(tail.len());
        out.push(((c != BOTTOM).then_some(c & !MARK), &tail[..len]));
        rest = &tail[len..];
    }
    out
}

fn last_start(bytes: &[u8]) -> usize {
    bytes.iter().rposition(|&b| b & MARK != 0).expect("packed state has a pair")
}

/// Writes `follow` minus one copy of `v`.
fn push_without(out: &mut Vec<u8>, follow: &[u8], v: u8) {
    let at = follow.iter().position(|&x| x == v).expect("v is in the followup");
    out.extend_from_slice(&follow[..at]);
    out.extend_from_slice(&follow[at + 1..]);
}

fn distinct(sorted: &[u8]) -> impl Iterator<Item = u8> + '_ {
    sorted
        .iter()
        .enumerate()
        .filter(|&(i, &v)| i == 0 || sorted[i - 1] != v)
        .map(|(_, &v)| v)
}

/// One move of a packed state; its target lives in [`Moves::target`].
#[derive(Clone, Copy, Debug)]
pub struct PackedMove {
    pub rule: u8,
    pub production: Option<usize>,
    start: usize,
    end: usize,
}

/// Reusable buffer of the moves out of one packed state.
#[derive(Default)]
pub struct Moves {
    bytes: Vec<u8>,
    moves: Vec<PackedMove>,
}

impl Moves {
    pub fn iter(&self) -> impl Iterator<Item = &PackedMove> {
        self.moves.iter()
    }

    pub fn target(&self, m: &PackedMove) -> &[u8] {
        &self.bytes[m.start..m.end]
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    fn commit(&mut self, start: usize, rule: u8, production: Option<usize>) {
        let end = self.bytes.len();
        let target = &self.bytes[start..end];
        let over = target.iter().enumerate().any(|(i, &c)| {
            c & MARK != 0 && c != BOTTOM && target[..i].iter().filter(|&&x| x == c).count() >= 2
        });
        if over {
            self.bytes.truncate(start);
        } else {
            self.moves.push(PackedMove { rule, production, start, end });
        }
    }
}

/// Per-grammar data for exploring packed states.
pub struct PackedGrammar<'g> {
    g: &'g Grammar,
    /// Sorted variable occurrences of each production.
    rhs_vars: Vec<Vec<u8>>,
}

impl<'g> PackedGrammar<'g> {
    pub fn new(g: &'g Grammar) -> Result<Self, AutomatonError> {
        check_size(g)?;
        let rhs_vars = g
            .productions()
            .iter()
            .map(|p| {
                let mut v: Vec<u8> = p.vars().map(|x| x.0 as u8).collect();
                v.sort_unstable();
                v
            })
            .collect();
        Ok(Self { g, rhs_vars })
    }

    /// The moves of [`crate::automaton::successors`] on a packed state,
    /// without labels (each is fixed by the rule and production).
    pub fn successors(&self, state: &[u8], out: &mut Moves) {
        out.bytes.clear();
        out.moves.clear();
        let p = last_start(state);
        let follow = &state[p + 1..];
        let head = &state[..p];
        if state[p] != BOTTOM {
            let a = Var((state[p] & !MARK).into());
            for &prod in self.g.productions_of(a) {
                let vars = &self.rhs_vars[prod];
                if vars.is_empty() {
                    if follow.is_empty() {
                        let s = out.bytes.len();
                        out.bytes.extend_from_slice(head);
                        out.bytes.push(BOTTOM);
                        out.commit(s, 3, Some(prod));
                    } else {
                        for a2 in distinct(follow) {
                            let s = out.bytes.len();
                            out.bytes.extend_from_slice(head);
                            out.bytes.push(MARK | a2);
                            push_without(&mut out.bytes, follow, a2);
                            out.commit(s, 4, Some(prod));
                        }
                    }
                    continue;
                }
                for aj in distinct(vars) {
                    let s = out.bytes.len();
                    let rule = if follow.is_empty() {
                        out.bytes.extend_from_slice(head);
                        1
                    } else {
                        out.bytes.extend_from_slice(state);
                        2
                    };
                    out.bytes.push(MARK | aj);
                    push_without(&mut out.bytes, vars, aj);
                    out.commit(s, rule, Some(prod));
                }
            }
        } else if follow.is_empty() && p > 0 {
            let q = last_start(head);
            let prev = &head[q + 1..];
            for a2 in distinct(prev) {
                let s = out.bytes.len();
                out.bytes.extend_from_slice(&head[..q]);
                out.bytes.push(MARK | a2);
                push_without(&mut out.bytes, prev, a2);
                out.commit(s, 5, None);
            }
        }
    }
}

/// Visited set over packed states.
#[derive(Default)]
struct PackedSet {
    short: HashSet<u128>,
    long: HashSet<Box<[u8]>>,
}

impl PackedSet {
    /// Marker nibbles are `8 | Current` (`⊥` is 15), followup nibbles are
    /// `1 + var`; zero pads. Needs variables below 7 and 32 symbols at most.
    fn nibbles(bytes: &[u8]) -> Option<u128> {
        if bytes.len() > 32 {
            return None;
        }
        let mut code = 0u128;
        for &b in bytes {
            let n = if b == BOTTOM {
                15
            } else if b & MARK != 0 {
                let v = b & !MARK;
                if v >= 7 {
                    return None;
                }
                8 | v
            } else {
                if b >= 7 {
                    return None;
                }
                1 + b
            };
            code = (code << 4) | u128::from(n);
        }
        Some(code << (4 * (32 - bytes.len())))
    }

    fn insert(&mut self, bytes: &[u8]) -> bool {
        match Self::nibbles(bytes) {
            Some(code) => self.short.insert(code),
            None => self.long.insert(bytes.into()),
        }
    }

    fn len(&self) -> usize {
        self.short.len() + self.long.len()
    }
}

/// A stack of byte strings in one buffer.
#[derive(Default)]
struct ByteStack {
    data: Vec<u8>,
    ends: Vec<usize>,
}

impl ByteStack {
    fn push(&mut self, bytes: &[u8]) {
        self.data.extend_from_slice(bytes);
        self.ends.push(self.data.len());
    }

    fn pop_into(&mut self, out: &mut Vec<u8>) -> bool {
        let Some(end) = self.ends.pop() else {
            return false;
        };
        let start = self.ends.last().copied().unwrap_or(0);
        out.clear();
        out.extend_from_slice(&self.data[start..end]);
        self.data.truncate(start);
        true
    }
}

/// Calls `visit` once on every reachable packed state, in depth-first
/// order. Returns the number of states.
pub fn scan_states(
    g: &Grammar,
    budget: usize,
    mut visit: impl FnMut(&[u8]),
) -> Result<usize, AutomatonError> {
    let pg = PackedGrammar::new(g)?;
    let init = pack(&ReminderSequence::initial(g.axiom()));
    let mut seen = PackedSet::default();
    let mut stack = ByteStack::default();
    seen.insert(&init);
    stack.push(&init);
    let mut moves = Moves::default();
    let mut state = Vec::new();
    let mut transitions = 0usize;
    while stack.pop_into(&mut state) {
        visit(&state);
        pg.successors(&state, &mut moves);
        transitions += moves.len();
        for m in moves.iter() {
            let t = moves.target(m);
            if seen.insert(t) {
                if seen.len() > budget {
                    return Err(AutomatonError::StateBudget {
                        budget,
                        states: seen.len(),
                        transitions,
                    });
                }
                stack.push(t);
            }
        }
    }
    Ok(seen.len())
}

/// 128-bit variable set.
type Mask = u128;

fn bit(v: u8) -> Mask {
    1 << v
}

/// The structural checks of [`crate::automaton::check_state_invariants`]
/// on packed states, using bit masks.
pub struct StateChecker {
    d: usize,
    m: usize,
    adjacent: Vec<Mask>,
    reach: Vec<Mask>,
    wide: Vec<Mask>,
    variables: Vec<String>,
}

impl StateChecker {
    pub fn new(g: &Grammar, rg: &ReminderGraph, d: usize) -> Result<Self, AutomatonError> {
        check_size(g)?;
        let n = g.var_count();
        let mut adjacent = vec![0; n];
        for (a, b, _) in rg.edges() {
            adjacent[a.index()] |= bit(a.0 as u8) | bit(b.0 as u8);
            adjacent[b.index()] |= bit(a.0 as u8) | bit(b.0 as u8);
        }
        for (v, row) in adjacent.iter_mut().enumerate() {
            *row |= bit(v as u8);
        }
        let rel = reachability(g);
        let reach = g
            .vars()
            .map(|a| g.vars().filter(|&b| rel.contains(a, b)).fold(0, |m, b| m | bit(b.0 as u8)))
            .collect();
        let wide = g
            .productions()
            .iter()
            .filter(|p| p.var_count() >= 2)
            .map(|p| p.vars().fold(0, |m, v| m | bit(v.0 as u8)))
            .collect();
        Ok(Self {
            d,
            m: stats(g).m,
            adjacent,
            reach,
            wide,
            variables: g.variables().to_vec(),
        })
    }

    pub fn length_bound(&self) -> usize {
        2 * self.d + 1
    }

    fn name(&self, v: u8) -> &str {
        &self.variables[usize::from(v)]
    }

    /// Appends the violations of `state` to `report` and updates its
    /// length statistics.
    pub fn check(&self, index: usize, state: &[u8], report: &mut InvariantReport) {
        report.states_checked += 1;
        let mut fail = |check: &'static str, detail: String| {
            report.violations.push(StateViolation {
                state: index,
                check,
                detail: format!("{detail} in {}", unpack(state).display(&self.variables)),
            });
        };
        if state.is_empty() {
            fail("nonempty", "empty sequence".into());
            return;
        }
        let ps = pairs(state);
        let n = ps.len();
        report.max_sequence_length = report.max_sequence_length.max(n);
        if n > self.d {
            report.states_longer_than_d += 1;
        }
        if n > self.length_bound() {
            fail("length", format!("{n} pairs > 2d+1 = {}", self.length_bound()));
        }
        let masks: Vec<Mask> = ps
            .iter()
            .map(|(c, f)| f.iter().chain(c).fold(0, |m, &v| m | bit(v)))
            .collect();
        let all = masks.iter().fold(0, |a, &b| a | b);
        if let Some(v) = (0..=127u8).find(|&v| all & bit(v) != 0 && all & !self.adjacent[usize::from(v)] != 0) {
            fail("clique", format!("{} is not adjacent to every variable of the state", self.name(v)));
        }
        let mut counts = [0u8; MAX_PACKED_VARS + 1];
        for &(c, _) in &ps {
            if let Some(c) = c {
                counts[usize::from(c)] += 1;
                if counts[usize::from(c)] == 3 {
                    fail("occurrences", format!("{} is Current three times", self.name(c)));
                }
            }
        }
        let mut later = 0;
        for (i, &(c, f)) in ps.iter().enumerate().rev() {
            if f.len() > self.m {
                fail("followup_degree", format!("pair {} has {} > m = {}", i + 1, f.len(), self.m));
            }
            if f.is_empty() && i + 1 != n {
                fail("empty_followup_last", format!("pair {} of {n} has empty followup", i + 1));
            }
            if c.is_none() && (i + 1 != n || !f.is_empty()) {
                fail("bottom_last", format!("⊥ at pair {} of {n}", i + 1));
            }
            if !f.is_empty() && !self.wide.iter().any(|&w| masks[i] & !w == 0) {
                fail("production_present", format!("pair {} fits no production with r ≥ 2", i + 1));
            }
            if let Some(a) = c {
                let missing = later & !self.reach[usize::from(a)];
                if missing != 0 {
                    let b = missing.trailing_zeros() as u8;
                    fail(
                        "reachability",
                        format!("pair {}: {} does not reach {}", i + 1, self.name(a), self.name(b)),
                    );
                }
            }
            later |= masks[i];
        }
    }
}

/// Checks every reachable state without storing transitions.
pub fn scan_invariants(
    g: &Grammar,
    rg: &ReminderGraph,
    d: usize,
    budget: usize,
) -> Result<InvariantReport, AutomatonError> {
    let checker = StateChecker::new(g, rg, d)?;
    let mut report = InvariantReport::empty(checker.length_bound());
    let mut index = 0;
    scan_states(g, budget, |s| {
        checker.check(index, s, &mut report);
        index += 1;
    })?;
    Ok(report)
}

/// `{Π(w) : w accepted, |w| ≤ k}` by breadth-first search over pairs of a
/// packed state and the image read so far.
///
/// A state whose pending variables need at least `h` more letters is cut
/// once `h` plus the letters read exceeds `k`, where `h` sums the least
/// yields of the followups and the last `Current`. No rule lowers `h` by
/// more than the length of its label and `h` is 0 on `(⊥, ∅)`, so every
/// accepting path from a cut state is longer than `k` and the cut is exact.
pub fn bounded_parikh_on_the_fly(
    g: &Grammar,
    k: u64,
    budget: usize,
) -> Result<BTreeSet<ParikhVector>, AutomatonError> {
    let pg = PackedGrammar::new(g)?;
    let least: Vec<u64> = min_yield(g)
        .into_iter()
        .map(|y| y.unwrap_or(u64::MAX / 4))
        .collect();
    let need = |s: &[u8]| -> u64 {
        let p = last_start(s);
        let tail = if s[p] == BOTTOM { 0 } else { least[usize::from(s[p] & !MARK)] };
        s.iter()
            .filter(|&&b| b & MARK == 0)
            .map(|&b| least[usize::from(b)])
            .sum::<u64>()
            + tail
    };
    let labels: Vec<Vec<u64>> = g
        .productions()
        .iter()
        .map(|p| {
            let mut c = vec![0u64; g.terminals().len()];
            for t in p.terminal_word() {
                c[t.index()] += 1;
            }
            c
        })
        .collect();
    let accepting = pack(&ReminderSequence::accepting());
    let mut out = BTreeSet::new();
    let start = (pack(&ReminderSequence::initial(g.axiom())), vec![0u64; g.terminals().len()]);
    if need(&start.0) > k {
        return Ok(out);
    }
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut moves = Moves::default();
    while let Some((s, counts)) = queue.pop_front() {
        let read: u64 = counts.iter().sum();
        if s == accepting {
            let mut v = ParikhVector::zero();
            for (t, &c) in counts.iter().enumerate() {
                v.add_letter(crate::grammar::Term(t as u32), c);
            }
            out.insert(v);
        }
        pg.successors(&s, &mut moves);
        for mv in moves.iter() {
            let target = moves.target(mv);
            let mut next = counts.clone();
            if let Some(p) = mv.production {
                for (c, &l) in next.iter_mut().zip(&labels[p]) {
                    *c += l;
                }
            }
            let now: u64 = next.iter().sum();
            debug_assert!(need(&s) <= now - read + need(target));
            if now + need(target) > k {
                continue;
            }
            let key = (target.to_vec(), next);
            if !seen.contains(&key) {
                seen.insert(key.clone());
                if seen.len() > budget {
                    return Err(AutomatonError::SearchBudget { budget });
                }
                queue.push_back(key);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{build, check_state_invariants, successors, DEFAULT_STATE_BUDGET};
    use crate::grammar::{bounded_parikh_language, parse_grammar, DEFAULT_ORACLE_BUDGET};
    use crate::remgraph::{regularity_width, WidthMode};
    use crate::verify::{random_grammar, GrammarSpec};

    fn small_spec() -> GrammarSpec {
        GrammarSpec {
            n: 3,
            max_rhs_len: 3,
            ..GrammarSpec::default()
        }
    }

    #[test]
    fn pack_round_trip() {
        let g = parse_grammar("start: S\nS -> A B S | a\nA -> B a | S\nB -> b | A A").unwrap();
        let nfa = build(&g, DEFAULT_STATE_BUDGET).unwrap();
        for rs in nfa.states() {
            assert_eq!(&unpack(&pack(rs)), rs);
        }
        assert_eq!(unpack(&pack(&ReminderSequence::accepting())), ReminderSequence::accepting());
    }

    #[test]
    fn nibble_codes_are_injective() {
        let a = PackedSet::nibbles(&[MARK, 0]).unwrap();
        let b = PackedSet::nibbles(&[MARK]).unwrap();
        let c = PackedSet::nibbles(&[MARK, 0, 0]).unwrap();
        assert!(a != b && b != c && a != c);
        assert!(PackedSet::nibbles(&[MARK | 7]).is_none());
        assert!(PackedSet::nibbles(&[MARK; 33]).is_none());
    }

    /// Same moves as the reference successor function on every state of
    /// the built automaton.
    #[test]
    fn packed_moves_match_reference() {
        for seed in 0..30 {
            let g = random_grammar(&small_spec(), seed).unwrap();
            let Ok(nfa) = build(&g, 200_000) else { continue };
            let pg = PackedGrammar::new(&g).unwrap();
            let mut moves = Moves::default();
            for rs in nfa.states() {
                let want: BTreeSet<(u8, Option<usize>, ReminderSequence)> = successors(rs, &g)
                    .into_iter()
                    .map(|s| (s.rule, s.production, s.target))
                    .collect();
                pg.successors(&pack(rs), &mut moves);
                let got: BTreeSet<_> = moves
                    .iter()
                    .map(|m| (m.rule, m.production, unpack(moves.target(m))))
                    .collect();
                assert_eq!(got.len(), moves.len(), "duplicate packed move");
                assert_eq!(got, want, "seed {seed} at {}", rs.display(g.variables()));
            }
            let count = scan_states(&g, usize::MAX, |_| ()).unwrap();
            assert_eq!(count, nfa.state_count());
        }
    }

    #[test]
    fn streaming_invariants_match_stored() {
        for seed in 0..30 {
            let g = random_grammar(&small_spec(), seed).unwrap();
            let Ok(nfa) = build(&g, 200_000) else { continue };
            let rg = ReminderGraph::build(&g);
            let d = regularity_width(&g, WidthMode::default()).unwrap().d;
            let stored = check_state_invariants(nfa.states(), &g, &rg, d);
            let streamed = scan_invariants(&g, &rg, d, usize::MAX).unwrap();
            assert!(stored.ok() && streamed.ok());
            assert_eq!(stored.states_checked, streamed.states_checked);
            assert_eq!(stored.max_sequence_length, streamed.max_sequence_length);
            assert_eq!(stored.states_longer_than_d, streamed.states_longer_than_d);
        }
    }

    #[test]
    fn checker_flags_bad_states() {
        let g = parse_grammar("start: S\nS -> S S | a").unwrap();
        let rg = ReminderGraph::build(&g);
        let checker = StateChecker::new(&g, &rg, 1).unwrap();
        let s = Var(0);
        let pair = |c: Option<Var>, f: &[Var]| ReminderPair::new(c, f.iter().copied().collect());
        let bad = ReminderSequence(vec![
            pair(Some(s), &[s]),
            pair(Some(s), &[s]),
            pair(Some(s), &[]),
            pair(None, &[]),
        ]);
        let mut report = InvariantReport::empty(3);
        checker.check(0, &pack(&bad), &mut report);
        let names: BTreeSet<&str> = report.violations.iter().map(|v| v.check).collect();
        assert!(names.contains("length"));
        assert!(names.contains("occurrences"));
        assert!(names.contains("empty_followup_last"));
        assert_eq!(names.len(), 3);
    }

    #[test]
    fn on_the_fly_matches_built_and_grammar() {
        for seed in 0..40 {
            let g = random_grammar(&small_spec(), seed).unwrap();
            let oracle = bounded_parikh_language(&g, 5, DEFAULT_ORACLE_BUDGET).unwrap();
            let fly = bounded_parikh_on_the_fly(&g, 5, 5_000_000).unwrap();
            assert_eq!(fly, oracle, "seed {seed}");
            if let Ok(nfa) = build(&g, 200_000) {
                assert_eq!(nfa.bounded_parikh(5, 5_000_000).unwrap(), fly, "seed {seed}");
            }
        }
    }

    #[test]
    fn anbn_on_the_fly() {
        let g = parse_grammar("start: S\nS -> a S b | _eps_").unwrap();
        let set = bounded_parikh_on_the_fly(&g, 6, 100_000).unwrap();
        let totals: Vec<u64> = set.iter().map(ParikhVector::total).collect();
        assert_eq!(totals, vec![0, 2, 4, 6]);
    }
}
