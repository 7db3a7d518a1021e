//! Grammar generators, bounded equivalence checking and the stress driver.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{build, check_state_invariants, AutomatonError, Nfa};
use crate::explore::bounded_parikh_on_the_fly;
use crate::grammar::{
    bounded_parikh_language, render, sanitize, Grammar, GrammarError, DEFAULT_ORACLE_BUDGET,
};
use crate::parikh::ParikhVector;
use crate::parsetree::TreeSampler;
use crate::remgraph::{regularity_width_of, ReminderGraph, WidthMode};
use crate::symbolic::{check_invariants_symbolic, DEFAULT_SATURATION_BUDGET};
use crate::traces::{completeness_trace, soundness_reconstruct};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("invalid generator parameters: {0}")]
    Parameters(String),
    #[error("no nonempty grammar after {0} attempts")]
    Unsatisfiable(usize),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// `A_j ⇝ A_{j−1} A_{j−1}` for `2 ≤ j ≤ n`, `A_1 ⇝ a`, axiom `A_n`. Its
/// language is the single word `a^(2^(n−1))`.
pub fn gn_grammar(n: usize) -> Result<Grammar, GenerateError> {
    if n == 0 {
        return Err(GenerateError::Parameters("n must be at least 1".into()));
    }
    let mut prods: Vec<(String, Vec<String>)> = (2..=n)
        .rev()
        .map(|j| {
            let below = format!("A{}", j - 1);
            (format!("A{j}"), vec![below.clone(), below])
        })
        .collect();
    prods.push(("A1".into(), vec!["a".into()]));
    Ok(Grammar::from_named(&format!("A{n}"), &prods)?)
}

/// A grammar in the shape of threads calling subroutines: program points
/// `C1 … Cr` (axiom `C1`), of which the last `ports` are ports. Each point
/// steps by an action to the next point, and each invokes a subroutine
/// `Ci ⇝ P Cj` whose callee entry `P` and return point `Cj` are ports.
/// The last point terminates. Extra actions, calls and terminations are
/// drawn from `seed`.
pub fn ports_grammar(points: usize, ports: usize, seed: u64) -> Result<Grammar, GenerateError> {
    if points == 0 || ports == 0 || ports > points {
        return Err(GenerateError::Parameters(format!(
            "need 1 ≤ ports ≤ points, got {ports} ports and {points} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("C{}", i + 1);
    let port_ids: Vec<usize> = (points - ports..points).collect();
    let actions = ["a", "b"];
    let mut prods: Vec<(String, Vec<String>)> = Vec::new();
    let call = |rng: &mut ChaCha8Rng| {
        let callee = *port_ids.choose(rng).expect("ports nonempty");
        let ret = *port_ids.choose(rng).expect("ports nonempty");
        vec![name(callee), name(ret)]
    };
    for i in 0..points {
        let act = actions.choose(&mut rng).expect("nonempty").to_string();
        if i + 1 < points {
            prods.push((name(i), vec![act, name(i + 1)]));
        } else {
            prods.push((name(i), vec![act]));
        }
        prods.push((name(i), call(&mut rng)));
        if rng.gen_bool(0.3) {
            let target = rng.gen_range(0..points);
            let act = actions.choose(&mut rng).expect("nonempty").to_string();
            prods.push((name(i), vec![act, name(target)]));
        }
        if rng.gen_bool(0.3) {
            prods.push((name(i), call(&mut rng)));
        }
        if i + 1 < points && rng.gen_bool(0.2) {
            prods.push((name(i), vec![]));
        }
    }
    let g = Grammar::from_named(&name(0), &prods)?;
    Ok(sanitize(&g)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    #[default]
    General,
    /// Terminals followed by at most one variable.
    RightLinear,
}

/// Parameters of [`random_grammar`]. `n` is the number of variables drawn
/// before sanitizing, so the result has at most `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrammarSpec {
    pub n: usize,
    pub max_rhs_len: usize,
    pub max_alternatives: usize,
    pub terminal_count: usize,
    pub allow_epsilon: bool,
    pub shape: Shape,
}

impl Default for GrammarSpec {
    fn default() -> Self {
        Self {
            n: 5,
            max_rhs_len: 4,
            max_alternatives: 3,
            terminal_count: 3,
            allow_epsilon: true,
            shape: Shape::General,
        }
    }
}

/// Attempts made before giving up on a spec whose grammars keep
/// sanitizing to nothing.
const GENERATE_ATTEMPTS: usize = 64;

const VAR_NAMES: [&str; 8] = ["S", "A", "B", "C", "D", "E", "F", "G"];

fn var_name(i: usize) -> String {
    VAR_NAMES.get(i).map_or_else(|| format!("V{i}"), |s| s.to_string())
}

fn term_name(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("t{i}")
    }
}

/// A sanitized random grammar with axiom `S`, deterministic per seed.
pub fn random_grammar(spec: &GrammarSpec, seed: u64) -> Result<Grammar, GenerateError> {
    if spec.n == 0 || spec.max_alternatives == 0 || spec.terminal_count == 0 {
        return Err(GenerateError::Parameters(
            "n, max_alternatives and terminal_count must be positive".into(),
        ));
    }
    if spec.max_rhs_len == 0 && !spec.allow_epsilon {
        return Err(GenerateError::Parameters(
            "max_rhs_len 0 requires allow_epsilon".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GENERATE_ATTEMPTS {
        let g = draw(spec, &mut rng)?;
        if let Ok(clean) = sanitize(&g) {
            return Ok(clean);
        }
    }
    Err(GenerateError::Unsatisfiable(GENERATE_ATTEMPTS))
}

fn draw(spec: &GrammarSpec, rng: &mut ChaCha8Rng) -> Result<Grammar, GrammarError> {
    let min_len = usize::from(!spec.allow_epsilon);
    let terminal = |rng: &mut ChaCha8Rng| term_name(rng.gen_range(0..spec.terminal_count));
    let mut prods = Vec::new();
    for v in 0..spec.n {
        let alts = rng.gen_range(1..=spec.max_alternatives);
        for _ in 0..alts {
            let len = rng.gen_range(min_len..=spec.max_rhs_len);
            let rhs: Vec<String> = match spec.shape {
                Shape::General => (0..len)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            var_name(rng.gen_range(0..spec.n))
                        } else {
                            terminal(rng)
                        }
                    })
                    .collect(),
                Shape::RightLinear => {
                    let with_var = len > 0 && rng.gen_bool(0.6);
                    let mut rhs: Vec<String> =
                        (0..len - usize::from(with_var)).map(|_| terminal(rng)).collect();
                    if with_var {
                        rhs.push(var_name(rng.gen_range(0..spec.n)));
                    }
                    rhs
                }
            };
            prods.push((var_name(v), rhs));
        }
    }
    Grammar::from_named("S", &prods)
}

/// Limits for [`verify_parikh_equivalence`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyBudget {
    /// Largest automaton built in full; larger ones are searched on the fly.
    pub states: usize,
    /// Parikh vectors the grammar-side fixpoint may hold.
    pub oracle: usize,
    /// Configurations either automaton-side search may visit.
    pub search: usize,
}

impl Default for VerifyBudget {
    fn default() -> Self {
        Self {
            states: 200_000,
            oracle: DEFAULT_ORACLE_BUDGET,
            search: 20_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Equal,
    Unequal,
    /// A budget ran out before both sets were known.
    Inconclusive,
}

/// How the automaton side was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AutomatonSide {
    Built { states: usize, transitions: usize },
    OnTheFly,
    Given { states: usize, transitions: usize },
}

pub type NamedVector = BTreeMap<String, u64>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub k: u64,
    pub verdict: Verdict,
    pub automaton: Option<AutomatonSide>,
    pub grammar_set: Option<Vec<NamedVector>>,
    pub automaton_set: Option<Vec<NamedVector>>,
    /// Vectors the grammar produces but the automaton misses.
    pub only_grammar: Vec<NamedVector>,
    /// Vectors the automaton produces but the grammar misses.
    pub only_automaton: Vec<NamedVector>,
    pub reason: Option<String>,
}

impl EquivalenceReport {
    fn inconclusive(k: u64, automaton: Option<AutomatonSide>, reason: String) -> Self {
        Self {
            k,
            verdict: Verdict::Inconclusive,
            automaton,
            grammar_set: None,
            automaton_set: None,
            only_grammar: Vec::new(),
            only_automaton: Vec::new(),
            reason: Some(reason),
        }
    }

    fn compare(
        k: u64,
        terminals: &[String],
        automaton: AutomatonSide,
        grammar: &BTreeSet<ParikhVector>,
        nfa: &BTreeSet<ParikhVector>,
    ) -> Self {
        let named = |it: &mut dyn Iterator<Item = &ParikhVector>| -> Vec<NamedVector> {
            it.map(|v| v.to_named(terminals)).collect()
        };
        let only_grammar = named(&mut grammar.difference(nfa));
        let only_automaton = named(&mut nfa.difference(grammar));
        let verdict = if only_grammar.is_empty() && only_automaton.is_empty() {
            Verdict::Equal
        } else {
            Verdict::Unequal
        };
        Self {
            k,
            verdict,
            automaton: Some(automaton),
            grammar_set: Some(named(&mut grammar.iter())),
            automaton_set: Some(named(&mut nfa.iter())),
            only_grammar,
            only_automaton,
            reason: None,
        }
    }
}

/// Compares the bounded Parikh images (words of length at most `k`) of
/// the grammar and of its automaton. The automaton is built when it has at
/// most `budget.states` states and explored on the fly otherwise; both give
/// the same set. A budget overrun yields [`Verdict::Inconclusive`], never
/// an unequal verdict.
pub fn verify_parikh_equivalence(g: &Grammar, k: u64, budget: &VerifyBudget) -> EquivalenceReport {
    let grammar = match bounded_parikh_language(g, k, budget.oracle) {
        Ok(set) => set,
        Err(e) => return EquivalenceReport::inconclusive(k, None, e.to_string()),
    };
    let (side, automaton) = match build(g, budget.states) {
        Ok(nfa) => {
            let side = AutomatonSide::Built {
                states: nfa.state_count(),
                transitions: nfa.transitions().len(),
            };
            (side, nfa.bounded_parikh(k, budget.search))
        }
        Err(AutomatonError::StateBudget { .. }) => (
            AutomatonSide::OnTheFly,
            bounded_parikh_on_the_fly(g, k, budget.search),
        ),
        Err(e) => return EquivalenceReport::inconclusive(k, None, e.to_string()),
    };
    match automaton {
        Ok(set) => EquivalenceReport::compare(k, g.terminals(), side, &grammar, &set),
        Err(e) => EquivalenceReport::inconclusive(k, Some(side), e.to_string()),
    }
}

/// Like [`verify_parikh_equivalence`] against a given automaton, which must
/// use the grammar's terminal order.
pub fn verify_against(g: &Grammar, nfa: &Nfa, k: u64, budget: &VerifyBudget) -> EquivalenceReport {
    let side = AutomatonSide::Given {
        states: nfa.state_count(),
        transitions: nfa.transitions().len(),
    };
    if nfa.terminals() != g.terminals() {
        return EquivalenceReport::inconclusive(
            k,
            Some(side),
            "automaton and grammar disagree on the terminal alphabet".into(),
        );
    }
    let grammar = match bounded_parikh_language(g, k, budget.oracle) {
        Ok(set) => set,
        Err(e) => return EquivalenceReport::inconclusive(k, Some(side), e.to_string()),
    };
    match nfa.bounded_parikh(k, budget.search) {
        Ok(set) => EquivalenceReport::compare(k, g.terminals(), side, &grammar, &set),
        Err(e) => EquivalenceReport::inconclusive(k, Some(side), e.to_string()),
    }
}

/// Settings for [`stress`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StressConfig {
    pub trials: usize,
    pub spec: GrammarSpec,
    pub k: u64,
    /// Trial `i` uses grammar seed `seed + i`.
    pub seed: u64,
    /// Worker threads; `None` uses the default pool.
    pub jobs: Option<usize>,
    /// Random parse trees (at most 40 nodes) traced per grammar.
    pub trace_trees: usize,
    pub budget: VerifyBudget,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            spec: GrammarSpec::default(),
            k: 6,
            seed: 0,
            jobs: None,
            trace_trees: 4,
            budget: VerifyBudget::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub passed: bool,
    pub variables: usize,
    pub productions: usize,
    pub d: Option<usize>,
    pub verdict: Option<Verdict>,
    pub automaton: Option<AutomatonSide>,
    /// Reachable states, when the symbolic check could count them.
    pub states: Option<u128>,
    pub traces: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShrunkFailure {
    pub seed: u64,
    pub original: String,
    pub shrunk: String,
    pub shrink_steps: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressReport {
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub k: u64,
    pub spec: GrammarSpec,
    pub results: Vec<TrialReport>,
    pub first_failure: Option<ShrunkFailure>,
}

impl StressReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

/// Every check the stress run applies to one grammar: bounded equivalence,
/// the state invariants over all reachable states, and completeness /
/// soundness round trips on `trace_trees` random trees drawn from `seed`.
/// Right-linear specs additionally require `d = 1`.
pub fn check_grammar(g: &Grammar, cfg: &StressConfig, seed: u64) -> TrialReport {
    let mut failures = Vec::new();
    let rg = ReminderGraph::build(g);
    let d = match regularity_width_of(&rg, WidthMode::default()) {
        Ok(w) => Some(w.d),
        Err(e) => {
            failures.push(format!("regularity width: {e}"));
            None
        }
    };
    if cfg.spec.shape == Shape::RightLinear && d != Some(1) {
        failures.push(format!("right-linear grammar with d = {d:?}"));
    }
    let report = verify_parikh_equivalence(g, cfg.k, &cfg.budget);
    match report.verdict {
        Verdict::Equal => {}
        Verdict::Unequal => failures.push(format!(
            "unequal at k = {}: only grammar {:?}, only automaton {:?}",
            cfg.k, report.only_grammar, report.only_automaton
        )),
        Verdict::Inconclusive => failures.push(format!(
            "inconclusive: {}",
            report.reason.clone().unwrap_or_default()
        )),
    }
    let mut states = None;
    if let Some(d) = d {
        match check_invariants_symbolic(g, &rg, d, DEFAULT_SATURATION_BUDGET) {
            Ok(sym) => {
                states = sym.states;
                for v in sym.violations.iter().take(3) {
                    failures.push(format!("invariant {}: {}", v.check, v.detail));
                }
            }
            Err(e) => failures.push(format!("symbolic invariants: {e}")),
        }
        if matches!(report.automaton, Some(AutomatonSide::Built { .. })) {
            if let Ok(nfa) = build(g, cfg.budget.states) {
                let inv = check_state_invariants(nfa.states(), g, &rg, d);
                for v in inv.violations.iter().take(3) {
                    failures.push(format!("invariant {} at state {}: {}", v.check, v.state, v.detail));
                }
                if states.is_some_and(|s| s != nfa.state_count() as u128) {
                    failures.push(format!(
                        "symbolic count {:?} differs from built {}",
                        states,
                        nfa.state_count()
                    ));
                }
            }
        }
    }
    let sampler = TreeSampler::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = 0;
    for _ in 0..cfg.trace_trees {
        let Some(t) = sampler.sample(g.axiom(), 40, &mut rng) else {
            break;
        };
        traces += 1;
        match completeness_trace(g, &t) {
            Ok(tr) => {
                if ParikhVector::of_word(&tr.word) != t.parikh() {
                    failures.push("completeness trace changed the Parikh image".into());
                }
                match soundness_reconstruct(g, &tr.run) {
                    Ok(back) if ParikhVector::of_word(&back.word) == t.parikh() => {}
                    Ok(_) => failures.push("reconstruction changed the Parikh image".into()),
                    Err(e) => failures.push(format!("soundness: {e}")),
                }
            }
            Err(e) => failures.push(format!("completeness: {e}")),
        }
    }
    TrialReport {
        seed,
        passed: failures.is_empty(),
        variables: g.var_count(),
        productions: g.productions().len(),
        d,
        verdict: Some(report.verdict),
        automaton: report.automaton,
        states,
        traces,
        failures,
    }
}

/// Smaller grammars obtained by one edit, in shrinking order: drop a
/// production, then drop one rhs symbol, then drop a variable with every
/// production mentioning it.
fn shrink_candidates(g: &Grammar) -> Vec<Grammar> {
    let named = g.named_productions();
    let axiom = g.var_name(g.axiom()).to_string();
    let mut out = Vec::new();
    let mut push = |prods: Vec<(String, Vec<String>)>| {
        if let Ok(h) = Grammar::from_named(&axiom, &prods).and_then(|h| sanitize(&h)) {
            if h != *g {
                out.push(h);
            }
        }
    };
    for i in 0..named.len() {
        let mut p = named.clone();
        p.remove(i);
        push(p);
    }
    for i in 0..named.len() {
        for j in 0..named[i].1.len() {
            let mut p = named.clone();
            p[i].1.remove(j);
            push(p);
        }
    }
    for v in g.variables() {
        if *v == axiom {
            continue;
        }
        let p = named
            .iter()
            .filter(|(lhs, rhs)| lhs != v && !rhs.contains(v))
            .cloned()
            .collect();
        push(p);
    }
    out
}

/// Greedily applies the first shrink that keeps the grammar failing.
pub fn shrink(g: &Grammar, cfg: &StressConfig, seed: u64) -> (Grammar, usize, Vec<String>) {
    let mut current = g.clone();
    let mut failures = check_grammar(g, cfg, seed).failures;
    let mut steps = 0;
    'outer: loop {
        for h in shrink_candidates(&current) {
            let r = check_grammar(&h, cfg, seed);
            if !r.passed {
                current = h;
                failures = r.failures;
                steps += 1;
                continue 'outer;
            }
        }
        return (current, steps, failures);
    }
}

/// Runs [`check_grammar`] on `trials` random grammars in parallel and
/// shrinks the first failure.
pub fn stress(cfg: &StressConfig) -> Result<StressReport, GenerateError> {
    let run = || -> Result<Vec<TrialReport>, GenerateError> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed + i as u64;
                let g = random_grammar(&cfg.spec, seed)?;
                Ok(check_grammar(&g, cfg, seed))
            })
            .collect()
    };
    let results = match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| GenerateError::Parameters(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let first_failure = match results.iter().find(|r| !r.passed) {
        Some(r) => {
            let g = random_grammar(&cfg.spec, r.seed)?;
            let (small, shrink_steps, failures) = shrink(&g, cfg, r.seed);
            Some(ShrunkFailure {
                seed: r.seed,
                original: render(&g),
                shrunk: render(&small),
                shrink_steps,
                failures,
            })
        }
        None => None,
    };
    let passed = results.iter().filter(|r| r.passed).count();
    Ok(StressReport {
        trials: cfg.trials,
        passed,
        failed: results.len() - passed,
        k: cfg.k,
        spec: cfg.spec.clone(),
        results,
        first_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{bounded_parikh_language, stats, DEFAULT_ORACLE_BUDGET};
    use crate::parikh::ParikhVector;
    use crate::remgraph::{regularity_width, ReminderGraph, WidthMode};
    use std::collections::BTreeSet;

    #[test]
    fn gn_language_is_a_single_word() {
        for n in 1..=5usize {
            let g = gn_grammar(n).unwrap();
            let len = 1u64 << (n - 1);
            let set = bounded_parikh_language(&g, len, DEFAULT_ORACLE_BUDGET).unwrap();
            assert_eq!(set.len(), 1);
            assert_eq!(set.iter().next().unwrap().total(), len);
            assert_eq!(stats(&g).n, n);
        }
        assert!(gn_grammar(0).is_err());
    }

    #[test]
    fn ports_width_bound() {
        for q in 1..=3 {
            for r in q..=8 {
                for seed in 0..4 {
                    let g = ports_grammar(r, q, seed).unwrap();
                    let rg = ReminderGraph::build(&g);
                    let ports: BTreeSet<&str> =
                        (r - q..r).map(|i| VAR_PORT_NAMES[i]).collect();
                    for (a, b, _) in rg.edges() {
                        assert!(
                            ports.contains(g.var_name(a)) || ports.contains(g.var_name(b)),
                            "edge {}-{} misses the ports",
                            g.var_name(a),
                            g.var_name(b)
                        );
                    }
                    let d = regularity_width(&g, WidthMode::default()).unwrap().d;
                    assert!(d <= q + 1, "r={r} q={q} seed={seed}: d={d}");
                }
            }
        }
    }

    const VAR_PORT_NAMES: [&str; 8] = ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8"];

    #[test]
    fn random_is_deterministic() {
        let spec = GrammarSpec::default();
        for seed in 0..20 {
            assert_eq!(random_grammar(&spec, seed).unwrap(), random_grammar(&spec, seed).unwrap());
        }
    }

    #[test]
    fn right_linear_shape() {
        let spec = GrammarSpec {
            shape: Shape::RightLinear,
            ..GrammarSpec::default()
        };
        for seed in 0..50 {
            let g = random_grammar(&spec, seed).unwrap();
            assert!(g.productions().iter().all(|p| p.var_count() <= 1));
            assert_eq!(ReminderGraph::build(&g).edge_count(), 0);
        }
    }

    #[test]
    fn unary_spec() {
        let spec = GrammarSpec {
            n: 1,
            max_rhs_len: 2,
            terminal_count: 1,
            ..GrammarSpec::default()
        };
        let g = random_grammar(&spec, 3).unwrap();
        assert_eq!(g.var_count(), 1);
        assert!(g.terminals().len() <= 1);
        let set = bounded_parikh_language(&g, 6, DEFAULT_ORACLE_BUDGET).unwrap();
        assert!(set.iter().all(|v: &ParikhVector| v.total() <= 6));
    }

    fn named(pairs: &[(&str, u64)]) -> NamedVector {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn gn_verdicts_are_singletons() {
        for n in 2..=5usize {
            let g = gn_grammar(n).unwrap();
            let k = 1u64 << (n - 1);
            let r = verify_parikh_equivalence(&g, k, &VerifyBudget::default());
            assert_eq!(r.verdict, Verdict::Equal);
            let single = vec![named(&[("a", k)])];
            assert_eq!(r.grammar_set.as_ref(), Some(&single));
            assert_eq!(r.automaton_set.as_ref(), Some(&single));
        }
    }

    #[test]
    fn anbn_at_six() {
        let g = crate::grammar::parse_grammar("start: S\nS -> a S b | _eps_\n").unwrap();
        let r = verify_parikh_equivalence(&g, 6, &VerifyBudget::default());
        assert_eq!(r.verdict, Verdict::Equal);
        let expected: Vec<NamedVector> = (0..=3)
            .map(|i| {
                if i == 0 {
                    NamedVector::new()
                } else {
                    named(&[("a", i), ("b", i)])
                }
            })
            .collect();
        assert_eq!(r.grammar_set.unwrap(), expected);
        assert!(r.only_grammar.is_empty() && r.only_automaton.is_empty());
    }

    #[test]
    fn corrupted_automaton_is_caught() {
        let g = gn_grammar(3).unwrap();
        let nfa = build(&g, 1000).unwrap();
        let budget = VerifyBudget::default();
        assert_eq!(verify_against(&g, &nfa, 4, &budget).verdict, Verdict::Equal);
        let mut caught = 0;
        for i in 0..nfa.transitions().len() {
            let r = verify_against(&g, &nfa.without_transition(i), 4, &budget);
            if r.verdict == Verdict::Unequal {
                caught += 1;
                assert_eq!(r.only_grammar, vec![named(&[("a", 4)])]);
                assert!(r.only_automaton.is_empty());
            }
        }
        assert!(caught > 0);
    }

    #[test]
    fn on_the_fly_side_agrees() {
        let spec = GrammarSpec::default();
        let small = VerifyBudget {
            states: 1,
            ..VerifyBudget::default()
        };
        for seed in 0..15 {
            let g = random_grammar(&spec, seed).unwrap();
            let built = verify_parikh_equivalence(&g, 5, &VerifyBudget::default());
            let fly = verify_parikh_equivalence(&g, 5, &small);
            assert_eq!(fly.automaton, Some(AutomatonSide::OnTheFly));
            assert_eq!(built.verdict, Verdict::Equal);
            assert_eq!(fly.automaton_set, built.automaton_set);
        }
    }

    #[test]
    fn budget_overrun_is_inconclusive() {
        let g = gn_grammar(3).unwrap();
        let tight = VerifyBudget {
            search: 1,
            ..VerifyBudget::default()
        };
        let r = verify_parikh_equivalence(&g, 4, &tight);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.reason.is_some());
    }

    #[test]
    fn stress_runs() {
        let empty = stress(&StressConfig {
            trials: 0,
            ..StressConfig::default()
        })
        .unwrap();
        assert_eq!((empty.trials, empty.passed, empty.failed), (0, 0, 0));
        assert!(empty.results.is_empty() && empty.first_failure.is_none());

        let cfg = StressConfig {
            trials: 12,
            ..StressConfig::default()
        };
        let r = stress(&cfg).unwrap();
        assert!(r.ok(), "{:?}", r.results.iter().find(|t| !t.passed));
        assert_eq!(r, stress(&cfg).unwrap());

        let rl = stress(&StressConfig {
            trials: 12,
            spec: GrammarSpec {
                shape: Shape::RightLinear,
                ..GrammarSpec::default()
            },
            jobs: Some(2),
            ..StressConfig::default()
        })
        .unwrap();
        assert!(rl.ok());
        assert!(rl.results.iter().all(|t| t.d == Some(1)));
    }

    #[test]
    fn shrinking_keeps_the_failure() {
        // An oracle budget this small fails every grammar with several
        // short words, which gives the shrinker something to do.
        let cfg = StressConfig {
            trials: 6,
            trace_trees: 0,
            budget: VerifyBudget {
                oracle: 2,
                ..VerifyBudget::default()
            },
            ..StressConfig::default()
        };
        let r = stress(&cfg).unwrap();
        let f = r.first_failure.expect("tiny oracle budget fails");
        assert!(!f.failures.is_empty());
        let small = crate::grammar::parse_grammar(&f.shrunk).unwrap();
        let original = crate::grammar::parse_grammar(&f.original).unwrap();
        assert!(small.productions().len() <= original.productions().len());
        assert!(!check_grammar(&small, &cfg, f.seed).passed);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<StressConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn bad_specs() {
        let spec = GrammarSpec {
            n: 0,
            ..GrammarSpec::default()
        };
        assert!(random_grammar(&spec, 0).is_err());
        assert!(ports_grammar(2, 3, 0).is_err());
    }
}
