//! Context-free grammars: representation, text format, structural metrics
//! and a bounded Parikh-image oracle.
//!
//! Variables are exactly the symbols that occur on the left-hand side of
//! some production; everything else appearing in a right-hand side is a
//! terminal. Productions form a set, duplicates are merged on construction.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parikh::ParikhVector;

/// Token that denotes an empty right-hand side in the text format.
pub const EPSILON_TOKEN: &str = "_eps_";

/// Default cap on the number of Parikh vectors held per variable by
/// [`bounded_parikh_language`].
pub const DEFAULT_ORACLE_BUDGET: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl Term {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sym {
    Var(Var),
    Term(Term),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Variable,
    Terminal,
}

/// A named symbol together with its classification in the owning grammar.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Production {
    pub lhs: Var,
    pub rhs: Vec<Sym>,
}

impl Production {
    /// Variable occurrences of the right-hand side, in order.
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.rhs.iter().filter_map(|s| match s {
            Sym::Var(v) => Some(*v),
            Sym::Term(_) => None,
        })
    }

    /// Number of variable occurrences on the right-hand side.
    pub fn var_count(&self) -> usize {
        self.vars().count()
    }

    /// The concatenated terminal words `w_0 w_1 ... w_r` of the right-hand side.
    pub fn terminal_word(&self) -> Vec<Term> {
        self.rhs
            .iter()
            .filter_map(|s| match s {
                Sym::Term(t) => Some(*t),
                Sym::Var(_) => None,
            })
            .collect()
    }

    pub fn is_terminal_only(&self) -> bool {
        self.rhs.iter().all(|s| matches!(s, Sym::Term(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing `start:` directive")]
    MissingAxiom,
    #[error("axiom `{0}` is not the left-hand side of any production")]
    AxiomNotVariable(String),
    #[error("grammar has no productions")]
    NoProductions,
    #[error("invalid symbol name `{0}`")]
    InvalidSymbol(String),
    #[error("symbol `{0}` is declared twice")]
    DuplicateSymbol(String),
    #[error("variable `{0}` has no production")]
    VariableWithoutProduction(String),
    #[error("symbol index out of range in production {0}")]
    BadProduction(usize),
    #[error("the axiom derives no terminal word")]
    EmptyLanguage,
    #[error("oracle budget of {budget} Parikh vectors exceeded")]
    Budget { budget: usize },
}

/// `G = (V, Σ, P, S)` with symbols interned as indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    variables: Vec<String>,
    terminals: Vec<String>,
    productions: Vec<Production>,
    axiom: Var,
    by_lhs: Vec<Vec<usize>>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.chars().any(|c| c.is_whitespace() || c == '#' || c == '|')
        && name != "->"
        && name != EPSILON_TOKEN
}

impl Grammar {
    /// Builds a grammar from interned parts. Duplicate productions are merged
    /// keeping the first occurrence.
    pub fn new(
        variables: Vec<String>,
        terminals: Vec<String>,
        productions: Vec<Production>,
        axiom: Var,
    ) -> Result<Self, GrammarError> {
        let mut seen = HashSet::new();
        for name in variables.iter().chain(&terminals) {
            if !valid_name(name) {
                return Err(GrammarError::InvalidSymbol(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(GrammarError::DuplicateSymbol(name.clone()));
            }
        }
        if productions.is_empty() {
            return Err(GrammarError::NoProductions);
        }
        if axiom.index() >= variables.len() {
            return Err(GrammarError::AxiomNotVariable(format!("#{}", axiom.0)));
        }
        let mut unique = Vec::with_capacity(productions.len());
        let mut seen_prods = HashSet::new();
        for (i, p) in productions.into_iter().enumerate() {
            let in_range = p.lhs.index() < variables.len()
                && p.rhs.iter().all(|s| match s {
                    Sym::Var(v) => v.index() < variables.len(),
                    Sym::Term(t) => t.index() < terminals.len(),
                });
            if !in_range {
                return Err(GrammarError::BadProduction(i));
            }
            if seen_prods.insert(p.clone()) {
                unique.push(p);
            }
        }
        let mut by_lhs = vec![Vec::new(); variables.len()];
        for (i, p) in unique.iter().enumerate() {
            by_lhs[p.lhs.index()].push(i);
        }
        if let Some(v) = by_lhs.iter().position(Vec::is_empty) {
            return Err(GrammarError::VariableWithoutProduction(variables[v].clone()));
        }
        Ok(Self {
            variables,
            terminals,
            productions: unique,
            axiom,
            by_lhs,
        })
    }

    /// Builds a grammar from named productions. Symbols are classified by
    /// left-hand-side occurrence and ordered by first appearance, starting
    /// with the axiom.
    pub fn from_named<S: AsRef<str>>(
        axiom: &str,
        productions: &[(S, Vec<S>)],
    ) -> Result<Self, GrammarError> {
        if productions.is_empty() {
            return Err(GrammarError::NoProductions);
        }
        let lhs_names: HashSet<&str> = productions.iter().map(|(l, _)| l.as_ref()).collect();
        if !lhs_names.contains(axiom) {
            return Err(GrammarError::AxiomNotVariable(axiom.to_string()));
        }
        let mut interned: HashMap<String, Sym> = HashMap::new();
        let mut variables = Vec::new();
        let mut terminals = Vec::new();
        let mut intern = |name: &str| -> Result<Sym, GrammarError> {
            if let Some(&sym) = interned.get(name) {
                return Ok(sym);
            }
            if !valid_name(name) {
                return Err(GrammarError::InvalidSymbol(name.to_string()));
            }
            let sym = if lhs_names.contains(name) {
                variables.push(name.to_string());
                Sym::Var(Var(variables.len() as u32 - 1))
            } else {
                terminals.push(name.to_string());
                Sym::Term(Term(terminals.len() as u32 - 1))
            };
            interned.insert(name.to_string(), sym);
            Ok(sym)
        };

        let Sym::Var(axiom_var) = intern(axiom)? else {
            unreachable!("axiom is a left-hand side");
        };
        let mut prods = Vec::with_capacity(productions.len());
        for (lhs, rhs) in productions {
            let Sym::Var(l) = intern(lhs.as_ref())? else {
                unreachable!("left-hand sides are variables by construction");
            };
            let body = rhs
                .iter()
                .map(|s| intern(s.as_ref()))
                .collect::<Result<Vec<_>, _>>()?;
            prods.push(Production { lhs: l, rhs: body });
        }
        Grammar::new(variables, terminals, prods, axiom_var)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, idx: usize) -> &Production {
        &self.productions[idx]
    }

    pub fn axiom(&self) -> Var {
        self.axiom
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.variables.len() as u32).map(Var)
    }

    /// Indices of the productions with left-hand side `v`.
    pub fn productions_of(&self, v: Var) -> &[usize] {
        &self.by_lhs[v.index()]
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.variables[v.index()]
    }

    pub fn term_name(&self, t: Term) -> &str {
        &self.terminals[t.index()]
    }

    pub fn sym_name(&self, s: Sym) -> &str {
        match s {
            Sym::Var(v) => self.var_name(v),
            Sym::Term(t) => self.term_name(t),
        }
    }

    pub fn symbol(&self, s: Sym) -> Symbol {
        Symbol {
            name: self.sym_name(s).to_string(),
            kind: match s {
                Sym::Var(_) => SymbolKind::Variable,
                Sym::Term(_) => SymbolKind::Terminal,
            },
        }
    }

    pub fn var_by_name(&self, name: &str) -> Option<Var> {
        self.variables
            .iter()
            .position(|n| n == name)
            .map(|i| Var(i as u32))
    }

    pub fn term_by_name(&self, name: &str) -> Option<Term> {
        self.terminals
            .iter()
            .position(|n| n == name)
            .map(|i| Term(i as u32))
    }

    /// The same grammar with a different axiom.
    pub fn with_axiom(&self, axiom: Var) -> Self {
        assert!(axiom.index() < self.variables.len());
        Self {
            axiom,
            ..self.clone()
        }
    }

    /// Renders a production as `A -> x y z`.
    pub fn production_text(&self, idx: usize) -> String {
        let p = &self.productions[idx];
        let mut s = format!("{} ->", self.var_name(p.lhs));
        if p.rhs.is_empty() {
            s.push(' ');
            s.push_str(EPSILON_TOKEN);
        }
        for &sym in &p.rhs {
            s.push(' ');
            s.push_str(self.sym_name(sym));
        }
        s
    }

    /// Named view of the productions, in order.
    pub fn named_productions(&self) -> Vec<(String, Vec<String>)> {
        self.productions
            .iter()
            .map(|p| {
                (
                    self.var_name(p.lhs).to_string(),
                    p.rhs.iter().map(|&s| self.sym_name(s).to_string()).collect(),
                )
            })
            .collect()
    }

    /// Equality up to symbol and production order.
    pub fn same_structure(&self, other: &Grammar) -> bool {
        let names = |g: &Grammar| -> (BTreeSet<String>, BTreeSet<String>) {
            (
                g.variables.iter().cloned().collect(),
                g.terminals.iter().cloned().collect(),
            )
        };
        let prods = |g: &Grammar| -> BTreeSet<(String, Vec<String>)> {
            g.named_productions().into_iter().collect()
        };
        self.var_name(self.axiom) == other.var_name(other.axiom)
            && names(self) == names(other)
            && prods(self) == prods(other)
    }

    /// Word over terminal names, for display.
    pub fn word_text(&self, word: &[Term]) -> String {
        word.iter()
            .map(|&t| self.term_name(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Splits a user-supplied word into terminals. Whitespace-separated
    /// tokens are used when present; otherwise a single token that is not a
    /// terminal name is split into characters.
    pub fn parse_word(&self, text: &str) -> Option<Vec<Term>> {
        parse_word_over(&self.terminals, text)
    }
}

/// Parses a word over the named terminals: whitespace-separated names, or a
/// single run of one-character names. Empty text and `_eps_` give ε.
pub fn parse_word_over(terminals: &[String], text: &str) -> Option<Vec<Term>> {
    let lookup = |name: &str| {
        terminals
            .iter()
            .position(|t| t == name)
            .map(|i| Term(i as u32))
    };
    let text = text.trim();
    if text.is_empty() || text == EPSILON_TOKEN {
        return Some(Vec::new());
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() == 1 && lookup(tokens[0]).is_none() {
        return text.chars().map(|c| lookup(&c.to_string())).collect();
    }
    tokens.iter().map(|t| lookup(t)).collect()
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

/// Parses the grammar text format.
///
/// ```text
/// # comment
/// start: S
/// S -> a S b | _eps_
/// ```
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut axiom: Option<String> = None;
    let mut productions: Vec<(String, Vec<String>)> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let column_of = |needle: &str| raw.find(needle).map_or(1, |p| raw[..p].chars().count() + 1);
        if axiom.is_none() {
            let trimmed = line.trim();
            let Some(rest) = trimmed.strip_prefix("start:") else {
                return Err(GrammarError::MissingAxiom);
            };
            let name = rest.trim();
            if name.is_empty() || name.split_whitespace().count() != 1 {
                return Err(GrammarError::Syntax {
                    line: line_no,
                    column: column_of("start:"),
                    message: "expected `start: <symbol>`".into(),
                });
            }
            axiom = Some(name.to_string());
            continue;
        }
        let Some(arrow) = line.find("->") else {
            return Err(GrammarError::Syntax {
                line: line_no,
                column: line.chars().take_while(|c| c.is_whitespace()).count() + 1,
                message: "expected `<symbol> -> <symbols>`".into(),
            });
        };
        let lhs: Vec<&str> = line[..arrow].split_whitespace().collect();
        if lhs.len() != 1 {
            return Err(GrammarError::Syntax {
                line: line_no,
                column: 1,
                message: "left-hand side must be exactly one symbol".into(),
            });
        }
        if !valid_name(lhs[0]) {
            return Err(GrammarError::Syntax {
                line: line_no,
                column: column_of(lhs[0]),
                message: format!("invalid symbol `{}`", lhs[0]),
            });
        }
        for alt in line[arrow + 2..].split('|') {
            let mut rhs = Vec::new();
            for tok in alt.split_whitespace() {
                if tok == EPSILON_TOKEN {
                    continue;
                }
                if !valid_name(tok) {
                    return Err(GrammarError::Syntax {
                        line: line_no,
                        column: arrow + 3 + line[arrow + 2..].find(tok).unwrap_or(0),
                        message: format!("invalid symbol `{tok}`"),
                    });
                }
                rhs.push(tok.to_string());
            }
            productions.push((lhs[0].to_string(), rhs));
        }
    }
    let axiom = axiom.ok_or(GrammarError::MissingAxiom)?;
    if productions.is_empty() {
        return Err(GrammarError::NoProductions);
    }
    Grammar::from_named(&axiom, &productions)
}

/// Renders a grammar in the text format, one line per variable.
pub fn render(g: &Grammar) -> String {
    let mut out = format!("start: {}\n", g.var_name(g.axiom));
    for v in g.vars() {
        let alts: Vec<String> = g
            .productions_of(v)
            .iter()
            .map(|&i| {
                let p = &g.productions[i];
                if p.rhs.is_empty() {
                    EPSILON_TOKEN.to_string()
                } else {
                    p.rhs
                        .iter()
                        .map(|&s| g.sym_name(s))
                        .collect::<Vec<_>>()
                        .join(" ")
                }
            })
            .collect();
        out.push_str(&format!("{} -> {}\n", g.var_name(v), alts.join(" | ")));
    }
    out
}

/// `(n, m, e, |P|)` of a grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarStats {
    pub n: usize,
    /// Degree: one less than the largest number of variable occurrences in a
    /// right-hand side, clamped at zero.
    pub m: usize,
    /// Largest number of terminal occurrences in a right-hand side.
    pub e: usize,
    pub p_count: usize,
}

pub fn stats(g: &Grammar) -> GrammarStats {
    let max_r = g.productions.iter().map(Production::var_count).max().unwrap_or(0);
    let e = g
        .productions
        .iter()
        .map(|p| p.rhs.len() - p.var_count())
        .max()
        .unwrap_or(0);
    GrammarStats {
        n: g.var_count(),
        m: max_r.saturating_sub(1),
        e,
        p_count: g.productions.len(),
    }
}

/// A binary relation on the variables of one grammar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarRelation {
    n: usize,
    bits: Vec<bool>,
}

impl VarRelation {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![false; n * n],
        }
    }

    pub fn contains(&self, a: Var, b: Var) -> bool {
        self.bits[a.index() * self.n + b.index()]
    }

    pub fn insert(&mut self, a: Var, b: Var) -> bool {
        let slot = &mut self.bits[a.index() * self.n + b.index()];
        let fresh = !*slot;
        *slot = true;
        fresh
    }

    pub fn pairs(&self) -> Vec<(Var, Var)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                if self.bits[a * self.n + b] {
                    out.push((Var(a as u32), Var(b as u32)));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset(&self, other: &VarRelation) -> bool {
        self.n == other.n && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Transitive closure (Warshall).
    pub fn transitive_closure(&self) -> VarRelation {
        let n = self.n;
        let mut bits = self.bits.clone();
        for k in 0..n {
            for i in 0..n {
                if bits[i * n + k] {
                    for j in 0..n {
                        if bits[k * n + j] {
                            bits[i * n + j] = true;
                        }
                    }
                }
            }
        }
        VarRelation { n, bits }
    }
}

/// `A → A'` iff `A'` occurs in some right-hand side of `A`.
pub fn accessibility(g: &Grammar) -> VarRelation {
    let mut rel = VarRelation::empty(g.var_count());
    for p in &g.productions {
        for v in p.vars() {
            rel.insert(p.lhs, v);
        }
    }
    rel
}

/// `→⁺`, the transitive closure of [`accessibility`].
pub fn reachability(g: &Grammar) -> VarRelation {
    accessibility(g).transitive_closure()
}

/// Least terminal count of a word derivable from each variable; `None` for
/// unproductive variables.
pub fn min_yield(g: &Grammar) -> Vec<Option<u64>> {
    least_cost(g, |p| (p.rhs.len() - p.var_count()) as u64)
}

/// Least node count of a parse tree rooted at each variable.
pub fn min_tree_size(g: &Grammar) -> Vec<Option<u64>> {
    least_cost(g, |p| 1 + (p.rhs.len() - p.var_count()) as u64)
}

fn least_cost(g: &Grammar, own: impl Fn(&Production) -> u64) -> Vec<Option<u64>> {
    let mut best: Vec<Option<u64>> = vec![None; g.var_count()];
    loop {
        let mut changed = false;
        for p in &g.productions {
            let mut total = Some(own(p));
            for v in p.vars() {
                total = match (total, best[v.index()]) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                };
            }
            if let Some(c) = total {
                let slot = &mut best[p.lhs.index()];
                if slot.is_none_or(|old| c < old) {
                    *slot = Some(c);
                    changed = true;
                }
            }
        }
        if !changed {
            return best;
        }
    }
}

/// Removes unproductive variables, then variables unreachable from the
/// axiom, together with every production that mentions them. Unused
/// terminals are dropped.
pub fn sanitize(g: &Grammar) -> Result<Grammar, GrammarError> {
    let productive = min_yield(g);
    if productive[g.axiom.index()].is_none() {
        return Err(GrammarError::EmptyLanguage);
    }
    let keep_prod = |p: &Production| {
        productive[p.lhs.index()].is_some() && p.vars().all(|v| productive[v.index()].is_some())
    };
    let mut reachable = vec![false; g.var_count()];
    reachable[g.axiom.index()] = true;
    let mut stack = vec![g.axiom];
    while let Some(v) = stack.pop() {
        for &i in g.productions_of(v) {
            let p = &g.productions[i];
            if !keep_prod(p) {
                continue;
            }
            for w in p.vars() {
                if !reachable[w.index()] {
                    reachable[w.index()] = true;
                    stack.push(w);
                }
            }
        }
    }
    let kept: Vec<(String, Vec<String>)> = g
        .productions
        .iter()
        .filter(|p| keep_prod(p) && reachable[p.lhs.index()])
        .map(|p| {
            (
                g.var_name(p.lhs).to_string(),
                p.rhs.iter().map(|&s| g.sym_name(s).to_string()).collect(),
            )
        })
        .collect();
    let rebuilt = Grammar::from_named(g.var_name(g.axiom), &kept)?;
    Ok(reorder_like(&rebuilt, g))
}

/// Permutes the variables and terminals of `g` to follow their order in
/// `template` (symbols absent from the template keep their relative order
/// at the end).
fn reorder_like(g: &Grammar, template: &Grammar) -> Grammar {
    let var_rank = |name: &str| template.var_by_name(name).map_or(usize::MAX, Var::index);
    let term_rank = |name: &str| template.term_by_name(name).map_or(usize::MAX, Term::index);
    let mut var_order: Vec<Var> = g.vars().collect();
    var_order.sort_by_key(|&v| (var_rank(g.var_name(v)), v));
    let mut term_order: Vec<Term> = (0..g.terminals.len() as u32).map(Term).collect();
    term_order.sort_by_key(|&t| (term_rank(g.term_name(t)), t));
    let mut var_map = vec![Var(0); g.var_count()];
    for (new, &old) in var_order.iter().enumerate() {
        var_map[old.index()] = Var(new as u32);
    }
    let mut term_map = vec![Term(0); g.terminals.len()];
    for (new, &old) in term_order.iter().enumerate() {
        term_map[old.index()] = Term(new as u32);
    }
    let productions = g
        .productions
        .iter()
        .map(|p| Production {
            lhs: var_map[p.lhs.index()],
            rhs: p
                .rhs
                .iter()
                .map(|s| match *s {
                    Sym::Var(v) => Sym::Var(var_map[v.index()]),
                    Sym::Term(t) => Sym::Term(term_map[t.index()]),
                })
                .collect(),
        })
        .collect();
    Grammar::new(
        var_order.iter().map(|&v| g.var_name(v).to_string()).collect(),
        term_order.iter().map(|&t| g.term_name(t).to_string()).collect(),
        productions,
        var_map[g.axiom.index()],
    )
    .expect("permutation of a valid grammar is valid")
}

/// `{Π(w) : w ∈ L(G), |w| ≤ k}`.
///
/// Computed as the least fixpoint of `L_A = ⋃ (Π(w_0⋯w_r) + L_{A_1} + ⋯ +
/// L_{A_r})` over the finite lattice of vector sets truncated at total `k`.
/// A Parikh vector fixes the word length, so truncation is exact.
pub fn bounded_parikh_language(
    g: &Grammar,
    k: u64,
    budget: usize,
) -> Result<BTreeSet<ParikhVector>, GrammarError> {
    let mut sets: Vec<BTreeSet<ParikhVector>> = vec![BTreeSet::new(); g.var_count()];
    loop {
        let mut changed = false;
        for p in &g.productions {
            let base = ParikhVector::of_word(&p.terminal_word());
            if base.total() > k {
                continue;
            }
            let mut partial: BTreeSet<ParikhVector> = BTreeSet::from([base]);
            for v in p.vars() {
                let mut next = BTreeSet::new();
                for a in &partial {
                    for b in &sets[v.index()] {
                        if a.total() + b.total() <= k {
                            next.insert(a + b);
                        }
                    }
                }
                partial = next;
                if partial.is_empty() {
                    break;
                }
            }
            let target = &mut sets[p.lhs.index()];
            for vec in partial {
                changed |= target.insert(vec);
            }
            if target.len() > budget {
                return Err(GrammarError::Budget { budget });
            }
        }
        if !changed {
            return Ok(std::mem::take(&mut sets[g.axiom.index()]));
        }
    }
}
