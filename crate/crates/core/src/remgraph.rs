//! The reminder graph of a grammar and its regularity width.
//!
//! For every production with at least two variable occurrences
//! `A_1 … A_r` and every pair of positions `i, j`:
//!
//! * siblings `A_i ≠ A_j` at `i ≠ j` are adjacent;
//! * every `A' ≠ A_j` reachable from `A_i` in one or more steps is adjacent
//!   to `A_j` (this includes `i = j`).
//!
//! The regularity width is the treewidth of this graph plus one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::grammar::{reachability, Grammar, Var, VarRelation};
use crate::treewidth::{
    exact_treewidth, heuristic_treewidth, ExactBudget, Graph, TreeDecomposition, TreewidthError,
};

/// Why an edge exists. Positions index the variable occurrences of the
/// production, starting at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeWitness {
    Siblings { production: usize, i: usize, j: usize },
    Reachable { production: usize, i: usize, j: usize, via: Var },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReminderGraph {
    vertex_count: usize,
    /// Keyed by `(a, b)` with `a < b`; the witness recorded first.
    edges: BTreeMap<(Var, Var), EdgeWitness>,
}

fn key(a: Var, b: Var) -> (Var, Var) {
    (a.min(b), a.max(b))
}

impl ReminderGraph {
    pub fn build(g: &Grammar) -> Self {
        Self::build_with(g, &reachability(g))
    }

    /// Builds the graph given a precomputed `→⁺`.
    pub fn build_with(g: &Grammar, reach: &VarRelation) -> Self {
        let mut edges = BTreeMap::new();
        for (production, p) in g.productions().iter().enumerate() {
            let vars: Vec<Var> = p.vars().collect();
            if vars.len() < 2 {
                continue;
            }
            for (i, &ai) in vars.iter().enumerate() {
                for (j, &aj) in vars.iter().enumerate() {
                    if i != j && ai != aj {
                        edges
                            .entry(key(ai, aj))
                            .or_insert(EdgeWitness::Siblings { production, i, j });
                    }
                    for via in g.vars() {
                        if via != aj && reach.contains(ai, via) {
                            edges.entry(key(via, aj)).or_insert(EdgeWitness::Reachable {
                                production,
                                i,
                                j,
                                via,
                            });
                        }
                    }
                }
            }
        }
        Self {
            vertex_count: g.var_count(),
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: Var, b: Var) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    pub fn edges(&self) -> impl Iterator<Item = (Var, Var, EdgeWitness)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    /// Whether the given distinct variables are pairwise adjacent.
    pub fn is_clique(&self, vars: &BTreeSet<Var>) -> bool {
        vars.iter()
            .all(|&a| vars.iter().all(|&b| a == b || self.has_edge(a, b)))
    }

    pub fn to_graph(&self) -> Graph {
        let pairs: Vec<(usize, usize)> = self
            .edges
            .keys()
            .map(|&(a, b)| (a.index(), b.index()))
            .collect();
        Graph::from_edges(self.vertex_count, &pairs)
    }

    /// Re-derives every edge from its witness against `g`, with reachability
    /// recomputed by a separate search. Returns the first unjustified edge.
    pub fn replay(&self, g: &Grammar) -> Result<(), String> {
        for (a, b, w) in self.edges() {
            let (production, i, j) = match w {
                EdgeWitness::Siblings { production, i, j }
                | EdgeWitness::Reachable { production, i, j, .. } => (production, i, j),
            };
            let p = g
                .productions()
                .get(production)
                .ok_or_else(|| format!("edge {a:?}-{b:?}: no production {production}"))?;
            let vars: Vec<Var> = p.vars().collect();
            if vars.len() < 2 || i >= vars.len() || j >= vars.len() {
                return Err(format!("edge {a:?}-{b:?}: bad positions in {production}"));
            }
            let expected = match w {
                EdgeWitness::Siblings { .. } => {
                    if i == j || vars[i] == vars[j] {
                        return Err(format!("edge {a:?}-{b:?}: siblings coincide"));
                    }
                    key(vars[i], vars[j])
                }
                EdgeWitness::Reachable { via, .. } => {
                    if via == vars[j] || !reaches(g, vars[i], via) {
                        return Err(format!("edge {a:?}-{b:?}: {via:?} not reachable"));
                    }
                    key(via, vars[j])
                }
            };
            if expected != (a, b) {
                return Err(format!("edge {a:?}-{b:?}: witness yields {expected:?}"));
            }
        }
        Ok(())
    }

    pub fn to_dot(&self, g: &Grammar) -> String {
        let mut s = String::from("graph reminder {\n");
        for v in g.vars() {
            let _ = writeln!(s, "  {} [label=\"{}\"];", v.index(), g.var_name(v));
        }
        for &(a, b) in self.edges.keys() {
            let _ = writeln!(s, "  {} -- {};", a.index(), b.index());
        }
        s.push_str("}\n");
        s
    }

    /// PACE `.gr` text with 1-based ids.
    pub fn to_pace(&self) -> String {
        self.to_graph().to_pace()
    }

    /// Sidecar map from 1-based PACE id to variable name.
    pub fn pace_id_map(&self, g: &Grammar) -> BTreeMap<String, String> {
        g.vars()
            .map(|v| ((v.index() + 1).to_string(), g.var_name(v).to_string()))
            .collect()
    }
}

/// `a →⁺ b` by depth-first search over productions.
fn reaches(g: &Grammar, a: Var, b: Var) -> bool {
    let mut seen = vec![false; g.var_count()];
    let mut stack = vec![a];
    while let Some(x) = stack.pop() {
        for &p in g.productions_of(x) {
            for y in g.production(p).vars() {
                if y == b {
                    return true;
                }
                if !seen[y.index()] {
                    seen[y.index()] = true;
                    stack.push(y);
                }
            }
        }
    }
    false
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WidthMode {
    Exact(ExactBudget),
    Heuristic { seed: u64 },
}

impl Default for WidthMode {
    fn default() -> Self {
        WidthMode::Exact(ExactBudget::default())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularityWidth {
    /// Width of `witness` plus one; exact unless computed heuristically.
    pub d: usize,
    pub exact: bool,
    pub witness: TreeDecomposition,
}

pub fn regularity_width(g: &Grammar, mode: WidthMode) -> Result<RegularityWidth, TreewidthError> {
    regularity_width_of(&ReminderGraph::build(g), mode)
}

pub fn regularity_width_of(
    rg: &ReminderGraph,
    mode: WidthMode,
) -> Result<RegularityWidth, TreewidthError> {
    let graph = rg.to_graph();
    let (tw, witness, exact) = match mode {
        WidthMode::Exact(budget) => {
            let (tw, td) = exact_treewidth(&graph, budget)?;
            (tw, td, true)
        }
        WidthMode::Heuristic { seed } => {
            let (tw, td) = heuristic_treewidth(&graph, seed);
            (tw, td, false)
        }
    };
    Ok(RegularityWidth {
        d: tw + 1,
        exact,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    fn var(g: &Grammar, name: &str) -> Var {
        g.var_by_name(name).unwrap()
    }

    fn gn_text(n: usize) -> String {
        let mut s = format!("start: A{n}\n");
        for j in (2..=n).rev() {
            s += &format!("A{j} -> A{} A{}\n", j - 1, j - 1);
        }
        s + "A1 -> a\n"
    }

    #[test]
    fn g3_edges() {
        let g = parse_grammar(&gn_text(3)).unwrap();
        let rg = ReminderGraph::build(&g);
        assert_eq!(rg.edge_count(), 1);
        assert!(rg.has_edge(var(&g, "A1"), var(&g, "A2")));
        rg.replay(&g).unwrap();
    }

    #[test]
    fn right_linear_is_edgeless() {
        let g = parse_grammar("start: S\nS -> a S | b T | _eps_\nT -> b T | a").unwrap();
        let rg = ReminderGraph::build(&g);
        assert_eq!(rg.edge_count(), 0);
        assert_eq!(regularity_width(&g, WidthMode::default()).unwrap().d, 1);
    }

    #[test]
    fn gn_width() {
        for n in 2..=6 {
            let g = parse_grammar(&gn_text(n)).unwrap();
            let rw = regularity_width(&g, WidthMode::default()).unwrap();
            assert_eq!(rw.d, n - 1, "n = {n}");
            assert!(rw.exact);
            rw.witness.validate(&ReminderGraph::build(&g).to_graph()).unwrap();
        }
    }

    #[test]
    fn sibling_and_reach_edges() {
        let g = parse_grammar("start: S\nS -> A B\nA -> C\nC -> c\nB -> b").unwrap();
        let rg = ReminderGraph::build(&g);
        let (s, a, b, c) = (var(&g, "S"), var(&g, "A"), var(&g, "B"), var(&g, "C"));
        assert!(rg.has_edge(a, b));
        assert!(rg.has_edge(c, b));
        assert!(!rg.has_edge(s, a));
        // i = j: A reaches C, so C is adjacent to A itself.
        assert!(rg.has_edge(a, c));
        rg.replay(&g).unwrap();
    }

    #[test]
    fn replay_rejects_forged_witness() {
        let g = parse_grammar(&gn_text(3)).unwrap();
        let mut rg = ReminderGraph::build(&g);
        rg.edges.insert(
            key(var(&g, "A3"), var(&g, "A1")),
            EdgeWitness::Siblings {
                production: 0,
                i: 0,
                j: 1,
            },
        );
        assert!(rg.replay(&g).is_err());
    }

    #[test]
    fn exports() {
        let g = parse_grammar(&gn_text(3)).unwrap();
        let rg = ReminderGraph::build(&g);
        assert_eq!(rg.to_pace(), "p tw 3 1\n2 3\n");
        let ids = rg.pace_id_map(&g);
        assert_eq!(ids["1"], "A3");
        assert!(rg.to_dot(&g).contains("1 -- 2;"));
    }

    #[test]
    fn adding_productions_keeps_edges() {
        let g = parse_grammar("start: S\nS -> A A | a\nA -> a").unwrap();
        let h = parse_grammar("start: S\nS -> A A | a | S A\nA -> a | S").unwrap();
        let rg = ReminderGraph::build(&g);
        let rh = ReminderGraph::build(&h);
        for (a, b, _) in rg.edges() {
            let (na, nb) = (g.var_name(a), g.var_name(b));
            assert!(rh.has_edge(var(&h, na), var(&h, nb)));
        }
    }
}
