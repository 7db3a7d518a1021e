//! Parse trees, their structural predicates, and recurrence-moving surgery.
//!
//! A tree is *A-occurrence free* if no node is labelled `A`, and
//! *A-recurrence free* if every root-to-leaf path has at most one `A`.
//! Surgery works on paths (child-index sequences from the root); a loop cut
//! out of one tree is carried as a context whose single variable leaf (the
//! hole) marks where the rest of the tree hangs.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::grammar::{min_tree_size, Grammar, Sym, Term, Var};
use crate::parikh::ParikhVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Var(Var),
    Term(Term),
    /// The one-node tree `⊥` whose yield is empty.
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree is a context: it has an unexpanded variable leaf")]
    Context,
    #[error("first tree is already recurrence free for the variable")]
    AlreadyRecurrenceFree,
    #[error("second tree does not contain the variable")]
    NoOccurrence,
    #[error("inconsistent tree: {0}")]
    Inconsistent(String),
    #[error("s-expression error at byte {pos}: {message}")]
    Sexpr { pos: usize, message: String },
}

/// A derivation tree. Internal nodes carry the index of the production they
/// apply; a variable node without a production is a hole.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParseTree {
    label: Label,
    production: Option<usize>,
    children: Vec<ParseTree>,
}

impl ParseTree {
    pub fn bottom() -> Self {
        Self {
            label: Label::Bottom,
            production: None,
            children: Vec::new(),
        }
    }

    pub fn leaf(t: Term) -> Self {
        Self {
            label: Label::Term(t),
            production: None,
            children: Vec::new(),
        }
    }

    /// A variable leaf standing for a missing subtree.
    pub fn hole(v: Var) -> Self {
        Self {
            label: Label::Var(v),
            production: None,
            children: Vec::new(),
        }
    }

    /// Applies production `prod` with the given subtrees for its variable
    /// occurrences (in order). Terminal leaves are filled in.
    pub fn node(g: &Grammar, prod: usize, subtrees: Vec<ParseTree>) -> Result<Self, TreeError> {
        let p = g.production(prod);
        if subtrees.len() != p.var_count() {
            return Err(TreeError::Inconsistent(format!(
                "production {} needs {} subtrees, got {}",
                g.production_text(prod),
                p.var_count(),
                subtrees.len()
            )));
        }
        let mut subtrees = subtrees.into_iter();
        let mut children = Vec::with_capacity(p.rhs.len());
        for &s in &p.rhs {
            match s {
                Sym::Term(t) => children.push(ParseTree::leaf(t)),
                Sym::Var(v) => {
                    let sub = subtrees.next().expect("counted above");
                    if sub.label != Label::Var(v) {
                        return Err(TreeError::Inconsistent(format!(
                            "subtree rooted at {} where {} expected",
                            sub.label_text(g),
                            g.var_name(v)
                        )));
                    }
                    children.push(sub);
                }
            }
        }
        Ok(Self {
            label: Label::Var(p.lhs),
            production: Some(prod),
            children,
        })
    }

    /// One application of `prod` with holes for every variable occurrence.
    pub fn expand(g: &Grammar, prod: usize) -> Self {
        let p = g.production(prod);
        let subtrees = p.vars().map(ParseTree::hole).collect();
        Self::node(g, prod, subtrees).expect("holes match the production")
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn root_var(&self) -> Option<Var> {
        match self.label {
            Label::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn production(&self) -> Option<usize> {
        self.production
    }

    pub fn children(&self) -> &[ParseTree] {
        &self.children
    }

    pub fn is_bottom(&self) -> bool {
        self.label == Label::Bottom
    }

    pub fn is_hole(&self) -> bool {
        matches!(self.label, Label::Var(_)) && self.production.is_none()
    }

    pub fn is_context(&self) -> bool {
        self.is_hole() || self.children.iter().any(ParseTree::is_context)
    }

    /// Left-to-right terminal leaves. `⊥` yields the empty word.
    pub fn yield_word(&self) -> Result<Vec<Term>, TreeError> {
        let mut out = Vec::new();
        self.collect_yield(&mut out)?;
        Ok(out)
    }

    fn collect_yield(&self, out: &mut Vec<Term>) -> Result<(), TreeError> {
        match self.label {
            Label::Term(t) => out.push(t),
            Label::Bottom => {}
            Label::Var(_) if self.production.is_none() => return Err(TreeError::Context),
            Label::Var(_) => {
                for c in &self.children {
                    c.collect_yield(out)?;
                }
            }
        }
        Ok(())
    }

    /// Parikh image of the terminal leaves (holes contribute nothing).
    pub fn parikh(&self) -> ParikhVector {
        let mut v = ParikhVector::zero();
        self.walk(&mut |t| {
            if let Label::Term(x) = t.label {
                v.add_letter(x, 1);
            }
        });
        v
    }

    /// `w(t)`: the terminal children of the root, concatenated.
    pub fn root_terminal_word(&self) -> Vec<Term> {
        self.children
            .iter()
            .filter_map(|c| match c.label {
                Label::Term(t) => Some(t),
                _ => None,
            })
            .collect()
    }

    /// Immediate subtrees rooted at variables, in order.
    pub fn var_subtrees(&self) -> impl Iterator<Item = &ParseTree> {
        self.children
            .iter()
            .filter(|c| matches!(c.label, Label::Var(_)))
    }

    /// Consumes the tree and returns its variable-rooted immediate subtrees.
    pub fn into_var_subtrees(self) -> Vec<ParseTree> {
        self.children
            .into_iter()
            .filter(|c| matches!(c.label, Label::Var(_)))
            .collect()
    }

    pub fn has_var_child(&self) -> bool {
        self.var_subtrees().next().is_some()
    }

    /// Height; a single node has height 0.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.height() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ParseTree::node_count).sum::<usize>()
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ParseTree)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn occurs(&self, v: Var) -> bool {
        self.label == Label::Var(v) || self.children.iter().any(|c| c.occurs(v))
    }

    pub fn is_occurrence_free(&self, v: Var) -> bool {
        !self.occurs(v)
    }

    pub fn is_recurrence_free(&self, v: Var) -> bool {
        fn go(t: &ParseTree, v: Var, seen: bool) -> bool {
            let here = t.label == Label::Var(v);
            if here && seen {
                return false;
            }
            t.children.iter().all(|c| go(c, v, seen || here))
        }
        go(self, v, false)
    }

    /// Variables labelling any node.
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.walk(&mut |t| {
            if let Label::Var(v) = t.label {
                out.insert(v);
            }
        });
        out
    }

    /// Checks the production-consistency invariant against `g`. Holes are
    /// accepted only when `allow_holes` is set.
    pub fn validate(&self, g: &Grammar, allow_holes: bool) -> Result<(), TreeError> {
        match self.label {
            Label::Bottom => {
                if self.children.is_empty() {
                    Ok(())
                } else {
                    Err(TreeError::Inconsistent("⊥ with children".into()))
                }
            }
            Label::Term(_) => {
                if self.children.is_empty() && self.production.is_none() {
                    Ok(())
                } else {
                    Err(TreeError::Inconsistent("terminal with children".into()))
                }
            }
            Label::Var(v) => {
                let Some(prod) = self.production else {
                    return if allow_holes && self.children.is_empty() {
                        Ok(())
                    } else {
                        Err(TreeError::Context)
                    };
                };
                let p = g
                    .productions()
                    .get(prod)
                    .ok_or_else(|| TreeError::Inconsistent(format!("no production #{prod}")))?;
                if p.lhs != v || p.rhs.len() != self.children.len() {
                    return Err(TreeError::Inconsistent(format!(
                        "node {} does not match {}",
                        g.var_name(v),
                        g.production_text(prod)
                    )));
                }
                for (&s, c) in p.rhs.iter().zip(&self.children) {
                    let expected = match s {
                        Sym::Var(x) => Label::Var(x),
                        Sym::Term(t) => Label::Term(t),
                    };
                    if c.label != expected {
                        return Err(TreeError::Inconsistent(format!(
                            "child {} under {}",
                            c.label_text(g),
                            g.production_text(prod)
                        )));
                    }
                    c.validate(g, allow_holes)?;
                }
                Ok(())
            }
        }
    }

    pub fn subtree(&self, path: &[usize]) -> &ParseTree {
        path.iter().fold(self, |t, &i| &t.children[i])
    }

    fn subtree_mut(&mut self, path: &[usize]) -> &mut ParseTree {
        path.iter().fold(self, |t, &i| &mut t.children[i])
    }

    /// Replaces the subtree at `path` and returns the old one.
    pub fn replace_at(&mut self, path: &[usize], new: ParseTree) -> ParseTree {
        std::mem::replace(self.subtree_mut(path), new)
    }

    /// Leftmost root-to-leaf path witnessing two `v` nodes: returns the
    /// path of the upper `v` node and the path of the next `v` strictly
    /// below it on that path.
    pub fn find_recurrence(&self, v: Var) -> Option<(Vec<usize>, Vec<usize>)> {
        fn first_below(t: &ParseTree, v: Var, path: &mut Vec<usize>) -> bool {
            for (i, c) in t.children.iter().enumerate() {
                path.push(i);
                if c.label == Label::Var(v) || first_below(c, v, path) {
                    return true;
                }
                path.pop();
            }
            false
        }
        fn go(t: &ParseTree, v: Var, path: &mut Vec<usize>) -> Option<(Vec<usize>, Vec<usize>)> {
            if t.label == Label::Var(v) {
                let mut inner = path.clone();
                if first_below(t, v, &mut inner) {
                    return Some((path.clone(), inner));
                }
                // Recurrence free below a `v` root: no deeper witness exists.
                return None;
            }
            for (i, c) in t.children.iter().enumerate() {
                path.push(i);
                if let Some(found) = go(c, v, path) {
                    return Some(found);
                }
                path.pop();
            }
            None
        }
        go(self, v, &mut Vec::new())
    }

    /// Shallowest, then leftmost, node labelled `v`.
    pub fn shallowest_occurrence(&self, v: Var) -> Option<Vec<usize>> {
        let mut queue = VecDeque::from([(self, Vec::new())]);
        while let Some((t, path)) = queue.pop_front() {
            if t.label == Label::Var(v) {
                return Some(path);
            }
            for (i, c) in t.children.iter().enumerate() {
                let mut p = path.clone();
                p.push(i);
                queue.push_back((c, p));
            }
        }
        None
    }

    /// Cuts a `v`-loop out of the tree (`t·t'·t'' ↦ t·t''`) and returns it.
    pub fn excise_loop(&mut self, v: Var) -> Option<PumpLoop> {
        let (outer, inner) = self.find_recurrence(v)?;
        let rel = inner[outer.len()..].to_vec();
        let mut context = self.replace_at(&outer, ParseTree::hole(v));
        let lower = context.replace_at(&rel, ParseTree::hole(v));
        self.replace_at(&outer, lower);
        Some(PumpLoop {
            context,
            hole: rel,
            var: v,
        })
    }

    /// Inline rendering: `(A (B a) b)`; `⊥` and holes print as `_bot_` and
    /// `<A>`.
    pub fn to_sexpr(&self, g: &Grammar) -> String {
        let mut s = String::new();
        self.write_sexpr(g, &mut s);
        s
    }

    fn write_sexpr(&self, g: &Grammar, out: &mut String) {
        match self.label {
            Label::Bottom => out.push_str("_bot_"),
            Label::Term(t) => out.push_str(g.term_name(t)),
            Label::Var(v) if self.production.is_none() => {
                out.push('<');
                out.push_str(g.var_name(v));
                out.push('>');
            }
            Label::Var(v) => {
                out.push('(');
                out.push_str(g.var_name(v));
                for c in &self.children {
                    out.push(' ');
                    c.write_sexpr(g, out);
                }
                out.push(')');
            }
        }
    }

    fn label_text(&self, g: &Grammar) -> String {
        match self.label {
            Label::Bottom => "⊥".into(),
            Label::Term(t) => g.term_name(t).into(),
            Label::Var(v) => g.var_name(v).into(),
        }
    }

    /// Parses the rendering of [`ParseTree::to_sexpr`]. Productions are
    /// recovered from the child labels.
    pub fn from_sexpr(g: &Grammar, text: &str) -> Result<Self, TreeError> {
        let tokens = tokenize_sexpr(text);
        let mut pos = 0;
        let tree = parse_sexpr(g, &tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(TreeError::Sexpr {
                pos: tokens[pos].0,
                message: "trailing input".into(),
            });
        }
        Ok(tree)
    }
}

fn tokenize_sexpr(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if !cur.is_empty() {
                out.push((start, std::mem::take(&mut cur)));
            }
            if !c.is_whitespace() {
                out.push((i, c.to_string()));
            }
        } else {
            if cur.is_empty() {
                start = i;
            }
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push((start, cur));
    }
    out
}

fn parse_sexpr(g: &Grammar, tokens: &[(usize, String)], pos: &mut usize) -> Result<ParseTree, TreeError> {
    let err = |p: usize, m: &str| TreeError::Sexpr {
        pos: p,
        message: m.to_string(),
    };
    let (at, tok) = tokens.get(*pos).ok_or_else(|| err(0, "unexpected end"))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let (at2, name) = tokens.get(*pos).ok_or_else(|| err(*at, "unexpected end"))?;
            *pos += 1;
            let v = g
                .var_by_name(name)
                .ok_or_else(|| err(*at2, &format!("`{name}` is not a variable")))?;
            let mut children = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err(err(*at, "unclosed `(`")),
                    Some((_, t)) if t == ")" => {
                        *pos += 1;
                        break;
                    }
                    Some(_) => children.push(parse_sexpr(g, tokens, pos)?),
                }
            }
            let labels: Vec<Label> = children.iter().map(|c| c.label).collect();
            let prod = g
                .productions_of(v)
                .iter()
                .copied()
                .find(|&i| {
                    let rhs = &g.production(i).rhs;
                    rhs.len() == labels.len()
                        && rhs.iter().zip(&labels).all(|(s, l)| match (s, l) {
                            (Sym::Var(a), Label::Var(b)) => a == b,
                            (Sym::Term(a), Label::Term(b)) => a == b,
                            _ => false,
                        })
                })
                .ok_or_else(|| err(*at, &format!("no production of `{name}` matches")))?;
            Ok(ParseTree {
                label: Label::Var(v),
                production: Some(prod),
                children,
            })
        }
        ")" => Err(err(*at, "unexpected `)`")),
        "_bot_" => Ok(ParseTree::bottom()),
        name => {
            if let Some(inner) = name.strip_prefix('<').and_then(|n| n.strip_suffix('>')) {
                let v = g
                    .var_by_name(inner)
                    .ok_or_else(|| err(*at, &format!("`{inner}` is not a variable")))?;
                return Ok(ParseTree::hole(v));
            }
            g.term_by_name(name)
                .map(ParseTree::leaf)
                .ok_or_else(|| err(*at, &format!("`{name}` is not a terminal")))
        }
    }
}

/// A `v`-rooted context with exactly one `v` hole, cut from a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PumpLoop {
    context: ParseTree,
    hole: Vec<usize>,
    var: Var,
}

impl PumpLoop {
    pub fn var(&self) -> Var {
        self.var
    }

    pub fn context(&self) -> &ParseTree {
        &self.context
    }

    pub fn node_count(&self) -> usize {
        self.context.node_count() - 1
    }

    /// Splices the loop into `t` at its shallowest `v` node, hanging that
    /// node's subtree below the hole.
    pub fn insert_into(self, t: &mut ParseTree) -> Result<(), TreeError> {
        let at = t.shallowest_occurrence(self.var).ok_or(TreeError::NoOccurrence)?;
        self.insert_at(t, &at);
        Ok(())
    }

    /// Splices the loop at an explicit `v`-labelled position.
    pub fn insert_at(self, t: &mut ParseTree, at: &[usize]) {
        debug_assert_eq!(t.subtree(at).label, Label::Var(self.var));
        let PumpLoop {
            mut context, hole, ..
        } = self;
        let old = t.replace_at(at, ParseTree::bottom());
        context.replace_at(&hole, old);
        t.replace_at(at, context);
    }
}

/// Moves `v`-loops from `t1` into `t2` until `t1` is `v`-recurrence free.
///
/// Roots are preserved and `Π(Y(t1)) + Π(Y(t2))` is unchanged.
pub fn reduce_recurrence(
    t1: &ParseTree,
    t2: &ParseTree,
    v: Var,
) -> Result<(ParseTree, ParseTree), TreeError> {
    if t1.is_recurrence_free(v) {
        return Err(TreeError::AlreadyRecurrenceFree);
    }
    if t2.is_occurrence_free(v) {
        return Err(TreeError::NoOccurrence);
    }
    let mut a = t1.clone();
    let mut b = t2.clone();
    while let Some(pump) = a.excise_loop(v) {
        pump.insert_into(&mut b)?;
    }
    Ok((a, b))
}

/// Random parse trees of bounded size that never run into dead ends.
#[derive(Clone, Debug)]
pub struct TreeSampler<'g> {
    grammar: &'g Grammar,
    min_size: Vec<Option<u64>>,
}

impl<'g> TreeSampler<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        Self {
            grammar,
            min_size: min_tree_size(grammar),
        }
    }

    /// Smallest tree rooted at `v`, if `v` is productive.
    pub fn min_size(&self, v: Var) -> Option<usize> {
        self.min_size[v.index()].map(|x| x as usize)
    }

    fn production_cost(&self, prod: usize) -> Option<usize> {
        let p = self.grammar.production(prod);
        let mut cost = 1 + p.rhs.len() - p.var_count();
        for v in p.vars() {
            cost += self.min_size(v)?;
        }
        Some(cost)
    }

    /// A tree rooted at `root` with at most `max_nodes` nodes, or `None`
    /// when no such tree exists.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        root: Var,
        max_nodes: usize,
        rng: &mut R,
    ) -> Option<ParseTree> {
        let min = self.min_size(root)?;
        if min > max_nodes {
            return None;
        }
        let budget = rng.gen_range(min..=max_nodes);
        Some(self.grow(root, budget, rng))
    }

    fn grow<R: Rng + ?Sized>(&self, v: Var, budget: usize, rng: &mut R) -> ParseTree {
        let options: Vec<(usize, usize)> = self
            .grammar
            .productions_of(v)
            .iter()
            .filter_map(|&p| self.production_cost(p).map(|c| (p, c)))
            .filter(|&(_, c)| c <= budget)
            .collect();
        // Favour productions that keep growing so large budgets are used.
        let growing: Vec<(usize, usize)> = options
            .iter()
            .copied()
            .filter(|&(p, _)| self.grammar.production(p).var_count() > 0)
            .collect();
        let pool = if !growing.is_empty() && rng.gen_bool(0.85) {
            &growing
        } else {
            &options
        };
        let &(prod, cost) = pool
            .choose(rng)
            .expect("budget is at least the minimum size");
        let p = self.grammar.production(prod);
        let vars: Vec<Var> = p.vars().collect();
        let mut budgets: Vec<usize> = vars
            .iter()
            .map(|&x| self.min_size(x).expect("production cost is finite"))
            .collect();
        let mut slack = budget - cost;
        let mut order: Vec<usize> = (0..vars.len()).collect();
        order.shuffle(rng);
        for &i in &order {
            let extra = rng.gen_range(0..=slack);
            budgets[i] += extra;
            slack -= extra;
        }
        let subtrees = vars
            .iter()
            .zip(budgets)
            .map(|(&x, b)| self.grow(x, b, rng))
            .collect();
        ParseTree::node(self.grammar, prod, subtrees).expect("sampled children match")
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Var(v) => write!(f, "V{}", v.0),
            Label::Term(t) => write!(f, "T{}", t.0),
            Label::Bottom => write!(f, "⊥"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g3() -> Grammar {
        parse_grammar("start: A3\nA3 -> A2 A2\nA2 -> A1 A1\nA1 -> a").unwrap()
    }

    fn full_g3(g: &Grammar) -> ParseTree {
        ParseTree::from_sexpr(g, "(A3 (A2 (A1 a) (A1 a)) (A2 (A1 a) (A1 a)))").unwrap()
    }

    fn anbn() -> Grammar {
        parse_grammar("start: S\nS -> a S b | _eps_").unwrap()
    }

    /// `S ⇝ aSb` applied `depth` times, then `S ⇝ ε`.
    fn s_chain(g: &Grammar, depth: usize) -> ParseTree {
        let mut t = ParseTree::node(g, 1, vec![]).unwrap();
        for _ in 0..depth {
            t = ParseTree::node(g, 0, vec![t]).unwrap();
        }
        t
    }

    #[test]
    fn yields() {
        let g = g3();
        assert_eq!(ParseTree::bottom().yield_word().unwrap(), vec![]);
        assert_eq!(full_g3(&g).yield_word().unwrap().len(), 4);
        let a1 = ParseTree::node(&g, 2, vec![]).unwrap();
        assert_eq!(a1.yield_word().unwrap(), vec![Term(0)]);
        let ctx = ParseTree::expand(&g, 0);
        assert_eq!(ctx.yield_word(), Err(TreeError::Context));
    }

    #[test]
    fn heights() {
        let g = g3();
        assert_eq!(ParseTree::leaf(Term(0)).height(), 0);
        assert_eq!(ParseTree::node(&g, 2, vec![]).unwrap().height(), 1);
        assert_eq!(full_g3(&g).height(), 3);
    }

    #[test]
    fn occurrence_predicates() {
        let g = g3();
        let a2 = g.var_by_name("A2").unwrap();
        let a3 = g.var_by_name("A3").unwrap();
        assert!(ParseTree::bottom().is_occurrence_free(a2));
        assert!(!full_g3(&g).is_occurrence_free(a2));
        assert!(ParseTree::node(&g, 2, vec![]).unwrap().is_occurrence_free(a2));
        assert!(full_g3(&g).is_recurrence_free(a3));
        // A2 appears twice but never on one path.
        assert!(full_g3(&g).is_recurrence_free(a2));

        let h = anbn();
        let s = h.axiom();
        assert!(!s_chain(&h, 2).is_recurrence_free(s));
        assert!(s_chain(&h, 0).is_recurrence_free(s));
    }

    #[test]
    fn sexpr_round_trip() {
        let g = g3();
        let t = full_g3(&g);
        assert_eq!(
            t.to_sexpr(&g),
            "(A3 (A2 (A1 a) (A1 a)) (A2 (A1 a) (A1 a)))"
        );
        let h = anbn();
        let chain = s_chain(&h, 2);
        assert_eq!(chain.to_sexpr(&h), "(S a (S a (S) b) b)");
        assert_eq!(ParseTree::from_sexpr(&h, &chain.to_sexpr(&h)).unwrap(), chain);
        assert!(ParseTree::from_sexpr(&h, "(S a b)").is_err());
        assert!(ParseTree::from_sexpr(&h, "(S a (S) b").is_err());
    }

    #[test]
    fn reduce_chain() {
        let h = anbn();
        let s = h.axiom();
        let t1 = s_chain(&h, 2);
        let t2 = s_chain(&h, 0);
        let (r1, r2) = reduce_recurrence(&t1, &t2, s).unwrap();
        assert!(r1.is_recurrence_free(s));
        assert_eq!(r1.root_var(), Some(s));
        assert_eq!(r2.root_var(), Some(s));
        assert_eq!(r1, s_chain(&h, 0));
        assert_eq!(r1.parikh() + r2.parikh(), t1.parikh() + t2.parikh());
        assert_eq!(
            r1.node_count() + r2.node_count(),
            t1.node_count() + t2.node_count()
        );
        r1.validate(&h, false).unwrap();
        r2.validate(&h, false).unwrap();
    }

    #[test]
    fn reduce_preconditions() {
        let h = anbn();
        let s = h.axiom();
        assert_eq!(
            reduce_recurrence(&s_chain(&h, 0), &s_chain(&h, 0), s),
            Err(TreeError::AlreadyRecurrenceFree)
        );
        let g = g3();
        let a1 = g.var_by_name("A1").unwrap();
        let leaf = ParseTree::node(&g, 2, vec![]).unwrap();
        assert_eq!(
            reduce_recurrence(&leaf, &leaf, a1),
            Err(TreeError::AlreadyRecurrenceFree)
        );
    }

    #[test]
    fn loop_excision_and_reinsertion_restores_tree() {
        let h = anbn();
        let s = h.axiom();
        let original = s_chain(&h, 3);
        let mut t = original.clone();
        let pump = t.excise_loop(s).unwrap();
        assert_eq!(pump.node_count() + t.node_count(), original.node_count());
        pump.insert_at(&mut t, &[]);
        assert_eq!(t, original);
    }

    #[test]
    fn recurrence_free_proper_subtrees_are_occurrence_free() {
        let g = parse_grammar("start: S\nS -> S S | a T\nT -> S | b").unwrap();
        let sampler = TreeSampler::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            for v in g.vars() {
                let Some(t) = sampler.sample(v, 30, &mut rng) else {
                    continue;
                };
                t.validate(&g, false).unwrap();
                if t.is_recurrence_free(v) {
                    assert!(t.children().iter().all(|c| c.is_occurrence_free(v)));
                }
            }
        }
    }

    #[test]
    fn sampler_respects_budget() {
        let g = g3();
        let sampler = TreeSampler::new(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sampler.sample(g.axiom(), 10, &mut rng).is_none());
        let t = sampler.sample(g.axiom(), 15, &mut rng).unwrap();
        assert_eq!(t, full_g3(&g));
        let h = anbn();
        let sampler = TreeSampler::new(&h);
        for _ in 0..100 {
            let t = sampler.sample(h.axiom(), 20, &mut rng).unwrap();
            assert!(t.node_count() <= 20);
            t.validate(&h, false).unwrap();
        }
    }
}
