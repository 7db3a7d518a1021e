//! Regularity width of context-free grammars and the Parikh-equivalent
//! automaton over reminder sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`grammar`] and [`parikh`]: grammars, Parikh vectors, structural
//!   metrics and a bounded Parikh-image oracle.
//! * [`parsetree`]: parse trees and recurrence-moving surgery.
//! * [`treewidth`] and [`remgraph`]: tree decompositions, the reminder graph
//!   and regularity width.
//! * [`automaton`]: the reminder-sequence automaton and its invariant checks.
//! * [`explore`]: state scans and bounded search over packed states, for
//!   automata too large to build.
//! * [`symbolic`]: the reachable states as a regular set, checked without
//!   listing them.
//! * [`traces`]: executable run/derivation translations between parse trees
//!   and automaton runs.
//! * [`verify`]: equivalence checking, random grammars and the stress driver.

pub mod automaton;
pub mod explore;
pub mod grammar;
pub mod multiset;
pub mod parikh;
pub mod parsetree;
pub mod remgraph;
pub mod symbolic;
pub mod traces;
pub mod treewidth;
pub mod verify;

pub use grammar::{parse_grammar, render, Grammar, GrammarError, Production, Sym, Term, Var};
pub use parikh::ParikhVector;
