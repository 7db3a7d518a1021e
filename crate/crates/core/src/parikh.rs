//! Parikh vectors: commutative images of words.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::grammar::Term;

/// Occurrence count of every terminal in a word. Zero entries are never
/// stored, so two vectors are equal iff they image the same letters.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParikhVector {
    counts: BTreeMap<Term, u64>,
}

impl ParikhVector {
    /// The image of the empty word.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn of_word(word: &[Term]) -> Self {
        let mut v = Self::zero();
        for &t in word {
            v.add_letter(t, 1);
        }
        v
    }

    pub fn add_letter(&mut self, t: Term, count: u64) {
        if count > 0 {
            *self.counts.entry(t).or_insert(0) += count;
        }
    }

    pub fn get(&self, t: Term) -> u64 {
        self.counts.get(&t).copied().unwrap_or(0)
    }

    /// Sum of all counts, i.e. the length of any word with this image.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Term, u64)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }

    /// `self` scaled by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        if factor == 0 {
            return Self::zero();
        }
        Self {
            counts: self.counts.iter().map(|(&t, &c)| (t, c * factor)).collect(),
        }
    }

    /// Key the counts by terminal name.
    pub fn to_named(&self, terminals: &[String]) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .map(|(t, &c)| (terminals[t.index()].clone(), c))
            .collect()
    }

    /// Inverse of [`ParikhVector::to_named`]; `None` if a name is unknown.
    pub fn from_named(named: &BTreeMap<String, u64>, terminals: &[String]) -> Option<Self> {
        let mut v = Self::zero();
        for (name, &c) in named {
            let idx = terminals.iter().position(|t| t == name)?;
            v.add_letter(Term(idx as u32), c);
        }
        Some(v)
    }

    pub fn display<'a>(&'a self, terminals: &'a [String]) -> impl fmt::Display + 'a {
        NamedParikh { v: self, terminals }
    }
}

impl AddAssign<&ParikhVector> for ParikhVector {
    fn add_assign(&mut self, rhs: &ParikhVector) {
        for (t, c) in rhs.iter() {
            self.add_letter(t, c);
        }
    }
}

impl Add for &ParikhVector {
    type Output = ParikhVector;

    fn add(self, rhs: &ParikhVector) -> ParikhVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for ParikhVector {
    type Output = ParikhVector;

    fn add(mut self, rhs: ParikhVector) -> ParikhVector {
        self += &rhs;
        self
    }
}

impl std::iter::Sum for ParikhVector {
    fn sum<I: Iterator<Item = ParikhVector>>(iter: I) -> Self {
        iter.fold(ParikhVector::zero(), |acc, v| acc + v)
    }
}

struct NamedParikh<'a> {
    v: &'a ParikhVector,
    terminals: &'a [String],
}

impl fmt::Display for NamedParikh<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (t, c)) in self.v.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", self.terminals[t.index()], c)?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<Term> {
        s.bytes().map(|b| Term((b - b'a') as u32)).collect()
    }

    #[test]
    fn empty_word_is_zero() {
        assert!(ParikhVector::of_word(&[]).is_zero());
        assert_eq!(ParikhVector::of_word(&[]), ParikhVector::zero());
    }

    #[test]
    fn counts_letters() {
        let v = ParikhVector::of_word(&w("aab"));
        assert_eq!(v.get(Term(0)), 2);
        assert_eq!(v.get(Term(1)), 1);
        assert_eq!(v.total(), 3);
    }

    #[test]
    fn pointwise_sum() {
        let v = ParikhVector::of_word(&w("aa")) + ParikhVector::of_word(&w("ab"));
        assert_eq!(v.get(Term(0)), 3);
        assert_eq!(v.get(Term(1)), 1);
        assert_eq!(v.iter().count(), 2);
    }

    #[test]
    fn scaling_by_zero_is_canonical() {
        let v = ParikhVector::of_word(&w("ab")).scaled(0);
        assert_eq!(v, ParikhVector::zero());
    }

    #[test]
    fn named_round_trip() {
        let names = vec!["a".to_string(), "b".to_string()];
        let v = ParikhVector::of_word(&w("abb"));
        let named = v.to_named(&names);
        assert_eq!(ParikhVector::from_named(&named, &names), Some(v.clone()));
        assert_eq!(v.display(&names).to_string(), "{a:1, b:2}");
    }
}
