//! Finite multisets over variables, kept in sorted canonical form.

use std::fmt;

use crate::grammar::{Grammar, Var};

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarMultiset(Vec<Var>);

impl VarMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of elements counted with multiplicity.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn count(&self, v: Var) -> usize {
        self.0.iter().filter(|&&x| x == v).count()
    }

    pub fn contains(&self, v: Var) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn insert(&mut self, v: Var) {
        let pos = self.0.partition_point(|&x| x <= v);
        self.0.insert(pos, v);
    }

    /// `self ⊖ ⟦v⟧`, or `None` when `v` is absent.
    pub fn without(&self, v: Var) -> Option<Self> {
        let pos = self.0.binary_search(&v).ok()?;
        let mut out = self.0.clone();
        out.remove(pos);
        Some(Self(out))
    }

    /// Distinct elements in ascending order.
    pub fn distinct(&self) -> impl Iterator<Item = Var> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|&(i, v)| i == 0 || self.0[i - 1] != *v)
            .map(|(_, &v)| v)
    }

    /// Elements with multiplicity, ascending.
    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[Var] {
        &self.0
    }

    pub fn display<'a>(&'a self, g: &'a Grammar) -> impl fmt::Display + 'a {
        struct D<'a>(&'a VarMultiset, &'a Grammar);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "⟦")?;
                for (i, v) in self.0.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", self.1.var_name(v))?;
                }
                write!(f, "⟧")
            }
        }
        D(self, g)
    }
}

impl FromIterator<Var> for VarMultiset {
    fn from_iter<I: IntoIterator<Item = Var>>(iter: I) -> Self {
        let mut v: Vec<Var> = iter.into_iter().collect();
        v.sort_unstable();
        Self(v)
    }
}
