use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Serialize, Serializer};

/// Subset of the states `1..=n` of some system. Bit 0 is never set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateSet {
    n: usize,
    bits: FixedBitSet,
}

impl StateSet {
    pub fn empty(n: usize) -> Self {
        StateSet { n, bits: FixedBitSet::with_capacity(n + 1) }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        s.bits.insert_range(1..n + 1);
        s
    }

    pub fn from_states<I: IntoIterator<Item = usize>>(n: usize, states: I) -> Self {
        let mut s = Self::empty(n);
        for q in states {
            s.insert(q);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, q: usize) {
        assert!(q >= 1 && q <= self.n, "state {} outside 1..={}", q, self.n);
        self.bits.insert(q);
    }

    pub fn remove(&mut self, q: usize) {
        if q <= self.n {
            self.bits.set(q, false);
        }
    }

    pub fn contains(&self, q: usize) -> bool {
        q <= self.n && self.bits.contains(q)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union_with(&mut self, other: &StateSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &StateSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &StateSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn complement(&self) -> StateSet {
        let mut s = self.clone();
        s.bits.toggle_range(1..self.n + 1);
        s
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &StateSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, q) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", q)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for StateSet {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(self.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_stays_in_range() {
        let s = StateSet::from_states(4, [1, 3]);
        assert_eq!(s.complement().to_vec(), vec![2, 4]);
        assert_eq!(StateSet::empty(3).complement(), StateSet::full(3));
        assert!(!StateSet::full(3).contains(0));
    }

    #[test]
    fn display_is_sorted() {
        let s = StateSet::from_states(5, [5, 2, 4]);
        assert_eq!(s.to_string(), "{2,4,5}");
    }
}
