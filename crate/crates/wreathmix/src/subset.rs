//! Subsets of `{1..n}` as bitmasks, with the lattice operations and the
//! colexicographic ranking used to index homogeneous-space states.

use std::fmt;

use crate::{Error, Result};

/// A subset of `{1..n}`. Bit `i` of `mask` stands for element `i+1`; all
/// public element-level accessors are 1-based to match the text formats,
/// internal iteration is 0-based.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexSet {
    mask: u32,
    n: u8,
}

impl IndexSet {
    pub fn empty(n: usize) -> Self {
        debug_assert!(n <= 32);
        IndexSet { mask: 0, n: n as u8 }
    }

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 32);
        let mask = if n == 0 { 0 } else { (1u32 << n) - 1 };
        IndexSet { mask, n: n as u8 }
    }

    pub fn from_mask(mask: u32, n: usize) -> Self {
        debug_assert!(n <= 32);
        debug_assert_eq!(mask & !Self::full(n).mask, 0, "mask out of range");
        IndexSet { mask, n: n as u8 }
    }

    /// Builds a set from 1-based elements; errors on out-of-range input.
    pub fn from_elems(elems: &[usize], n: usize) -> Result<Self> {
        let mut mask = 0u32;
        for &e in elems {
            if e == 0 || e > n {
                return Err(Error::InvalidParameter(format!(
                    "element {e} outside 1..={n}"
                )));
            }
            mask |= 1 << (e - 1);
        }
        Ok(IndexSet { mask, n: n as u8 })
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// Membership of the 0-based index `i`.
    pub fn contains0(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    /// Membership of the 1-based element `e`.
    pub fn contains(&self, e: usize) -> bool {
        e >= 1 && self.contains0(e - 1)
    }

    pub fn insert0(&mut self, i: usize) {
        debug_assert!(i < self.n());
        self.mask |= 1 << i;
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.mask & !other.mask == 0
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        debug_assert_eq!(self.n, other.n);
        IndexSet { mask: self.mask | other.mask, n: self.n }
    }

    pub fn intersect(&self, other: &IndexSet) -> IndexSet {
        debug_assert_eq!(self.n, other.n);
        IndexSet { mask: self.mask & other.mask, n: self.n }
    }

    pub fn complement(&self) -> IndexSet {
        IndexSet { mask: Self::full(self.n()).mask & !self.mask, n: self.n }
    }

    /// 0-based indices, ascending.
    pub fn iter0(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&i| self.contains0(i))
    }

    /// 1-based elements, ascending.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.iter0().map(|i| i + 1)
    }

    /// Number of elements with 0-based index below `r` (the rack-1 part in
    /// the two-rack picture).
    pub fn count_below(&self, r: usize) -> usize {
        self.iter0().filter(|&i| i < r).count()
    }

    /// Rank of this set among all subsets of its size, in colex order.
    pub fn colex_rank(&self) -> usize {
        let mut rank = 0usize;
        for (pos, e) in self.iter0().enumerate() {
            rank += binomial(e, pos + 1) as usize;
        }
        rank
    }

    /// Inverse of [`colex_rank`](Self::colex_rank) for subsets of size `r`.
    pub fn colex_unrank(n: usize, r: usize, mut rank: usize) -> Self {
        let mut mask = 0u32;
        let mut size = r;
        let mut e = n;
        while size > 0 {
            e -= 1;
            if binomial(e, size) as usize <= rank {
                rank -= binomial(e, size) as usize;
                mask |= 1 << e;
                size -= 1;
            }
        }
        IndexSet { mask, n: n as u8 }
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_ops_match_set_semantics() {
        let a = IndexSet::from_elems(&[2, 4, 8], 10).unwrap();
        let b = IndexSet::from_elems(&[4, 5], 10).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.contains(2) && !a.contains(3));
        assert_eq!(a.intersect(&b), IndexSet::from_elems(&[4], 10).unwrap());
        assert_eq!(
            a.union(&b),
            IndexSet::from_elems(&[2, 4, 5, 8], 10).unwrap()
        );
        assert!(a.intersect(&b).is_subset_of(&a));
        assert_eq!(a.complement().len(), 7);
        assert_eq!(a.to_string(), "{2,4,8}");
        assert_eq!(IndexSet::empty(3).to_string(), "{}");
    }

    #[test]
    fn colex_rank_is_a_bijection() {
        for n in 1..=8 {
            for r in 0..=n {
                let total = binomial(n, r) as usize;
                let mut seen = vec![false; total];
                for mask in 0u32..1 << n {
                    let s = IndexSet::from_mask(mask, n);
                    if s.len() == r {
                        let rk = s.colex_rank();
                        assert!(rk < total);
                        assert!(!seen[rk]);
                        seen[rk] = true;
                        assert_eq!(IndexSet::colex_unrank(n, r, rk), s);
                    }
                }
                assert!(seen.iter().all(|&b| b));
            }
        }
    }

    #[test]
    fn binomial_and_factorial_small_values() {
        assert_eq!(factorial(0), 1);
        assert_eq!(factorial(5), 120);
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
    }
}
