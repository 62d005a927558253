//! Canonical representatives for the homogeneous space `S_n / (S_r x S_{n-r})`.
//!
//! A coset is identified with the r-subset `x = p({1..r})` it carries. Its
//! canonical representative is the involution that transposes, in increasing
//! order, the elements of `x` that exceed `r` with the elements of the
//! complement that do not: in the two-rack picture these are exactly the
//! labels sitting on the wrong rack, paired smallest-with-smallest.

use std::fmt;

use crate::perm::Perm;
use crate::subset::IndexSet;
use crate::{Error, Result};

/// The canonical representative of a coset of `S_r x S_{n-r}` in `S_n`.
#[derive(Clone, PartialEq, Eq)]
pub struct CosetRep {
    n: usize,
    r: usize,
    subset: IndexSet,
    involution: Perm,
}

impl CosetRep {
    /// Canonical representative of the coset carrying `subset`.
    pub fn from_subset(subset: IndexSet, r: usize) -> Result<Self> {
        let n = subset.n();
        check_r(n, r)?;
        if subset.len() != r {
            return Err(Error::InvalidParameter(format!(
                "subset {subset} does not have {r} elements"
            )));
        }
        // 0-based: elements of the subset at index >= r, and elements of the
        // complement at index < r, both ascending.
        let strays_high: Vec<usize> = subset.iter0().filter(|&i| i >= r).collect();
        let strays_low: Vec<usize> = subset.complement().iter0().filter(|&i| i < r).collect();
        debug_assert_eq!(strays_high.len(), strays_low.len());
        let mut images: Vec<usize> = (0..n).collect();
        for (&lo, &hi) in strays_low.iter().zip(&strays_high) {
            images.swap(lo, hi);
        }
        let involution = Perm::from_images(images)?;
        Ok(CosetRep { n, r, subset, involution })
    }

    pub fn identity(n: usize, r: usize) -> Result<Self> {
        let mut base = IndexSet::empty(n);
        for i in 0..r {
            base.insert0(i);
        }
        Self::from_subset(base, r)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn subset(&self) -> IndexSet {
        self.subset
    }

    pub fn involution(&self) -> &Perm {
        &self.involution
    }
}

impl fmt::Display for CosetRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.involution, f)
    }
}

impl fmt::Debug for CosetRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CosetRep({}, {})", self.subset, self.involution)
    }
}

fn check_r(n: usize, r: usize) -> Result<()> {
    if r == 0 || 2 * r > n {
        return Err(Error::InvalidParameter(format!(
            "r = {r} must satisfy 1 <= r <= n/2 with n = {n}"
        )));
    }
    Ok(())
}

/// Collapses a permutation to the canonical representative of its coset of
/// `S_r x S_{n-r}`: the subset is `p({1..r})` and the representative the
/// canonical involution for that subset.
pub fn coset_reduce(p: &Perm, r: usize) -> Result<CosetRep> {
    check_r(p.n(), r)?;
    let mut subset = IndexSet::empty(p.n());
    for i in 0..r {
        subset.insert0(p.apply(i));
    }
    CosetRep::from_subset(subset, r)
}
