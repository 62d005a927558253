//! Permutations of `{1..n}` in one-line notation.
//!
//! One-line image vectors are the single internal representation; cycle
//! notation exists only as a parser/formatter. Composition is ordinary
//! function composition, `(p ∘ q)(i) = p(q(i))`, and the chains in this crate
//! multiply each new step on the left: `state ← step ∘ state`.

use std::fmt;
use std::str::FromStr;

use crate::subset::{factorial, IndexSet};
use crate::{Error, Result};

/// A permutation of `{0..n-1}` stored by its images. External text formats
/// are 1-based.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm {
    images: Vec<usize>,
}

impl Perm {
    pub fn identity(n: usize) -> Self {
        Perm { images: (0..n).collect() }
    }

    /// Builds from 0-based images, checking bijectivity.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &im in &images {
            if im >= n || seen[im] {
                return Err(Error::InvalidPermutation(format!("images {images:?}")));
            }
            seen[im] = true;
        }
        Ok(Perm { images })
    }

    /// Builds from 1-based images as written in one-line notation.
    pub fn from_one_line(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::InvalidPermutation(format!("one-line {images:?}")));
        }
        Self::from_images(images.iter().map(|&im| im - 1).collect())
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    /// Image of the 0-based point `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.n(), other.n());
        Perm {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.n()];
        for (i, &im) in self.images.iter().enumerate() {
            inv[im] = i;
        }
        Perm { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &im)| i == im)
    }

    pub fn fixed_points(&self) -> IndexSet {
        let mut s = IndexSet::empty(self.n());
        for (i, &im) in self.images.iter().enumerate() {
            if i == im {
                s.insert0(i);
            }
        }
        s
    }

    /// Points moved by the permutation: the complement of the fixed-point set.
    pub fn deranged_points(&self) -> IndexSet {
        self.fixed_points().complement()
    }

    /// Image of a subset under the permutation.
    pub fn apply_set(&self, s: &IndexSet) -> IndexSet {
        let mut out = IndexSet::empty(self.n());
        for i in s.iter0() {
            out.insert0(self.images[i]);
        }
        out
    }

    /// Lexicographic rank of the image vector (Lehmer code). The identity
    /// ranks 0.
    pub fn rank(&self) -> usize {
        let n = self.n();
        let mut rank = 0usize;
        for i in 0..n {
            let smaller_later = self.images[i + 1..]
                .iter()
                .filter(|&&x| x < self.images[i])
                .count();
            rank += smaller_later * factorial(n - 1 - i) as usize;
        }
        rank
    }

    pub fn unrank(n: usize, mut rank: usize) -> Perm {
        debug_assert!(rank < factorial(n) as usize);
        let mut pool: Vec<usize> = (0..n).collect();
        let mut images = Vec::with_capacity(n);
        for i in 0..n {
            let f = factorial(n - 1 - i) as usize;
            let idx = rank / f;
            rank %= f;
            images.push(pool.remove(idx));
        }
        Perm { images }
    }

    pub fn enumerate(n: usize) -> impl Iterator<Item = Perm> {
        (0..factorial(n) as usize).map(move |r| Perm::unrank(n, r))
    }

    /// Disjoint cycles of length at least 2, each starting at its smallest
    /// element, ordered by that element. 0-based.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if seen[start] || self.images[start] == start {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut cur = self.images[start];
            while cur != start {
                seen[cur] = true;
                cyc.push(cur);
                cur = self.images[cur];
            }
            cycles.push(cyc);
        }
        cycles
    }

    /// Parses cycle notation such as `"(1 4)(3 8)"`; `"e"` (or `"()"`) is the
    /// identity. Elements are 1-based and must be distinct across cycles.
    pub fn parse_cycles(s: &str, n: usize) -> Result<Perm> {
        let s = s.trim();
        if s == "e" || s == "()" || s.is_empty() {
            return Ok(Perm::identity(n));
        }
        let mut images: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        let mut rest = s;
        while !rest.is_empty() {
            let open = rest
                .find('(')
                .ok_or_else(|| Error::Parse(format!("expected '(' in {s:?}")))?;
            if !rest[..open].trim().is_empty() {
                return Err(Error::Parse(format!("stray text in {s:?}")));
            }
            let close = rest
                .find(')')
                .ok_or_else(|| Error::Parse(format!("unclosed '(' in {s:?}")))?;
            let body = &rest[open + 1..close];
            let elems: Vec<usize> = body
                .split([' ', ','])
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad element {t:?} in {s:?}")))
                })
                .collect::<Result<_>>()?;
            if elems.len() < 2 {
                return Err(Error::Parse(format!("cycle too short in {s:?}")));
            }
            for &e in &elems {
                if e == 0 || e > n {
                    return Err(Error::Parse(format!("element {e} outside 1..={n}")));
                }
                if used[e - 1] {
                    return Err(Error::Parse(format!("element {e} repeated in {s:?}")));
                }
                used[e - 1] = true;
            }
            for w in 0..elems.len() {
                let from = elems[w] - 1;
                let to = elems[(w + 1) % elems.len()] - 1;
                images[from] = to;
            }
            rest = &rest[close + 1..];
        }
        Perm::from_images(images)
    }
}

impl fmt::Display for Perm {
    /// Cycle notation, 1-based; the identity prints as `e`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "e");
        }
        for cyc in cycles {
            write!(f, "(")?;
            for (i, e) in cyc.iter().enumerate() {
                if i > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", e + 1)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Perm {
    type Err = Error;

    /// Parses cycle notation, sizing `n` as the largest element mentioned.
    /// Prefer [`Perm::parse_cycles`] when the ambient `n` is known.
    fn from_str(s: &str) -> Result<Perm> {
        let max = s
            .split(|c: char| !c.is_ascii_digit())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>().unwrap_or(0))
            .max()
            .unwrap_or(0);
        Perm::parse_cycles(s, max)
    }
}
