//! The exact subset decomposition of the squared chi-square distance.
//!
//! For a chain driven by an inversion-symmetric augmented measure, condition
//! on the (random) union `H_k` of the refresh sets of the first `k` steps.
//! Given `H_k`, labels inside `H_k` are i.i.d. from the alphabet measure and
//! labels outside it still hold their initial values, while the permutation
//! coordinate evolves as the conditional sub-walk confined to `H_k`. Möbius
//! inversion over the subset lattice then turns the cumulative quantities
//!
//! `P(H_k ⊆ J, arrangement) = mu(J)^k · P(sub-walk on J at step k)`
//!
//! into an exact formula for the return probability, hence — by
//! reversibility — for the squared chi-square distance at time `k`:
//!
//! ```text
//! ‖K^k(w0,·) − π‖₂² =   Σ_{J ⊆ [n]}  W(J) Π_{i∉J}(1/p_{x0_i} − 1) mu(J)^{2k} d_k(J)
//!                     + Σ_{J ⊊ [n]}  W(J) Π_{i∉J}(1/p_{x0_i} − 1) mu(J)^{2k}
//! ```
//!
//! where `mu(J)` is the refresh-set inclusion probability, `d_k(J)` the
//! squared chi-square distance to uniformity of the conditional sub-walk
//! confined to `J` (projected onto its sub-quotient in the coset family), and
//! the combinatorial weight `W(J)` is `n!/|J|!` for the wreath family and
//! `C(n,r)/C(|J|, |J ∩ {1..r}|)` for the coset family.
//!
//! In the coset family a second inclusion notion exists — the move set of a
//! step, which drives how the carried subset travels — and its inclusion
//! probability `mu_move(J)` dominates `mu(J)`. The exact terms use `mu`;
//! `mu_move` is recorded per subset and feeds the reference escape terms that
//! closed-form lower-bound indicators are compared against (for the
//! two-rack Bernoulli–Laplace family `mu_move(J) = (|J|/n)²` exactly).

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::measure::{weight_to_f64, AlphabetMeasure, AugmentedMeasure, GroupMeasure, Mode};
use crate::perm::Perm;
use crate::subset::{binomial, factorial, IndexSet};
use crate::{Error, Result, MAX_N, MAX_SUBWALK};

/// In-place subset-lattice zeta transform: `f[J] ← Σ_{C ⊆ J} f[C]`.
pub fn zeta_transform(f: &mut [f64], n: usize) {
    debug_assert_eq!(f.len(), 1 << n);
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..f.len() {
            if mask & b != 0 {
                f[mask] += f[mask ^ b];
            }
        }
    }
}

/// In-place Möbius transform, the inverse of [`zeta_transform`]:
/// `g[C] ← Σ_{J ⊆ C} (−1)^{|C|−|J|} g[J]`.
pub fn mobius_transform(g: &mut [f64], n: usize) {
    debug_assert_eq!(g.len(), 1 << n);
    for bit in 0..n {
        let b = 1usize << bit;
        for mask in 0..g.len() {
            if mask & b != 0 {
                g[mask] -= g[mask ^ b];
            }
        }
    }
}

/// Möbius inversion of a full subset table.
pub fn mobius_invert(g: &[f64], n: usize) -> Vec<f64> {
    let mut out = g.to_vec();
    mobius_transform(&mut out, n);
    out
}

/// Per-subset state of a conditional sub-walk: the step distribution on the
/// symmetric group of the subset, the running convolution, and the recorded
/// distances for every step reached so far.
struct Subwalk {
    /// `nu[rank] = P(sub-walk = perm)` over the local symmetric group.
    nu: Vec<f64>,
    /// For each support element, the table `rank(z) → rank(step ∘ z)`.
    step_tables: Vec<(Vec<usize>, f64)>,
    /// Coset family only: local class of each group element, and class count.
    projection: Option<(Vec<usize>, usize)>,
    /// `distances[k]` is the sub-walk distance after `k` steps.
    distances: Vec<f64>,
}

impl Subwalk {
    fn build(group: &GroupMeasure, mode: Mode) -> Result<Self> {
        let j = group.domain();
        let m = j.len();
        if m > MAX_SUBWALK {
            return Err(Error::Capacity(format!(
                "sub-walk on {m} points exceeds the convolution cap {MAX_SUBWALK}"
            )));
        }
        let locals: Vec<usize> = j.iter0().collect();
        let local_of: HashMap<usize, usize> =
            locals.iter().enumerate().map(|(t, &e)| (e, t)).collect();
        let dim = factorial(m) as usize;
        let mut step_tables = Vec::new();
        for (p, w) in group.atoms() {
            let local_images: Vec<usize> = locals.iter().map(|&e| local_of[&p.apply(e)]).collect();
            let step = Perm::from_images(local_images)?;
            let table: Vec<usize> = (0..dim)
                .map(|zr| step.compose(&Perm::unrank(m, zr)).rank())
                .collect();
            step_tables.push((table, weight_to_f64(w)));
        }
        let projection = match mode {
            Mode::Plain => None,
            Mode::Coset { r } => {
                // Local class of z: the image of the rack-1 positions of J.
                let base: Vec<usize> = locals
                    .iter()
                    .enumerate()
                    .filter(|&(_, &e)| e < r)
                    .map(|(t, _)| t)
                    .collect();
                let classes = binomial(m, base.len()) as usize;
                let class_of: Vec<usize> = (0..dim)
                    .map(|zr| {
                        let z = Perm::unrank(m, zr);
                        let mut img = IndexSet::empty(m);
                        for &t in &base {
                            img.insert0(z.apply(t));
                        }
                        img.colex_rank()
                    })
                    .collect();
                Some((class_of, classes))
            }
        };
        let mut nu = vec![0.0; dim];
        nu[Perm::identity(m).rank()] = 1.0;
        let mut walk = Subwalk { nu, step_tables, projection, distances: Vec::new() };
        walk.distances.push(walk.current_distance());
        Ok(walk)
    }

    fn advance(&mut self) {
        let mut next = vec![0.0; self.nu.len()];
        for (table, w) in &self.step_tables {
            for (zr, &mass) in self.nu.iter().enumerate() {
                if mass != 0.0 {
                    next[table[zr]] += w * mass;
                }
            }
        }
        self.nu = next;
        self.distances.push(self.current_distance());
    }

    /// Squared chi-square distance of the current sub-walk distribution to
    /// uniformity: `N Σ (nu − 1/N)²` on the group (plain) or on its local
    /// quotient (coset).
    fn current_distance(&self) -> f64 {
        match &self.projection {
            None => {
                let n = self.nu.len() as f64;
                n * self.nu.iter().map(|&v| (v - 1.0 / n).powi(2)).sum::<f64>()
            }
            Some((class_of, classes)) => {
                let mut pushed = vec![0.0; *classes];
                for (zr, &mass) in self.nu.iter().enumerate() {
                    pushed[class_of[zr]] += mass;
                }
                let n = *classes as f64;
                n * pushed.iter().map(|&v| (v - 1.0 / n).powi(2)).sum::<f64>()
            }
        }
    }

    fn distance_at(&mut self, k: usize) -> f64 {
        while self.distances.len() <= k {
            self.advance();
        }
        self.distances[k]
    }
}

/// Memoized conditional sub-walk distances, keyed by subset. The entry for
/// `J` is the sequence `d_0(J), d_1(J), …` extended on demand.
pub struct SubwalkCache<'a> {
    measure: &'a AugmentedMeasure,
    walks: HashMap<u32, Option<Subwalk>>,
}

impl<'a> SubwalkCache<'a> {
    pub fn new(measure: &'a AugmentedMeasure) -> Self {
        SubwalkCache { measure, walks: HashMap::new() }
    }

    /// `d_k(J)`: zero when the subset traps no step mass (the term it would
    /// feed is annihilated by `mu(J)^{2k}`), otherwise the conditional
    /// sub-walk distance.
    pub fn distance(&mut self, j: IndexSet, k: usize) -> Result<f64> {
        let entry = match self.walks.entry(j.mask()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(slot) => {
                let walk = match self.measure.conditional(j) {
                    Err(Error::Unconditionable) => None,
                    Err(e) => return Err(e),
                    Ok((_, group)) => Some(Subwalk::build(&group, self.measure.mode())?),
                };
                slot.insert(walk)
            }
        };
        Ok(match entry {
            None => 0.0,
            Some(walk) => walk.distance_at(k),
        })
    }
}

/// Conditional sub-walk distance for a single subset: the group distance
/// (wreath family) or the projected quotient distance (coset family).
pub fn subwalk_l2(measure: &AugmentedMeasure, j: IndexSet, k: usize) -> Result<f64> {
    SubwalkCache::new(measure).distance(j, k)
}

/// One subset's contribution to the decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct SubsetTerm {
    /// Bitmask of the subset (bit i = element i+1).
    pub mask: u32,
    pub size: usize,
    /// Refresh-set inclusion probability; enters the exact terms.
    pub mu: f64,
    /// Move-set inclusion probability (coset family; equals `mu` otherwise).
    pub mu_move: f64,
    /// Combinatorial weight `W(J)`.
    pub weight: f64,
    /// `Π_{i ∉ J} (1/p_{x0_i} − 1)`.
    pub prefactor: f64,
    /// Conditional sub-walk distance `d_k(J)`.
    pub d: f64,
    /// `W(J) · prefactor · mu^{2k} · d_k(J)`.
    pub term_subwalk: f64,
    /// `W(J) · prefactor · mu^{2k}` for strict subsets, 0 for the full set.
    pub term_escape: f64,
    /// The escape term evaluated with `mu_move` instead of `mu`; reference
    /// series for the closed-form lower-bound indicators.
    pub term_escape_move: f64,
}

/// The assembled exact decomposition at a fixed time `k`.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub family: String,
    pub n: usize,
    pub r: Option<usize>,
    pub k: usize,
    /// Start labels (0-based letters).
    pub x0: Vec<usize>,
    pub rows: Vec<SubsetTerm>,
    pub sum_subwalk: f64,
    pub sum_escape: f64,
    /// `sum_subwalk + sum_escape`.
    pub l2_squared: f64,
    pub l2: f64,
    /// `l2 / 2`, an upper bound for the total variation distance.
    pub tv_bound: f64,
}

impl DecompositionReport {
    /// Sum of the escape terms over subsets of one fixed size.
    pub fn escape_aggregate(&self, size: usize) -> f64 {
        self.rows
            .iter()
            .filter(|row| row.size == size)
            .map(|row| row.term_escape)
            .sum()
    }

    /// Sum of the move-probability reference escape terms of one size.
    pub fn escape_move_aggregate(&self, size: usize) -> f64 {
        self.rows
            .iter()
            .filter(|row| row.size == size)
            .map(|row| row.term_escape_move)
            .sum()
    }

    /// CSV rows `mask,size,mu,mu_move,weight,prefactor,d,term_subwalk,term_escape`.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "mask,size,mu,mu_move,weight,prefactor,d,term_subwalk,term_escape"
        )?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                row.mask,
                row.size,
                row.mu,
                row.mu_move,
                row.weight,
                row.prefactor,
                row.d,
                row.term_subwalk,
                row.term_escape
            )?;
        }
        Ok(())
    }
}

/// Reusable evaluator: holds the per-subset sub-walk cache so a sweep over
/// `k` extends each convolution instead of restarting it.
pub struct Decomposition<'a> {
    measure: &'a AugmentedMeasure,
    alphabet: &'a AlphabetMeasure,
    x0: Vec<usize>,
    cache: SubwalkCache<'a>,
}

impl<'a> Decomposition<'a> {
    pub fn new(
        measure: &'a AugmentedMeasure,
        alphabet: &'a AlphabetMeasure,
        x0: &[usize],
    ) -> Result<Self> {
        let n = measure.n();
        if n > MAX_N {
            return Err(Error::Capacity(format!(
                "subset enumeration over n = {n} exceeds the cap {MAX_N}"
            )));
        }
        if x0.len() != n || x0.iter().any(|&x| x >= alphabet.size()) {
            return Err(Error::InvalidParameter(format!(
                "start labels {x0:?} do not fit n = {n}, |G| = {}",
                alphabet.size()
            )));
        }
        if !measure.is_augmented_symmetric() {
            return Err(Error::InvalidMeasure(
                "the decomposition requires an inversion-symmetric step measure".into(),
            ));
        }
        Ok(Decomposition {
            measure,
            alphabet,
            x0: x0.to_vec(),
            cache: SubwalkCache::new(measure),
        })
    }

    pub fn report(&mut self, k: usize) -> Result<DecompositionReport> {
        if k == 0 {
            return Err(Error::InvalidParameter("k >= 1 required".into()));
        }
        let n = self.measure.n();
        let mode = self.measure.mode();
        let full = IndexSet::full(n);
        let inv_p: Vec<f64> = self.x0.iter().map(|&x| 1.0 / self.alphabet.prob(x) - 1.0).collect();
        let nf = factorial(n) as f64;
        let mut rows = Vec::with_capacity(1 << n);
        let (mut sum_subwalk, mut sum_escape) = (0.0, 0.0);
        for mask in 0u32..1 << n {
            let j = IndexSet::from_mask(mask, n);
            let size = j.len();
            let mu = weight_to_f64(&self.measure.refresh_inclusion_probability(j));
            let mu_move = match mode {
                Mode::Plain => mu,
                Mode::Coset { .. } => weight_to_f64(&self.measure.inclusion_probability(j)),
            };
            let weight = match mode {
                Mode::Plain => nf / factorial(size) as f64,
                Mode::Coset { r } => {
                    binomial(n, r) as f64 / binomial(size, j.count_below(r)) as f64
                }
            };
            let prefactor: f64 = (0..n).filter(|&i| !j.contains0(i)).map(|i| inv_p[i]).product();
            let d = if mu == 0.0 { 0.0 } else { self.cache.distance(j, k)? };
            let mu2k = mu.powi(2 * k as i32);
            let mu_move2k = mu_move.powi(2 * k as i32);
            let term_subwalk = weight * prefactor * mu2k * d;
            let strict = mask != full.mask();
            let term_escape = if strict { weight * prefactor * mu2k } else { 0.0 };
            let term_escape_move = if strict { weight * prefactor * mu_move2k } else { 0.0 };
            sum_subwalk += term_subwalk;
            sum_escape += term_escape;
            rows.push(SubsetTerm {
                mask,
                size,
                mu,
                mu_move,
                weight,
                prefactor,
                d,
                term_subwalk,
                term_escape,
                term_escape_move,
            });
        }
        let l2_squared = sum_subwalk + sum_escape;
        let l2 = l2_squared.max(0.0).sqrt();
        Ok(DecompositionReport {
            family: match mode {
                Mode::Plain => "wreath".into(),
                Mode::Coset { .. } => "coset".into(),
            },
            n,
            r: mode.r(),
            k,
            x0: self.x0.clone(),
            rows,
            sum_subwalk,
            sum_escape,
            l2_squared,
            l2,
            tv_bound: l2 / 2.0,
        })
    }
}

/// Exact squared-L² decomposition for the wreath family at time `k >= 1`.
pub fn wreath_l2_decomposition(
    measure: &AugmentedMeasure,
    alphabet: &AlphabetMeasure,
    x0: &[usize],
    k: usize,
) -> Result<DecompositionReport> {
    if measure.mode() != Mode::Plain {
        return Err(Error::ModeMismatch(
            "wreath decomposition needs a plain-mode measure".into(),
        ));
    }
    Decomposition::new(measure, alphabet, x0)?.report(k)
}

/// Exact squared-L² decomposition for the coset family at time `k >= 1`.
pub fn coset_l2_decomposition(
    measure: &AugmentedMeasure,
    alphabet: &AlphabetMeasure,
    x0: &[usize],
    k: usize,
) -> Result<DecompositionReport> {
    if measure.mode() == Mode::Plain {
        return Err(Error::ModeMismatch(
            "coset decomposition needs a coset-mode measure".into(),
        ));
    }
    Decomposition::new(measure, alphabet, x0)?.report(k)
}

/// Recomputes the squared L² total using one representative subset per size
/// class (|J| for the wreath family, (|J ∩ rack1|, |J ∩ rack2|) for the coset
/// family). Valid for measures invariant under the relevant relabelings,
/// such as the transposition and Bernoulli–Laplace families started from
/// constant labels; tested against the full sum.
pub fn size_collapsed_l2_squared(
    measure: &AugmentedMeasure,
    alphabet: &AlphabetMeasure,
    x0: &[usize],
    k: usize,
) -> Result<f64> {
    let mut dec = Decomposition::new(measure, alphabet, x0)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k >= 1 required".into()));
    }
    let n = measure.n();
    let full_mask = IndexSet::full(n).mask();
    let inv_p: Vec<f64> = x0.iter().map(|&x| 1.0 / alphabet.prob(x) - 1.0).collect();
    let nf = factorial(n) as f64;
    let mut total = 0.0;
    match measure.mode() {
        Mode::Plain => {
            for size in 0..=n {
                // Representative: the first `size` positions.
                let j = IndexSet::from_mask((1u32 << size) - 1, n);
                let mu = weight_to_f64(&measure.refresh_inclusion_probability(j));
                let d = if mu == 0.0 { 0.0 } else { dec.cache.distance(j, k)? };
                let weight = nf / factorial(size) as f64;
                let prefactor: f64 =
                    (size..n).map(|i| inv_p[i]).product();
                let count = binomial(n, size) as f64;
                let mu2k = mu.powi(2 * k as i32);
                total += count * weight * prefactor * mu2k * d;
                if j.mask() != full_mask {
                    total += count * weight * prefactor * mu2k;
                }
            }
        }
        Mode::Coset { r } => {
            for low in 0..=r {
                for high in 0..=n - r {
                    let mut j = IndexSet::empty(n);
                    for i in 0..low {
                        j.insert0(i);
                    }
                    for i in 0..high {
                        j.insert0(r + i);
                    }
                    let size = low + high;
                    let mu = weight_to_f64(&measure.refresh_inclusion_probability(j));
                    let d = if mu == 0.0 { 0.0 } else { dec.cache.distance(j, k)? };
                    let weight = binomial(n, r) as f64 / binomial(size, low) as f64;
                    let prefactor: f64 = (0..n)
                        .filter(|&i| !j.contains0(i))
                        .map(|i| inv_p[i])
                        .product();
                    let count = (binomial(r, low) * binomial(n - r, high)) as f64;
                    let mu2k = mu.powi(2 * k as i32);
                    total += count * weight * prefactor * mu2k * d;
                    if j.mask() != full_mask {
                        total += count * weight * prefactor * mu2k;
                    }
                }
            }
        }
    }
    Ok(total)
}
