//! Brute-force oracle: full state spaces, dense transition kernels,
//! stationary distributions, and the distance calculus.
//!
//! States are ranked mixed-radix with the label vector as the most
//! significant digits (first position most significant), then the Lehmer rank
//! of the permutation (wreath family) or the colex rank of the carried
//! r-subset (coset family).
//!
//! A step drawn as an augmented permutation `(rho, marks)` acts on a state
//! `(labels; pi)` by replacing the permutation with `rho ∘ pi` (or the
//! carried subset with its image `rho(subset)`) and redrawing the labels at
//! every position of the refresh set `moved(rho) ∪ marks` i.i.d. from the
//! alphabet measure. The kernel entry is therefore a sum over atoms of
//! `weight × Π p_{new label}` against an indicator that untouched labels
//! agree, and for inversion-symmetric step measures the chain is reversible
//! with respect to the product stationary law.

use std::io::Write;

use crate::measure::{AlphabetMeasure, AugmentedMeasure, Mode};
use crate::perm::Perm;
use crate::subset::{binomial, factorial, IndexSet};
use crate::{Error, Result, MAX_STATES};

/// The two state-space families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// `G^n x S_n`: label vectors with a permutation.
    Wreath { n: usize, g: usize },
    /// `G^n x (S_n / (S_r x S_{n-r}))`: label vectors with an r-subset.
    Coset { n: usize, r: usize, g: usize },
}

impl Space {
    pub fn n(&self) -> usize {
        match *self {
            Space::Wreath { n, .. } | Space::Coset { n, .. } => n,
        }
    }

    pub fn alphabet(&self) -> usize {
        match *self {
            Space::Wreath { g, .. } | Space::Coset { g, .. } => g,
        }
    }

    /// Number of permutation-coordinate values (`n!` or `C(n,r)`).
    fn arrangement_count(&self) -> usize {
        match *self {
            Space::Wreath { n, .. } => factorial(n) as usize,
            Space::Coset { n, r, .. } => binomial(n, r) as usize,
        }
    }

    pub fn size(&self) -> usize {
        let (n, g) = (self.n(), self.alphabet());
        (g as u64).pow(n as u32) as usize * self.arrangement_count()
    }

    fn label_rank(&self, labels: &[usize]) -> usize {
        let g = self.alphabet();
        labels.iter().fold(0, |acc, &x| acc * g + x)
    }

    fn labels_of(&self, mut lrank: usize) -> Vec<usize> {
        let (n, g) = (self.n(), self.alphabet());
        let mut labels = vec![0; n];
        for i in (0..n).rev() {
            labels[i] = lrank % g;
            lrank /= g;
        }
        labels
    }

    pub fn rank_wreath(&self, labels: &[usize], perm: &Perm) -> usize {
        self.label_rank(labels) * self.arrangement_count() + perm.rank()
    }

    pub fn rank_coset(&self, labels: &[usize], subset: IndexSet) -> usize {
        self.label_rank(labels) * self.arrangement_count() + subset.colex_rank()
    }

    /// Decodes a rank into (labels, arrangement rank).
    pub fn split(&self, rank: usize) -> (Vec<usize>, usize) {
        let a = self.arrangement_count();
        (self.labels_of(rank / a), rank % a)
    }

    /// The start state: given labels with the identity arrangement.
    pub fn start_rank(&self, x0: &[usize]) -> Result<usize> {
        let (n, g) = (self.n(), self.alphabet());
        if x0.len() != n || x0.iter().any(|&x| x >= g) {
            return Err(Error::InvalidParameter(format!(
                "start labels {x0:?} do not fit n = {n}, |G| = {g}"
            )));
        }
        let arr0 = match *self {
            Space::Wreath { .. } => 0,
            Space::Coset { n, r, .. } => {
                let mut base = IndexSet::empty(n);
                for i in 0..r {
                    base.insert0(i);
                }
                base.colex_rank()
            }
        };
        Ok(self.label_rank(x0) * self.arrangement_count() + arr0)
    }

    /// Pretty form such as `(112; (1 2))` or `(112; {2})`.
    pub fn pretty(&self, rank: usize) -> String {
        let (labels, arr) = self.split(rank);
        let labels: String = labels.iter().map(|&x| (b'1' + x as u8) as char).collect();
        match *self {
            Space::Wreath { n, .. } => format!("({labels}; {})", Perm::unrank(n, arr)),
            Space::Coset { n, r, .. } => {
                format!("({labels}; {})", IndexSet::colex_unrank(n, r, arr))
            }
        }
    }

    /// The product stationary law: `Π p_{label}` over positions, divided by
    /// the number of arrangements.
    pub fn stationary(&self, p: &AlphabetMeasure) -> Vec<f64> {
        let dim = self.size();
        let a = self.arrangement_count() as f64;
        let mut out = vec![0.0; dim];
        for (rank, slot) in out.iter_mut().enumerate() {
            let (labels, _) = self.split(rank);
            let mass: f64 = labels.iter().map(|&x| p.prob(x)).product();
            *slot = mass / a;
        }
        out
    }
}

/// Dense row-stochastic transition matrix over ranked states.
#[derive(Clone)]
pub struct Kernel {
    space: Space,
    dim: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.dim)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// One step of the distribution: `out = nu · K`.
    pub fn step(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (s, &mass) in nu.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let row = self.row(s);
            for (slot, &k) in out.iter_mut().zip(row) {
                *slot += mass * k;
            }
        }
        out
    }

    /// Long-format CSV `from,to,prob` over nonzero entries.
    pub fn to_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "from,to,prob")?;
        for i in 0..self.dim {
            for (j, &v) in self.row(i).iter().enumerate() {
                if v != 0.0 {
                    writeln!(w, "{i},{j},{v:.17e}")?;
                }
            }
        }
        Ok(())
    }
}

fn shared_dims(q: &AugmentedMeasure, p: &AlphabetMeasure, space: Space) -> Result<usize> {
    let dim = space.size();
    if dim > MAX_STATES {
        return Err(Error::Capacity(format!(
            "state space has {dim} states, cap is {MAX_STATES}"
        )));
    }
    if p.size() == 0 || q.n() != space.n() {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    Ok(dim)
}

/// Builds the dense kernel for the wreath family. The measure must be in
/// plain mode; inversion symmetry is not required here (callers that need
/// reversibility check it), so asymmetric measures can be examined too.
pub fn build_wreath_kernel(q: &AugmentedMeasure, p: &AlphabetMeasure) -> Result<Kernel> {
    if q.mode() != Mode::Plain {
        return Err(Error::ModeMismatch(format!(
            "wreath kernel needs a plain-mode measure, got {}",
            q.mode()
        )));
    }
    let n = q.n();
    let space = Space::Wreath { n, g: p.size() };
    let dim = shared_dims(q, p, space)?;
    let nf = factorial(n) as usize;
    let atoms: Vec<(Perm, Vec<usize>, f64)> = q
        .atoms()
        .map(|(ap, w)| {
            (
                ap.perm.clone(),
                ap.refresh_set().iter0().collect(),
                crate::measure::weight_to_f64(w),
            )
        })
        .collect();
    let mut data = vec![0.0; dim * dim];
    let g = p.size();
    for s in 0..dim {
        let (labels, pr) = space.split(s);
        let pi = Perm::unrank(n, pr);
        let row = &mut data[s * dim..(s + 1) * dim];
        for (rho, refresh, w) in &atoms {
            let sigma_rank = rho.compose(&pi).rank();
            scatter_refresh(
                row,
                &labels,
                refresh,
                *w,
                p,
                g,
                |lbls| space.label_rank(lbls) * nf + sigma_rank,
            );
        }
    }
    Ok(Kernel { space, dim, data })
}

/// Builds the dense kernel for the coset family: the carried subset moves to
/// its image under the step permutation, labels refresh on the refresh set.
pub fn build_coset_kernel(q: &AugmentedMeasure, p: &AlphabetMeasure) -> Result<Kernel> {
    let r = match q.mode() {
        Mode::Coset { r } => r,
        Mode::Plain => {
            return Err(Error::ModeMismatch(
                "coset kernel needs a coset-mode measure".into(),
            ))
        }
    };
    let n = q.n();
    let space = Space::Coset { n, r, g: p.size() };
    let dim = shared_dims(q, p, space)?;
    let arr = binomial(n, r) as usize;
    let atoms: Vec<(Perm, Vec<usize>, f64)> = q
        .atoms()
        .map(|(ap, w)| {
            (
                ap.perm.clone(),
                ap.refresh_set().iter0().collect(),
                crate::measure::weight_to_f64(w),
            )
        })
        .collect();
    let mut data = vec![0.0; dim * dim];
    let g = p.size();
    for s in 0..dim {
        let (labels, ar) = space.split(s);
        let subset = IndexSet::colex_unrank(n, r, ar);
        let row = &mut data[s * dim..(s + 1) * dim];
        for (rho, refresh, w) in &atoms {
            let target = rho.apply_set(&subset).colex_rank();
            scatter_refresh(
                row,
                &labels,
                refresh,
                *w,
                p,
                g,
                |lbls| space.label_rank(lbls) * arr + target,
            );
        }
    }
    Ok(Kernel { space, dim, data })
}

/// Distributes an atom's mass over all `g^{|refresh|}` label outcomes.
fn scatter_refresh(
    row: &mut [f64],
    labels: &[usize],
    refresh: &[usize],
    w: f64,
    p: &AlphabetMeasure,
    g: usize,
    target_rank: impl Fn(&[usize]) -> usize,
) {
    let t = refresh.len();
    let mut work = labels.to_vec();
    let combos = (g as u64).pow(t as u32);
    for code in 0..combos {
        let mut c = code;
        let mut weight = w;
        for &pos in refresh {
            let letter = (c % g as u64) as usize;
            c /= g as u64;
            work[pos] = letter;
            weight *= p.prob(letter);
        }
        row[target_rank(&work)] += weight;
    }
}

/// Row of `kernel^k` at `start`, by repeated vector-kernel products.
pub fn kstep(kernel: &Kernel, start: usize, k: usize) -> Vec<f64> {
    let mut nu = vec![0.0; kernel.dim()];
    nu[start] = 1.0;
    for _ in 0..k {
        nu = kernel.step(&nu);
    }
    nu
}

/// `L^p` distance between two distributions with respect to a strictly
/// positive reference: `(Σ |nu-rho|^p / ref^{p-1})^{1/p}`.
pub fn lp_distance(nu: &[f64], rho: &[f64], reference: &[f64], p: f64) -> Result<f64> {
    if nu.len() != rho.len() || nu.len() != reference.len() {
        return Err(Error::InvalidParameter("length mismatch".into()));
    }
    if p < 1.0 {
        return Err(Error::InvalidParameter(format!("p = {p} must be >= 1")));
    }
    let mut acc = 0.0;
    for i in 0..nu.len() {
        if reference[i] <= 0.0 {
            return Err(Error::ZeroReference(i));
        }
        acc += (nu[i] - rho[i]).abs().powf(p) / reference[i].powf(p - 1.0);
    }
    Ok(acc.powf(1.0 / p))
}

/// Total variation distance, computed as the maximum event discrepancy
/// (the summed positive part). Equality with half the `L^1` distance is a
/// checked identity, not an implementation shortcut.
pub fn tv_distance(nu: &[f64], rho: &[f64]) -> f64 {
    nu.iter()
        .zip(rho)
        .map(|(&a, &b)| (a - b).max(0.0))
        .sum()
}

/// Largest detailed-balance violation `|π(i)K(i,j) − π(j)K(j,i)|` over all
/// state pairs, with `π` the product stationary law.
pub fn check_detailed_balance(kernel: &Kernel, p: &AlphabetMeasure) -> f64 {
    let stat = kernel.space().stationary(p);
    let mut worst: f64 = 0.0;
    for i in 0..kernel.dim() {
        for j in i + 1..kernel.dim() {
            let v = (stat[i] * kernel.entry(i, j) - stat[j] * kernel.entry(j, i)).abs();
            worst = worst.max(v);
        }
    }
    worst
}

/// The reversible return-probability identity
/// `‖K^k(g0,·) − π‖₂² = K^{2k}(g0,g0)/π(g0) − 1`, evaluated from the right
/// side. Errors if the kernel fails detailed balance, since the identity is
/// only valid for reversible chains.
pub fn chi_square_identity(
    kernel: &Kernel,
    p: &AlphabetMeasure,
    g0: usize,
    k: usize,
) -> Result<f64> {
    let violation = check_detailed_balance(kernel, p);
    if violation > 1e-10 {
        return Err(Error::NotReversible(violation));
    }
    let stat = kernel.space().stationary(p);
    let nu = kstep(kernel, g0, 2 * k);
    Ok(nu[g0] / stat[g0] - 1.0)
}

/// Reachability structure of the kernel's support digraph; used to surface
/// the "step measure stuck on a subgroup or coset" symptom at run time.
#[derive(Clone, Copy, Debug)]
pub struct Connectivity {
    pub irreducible: bool,
    pub has_self_loop: bool,
}

pub fn connectivity(kernel: &Kernel) -> Connectivity {
    let dim = kernel.dim();
    let reach = |transpose: bool| {
        let mut seen = vec![false; dim];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, seen_v) in seen.iter_mut().enumerate() {
                let w = if transpose {
                    kernel.entry(v, u)
                } else {
                    kernel.entry(u, v)
                };
                if w > 1e-15 && !*seen_v {
                    *seen_v = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|b| b)
    };
    Connectivity {
        irreducible: reach(false) && reach(true),
        has_self_loop: (0..dim).any(|i| kernel.entry(i, i) > 1e-15),
    }
}

/// CSV dump of a distribution: `rank,prob,state`.
pub fn dist_to_csv<W: Write>(space: Space, nu: &[f64], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "rank,prob,state")?;
    for (rank, &mass) in nu.iter().enumerate() {
        writeln!(w, "{rank},{mass:.17e},\"{}\"", space.pretty(rank))?;
    }
    Ok(())
}
