//! Step measures: distributions on a finite alphabet and on augmented
//! permutations, the two concrete families used throughout (the transposition
//! measure and the two-rack Bernoulli–Laplace measure), conditioning, and the
//! inclusion probabilities that drive the subset decomposition.
//!
//! Weights are exact rationals. The concrete measures have denominators
//! `n^2` and `n^2 r!(n-r)!`, so every identity asserted about them can be
//! checked without floating-point slack; weights that arrive as floats
//! convert exactly (every finite `f64` is rational).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use num::{BigRational, FromPrimitive, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coset::coset_reduce;
use crate::perm::Perm;
use crate::subset::IndexSet;
use crate::{Error, Result};

/// Exact measure weight.
pub type Weight = BigRational;

pub fn weight_from_f64(x: f64) -> Result<Weight> {
    BigRational::from_f64(x).ok_or_else(|| Error::Parse(format!("non-finite weight {x}")))
}

pub fn weight_to_f64(w: &Weight) -> f64 {
    w.to_f64().unwrap_or(f64::NAN)
}

/// Parses a nonnegative decimal literal (`"0.7"`, `"1"`, `".25"`) exactly.
pub fn parse_decimal(s: &str) -> Result<Weight> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad decimal {s:?}"));
    let (int, frac) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: num::BigInt = digits.parse().map_err(|_| bad())?;
    let den = num::BigInt::from(10u32).pow(frac.len() as u32);
    Ok(BigRational::new(num, den))
}

/// Which chain family a measure drives: `Plain` steps act on `G^n x S_n`,
/// `Coset { r }` steps act on the two-rack homogeneous space.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Plain,
    Coset { r: usize },
}

impl Mode {
    pub fn r(&self) -> Option<usize> {
        match self {
            Mode::Plain => None,
            Mode::Coset { r } => Some(*r),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Plain => write!(f, "plain"),
            Mode::Coset { r } => write!(f, "coset({r})"),
        }
    }
}

impl Serialize for Mode {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Mode::Plain => ser.serialize_str("plain"),
            Mode::Coset { r } => {
                use serde::ser::SerializeMap;
                let mut m = ser.serialize_map(Some(1))?;
                m.serialize_entry("coset", r)?;
                m.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            S(String),
            M(BTreeMap<String, usize>),
        }
        match Raw::deserialize(de)? {
            Raw::S(s) if s == "plain" => Ok(Mode::Plain),
            Raw::S(s) => Err(D::Error::custom(format!("unknown mode {s:?}"))),
            Raw::M(m) => match (m.len(), m.get("coset")) {
                (1, Some(&r)) => Ok(Mode::Coset { r }),
                _ => Err(D::Error::custom("expected {\"coset\": r}")),
            },
        }
    }
}

/// A permutation together with a set of marked points whose labels refresh
/// even though the permutation does not move them. Validity of the marks
/// depends on the mode: they must be fixed points of the permutation itself
/// (plain) or of its coset reduction (coset).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AugPerm {
    pub perm: Perm,
    pub aug: IndexSet,
}

impl AugPerm {
    pub fn new(perm: Perm, aug: IndexSet) -> Self {
        debug_assert_eq!(perm.n(), aug.n());
        AugPerm { perm, aug }
    }

    pub fn valid_for(&self, mode: Mode) -> bool {
        match mode {
            Mode::Plain => self.aug.is_subset_of(&self.perm.fixed_points()),
            Mode::Coset { r } => match coset_reduce(&self.perm, r) {
                Ok(rep) => self.aug.is_subset_of(&rep.involution().fixed_points()),
                Err(_) => false,
            },
        }
    }

    /// Positions whose labels the step redraws: points moved by the
    /// permutation plus the marks.
    pub fn refresh_set(&self) -> IndexSet {
        self.perm.deranged_points().union(&self.aug)
    }

    /// Points involved in the induced move on the homogeneous space: points
    /// moved by the coset reduction of the permutation, plus the marks.
    pub fn move_set(&self, r: usize) -> IndexSet {
        let rep = coset_reduce(&self.perm, r).expect("valid r");
        rep.involution().deranged_points().union(&self.aug)
    }
}

impl fmt::Display for AugPerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.perm, self.aug)
    }
}

impl fmt::Debug for AugPerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The mode-aware included set: the refresh set in plain mode, the move set
/// in coset mode.
pub fn included_indices(ap: &AugPerm, mode: Mode) -> IndexSet {
    match mode {
        Mode::Plain => ap.refresh_set(),
        Mode::Coset { r } => ap.move_set(r),
    }
}

/// A probability distribution on the label alphabet, kept exact with a float
/// cache for the numeric kernels.
#[derive(Clone, Debug)]
pub struct AlphabetMeasure {
    probs: Vec<Weight>,
    probs_f64: Vec<f64>,
    min_index: usize,
}

impl AlphabetMeasure {
    /// Positive weights summing to 1 within 1e-12; the vector is renormalized
    /// exactly so downstream identities see total mass exactly one.
    pub fn new(probs: Vec<Weight>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidMeasure("empty alphabet".into()));
        }
        if probs.iter().any(|p| !p.is_positive()) {
            return Err(Error::InvalidMeasure(
                "alphabet probabilities must be strictly positive".into(),
            ));
        }
        let total: Weight = probs.iter().sum();
        let drift = (total.clone() - Weight::one()).to_f64().unwrap_or(1.0).abs();
        if drift > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "alphabet probabilities sum to 1{drift:+e}"
            )));
        }
        let probs: Vec<Weight> = probs.into_iter().map(|p| p / &total).collect();
        let probs_f64: Vec<f64> = probs.iter().map(weight_to_f64).collect();
        let min_index = probs_f64
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        Ok(AlphabetMeasure { probs, probs_f64, min_index })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        let w = BigRational::new(1.into(), (m as i64).into());
        Self::new(vec![w; m])
    }

    pub fn from_f64(probs: &[f64]) -> Result<Self> {
        Self::new(probs.iter().map(|&p| weight_from_f64(p)).collect::<Result<_>>()?)
    }

    pub fn size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, letter: usize) -> f64 {
        self.probs_f64[letter]
    }

    pub fn prob_exact(&self, letter: usize) -> &Weight {
        &self.probs[letter]
    }

    pub fn probs_f64(&self) -> &[f64] {
        &self.probs_f64
    }

    pub fn p_min(&self) -> f64 {
        self.probs_f64[self.min_index]
    }

    /// A letter achieving the minimum probability.
    pub fn min_letter(&self) -> usize {
        self.min_index
    }
}

/// A measure on permutations supported inside the subgroup of permutations
/// moving only points of `domain`.
#[derive(Clone, Debug)]
pub struct GroupMeasure {
    n: usize,
    domain: IndexSet,
    atoms: BTreeMap<Perm, Weight>,
}

impl GroupMeasure {
    pub fn new(n: usize, domain: IndexSet, atoms: BTreeMap<Perm, Weight>) -> Result<Self> {
        for p in atoms.keys() {
            if !p.deranged_points().is_subset_of(&domain) {
                return Err(Error::InvalidMeasure(format!(
                    "permutation {p} moves points outside {domain}"
                )));
            }
        }
        Ok(GroupMeasure { n, domain, atoms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> IndexSet {
        self.domain
    }

    pub fn mass(&self, p: &Perm) -> Weight {
        self.atoms.get(p).cloned().unwrap_or_else(Weight::zero)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Perm, &Weight)> {
        self.atoms.iter()
    }

    pub fn total(&self) -> Weight {
        self.atoms.values().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.atoms.iter().all(|(p, w)| {
            let back = self.mass(&p.inverse());
            ((w - back).to_f64().unwrap_or(1.0)).abs() <= 1e-12
        })
    }
}

/// A finitely supported probability measure on augmented permutations.
#[derive(Clone, Debug)]
pub struct AugmentedMeasure {
    n: usize,
    mode: Mode,
    atoms: BTreeMap<AugPerm, Weight>,
}

impl AugmentedMeasure {
    pub fn new<I>(n: usize, mode: Mode, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (AugPerm, Weight)>,
    {
        if let Mode::Coset { r } = mode {
            if r == 0 || 2 * r > n {
                return Err(Error::InvalidParameter(format!(
                    "r = {r} must satisfy 1 <= r <= n/2 with n = {n}"
                )));
            }
        }
        let mut map: BTreeMap<AugPerm, Weight> = BTreeMap::new();
        for (ap, w) in atoms {
            if ap.perm.n() != n {
                return Err(Error::InvalidMeasure(format!(
                    "atom {ap} has degree {} != {n}",
                    ap.perm.n()
                )));
            }
            if !w.is_positive() {
                return Err(Error::InvalidMeasure(format!("atom {ap} has weight {w}")));
            }
            if !ap.valid_for(mode) {
                return Err(Error::InvalidMeasure(format!(
                    "atom {ap} is invalid in mode {mode}"
                )));
            }
            *map.entry(ap).or_insert_with(Weight::zero) += w;
        }
        if map.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let total: Weight = map.values().sum();
        let drift = (total.clone() - Weight::one()).to_f64().unwrap_or(1.0).abs();
        if drift > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "atom weights sum to 1{drift:+e}"
            )));
        }
        for w in map.values_mut() {
            *w /= &total;
        }
        Ok(AugmentedMeasure { n, mode, atoms: map })
    }

    /// The transposition measure: mass `1/n^2` on each (identity, {j}) and
    /// `2/n^2` on each (transposition, {}).
    pub fn transpositions(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        let nn = (n * n) as i64;
        let one = BigRational::new(1.into(), nn.into());
        let two = BigRational::new(2.into(), nn.into());
        let mut atoms = Vec::new();
        for j in 0..n {
            let mut aug = IndexSet::empty(n);
            aug.insert0(j);
            atoms.push((AugPerm::new(Perm::identity(n), aug), one.clone()));
        }
        for a in 0..n {
            for b in a + 1..n {
                let mut images: Vec<usize> = (0..n).collect();
                images.swap(a, b);
                let tau = Perm::from_images(images)?;
                atoms.push((AugPerm::new(tau, IndexSet::empty(n)), two.clone()));
            }
        }
        Self::new(n, Mode::Plain, atoms)
    }

    /// The two-rack Bernoulli–Laplace measure with racks `{1..r}` and
    /// `{r+1..n}`: for every rack-preserving `kappa`, mass `1/(n^2 r!(n-r)!)`
    /// on each (kappa, {j}) and `2/(n^2 r!(n-r)!)` on each (kappa, {i,j}) with
    /// a same-rack pair; mass `2/(n^2 r!(n-r)!)` on (tau kappa, {}) for each
    /// cross-rack transposition `tau`.
    pub fn bernoulli_laplace(n: usize, r: usize) -> Result<Self> {
        if r == 0 || 2 * r > n {
            return Err(Error::InvalidParameter(format!(
                "r = {r} must satisfy 1 <= r <= n/2 with n = {n}"
            )));
        }
        let stab: Vec<Perm> = rack_stabilizer(n, r);
        let denom = (n * n) as i64 * stab.len() as i64;
        let one = BigRational::new(1.into(), denom.into());
        let two = BigRational::new(2.into(), denom.into());
        let mut atoms = Vec::new();
        // Same-rack pairs {i,j}.
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if (a < r) == (b < r) {
                    pairs.push((a, b));
                }
            }
        }
        for kappa in &stab {
            for j in 0..n {
                let mut aug = IndexSet::empty(n);
                aug.insert0(j);
                atoms.push((AugPerm::new(kappa.clone(), aug), one.clone()));
            }
            for &(a, b) in &pairs {
                let mut aug = IndexSet::empty(n);
                aug.insert0(a);
                aug.insert0(b);
                atoms.push((AugPerm::new(kappa.clone(), aug), two.clone()));
            }
            for a in 0..r {
                for b in r..n {
                    let mut images: Vec<usize> = (0..n).collect();
                    images.swap(a, b);
                    let tau = Perm::from_images(images)?;
                    atoms.push((
                        AugPerm::new(tau.compose(kappa), IndexSet::empty(n)),
                        two.clone(),
                    ));
                }
            }
        }
        Self::new(n, Mode::Coset { r }, atoms)
    }

    /// A seeded random measure satisfying the inversion symmetry
    /// `mass(p, J) = mass(p^{-1}, J)` by construction: sampled atoms are
    /// inserted together with their inverses at a common weight.
    pub fn random_symmetric(n: usize, mode: Mode, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut atoms: BTreeMap<AugPerm, Weight> = BTreeMap::new();
        let target = 4 + (n % 3);
        let mut guard = 0;
        while atoms.len() < 2 * target && guard < 200 {
            guard += 1;
            let mut images: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                images.swap(i, j);
            }
            let perm = Perm::from_images(images).unwrap();
            let inv = perm.inverse();
            let candidates = match mode {
                Mode::Plain => perm.fixed_points(),
                Mode::Coset { r } => {
                    let a = coset_reduce(&perm, r).unwrap().involution().fixed_points();
                    let b = coset_reduce(&inv, r).unwrap().involution().fixed_points();
                    a.intersect(&b)
                }
            };
            let mut aug = IndexSet::empty(n);
            for i in candidates.iter0() {
                if rng.gen_bool(0.5) {
                    aug.insert0(i);
                }
            }
            let w = BigRational::new((rng.gen_range(1..=16i64)).into(), 1.into());
            *atoms
                .entry(AugPerm::new(perm.clone(), aug))
                .or_insert_with(Weight::zero) += w.clone();
            *atoms
                .entry(AugPerm::new(inv, aug))
                .or_insert_with(Weight::zero) += w;
        }
        let total: Weight = atoms.values().sum();
        let atoms = atoms.into_iter().map(|(a, w)| (a, w / &total));
        Self::new(n, mode, atoms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&AugPerm, &Weight)> {
        self.atoms.iter()
    }

    pub fn mass(&self, ap: &AugPerm) -> Weight {
        self.atoms.get(ap).cloned().unwrap_or_else(Weight::zero)
    }

    /// Checks `mass(p, J) = mass(p^{-1}, J)` over the whole support.
    pub fn is_augmented_symmetric(&self) -> bool {
        self.atoms.iter().all(|(ap, w)| {
            let back = self.mass(&AugPerm::new(ap.perm.inverse(), ap.aug));
            ((w - back).to_f64().unwrap_or(1.0)).abs() <= 1e-12
        })
    }

    /// The induced measure on permutations: atom weights summed over marks.
    pub fn induced(&self) -> GroupMeasure {
        let mut map: BTreeMap<Perm, Weight> = BTreeMap::new();
        for (ap, w) in &self.atoms {
            *map.entry(ap.perm.clone()).or_insert_with(Weight::zero) += w;
        }
        GroupMeasure::new(self.n, IndexSet::full(self.n), map).unwrap()
    }

    /// Mode-aware inclusion probability: the mass of atoms whose included set
    /// (refresh set in plain mode, move set in coset mode) lies inside `j`.
    pub fn inclusion_probability(&self, j: IndexSet) -> Weight {
        self.atoms
            .iter()
            .filter(|(ap, _)| included_indices(ap, self.mode).is_subset_of(&j))
            .map(|(_, w)| w)
            .sum()
    }

    /// The mass of atoms whose refresh set lies inside `j`, regardless of
    /// mode. This is the inclusion probability that enters the exact
    /// subset decomposition for both chain families.
    pub fn refresh_inclusion_probability(&self, j: IndexSet) -> Weight {
        self.atoms
            .iter()
            .filter(|(ap, _)| ap.refresh_set().is_subset_of(&j))
            .map(|(_, w)| w)
            .sum()
    }

    /// Conditions on the event that the refresh set stays inside `j`,
    /// renormalizing exactly. Returns the conditional augmented measure and
    /// its induced measure on permutations moving only points of `j`.
    pub fn conditional(&self, j: IndexSet) -> Result<(AugmentedMeasure, GroupMeasure)> {
        let total = self.refresh_inclusion_probability(j);
        if total.is_zero() {
            return Err(Error::Unconditionable);
        }
        let atoms: BTreeMap<AugPerm, Weight> = self
            .atoms
            .iter()
            .filter(|(ap, _)| ap.refresh_set().is_subset_of(&j))
            .map(|(ap, w)| (ap.clone(), w / &total))
            .collect();
        let mut induced: BTreeMap<Perm, Weight> = BTreeMap::new();
        for (ap, w) in &atoms {
            *induced.entry(ap.perm.clone()).or_insert_with(Weight::zero) += w;
        }
        let cond = AugmentedMeasure { n: self.n, mode: self.mode, atoms };
        let group = GroupMeasure::new(self.n, j, induced)?;
        Ok((cond, group))
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let text = serde_json::to_string_pretty(&MeasureFile::from(self))?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        let raw: MeasureFile = serde_json::from_str(&text)?;
        raw.build()
    }
}

fn rack_stabilizer(n: usize, r: usize) -> Vec<Perm> {
    let mut out = Vec::new();
    for a in Perm::enumerate(r) {
        for b in Perm::enumerate(n - r) {
            let mut images: Vec<usize> = (0..r).map(|i| a.apply(i)).collect();
            images.extend((0..n - r).map(|i| r + b.apply(i)));
            out.push(Perm::from_images(images).unwrap());
        }
    }
    out
}

/// On-disk measure format:
/// `{"n": 2, "mode": "plain", "atoms": [{"pi": "(1 2)", "J": [], "w": 0.5}]}`.
#[derive(Serialize, Deserialize)]
struct MeasureFile {
    n: usize,
    mode: Mode,
    atoms: Vec<AtomRecord>,
}

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    pi: String,
    #[serde(rename = "J")]
    j: Vec<usize>,
    w: f64,
}

impl From<&AugmentedMeasure> for MeasureFile {
    fn from(m: &AugmentedMeasure) -> Self {
        MeasureFile {
            n: m.n,
            mode: m.mode,
            atoms: m
                .atoms
                .iter()
                .map(|(ap, w)| AtomRecord {
                    pi: ap.perm.to_string(),
                    j: ap.aug.iter().collect(),
                    w: weight_to_f64(w),
                })
                .collect(),
        }
    }
}

impl MeasureFile {
    fn build(self) -> Result<AugmentedMeasure> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for rec in &self.atoms {
            let perm = Perm::parse_cycles(&rec.pi, self.n)?;
            let aug = IndexSet::from_elems(&rec.j, self.n)?;
            atoms.push((AugPerm::new(perm, aug), weight_from_f64(rec.w)?));
        }
        AugmentedMeasure::new(self.n, self.mode, atoms)
    }
}
