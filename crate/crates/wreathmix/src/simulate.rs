//! Seeded Monte Carlo runner for both chain families.
//!
//! Each replica runs on its own counter-based stream (one ChaCha stream per
//! replica index), so results are independent of execution order and the
//! same seed reproduces the same trajectory set bit for bit. Steps sample
//! atoms and refresh letters through alias tables.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, WeightedAliasIndex};
use serde::Serialize;

use crate::engine::Space;
use crate::measure::{weight_to_f64, AlphabetMeasure, AugPerm, AugmentedMeasure, Mode};
use crate::subset::IndexSet;
use crate::{Error, Result, MAX_STATES};

#[derive(Clone, Debug)]
pub struct SimConfig<'a> {
    pub measure: &'a AugmentedMeasure,
    pub alphabet: &'a AlphabetMeasure,
    /// Start labels (0-based letters); the arrangement starts at identity.
    pub x0: Vec<usize>,
    pub steps: usize,
    pub replicas: usize,
    pub seed: u64,
}

/// End-state counts plus the census of touched-position unions.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub space: Space,
    /// Final-state counts by rank.
    pub counts: Vec<u64>,
    /// Census of the union of refresh sets over each trajectory.
    pub refresh_census: HashMap<u32, u64>,
    /// Census of the union of move sets (coset family only).
    pub move_census: Option<HashMap<u32, u64>>,
    pub replicas: usize,
    pub seed: u64,
}

impl SimOutput {
    pub fn empirical(&self) -> Vec<f64> {
        let total = self.replicas as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Fraction of trajectories whose recorded union stayed inside `j`.
    /// Uses the move census when present (the union tracked by the escape
    /// probabilities of the coset family), else the refresh census.
    pub fn union_inside_frequency(&self, j: IndexSet) -> f64 {
        let census = self.move_census.as_ref().unwrap_or(&self.refresh_census);
        let hits: u64 = census
            .iter()
            .filter(|(&mask, _)| IndexSet::from_mask(mask, j.n()).is_subset_of(&j))
            .map(|(_, &c)| c)
            .sum();
        hits as f64 / self.replicas as f64
    }

    /// Per-state counts as CSV: `rank,count,state`.
    pub fn counts_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "rank,count,state")?;
        for (rank, &c) in self.counts.iter().enumerate() {
            writeln!(w, "{rank},{c},\"{}\"", self.space.pretty(rank))?;
        }
        Ok(())
    }
}

pub fn run_trajectories(cfg: &SimConfig) -> Result<SimOutput> {
    let q = cfg.measure;
    let p = cfg.alphabet;
    let n = q.n();
    if cfg.replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be >= 1".into()));
    }
    let space = match q.mode() {
        Mode::Plain => Space::Wreath { n, g: p.size() },
        Mode::Coset { r } => Space::Coset { n, r, g: p.size() },
    };
    if space.size() > MAX_STATES {
        return Err(Error::Capacity(format!(
            "state space has {} states, cap is {MAX_STATES}",
            space.size()
        )));
    }
    if cfg.x0.len() != n || cfg.x0.iter().any(|&x| x >= p.size()) {
        return Err(Error::InvalidParameter(format!(
            "start labels {:?} do not fit n = {n}, |G| = {}",
            cfg.x0,
            p.size()
        )));
    }

    // Precompute atoms with their refresh masks and, in coset mode, the move
    // masks and subset images.
    struct PreparedAtom {
        perm_images: Vec<usize>,
        refresh: Vec<usize>,
        refresh_mask: u32,
        move_mask: u32,
    }
    let r_opt = q.mode().r();
    let prepared: Vec<PreparedAtom> = q
        .atoms()
        .map(|(ap, _): (&AugPerm, _)| {
            let refresh_set = ap.refresh_set();
            PreparedAtom {
                perm_images: ap.perm.images().to_vec(),
                refresh: refresh_set.iter0().collect(),
                refresh_mask: refresh_set.mask(),
                move_mask: r_opt.map(|r| ap.move_set(r).mask()).unwrap_or(0),
            }
        })
        .collect();
    let atom_weights: Vec<f64> = q.atoms().map(|(_, w)| weight_to_f64(w)).collect();
    let atom_alias = WeightedAliasIndex::new(atom_weights)
        .map_err(|e| Error::InvalidMeasure(format!("alias table: {e}")))?;
    let letter_alias = WeightedAliasIndex::new(p.probs_f64().to_vec())
        .map_err(|e| Error::InvalidMeasure(format!("alias table: {e}")))?;

    let mut counts = vec![0u64; space.size()];
    let mut refresh_census: HashMap<u32, u64> = HashMap::new();
    let mut move_census: HashMap<u32, u64> = HashMap::new();
    let base_subset: u32 = r_opt.map(|r| (1u32 << r) - 1).unwrap_or(0);

    for replica in 0..cfg.replicas {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(replica as u64 + 1);
        let mut labels = cfg.x0.clone();
        // Wreath: images of the running permutation. Coset: carried subset.
        let mut perm: Vec<usize> = (0..n).collect();
        let mut subset_mask: u32 = base_subset;
        let mut refresh_union: u32 = 0;
        let mut move_union: u32 = 0;
        for _ in 0..cfg.steps {
            let atom = &prepared[atom_alias.sample(&mut rng)];
            match q.mode() {
                Mode::Plain => {
                    // state ← step ∘ state.
                    for slot in perm.iter_mut() {
                        *slot = atom.perm_images[*slot];
                    }
                }
                Mode::Coset { .. } => {
                    let mut next = 0u32;
                    let mut m = subset_mask;
                    while m != 0 {
                        let i = m.trailing_zeros() as usize;
                        m &= m - 1;
                        next |= 1 << atom.perm_images[i];
                    }
                    subset_mask = next;
                }
            }
            for &pos in &atom.refresh {
                labels[pos] = letter_alias.sample(&mut rng);
            }
            refresh_union |= atom.refresh_mask;
            move_union |= atom.move_mask;
        }
        let rank = match q.mode() {
            Mode::Plain => {
                let pi = crate::perm::Perm::from_images(perm).unwrap();
                space.rank_wreath(&labels, &pi)
            }
            Mode::Coset { .. } => {
                space.rank_coset(&labels, IndexSet::from_mask(subset_mask, n))
            }
        };
        counts[rank] += 1;
        *refresh_census.entry(refresh_union).or_insert(0) += 1;
        if r_opt.is_some() {
            *move_census.entry(move_union).or_insert(0) += 1;
        }
    }
    Ok(SimOutput {
        space,
        counts,
        refresh_census,
        move_census: r_opt.map(|_| move_census),
        replicas: cfg.replicas,
        seed: cfg.seed,
    })
}

/// Plug-in total variation estimate with a bootstrap calibration: `tv` is
/// the observed distance, `boot_mean`/`se` the mean and standard deviation
/// of the statistic over multinomial resamples of the empirical law (these
/// capture both the sampling bias and spread of the plug-in estimator).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TvEstimate {
    pub tv: f64,
    pub boot_mean: f64,
    pub se: f64,
    pub resamples: usize,
}

pub fn estimate_tv(counts: &[u64], exact: &[f64], seed: u64) -> Result<TvEstimate> {
    if counts.len() != exact.len() {
        return Err(Error::InvalidParameter("length mismatch".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let n = total as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let tv = crate::engine::tv_distance(&empirical, exact);

    const RESAMPLES: usize = 200;
    let alias = WeightedAliasIndex::new(empirical.clone())
        .map_err(|e| Error::InvalidParameter(format!("alias table: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x626f_6f74);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut resampled = vec![0u64; counts.len()];
    for _ in 0..RESAMPLES {
        resampled.iter_mut().for_each(|c| *c = 0);
        for _ in 0..total {
            resampled[alias.sample(&mut rng)] += 1;
        }
        // Distance of the resample to the *empirical* law: the bootstrap
        // proxy for the sampling distribution of the plug-in statistic.
        let d: f64 = resampled
            .iter()
            .zip(&empirical)
            .map(|(&c, &e)| (c as f64 / n - e).max(0.0))
            .sum();
        sum += d;
        sum_sq += d * d;
    }
    let mean = sum / RESAMPLES as f64;
    let var = (sum_sq / RESAMPLES as f64 - mean * mean).max(0.0);
    Ok(TvEstimate { tv, boot_mean: mean, se: var.sqrt(), resamples: RESAMPLES })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{build_wreath_kernel, kstep, tv_distance};
    use num::ToPrimitive;

    fn config<'a>(
        q: &'a AugmentedMeasure,
        p: &'a AlphabetMeasure,
        steps: usize,
        replicas: usize,
        seed: u64,
    ) -> SimConfig<'a> {
        SimConfig {
            measure: q,
            alphabet: p,
            x0: vec![0; q.n()],
            steps,
            replicas,
            seed,
        }
    }

    #[test]
    fn zero_steps_is_a_point_mass() {
        let q = AugmentedMeasure::transpositions(3).unwrap();
        let p = AlphabetMeasure::uniform(2).unwrap();
        for seed in [0u64, 7, 99] {
            let out = run_trajectories(&config(&q, &p, 0, 500, seed)).unwrap();
            let start = out.space.start_rank(&[0, 0, 0]).unwrap();
            assert_eq!(out.counts[start], 500);
            assert_eq!(out.refresh_census.get(&0), Some(&500));
        }
    }

    #[test]
    fn fixed_seed_reproduces_everything() {
        let q = AugmentedMeasure::bernoulli_laplace(3, 1).unwrap();
        let p = AlphabetMeasure::from_f64(&[0.7, 0.3]).unwrap();
        let a = run_trajectories(&config(&q, &p, 6, 2000, 42)).unwrap();
        let b = run_trajectories(&config(&q, &p, 6, 2000, 42)).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.refresh_census, b.refresh_census);
        assert_eq!(a.move_census, b.move_census);
        let c = run_trajectories(&config(&q, &p, 6, 2000, 43)).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn empirical_law_approaches_the_exact_step_distribution() {
        // Uniform-envelope check against the exact oracle.
        let q = AugmentedMeasure::transpositions(3).unwrap();
        let p = AlphabetMeasure::uniform(2).unwrap();
        let replicas = 40_000;
        let out = run_trajectories(&config(&q, &p, 5, replicas, 1)).unwrap();
        let kernel = build_wreath_kernel(&q, &p).unwrap();
        let start = kernel.space().start_rank(&[0, 0, 0]).unwrap();
        let exact = kstep(&kernel, start, 5);
        let tv = tv_distance(&out.empirical(), &exact);
        let envelope =
            3.0 * ((2.0 * kernel.dim() as f64).ln() / (2.0 * replicas as f64)).sqrt();
        assert!(tv <= envelope, "tv = {tv}, envelope = {envelope}");
    }

    #[test]
    fn union_census_frequencies_track_inclusion_probabilities() {
        let q = AugmentedMeasure::transpositions(3).unwrap();
        let p = AlphabetMeasure::uniform(2).unwrap();
        let replicas = 50_000;
        let k = 4;
        let out = run_trajectories(&config(&q, &p, k, replicas, 11)).unwrap();
        for mask in 1u32..8 {
            let j = IndexSet::from_mask(mask, 3);
            let mu = q
                .refresh_inclusion_probability(j)
                .to_f64()
                .unwrap();
            let expect = mu.powi(k as i32);
            let freq = out.union_inside_frequency(j);
            let sigma = (expect * (1.0 - expect) / replicas as f64).sqrt();
            assert!(
                (freq - expect).abs() <= 4.0 * sigma + 1e-9,
                "J = {j}: freq {freq} vs {expect}"
            );
        }
    }

    #[test]
    fn coset_empirical_law_approaches_the_exact_step_distribution() {
        use crate::engine::build_coset_kernel;
        let q = AugmentedMeasure::bernoulli_laplace(3, 1).unwrap();
        let p = AlphabetMeasure::from_f64(&[0.6, 0.4]).unwrap();
        let replicas = 40_000;
        let out = run_trajectories(&config(&q, &p, 4, replicas, 9)).unwrap();
        let kernel = build_coset_kernel(&q, &p).unwrap();
        let start = kernel.space().start_rank(&[0, 0, 0]).unwrap();
        let exact = kstep(&kernel, start, 4);
        let tv = tv_distance(&out.empirical(), &exact);
        let envelope =
            3.0 * ((2.0 * kernel.dim() as f64).ln() / (2.0 * replicas as f64)).sqrt();
        assert!(tv <= envelope, "tv = {tv}, envelope = {envelope}");
    }

    #[test]
    fn coset_move_census_tracks_move_inclusion_probabilities() {
        // The recorded move-set unions of the two-rack chain are confined to
        // J with probability exactly mu_move(J)^k = (|J|/n)^{2k}.
        let q = AugmentedMeasure::bernoulli_laplace(4, 2).unwrap();
        let p = AlphabetMeasure::uniform(2).unwrap();
        let replicas = 50_000;
        let k = 3;
        let out = run_trajectories(&config(&q, &p, k, replicas, 23)).unwrap();
        assert!(out.move_census.is_some());
        for mask in [0b0111u32, 0b1011, 0b1100, 0b0101] {
            let j = IndexSet::from_mask(mask, 4);
            let mu = q.inclusion_probability(j).to_f64().unwrap();
            let expect = mu.powi(k as i32);
            let freq = out.union_inside_frequency(j);
            let sigma = (expect * (1.0 - expect) / replicas as f64).sqrt();
            assert!(
                (freq - expect).abs() <= 4.0 * sigma + 1e-9,
                "J = {j}: freq {freq} vs {expect}"
            );
        }
    }

    #[test]
    fn joint_union_law_recovered_by_mobius_inversion() {
        // Empirical census of (union = C, arrangement = identity) against the
        // Möbius inversion of J ↦ mu(J)^k · P(conditional walk at identity).
        use crate::decompose::mobius_invert;
        let n = 3;
        let k = 2;
        let q = AugmentedMeasure::transpositions(n).unwrap();
        let replicas = 200_000;
        // Track (refresh union, permutation) jointly via a small rerun.
        let mut joint: HashMap<u32, u64> = HashMap::new();
        let prepared: Vec<(Vec<usize>, u32)> = q
            .atoms()
            .map(|(ap, _)| (ap.perm.images().to_vec(), ap.refresh_set().mask()))
            .collect();
        let weights: Vec<f64> = q.atoms().map(|(_, w)| weight_to_f64(w)).collect();
        let alias = WeightedAliasIndex::new(weights).unwrap();
        for replica in 0..replicas {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            rng.set_stream(replica as u64 + 1);
            let mut perm: Vec<usize> = (0..n).collect();
            let mut union = 0u32;
            for _ in 0..k {
                let (images, mask) = &prepared[alias.sample(&mut rng)];
                for slot in perm.iter_mut() {
                    *slot = images[*slot];
                }
                union |= mask;
            }
            if perm.iter().enumerate().all(|(i, &x)| i == x) {
                *joint.entry(union).or_insert(0) += 1;
            }
        }
        // Exact cumulative table g(J) = mu(J)^k P(sub-walk at e after k).
        let mut g = vec![0.0f64; 1 << n];
        for mask in 0u32..1 << n {
            let j = IndexSet::from_mask(mask, n);
            let mu = q.refresh_inclusion_probability(j).to_f64().unwrap();
            if mu == 0.0 {
                continue;
            }
            let (cond, _) = q.conditional(j).unwrap();
            // Probability the conditional walk is at the identity after k
            // steps, by direct convolution over at most 3! elements.
            let m = j.len();
            let dim = crate::subset::factorial(m) as usize;
            let locals: Vec<usize> = j.iter0().collect();
            let mut nu = vec![0.0; dim];
            nu[0] = 1.0;
            for _ in 0..k {
                let mut next = vec![0.0; dim];
                for (ap, w) in cond.atoms() {
                    let local: Vec<usize> = locals
                        .iter()
                        .map(|&e| locals.iter().position(|&x| x == ap.perm.apply(e)).unwrap())
                        .collect();
                    let step = crate::perm::Perm::from_images(local).unwrap();
                    for (zr, &mass) in nu.iter().enumerate() {
                        if mass != 0.0 {
                            let t = step
                                .compose(&crate::perm::Perm::unrank(m, zr))
                                .rank();
                            next[t] += weight_to_f64(w) * mass;
                        }
                    }
                }
                nu = next;
            }
            g[mask as usize] = mu.powi(k) * nu[0];
        }
        let f = mobius_invert(&g, n);
        for mask in 0u32..1 << n {
            let expect = f[mask as usize];
            let got = *joint.get(&mask).unwrap_or(&0) as f64 / replicas as f64;
            let sigma = (expect.max(1e-12) * 1.0 / replicas as f64).sqrt();
            assert!(
                (got - expect).abs() <= 5.0 * sigma + 2e-3,
                "C = {mask:b}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn tv_estimator_basics() {
        // Exactly matching empirical and exact laws give a zero estimate.
        let counts = vec![250u64, 250, 250, 250];
        let exact = vec![0.25; 4];
        let est = estimate_tv(&counts, &exact, 0).unwrap();
        assert_eq!(est.tv, 0.0);
        assert!(est.se > 0.0);

        // Disjoint supports give 1.
        let counts = vec![100u64, 0];
        let exact = vec![0.0, 1.0];
        let est = estimate_tv(&counts, &exact, 0).unwrap();
        assert_eq!(est.tv, 1.0);

        // Consistency: the observed distance to the truth sits inside the
        // bootstrap band around its mean.
        let q = AugmentedMeasure::transpositions(2).unwrap();
        let p = AlphabetMeasure::from_f64(&[0.7, 0.3]).unwrap();
        let out = run_trajectories(&config(&q, &p, 4, 30_000, 3)).unwrap();
        let kernel = build_wreath_kernel(&q, &p).unwrap();
        let start = kernel.space().start_rank(&[0, 0]).unwrap();
        let exact = kstep(&kernel, start, 4);
        let est = estimate_tv(&out.counts, &exact, 3).unwrap();
        assert!((est.tv - est.boot_mean).abs() <= 3.0 * est.se + 1e-9);
    }

    #[test]
    fn conditional_labels_inside_the_union_are_alphabet_distributed() {
        // Among trajectories with refresh union = C, the labels inside C
        // should be i.i.d. from the alphabet law; chi-square goodness of fit
        // at the 0.001 level on the joint cell counts.
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let n = 3;
        let q = AugmentedMeasure::transpositions(n).unwrap();
        let p = AlphabetMeasure::from_f64(&[0.7, 0.3]).unwrap();
        let replicas = 60_000usize;
        let k = 3;
        // Rerun trajectories to track (union, labels) jointly.
        let prepared: Vec<(Vec<usize>, Vec<usize>, u32)> = q
            .atoms()
            .map(|(ap, _)| {
                (
                    ap.perm.images().to_vec(),
                    ap.refresh_set().iter0().collect(),
                    ap.refresh_set().mask(),
                )
            })
            .collect();
        let weights: Vec<f64> = q.atoms().map(|(_, w)| weight_to_f64(w)).collect();
        let alias = WeightedAliasIndex::new(weights).unwrap();
        let letter_alias = WeightedAliasIndex::new(p.probs_f64().to_vec()).unwrap();
        let target: u32 = 0b011; // C = {1,2}
        let mut cells = [0u64; 4];
        let mut hits = 0u64;
        for replica in 0..replicas {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            rng.set_stream(replica as u64 + 1);
            let mut labels = vec![0usize; n];
            let mut union = 0u32;
            for _ in 0..k {
                let (_, refresh, mask) = &prepared[alias.sample(&mut rng)];
                for &pos in refresh {
                    labels[pos] = letter_alias.sample(&mut rng);
                }
                union |= mask;
            }
            if union == target {
                hits += 1;
                cells[labels[0] * 2 + labels[1]] += 1;
            }
        }
        assert!(hits > 500, "conditioning event too rare: {hits}");
        let probs = [0.49, 0.21, 0.21, 0.09];
        let stat: f64 = cells
            .iter()
            .zip(&probs)
            .map(|(&obs, &pr)| {
                let expect = hits as f64 * pr;
                (obs as f64 - expect).powi(2) / expect
            })
            .sum();
        let crit = ChiSquared::new(3.0).unwrap().inverse_cdf(0.999);
        assert!(stat <= crit, "chi-square {stat} above critical {crit}");
    }

    #[test]
    fn erroneous_configs_are_rejected() {
        let q = AugmentedMeasure::transpositions(3).unwrap();
        let p = AlphabetMeasure::uniform(2).unwrap();
        let mut cfg = config(&q, &p, 1, 0, 0);
        assert!(run_trajectories(&cfg).is_err());
        cfg.replicas = 1;
        cfg.x0 = vec![5, 0, 0];
        assert!(run_trajectories(&cfg).is_err());
    }
}
