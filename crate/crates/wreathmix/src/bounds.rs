//! Closed-form corollaries of the subset decomposition: lattice-maximum
//! tables, the finite-sum upper bounds they induce, mixing-time thresholds
//! with exponential envelopes, and the lower-bound indicator terms.
//!
//! The mixing-time expressions all use the natural logarithm. The envelopes
//! carry an unspecified universal constant; callers supply one (default 1)
//! and results are labeled "up to a universal constant" in the CLI output.

use num::{ToPrimitive, Zero};
use serde::Serialize;

use crate::decompose::SubwalkCache;
use crate::measure::{weight_to_f64, AugmentedMeasure, Weight};
use crate::subset::{binomial, factorial, IndexSet};
use crate::{Error, Result, MAX_N};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Wreath,
    Coset,
}

/// Lattice maxima feeding the finite-sum bounds: `mu_max[j]` is the largest
/// inclusion probability over subsets of size `j` (mode-aware, so the coset
/// family aggregates move-set probabilities), `d_max[j]` the largest
/// conditional sub-walk distance, and `b` the overall distance maximum.
#[derive(Clone, Debug, Serialize)]
pub struct BoundTables {
    pub n: usize,
    pub r: Option<usize>,
    pub k: usize,
    pub mu_max: Vec<f64>,
    pub d_max: Vec<f64>,
    pub b: f64,
}

/// Exact maxima over the subset lattice at time `k`.
pub fn aggregate_tables(q: &AugmentedMeasure, k: usize) -> Result<BoundTables> {
    let n = q.n();
    if n > MAX_N {
        return Err(Error::Capacity(format!(
            "subset enumeration over n = {n} exceeds the cap {MAX_N}"
        )));
    }
    let mut mu_max = vec![0.0f64; n + 1];
    let mut d_max = vec![0.0f64; n + 1];
    let mut cache = SubwalkCache::new(q);
    for mask in 0u32..1 << n {
        let j = IndexSet::from_mask(mask, n);
        let size = j.len();
        let mu = weight_to_f64(&q.inclusion_probability(j));
        mu_max[size] = mu_max[size].max(mu);
        let refresh_mu = q.refresh_inclusion_probability(j);
        if !Weight::is_zero(&refresh_mu) {
            d_max[size] = d_max[size].max(cache.distance(j, k)?);
        }
    }
    let b = d_max.iter().cloned().fold(0.0, f64::max);
    Ok(BoundTables { n, r: q.mode().r(), k, mu_max, d_max, b })
}

/// Finite-sum upper bound for the squared L² distance of the wreath family:
///
/// ```text
/// B(n,k) Σ_{j=0}^{n} C(n,j) (n!/j!) (1/p_min − 1)^{n−j} M(j)^{2k}
///      + Σ_{j=0}^{n−1} C(n,j) (n!/j!) (1/p_min − 1)^{n−j} M(j)^{2k}
/// ```
///
/// The value also dominates four times the squared total variation distance.
pub fn wreath_table_bound(t: &BoundTables, p_min: f64) -> f64 {
    let n = t.n;
    let inv = 1.0 / p_min - 1.0;
    let coeff = |j: usize| {
        binomial(n, j) as f64 * (factorial(n) / factorial(j)) as f64
            * inv.powi((n - j) as i32)
            * t.mu_max[j].powi(2 * t.k as i32)
    };
    let first: f64 = (0..=n).map(coeff).sum();
    let second: f64 = (0..n).map(coeff).sum();
    t.b * first + second
}

/// Coset-family analogue, summed over rack splits `(i, j)`:
///
/// ```text
/// B̃(n,k) Σ_{i=0}^{r} Σ_{j=0}^{n−r} C(r,i) C(n−r,j) [C(n,r)/C(i+j,i)]
///                       (1/p_min − 1)^{n−(i+j)} M̃(i+j)^{2k}  +  (same sum)
/// ```
///
/// with the term `(i,j) = (r, n−r)` excluded from the second summation.
pub fn coset_table_bound(t: &BoundTables, p_min: f64) -> Result<f64> {
    let n = t.n;
    let r = t
        .r
        .ok_or_else(|| Error::ModeMismatch("coset bound needs coset tables".into()))?;
    let inv = 1.0 / p_min - 1.0;
    let coeff = |i: usize, j: usize| {
        (binomial(r, i) * binomial(n - r, j)) as f64 * binomial(n, r) as f64
            / binomial(i + j, i) as f64
            * inv.powi((n - i - j) as i32)
            * t.mu_max[i + j].powi(2 * t.k as i32)
    };
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..=r {
        for j in 0..=n - r {
            let v = coeff(i, j);
            first += v;
            if !(i == r && j == n - r) {
                second += v;
            }
        }
    }
    Ok(t.b * first + second)
}

/// A mixing-time threshold together with the bound value it guarantees.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ThresholdBound {
    pub threshold_k: f64,
    pub bound: f64,
}

/// Under the contraction hypothesis `M(j) <= (j/n)^m` for all `j`, once
/// `k >= (1/m) n ln n + (1/2m) n ln(1/p_min − 1) + (1/m) c n` the total
/// variation distance (and half the L² distance) is at most
/// `(B(n,k) + e^{−2c})^{1/2}`. `b_value` is `B(n,k)` from the tables.
pub fn wreath_contraction_bound(
    n: usize,
    p_min: f64,
    m: f64,
    c: f64,
    b_value: f64,
) -> Result<ThresholdBound> {
    check_cm(c, m, p_min)?;
    let nf = n as f64;
    let threshold_k =
        nf * nf.ln() / m + nf * (1.0 / p_min - 1.0).ln() / (2.0 * m) + c * nf / m;
    Ok(ThresholdBound {
        threshold_k,
        bound: (b_value + (-2.0 * c).exp()).sqrt(),
    })
}

/// Coset analogue: once `k >= (1/2m) n (ln n + ln(1/p_min − 1) + c)` the
/// bound is `2 (B̃(n,k) + e^{−c})^{1/2}`.
pub fn coset_contraction_bound(
    n: usize,
    p_min: f64,
    m: f64,
    c: f64,
    b_value: f64,
) -> Result<ThresholdBound> {
    check_cm(c, m, p_min)?;
    let nf = n as f64;
    let threshold_k = nf * (nf.ln() + (1.0 / p_min - 1.0).ln() + c) / (2.0 * m);
    Ok(ThresholdBound {
        threshold_k,
        bound: 2.0 * (b_value + (-c).exp()).sqrt(),
    })
}

fn check_cm(c: f64, m: f64, p_min: f64) -> Result<()> {
    if c <= 0.0 {
        return Err(Error::InvalidParameter("c must be positive".into()));
    }
    if m <= 0.0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p_min) || p_min == 0.0 {
        return Err(Error::InvalidParameter(format!("p_min = {p_min} out of (0,1]")));
    }
    Ok(())
}

/// Whether the law of the included set factors as "draw a size, then a
/// uniform set of that size", together with the size mass function.
#[derive(Clone, Debug, Serialize)]
pub struct SizeUniformity {
    pub is_size_uniform: bool,
    /// `f[l]` = total mass of included sets of size `l` (index 0 included
    /// for inspection; size uniformity requires `f[0] = 0`).
    pub f: Vec<f64>,
}

pub fn size_uniform_check(q: &AugmentedMeasure) -> SizeUniformity {
    let n = q.n();
    // Exact law of the included set.
    let mut law: Vec<Weight> = vec![Weight::zero(); 1 << n];
    for (ap, w) in q.atoms() {
        law[crate::measure::included_indices(ap, q.mode()).mask() as usize] += w;
    }
    let mut f = vec![0.0; n + 1];
    let mut per_size: Vec<Option<Weight>> = vec![None; n + 1];
    let mut uniform = true;
    for (mask, w) in law.iter().enumerate() {
        let size = (mask as u32).count_ones() as usize;
        f[size] += weight_to_f64(w);
        if size == 0 {
            if !w.is_zero() {
                uniform = false;
            }
            continue;
        }
        match &per_size[size] {
            None => per_size[size] = Some(w.clone()),
            Some(seen) => {
                if ((seen - w).to_f64().unwrap_or(1.0)).abs() > 1e-12 {
                    uniform = false;
                }
            }
        }
    }
    SizeUniformity { is_size_uniform: uniform, f }
}

/// A mixing-time evaluation point: the step count prescribed for decay
/// parameter `c` and the envelope value there, up to a universal constant.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MixingPoint {
    pub k: f64,
    pub bound: f64,
}

/// Transposition-measure wreath chain: `k = ½ n ln n + ¼ n ln(1/p_min − 1)
/// + ½ c n` steps suffice for an `e^{−c}`-shaped envelope.
pub fn wreath_transposition_mixing(
    n: usize,
    p_min: f64,
    c: f64,
    envelope_const: f64,
) -> Result<MixingPoint> {
    check_cm(c, 1.0, p_min)?;
    let nf = n as f64;
    Ok(MixingPoint {
        k: 0.5 * nf * nf.ln() + 0.25 * nf * (1.0 / p_min - 1.0).ln() + 0.5 * c * nf,
        bound: envelope_const * (-c).exp(),
    })
}

/// Bernoulli–Laplace coset chain: `k = ¼ n (ln n + ln(1/p_min − 1) + c)`
/// steps suffice for an `e^{−c/2}`-shaped envelope.
pub fn bernoulli_laplace_mixing(
    n: usize,
    p_min: f64,
    c: f64,
    envelope_const: f64,
) -> Result<MixingPoint> {
    check_cm(c, 1.0, p_min)?;
    let nf = n as f64;
    Ok(MixingPoint {
        k: 0.25 * nf * (nf.ln() + (1.0 / p_min - 1.0).ln() + c),
        bound: envelope_const * (-c / 2.0).exp(),
    })
}

/// The single aggregated escape term at subset size `n − 1` when the
/// inclusion probabilities are `(|J|/n)²`: a lower-bound witness for the
/// squared L² distance.
pub fn lower_indicator(family: Family, n: usize, p_min: f64, k: usize) -> f64 {
    let nf = n as f64;
    let shape = (1.0 / p_min - 1.0) * (1.0 - 1.0 / nf).powi(4 * k as i32);
    match family {
        Family::Wreath => nf * nf * shape,
        Family::Coset => 2.0 * nf * shape,
    }
}

/// Published decay envelopes for the four concrete reference chains,
/// evaluated at integer step counts by inverting the threshold for `c`.
/// Plot-ready series only; never used in assertions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceCurve {
    /// Random transpositions on the symmetric group alone:
    /// `k = ½ n ln n + c n`, envelope `e^{−2c}`.
    Transpositions,
    /// Wreath chain with a uniform alphabet of size `g`:
    /// `k = ½ n ln n + ¼ n ln(g−1) + c n`, envelope `e^{−2c}`.
    UniformWreath { g: usize },
    /// Two-rack chain without labels: `k = ¼ n (ln n + c)`, envelope `e^{−2c}`.
    BernoulliLaplace,
    /// Two-rack chain with a uniform two-letter alphabet:
    /// `k = ¼ n (ln n + c)`, envelope `e^{−c/2}`.
    SignedBernoulliLaplace,
}

pub fn reference_curve_value(curve: ReferenceCurve, n: usize, k: f64) -> f64 {
    let nf = n as f64;
    match curve {
        ReferenceCurve::Transpositions => {
            let c = (k - 0.5 * nf * nf.ln()) / nf;
            (-2.0 * c).exp()
        }
        ReferenceCurve::UniformWreath { g } => {
            let c = (k - 0.5 * nf * nf.ln() - 0.25 * nf * ((g as f64) - 1.0).ln()) / nf;
            (-2.0 * c).exp()
        }
        ReferenceCurve::BernoulliLaplace => {
            let c = 4.0 * k / nf - nf.ln();
            (-2.0 * c).exp()
        }
        ReferenceCurve::SignedBernoulliLaplace => {
            let c = 4.0 * k / nf - nf.ln();
            (-c / 2.0).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{coset_l2_decomposition, wreath_l2_decomposition};
    use crate::measure::{AlphabetMeasure, Mode};

    #[test]
    fn tables_for_the_transposition_family() {
        for n in 2..=5 {
            let q = AugmentedMeasure::transpositions(n).unwrap();
            let t = aggregate_tables(&q, 2).unwrap();
            for j in 0..=n {
                let expect = (j * j) as f64 / (n * n) as f64;
                assert!((t.mu_max[j] - expect).abs() <= 1e-15);
            }
            assert_eq!(t.mu_max[n], 1.0);
            // Tables are nondecreasing in subset size.
            for j in 1..=n {
                assert!(t.mu_max[j] >= t.mu_max[j - 1]);
            }
            // Two-point conditional walks are exactly mixed for k >= 1.
            assert_eq!(t.d_max[2], 0.0);
            assert_eq!(t.b, t.d_max.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn wreath_bound_matches_hand_expansion_n2() {
        let q = AugmentedMeasure::transpositions(2).unwrap();
        let p_min = 0.3;
        for k in 1..=4 {
            let t = aggregate_tables(&q, k).unwrap();
            let got = wreath_table_bound(&t, p_min);
            let inv = 1.0 / p_min - 1.0;
            let decay = (1.0f64 / 16.0).powi(k as i32);
            let expect = t.b * (4.0 * inv * decay + 1.0) + 4.0 * inv * decay;
            assert!((got - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }

    #[test]
    fn bounds_dominate_the_exact_distance() {
        let p = AlphabetMeasure::from_f64(&[0.7, 0.3]).unwrap();
        let q = AugmentedMeasure::transpositions(3).unwrap();
        for k in 1..=6 {
            let t = aggregate_tables(&q, k).unwrap();
            let bound = wreath_table_bound(&t, p.p_min());
            let exact = wreath_l2_decomposition(&q, &p, &[1, 1, 1], k)
                .unwrap()
                .l2_squared;
            assert!(bound >= exact - 1e-12);
        }
        let q = AugmentedMeasure::bernoulli_laplace(4, 2).unwrap();
        for k in 1..=6 {
            let t = aggregate_tables(&q, k).unwrap();
            let bound = coset_table_bound(&t, p.p_min()).unwrap();
            let exact = coset_l2_decomposition(&q, &p, &[1; 4], k)
                .unwrap()
                .l2_squared;
            assert!(bound >= exact - 1e-12);
        }
    }

    #[test]
    fn table_bound_respects_the_contraction_hypothesis_chain() {
        // When mu_max(j) <= (j/n)^m, replacing the table by the hypothesis
        // envelope can only increase the finite-sum bound. The transposition
        // family has mu_max(j) = (j/n)^2 <= (j/n)^1, strict inside.
        let n = 4;
        let q = AugmentedMeasure::transpositions(n).unwrap();
        for k in 1..=5 {
            let actual = aggregate_tables(&q, k).unwrap();
            let mut envelope = actual.clone();
            for j in 0..=n {
                envelope.mu_max[j] = j as f64 / n as f64;
            }
            let lhs = wreath_table_bound(&actual, 0.3);
            let rhs = wreath_table_bound(&envelope, 0.3);
            assert!(lhs <= rhs + 1e-12, "k = {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn table_bound_decays_with_k_for_uniform_alphabet() {
        let q = AugmentedMeasure::transpositions(3).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=12 {
            let t = aggregate_tables(&q, k).unwrap();
            let v = wreath_table_bound(&t, 0.5);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn contraction_threshold_arithmetic() {
        let tb = wreath_contraction_bound(10, 0.5, 2.0, 1.0, 0.0).unwrap();
        let expect = 0.5 * 10.0 * 10.0f64.ln() + 5.0;
        assert!((tb.threshold_k - expect).abs() <= 1e-12);
        assert!((tb.threshold_k - 16.5129).abs() < 1e-3);
        // With B = 0 the bound collapses to e^{-c}.
        assert!((tb.bound - (-1.0f64).exp()).abs() <= 1e-15);
        let cb = coset_contraction_bound(10, 0.5, 2.0, 1.0, 0.0).unwrap();
        let expect = 10.0 * (10.0f64.ln() + 0.0 + 1.0) / 4.0;
        assert!((cb.threshold_k - expect).abs() <= 1e-12);
        assert!((cb.bound - 2.0 * (-1.0f64).exp().sqrt()).abs() <= 1e-15);
        assert!(wreath_contraction_bound(10, 0.5, 2.0, 0.0, 0.0).is_err());
        assert!(wreath_contraction_bound(10, 0.5, 2.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn transposition_family_is_size_uniform() {
        for n in 2..=5 {
            let q = AugmentedMeasure::transpositions(n).unwrap();
            let su = size_uniform_check(&q);
            assert!(su.is_size_uniform);
            let nf = n as f64;
            assert!((su.f[1] - 1.0 / nf).abs() <= 1e-15);
            assert!((su.f[2] - (1.0 - 1.0 / nf)).abs() <= 1e-15);
        }
        // A measure with a lopsided included-set law fails the check.
        let q = AugmentedMeasure::random_symmetric(4, Mode::Plain, 3).unwrap();
        let su = size_uniform_check(&q);
        // Sizes must sum to 1 regardless.
        let total: f64 = su.f.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert!(!su.is_size_uniform);
    }

    #[test]
    fn mixing_points_match_published_thresholds() {
        // Uniform alphabet of size g: the wreath threshold becomes
        // ½ n ln n + ¼ n ln(g−1) + ½ c n.
        for g in [2usize, 3, 5] {
            let n = 12;
            let c = 0.8;
            let got = wreath_transposition_mixing(n, 1.0 / g as f64, c, 1.0).unwrap();
            let nf = n as f64;
            let expect =
                0.5 * nf * nf.ln() + 0.25 * nf * ((g - 1) as f64).ln() + 0.5 * c * nf;
            assert!((got.k - expect).abs() <= 1e-12);
            assert!((got.bound - (-c).exp()).abs() <= 1e-15);
        }
        // Two-letter uniform alphabet: the coset threshold is ¼ n (ln n + c).
        let got = bernoulli_laplace_mixing(12, 0.5, 0.8, 1.0).unwrap();
        let expect = 0.25 * 12.0 * (12.0f64.ln() + 0.8);
        assert!((got.k - expect).abs() <= 1e-12);
        assert!((got.bound - (-0.4f64).exp()).abs() <= 1e-15);
    }

    #[test]
    fn lower_indicator_values_and_aggregates() {
        // Hand arithmetic: n = 4, p_min = 0.3, k = 2.
        let got = lower_indicator(Family::Wreath, 4, 0.3, 2);
        let expect = 16.0 * (7.0 / 3.0) * (0.75f64).powi(8);
        assert!((got - expect).abs() <= 1e-12 * expect);

        // Equals the size-(n-1) escape aggregate of the transposition report
        // started from the minimum-probability letter.
        let p = AlphabetMeasure::from_f64(&[0.7, 0.3]).unwrap();
        let q = AugmentedMeasure::transpositions(4).unwrap();
        let x0 = vec![p.min_letter(); 4];
        for k in 1..=4 {
            let rep = wreath_l2_decomposition(&q, &p, &x0, k).unwrap();
            let agg = rep.escape_aggregate(3);
            let ind = lower_indicator(Family::Wreath, 4, p.p_min(), k);
            assert!((agg - ind).abs() <= 1e-12 * (1.0 + ind));
        }

        // Coset analogue with coefficient 2n, against the move-probability
        // reference escape terms.
        let q = AugmentedMeasure::bernoulli_laplace(4, 2).unwrap();
        let x0 = vec![p.min_letter(); 4];
        for k in 1..=4 {
            let rep = coset_l2_decomposition(&q, &p, &x0, k).unwrap();
            let agg = rep.escape_move_aggregate(3);
            let ind = lower_indicator(Family::Coset, 4, p.p_min(), k);
            assert!((agg - ind).abs() <= 1e-12 * (1.0 + ind));
        }

        // The indicator never exceeds the full escape summation it is part
        // of (evaluated on the matching series).
        for k in 1..=4 {
            let rep = wreath_l2_decomposition(
                &AugmentedMeasure::transpositions(4).unwrap(),
                &p,
                &x0,
                k,
            )
            .unwrap();
            assert!(
                lower_indicator(Family::Wreath, 4, p.p_min(), k)
                    <= rep.sum_escape + 1e-12 * (1.0 + rep.sum_escape)
            );
        }
    }

    #[test]
    fn reference_curves_evaluate_their_envelopes() {
        let n = 20;
        let nf = 20.0f64;
        // At k exactly on threshold with c = 1, each curve returns its shape.
        let k = 0.5 * nf * nf.ln() + nf;
        assert!((reference_curve_value(ReferenceCurve::Transpositions, n, k)
            - (-2.0f64).exp())
        .abs()
            <= 1e-12);
        let k = 0.5 * nf * nf.ln() + 0.25 * nf * 2.0f64.ln() + nf;
        assert!((reference_curve_value(ReferenceCurve::UniformWreath { g: 3 }, n, k)
            - (-2.0f64).exp())
        .abs()
            <= 1e-12);
        let k = 0.25 * nf * (nf.ln() + 1.0);
        assert!((reference_curve_value(ReferenceCurve::BernoulliLaplace, n, k)
            - (-2.0f64).exp())
        .abs()
            <= 1e-12);
        assert!((reference_curve_value(ReferenceCurve::SignedBernoulliLaplace, n, k)
            - (-0.5f64).exp())
        .abs()
            <= 1e-12);
    }
}
