//! Formula-vs-oracle verification: builds a grid of desk-scale instances for
//! both chain families, computes the squared chi-square distance through the
//! dense kernel oracle and through the subset decomposition, and checks the
//! distance calculus along the way.

use serde::Serialize;

use crate::decompose::Decomposition;
use crate::engine::{
    build_coset_kernel, build_wreath_kernel, lp_distance, tv_distance, Kernel,
};
use crate::measure::{AlphabetMeasure, AugmentedMeasure, Mode};
use crate::Result;

#[derive(Clone, Debug)]
pub enum MeasureChoice {
    Transpositions,
    BernoulliLaplace,
    RandomSymmetric { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct GridCase {
    pub label: String,
    pub mode: Mode,
    pub n: usize,
    pub alphabet: Vec<f64>,
    pub measure: MeasureChoice,
    pub k_max: usize,
    /// Random coset-mode measures exercise a conditional-law subtlety of the
    /// quotient family; deviations there are reported rather than fatal.
    pub soft: bool,
}

/// Outcome of one grid case.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub label: String,
    pub soft: bool,
    /// Relative deviation |formula − oracle| / (1 + oracle) per k = 1..k_max.
    pub deviations: Vec<f64>,
    pub max_rel_dev: f64,
    /// max |TV − L1/2| over the k range.
    pub tv_l1_dev: f64,
    /// Whether TV <= L2/2 held throughout.
    pub tv_le_half_l2: bool,
    /// max relative |chi-square identity − direct L2²|.
    pub chi_vs_l2_dev: f64,
    /// Largest deviation of a kernel row sum from 1.
    pub row_sum_defect: f64,
}

impl CaseReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_dev <= tol
            && self.tv_l1_dev <= 1e-12
            && self.tv_le_half_l2
            && self.chi_vs_l2_dev <= 1e-9
            && self.row_sum_defect <= 1e-12
    }
}

fn alphabet_choices(g: usize) -> Vec<(String, Vec<f64>)> {
    let uniform = vec![1.0 / g as f64; g];
    let mut out = vec![(format!("uniform{g}"), uniform)];
    match g {
        2 => out.push(("p=(0.7,0.3)".into(), vec![0.7, 0.3])),
        3 => out.push(("p=(0.5,0.3,0.2)".into(), vec![0.5, 0.3, 0.2])),
        _ => {}
    }
    out
}

/// Wreath grid: n = 1..4, alphabets of size 2 and 3, the transposition
/// measure plus two randomized inversion-symmetric measures per n.
pub fn wreath_grid(k_max: usize) -> Vec<GridCase> {
    let mut cases = Vec::new();
    for n in 1..=4 {
        for g in [2usize, 3] {
            for (pname, alphabet) in alphabet_choices(g) {
                let mut measures = vec![("transpositions".to_string(), MeasureChoice::Transpositions)];
                for idx in 0..2u64 {
                    let seed = 1000 * n as u64 + 10 * g as u64 + idx;
                    measures.push((
                        format!("random[{seed}]"),
                        MeasureChoice::RandomSymmetric { seed },
                    ));
                }
                for (mname, measure) in measures {
                    cases.push(GridCase {
                        label: format!("wreath n={n} |G|={g} {pname} {mname}"),
                        mode: Mode::Plain,
                        n,
                        alphabet: alphabet.clone(),
                        measure,
                        k_max,
                        soft: false,
                    });
                }
            }
        }
    }
    cases
}

/// Coset grid: all valid (n, r) with n = 2..4, alphabets of size 2 and 3,
/// the Bernoulli–Laplace measure plus one randomized coset-mode measure.
pub fn coset_grid(k_max: usize) -> Vec<GridCase> {
    let mut cases = Vec::new();
    for (n, r) in [(2usize, 1usize), (3, 1), (4, 1), (4, 2)] {
        for g in [2usize, 3] {
            for (pname, alphabet) in alphabet_choices(g) {
                let seed = 9000 + 100 * n as u64 + 10 * r as u64 + g as u64;
                for (mname, measure, soft) in [
                    (
                        "bernoulli-laplace".to_string(),
                        MeasureChoice::BernoulliLaplace,
                        false,
                    ),
                    (
                        format!("random[{seed}]"),
                        MeasureChoice::RandomSymmetric { seed },
                        true,
                    ),
                ] {
                    cases.push(GridCase {
                        label: format!("coset n={n} r={r} |G|={g} {pname} {mname}"),
                        mode: Mode::Coset { r },
                        n,
                        alphabet: alphabet.clone(),
                        measure,
                        k_max,
                        soft,
                    });
                }
            }
        }
    }
    cases
}

pub fn build_case_measure(case: &GridCase) -> Result<AugmentedMeasure> {
    match (&case.measure, case.mode) {
        (MeasureChoice::Transpositions, _) => AugmentedMeasure::transpositions(case.n),
        (MeasureChoice::BernoulliLaplace, Mode::Coset { r }) => {
            AugmentedMeasure::bernoulli_laplace(case.n, r)
        }
        (MeasureChoice::BernoulliLaplace, Mode::Plain) => {
            unreachable!("bernoulli-laplace is coset-mode only")
        }
        (MeasureChoice::RandomSymmetric { seed }, mode) => {
            AugmentedMeasure::random_symmetric(case.n, mode, *seed)
        }
    }
}

/// Runs one case: oracle chi-square per k from the even-step diagonal of the
/// kernel, formula value from the decomposition sweep, plus the distance
/// identities on every step distribution encountered.
pub fn run_case(case: &GridCase) -> Result<CaseReport> {
    let q = build_case_measure(case)?;
    let p = AlphabetMeasure::from_f64(&case.alphabet)?;
    let kernel: Kernel = match case.mode {
        Mode::Plain => build_wreath_kernel(&q, &p)?,
        Mode::Coset { .. } => build_coset_kernel(&q, &p)?,
    };
    let x0 = vec![0usize; case.n];
    let start = kernel.space().start_rank(&x0)?;
    let stat = kernel.space().stationary(&p);

    // One forward evolution to 2·k_max steps; the diagonal at even steps is
    // the reversible-return route to chi-square.
    let mut nu = vec![0.0; kernel.dim()];
    nu[start] = 1.0;
    let mut diag = Vec::with_capacity(case.k_max + 1);
    let mut tv_l1_dev: f64 = 0.0;
    let mut tv_le_half_l2 = true;
    let mut chi_vs_l2_dev: f64 = 0.0;
    let mut direct_l2_sq = Vec::with_capacity(case.k_max + 1);
    for step in 1..=2 * case.k_max {
        nu = kernel.step(&nu);
        if step <= case.k_max {
            let l2 = lp_distance(&nu, &stat, &stat, 2.0)?;
            let l1 = lp_distance(&nu, &stat, &stat, 1.0)?;
            let tv = tv_distance(&nu, &stat);
            tv_l1_dev = tv_l1_dev.max((tv - 0.5 * l1).abs());
            if tv > 0.5 * l2 + 1e-12 {
                tv_le_half_l2 = false;
            }
            direct_l2_sq.push(l2 * l2);
        }
        if step % 2 == 0 {
            diag.push(nu[start]);
        }
    }

    let mut dec = Decomposition::new(&q, &p, &x0)?;
    let mut deviations = Vec::with_capacity(case.k_max);
    for k in 1..=case.k_max {
        let oracle = diag[k - 1] / stat[start] - 1.0;
        let formula = dec.report(k)?.l2_squared;
        deviations.push((formula - oracle).abs() / (1.0 + oracle.abs()));
        if k - 1 < direct_l2_sq.len() {
            let direct = direct_l2_sq[k - 1];
            chi_vs_l2_dev =
                chi_vs_l2_dev.max((oracle - direct).abs() / (1.0 + direct.abs()));
        }
    }
    let max_rel_dev = deviations.iter().cloned().fold(0.0, f64::max);
    Ok(CaseReport {
        label: case.label.clone(),
        soft: case.soft,
        deviations,
        max_rel_dev,
        tv_l1_dev,
        tv_le_half_l2,
        chi_vs_l2_dev,
        row_sum_defect: kernel.row_sum_defect(),
    })
}

/// Full verification sweep. Returns the reports and whether every hard case
/// passed at tolerance `tol` (soft cases are reported but do not fail).
pub fn run_all(k_max: usize, tol: f64) -> Result<(Vec<CaseReport>, bool)> {
    let mut reports = Vec::new();
    let mut ok = true;
    for case in wreath_grid(k_max).into_iter().chain(coset_grid(k_max)) {
        let report = run_case(&case)?;
        if !report.soft && !report.passed(tol) {
            ok = false;
        }
        reports.push(report);
    }
    Ok((reports, ok))
}
