//! Mixing-time analysis for two families of label-refreshing Markov chains.
//!
//! The first family lives on `G^n x S_n`: a state is a vector of labels from a
//! finite alphabet `G` together with a permutation of `n` positions. Each step
//! draws an *augmented permutation* — a permutation plus a set of marked fixed
//! points — from a step measure, multiplies it onto the current permutation,
//! and redraws the labels at every position the step touched (moved or marked)
//! i.i.d. from an alphabet distribution `P`.
//!
//! The second family is the projection of the first onto
//! `G^n x (S_n / (S_r x S_{n-r}))`: the permutation coordinate is collapsed to
//! the r-subset it carries (a two-rack Bernoulli–Laplace picture), while labels
//! refresh exactly as before.
//!
//! For both families the crate computes the chi-square (L²) distance to
//! stationarity two independent ways:
//!
//! * a brute-force oracle ([`engine`]): build the full transition kernel,
//!   power it, and read distances off the state space directly;
//! * an exact subset decomposition ([`decompose`]): a sum over subsets
//!   `J ⊆ {1..n}` of escape probabilities and conditional sub-walk distances,
//!   obtained by Möbius inversion on the subset lattice.
//!
//! Closed-form upper bounds, mixing-time thresholds and lower-bound indicator
//! terms derived from the decomposition live in [`bounds`]; a seeded Monte
//! Carlo runner in [`simulate`]; and the formula-vs-oracle verification grid
//! in [`verify`].

pub mod bounds;
pub mod coset;
pub mod decompose;
pub mod engine;
pub mod measure;
pub mod perm;
pub mod simulate;
pub mod subset;
pub mod verify;

pub use coset::{coset_reduce, CosetRep};
pub use decompose::{
    coset_l2_decomposition, mobius_invert, wreath_l2_decomposition, Decomposition,
    DecompositionReport,
};
pub use engine::{
    build_coset_kernel, build_wreath_kernel, check_detailed_balance, chi_square_identity, kstep,
    lp_distance, tv_distance, Kernel, Space,
};
pub use measure::{AlphabetMeasure, AugPerm, AugmentedMeasure, GroupMeasure, Mode, Weight};
pub use perm::Perm;
pub use subset::IndexSet;

/// Largest `n` the subset-lattice machinery will enumerate (2^n terms).
pub const MAX_N: usize = 12;

/// Largest state space the dense oracle will build.
pub const MAX_STATES: usize = 200_000;

/// Largest `|J|` for which conditional sub-walk distances are computed by
/// dense convolution over the symmetric group on `J` (order `|J|!`).
pub const MAX_SUBWALK: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("conditioning event has probability zero")]
    Unconditionable,
    #[error("kernel is not reversible (max detailed-balance violation {0:.3e})")]
    NotReversible(f64),
    #[error("reference distribution vanishes at rank {0}")]
    ZeroReference(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
