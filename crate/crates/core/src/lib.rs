//! Sample-efficient distinguishability and closeness testing for discrete
//! black-box distributions.
//!
//! The crate is organised bottom-up:
//!
//! * [`dist`] holds finite distributions, their norms and separation
//!   parameters, weakly disjoint decompositions, the hard benchmark pair and
//!   domain permutations.
//! * [`sampling`] owns every source of randomness: i.i.d. (type I) and per-bin
//!   (type II) sampling, exact configuration probabilities, pattern sampling
//!   and training/testing signatures.
//! * [`estimators`] implements the collision-based estimator of `‖P‖₂²` and
//!   the Bernoulli comparison tail bound.
//! * [`distinguisher`] implements the two-stage distinguisher and both
//!   reductions between distinguishability and closeness.
//! * [`lowerbound`] is an executable model of the random-permutation game
//!   used by the lower bound.
//!
//! All randomness flows through explicitly seeded [`rng::TrialRng`] streams,
//! so every result is reproducible from a master seed.

pub mod dist;
pub mod distinguisher;
pub mod error;
pub mod estimators;
pub mod lowerbound;
pub mod rng;
pub mod sampling;

pub use dist::{
    apply_permutation, make_hard_pair, norms, weakly_disjoint_decompose, DiscreteDistribution,
    PermutedPair, SeparationParams, WeaklyDisjointDecomposition,
};
pub use distinguisher::{
    closeness_from_distinguisher, distinguish, distinguisher_from_closeness, Answer,
    ClosenessOracle, Decision, DistinguishConfig, NormFailurePolicy, Stage, Verdict,
};
pub use error::{Error, Result};
pub use estimators::{bernoulli_tail_bound, estimate_l2_squared, L2Estimate};
pub use lowerbound::{
    indistinguishability_experiment, likelihood_ratio, lower_h_bound_experiment,
    play_permutation_game, GameLab, HintMasses, HintReport, Hypothesis, LabOptions, Tester,
};
pub use rng::{derive_seed, rng_from_seed, TrialRng};
pub use sampling::{
    AliasSampler, Configuration, Metered, SampleBudget, SampleSource, SignatureHistogram,
};
