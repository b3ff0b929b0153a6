//! Exact simulation and verification of two classical two-party protocols:
//! teleporting a hidden sample with a one-time pad, and steering a remote
//! ensemble with no communication at all.
//!
//! Everything probabilistic is an arbitrary-precision rational, so protocol
//! claims are checked with equality, not tolerances. Protocol runs are driven
//! by a seeded, platform-independent random source and leave behind
//! transcripts whose visibility rules make "who learned what" and "who sent
//! what" machine-checkable.
//!
//! ```
//! use steersim_core::{
//!     analyze, derive_plan, ClassicalState, CorrelatedState, Ensemble, OutcomeSpace, Rational,
//! };
//!
//! let r = |n, d| Rational::new(n, d).unwrap();
//! let space = OutcomeSpace::bit();
//! let member = |p0, p1| ClassicalState::new(space.clone(), vec![p0, p1]).unwrap();
//!
//! // A fair bit, presented as an equal mixture of two biased bits.
//! let target = Ensemble::new(vec![
//!     (r(1, 2), member(r(3, 4), r(1, 4))),
//!     (r(1, 2), member(r(1, 4), r(3, 4))),
//! ])
//! .unwrap();
//! let resource = CorrelatedState::fully_correlated(&target.mix());
//!
//! let plan = derive_plan(resource, target).unwrap();
//! assert_eq!(plan.coins()[&0], vec![r(3, 4), r(1, 4)]);
//!
//! let verdict = analyze(&plan);
//! assert!(verdict.announced_matches_weights);
//! assert!(verdict.conditionals_match_members);
//! ```

pub mod prob;
pub mod quantum;
pub mod rational;
pub mod runtime;
pub mod steering;
pub mod teleport;

pub use prob::{ClassicalState, CorrelatedState, Ensemble, OutcomeSpace, Party, ProbError};
pub use quantum::{
    decohere, epr_measure, MeasurementBasis, QuantumError, QubitEnsembleReport, SchmidtState,
};
pub use rational::Rational;
pub use runtime::{
    empirical, sample, Actor, Event, EventKind, RandomSource, RuntimeError, Sampler, Transcript,
    Visibility, PRNG_NAME,
};
pub use steering::{
    analyze, demo_instance, derive_plan, execute, random_instance, verify_no_communication,
    SteeringAnalysis, SteeringError, SteeringInstance, SteeringOutcome, SteeringPlan,
};
pub use teleport::{
    alice_encode, analyze_teleport, bob_decode, run_teleport, setup_shared, SealedCoin, SharedDit,
    TeleportAnalysis, TeleportError, TeleportResult,
};
