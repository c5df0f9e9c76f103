//! Perturbation analysis of spherical Euclidean distance matrices.
//!
//! Given an EDM `D` and an off-diagonal entry `(k, l)`, the crate answers
//! for which shifts `t` the matrix `D + t(E^{kl} + E^{lk})` stays an EDM,
//! stays spherical with radius at most 1, or stays exactly unit spherical,
//! and gives the radius as a closed-form function of `t`.

pub mod cayley_menger;
pub mod edm;
pub mod error;
pub mod linalg;
pub mod oracle_gen;
pub mod perturbation;
pub mod yielding;

pub use edm::{DistanceMatrix, EdmProfile, GramChoice};
pub use error::{Error, Result};
pub use linalg::{SymMatrix, TolerancePolicy};
pub use perturbation::{classify, CaseTag, PerturbationReport, RadiusCoefficients, TeqSet};
pub use yielding::{EntryIndex, Interval, ParallelRelation, YieldingReport};
