//! Operational nonlocality in generalized probability theories.
//!
//! A theory is a state space with a catalogue of measurements. On top of
//! that sit the single-system certainty bound υ*, bipartite assemblages
//! and their conditioned certainty sums, local-hidden-state LPs, joint
//! measurability of unsharp observables, CHSH bounds, and a Monte Carlo
//! run of the certificate protocol.

pub mod bell;
pub mod compatibility;
pub mod error;
pub mod gpt;
mod lp;
pub mod protocol;
pub mod report;
pub mod steering;
pub mod theories;
pub mod uncertainty;

pub use bell::{chsh_value, classify, ClassLabel, Classification, ScenarioShape, TestInstance};
pub use compatibility::{jointly_measurable_lp, unsharpen, FamilyPoint, UnsharpObservable};
pub use error::{Error, Result};
pub use gpt::{
    Effect, Measurement, RealVector, State, StateSpace, Theory, ALGEBRAIC_TOL, GEOMETRIC_TOL,
};
pub use protocol::{run_protocol, Mode, ProtocolConfig, ProtocolReport};
pub use steering::{Assemblage, NonlocalityVerdict, Pairing};
pub use theories::{bipartite_by_name, theory_by_name, BipartiteState, Branch, Correlation};
pub use uncertainty::{upsilon_star, UncertaintyBound};
