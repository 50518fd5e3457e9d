//! Analysis toolkit for stochastic and deterministic reaction networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] and [`parse`]: networks, complexes, lattice states and the text DSL.
//! * [`graph`]: linkage classes, (weak) reversibility, stoichiometric subspace,
//!   deficiency and the auxiliary deficiency-zero network.
//! * [`kinetics`]: deterministic / stochastic mass-action and product-form rates.
//! * [`balance`]: complex balanced states and measures, product-form measures,
//!   stationarity checks.
//! * [`copies`]: lattice copies of the reaction graph, node balancing and the
//!   verifiers built on top of them.
//! * [`ctmc`] and [`ssa`]: truncated Markov chains, exact stationary solves and a
//!   seeded Gillespie simulator.
//!
//! All indices are 0-based. Data-parallel loops go through [`par`], which uses
//! rayon when the `parallel` feature is enabled and runs sequentially otherwise.

pub mod balance;
pub mod copies;
pub mod ctmc;
pub mod error;
pub mod generate;
pub mod graph;
pub mod kinetics;
pub mod linalg;
pub mod model;
pub mod par;
pub mod parse;
mod scc;
pub mod ssa;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use kinetics::{KineticsKind, KineticsSpec, RateTable, StochasticKinetics, Theta, ThetaFamily};
pub use model::{Complex, LatticeState, Reaction, ReactionNetwork, SpeciesId};
pub use parse::{parse_network, to_dsl, ParsedNetwork};
