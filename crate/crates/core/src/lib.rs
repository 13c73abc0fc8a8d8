//! Generalized-flow optimization with linear and concave gain functions.
//!
//! The crate solves the symmetric problem (minimize the penalty-weighted
//! excess deficit) with fat-path scaling: exactly over rationals for linear
//! gains, and to a prescribed accuracy for concave gains given by value and
//! inverse oracles. On top of that sit the sink formulation, market
//! equilibrium front-ends and independent reference oracles.

pub mod batch;
pub mod concave;
pub mod format;
pub mod gain;
pub mod heap;
pub mod linear;
pub mod market;
pub mod maxflow;
pub mod network;
pub mod reference;
pub mod report;
pub mod scalar;
pub mod scaling;
pub mod sink;
pub mod generate;

pub use gain::{ArcGain, GainError, GainFunction, GainOracle, GainSpec, LinearGain};
pub use network::{ConcaveNetwork, Edge, LinearNetwork, Network, NetworkError, NodeData, ResidualArc};
pub use scalar::{Extended, Label, Scalar};
pub use scaling::{InvariantLog, PhaseStats, SolveError, SolveOptions, Tolerances};
