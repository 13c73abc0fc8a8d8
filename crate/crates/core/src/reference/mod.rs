//! Independent verification: exact LP for linear instances, secant
//! discretization for concave ones, and optimality certificate checks.
//! Nothing here shares code paths with the scaling solvers.

pub mod certificate;
pub mod lp;
pub mod pwl;
pub mod simplex;

pub use certificate::{check_conservative_certificate, CertificateMode, Verdict, Violation};
pub use lp::{lp_reference_linear, solve_symmetric_lp, LpReference, ReferenceError};
pub use pwl::{pwl_discretize, Discretized};
pub use simplex::{Lp, LpOutcome};
