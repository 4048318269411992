//! Configuration-space integrals for knot graphs: diagrams, boundary strata,
//! Monte-Carlo integration, the ground-function bundle and the finite-type
//! invariants built from them.

pub mod bundle;
pub mod diagram;
pub mod geometry;
pub mod integrator;
pub mod invariants;
pub mod strata;
