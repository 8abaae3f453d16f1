//! Earth-observation constellation scheduling.
//!
//! Models the acquisition/downlink scheduling problem of a satellite fleet as
//! a binary linear program, solves it centrally with an internal LP /
//! branch-and-bound stack, and solves it distributedly by primal
//! decomposition with Lagrange-multiplier exchange over a simulated
//! time-varying inter-satellite communication graph.

pub mod check;
pub mod centralized;
pub mod cli;
pub mod distributed;
pub mod error;
pub mod instance;
pub mod lp;
pub mod milp;
pub mod model;
pub mod network;
pub mod oracle;
pub mod suite;

pub use error::{Error, Result};
