//! Closed-loop co-simulation of a gigawatt-scale AI data center (AIDC) and a
//! transmission system operator (TSO) under connect-and-manage access.
//!
//! Each step the AIDC's planning policy requests power at the point of common
//! coupling, the TSO accepts what a budget-robust DC network model allows, and
//! the AIDC allocates the accepted power across its clusters and battery.
//!
//! The numerical kernels ([`linalg`], [`lp`], PTDF and protection terms) are
//! generic over [`num::Real`]; the aliases below fix them to `f64`, which the
//! rest of the crate uses.

pub mod grid;
pub mod linalg;
pub mod lp;
pub mod num;
pub mod plant;
pub mod policies;
pub mod scenario;
pub mod sim;

pub type LinearProgram = lp::LinearProgram<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type PtdfMatrix = grid::PtdfMatrix<f64>;
