//! Numerical workbench for joint estimation of two parameters with qubit
//! probes.
//!
//! The crate evaluates symmetric logarithmic derivatives, the quantum Fisher
//! information (QFI) matrix and the weak-commutativity quantity for
//! single- and two-copy qubit probe families; classical Fisher information of
//! arbitrary POVMs; and the figure of merit
//!
//! ```text
//! kappa = sum_j (F_eff_jj / m) / H_jj
//! ```
//!
//! which compares a joint measurement on `m` copies with the per-parameter
//! quantum limits. Measurement models cover the ideal Bell measurement,
//! product projective measurements and a post-selected partially polarising
//! beam splitter controlled-sign gate. Detector tomography reconstructs POVMs
//! from Poisson count data with a constraint-preserving maximum-likelihood
//! iteration.
//!
//! Conventions: two-qubit operators use the ordering `|00>, |01>, |10>, |11>`
//! with qubit 1 as the slow index.

pub mod error;
pub mod fisher;
pub mod linalg;
pub mod measurement;
pub mod scenario;
pub mod state;
pub mod tomography;

mod nelder_mead;
mod par;
mod seed;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
