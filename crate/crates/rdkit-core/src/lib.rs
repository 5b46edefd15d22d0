//! Classical and entanglement-assisted quantum rate-distortion solvers.
//!
//! The crate computes rate-distortion functions by mirror descent with the
//! (negative) entropy as the Bregman kernel. Quantum subproblems are solved
//! through their duals with Newton's method or gradient ascent, iterates are
//! kept feasible by a pseudo-projection, and inexact subproblem solves follow
//! a decaying error schedule. Entanglement-fidelity instances are reduced to
//! a fixed-point subspace of dimension 2n²−n before solving. Results are
//! validated against analytic solutions for maximally mixed / uniform inputs
//! and certified with Frank-Wolfe optimality gaps.
//!
//! ```
//! use rdkit_core::hermitian::DensityMatrix;
//! use rdkit_core::solver::{solve, DistortionSpec, QrdProblem, SolverOptions};
//!
//! let rho = DensityMatrix::maximally_mixed(2);
//! let problem = QrdProblem::new(rho, DistortionSpec::EntanglementFidelity, 1.0)?;
//! let result = solve(&problem, &SolverOptions::default())?;
//! assert!(result.gap_bits.unwrap() < 1e-8);
//! println!(
//!     "R = {:.6} bits at D = {:.6}",
//!     result.rate_bits, result.distortion,
//! );
//! # Ok::<(), rdkit_core::Error>(())
//! ```

pub mod bounds;
pub mod classical;
pub mod entropy;
pub mod error;
pub mod hermitian;
pub mod instances;
pub mod solver;
pub mod symmetry;

pub use error::{Error, Result};
pub use hermitian::{DensityMatrix, EigDecomposition, HermitianMatrix};

/// Conversion factor from nats to bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;
