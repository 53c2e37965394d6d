//! Discrete weighted eigenvalue problems for the fractional p-Laplacian.
//!
//! A bounded domain is covered by a uniform grid of cells; functions are
//! piecewise constant on interior cells and vanish outside the domain. On
//! that space the crate provides
//!
//! - the Gagliardo energy `Phi(u)` and the weighted `L^p` energy `Psi_m(u)`
//!   for sign-changing, possibly singular weights ([`energy`]),
//! - the first eigenvalue as a minimum of `Phi` on the weighted sphere and
//!   the second eigenvalue as a minimax over odd loops ([`eigen`]),
//! - an exact generalized eigensolver for `p = 2` used as a cross-check,
//! - the elementary inequalities used by the theory, as gap functions
//!   ([`inequality`]),
//! - experiment orchestration behind the `fracp` binary ([`experiments`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod inequality;
pub mod kernel;

pub use domain::{Domain, DomainSpec, Shape};
pub use eigen::{
    check_simplicity, compute_monotonicity_constant, lambda2_upper_from_nodal, normalize_to_sphere,
    p2_oracle_spectrum, solve_lambda1, solve_lambda2_path, EigenPair, Lambda2Result,
    OracleSpectrum, SimplicityReport, SolverConfig, SymmetricPath,
};
pub use energy::{
    gagliardo_energy, gagliardo_gradient, residual_norm, weighted_lp_energy, weighted_lp_gradient,
    GridFunction, WeightField,
};
pub use error::{Error, Result};
pub use kernel::{assemble_kernel, exterior_tail, FractionalKernel};
