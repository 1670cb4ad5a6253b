//! Inferential privacy of differentially private mechanisms under correlated
//! priors.
//!
//! An adversary holds a prior over databases in `X^n`. A mechanism that is
//! `ε`-differentially private bounds how much any single record can move the
//! output distribution, but once records are correlated the posterior odds on
//! one individual's record can move much further. The quantity `ν` bounds that
//! posterior movement. This crate computes it several independent ways:
//!
//! * [`lp_exact`]: exact worst case over all `ε`-DP mechanisms by linear
//!   programming over event profiles, with an optimal-mechanism witness;
//! * [`affiliated`]: closed form for positively affiliated (log-supermodular)
//!   binary priors;
//! * [`influence`]: influence-matrix upper bounds in the style of Dobrushin's
//!   uniqueness condition, for general finite alphabets;
//! * [`ising`]: Ising-tree priors, exact magnetization by enumeration and the
//!   Bethe-lattice recursion, including the phase-transition regime.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod affiliated;
pub mod cli;
pub mod dist;
pub mod error;
pub mod influence;
pub mod ising;
pub mod lp_exact;
pub mod mechanism;
pub mod numeric;
pub mod simplex;

pub use affiliated::{nu_closed_form, nu_of_max_biased, ClosedFormResult};
pub use dist::{AffiliationCheck, ConditionalSlice, JointDistribution};
pub use error::{InferaError, Result};
pub use influence::{covariance_ratio_bounds, dobrushin_bounds, influence_matrix, spectral_norm, DobrushinBound, InfluenceMatrix};
pub use ising::{BetheSolution, IsingTreeModel};
pub use lp_exact::{build_lp, nu_exact, NuCertificate};
pub use mechanism::{dp_audit, mechanism_nu, EventProfile, Mechanism, OutcomeTable, PrivacyBudget};
pub use simplex::{simplex_solve, LinearProgram, LpSolution, LpStatus};
