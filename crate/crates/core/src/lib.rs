//! Non-stationary discrete-time Riccati operators and their contraction
//! behaviour in the affine-invariant Riemannian metric on SPD matrices.
//!
//! The crate is organised bottom-up:
//!
//! * [`spd`]: symmetric / SPD matrix wrappers and the Riemannian distance.
//! * [`problem`]: per-step LQ data ([`StageData`]) and time-varying problems ([`LqProblem`]).
//! * [`riccati`]: the Riccati operator in direct and linear-fractional form,
//!   per-step contraction certificates and the backward recursion.
//! * [`lifting`]: the d-step lifted problem whose Riccati operator is a strict contraction.
//! * [`horizon`]: trajectory simulation, finite-horizon values, composition and
//!   receding-horizon control.
//! * [`sampling`]: seeded random generators used by property tests and benchmarks.

// `!(x > tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod horizon;
pub mod lifting;
mod linalg;
pub mod problem;
pub mod riccati;
pub mod sampling;
pub mod spd;
pub mod tol;

pub use error::{Error, Result};
pub use horizon::trajectory_gap;
pub use horizon::{
    compose_riccati, finite_horizon_value, lifted_riccati_apply, optimal_gain_policy, receding_horizon_run, simulate,
    simulate_from, PolicySpec, RecedingRun, TerminalPenalty, Trajectory,
};
pub use lifting::{
    build_hat, build_lifted_stage, lift_input, lifted_contraction, minimal_lift_depth, phi_gamma, rank_report,
    unlift_input, xi_delta, HatMatrices, LiftedStage, RankReport, StageRank,
};
pub use linalg::{relative_error, spectral_norm};
pub use problem::{LqProblem, ParametricStages, StageData, StageMatrices, StageSource};
pub use riccati::{
    backward_recursion, contraction_bound, lft_apply, lft_form, optimal_gain, riccati_apply, Contraction,
    ContractionBound, LftForm, NotStrictReason, RiccatiTrace,
};
pub use spd::{is_spd, random_spd, riemannian_distance, SpdCheck, SpdMatrix, SymMatrix};
pub use tol::Tolerances;

pub use nalgebra::{DMatrix, DVector};
