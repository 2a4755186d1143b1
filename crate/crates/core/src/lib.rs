//! Finite-dimensional dynamical collapse models with an initial state and a
//! final boundary condition.
//!
//! The crate computes record probabilities conditioned on both boundaries,
//! builds the backward-in-time description of the same records, checks that
//! both descriptions agree when the Hamiltonian and collapse operators are
//! real symmetric matrices, and measures when single-event probabilities
//! follow the Born rule in either time direction.

// `!(x > tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod tolerance;
pub mod two_time;

pub use config::{CheckReport, FamilyConfig, ModelConfig};
pub use error::{Error, Result};
pub use forward::{
    collapse_distribution, history_operator, sample_batch, sample_trajectory, state_at,
    trajectory_seed, TrajectoryOutput,
};
pub use linalg::{
    conjugate_in_basis, normalize_history, propagator, trace_product, DensityOperator, DensityRole,
    HermitianOperator, HilbertSpace, Matrix, OperatorData, PureState, UnitaryOperator,
};
pub use model::{
    build_grw_family, build_projective_family, check_symmetry_conditions, reverse_record,
    CollapseFamily, CollapseRecord, EventSchedule, OutcomeGrid, SymmetryReport, TwoTimeModel,
};
pub use oracle::{compare_empirical, enumerate_records, EmpiricalReport, ExactDistribution};
pub use tolerance::Tolerances;
pub use two_time::{joint_record_weight, BornAnalysis, Conditional, Direction, TwoTimeEngine};
