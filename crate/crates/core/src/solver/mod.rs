//! Two-point flux operator, initial projection and the semi-implicit
//! Euler-Maruyama recursion.

mod cg;
mod initial;
mod scheme;
mod tpfa;

pub use cg::{
    conjugate_gradient, dense_cholesky_solve, solve_linear_system, CgOutcome, CgWorkspace, ShiftedSystem,
    SpdOperator, DENSE_ORACLE_LIMIT,
};
pub use initial::{project_initial, AnalyticInitial, PROJECTION_ORDER};
pub use scheme::{
    ito_partial_sums, solve_trajectory, step, ItoConvention, Scheme, SchemeConfig, DEFAULT_TOLERANCE,
};
pub use tpfa::{CsrMatrix, TpfaOperator};
