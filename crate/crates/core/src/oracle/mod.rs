//! Independent checks: the discretized LP, its solvers, and the residual engine.

pub mod compare;
pub mod flow;
pub mod lp;
pub mod residual;
pub mod simplex;
pub mod transport;

pub use compare::{compare_to_closed_form, fixed_index_rho, OracleReport, Tolerances};
pub use lp::{
    certificate, discretize, solve_lp, Certificate, DiscreteLp, LpMethod, LpOptions, LpResult,
    LpStatus,
};
pub use residual::{realized_rho, residual_eval, ResidualReport, SampleGrid};
