//! Closed-form system optimum, user equilibrium and control policies for a
//! many-to-one corridor of bottlenecks, with numerical cross-checks.
//!
//! Bottleneck 1 is the most downstream. Public indices inside the library are
//! 0-based; error messages and reports use 1-based labels.

pub mod curve;
pub mod dso;
pub mod due;
pub mod error;
pub mod instances;
pub mod network;
pub mod oracle;
pub mod policies;
pub mod quad;
pub mod random;
pub mod schedule;
pub mod state;

pub use curve::{union_grid, Piece, PiecewiseCurve, SegmentKind};
pub use dso::{compute_windows, solve_dso, total_cost_dso, DsoSolution, Windows};
pub use due::{
    construct_due, cumulative_curves, qrp_report, total_cost_due, verify_due, CumulativeCurves,
    DueOptions, DueSolution,
};
pub use error::{Error, Result};
pub use network::{
    derive, validate, Corridor, DerivedQuantities, Diagnostics, Violation, ViolationKind,
};
pub use oracle::{residual_eval, ResidualReport, SampleGrid};
pub use policies::{
    compare_policies, solve_pbp, solve_prm, solve_prp, solve_rm, solve_rp, solve_state, Comparison,
    ComparisonRow, OrderingCheck, PolicySolution, PolicySpec, RowValues, StateKind,
};
pub use schedule::{
    check_qrp_condition, EqualCostWindow, QrpReport, QrpViolation, ScheduleDelayFn, Side,
};
pub use state::EquilibriumState;
