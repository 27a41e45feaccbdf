//! Policy equilibria: partial bottleneck pricing, full and partial on-ramp
//! metering, full and partial on-ramp pricing.
//!
//! Every policy redistributes the optimal cumulative price P_i = Σ_{j≤i} p_j
//! among mainline queues, ramp queues and tolls so that each commuter still
//! faces ρ_{i,k}; flows then follow from the mainline queues alone.

use std::fmt;

use rayon::prelude::*;

use crate::curve::PiecewiseCurve;
use crate::dso::{solve_dso, DsoSolution};
use crate::due::{construct_due, DueOptions, DueSolution};
use crate::error::{Error, Result};
use crate::network::Corridor;
use crate::oracle::residual::{residual_eval, SampleGrid};
use crate::schedule::ScheduleDelayFn;
use crate::state::{slice_flows, EquilibriumState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateKind {
    Dso,
    Due,
    Pbp,
    Rm,
    Rp,
    Prm,
    Prp,
}

impl StateKind {
    pub const ALL: [StateKind; 7] = [
        StateKind::Dso,
        StateKind::Due,
        StateKind::Pbp,
        StateKind::Rm,
        StateKind::Rp,
        StateKind::Prm,
        StateKind::Prp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StateKind::Dso => "dso",
            StateKind::Due => "due",
            StateKind::Pbp => "pbp",
            StateKind::Rm => "rm",
            StateKind::Rp => "rp",
            StateKind::Prm => "prm",
            StateKind::Prp => "prp",
        }
    }

    pub fn parse(s: &str) -> Option<StateKind> {
        StateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }

    /// Whether the state is defined relative to a chosen subset.
    pub fn takes_subset(self) -> bool {
        matches!(self, StateKind::Pbp | StateKind::Prm | StateKind::Prp)
    }

    /// Whether the policy collects money (and therefore can improve on the user equilibrium).
    pub fn is_pricing(self) -> bool {
        matches!(
            self,
            StateKind::Dso | StateKind::Pbp | StateKind::Rp | StateKind::Prp
        )
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicySpec {
    pub kind: StateKind,
    /// 1-based bottleneck or on-ramp indices; ignored by kinds without a subset.
    pub subset: Vec<usize>,
}

impl PolicySpec {
    pub fn new(kind: StateKind, subset: Vec<usize>) -> Self {
        PolicySpec { kind, subset }
    }

    pub fn full(kind: StateKind) -> Self {
        PolicySpec {
            kind,
            subset: Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        if self.kind.takes_subset() {
            let items: Vec<String> = self.subset.iter().map(|i| i.to_string()).collect();
            format!("{}{{{}}}", self.kind, items.join(","))
        } else {
            self.kind.to_string()
        }
    }
}

#[derive(Clone, Debug)]
pub struct PolicySolution {
    pub kind: StateKind,
    pub subset: Vec<usize>,
    pub state: EquilibriumState,
    pub total_cost: f64,
    pub revenue: f64,
}

impl PolicySolution {
    fn from_state(kind: StateKind, subset: Vec<usize>, state: EquilibriumState) -> Self {
        let revenue = state.revenue();
        let total_cost = state.sum_q_rho() - revenue;
        PolicySolution {
            kind,
            subset,
            state,
            total_cost,
            revenue,
        }
    }
}

/// Membership mask of a 1-based subset, rejecting out-of-range indices.
fn subset_mask(subset: &[usize], n: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in subset {
        if i == 0 || i > n {
            return Err(Error::InvalidSubset { index: i, n });
        }
        mask[i - 1] = true;
    }
    Ok(mask)
}

fn normalized(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| i + 1)
        .collect()
}

fn require_qrp(due: &DueSolution) -> Result<()> {
    if due.qrp.holds {
        Ok(())
    } else {
        Err(Error::QrpConditionViolated(Box::new(due.qrp.clone())))
    }
}

/// Partial bottleneck pricing on {i^P, …, N}: priced bottlenecks charge p_i
/// instead of queueing; the others keep their user-equilibrium queues.
pub fn solve_pbp(dso: &DsoSolution, due: &DueSolution, subset: &[usize]) -> Result<PolicySolution> {
    let n = dso.corridor.n_bottlenecks();
    let mask = subset_mask(subset, n)?;
    if let Some(first) = mask.iter().position(|&m| m) {
        if mask[first..].iter().any(|&m| !m) {
            return Err(Error::NonContiguousSubset {
                subset: normalized(&mask),
                n,
            });
        }
    }
    require_qrp(due)?;
    let mut st = due.state.clone();
    for i in 0..n {
        if mask[i] {
            st.bottleneck_tolls[i] = dso.prices[i].clone();
            st.mainline_queues[i] = PiecewiseCurve::zero(&dso.grid);
        }
    }
    st.flows = slice_flows(&dso.corridor, &dso.grid, &dso.windows, &st.mainline_queues);
    Ok(PolicySolution::from_state(
        StateKind::Pbp,
        normalized(&mask),
        st,
    ))
}

/// Shared construction of partial ramp metering (`priced = false`) and partial
/// ramp pricing (`priced = true`). A controlled ramp i carries
/// P_i − P_{i'}, where i' is the nearest uncontrolled bottleneck downstream of
/// i (P_0 = 0); its mainline bottleneck has no queue. An uncontrolled
/// bottleneck queues P_i − P_{i'} with the same i'.
fn ramp_policy(
    dso: &DsoSolution,
    due: &DueSolution,
    mask: &[bool],
    priced: bool,
) -> EquilibriumState {
    let n = dso.corridor.n_bottlenecks();
    let zero = PiecewiseCurve::zero(&dso.grid);
    let mut st = due.state.clone();
    let mut last_open: Option<usize> = None;
    for i in 0..n {
        let base = last_open.map_or_else(|| zero.clone(), |j| dso.cumulative_prices[j].clone());
        let share = dso.cumulative_prices[i].sub(&base).on_grid(&dso.grid);
        st.bottleneck_tolls[i] = zero.clone();
        if mask[i] {
            st.mainline_queues[i] = zero.clone();
            st.ramp_capacity[i] = Some(dso.derived.mu_bar[i]);
            if priced {
                st.ramp_tolls[i] = share;
                st.ramp_queues[i] = zero.clone();
            } else {
                st.ramp_queues[i] = share;
                st.ramp_tolls[i] = zero.clone();
            }
        } else {
            st.mainline_queues[i] = share;
            st.ramp_queues[i] = zero.clone();
            st.ramp_tolls[i] = zero.clone();
            st.ramp_capacity[i] = None;
            last_open = Some(i);
        }
    }
    st.flows = slice_flows(&dso.corridor, &dso.grid, &dso.windows, &st.mainline_queues);
    st
}

/// Metering on every on-ramp at rate μ̄_i: ramp queues Σ_{j≤i} w^UE_j, no mainline queues.
pub fn solve_rm(dso: &DsoSolution, due: &DueSolution) -> Result<PolicySolution> {
    require_qrp(due)?;
    let mask = vec![true; dso.corridor.n_bottlenecks()];
    Ok(PolicySolution::from_state(
        StateKind::Rm,
        normalized(&mask),
        ramp_policy(dso, due, &mask, false),
    ))
}

/// Tolls Σ_{j≤i} p_j on every on-ramp; no queues anywhere.
pub fn solve_rp(dso: &DsoSolution, due: &DueSolution) -> Result<PolicySolution> {
    require_qrp(due)?;
    let mask = vec![true; dso.corridor.n_bottlenecks()];
    Ok(PolicySolution::from_state(
        StateKind::Rp,
        normalized(&mask),
        ramp_policy(dso, due, &mask, true),
    ))
}

pub fn solve_prm(dso: &DsoSolution, due: &DueSolution, subset: &[usize]) -> Result<PolicySolution> {
    let mask = subset_mask(subset, dso.corridor.n_bottlenecks())?;
    require_qrp(due)?;
    Ok(PolicySolution::from_state(
        StateKind::Prm,
        normalized(&mask),
        ramp_policy(dso, due, &mask, false),
    ))
}

pub fn solve_prp(dso: &DsoSolution, due: &DueSolution, subset: &[usize]) -> Result<PolicySolution> {
    let mask = subset_mask(subset, dso.corridor.n_bottlenecks())?;
    require_qrp(due)?;
    Ok(PolicySolution::from_state(
        StateKind::Prp,
        normalized(&mask),
        ramp_policy(dso, due, &mask, true),
    ))
}

/// Any of the seven states, the optimum and user equilibrium included.
pub fn solve_state(
    dso: &DsoSolution,
    due: &DueSolution,
    spec: &PolicySpec,
) -> Result<PolicySolution> {
    match spec.kind {
        StateKind::Dso => Ok(PolicySolution::from_state(
            StateKind::Dso,
            Vec::new(),
            dso.state(),
        )),
        StateKind::Due => Ok(PolicySolution::from_state(
            StateKind::Due,
            Vec::new(),
            due.state.clone(),
        )),
        StateKind::Pbp => solve_pbp(dso, due, &spec.subset),
        StateKind::Rm => solve_rm(dso, due),
        StateKind::Rp => solve_rp(dso, due),
        StateKind::Prm => solve_prm(dso, due, &spec.subset),
        StateKind::Prp => solve_prp(dso, due, &spec.subset),
    }
}

/// Tolerance for equalities between total costs.
pub const COST_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct RowValues {
    pub total_cost: f64,
    pub revenue: f64,
    pub max_rho_deviation: f64,
    pub max_residual: f64,
    /// ρ unchanged and total cost strictly below the user equilibrium.
    pub pareto: bool,
}

#[derive(Debug)]
pub struct ComparisonRow {
    pub spec: PolicySpec,
    pub values: Result<RowValues>,
}

#[derive(Clone, Debug)]
pub struct OrderingCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct Comparison {
    pub z_so: f64,
    pub z_ue: f64,
    pub rows: Vec<ComparisonRow>,
    pub orderings: Vec<OrderingCheck>,
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.orderings.iter().all(|o| o.pass) && self.rows.iter().all(|r| r.values.is_ok())
    }
}

/// Solves every spec in parallel (rows keep input order) and checks the cost orderings.
pub fn compare_policies(
    c: &Corridor,
    f: &ScheduleDelayFn,
    specs: &[PolicySpec],
) -> Result<Comparison> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("policy list is empty".into()));
    }
    let dso = solve_dso(c, f)?;
    let due = construct_due(&dso, &DueOptions::default())?;
    let grid = SampleGrid {
        interior: 32,
        ..SampleGrid::default()
    };
    let rows: Vec<ComparisonRow> = specs
        .par_iter()
        .map(|spec| {
            let values = solve_state(&dso, &due, spec).map(|sol| {
                let dev = sol
                    .state
                    .rho
                    .iter()
                    .flatten()
                    .zip(dso.rho.iter().flatten())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let residual = residual_eval(&sol.state, &grid).max_residual();
                RowValues {
                    total_cost: sol.total_cost,
                    revenue: sol.revenue,
                    max_rho_deviation: dev,
                    max_residual: residual,
                    pareto: dev <= 1e-10 && sol.total_cost < due.total_cost - COST_TOL,
                }
            });
            ComparisonRow {
                spec: spec.clone(),
                values,
            }
        })
        .collect();
    let orderings = orderings(dso.total_cost, due.total_cost, &rows);
    Ok(Comparison {
        z_so: dso.total_cost,
        z_ue: due.total_cost,
        rows,
        orderings,
    })
}

fn orderings(z_so: f64, z_ue: f64, rows: &[ComparisonRow]) -> Vec<OrderingCheck> {
    let ok: Vec<(&PolicySpec, &RowValues)> = rows
        .iter()
        .filter_map(|r| r.values.as_ref().ok().map(|v| (&r.spec, v)))
        .collect();
    let of = |kind: StateKind| -> Vec<(&PolicySpec, f64)> {
        ok.iter()
            .filter(|(s, _)| s.kind == kind)
            .map(|(s, v)| (*s, v.total_cost))
            .collect()
    };
    let eq = |a: f64, b: f64| (a - b).abs() <= COST_TOL;
    let between = |z: f64| z_so - COST_TOL <= z && z <= z_ue + COST_TOL;
    let mut out = Vec::new();

    let rp = of(StateKind::Rp);
    let rm = of(StateKind::Rm);
    let pass =
        rp.iter().all(|(_, z)| eq(*z, z_so)) && rm.iter().all(|(_, z)| eq(*z, z_ue)) && z_so < z_ue;
    out.push(OrderingCheck {
        name: "Z^SO = Z^RP < Z^RM = Z^UE".into(),
        pass,
        detail: format!("Z^SO = {z_so:.9}, Z^UE = {z_ue:.9}"),
    });

    let mut band = |kind: StateKind, name: &str| {
        let rows = of(kind);
        if !rows.is_empty() {
            out.push(OrderingCheck {
                name: name.into(),
                pass: rows.iter().all(|(_, z)| between(*z)),
                detail: rows
                    .iter()
                    .map(|(s, z)| format!("{} = {z:.9}", s.label()))
                    .collect::<Vec<_>>()
                    .join(", "),
            });
        }
    };
    band(StateKind::Pbp, "Z^SO <= Z^PBP <= Z^UE");
    band(StateKind::Prp, "Z^SO <= Z^PRP <= Z^UE");

    let prm = of(StateKind::Prm);
    if !prm.is_empty() {
        out.push(OrderingCheck {
            name: "Z^PRM = Z^UE".into(),
            pass: prm.iter().all(|(_, z)| eq(*z, z_ue)),
            detail: prm
                .iter()
                .map(|(s, z)| format!("{} = {z:.9}", s.label()))
                .collect::<Vec<_>>()
                .join(", "),
        });
    }

    for kind in [StateKind::Pbp, StateKind::Prp] {
        let rows = of(kind);
        let mut violations = Vec::new();
        let mut nested_pairs = 0;
        for (a, za) in &rows {
            for (b, zb) in &rows {
                let proper = a.subset.len() < b.subset.len()
                    && a.subset.iter().all(|i| b.subset.contains(i));
                if proper {
                    nested_pairs += 1;
                    if *zb > *za + COST_TOL {
                        violations.push(format!("{} > {}", b.label(), a.label()));
                    }
                }
            }
        }
        if nested_pairs > 0 {
            out.push(OrderingCheck {
                name: format!(
                    "Z^{} nonincreasing as the subset grows",
                    kind.name().to_uppercase()
                ),
                pass: violations.is_empty(),
                detail: if violations.is_empty() {
                    format!("{nested_pairs} nested pairs")
                } else {
                    violations.join("; ")
                },
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::oracle::residual::realized_rho;

    fn ex() -> (DsoSolution, DueSolution) {
        let (c, f) = instances::two_bottleneck();
        let dso = solve_dso(&c, &f).unwrap();
        let due = construct_due(&dso, &DueOptions::default()).unwrap();
        (dso, due)
    }

    const Z_SO: f64 = 11.730769;
    const Z_UE: f64 = 13.461538;

    fn assert_equilibrium(sol: &PolicySolution, dso: &DsoSolution) {
        let r = residual_eval(&sol.state, &SampleGrid::default());
        assert!(r.passes(1e-8), "{}: {r:?}", sol.kind);
        let realized = realized_rho(&sol.state, &SampleGrid::default());
        for (a, b) in realized.iter().flatten().zip(dso.rho.iter().flatten()) {
            assert!((a - b).abs() < 1e-10, "{}: realized {a} vs {b}", sol.kind);
        }
        assert!(
            (sol.state.schedule_cost() + sol.state.queueing_cost() - sol.total_cost).abs() < 1e-9
        );
    }

    #[test]
    fn pbp_reference_cases() {
        let (dso, due) = ex();
        let f = &dso.schedule;
        let p2 = solve_pbp(&dso, &due, &[2]).unwrap();
        assert!(p2.state.mainline_queues[1].is_zero());
        assert_eq!(p2.state.bottleneck_tolls[1], dso.prices[1]);
        assert_eq!(p2.state.mainline_queues[0], due.state.mainline_queues[0]);
        assert!(p2.total_cost > Z_SO && p2.total_cost < Z_UE);
        assert_equilibrium(&p2, &dso);

        let all = solve_pbp(&dso, &due, &[1, 2]).unwrap();
        assert!((all.total_cost - Z_SO).abs() < 1e-6);
        for i in 0..2 {
            for t in [-2.0, -0.5, 0.0, 0.3, 1.0] {
                for k in 0..2 {
                    assert!(
                        (all.state.flows[i][k].value(f, t) - dso.group_flows[i][k].value(f, t))
                            .abs()
                            < 1e-12
                    );
                }
            }
        }
        assert_equilibrium(&all, &dso);
        let none = solve_pbp(&dso, &due, &[]).unwrap();
        assert!((none.total_cost - Z_UE).abs() < 1e-6);

        let err = solve_pbp(&dso, &due, &[1]).unwrap_err();
        assert_eq!(err.code(), "NonContiguousSubset");
        assert_eq!(
            solve_pbp(&dso, &due, &[3]).unwrap_err().code(),
            "InvalidSubset"
        );
    }

    #[test]
    fn ramp_metering_reference() {
        let (dso, due) = ex();
        let f = &dso.schedule;
        let rm = solve_rm(&dso, &due).unwrap();
        assert!((rm.state.ramp_queues[1].value(f, 0.0) - 0.830769).abs() < 1e-6);
        assert!(rm.state.mainline_queues.iter().all(|w| w.is_zero()));
        for t in [-0.5, 0.1] {
            let q1: f64 = rm.state.flows[0].iter().map(|q| q.value(f, t)).sum();
            assert!((q1 - 1.0).abs() < 1e-12);
        }
        assert!((rm.total_cost - Z_UE).abs() < 1e-6);
        assert_eq!(rm.revenue, 0.0);
        assert_equilibrium(&rm, &dso);
    }

    #[test]
    fn ramp_pricing_reference() {
        let (dso, due) = ex();
        let f = &dso.schedule;
        let rp = solve_rp(&dso, &due).unwrap();
        assert!((rp.state.ramp_tolls[1].value(f, 0.0) - 0.830769).abs() < 1e-6);
        assert!((rp.state.ramp_tolls[0].value(f, 0.0) - 0.415385).abs() < 1e-6);
        assert!(rp
            .state
            .mainline_queues
            .iter()
            .chain(&rp.state.ramp_queues)
            .all(|w| w.is_zero()));
        assert!((rp.total_cost - Z_SO).abs() < 1e-6);
        assert_equilibrium(&rp, &dso);
    }

    #[test]
    fn partial_metering_reference() {
        let (dso, due) = ex();
        let prm = solve_prm(&dso, &due, &[2]).unwrap();
        assert!(prm.state.mainline_queues[1].is_zero());
        assert_eq!(prm.state.mainline_queues[0], due.state.mainline_queues[0]);
        assert_eq!(prm.state.ramp_queues[1], due.state.mainline_queues[1]);
        assert!((prm.total_cost - Z_UE).abs() < 1e-6);
        assert_equilibrium(&prm, &dso);

        let empty = solve_prm(&dso, &due, &[]).unwrap();
        assert_eq!(empty.state.mainline_queues, due.state.mainline_queues);
        assert_eq!(empty.state.flows, due.state.flows);
        let full = solve_prm(&dso, &due, &[1, 2]).unwrap();
        let rm = solve_rm(&dso, &due).unwrap();
        assert_eq!(full.state.ramp_queues, rm.state.ramp_queues);
        assert_equilibrium(&solve_prm(&dso, &due, &[1]).unwrap(), &dso);
    }

    #[test]
    fn partial_pricing_reference() {
        let (dso, due) = ex();
        let none = solve_prp(&dso, &due, &[]).unwrap();
        assert!((none.total_cost - Z_UE).abs() < 1e-6);
        let all = solve_prp(&dso, &due, &[1, 2]).unwrap();
        assert!((all.total_cost - Z_SO).abs() < 1e-6);
        let two = solve_prp(&dso, &due, &[2]).unwrap();
        assert!(two.total_cost > Z_SO + 1e-3 && two.total_cost < Z_UE - 1e-3);
        let one = solve_prp(&dso, &due, &[1]).unwrap();
        for s in [&none, &all, &two, &one] {
            assert_equilibrium(s, &dso);
        }
    }

    #[test]
    fn comparison_table() {
        let (c, f) = instances::two_bottleneck();
        let specs: Vec<PolicySpec> = vec![
            PolicySpec::full(StateKind::Dso),
            PolicySpec::full(StateKind::Due),
            PolicySpec::new(StateKind::Pbp, vec![2]),
            PolicySpec::full(StateKind::Rm),
            PolicySpec::full(StateKind::Rp),
            PolicySpec::new(StateKind::Prm, vec![2]),
            PolicySpec::new(StateKind::Prp, vec![]),
            PolicySpec::new(StateKind::Prp, vec![2]),
            PolicySpec::new(StateKind::Prp, vec![1, 2]),
            PolicySpec::new(StateKind::Pbp, vec![1]),
        ];
        let cmp = compare_policies(&c, &f, &specs).unwrap();
        assert_eq!(cmp.rows.len(), specs.len());
        assert_eq!(
            cmp.rows[9].values.as_ref().unwrap_err().code(),
            "NonContiguousSubset"
        );
        assert!(cmp.orderings.iter().all(|o| o.pass), "{:?}", cmp.orderings);
        let pareto: Vec<bool> = cmp.rows[..9]
            .iter()
            .map(|r| r.values.as_ref().unwrap().pareto)
            .collect();
        assert_eq!(
            pareto,
            vec![true, false, true, false, true, false, false, true, true]
        );
        assert!(compare_policies(&c, &f, &[]).is_err());
    }

    #[test]
    fn labels_and_parsing() {
        assert_eq!(
            PolicySpec::new(StateKind::Prp, vec![1, 3]).label(),
            "prp{1,3}"
        );
        assert_eq!(PolicySpec::full(StateKind::Rm).label(), "rm");
        assert_eq!(StateKind::parse("PBP"), Some(StateKind::Pbp));
        assert_eq!(StateKind::parse("x"), None);
    }
}
