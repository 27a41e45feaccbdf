//! Corridor instance: bottleneck 1 is adjacent to the destination, bottleneck N is
//! the most upstream. Vectors are stored 0-based; messages use 1-based indices.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Corridor {
    capacities: Vec<f64>,
    free_flow_times: Vec<f64>,
    betas: Vec<f64>,
    demands: Vec<Vec<f64>>,
}

impl Corridor {
    /// Stores the data as given; call [`validate`] before solving.
    pub fn new(
        capacities: Vec<f64>,
        free_flow_times: Vec<f64>,
        betas: Vec<f64>,
        demands: Vec<Vec<f64>>,
    ) -> Self {
        Corridor {
            capacities,
            free_flow_times,
            betas,
            demands,
        }
    }

    pub fn n_bottlenecks(&self) -> usize {
        self.capacities.len()
    }

    pub fn n_groups(&self) -> usize {
        self.betas.len()
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    /// μ_i (0-based); μ_{N+1} = 0.
    pub fn capacity(&self, i: usize) -> f64 {
        self.capacities.get(i).copied().unwrap_or(0.0)
    }

    pub fn free_flow_times(&self) -> &[f64] {
        &self.free_flow_times
    }

    pub fn free_flow_time(&self, i: usize) -> f64 {
        self.free_flow_times[i]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.betas[k]
    }

    pub fn demands(&self) -> &[Vec<f64>] {
        &self.demands
    }

    pub fn demand(&self, i: usize, k: usize) -> f64 {
        self.demands[i][k]
    }

    /// Σ_{j ≥ i} Σ_k Q_{j,k} (0-based i).
    pub fn upstream_demand(&self, i: usize) -> f64 {
        self.demands[i..].iter().flatten().sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.upstream_demand(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Shape,
    NonFinite,
    Capacity,
    FalseBottleneck,
    Beta,
    FreeFlowOrder,
    Demand,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks every standing assumption on the corridor; never fails.
pub fn validate(c: &Corridor) -> Diagnostics {
    let mut v = Vec::new();
    fn push(v: &mut Vec<Violation>, kind: ViolationKind, message: String) {
        v.push(Violation { kind, message });
    }
    let n = c.capacities.len();
    let k = c.betas.len();

    if n == 0 {
        push(
            &mut v,
            ViolationKind::Shape,
            "corridor needs at least one bottleneck".into(),
        );
    }
    if k == 0 {
        push(
            &mut v,
            ViolationKind::Shape,
            "at least one commuter group is required".into(),
        );
    }
    if c.free_flow_times.len() != n {
        push(
            &mut v,
            ViolationKind::Shape,
            format!(
                "{} free-flow times given for {n} bottlenecks",
                c.free_flow_times.len()
            ),
        );
    }
    if c.demands.len() != n {
        push(
            &mut v,
            ViolationKind::Shape,
            format!("{} demand rows given for {n} origins", c.demands.len()),
        );
    }
    for (i, row) in c.demands.iter().enumerate() {
        if row.len() != k {
            push(
                &mut v,
                ViolationKind::Shape,
                format!(
                    "demand row {} has {} entries, expected {k}",
                    i + 1,
                    row.len()
                ),
            );
        }
    }
    let all = c
        .capacities
        .iter()
        .chain(&c.free_flow_times)
        .chain(&c.betas)
        .chain(c.demands.iter().flatten());
    if all.clone().any(|x| !x.is_finite()) {
        push(
            &mut v,
            ViolationKind::NonFinite,
            "all inputs must be finite numbers".into(),
        );
    }
    if v.iter()
        .any(|x| matches!(x.kind, ViolationKind::Shape | ViolationKind::NonFinite))
    {
        return Diagnostics {
            ok: false,
            violations: v,
        };
    }

    for (i, &mu) in c.capacities.iter().enumerate() {
        if mu <= 0.0 {
            push(
                &mut v,
                ViolationKind::Capacity,
                format!("μ_{} = {mu} ≤ 0", i + 1),
            );
        }
    }
    for i in 0..n {
        let bar = c.capacity(i) - c.capacity(i + 1);
        if i + 1 < n && bar <= 0.0 {
            push(&mut v,
                ViolationKind::FalseBottleneck,
                format!(
                    "μ̄_{} = {bar} ≤ 0 (false-bottleneck necessary condition: capacities must strictly \
                     decrease upstream; reduce the network first)",
                    i + 1
                ),
            );
        }
    }
    if c.betas[0] != 1.0 {
        push(
            &mut v,
            ViolationKind::Beta,
            format!("β^1 = {} but must equal 1", c.betas[0]),
        );
    }
    if c.betas.windows(2).any(|w| w[1] >= w[0]) {
        push(
            &mut v,
            ViolationKind::Beta,
            "β not strictly decreasing".into(),
        );
    }
    if c.betas[k - 1] <= 0.0 {
        push(
            &mut v,
            ViolationKind::Beta,
            format!("β^{k} = {} must be positive", c.betas[k - 1]),
        );
    }
    for (i, w) in c.free_flow_times.windows(2).enumerate() {
        if w[1] <= w[0] {
            push(
                &mut v,
                ViolationKind::FreeFlowOrder,
                format!(
                    "d_{} = {} is not greater than d_{} = {}",
                    i + 2,
                    w[1],
                    i + 1,
                    w[0]
                ),
            );
        }
    }
    for (i, row) in c.demands.iter().enumerate() {
        for (kk, &q) in row.iter().enumerate() {
            if q < 0.0 {
                push(
                    &mut v,
                    ViolationKind::Demand,
                    format!("Q_{{{},{}}} = {q} < 0", i + 1, kk + 1),
                );
            }
        }
        if row.iter().sum::<f64>() <= 0.0 {
            push(
                &mut v,
                ViolationKind::Demand,
                format!("origin {} has no positive demand", i + 1),
            );
        }
    }
    if v.is_empty() {
        // Origin windows must nest strictly, or bottleneck i+1 is a false bottleneck.
        let len = |i: usize| c.demands[i].iter().sum::<f64>() / (c.capacity(i) - c.capacity(i + 1));
        for i in 0..n.saturating_sub(1) {
            let (inner, outer) = (len(i), len(i + 1));
            if outer <= inner {
                push(
                    &mut v,
                    ViolationKind::FalseBottleneck,
                    format!(
                        "T_{} = {outer} ≤ T_{} = {inner}: arrival windows do not nest, so bottleneck {} \
                         would be unpriced (false bottleneck); reduce the network first",
                        i + 2,
                        i + 1,
                        i + 2
                    ),
                );
            }
        }
    }
    Diagnostics {
        ok: v.is_empty(),
        violations: v,
    }
}

pub(crate) fn require_valid(c: &Corridor) -> Result<()> {
    let d = validate(c);
    if d.ok {
        Ok(())
    } else {
        Err(Error::InvalidCorridor(
            d.violations.into_iter().map(|v| v.message).collect(),
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivedQuantities {
    /// μ̄_i = μ_i − μ_{i+1}.
    pub mu_bar: Vec<f64>,
    /// β̄^k = β^k − β^{k+1}.
    pub beta_bar: Vec<f64>,
    /// Σ_{l ≤ k} Q_{i,l}.
    pub cumulative_demands: Vec<Vec<f64>>,
}

pub fn derive(c: &Corridor) -> Result<DerivedQuantities> {
    require_valid(c)?;
    let n = c.n_bottlenecks();
    let k = c.n_groups();
    let mu_bar = (0..n).map(|i| c.capacity(i) - c.capacity(i + 1)).collect();
    let beta_bar = (0..k)
        .map(|l| c.betas[l] - c.betas.get(l + 1).copied().unwrap_or(0.0))
        .collect();
    let cumulative_demands = c
        .demands
        .iter()
        .map(|row| {
            row.iter()
                .scan(0.0, |acc, q| {
                    *acc += q;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    Ok(DerivedQuantities {
        mu_bar,
        beta_bar,
        cumulative_demands,
    })
}
