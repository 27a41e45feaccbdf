//! Random valid instances whose schedule-delay slopes sit inside the QRP band.

use crate::network::Corridor;
use crate::schedule::ScheduleDelayFn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub corridor: Corridor,
    pub schedule: ScheduleDelayFn,
}

#[derive(Clone, Copy, Debug)]
pub struct RandomSpec {
    pub max_bottlenecks: usize,
    pub max_groups: usize,
    /// Share of groups given zero demand (the first group of each origin is kept).
    pub zero_demand_prob: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_bottlenecks: 5,
            max_groups: 4,
            zero_demand_prob: 0.1,
        }
    }
}

pub fn instance_from_seed(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&mut rng, &RandomSpec::default())
}

pub fn random_instance<R: Rng>(rng: &mut R, spec: &RandomSpec) -> RandomInstance {
    let n = rng.gen_range(1..=spec.max_bottlenecks);
    let k = rng.gen_range(1..=spec.max_groups);

    let mut capacities = vec![0.0; n];
    capacities[n - 1] = rng.gen_range(0.5..2.0);
    for i in (0..n - 1).rev() {
        capacities[i] = capacities[i + 1] * (1.0 + rng.gen_range(0.2..1.5));
    }
    let mut free_flow_times = Vec::with_capacity(n);
    let mut d = rng.gen_range(0.0..1.0);
    for _ in 0..n {
        free_flow_times.push(d);
        d += rng.gen_range(0.1..1.0);
    }
    let mut betas = vec![1.0];
    for _ in 1..k {
        let last = *betas.last().unwrap();
        betas.push(last * rng.gen_range(0.3..0.9));
    }
    // Window-length increments ΔT_{i,k} = Q_{i,k}/μ̄_i grow upstream in every
    // group, so windows nest strictly in i for every k and no bottleneck is false.
    let mut increments: Vec<f64> = (0..k)
        .map(|kk| {
            if kk > 0 && rng.gen_bool(spec.zero_demand_prob) {
                0.0
            } else {
                rng.gen_range(0.1..1.0)
            }
        })
        .collect();
    let mut demands = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            for x in increments.iter_mut() {
                *x = if *x == 0.0 && rng.gen_bool(0.5) {
                    rng.gen_range(0.05..0.5)
                } else {
                    *x * rng.gen_range(1.05..1.5)
                };
            }
        }
        let mu_bar = capacities[i] - capacities.get(i + 1).copied().unwrap_or(0.0);
        demands.push(increments.iter().map(|x| x * mu_bar).collect::<Vec<f64>>());
    }

    // Open band: early slope below min(1 - μ_{i+1}/μ_i), late slope below min(μ_i/μ_{i+1} - 1).
    let (mut early_cap, mut late_cap) = (0.95_f64, 3.0_f64);
    for w in capacities.windows(2) {
        early_cap = early_cap.min(1.0 - w[1] / w[0]);
        late_cap = late_cap.min(w[0] / w[1] - 1.0);
    }
    let early = early_cap * rng.gen_range(0.05..0.95);
    let late = late_cap * rng.gen_range(0.05..0.95);

    RandomInstance {
        corridor: Corridor::new(capacities, free_flow_times, betas, demands),
        schedule: ScheduleDelayFn::PiecewiseLinear { early, late },
    }
}

/// Uniformly random subset of 1..=n (1-based, sorted).
pub fn random_subset<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (1..=n).filter(|_| rng.gen_bool(0.5)).collect()
}
