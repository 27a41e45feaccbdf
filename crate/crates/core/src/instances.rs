//! Small reference instances used by tests, benches and the CLI docs.

use crate::network::Corridor;
use crate::schedule::ScheduleDelayFn;

/// Two bottlenecks, two groups: μ = (2, 1), d = (1, 2), β = (1, 0.5),
/// Q = [[1, 1], [2, 2]], c piecewise linear with slopes (0.4, 0.9).
pub fn two_bottleneck() -> (Corridor, ScheduleDelayFn) {
    (
        Corridor::new(
            vec![2.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 0.5],
            vec![vec![1.0, 1.0], vec![2.0, 2.0]],
        ),
        ScheduleDelayFn::PiecewiseLinear {
            early: 0.4,
            late: 0.9,
        },
    )
}

/// Classic single bottleneck: μ = 1, Q = 2, d = 0, one group, same slopes.
pub fn single_bottleneck() -> (Corridor, ScheduleDelayFn) {
    (
        Corridor::new(vec![1.0], vec![0.0], vec![1.0], vec![vec![2.0]]),
        ScheduleDelayFn::PiecewiseLinear {
            early: 0.4,
            late: 0.9,
        },
    )
}
