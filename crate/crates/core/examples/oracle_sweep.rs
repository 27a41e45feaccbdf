//! Prints LP-oracle gaps on the two-bottleneck reference corridor for a
//! sequence of halving time steps.

use std::time::Instant;

use qrp_core::instances;
use qrp_core::oracle::{
    compare_to_closed_form, discretize, fixed_index_rho, solve_lp, LpOptions, Tolerances,
};
use qrp_core::solve_dso;

fn main() {
    let (c, f) = instances::two_bottleneck();
    let dso = solve_dso(&c, &f).expect("reference corridor solves");
    let alt = fixed_index_rho(&dso);
    println!(
        "{:>8} {:>6} {:>12} {:>12} {:>12} {:>12} {:>9}",
        "dt", "bins", "obj_gap", "price_gap", "rho_gap", "alt_rho_gap", "secs"
    );
    for dt in [0.04, 0.02, 0.01, 0.005, 0.0025] {
        let start = Instant::now();
        let lp = discretize(&c, &f, dt, 0.5).expect("horizon");
        let res = solve_lp(&lp, &LpOptions::default());
        let secs = start.elapsed().as_secs_f64();
        let rep = compare_to_closed_form(&lp, &res, &dso, &Tolerances::default());
        let alt_gap = qrp_core::oracle::compare::max_abs_gap(&res.rho, &alt);
        println!(
            "{dt:>8} {:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {secs:>9.3}",
            lp.n_bins, rep.objective_rel_gap, rep.price_gap, rep.rho_gap, alt_gap
        );
    }

    // Window endpoints are multiples of 1/13 here, so these steps put every
    // breakpoint on a bin edge.
    println!("aligned grids (padding 0.5 = 6.5/13):");
    for m in [10u32, 20, 40] {
        let dt = 1.0 / (13.0 * m as f64);
        let lp = discretize(&c, &f, dt, 0.5).expect("horizon");
        let res = solve_lp(&lp, &LpOptions::default());
        let rep = compare_to_closed_form(&lp, &res, &dso, &Tolerances::default());
        println!(
            "{dt:>8.5} {:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            lp.n_bins, rep.objective_rel_gap, rep.price_gap, rep.rho_gap
        );
    }
}
