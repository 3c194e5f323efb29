//! Rescales ground states into their normalised frame, measures the
//! distance to the limit profile, and compares the center-matched profile
//! scale with its predicted law.

use choquard::asymptotics::{distance_norm_for, limit_profile};
use choquard::closed_forms::constants;
use choquard::radial_grid::make_grid;
use choquard::rescale::{profile_distance, zeta_from_center};
use choquard::riesz::build_kernel;
use choquard::solver::{solve_ground_state, ProblemParams, Regime, SolverOptions};

fn main() -> choquard::Result<()> {
    let opts = SolverOptions::default();
    let base = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 1e2)?;
    let grid = make_grid(5, 1000.0, 800, 200.0)?;
    let kernel = build_kernel(&grid, base.alpha)?;
    let table = constants(5, 2.0, 3.0, &[&kernel])?;
    let limit = limit_profile(&base, &kernel, &table, &opts)?;
    let norm = distance_norm_for(&base);
    println!("{:>10} {:>14} {:>14} {:>14}", "epsilon", "zeta", "zeta/law", "d(frame)");
    for eps in [1e2, 1e4, 1e6] {
        let params = base.with_epsilon(eps);
        let gs = solve_ground_state(&params, &kernel, None, &opts)?;
        let fixed = profile_distance(&gs.w, &limit.field, norm)?;
        let plan = zeta_from_center(&gs.u, &params, &limit)?;
        println!("{eps:>10.1e} {:>14.6e} {:>14.8} {fixed:>14.6e}", plan.zeta, plan.zeta / plan.predicted_zeta);
    }
    Ok(())
}
