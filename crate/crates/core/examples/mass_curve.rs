//! Reads a sweep as a family of normalised solutions and checks the
//! mass-curve laws: the growth of `‖∇u_a‖²` in the lower regime and the
//! limit energy in the upper regime.

use choquard::asymptotics::{log_spaced, mass_curve_report, sweep, SweepConfig, SweepContext};
use choquard::closed_forms::constants;
use choquard::radial_grid::make_grid;
use choquard::riesz::build_kernel;
use choquard::solver::{ProblemParams, Regime, SolverOptions};

fn main() -> choquard::Result<()> {
    let opts = SolverOptions::default();
    let params = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 1e2)?;
    let grid = make_grid(5, 1000.0, 800, 200.0)?;
    let kernel = build_kernel(&grid, params.alpha)?;
    let table = constants(5, 2.0, 3.0, &[&kernel])?;
    let ctx = SweepContext::new(&params, &kernel, &table, &opts)?;
    let result = sweep(&SweepConfig::new(params, log_spaced(1e2, 1e6, 5)?), &ctx)?;
    let report = mass_curve_report(&result, &table)?;
    println!("{:>14} {:>16} {:>16}", "a", "E(u_a)", "|grad u_a|^2");
    for m in &report.points {
        println!("{:>14.6e} {:>16.10} {:>16.10}", m.a, m.energy_e, m.grad_sq);
    }
    println!("limit energy {:?}, relative error at smallest a {:?}", report.limit_energy, report.limit_energy_error);
    Ok(())
}
