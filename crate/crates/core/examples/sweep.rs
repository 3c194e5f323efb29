//! Runs a short ε sweep and compares the fitted rates with the predicted
//! exponents and prefactors.

use choquard::asymptotics::{compare, log_spaced, predicted_exponents, sweep, SweepConfig, SweepContext};
use choquard::closed_forms::constants;
use choquard::radial_grid::make_grid;
use choquard::riesz::build_kernel;
use choquard::solver::{ProblemParams, Regime, SolverOptions};

fn main() -> choquard::Result<()> {
    let opts = SolverOptions::default();
    let params = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.8, 1.0, 1e3)?;
    let grid = make_grid(3, 200.0, 800, 20.0)?;
    let kernel = build_kernel(&grid, params.alpha)?;
    let table = constants(3, 2.0, 2.8, &[&kernel])?;
    let ctx = SweepContext::new(&params, &kernel, &table, &opts)?;
    let result = sweep(&SweepConfig::new(params, log_spaced(1e3, 1e9, 7)?), &ctx)?;
    let report = compare(&result, &predicted_exponents(&params)?.with_constants(&table)?)?;
    println!("{:<16} {:>10} {:>10} {:>10}  pass", "observable", "predicted", "fitted", "rel err");
    for row in &report.rows {
        println!(
            "{:<16} {:>10.4} {:>10.4} {:>10.2e}  {}",
            format!("{:?}", row.observable),
            row.predicted_exponent,
            row.fitted_exponent,
            row.relative_exponent_error,
            row.pass
        );
    }
    Ok(())
}
