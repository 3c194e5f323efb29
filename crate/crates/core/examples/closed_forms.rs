//! Samples the closed-form limit profiles and reports their residuals in the
//! limit equations, together with the table of best constants.

use choquard::closed_forms::{
    calibrate_a0, constants, talenti, talenti_choquard_amplitude, talenti_residual,
};
use choquard::radial_grid::make_grid;
use choquard::riesz::build_kernel;

fn main() -> choquard::Result<()> {
    for (dim_n, alpha) in [(3usize, 2.0), (4, 2.0), (5, 2.0), (3, 1.0)] {
        let grid = make_grid(dim_n, 1000.0, 600, 40.0)?;
        let kernel = build_kernel(&grid, alpha)?;
        let v = talenti(&grid, 1.0)?;
        let res = talenti_residual(&kernel, &v.field)?;
        let t = talenti_choquard_amplitude(dim_n, alpha);
        let scaled = talenti_residual(&kernel, &v.field.scaled(t))?;
        println!("N={dim_n} alpha={alpha}: V_1 residual {res:.3e}, amplitude {t:.6}, scaled residual {scaled:.3e}");
    }
    let grid = make_grid(3, 1000.0, 600, 40.0)?;
    let kernel = build_kernel(&grid, 2.0)?;
    let cal = calibrate_a0(&kernel)?;
    println!("calibrated A_0 = {:.10} (residual {:.3e})", cal.a0, cal.residual);
    let table = constants(3, 2.0, 2.8, &[&kernel])?;
    println!("S_1 = {:.10}  S_q = {:.10}  S_alpha = {:.10}", table.s1, table.sq, table.s_alpha);
    println!("m_infty lower = {:.10}  upper = {:.10}", table.m_infty_lower, table.m_infty_upper);
    Ok(())
}
