//! Solves for one ground state and prints its energy and certificates.

use choquard::radial_grid::make_grid;
use choquard::riesz::build_kernel;
use choquard::solver::{solve_ground_state, ProblemParams, Regime, SolverOptions};

fn main() -> choquard::Result<()> {
    let params = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.8, 1.0, 1e4)?;
    let grid = make_grid(3, 200.0, 600, 20.0)?;
    let kernel = build_kernel(&grid, params.alpha)?;
    let gs = solve_ground_state(&params, &kernel, None, &SolverOptions::default())?;
    let phys = gs.physical_terms();
    println!("epsilon            {:e}", params.epsilon);
    println!("least energy       {:.12e}", gs.energy);
    println!("|grad u|^2         {:.12e}", phys.grad_sq);
    println!("|u|_2^2            {:.12e}", phys.l2_sq);
    println!("u(0)               {:.12e}", gs.center_value);
    println!("Nehari residual    {:.3e}", gs.nehari_residual);
    println!("Pohozaev residual  {:.3e}", gs.pohozaev_residual);
    println!("relative residual  {:.3e}", gs.relative_residual);
    println!("iterations         {} descent + {} Newton", gs.iterations, gs.newton_iterations);
    Ok(())
}
