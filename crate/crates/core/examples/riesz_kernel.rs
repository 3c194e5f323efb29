//! Builds the radial Riesz kernel on a graded grid and checks it against the
//! closed-form potential of a uniform ball and the far-field law.

use choquard::radial_grid::{eval_at, make_grid, RadialField};
use choquard::riesz::{a_alpha, build_kernel, riesz_apply};

fn main() -> choquard::Result<()> {
    let (dim_n, alpha) = (3usize, 2.0);
    let grid = make_grid(dim_n, 8.0, 400, 1.0)?;
    let kernel = build_kernel(&grid, alpha)?;
    let ball = RadialField::from_fn(&grid, |r| if r <= 1.0 { 1.0 } else { 0.0 });
    let pot = riesz_apply(&kernel, &ball)?;
    // For N = 3, alpha = 2 the kernel is a_alpha / |x|, so outside the ball
    // the potential is a_alpha * |B_1| / r.
    let mass = 4.0 * std::f64::consts::PI / 3.0;
    println!("{:>6} {:>14} {:>14}", "r", "I*1_B", "far field");
    for r in [0.0, 0.5, 2.0, 4.0, 7.5] {
        let far = if r > 1.0 { format!("{:.8}", a_alpha(dim_n, alpha) * mass / r) } else { "-".into() };
        println!("{r:>6} {:>14.8} {far:>14}", eval_at(&pot, r));
    }
    Ok(())
}
