//! Runs the fast acceptance criteria (closed forms, Riesz potential and the
//! structural audits) and prints one line per criterion. The full suite,
//! including the ε campaigns, runs through `choquard-lab --mode verify-all`.

use choquard::acceptance::{criterion_1, criterion_2, criterion_9, AcceptanceSettings};

fn main() {
    let settings = AcceptanceSettings { cache_dir: std::env::var_os("CHOQUARD_CACHE_DIR").map(Into::into), ..Default::default() };
    for report in [criterion_1(&settings), criterion_2(&settings), criterion_9(&settings)] {
        println!("{}", report.details());
    }
}
