//! Acceptance suite: one PASS/FAIL line per criterion 1–9, followed by the
//! individual checks of every failing criterion. Tolerances and runtime
//! budgets are the constants of `choquard::acceptance`.
//!
//! Kernels are cached under `CHOQUARD_CACHE_DIR` if set, else in the target
//! directory, so repeated runs skip the kernel builds.

use std::path::PathBuf;
use std::process::ExitCode;

use choquard::acceptance::{
    criterion_1, criterion_2, criterion_9, sweep_criteria, AcceptanceSettings, CampaignSet, CriterionReport,
};

fn main() -> ExitCode {
    let cache = std::env::var_os("CHOQUARD_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("kernel-cache"));
    let settings = AcceptanceSettings { cache_dir: Some(cache), ..AcceptanceSettings::default() };
    let mut reports: Vec<CriterionReport> = Vec::new();
    let mut record = |r: CriterionReport| {
        println!("{}", r.line());
        reports.push(r);
    };
    record(criterion_1(&settings));
    record(criterion_2(&settings));
    let set = CampaignSet::run(&settings);
    for r in sweep_criteria(&set) {
        record(r);
    }
    record(criterion_9(&settings));
    let failing: Vec<&CriterionReport> = reports.iter().filter(|r| !r.pass).collect();
    for r in &failing {
        print!("\n{}", r.details());
    }
    println!("\n{} of {} criteria pass", reports.len() - failing.len(), reports.len());
    if failing.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
