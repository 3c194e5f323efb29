//! Configuration-driven entry point: parse a TOML run configuration, dispatch
//! on the mode, and write versioned artifacts plus a manifest into one output
//! directory per campaign.
//!
//! Exit status: 0 on success, 1 when `verify-all` finds a failing criterion,
//! 2 for configuration errors (including parameters outside their regime),
//! 3 for solver failures in strict mode, 4 for I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::acceptance::{run_all, AcceptanceSettings, CampaignRun, CAMPAIGNS};
use crate::asymptotics::{
    compare, log_spaced, mass_curve, mass_curve_csv, mass_curve_report, predicted_exponents, report_csv, sweep,
    sweep_csv, MassCurveReport, ScalingReport, SweepConfig, SweepContext, SweepResult,
};
use crate::closed_forms::{constants, ConstantsTable};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic, write_json, CsvTable};
use crate::radial_grid::make_grid;
use crate::riesz::{build_kernel_cached, RieszKernel};
use crate::solver::{solve_ground_state, FieldTerms, Frame, GroundState, ProblemParams, SolverOptions};

pub const MANIFEST_SCHEMA: &str = "choquard-manifest/1";
pub const GROUND_STATE_SCHEMA: &str = "choquard-ground-state/1";
pub const CONSTANTS_SCHEMA: &str = "choquard-constants/1";
/// Environment variable naming the kernel cache directory; it takes
/// precedence over `cache_dir` in the configuration.
pub const CACHE_ENV: &str = "CHOQUARD_CACHE_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CRITERIA_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Constants,
    Solve,
    Sweep,
    MassCurve,
    VerifyAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: f64,
    pub node_count: usize,
    #[serde(default = "default_stretch")]
    pub stretch: f64,
}

fn default_stretch() -> f64 {
    1.0
}

/// The ε schedule: an explicit list, or `points` log-spaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default)]
    pub eps_min: Option<f64>,
    #[serde(default)]
    pub eps_max: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub multistart: usize,
}

impl ScheduleConfig {
    pub fn epsilons(&self) -> Result<Vec<f64>> {
        match (&self.epsilons, self.eps_min, self.eps_max, self.points) {
            (Some(list), None, None, None) => Ok(list.clone()),
            (None, Some(lo), Some(hi), Some(n)) => log_spaced(lo, hi, n),
            _ => Err(Error::Config(
                "schedule needs either `epsilons` or all of `eps_min`, `eps_max`, `points`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    /// Node counts of the grids the constants are computed on (same radius
    /// and grading as `[grid]`); the table reports the spread across them.
    pub node_counts: Vec<usize>,
}

/// A run configuration. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub problem: Option<ProblemParams>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub constants: Option<ConstantsConfig>,
    pub output: OutputConfig,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Seed of random fields (multistart and property suites).
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    7
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks that the sections the mode needs are present and valid.
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("mode {:?} needs a [{what}] section", self.mode)))
            }
        };
        if self.mode != Mode::VerifyAll {
            need(self.problem.is_some(), "problem")?;
            need(self.grid.is_some(), "grid")?;
        }
        if matches!(self.mode, Mode::Sweep | Mode::MassCurve) {
            need(self.schedule.is_some(), "schedule")?;
        }
        if let Some(p) = &self.problem {
            p.validate()?;
        }
        if let Some(s) = &self.schedule {
            let eps = s.epsilons()?;
            if let Some(p) = &self.problem {
                SweepConfig::new(*p, eps).validate()?;
            }
        }
        if let Some(c) = &self.constants {
            if c.node_counts.is_empty() {
                return Err(Error::Config("[constants] node_counts must not be empty".into()));
            }
        }
        Ok(())
    }
}

/// Command-line flags.
#[derive(Debug, Clone, Parser)]
#[command(name = "choquard-lab", version, about = "Choquard ground states, rescalings and scaling-law verification")]
pub struct Args {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured mode.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Size of the worker pool.
    #[arg(long, value_name = "K")]
    pub threads: Option<usize>,
    /// Treat any solver failure as fatal (exit 3).
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Serialize)]
struct Manifest {
    schema: &'static str,
    mode: Mode,
    code_version: &'static str,
    config: String,
    strict: bool,
    threads: usize,
    cache_dir: Option<PathBuf>,
    started_unix_seconds: u64,
    wall_seconds: f64,
    artifacts: Vec<String>,
    exit_status: i32,
}

/// Outcome of a run: exit status and the artifacts written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_status: i32,
    pub artifacts: Vec<PathBuf>,
    pub message: String,
}

/// Maps an error to its exit status.
pub fn exit_status_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Regime(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NONCONVERGENCE,
    }
}

/// Parses flags, runs, and returns the process exit status.
pub fn main_with_args(args: Args) -> i32 {
    if let Some(k) = args.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // the pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match load_config(&args) {
        Ok((cfg, text)) => {
            let outcome = run(&cfg, &text, &args);
            if !outcome.message.is_empty() {
                eprintln!("{}", outcome.message);
            }
            outcome.exit_status
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            exit_status_for(&e)
        }
    }
}

/// Reads the configuration named by `--config` and applies the overrides.
/// Without `--config`, only `--mode verify-all --out DIR` is accepted.
pub fn load_config(args: &Args) -> Result<(RunConfig, String)> {
    let (mut cfg, text) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            (RunConfig::parse(&text)?, text)
        }
        None => match (args.mode, &args.out) {
            (Some(Mode::VerifyAll), Some(out)) => {
                let cfg = RunConfig {
                    mode: Mode::VerifyAll,
                    problem: None,
                    grid: None,
                    solver: SolverOptions::default(),
                    schedule: None,
                    constants: None,
                    output: OutputConfig { dir: out.clone() },
                    cache_dir: None,
                    seed: default_seed(),
                };
                let text = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
                (cfg, text)
            }
            _ => return Err(Error::Config("--config is required unless running --mode verify-all --out DIR".into())),
        },
    };
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok((cfg, text))
}

fn cache_dir(cfg: &RunConfig) -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).filter(|p| !p.as_os_str().is_empty()).or_else(|| cfg.cache_dir.clone())
}

/// Executes a validated configuration; `config_text` is copied into the
/// output directory verbatim.
pub fn run(cfg: &RunConfig, config_text: &str, args: &Args) -> RunOutcome {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let out = &cfg.output.dir;
    let cache = cache_dir(cfg);
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<(i32, String)> {
        fs::create_dir_all(out)?;
        let copy = out.join("config.toml");
        write_atomic(&copy, config_text.as_bytes())?;
        artifacts.push(copy);
        match cfg.mode {
            Mode::Constants => run_constants(cfg, cache.as_deref(), &mut artifacts),
            Mode::Solve => run_solve(cfg, args.strict, cache.as_deref(), &mut artifacts),
            Mode::Sweep => run_sweep(cfg, args.strict, cache.as_deref(), &mut artifacts, false),
            Mode::MassCurve => run_sweep(cfg, args.strict, cache.as_deref(), &mut artifacts, true),
            Mode::VerifyAll => run_verify_all(cfg, cache.as_deref(), &mut artifacts),
        }
    })();
    let (exit_status, message) = match result {
        Ok(r) => r,
        Err(e) => (exit_status_for(&e), format!("error [{}]: {e}", e.kind())),
    };
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        mode: cfg.mode,
        code_version: env!("CARGO_PKG_VERSION"),
        config: config_text.to_string(),
        strict: args.strict,
        threads: rayon::current_num_threads(),
        cache_dir: cache,
        started_unix_seconds: started_unix,
        wall_seconds: started.elapsed().as_secs_f64(),
        artifacts: artifacts
            .iter()
            .map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string())
            .collect(),
        exit_status,
    };
    let path = out.join("manifest.json");
    match write_json(&path, &manifest) {
        Ok(()) => {
            artifacts.push(path);
            RunOutcome { exit_status, artifacts, message }
        }
        Err(e) => RunOutcome {
            exit_status: if exit_status == EXIT_OK { EXIT_IO } else { exit_status },
            artifacts,
            message: format!("{message}\nerror [io]: cannot write manifest: {e}"),
        },
    }
}

fn problem_kernel(cfg: &RunConfig, cache: Option<&Path>) -> Result<(ProblemParams, RieszKernel)> {
    let p = cfg.problem.ok_or_else(|| Error::Config("missing [problem]".into()))?;
    let g = cfg.grid.ok_or_else(|| Error::Config("missing [grid]".into()))?;
    let grid = make_grid(p.dim_n, g.r_max, g.node_count, g.stretch)?;
    let kernel = build_kernel_cached(&grid, p.alpha, cache)?;
    Ok((p, kernel))
}

fn run_constants(cfg: &RunConfig, cache: Option<&Path>, artifacts: &mut Vec<PathBuf>) -> Result<(i32, String)> {
    let p = cfg.problem.ok_or_else(|| Error::Config("missing [problem]".into()))?;
    let g = cfg.grid.ok_or_else(|| Error::Config("missing [grid]".into()))?;
    let counts = cfg.constants.as_ref().map(|c| c.node_counts.clone()).unwrap_or_else(|| vec![g.node_count]);
    let kernels: Vec<RieszKernel> = counts
        .iter()
        .map(|&n| make_grid(p.dim_n, g.r_max, n, g.stretch).and_then(|grid| build_kernel_cached(&grid, p.alpha, cache)))
        .collect::<Result<_>>()?;
    let refs: Vec<&RieszKernel> = kernels.iter().collect();
    let table = constants(p.dim_n, p.alpha, p.q, &refs)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        schema: &'static str,
        #[serde(flatten)]
        table: &'a ConstantsTable,
    }
    let path = cfg.output.dir.join("constants.json");
    write_json(&path, &Doc { schema: CONSTANTS_SCHEMA, table: &table })?;
    artifacts.push(path);
    Ok((EXIT_OK, String::new()))
}

#[derive(Serialize)]
struct GroundStateDoc {
    schema: &'static str,
    status: &'static str,
    error_kind: Option<&'static str>,
    error: Option<String>,
    params: ProblemParams,
    frame: Option<Frame>,
    energy: Option<f64>,
    frame_energy: Option<f64>,
    physical: Option<FieldTerms>,
    frame_terms: Option<FieldTerms>,
    center_value: Option<f64>,
    nehari_residual: Option<f64>,
    pohozaev_residual: Option<f64>,
    relative_residual: Option<f64>,
    grad_residual: Option<f64>,
    iterations: Option<usize>,
    newton_iterations: Option<usize>,
}

impl GroundStateDoc {
    fn converged(gs: &GroundState) -> Self {
        Self {
            schema: GROUND_STATE_SCHEMA,
            status: "converged",
            error_kind: None,
            error: None,
            params: gs.params,
            frame: Some(gs.frame),
            energy: Some(gs.energy),
            frame_energy: Some(gs.frame_energy),
            physical: Some(gs.physical_terms()),
            frame_terms: Some(gs.frame_norms),
            center_value: Some(gs.center_value),
            nehari_residual: Some(gs.nehari_residual),
            pohozaev_residual: Some(gs.pohozaev_residual),
            relative_residual: Some(gs.relative_residual),
            grad_residual: Some(gs.grad_residual),
            iterations: Some(gs.iterations),
            newton_iterations: Some(gs.newton_iterations),
        }
    }

    fn failed(params: ProblemParams, e: &Error) -> Self {
        Self {
            schema: GROUND_STATE_SCHEMA,
            status: "failed",
            error_kind: Some(e.kind()),
            error: Some(e.to_string()),
            params,
            frame: None,
            energy: None,
            frame_energy: None,
            physical: None,
            frame_terms: None,
            center_value: None,
            nehari_residual: None,
            pohozaev_residual: None,
            relative_residual: None,
            grad_residual: None,
            iterations: None,
            newton_iterations: None,
        }
    }
}

fn profile_csv(gs: &GroundState) -> CsvTable {
    let mut t = CsvTable::new(["r_frame", "w", "r", "u"]);
    for k in 0..gs.w.values.len() {
        t.push(vec![
            fmt_f64(gs.w.grid.nodes[k]),
            fmt_f64(gs.w.values[k]),
            fmt_f64(gs.u.grid.nodes[k]),
            fmt_f64(gs.u.values[k]),
        ]);
    }
    t
}

fn run_solve(cfg: &RunConfig, strict: bool, cache: Option<&Path>, artifacts: &mut Vec<PathBuf>) -> Result<(i32, String)> {
    let (p, kernel) = problem_kernel(cfg, cache)?;
    let path = cfg.output.dir.join("ground_state.json");
    match solve_ground_state(&p, &kernel, None, &cfg.solver) {
        Ok(gs) => {
            write_json(&path, &GroundStateDoc::converged(&gs))?;
            artifacts.push(path);
            let prof = cfg.output.dir.join("profile.csv");
            profile_csv(&gs).write(&prof)?;
            artifacts.push(prof);
            Ok((EXIT_OK, String::new()))
        }
        Err(e) if exit_status_for(&e) == EXIT_NONCONVERGENCE => {
            write_json(&path, &GroundStateDoc::failed(p, &e))?;
            artifacts.push(path);
            let msg = format!("solver [{}]: {e}", e.kind());
            Ok((if strict { EXIT_NONCONVERGENCE } else { EXIT_OK }, msg))
        }
        Err(e) => Err(e),
    }
}

/// Writes the sweep, report and mass-curve artifacts of a finished sweep
/// into `dir`.
pub fn write_sweep_artifacts(
    dir: &Path,
    result: &SweepResult,
    report: Option<&ScalingReport>,
    mass: Option<&MassCurveReport>,
    artifacts: &mut Vec<PathBuf>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut keep = |path: PathBuf| artifacts.push(path);
    let path = dir.join("sweep.csv");
    sweep_csv(result).write(&path)?;
    keep(path);
    let path = dir.join("sweep.json");
    write_json(&path, result)?;
    keep(path);
    if let Some(r) = report {
        let path = dir.join("report.csv");
        report_csv(r).write(&path)?;
        keep(path);
        let path = dir.join("report.json");
        write_json(&path, r)?;
        keep(path);
    }
    let path = dir.join("mass_curve.csv");
    mass_curve_csv(&mass_curve(result)).write(&path)?;
    keep(path);
    if let Some(m) = mass {
        let path = dir.join("mass_curve_report.json");
        write_json(&path, m)?;
        keep(path);
    }
    Ok(())
}

fn run_sweep(
    cfg: &RunConfig,
    strict: bool,
    cache: Option<&Path>,
    artifacts: &mut Vec<PathBuf>,
    mass_only: bool,
) -> Result<(i32, String)> {
    let (p, kernel) = problem_kernel(cfg, cache)?;
    let schedule = cfg.schedule.as_ref().ok_or_else(|| Error::Config("missing [schedule]".into()))?;
    let table = constants(p.dim_n, p.alpha, p.q, &[&kernel])?;
    let ctx = SweepContext::new(&p, &kernel, &table, &cfg.solver)?;
    let mut sc = SweepConfig::new(p, schedule.epsilons()?);
    sc.multistart = schedule.multistart;
    sc.seed = cfg.seed;
    sc.solver = cfg.solver.clone();
    let result = sweep(&sc, &ctx)?;
    let failures = result.entries.iter().filter(|e| !e.converged()).count();
    let report = if mass_only {
        None
    } else {
        predicted_exponents(&p).and_then(|pr| pr.with_constants(&table)).and_then(|pr| compare(&result, &pr)).ok()
    };
    let mass = mass_curve_report(&result, &table).ok();
    let dir = &cfg.output.dir;
    if mass_only {
        let path = dir.join("mass_curve.csv");
        mass_curve_csv(&mass_curve(&result)).write(&path)?;
        artifacts.push(path);
        if let Some(m) = &mass {
            let path = dir.join("mass_curve_report.json");
            write_json(&path, m)?;
            artifacts.push(path);
        }
    } else {
        write_sweep_artifacts(dir, &result, report.as_ref(), mass.as_ref(), artifacts)?;
    }
    if failures > 0 {
        let msg = format!("{failures} of {} sweep entries failed", result.entries.len());
        return Ok((if strict { EXIT_NONCONVERGENCE } else { EXIT_OK }, msg));
    }
    Ok((EXIT_OK, String::new()))
}

fn run_verify_all(cfg: &RunConfig, cache: Option<&Path>, artifacts: &mut Vec<PathBuf>) -> Result<(i32, String)> {
    let settings = AcceptanceSettings {
        cache_dir: cache.map(Path::to_path_buf),
        seed: cfg.seed,
        solver: cfg.solver.clone(),
        ..AcceptanceSettings::default()
    };
    let (summary, set) = run_all(&settings);
    let dir = &cfg.output.dir;
    for (c, run) in CAMPAIGNS.iter().zip(&set.runs) {
        let sub = dir.join("campaigns").join(c.name);
        if let Ok(CampaignRun { sweep, report, mass_curve, .. }) = run {
            write_sweep_artifacts(&sub, sweep, Some(report), Some(mass_curve), artifacts)?;
        }
    }
    let path = dir.join("acceptance.json");
    write_json(&path, &summary)?;
    artifacts.push(path);
    let path = dir.join("acceptance.txt");
    write_atomic(&path, summary.details().as_bytes())?;
    artifacts.push(path);
    print!("{}", summary.lines());
    let status = if summary.all_pass { EXIT_OK } else { EXIT_CRITERIA_FAILED };
    Ok((status, String::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = r#"
mode = "solve"

[problem]
dim_n = 3
alpha = 2.0
regime = "lower-critical"
q = 2.2
a_coef = 1.0
epsilon = 100.0

[grid]
r_max = 60.0
node_count = 200
stretch = 10.0

[output]
dir = "out"
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = RunConfig::parse(SOLVE).unwrap();
        assert_eq!(cfg.mode, Mode::Solve);
        assert_eq!(cfg.seed, 7);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SOLVE.replace("q = 2.2", "q = 2.2\nqq = 1.0");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
        let bad = SOLVE.replace("[grid]", "[grid]\nwidth = 3");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn regime_violation_is_a_config_error() {
        let cfg = RunConfig::parse(&SOLVE.replace("q = 2.2", "q = 1.5")).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(exit_status_for(&err), EXIT_CONFIG);
        assert!(err.to_string().contains("2 < q < 2 + 4/N"), "{err}");
    }

    #[test]
    fn schedules_need_one_complete_form() {
        let s = ScheduleConfig { epsilons: None, eps_min: Some(1.0), eps_max: Some(100.0), points: Some(3), multistart: 0 };
        let eps = s.epsilons().unwrap();
        assert_eq!(eps.len(), 3);
        for (e, want) in eps.iter().zip([1.0, 10.0, 100.0]) {
            assert!((e - want).abs() <= 1e-12 * want, "{e} vs {want}");
        }
        let s = ScheduleConfig { epsilons: Some(vec![1.0]), eps_min: Some(1.0), eps_max: None, points: None, multistart: 0 };
        assert!(s.epsilons().is_err());
    }

    #[test]
    fn sweep_mode_requires_a_schedule() {
        let cfg = RunConfig::parse(&SOLVE.replace("mode = \"solve\"", "mode = \"sweep\"")).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_status_for(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_status_for(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_status_for(&Error::SweepAborted { failed: 3, total: 4 }), EXIT_NONCONVERGENCE);
    }
}
