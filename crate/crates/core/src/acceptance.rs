//! The acceptance suite: nine criteria evaluated on fixed, reproducible
//! campaigns. Every criterion reports named checks against tolerances pinned
//! in this module, so the same verdicts come out of the command-line
//! `verify-all` mode and the `acceptance` test target.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{
    compare, log_spaced, mass_curve_report, predicted_exponents, report_csv, sweep, sweep_csv, tail_exponent,
    MassCurveReport, Observable, ReportRow, ScalingReport, SweepConfig, SweepContext, SweepResult, ENTANGLED_TOL,
};
use crate::closed_forms::{
    calibrate_a0, constants, lower_extremal, profile_norms, radial_bounds, shoot_w, talenti, talenti_choquard_amplitude,
    talenti_residual, ConstantsTable, ProfileNorms,
};
use crate::error::{Error, Result};
use crate::radial_grid::{eval_at, grad_norm_sq_with, make_grid, OuterBoundary, RadialField};
use crate::rescale::{lower_w_map, map_v, second_scaling_map, v_map};
use crate::riesz::{a_alpha, build_kernel, build_kernel_cached, d_term, hls_sharp_constant, riesz_apply, RieszKernel};
use crate::solver::{
    action_terms, nehari_project, random_positive_field, solve_ground_state, FieldTerms, ProblemParams, Regime,
    SolverOptions,
};

pub const SUMMARY_SCHEMA: &str = "choquard-acceptance/1";

// Tolerances, as stated by the criteria.
pub const CLOSED_FORM_RESIDUAL_TOL: f64 = 1e-3;
pub const BALL_POTENTIAL_TOL: f64 = 1e-4;
pub const FAR_FIELD_TOL: f64 = 0.02;
pub const HLS_SLACK: f64 = 1e-8;
pub const NEHARI_TOL: f64 = 1e-10;
pub const POHOZAEV_TOL: f64 = 1e-6;
pub const MULTISTART_TOL: f64 = 1e-5;
pub const LOWER_EXPONENT_TOL: f64 = 0.10;
pub const LOWER_MASS_PREFACTOR_TOL: f64 = 0.03;
pub const LIMIT_TOL: f64 = 0.05;
pub const GAP_EXPONENT_TOL: f64 = 0.15;
pub const PROFILE_DISTANCE_TOL: f64 = 5e-2;
pub const TAIL_EXPONENT_SLACK: f64 = 0.2;
pub const MASS_EXPONENT_TOL: f64 = 0.10;
pub const TRANSFER_TOL: f64 = 1e-8;
/// Relative spread of the fitted decay constant across two resolutions.
pub const DECAY_CONSTANT_SPREAD_TOL: f64 = 0.05;

// Runtime budgets in seconds.
pub const SINGLE_CASE_BUDGET: f64 = 60.0;
pub const RIESZ_BUDGET: f64 = 120.0;
pub const SOLVE_BUDGET: f64 = 60.0;
pub const LOWER_BUDGET: f64 = 1200.0;
pub const UPPER_BUDGET: f64 = 1800.0;

/// Relation a checked value must satisfy with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Below,
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, relation: Relation, bound: f64) -> Self {
        let pass = match relation {
            Relation::Below => value < bound,
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
        };
        Self { name: name.into(), value, relation, bound, pass }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::Below, bound)
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::AtMost, bound)
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Relation::AtLeast, bound)
    }

    /// A yes/no property, recorded as value 1 (holds) or 0 against bound 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0)
    }

    pub fn describe(&self) -> String {
        let rel = match self.relation {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        let verdict = if self.pass { "ok  " } else { "FAIL" };
        format!("{verdict} {}: {:.6e} {rel} {:.6e}", self.name, self.value, self.bound)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub seconds: f64,
    pub pass: bool,
}

impl CriterionReport {
    fn new(id: u32, title: &str) -> Self {
        Self { id, title: title.into(), checks: Vec::new(), notes: Vec::new(), seconds: 0.0, pass: false }
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Records an error that prevented part of the evaluation.
    fn error(&mut self, what: &str, e: &Error) {
        self.push(Check::holds(format!("{what} completed"), false));
        self.note(format!("{what}: {e}"));
    }

    fn finish(mut self, started: Instant) -> Self {
        self.seconds = started.elapsed().as_secs_f64();
        self.pass = !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        self
    }

    /// One-line verdict, e.g. `criterion 4: PASS lower regime exponents (9/9 checks, 5.1 s)`.
    pub fn line(&self) -> String {
        let ok = self.checks.iter().filter(|c| c.pass).count();
        format!(
            "criterion {}: {} {} ({ok}/{} checks, {:.1} s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.checks.len(),
            self.seconds
        )
    }

    /// The verdict line followed by every check and note.
    pub fn details(&self) -> String {
        let mut s = self.line();
        for c in &self.checks {
            s.push_str("\n    ");
            s.push_str(&c.describe());
        }
        for n in &self.notes {
            s.push_str("\n    note: ");
            s.push_str(n);
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Campaigns

/// A fixed ε-sweep together with its grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Campaign {
    pub name: &'static str,
    pub dim_n: usize,
    pub alpha: f64,
    pub regime: Regime,
    pub q: f64,
    pub a_coef: f64,
    pub r_max: f64,
    pub node_count: usize,
    pub stretch: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
}

impl Campaign {
    pub fn params(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.dim_n, self.alpha, self.regime, self.q, self.a_coef, self.eps_min)
    }

    pub fn epsilons(&self) -> Result<Vec<f64>> {
        log_spaced(self.eps_min, self.eps_max, self.points)
    }
}

/// Lower regime, concentrating sub-case.
pub const LOWER_CONCENTRATING: Campaign = Campaign {
    name: "lower-concentrating",
    dim_n: 3,
    alpha: 2.0,
    regime: Regime::LowerCritical,
    q: 2.2,
    a_coef: 1.0,
    r_max: 1000.0,
    node_count: 1000,
    stretch: 40.0,
    eps_min: 1e2,
    eps_max: 1e4,
    points: 12,
};

/// Lower regime, local-dominated sub-case. The corrections decay like
/// `ε^{-1/3}` here, so the sweep reaches far out.
pub const LOWER_LOCAL: Campaign = Campaign {
    name: "lower-local",
    dim_n: 3,
    alpha: 2.0,
    regime: Regime::LowerCritical,
    q: 2.8,
    a_coef: 1.0,
    r_max: 200.0,
    node_count: 1000,
    stretch: 20.0,
    eps_min: 1e3,
    eps_max: 1e10,
    points: 12,
};

pub const UPPER_N5: Campaign = Campaign {
    name: "upper-n5",
    dim_n: 5,
    alpha: 2.0,
    regime: Regime::UpperCritical,
    q: 3.0,
    a_coef: 1.0,
    r_max: 1000.0,
    node_count: 2000,
    stretch: 200.0,
    eps_min: 1e2,
    eps_max: 1e8,
    points: 12,
};

pub const UPPER_N3: Campaign = Campaign {
    name: "upper-n3",
    dim_n: 3,
    alpha: 2.0,
    regime: Regime::UpperCritical,
    q: 5.0,
    a_coef: 1.0,
    r_max: 3000.0,
    node_count: 2000,
    stretch: 1000.0,
    eps_min: 1e2,
    eps_max: 3.1622776601683795e5,
    points: 8,
};

/// N = 4 at `q = 3.5`; the sweep starts at `ε = 10³` where the additive
/// offset of `‖w̃_ε‖²` no longer dominates its logarithmic growth.
pub const UPPER_N4: Campaign = Campaign {
    name: "upper-n4",
    dim_n: 4,
    alpha: 2.0,
    regime: Regime::UpperCritical,
    q: 3.5,
    a_coef: 1.0,
    r_max: 3000.0,
    node_count: 2000,
    stretch: 1000.0,
    eps_min: 1e3,
    eps_max: 1e7,
    points: 9,
};

pub const CAMPAIGNS: [Campaign; 5] = [LOWER_CONCENTRATING, LOWER_LOCAL, UPPER_N5, UPPER_N3, UPPER_N4];

#[derive(Debug, Clone)]
pub struct AcceptanceSettings {
    /// Directory for cached kernels (`None` builds every kernel afresh).
    pub cache_dir: Option<PathBuf>,
    /// Base seed of every random field and multistart.
    pub seed: u64,
    /// Random restarts at each sweep endpoint.
    pub multistart: usize,
    pub solver: SolverOptions,
}

impl Default for AcceptanceSettings {
    fn default() -> Self {
        Self { cache_dir: None, seed: 7, multistart: 3, solver: SolverOptions::default() }
    }
}

/// Everything produced by one campaign.
#[derive(Debug, Clone)]
pub struct CampaignRun {
    pub campaign: Campaign,
    pub constants: ConstantsTable,
    pub sweep: SweepResult,
    pub report: ScalingReport,
    pub mass_curve: MassCurveReport,
    pub seconds: f64,
}

pub fn run_campaign(c: &Campaign, s: &AcceptanceSettings) -> Result<CampaignRun> {
    let started = Instant::now();
    let params = c.params()?;
    let grid = make_grid(c.dim_n, c.r_max, c.node_count, c.stretch)?;
    let kernel = build_kernel_cached(&grid, c.alpha, s.cache_dir.as_deref())?;
    let table = constants(c.dim_n, c.alpha, c.q, &[&kernel])?;
    let ctx = SweepContext::new(&params, &kernel, &table, &s.solver)?;
    let mut cfg = SweepConfig::new(params, c.epsilons()?);
    cfg.multistart = s.multistart;
    cfg.seed = s.seed;
    cfg.solver = s.solver.clone();
    let result = sweep(&cfg, &ctx)?;
    let predictions = predicted_exponents(&params)?.with_constants(&table)?;
    let report = compare(&result, &predictions)?;
    let mass_curve = mass_curve_report(&result, &table)?;
    Ok(CampaignRun {
        campaign: *c,
        constants: table,
        sweep: result,
        report,
        mass_curve,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs the given campaigns on the worker pool; each result is independent
/// of scheduling.
pub fn run_campaigns(cs: &[Campaign], s: &AcceptanceSettings) -> Vec<Result<CampaignRun>> {
    cs.par_iter().map(|c| run_campaign(c, s)).collect()
}

fn campaign_or_fail<'a>(rep: &mut CriterionReport, run: &'a Result<CampaignRun>, name: &str) -> Option<&'a CampaignRun> {
    match run {
        Ok(r) => Some(r),
        Err(e) => {
            rep.error(&format!("campaign {name}"), e);
            None
        }
    }
}

fn row_or_fail<'a>(rep: &mut CriterionReport, run: &'a CampaignRun, o: Observable) -> Option<&'a ReportRow> {
    let r = run.report.row(o);
    if r.is_none() {
        rep.push(Check::holds(format!("{} row {o:?} present", run.campaign.name), false));
    }
    r
}

// ---------------------------------------------------------------------------
// Criterion 1: closed-form residuals

pub const CLOSED_FORM_GRID: (f64, usize, f64) = (1000.0, 2000, 40.0);

pub fn criterion_1(s: &AcceptanceSettings) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(1, "closed-form profile residuals");
    let cases: Vec<(usize, f64)> = [3usize, 4, 5].iter().flat_map(|&n| [1.0, 2.0].map(move |a| (n, a))).collect();
    let (r_max, nodes, stretch) = CLOSED_FORM_GRID;
    let results: Vec<Result<(f64, f64, Option<f64>, f64)>> = cases
        .par_iter()
        .map(|&(n, alpha)| {
            let t = Instant::now();
            let g = make_grid(n, r_max, nodes, stretch)?;
            let k = build_kernel_cached(&g, alpha, s.cache_dir.as_deref())?;
            let v = talenti(&g, 1.0)?.field;
            let res = talenti_residual(&k, &v)?;
            let res_scaled = talenti_residual(&k, &v.scaled(talenti_choquard_amplitude(n, alpha)))?;
            let u1 = if n == 3 && alpha == 2.0 { Some(calibrate_a0(&k)?.residual) } else { None };
            Ok((res, res_scaled, u1, t.elapsed().as_secs_f64()))
        })
        .collect();
    for (&(n, alpha), r) in cases.iter().zip(&results) {
        match r {
            Ok((res, res_scaled, u1, secs)) => {
                rep.push(Check::below(format!("V_1 residual N={n} alpha={alpha}"), *res, CLOSED_FORM_RESIDUAL_TOL));
                if let Some(u) = u1 {
                    rep.push(Check::below("U_1 residual N=3 alpha=2 (calibrated A_0)", *u, CLOSED_FORM_RESIDUAL_TOL));
                }
                rep.push(Check::below(format!("runtime N={n} alpha={alpha} [s]"), *secs, SINGLE_CASE_BUDGET));
                if alpha != 2.0 {
                    rep.note(format!(
                        "N={n} alpha={alpha}: the profile with amplitude factor t = {:.6} has residual {res_scaled:.3e}; \
                         the unscaled profile solves the equation only for alpha = 2",
                        talenti_choquard_amplitude(n, alpha)
                    ));
                }
            }
            Err(e) => rep.error(&format!("case N={n} alpha={alpha}"), e),
        }
    }
    rep.finish(started)
}

// ---------------------------------------------------------------------------
// Criterion 2: Riesz potential correctness

/// Newtonian potential of the uniform unit ball in `R³`.
fn ball_potential(r: f64) -> f64 {
    if r < 1.0 {
        0.5 - r * r / 6.0
    } else {
        1.0 / (3.0 * r)
    }
}

fn ball_potential_error() -> Result<f64> {
    let g = make_grid(3, 5.0, 1000, 1.0)?;
    let k = build_kernel(&g, 2.0)?;
    let f = RadialField::from_fn(&g, |r| if r < 1.0 { 1.0 } else { 0.0 });
    let v = riesz_apply(&k, &f)?;
    let mut worst: f64 = 0.0;
    for (&r, &x) in g.nodes.iter().zip(&v.values) {
        if (r - 1.0).abs() >= 0.1 {
            let want = ball_potential(r);
            worst = worst.max((x - want).abs() / want);
        }
    }
    Ok(worst)
}

/// `(I_α * f)(5) / (A_α 5^{α−N})` for a unit-mass bump supported in the unit ball.
fn far_field_ratio(n: usize, alpha: f64) -> Result<f64> {
    let g = make_grid(n, 8.0, 400, 1.0)?;
    let k = build_kernel(&g, alpha)?;
    let bump = RadialField::from_fn(&g, |r| if r < 1.0 { (1.0 - r * r).powi(2) } else { 0.0 });
    let f = bump.scaled(1.0 / bump.integral_abs_pow(1.0));
    let pot = riesz_apply(&k, &f)?;
    let r = 5.0;
    Ok(eval_at(&pot, r) / (a_alpha(n, alpha) * r.powf(alpha - n as f64)))
}

pub const HLS_FIELDS: usize = 50;

/// Largest `D_p(f) / (A_α C_α ‖f‖₂^{2p})`, `p = (N+α)/N`, and the number of
/// violations over the random fields.
fn hls_scan(seed: u64) -> Result<(f64, usize)> {
    let configs = [(3usize, 2.0), (4, 1.0), (5, 2.5)];
    let kernels: Vec<RieszKernel> = configs
        .iter()
        .map(|&(n, a)| make_grid(n, 30.0, 300, 4.0).and_then(|g| build_kernel(&g, a)))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for i in 0..HLS_FIELDS {
        let c = i % configs.len();
        let (n, alpha) = configs[c];
        let k = &kernels[c];
        let p = (n as f64 + alpha) / n as f64;
        let f = random_positive_field(&k.grid, seed.wrapping_add(i as u64));
        let bound = a_alpha(n, alpha) * hls_sharp_constant(n, alpha)? * f.inner(&f).powf(p);
        let ratio = d_term(k, &f, p) / bound;
        worst = worst.max(ratio);
        if ratio > 1.0 + HLS_SLACK {
            violations += 1;
        }
    }
    Ok((worst, violations))
}

pub fn criterion_2(s: &AcceptanceSettings) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(2, "Riesz potential correctness");
    match ball_potential_error() {
        Ok(e) => rep.push(Check::below("uniform ball potential, max relative error off the boundary", e, BALL_POTENTIAL_TOL)),
        Err(e) => rep.error("ball potential", &e),
    }
    for (n, alpha) in [(3usize, 2.0), (3, 1.0), (4, 1.5), (5, 2.0)] {
        match far_field_ratio(n, alpha) {
            Ok(r) => rep.push(Check::below(format!("far-field law N={n} alpha={alpha} at 5x support"), (r - 1.0).abs(), FAR_FIELD_TOL)),
            Err(e) => rep.error(&format!("far field N={n} alpha={alpha}"), &e),
        }
    }
    match hls_scan(s.seed) {
        Ok((worst, violations)) => {
            rep.push(Check::at_most(format!("HLS violations over {HLS_FIELDS} random fields"), violations as f64, 0.0));
            rep.note(format!("largest HLS ratio {worst:.6}"));
        }
        Err(e) => rep.error("HLS scan", &e),
    }
    let mut rep = rep.finish(started);
    rep.checks.push(Check::below("runtime [s]", rep.seconds, RIESZ_BUDGET));
    rep.pass = rep.checks.iter().all(|c| c.pass);
    rep
}

// ---------------------------------------------------------------------------
// Criterion 3: solver certificates

pub fn criterion_3(runs: &[&Result<CampaignRun>]) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(3, "solver certificates");
    let (mut nehari, mut pohozaev, mut slowest, mut spread) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut states, mut unconverged, mut audit_failures) = (0usize, 0usize, 0usize);
    for run in runs {
        let name = run.as_ref().map(|r| r.campaign.name).unwrap_or("campaign");
        let Some(r) = campaign_or_fail(&mut rep, run, name) else { continue };
        for e in &r.sweep.entries {
            slowest = slowest.max(e.wall_seconds);
            match &e.observables {
                Some(o) => {
                    states += 1;
                    nehari = nehari.max(o.nehari_residual);
                    pohozaev = pohozaev.max(o.pohozaev_residual);
                }
                None => unconverged += 1,
            }
        }
        if r.sweep.multistart.is_empty() {
            rep.push(Check::holds(format!("{name}: multistart audit ran"), false));
        }
        for m in &r.sweep.multistart {
            spread = spread.max(m.max_relative_deviation);
            audit_failures += m.failures;
        }
    }
    rep.push(Check::below("largest Nehari residual", nehari, NEHARI_TOL));
    rep.push(Check::below("largest Pohozaev residual", pohozaev, POHOZAEV_TOL));
    rep.push(Check::below("largest multistart energy deviation at sweep endpoints", spread, MULTISTART_TOL));
    rep.push(Check::at_most("failed multistart solves", audit_failures as f64, 0.0));
    rep.push(Check::below("slowest solve [s]", slowest, SOLVE_BUDGET));
    rep.note(format!("{states} ground states certified, {unconverged} sweep entries without a converged state"));
    rep.finish(started)
}

// ---------------------------------------------------------------------------
// Criteria 4–8: scaling laws

fn exponent_row(rep: &mut CriterionReport, run: &CampaignRun, o: Observable, stated: Option<f64>, tol: f64) {
    let Some(row) = row_or_fail(rep, run, o) else { return };
    if let Some(v) = stated {
        rep.push(Check::below(format!("{o:?} predicted exponent matches {v}"), (row.predicted_exponent - v).abs(), 1e-4));
    }
    rep.push(Check::at_most(format!("{o:?} exponent relative error"), row.relative_exponent_error, tol));
    rep.note(format!("{o:?}: fitted {:.5} vs predicted {:.5}", row.fitted_exponent, row.predicted_exponent));
}

fn prefactor_row(rep: &mut CriterionReport, run: &CampaignRun, o: Observable, label: &str, tol: f64) {
    let Some(row) = row_or_fail(rep, run, o) else { return };
    match row.prefactor_error {
        Some(err) => {
            rep.push(Check::at_most(format!("{label} relative error"), err, tol));
            rep.note(format!(
                "{label}: observed {:.6e} vs predicted {:.6e}",
                row.observed_prefactor,
                row.predicted_prefactor.unwrap_or(f64::NAN)
            ));
        }
        None => rep.push(Check::holds(format!("{label} has a predicted value"), false)),
    }
}

pub fn criterion_4(run: &Result<CampaignRun>) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(4, "lower regime exponents (N=3, alpha=2, q=2.2)");
    if let Some(r) = campaign_or_fail(&mut rep, run, LOWER_CONCENTRATING.name) {
        let (n, alpha, q) = (3.0, 2.0, 2.2);
        let grad = n * (2.0 * n - q * (n - 2.0)) / (alpha * (4.0 - n * (q - 2.0)));
        exponent_row(&mut rep, r, Observable::Center, Some(0.88235), LOWER_EXPONENT_TOL);
        exponent_row(&mut rep, r, Observable::L2Sq, Some(1.5), LOWER_EXPONENT_TOL);
        exponent_row(&mut rep, r, Observable::GradSq, Some(grad), LOWER_EXPONENT_TOL);
        exponent_row(&mut rep, r, Observable::DTerm, Some(2.5), LOWER_EXPONENT_TOL);
        prefactor_row(&mut rep, r, Observable::L2Sq, "prefactor of |u|_2^2 eps^-1.5 against S_1^(5/2)", LOWER_MASS_PREFACTOR_TOL);
        rep.push(Check::at_most("campaign runtime [s]", r.seconds, LOWER_BUDGET));
    }
    rep.finish(started)
}

pub fn criterion_5(run: &Result<CampaignRun>) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(5, "lower regime local-dominated limits (N=3, alpha=2, q=2.8)");
    if let Some(r) = campaign_or_fail(&mut rep, run, LOWER_LOCAL.name) {
        prefactor_row(&mut rep, r, Observable::FrameGradSq, "limit of A_eps", LIMIT_TOL);
        prefactor_row(&mut rep, r, Observable::FrameL2Sq, "limit of B_eps", LIMIT_TOL);
        prefactor_row(&mut rep, r, Observable::FrameLqQ, "limit of C_eps", LIMIT_TOL);
        prefactor_row(&mut rep, r, Observable::Energy, "least energy prefactor", LIMIT_TOL);
        rep.push(Check::at_most("campaign runtime [s]", r.seconds, LOWER_BUDGET));
    }
    rep.finish(started)
}

pub fn criterion_6(run: &Result<CampaignRun>) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(6, "upper regime N=5 (alpha=2, q=3)");
    if let Some(r) = campaign_or_fail(&mut rep, run, UPPER_N5.name) {
        exponent_row(&mut rep, r, Observable::EnergyGap, Some(-1.0 / 3.0), GAP_EXPONENT_TOL);
        let d: Vec<f64> = r.sweep.converged().map(|(_, o)| o.distance_matched).collect();
        match d.last() {
            Some(&last) => {
                rep.push(Check::below("H1 distance to V_rho0 at the largest eps (relative)", last, PROFILE_DISTANCE_TOL));
                let tail = &d[d.len().saturating_sub(4)..];
                rep.push(Check::holds(
                    "distance decreasing over the last 4 points",
                    tail.len() == 4 && tail.windows(2).all(|w| w[1] < w[0]),
                ));
                rep.note(format!("distances over the last points: {tail:?}"));
            }
            None => rep.push(Check::holds("converged entries present", false)),
        }
        rep.push(Check::at_most("campaign runtime [s]", r.seconds, UPPER_BUDGET));
    }
    rep.finish(started)
}

pub const TAIL_WINDOW: (f64, f64) = (1e-3, 1e-1);

fn criterion_7_case(rep: &mut CriterionReport, r: &CampaignRun) {
    let n = r.campaign.dim_n;
    let tag = format!("N={n}");
    let frame: Vec<f64> = r.sweep.converged().map(|(_, o)| o.frame.l2_sq).collect();
    rep.push(Check::holds(format!("{tag}: |w~|_2^2 grows along the sweep"), frame.windows(2).all(|w| w[1] > w[0])));
    if let Some(row) = row_or_fail(rep, r, Observable::FrameL2Sq) {
        match &row.bracketing {
            Some(b) => {
                rep.push(Check::at_most(format!("{tag}: |w~|_2^2 growth outside the rate envelopes"), b.worst_excess, ENTANGLED_TOL));
                rep.note(format!(
                    "{tag}: envelope slopes [{:.4}, {:.4}], observed average slopes {:.4?}",
                    b.lower_slope, b.upper_slope, b.observed_slopes
                ));
            }
            None => {
                rep.push(Check::holds(format!("{tag}: bracketing computed"), false));
                rep.note(format!("{tag}: {}", row.note));
            }
        }
    }
    prefactor_row(rep, r, Observable::FrameGradSq, &format!("{tag}: |grad w~|_2^2 at the largest eps"), LIMIT_TOL);
    prefactor_row(rep, r, Observable::FrameDTerm, &format!("{tag}: D(w~) at the largest eps"), LIMIT_TOL);
    let last = r.sweep.entries.iter().rev().find(|e| e.converged()).and_then(|e| e.frame_field.as_ref());
    match last.map(|w| tail_exponent(w, TAIL_WINDOW.0, TAIL_WINDOW.1)) {
        Some(Ok(fit)) => {
            rep.push(Check::at_least(format!("{tag}: fitted tail decay exponent"), fit.exponent, n as f64 - 2.0 - TAIL_EXPONENT_SLACK))
        }
        Some(Err(e)) => rep.error(&format!("{tag}: tail fit"), &e),
        None => rep.push(Check::holds(format!("{tag}: frame field at the largest eps"), false)),
    }
}

pub fn criterion_7(n3: &Result<CampaignRun>, n4: &Result<CampaignRun>) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(7, "upper regime N=3 (q=5) and N=4 (q=3.5)");
    for (run, c) in [(n3, UPPER_N3), (n4, UPPER_N4)] {
        if let Some(r) = campaign_or_fail(&mut rep, run, c.name) {
            criterion_7_case(&mut rep, r);
        }
    }
    rep.finish(started)
}

pub fn criterion_8(lower: &Result<CampaignRun>, upper: &Result<CampaignRun>) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(8, "mass curves");
    if let Some(r) = campaign_or_fail(&mut rep, lower, LOWER_CONCENTRATING.name) {
        let m = &r.mass_curve;
        match (m.grad_exponent_error, m.grad_fit.as_ref(), m.predicted_grad_exponent) {
            (Some(err), Some(fit), Some(pred)) => {
                rep.push(Check::at_most("exponent of |grad u_a|_2^2 against a, relative error", err, MASS_EXPONENT_TOL));
                rep.note(format!("gradient exponent: fitted {:.5} vs predicted {pred:.5}", fit.exponent));
            }
            _ => rep.push(Check::holds("gradient exponent fitted", false)),
        }
    }
    if let Some(r) = campaign_or_fail(&mut rep, upper, UPPER_N5.name) {
        let m = &r.mass_curve;
        match (m.limit_energy_error, m.limit_energy, m.energy_at_smallest_a) {
            (Some(err), Some(lim), Some(e)) => {
                rep.push(Check::at_most("E(u_a) at the smallest a against its limit, relative error", err, LIMIT_TOL));
                rep.note(format!("E(u_a) = {e:.6e} vs limit {lim:.6e}"));
            }
            _ => rep.push(Check::holds("limit energy compared", false)),
        }
    }
    rep.finish(started)
}

// ---------------------------------------------------------------------------
// Criterion 9: property suites

pub const TRANSFER_FIELDS: usize = 100;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn dirichlet_grad(u: &RadialField) -> f64 {
    grad_norm_sq_with(u, OuterBoundary::Dirichlet)
}

/// Largest relative defect of the norm-transfer identities of the
/// concentrating map, the v-form map, the upper-regime map and the second
/// scaling, each checked on a quarter of the random fields.
pub fn norm_transfer_defect(seed: u64) -> Result<f64> {
    let g3 = make_grid(3, 40.0, 200, 8.0)?;
    let g5 = make_grid(5, 40.0, 200, 8.0)?;
    let k3 = build_kernel(&g3, 2.0)?;
    let k5 = build_kernel(&g5, 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..TRANSFER_FIELDS {
        let eps = 10f64.powf(rng.gen_range(0.3..4.0));
        let field_seed = seed.wrapping_add(1000 + i as u64);
        let defects: Vec<f64> = match i % 4 {
            0 => {
                // ‖w‖² = ‖v‖², D(w) = D(v), ε^{−σ}‖∇w‖² = ‖∇v‖², ε^{−Nσ(q−2)/4}‖w‖_q^q = ‖v‖_q^q
                let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, eps)?;
                let u = random_positive_field(&g3, field_seed);
                let (wm, vm) = (lower_w_map(&p)?, v_map(&p)?);
                let (w, v) = (wm.apply(&u), vm.apply(&u));
                let (pl, q, s) = (p.p(), p.q, p.sigma());
                vec![
                    rel(v.inner(&v), w.inner(&w)),
                    rel(d_term(&vm.kernel_for(&k3), &v, pl), d_term(&wm.kernel_for(&k3), &w, pl)),
                    rel(dirichlet_grad(&v), eps.powf(-s) * dirichlet_grad(&w)),
                    rel(v.integral_abs_pow(q), eps.powf(-3.0 * s * (q - 2.0) / 4.0) * w.integral_abs_pow(q)),
                ]
            }
            1 => {
                // ‖u‖² = ε^{(4−N(q−2))/(2(q−2))}‖v‖², and ‖∇u‖², ‖u‖_q^q with ε^{(2N−q(N−2))/(2(q−2))}
                let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.8, 1.0, eps)?;
                let u = random_positive_field(&g3, field_seed);
                let v = map_v(&u, &p)?;
                let q = p.q;
                let e_mass = (4.0 - 3.0 * (q - 2.0)) / (2.0 * (q - 2.0));
                let e_grad = (6.0 - q) / (2.0 * (q - 2.0));
                vec![
                    rel(u.inner(&u), eps.powf(e_mass) * v.inner(&v)),
                    rel(dirichlet_grad(&u), eps.powf(e_grad) * dirichlet_grad(&v)),
                    rel(u.integral_abs_pow(q), eps.powf(e_grad) * v.integral_abs_pow(q)),
                ]
            }
            2 => {
                // ‖∇w‖² = ‖∇u‖², ε^{−σ}‖w‖² = ε‖u‖², ε^{−σ}‖w‖_q^q = ‖u‖_q^q, D(w) = D(u)
                let p = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, eps)?;
                let u = random_positive_field(&g5, field_seed);
                let vm = v_map(&p)?;
                let w = vm.apply(&u);
                let (s, q, pu) = (p.sigma(), p.q, p.p());
                vec![
                    rel(dirichlet_grad(&w), dirichlet_grad(&u)),
                    rel(eps.powf(-s) * w.inner(&w), eps * u.inner(&u)),
                    rel(eps.powf(-s) * w.integral_abs_pow(q), u.integral_abs_pow(q)),
                    rel(d_term(&vm.kernel_for(&k5), &w, pu), d_term(&k5, &u, pu)),
                ]
            }
            _ => {
                // ‖∇w̃‖² = ‖∇w‖², ξ²‖w̃‖² = ‖w‖², ξ^{N−(N−2)q/2}‖w̃‖_q^q = ‖w‖_q^q, D(w̃) = D(w)
                let xi = 10f64.powf(rng.gen_range(-1.0..1.0));
                let w = random_positive_field(&g3, field_seed);
                let map = second_scaling_map(3, xi);
                let wt = map.apply(&w);
                let (q, pu) = (5.0, 5.0);
                vec![
                    rel(dirichlet_grad(&wt), dirichlet_grad(&w)),
                    rel(xi * xi * wt.inner(&wt), w.inner(&w)),
                    rel(xi.powf(3.0 - 0.5 * q) * wt.integral_abs_pow(q), w.integral_abs_pow(q)),
                    rel(d_term(&map.kernel_for(&k3), &wt, pu), d_term(&k3, &w, pu)),
                ]
            }
        };
        worst = defects.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// Fiber derivative `φ(t) = d/dt I_ε(t v)` from the four integrals of `v`.
fn fiber_derivative(params: &ProblemParams, t: &FieldTerms, s: f64) -> f64 {
    let p = params.p();
    let q = params.q;
    s * (t.grad_sq + params.epsilon * t.l2_sq) - s.powf(2.0 * p - 1.0) * t.d_term - params.a_coef * s.powf(q - 1.0) * t.lq_q
}

fn fiber_action(params: &ProblemParams, t: &FieldTerms, s: f64) -> f64 {
    let p = params.p();
    let q = params.q;
    0.5 * s * s * (t.grad_sq + params.epsilon * t.l2_sq)
        - s.powf(2.0 * p) * t.d_term / (2.0 * p)
        - params.a_coef * s.powf(q) * t.lq_q / q
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FiberScan {
    /// Fields whose fiber derivative changes sign other than exactly once.
    pub non_unique: usize,
    /// Largest relative gap between the scanned root and the Nehari projection.
    pub root_mismatch: f64,
    /// Fields for which doubling the amplitude did not lower the root.
    pub non_monotone: usize,
    /// Fields for which `m_ε > max_t I_ε(t v)`.
    pub minimax_violations: usize,
    pub fields: usize,
}

pub const FIBER_FIELDS: usize = 10;

/// Scans `t ↦ φ(t)` over `t ∈ [10⁻⁴, 10⁴]` for random positive fields in
/// three parameter sets, and compares the lower-regime least energy with
/// the fiber maxima.
pub fn fiber_scan(seed: u64, solver: &SolverOptions) -> Result<FiberScan> {
    let g3 = make_grid(3, 60.0, 300, 10.0)?;
    let g5 = make_grid(5, 60.0, 300, 10.0)?;
    let k3 = build_kernel(&g3, 2.0)?;
    let k5 = build_kernel(&g5, 2.0)?;
    let sets = [
        (ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 100.0)?, &k3),
        (ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.8, 1.0, 100.0)?, &k3),
        (ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 100.0)?, &k5),
    ];
    let ground = solve_ground_state(&sets[0].0, &k3, None, solver)?;
    let ts: Vec<f64> = (0..=4000).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 4000.0)).collect();
    let mut out = FiberScan::default();
    for (j, (params, kernel)) in sets.iter().enumerate() {
        for i in 0..FIBER_FIELDS {
            out.fields += 1;
            let v = random_positive_field(&kernel.grid, seed.wrapping_add((100 * j + i) as u64));
            let terms = action_terms(params, &v, kernel)?;
            let phi: Vec<f64> = ts.iter().map(|&t| fiber_derivative(params, &terms, t)).collect();
            let changes: Vec<usize> = (1..ts.len()).filter(|&k| (phi[k - 1] > 0.0) != (phi[k] > 0.0)).collect();
            if changes.len() != 1 {
                out.non_unique += 1;
                continue;
            }
            let (mut lo, mut hi) = (ts[changes[0] - 1], ts[changes[0]]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if fiber_derivative(params, &terms, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            let (t_proj, _) = nehari_project(params, &v, kernel)?;
            out.root_mismatch = out.root_mismatch.max(rel(t_proj, root));
            let (t_double, _) = nehari_project(params, &v.scaled(2.0), kernel)?;
            if !(t_double < t_proj) {
                out.non_monotone += 1;
            }
            if j == 0 {
                let peak = fiber_action(params, &terms, root);
                if ground.energy > peak * (1.0 + 1e-12) {
                    out.minimax_violations += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Ratio of a profile to the radial decay bound and its spread between two
/// resolutions.
#[derive(Debug, Clone, Serialize)]
pub struct DecayAudit {
    pub profile: String,
    pub ratio_coarse: f64,
    pub ratio_fine: f64,
}

impl DecayAudit {
    pub fn spread(&self) -> f64 {
        rel(self.ratio_coarse, self.ratio_fine)
    }
}

fn decay_ratio(field: &RadialField, norms: &ProfileNorms, homogeneous: bool) -> f64 {
    let b = radial_bounds(field, norms);
    if homogeneous {
        b.d12_ratio
    } else {
        b.h1_ratio
    }
}

/// Radial decay bounds (`H¹` form, or the `D^{1,2}` form for Talenti profiles
/// that are not square integrable) on every kind of produced profile.
pub fn decay_audits(solver: &SolverOptions) -> Result<Vec<DecayAudit>> {
    let mut out = Vec::new();
    let resolutions = [(600usize, 20.0), (1200, 20.0)];
    let mut ratios = |name: String, make: &dyn Fn(usize, f64) -> Result<f64>| -> Result<()> {
        let a = make(resolutions[0].0, resolutions[0].1)?;
        let b = make(resolutions[1].0, resolutions[1].1)?;
        out.push(DecayAudit { profile: name, ratio_coarse: a, ratio_fine: b });
        Ok(())
    };
    for n in [3usize, 4, 5] {
        ratios(format!("V_1 N={n}"), &|nodes, st| {
            let g = make_grid(n, 200.0, nodes, st)?;
            let v = talenti(&g, 1.0)?;
            Ok(decay_ratio(&v.field, &profile_norms(&v, 3.0), n < 5))
        })?;
    }
    ratios("U_1 N=3".into(), &|nodes, st| {
        let g = make_grid(3, 200.0, nodes, st)?;
        let k = build_kernel(&g, 2.0)?;
        let u = lower_extremal(&g, 1.0, calibrate_a0(&k)?.a0)?;
        Ok(decay_ratio(&u.field, &profile_norms(&u, 2.2), false))
    })?;
    ratios("W N=3 q=2.8".into(), &|nodes, st| {
        let g = make_grid(3, 60.0, nodes, st)?;
        let w = shoot_w(3, 2.8, 1.0, &g)?;
        Ok(decay_ratio(&w.field, &profile_norms(&w, 2.8), false))
    })?;
    ratios("ground state N=3 q=2.2 eps=100".into(), &|nodes, st| {
        let g = make_grid(3, 60.0, nodes / 2, st / 2.0)?;
        let k = build_kernel(&g, 2.0)?;
        let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 100.0)?;
        let gs = solve_ground_state(&p, &k, None, solver)?;
        let t = gs.physical_terms();
        let norms = ProfileNorms { l2_sq: t.l2_sq, grad_sq: t.grad_sq, lq_q: t.lq_q, q: p.q };
        Ok(decay_ratio(&gs.u, &norms, false))
    })?;
    Ok(out)
}

/// Renders the artifacts of a small campaign twice (the second time with a
/// kernel loaded from a fresh cache) and reports whether they are
/// byte-identical.
pub fn reproducibility_check(seed: u64, solver: &SolverOptions, scratch: &Path) -> Result<bool> {
    let c = Campaign { r_max: 300.0, node_count: 300, stretch: 10.0, eps_min: 1e2, eps_max: 1e3, points: 6, ..LOWER_CONCENTRATING };
    let render = |kernel: &RieszKernel| -> Result<Vec<String>> {
        let params = c.params()?;
        let table = constants(c.dim_n, c.alpha, c.q, &[kernel])?;
        let ctx = SweepContext::new(&params, kernel, &table, solver)?;
        let mut cfg = SweepConfig::new(params, c.epsilons()?);
        cfg.seed = seed;
        cfg.multistart = 2;
        cfg.solver = solver.clone();
        let result = sweep(&cfg, &ctx)?;
        let report = compare(&result, &predicted_exponents(&params)?.with_constants(&table)?)?;
        let json = serde_json::to_string_pretty(&result).map_err(|e| Error::Config(e.to_string()))?;
        Ok(vec![sweep_csv(&result).render(), report_csv(&report).render(), json])
    };
    let grid = make_grid(c.dim_n, c.r_max, c.node_count, c.stretch)?;
    let cold = render(&build_kernel(&grid, c.alpha)?)?;
    let dir = scratch.join(format!("repro-cache-{}", std::process::id()));
    let _ = build_kernel_cached(&grid, c.alpha, Some(&dir))?;
    let warm = render(&build_kernel_cached(&grid, c.alpha, Some(&dir))?)?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(cold == warm)
}

pub fn criterion_9(s: &AcceptanceSettings) -> CriterionReport {
    let started = Instant::now();
    let mut rep = CriterionReport::new(9, "property suites");
    match norm_transfer_defect(s.seed) {
        Ok(d) => rep.push(Check::below(format!("norm-transfer identities on {TRANSFER_FIELDS} random fields"), d, TRANSFER_TOL)),
        Err(e) => rep.error("norm transfer", &e),
    }
    match fiber_scan(s.seed, &s.solver) {
        Ok(f) => {
            rep.push(Check::at_most("fibers without a unique critical point", f.non_unique as f64, 0.0));
            rep.push(Check::below("fiber root vs Nehari projection", f.root_mismatch, 1e-8));
            rep.push(Check::at_most("fibers whose root does not drop under doubling", f.non_monotone as f64, 0.0));
            rep.push(Check::at_most("least energy above a fiber maximum", f.minimax_violations as f64, 0.0));
            rep.note(format!("{} fibers scanned", f.fields));
        }
        Err(e) => rep.error("fiber scan", &e),
    }
    match decay_audits(&s.solver) {
        Ok(audits) => {
            for a in &audits {
                rep.push(Check::at_most(format!("{}: decay bound ratio", a.profile), a.ratio_fine, 1.0));
                rep.push(Check::below(format!("{}: decay constant spread across grids", a.profile), a.spread(), DECAY_CONSTANT_SPREAD_TOL));
            }
        }
        Err(e) => rep.error("decay audit", &e),
    }
    let scratch = s.cache_dir.clone().unwrap_or_else(std::env::temp_dir);
    match reproducibility_check(s.seed, &s.solver, &scratch) {
        Ok(same) => rep.push(Check::holds("byte-identical artifacts with cold and warm kernel cache", same)),
        Err(e) => rep.error("reproducibility", &e),
    }
    rep.finish(started)
}

// ---------------------------------------------------------------------------
// The whole suite

#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceSummary {
    pub schema: String,
    pub criteria: Vec<CriterionReport>,
    pub all_pass: bool,
}

impl AcceptanceSummary {
    pub fn lines(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            s.push_str(&c.line());
            s.push('\n');
        }
        s
    }

    pub fn details(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            s.push_str(&c.details());
            s.push('\n');
        }
        s
    }
}

/// Campaign results in `CAMPAIGNS` order.
pub struct CampaignSet {
    pub runs: Vec<Result<CampaignRun>>,
}

impl CampaignSet {
    pub fn run(s: &AcceptanceSettings) -> Self {
        Self { runs: run_campaigns(&CAMPAIGNS, s) }
    }

    pub fn get(&self, c: &Campaign) -> &Result<CampaignRun> {
        let i = CAMPAIGNS.iter().position(|x| x.name == c.name).expect("known campaign");
        &self.runs[i]
    }
}

/// Evaluates criteria 3–8 on a completed campaign set.
pub fn sweep_criteria(set: &CampaignSet) -> Vec<CriterionReport> {
    let all: Vec<&Result<CampaignRun>> = set.runs.iter().collect();
    vec![
        criterion_3(&all),
        criterion_4(set.get(&LOWER_CONCENTRATING)),
        criterion_5(set.get(&LOWER_LOCAL)),
        criterion_6(set.get(&UPPER_N5)),
        criterion_7(set.get(&UPPER_N3), set.get(&UPPER_N4)),
        criterion_8(set.get(&LOWER_CONCENTRATING), set.get(&UPPER_N5)),
    ]
}

/// Runs all nine criteria.
pub fn run_all(s: &AcceptanceSettings) -> (AcceptanceSummary, CampaignSet) {
    let c1 = criterion_1(s);
    let c2 = criterion_2(s);
    let set = CampaignSet::run(s);
    let mut criteria = vec![c1, c2];
    criteria.extend(sweep_criteria(&set));
    criteria.push(criterion_9(s));
    let all_pass = criteria.iter().all(|c| c.pass);
    (AcceptanceSummary { schema: SUMMARY_SCHEMA.into(), criteria, all_pass }, set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_compare_in_the_stated_direction() {
        assert!(Check::below("a", 0.5, 1.0).pass);
        assert!(!Check::below("a", 1.0, 1.0).pass);
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(Check::at_least("a", 1.0, 1.0).pass);
        assert!(!Check::below("a", f64::NAN, 1.0).pass);
        assert!(!Check::holds("a", false).pass);
    }

    #[test]
    fn empty_criteria_do_not_pass() {
        let r = CriterionReport::new(1, "x").finish(Instant::now());
        assert!(!r.pass);
        assert!(r.line().starts_with("criterion 1: FAIL x (0/0 checks"));
    }

    #[test]
    fn campaigns_are_valid_and_distinct() {
        for c in CAMPAIGNS {
            c.params().unwrap();
            let e = c.epsilons().unwrap();
            assert_eq!(e.len(), c.points);
            assert_eq!(e[0], c.eps_min);
        }
        let mut names: Vec<_> = CAMPAIGNS.iter().map(|c| c.name).collect();
        names.dedup();
        assert_eq!(names.len(), CAMPAIGNS.len());
    }

    #[test]
    fn ball_potential_is_continuous_at_the_surface() {
        assert!((ball_potential(1.0 - 1e-12) - ball_potential(1.0)).abs() < 1e-11);
    }
}
