//! ε-sweeps with warm-started continuation, the observables collected along
//! them, power-law and log-corrected rate fits, mass curves, and the
//! comparison of fitted rates with the predicted scaling laws.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_forms::{lower_extremal, m_local, rho0, shoot_w, talenti, ConstantsTable, LimitKind, LimitProfile};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::radial_grid::RadialField;
use crate::rescale::{profile_distance, tau1, tau2, zeta_from_center, DistanceNorm};
use crate::riesz::RieszKernel;
use crate::solver::{
    random_positive_field, solve_ground_state, FieldTerms, GroundState, LowerSubcase, ProblemParams, Regime,
    SolverOptions,
};

/// Schema tag of the sweep CSV and JSON artifacts.
pub const SWEEP_SCHEMA: &str = "choquard-sweep/1";
/// Schema tag of the scaling report.
pub const REPORT_SCHEMA: &str = "choquard-scaling-report/1";
/// Schema tag of the mass-curve artifacts.
pub const MASS_CURVE_SCHEMA: &str = "choquard-mass-curve/1";

/// Default exponent tolerance for pure powers.
pub const EXPONENT_TOL: f64 = 0.10;
/// Exponent tolerance for rates entangled with unknown prefactors (gaps,
/// log-corrected envelopes).
pub const ENTANGLED_TOL: f64 = 0.15;
/// Absolute tolerance on a fitted exponent whose predicted value is zero.
pub const ZERO_EXPONENT_TOL: f64 = 0.05;
/// Default relative tolerance on limit prefactors.
pub const PREFACTOR_TOL: f64 = 0.05;

/// `count` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
        return Err(Error::InvalidArgument(format!(
            "log-spaced schedule needs 0 < lo < hi and at least 2 points, got [{lo}, {hi}] x {count}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// A sweep campaign for one parameter tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Parameter template; its `epsilon` is replaced by each schedule value.
    pub params: ProblemParams,
    /// Strictly increasing frequencies.
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Random restarts at the first and last ε (energy audit).
    #[serde(default)]
    pub multistart: usize,
    #[serde(default)]
    pub seed: u64,
    /// Entries whose certificates exceed these are excluded and flagged.
    #[serde(default = "default_nehari_tol")]
    pub nehari_tol: f64,
    #[serde(default = "default_pohozaev_tol")]
    pub pohozaev_tol: f64,
}

fn default_nehari_tol() -> f64 {
    1e-10
}

fn default_pohozaev_tol() -> f64 {
    1e-6
}

impl SweepConfig {
    pub fn new(params: ProblemParams, epsilons: Vec<f64>) -> Self {
        Self {
            params,
            epsilons,
            solver: SolverOptions::default(),
            multistart: 0,
            seed: 0,
            nehari_tol: default_nehari_tol(),
            pohozaev_tol: default_pohozaev_tol(),
        }
    }

    /// Checks the schedule (non-empty, positive, strictly increasing) and
    /// the problem parameters.
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidArgument("the epsilon schedule is empty".into()));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidArgument("epsilons must be positive and finite".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("epsilons must be strictly increasing".into()));
        }
        self.params.with_epsilon(self.epsilons[0]).validate()
    }
}

/// Everything a sweep compares against: the kernel of the frame grid, the
/// constants table and the limit profile sampled on the frame grid.
#[derive(Debug, Clone)]
pub struct SweepContext<'a> {
    pub kernel: &'a RieszKernel,
    pub constants: &'a ConstantsTable,
    pub limit: LimitProfile,
}

impl<'a> SweepContext<'a> {
    pub fn new(
        params: &ProblemParams,
        kernel: &'a RieszKernel,
        constants: &'a ConstantsTable,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let limit = limit_profile(params, kernel, constants, opts)?;
        Ok(Self { kernel, constants, limit })
    }
}

fn check_constants(params: &ProblemParams, constants: &ConstantsTable) -> Result<()> {
    if constants.dim_n != params.dim_n || constants.alpha != params.alpha || constants.q != params.q {
        return Err(Error::InvalidArgument(format!(
            "constants table is for (N={}, alpha={}, q={}), parameters are (N={}, alpha={}, q={})",
            constants.dim_n, constants.alpha, constants.q, params.dim_n, params.alpha, params.q
        )));
    }
    if constants.per_grid.is_empty() {
        return Err(Error::InvalidArgument("constants table has no grid entries".into()));
    }
    Ok(())
}

/// The profile the rescaled ground states converge to, sampled on the
/// kernel's grid:
///
/// * lower, `q < q_b`: `U_{ρ₀}` with the calibrated `A₀`;
/// * lower, `q > q_b`: the local ground state `W`;
/// * lower, `q = q_b`: the solution of the ε-independent mixed problem,
///   computed once by the solver;
/// * upper, `N ≥ 5`: `V_{ρ₀}`;
/// * upper, `N ∈ {3, 4}`: `V₁`, compared after center matching.
pub fn limit_profile(
    params: &ProblemParams,
    kernel: &RieszKernel,
    constants: &ConstantsTable,
    opts: &SolverOptions,
) -> Result<LimitProfile> {
    params.validate()?;
    check_constants(params, constants)?;
    let grid = &kernel.grid;
    let last = constants.per_grid.last().expect("checked non-empty");
    match params.regime {
        Regime::LowerCritical => match params.lower_subcase() {
            Some(LowerSubcase::Concentrating) => {
                let r = rho0(Regime::LowerCritical, params.dim_n, params.alpha, params.q, params.a_coef, &last.u1_norms)?;
                lower_extremal(grid, r.value, constants.a0)
            }
            Some(LowerSubcase::LocalDominated) => shoot_w(params.dim_n, params.q, params.a_coef, grid),
            _ => {
                let gs = solve_ground_state(&params.with_epsilon(1.0), kernel, None, opts)?;
                Ok(LimitProfile { kind: LimitKind::MixedLimit, rho: 1.0, field: gs.w })
            }
        },
        Regime::UpperCritical => {
            if params.dim_n >= 5 {
                let r = rho0(Regime::UpperCritical, params.dim_n, params.alpha, params.q, params.a_coef, &last.v1_norms)?;
                talenti(grid, r.value)
            } else {
                talenti(grid, 1.0)
            }
        }
    }
}

/// Norm in which rescaled profiles are compared with the limit: `H¹` when
/// the limit is square integrable, `D^{1,2}` otherwise (upper regime with
/// `N ≤ 4`).
pub fn distance_norm_for(params: &ProblemParams) -> DistanceNorm {
    match params.regime {
        Regime::UpperCritical if params.dim_n <= 4 => DistanceNorm::D12,
        _ => DistanceNorm::H1,
    }
}

/// Observables of one converged sweep entry. Physical quantities refer to
/// `u_ε`; `frame` holds the integrals of the natural-frame field (the w-,
/// v- or second-scaled profile, depending on the regime).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub energy: f64,
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub lq_q: f64,
    pub d_term: f64,
    pub center: f64,
    pub frame_energy: f64,
    pub frame: FieldTerms,
    /// `τ₁` (lower) or `τ₂` (upper) of the frame field.
    pub tau: f64,
    pub distance_norm: DistanceNorm,
    /// Distance of the frame field to the limit, relative to the limit's norm.
    pub distance_fixed: f64,
    /// The same after center-matched rescaling of `u_ε`.
    pub distance_matched: f64,
    pub zeta: f64,
    pub xi: f64,
    pub predicted_zeta: f64,
    pub relative_residual: f64,
    pub nehari_residual: f64,
    pub pohozaev_residual: f64,
    pub grad_residual: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
}

/// Outcome of one sweep entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum EntryStatus {
    Converged,
    Failed { kind: String, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    #[serde(flatten)]
    pub status: EntryStatus,
    pub observables: Option<Observables>,
    /// Natural-frame field on the kernel's grid (not serialized).
    #[serde(skip)]
    pub frame_field: Option<RadialField>,
    /// Wall-clock seconds spent on this entry (not serialized, so artifacts
    /// stay byte-identical across runs).
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl SweepEntry {
    pub fn converged(&self) -> bool {
        self.status == EntryStatus::Converged
    }
}

/// Energies reached from random initial fields at one ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartAudit {
    pub epsilon: f64,
    pub reference_energy: f64,
    pub energies: Vec<f64>,
    pub failures: usize,
    /// `max |E_k − E_ref| / |E_ref|` over the converged restarts.
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema: String,
    pub params: ProblemParams,
    pub limit_kind: LimitKind,
    pub entries: Vec<SweepEntry>,
    pub multistart: Vec<MultistartAudit>,
}

impl SweepResult {
    /// `(ε, observables)` of the converged entries.
    pub fn converged(&self) -> impl Iterator<Item = (f64, &Observables)> + '_ {
        self.entries.iter().filter(|e| e.converged()).filter_map(|e| e.observables.as_ref().map(|o| (e.epsilon, o)))
    }

    pub fn converged_count(&self) -> usize {
        self.converged().count()
    }

    /// `(ε, f(observables))` over the converged entries.
    pub fn pairs<F: Fn(&Observables) -> f64>(&self, f: F) -> Vec<(f64, f64)> {
        self.converged().map(|(e, o)| (e, f(o))).collect()
    }

    /// Converged entry with the largest ε.
    pub fn last_converged(&self) -> Option<&SweepEntry> {
        self.entries.iter().rev().find(|e| e.converged())
    }
}

fn observe(gs: &GroundState, ctx: &SweepContext) -> Result<Observables> {
    let params = &gs.params;
    let t = gs.physical_terms();
    let kernel = ctx.kernel;
    let tau = match params.regime {
        Regime::LowerCritical => tau1(&gs.w, kernel)?,
        Regime::UpperCritical => tau2(&gs.w, kernel)?,
    };
    let norm = distance_norm_for(params);
    let lim = &ctx.limit.field;
    let scale = profile_distance(&RadialField::zeros(&lim.grid), lim, norm)?;
    let distance_fixed = profile_distance(&gs.w, lim, norm)? / scale;
    let plan = zeta_from_center(&gs.u, params, &ctx.limit)?;
    let distance_matched = profile_distance(&plan.apply(&gs.u), lim, norm)? / scale;
    Ok(Observables {
        energy: gs.energy,
        l2_sq: t.l2_sq,
        grad_sq: t.grad_sq,
        lq_q: t.lq_q,
        d_term: t.d_term,
        center: gs.center_value,
        frame_energy: gs.frame_energy,
        frame: gs.frame_norms,
        tau,
        distance_norm: norm,
        distance_fixed,
        distance_matched,
        zeta: plan.zeta,
        xi: plan.xi,
        predicted_zeta: plan.predicted_zeta,
        relative_residual: gs.relative_residual,
        nehari_residual: gs.nehari_residual,
        pohozaev_residual: gs.pohozaev_residual,
        grad_residual: gs.grad_residual,
        iterations: gs.iterations,
        newton_iterations: gs.newton_iterations,
    })
}

fn failed(epsilon: f64, err: &Error) -> SweepEntry {
    SweepEntry {
        epsilon,
        status: EntryStatus::Failed { kind: err.kind().into(), message: err.to_string() },
        observables: None,
        frame_field: None,
        wall_seconds: 0.0,
    }
}

/// Runs the ε schedule with warm-started continuation: each solve starts
/// from the previous converged solution expressed in the next natural frame
/// (falling back to the regime's default guess if that fails). Entries that
/// fail or miss the certificate tolerances are kept, flagged and excluded
/// from fits; the sweep aborts only if more than half of them fail.
pub fn sweep(cfg: &SweepConfig, ctx: &SweepContext) -> Result<SweepResult> {
    cfg.validate()?;
    let kernel = ctx.kernel;
    let mut entries = Vec::with_capacity(cfg.epsilons.len());
    let mut prev: Option<GroundState> = None;
    for &eps in &cfg.epsilons {
        let started = Instant::now();
        let p = cfg.params.with_epsilon(eps);
        let warm = prev.as_ref().map(|g| g.warm_start_for(&p, &kernel.grid));
        let mut solved = solve_ground_state(&p, kernel, warm.as_ref(), &cfg.solver);
        if solved.is_err() && warm.is_some() {
            solved = solve_ground_state(&p, kernel, None, &cfg.solver);
        }
        let gs = match solved {
            Ok(gs) => gs,
            Err(e) => {
                entries.push(SweepEntry { wall_seconds: started.elapsed().as_secs_f64(), ..failed(eps, &e) });
                continue;
            }
        };
        let obs = match observe(&gs, ctx) {
            Ok(o) => o,
            Err(e) => {
                entries.push(SweepEntry { wall_seconds: started.elapsed().as_secs_f64(), ..failed(eps, &e) });
                continue;
            }
        };
        let status = if !(obs.nehari_residual < cfg.nehari_tol && obs.pohozaev_residual < cfg.pohozaev_tol) {
            EntryStatus::Failed {
                kind: "certificate".into(),
                message: format!(
                    "Nehari residual {:.3e} (tol {:.1e}), Pohozaev residual {:.3e} (tol {:.1e})",
                    obs.nehari_residual, cfg.nehari_tol, obs.pohozaev_residual, cfg.pohozaev_tol
                ),
            }
        } else {
            EntryStatus::Converged
        };
        entries.push(SweepEntry {
            epsilon: eps,
            status,
            observables: Some(obs),
            frame_field: Some(gs.w.clone()),
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        prev = Some(gs);
    }
    let failures = entries.iter().filter(|e| !e.converged()).count();
    if 2 * failures > entries.len() {
        return Err(Error::SweepAborted { failed: failures, total: entries.len() });
    }
    let mut multistart = Vec::new();
    if cfg.multistart > 0 {
        let mut ends: Vec<&SweepEntry> = Vec::new();
        if let Some(first) = entries.iter().find(|e| e.converged()) {
            ends.push(first);
        }
        if let Some(last) = entries.iter().rev().find(|e| e.converged()) {
            if ends.first().map(|f| f.epsilon) != Some(last.epsilon) {
                ends.push(last);
            }
        }
        for e in ends {
            let reference = e.observables.as_ref().expect("converged entry has observables").energy;
            let seeds: Vec<u64> = (0..cfg.multistart as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
            multistart.push(multistart_audit(&cfg.params.with_epsilon(e.epsilon), kernel, reference, &seeds, &cfg.solver));
        }
    }
    Ok(SweepResult {
        schema: SWEEP_SCHEMA.into(),
        params: cfg.params,
        limit_kind: ctx.limit.kind,
        entries,
        multistart,
    })
}

/// Solves from `random_positive_field(grid, seed)` for each seed (in
/// parallel; the result does not depend on scheduling) and compares the
/// energies with `reference_energy`.
pub fn multistart_audit(
    params: &ProblemParams,
    kernel: &RieszKernel,
    reference_energy: f64,
    seeds: &[u64],
    opts: &SolverOptions,
) -> MultistartAudit {
    let results: Vec<Option<f64>> = seeds
        .par_iter()
        .map(|&s| {
            let init = random_positive_field(&kernel.grid, s);
            solve_ground_state(params, kernel, Some(&init), opts).ok().map(|g| g.energy)
        })
        .collect();
    let energies: Vec<f64> = results.iter().flatten().copied().collect();
    let max_relative_deviation = energies
        .iter()
        .map(|e| (e - reference_energy).abs() / reference_energy.abs())
        .fold(0.0, f64::max);
    MultistartAudit {
        epsilon: params.epsilon,
        reference_energy,
        failures: results.len() - energies.len(),
        energies,
        max_relative_deviation,
    }
}

/// One row per sweep entry, stable column order; positive log-ready
/// columns first, then signed or diagnostic columns.
pub fn sweep_csv(result: &SweepResult) -> CsvTable {
    let mut t = CsvTable::new([
        "epsilon",
        "energy",
        "l2_sq",
        "grad_sq",
        "lq_q",
        "d_term",
        "center",
        "frame_l2_sq",
        "frame_grad_sq",
        "frame_lq_q",
        "frame_d_term",
        "tau",
        "zeta",
        "xi",
        "predicted_zeta",
        "distance_fixed",
        "distance_matched",
        "frame_energy",
        "relative_residual",
        "nehari_residual",
        "pohozaev_residual",
        "grad_residual",
        "iterations",
        "newton_iterations",
        "status",
        "error_kind",
    ]);
    for e in &result.entries {
        let (status, kind) = match &e.status {
            EntryStatus::Converged => ("converged".to_string(), String::new()),
            EntryStatus::Failed { kind, .. } => ("failed".to_string(), kind.clone()),
        };
        let mut row = vec![fmt_f64(e.epsilon)];
        match &e.observables {
            Some(o) => {
                for v in [
                    o.energy,
                    o.l2_sq,
                    o.grad_sq,
                    o.lq_q,
                    o.d_term,
                    o.center,
                    o.frame.l2_sq,
                    o.frame.grad_sq,
                    o.frame.lq_q,
                    o.frame.d_term,
                    o.tau,
                    o.zeta,
                    o.xi,
                    o.predicted_zeta,
                    o.distance_fixed,
                    o.distance_matched,
                    o.frame_energy,
                    o.relative_residual,
                    o.nehari_residual,
                    o.pohozaev_residual,
                    o.grad_residual,
                ] {
                    row.push(fmt_f64(v));
                }
                row.push(o.iterations.to_string());
                row.push(o.newton_iterations.to_string());
            }
            None => row.extend(std::iter::repeat(String::new()).take(23)),
        }
        row.push(status);
        row.push(kind);
        t.push(row);
    }
    t
}

// ---------------------------------------------------------------------------
// Fits

/// `y ≈ prefactor · ε^exponent` in the least-squares sense in log-log
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least-squares line `y = slope x + intercept` and its `r²` (1 when the
/// data are fitted exactly, including constant data).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);
    let r2 = if ss_tot <= 1e-28 * scale { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    (slope, intercept, r2)
}

fn check_pairs(pairs: &[(f64, f64)], min: usize) -> Result<()> {
    if pairs.len() < min {
        return Err(Error::InvalidArgument(format!("need at least {min} pairs, got {}", pairs.len())));
    }
    if let Some((x, y)) = pairs.iter().find(|(x, y)| !(x.is_finite() && *x > 0.0 && y.is_finite() && *y > 0.0)) {
        return Err(Error::InvalidArgument(format!("pairs must be positive and finite, got ({x}, {y})")));
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi <= lo {
        return Err(Error::InvalidArgument("pairs need at least two distinct abscissae".into()));
    }
    Ok(())
}

/// Log-log least-squares power law through at least four positive pairs.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerFit> {
    check_pairs(pairs, 4)?;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(PowerFit { exponent: slope, prefactor: intercept.exp(), r_squared })
}

/// Pointwise envelope test of a rate model `c ε^a (ln ε)^b` with unknown
/// `c`: over `[ε₀, ε₁]` the model's average log-slope from `ε₀` lies
/// between the pure powers `a + b/ln ε₁` and `a + b/ln ε₀`; the data
/// are bracketed if their average slopes from the first point stay inside
/// that band up to a relative slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracketing {
    pub eps_exponent: f64,
    pub log_exponent: f64,
    pub lower_slope: f64,
    pub upper_slope: f64,
    /// Average log-slope from the first point to each later point.
    pub observed_slopes: Vec<f64>,
    /// Largest excursion outside the band, relative to the band's scale.
    pub worst_excess: f64,
}

impl Bracketing {
    pub fn within(&self, slack: f64) -> bool {
        self.worst_excess <= slack
    }
}

/// See [`Bracketing`]. All abscissae must exceed 1 when `log_exponent ≠ 0`.
pub fn bracket_rate(pairs: &[(f64, f64)], eps_exponent: f64, log_exponent: f64) -> Result<Bracketing> {
    check_pairs(pairs, 3)?;
    if log_exponent != 0.0 && pairs.iter().any(|p| p.0 <= 1.0) {
        return Err(Error::InvalidArgument("log-corrected rates need all epsilons above 1".into()));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (e0, y0) = sorted[0];
    let e1 = sorted[sorted.len() - 1].0;
    let s0 = eps_exponent + if log_exponent != 0.0 { log_exponent / e0.ln() } else { 0.0 };
    let s1 = eps_exponent + if log_exponent != 0.0 { log_exponent / e1.ln() } else { 0.0 };
    let (lo, hi) = (s0.min(s1), s0.max(s1));
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let observed_slopes: Vec<f64> =
        sorted[1..].iter().filter(|p| p.0 > e0).map(|(e, y)| (y / y0).ln() / (e / e0).ln()).collect();
    let worst_excess = observed_slopes.iter().map(|s| (lo - s).max(s - hi).max(0.0) / scale).fold(0.0, f64::max);
    Ok(Bracketing { eps_exponent, log_exponent, lower_slope: lo, upper_slope: hi, observed_slopes, worst_excess })
}

/// Both fits of a log-corrected decay law and the bracketing of the data by
/// the model `(ε ln ε)^{−θ_predicted}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCorrectedFit {
    /// `θ` of `c (ε ln ε)^{−θ}`.
    pub theta_fit: f64,
    pub prefactor_logpower: f64,
    pub r_squared_logpower: f64,
    /// `θ` of `c ε^{−θ}`.
    pub theta_power: f64,
    pub prefactor_power: f64,
    pub r_squared_power: f64,
    pub bracketing: Bracketing,
}

/// Fits `c ε^{−θ}` and `c (ε ln ε)^{−θ}` to at least six pairs spanning
/// at least two decades, all with `ε > 1`.
pub fn fit_log_corrected(pairs: &[(f64, f64)], theta_predicted: f64) -> Result<LogCorrectedFit> {
    check_pairs(pairs, 6)?;
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("log-corrected fits need two decades, got [{lo}, {hi}]")));
    }
    if lo <= 1.0 {
        return Err(Error::InvalidArgument("log-corrected fits need all epsilons above 1".into()));
    }
    let power = fit_power_law(pairs)?;
    let xs: Vec<f64> = pairs.iter().map(|p| (p.0 * p.0.ln()).ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(LogCorrectedFit {
        theta_fit: -slope,
        prefactor_logpower: intercept.exp(),
        r_squared_logpower: r2,
        theta_power: -power.exponent,
        prefactor_power: power.prefactor,
        r_squared_power: power.r_squared,
        bracketing: bracket_rate(pairs, -theta_predicted, -theta_predicted)?,
    })
}

/// Decay exponent `k` of `w(r) ≈ c r^{−k}` fitted over the nodes where
/// `w(r)/w(0)` lies in `[lo, hi]`.
pub fn tail_exponent(w: &RadialField, lo: f64, hi: f64) -> Result<PowerFit> {
    let w0 = w.values[0];
    if !(w0 > 0.0) {
        return Err(Error::InvalidArgument("tail fits need a positive center value".into()));
    }
    let pairs: Vec<(f64, f64)> = w
        .grid
        .nodes
        .iter()
        .zip(&w.values)
        .filter(|(_, v)| **v > 0.0 && (lo..=hi).contains(&(**v / w0)))
        .map(|(r, v)| (*r, *v))
        .collect();
    let fit = fit_power_law(&pairs)?;
    Ok(PowerFit { exponent: -fit.exponent, ..fit })
}

// ---------------------------------------------------------------------------
// Predictions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Center,
    L2Sq,
    GradSq,
    LqQ,
    DTerm,
    Energy,
    /// `m∞ − m_ε` (upper) or `m̃∞ − m_ε / ε^{e}` (lower), `e` the energy exponent.
    EnergyGap,
    FrameL2Sq,
    FrameGradSq,
    FrameLqQ,
    FrameDTerm,
}

impl Observable {
    pub fn value(&self, o: &Observables) -> f64 {
        match self {
            Observable::Center => o.center,
            Observable::L2Sq => o.l2_sq,
            Observable::GradSq => o.grad_sq,
            Observable::LqQ => o.lq_q,
            Observable::DTerm => o.d_term,
            Observable::Energy => o.energy,
            Observable::EnergyGap => f64::NAN,
            Observable::FrameL2Sq => o.frame.l2_sq,
            Observable::FrameGradSq => o.frame.grad_sq,
            Observable::FrameLqQ => o.frame.lq_q,
            Observable::FrameDTerm => o.frame.d_term,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    PurePower,
    LogCorrected,
}

/// Predicted law `prefactor · ε^{exponent} (ln ε)^{log_exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub observable: Observable,
    pub exponent: f64,
    pub log_exponent: f64,
    pub prefactor: Option<f64>,
    pub exponent_tolerance: f64,
    pub prefactor_tolerance: f64,
}

impl Prediction {
    fn new(observable: Observable, exponent: f64, log_exponent: f64, tol: f64) -> Self {
        Self { observable, exponent, log_exponent, prefactor: None, exponent_tolerance: tol, prefactor_tolerance: PREFACTOR_TOL }
    }

    pub fn model(&self) -> RateModel {
        if self.log_exponent == 0.0 {
            RateModel::PurePower
        } else {
            RateModel::LogCorrected
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub params: ProblemParams,
    pub lower_subcase: Option<LowerSubcase>,
    /// `q = q_b`: only subsequential convergence is claimed.
    pub borderline: bool,
    pub rows: Vec<Prediction>,
    /// Limit of the normalised energy against which the gap is formed.
    pub gap_reference: Option<f64>,
}

impl Predictions {
    pub fn row(&self, o: Observable) -> Option<&Prediction> {
        self.rows.iter().find(|r| r.observable == o)
    }

    fn row_mut(&mut self, o: Observable) -> Option<&mut Prediction> {
        self.rows.iter_mut().find(|r| r.observable == o)
    }

    fn set_prefactor(&mut self, o: Observable, v: f64) {
        if let Some(r) = self.row_mut(o) {
            r.prefactor = Some(v);
        }
    }

    /// Fills the limit prefactors and the gap reference from the constants
    /// table (never from sweep data).
    pub fn with_constants(mut self, constants: &ConstantsTable) -> Result<Self> {
        let p = self.params;
        check_constants(&p, constants)?;
        let n = p.dim_n as f64;
        let (alpha, q, a) = (p.alpha, p.q, p.a_coef);
        let last = constants.per_grid.last().expect("checked non-empty");
        match p.regime {
            Regime::LowerCritical => match self.lower_subcase {
                Some(LowerSubcase::Concentrating) => {
                    let s = constants.s1.powf((n + alpha) / alpha);
                    let r = rho0(Regime::LowerCritical, p.dim_n, alpha, q, a, &last.u1_norms)?.value;
                    self.set_prefactor(Observable::L2Sq, s);
                    self.set_prefactor(Observable::DTerm, s);
                    self.set_prefactor(Observable::Energy, constants.m_infty_lower);
                    self.set_prefactor(Observable::GradSq, last.u1_norms.grad_sq / (r * r));
                    self.set_prefactor(Observable::LqQ, last.u1_norms.lq_q * r.powf(-0.5 * n * (q - 2.0)));
                    self.set_prefactor(Observable::Center, r.powf(-0.5 * n) * constants.a0.powf(0.5 * n));
                    if let Some(row) = self.row_mut(Observable::L2Sq) {
                        row.prefactor_tolerance = 0.03;
                    }
                    self.gap_reference = Some(constants.m_infty_lower);
                }
                Some(LowerSubcase::LocalDominated) => {
                    let k = a.powf(-2.0 / (q - 2.0)) * constants.sq.powf(q / (q - 2.0));
                    let m = m_local(q, a, constants.sq);
                    for (o, v) in [
                        (Observable::GradSq, n * (q - 2.0) / (2.0 * q) * k),
                        (Observable::L2Sq, (2.0 * n - q * (n - 2.0)) / (2.0 * q) * k),
                        (Observable::LqQ, k / a),
                        (Observable::Energy, m),
                        (Observable::FrameGradSq, n * (q - 2.0) / (2.0 * q) * k),
                        (Observable::FrameL2Sq, (2.0 * n - q * (n - 2.0)) / (2.0 * q) * k),
                        (Observable::FrameLqQ, k / a),
                    ] {
                        self.set_prefactor(o, v);
                    }
                    self.gap_reference = Some(m);
                }
                _ => {}
            },
            Regime::UpperCritical => {
                let s = constants.s_alpha.powf((n + alpha) / (2.0 + alpha));
                for o in [Observable::GradSq, Observable::DTerm, Observable::FrameGradSq, Observable::FrameDTerm] {
                    self.set_prefactor(o, s);
                }
                self.set_prefactor(Observable::Energy, constants.m_infty_upper);
                if p.dim_n >= 5 {
                    let r = rho0(Regime::UpperCritical, p.dim_n, alpha, q, a, &last.v1_norms)?.value;
                    self.set_prefactor(Observable::L2Sq, r * r * last.v1_norms.l2_sq);
                    self.set_prefactor(Observable::LqQ, r.powf(n - 0.5 * q * (n - 2.0)) * last.v1_norms.lq_q);
                    self.set_prefactor(Observable::Center, r.powf(-0.5 * (n - 2.0)) * (n * (n - 2.0)).powf(0.25 * (n - 2.0)));
                }
                self.gap_reference = Some(constants.m_infty_upper);
            }
        }
        Ok(self)
    }
}

/// Exact exponents of every observable for the parameter tuple.
///
/// Lower regime, `D = 4 − N(q−2)`:
/// * `q < q_b`: `u(0) ~ ε^{2N/(αD)}`, `‖u‖² ~ D_p ~ m ~ ε^{N/α}` resp.
///   `ε^{(N+α)/α}`, `‖∇u‖² ~ ‖u‖_q^q ~ ε^{N[2N−q(N−2)]/(αD)}`, energy
///   gap `~ ε^{−σ}`;
/// * `q ≥ q_b`: `u(0) ~ ε^{1/(q−2)}`, `‖u‖² ~ ε^{D/(2(q−2))}`,
///   `‖∇u‖² ~ ‖u‖_q^q ~ m ~ ε^{(2N−q(N−2))/(2(q−2))}`,
///   `D_p ~ ε^{(N+α)D/(2N(q−2))}`; for `q > q_b` the gap decays like the
///   nonlocal coefficient of the v-equation, `ε^{[4α−N(2+α)(q−2)]/(2N(q−2))}`.
///   The v-form norms are ε-independent in the limit.
///
/// Upper regime: `‖∇u‖²`, `D` and `m` converge; the gap `δ`, `‖u‖_q^q`,
/// `‖u‖²` and `u(0)` follow the dimension-dependent laws, log-corrected for
/// `N = 4`; for `N ∈ {3, 4}` the second-scaled mass `‖w̃‖²` grows like
/// `ε^{(6−q)/(2(q−4))}` resp. `ln ε`.
pub fn predicted_exponents(params: &ProblemParams) -> Result<Predictions> {
    params.validate()?;
    let n = params.dim_n as f64;
    let (alpha, q) = (params.alpha, params.q);
    let sub = params.lower_subcase();
    let mut rows = Vec::new();
    let t = EXPONENT_TOL;
    use Observable as O;
    match params.regime {
        Regime::LowerCritical => {
            let d = 4.0 - n * (q - 2.0);
            if sub == Some(LowerSubcase::Concentrating) {
                let g = n * (2.0 * n - q * (n - 2.0)) / (alpha * d);
                rows.push(Prediction::new(O::Center, 2.0 * n / (alpha * d), 0.0, t));
                rows.push(Prediction::new(O::L2Sq, n / alpha, 0.0, t));
                rows.push(Prediction::new(O::GradSq, g, 0.0, t));
                rows.push(Prediction::new(O::LqQ, g, 0.0, t));
                rows.push(Prediction::new(O::DTerm, (n + alpha) / alpha, 0.0, t));
                rows.push(Prediction::new(O::Energy, (n + alpha) / alpha, 0.0, t));
                rows.push(Prediction::new(O::EnergyGap, -params.sigma(), 0.0, ENTANGLED_TOL));
            } else {
                let g = (2.0 * n - q * (n - 2.0)) / (2.0 * (q - 2.0));
                rows.push(Prediction::new(O::Center, 1.0 / (q - 2.0), 0.0, t));
                rows.push(Prediction::new(O::L2Sq, d / (2.0 * (q - 2.0)), 0.0, t));
                rows.push(Prediction::new(O::GradSq, g, 0.0, t));
                rows.push(Prediction::new(O::LqQ, g, 0.0, t));
                rows.push(Prediction::new(O::DTerm, (n + alpha) * d / (2.0 * n * (q - 2.0)), 0.0, t));
                rows.push(Prediction::new(O::Energy, g, 0.0, t));
                for o in [O::FrameGradSq, O::FrameL2Sq, O::FrameLqQ] {
                    rows.push(Prediction::new(o, 0.0, 0.0, t));
                }
                if sub == Some(LowerSubcase::LocalDominated) {
                    let c = (4.0 * alpha - n * (2.0 + alpha) * (q - 2.0)) / (2.0 * n * (q - 2.0));
                    rows.push(Prediction::new(O::EnergyGap, c, 0.0, ENTANGLED_TOL));
                }
            }
        }
        Regime::UpperCritical => {
            for o in [O::GradSq, O::DTerm, O::Energy] {
                rows.push(Prediction::new(o, 0.0, 0.0, t));
            }
            match params.dim_n {
                3 => {
                    let r = (6.0 - q) / (2.0 * (q - 4.0));
                    rows.push(Prediction::new(O::Center, 1.0 / (2.0 * (q - 4.0)), 0.0, t));
                    rows.push(Prediction::new(O::LqQ, -r, 0.0, t));
                    rows.push(Prediction::new(O::L2Sq, -(q - 2.0) / (2.0 * (q - 4.0)), 0.0, t));
                    rows.push(Prediction::new(O::EnergyGap, -r, 0.0, ENTANGLED_TOL));
                    rows.push(Prediction::new(O::FrameL2Sq, r, 0.0, ENTANGLED_TOL));
                }
                4 => {
                    let r = (4.0 - q) / (q - 2.0);
                    let c = 1.0 / (q - 2.0);
                    rows.push(Prediction::new(O::Center, c, c, ENTANGLED_TOL));
                    rows.push(Prediction::new(O::LqQ, -r, -r, ENTANGLED_TOL));
                    rows.push(Prediction::new(O::L2Sq, -2.0 / (q - 2.0), -r, ENTANGLED_TOL));
                    rows.push(Prediction::new(O::EnergyGap, -r, -r, ENTANGLED_TOL));
                    rows.push(Prediction::new(O::FrameL2Sq, 0.0, 1.0, ENTANGLED_TOL));
                }
                _ => {
                    let r = (2.0 * n - q * (n - 2.0)) / ((n - 2.0) * (q - 2.0));
                    rows.push(Prediction::new(O::Center, 1.0 / (q - 2.0), 0.0, t));
                    rows.push(Prediction::new(O::LqQ, -r, 0.0, t));
                    rows.push(Prediction::new(O::L2Sq, -4.0 / ((n - 2.0) * (q - 2.0)), 0.0, t));
                    rows.push(Prediction::new(O::EnergyGap, -r, 0.0, ENTANGLED_TOL));
                }
            }
            if params.dim_n <= 4 {
                rows.push(Prediction::new(O::FrameGradSq, 0.0, 0.0, t));
                rows.push(Prediction::new(O::FrameDTerm, 0.0, 0.0, t));
            }
        }
    }
    Ok(Predictions {
        params: *params,
        lower_subcase: sub,
        borderline: sub == Some(LowerSubcase::Borderline),
        rows,
        gap_reference: None,
    })
}

// ---------------------------------------------------------------------------
// Comparison

/// One observable's fitted rate against its prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub observable: Observable,
    pub model: RateModel,
    pub points: usize,
    pub predicted_exponent: f64,
    pub predicted_log_exponent: f64,
    /// Fitted `ε`-exponent (with the predicted log power divided out).
    pub fitted_exponent: f64,
    pub fitted_prefactor: f64,
    pub r_squared: f64,
    /// `|fit − predicted| / |predicted|`, or the absolute deviation when the
    /// predicted exponent is zero.
    pub relative_exponent_error: f64,
    pub exponent_tolerance: f64,
    pub bracketing: Option<Bracketing>,
    pub predicted_prefactor: Option<f64>,
    /// `value · ε^{−exponent} (ln ε)^{−log_exponent}` at the largest ε.
    pub observed_prefactor: f64,
    pub prefactor_error: Option<f64>,
    pub prefactor_tolerance: f64,
    pub pass: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema: String,
    pub params: ProblemParams,
    pub borderline: bool,
    pub rows: Vec<ReportRow>,
    pub invariants: Vec<InvariantCheck>,
    pub all_pass: bool,
}

impl ScalingReport {
    pub fn row(&self, o: Observable) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.observable == o)
    }

    pub fn invariant(&self, name: &str) -> Option<&InvariantCheck> {
        self.invariants.iter().find(|c| c.name == name)
    }
}

fn log_factor(eps: f64, b: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else {
        eps.ln().powf(b)
    }
}

fn compare_row(pred: &Prediction, pairs: &[(f64, f64)]) -> ReportRow {
    let mut row = ReportRow {
        observable: pred.observable,
        model: pred.model(),
        points: pairs.len(),
        predicted_exponent: pred.exponent,
        predicted_log_exponent: pred.log_exponent,
        fitted_exponent: f64::NAN,
        fitted_prefactor: f64::NAN,
        r_squared: 0.0,
        relative_exponent_error: f64::INFINITY,
        exponent_tolerance: pred.exponent_tolerance,
        bracketing: None,
        predicted_prefactor: pred.prefactor,
        observed_prefactor: f64::NAN,
        prefactor_error: None,
        prefactor_tolerance: pred.prefactor_tolerance,
        pass: false,
        note: String::new(),
    };
    let b = pred.log_exponent;
    let reduced: Vec<(f64, f64)> = pairs.iter().map(|&(e, y)| (e, y / log_factor(e, b))).collect();
    let fit = match fit_power_law(&reduced) {
        Ok(f) => f,
        Err(e) => {
            row.note = e.to_string();
            return row;
        }
    };
    row.fitted_exponent = fit.exponent;
    row.fitted_prefactor = fit.prefactor;
    row.r_squared = fit.r_squared;
    row.relative_exponent_error = if pred.exponent != 0.0 {
        (fit.exponent - pred.exponent).abs() / pred.exponent.abs()
    } else {
        (fit.exponent - pred.exponent).abs()
    };
    let exponent_ok = match row.model {
        RateModel::PurePower if pred.exponent == 0.0 && pred.prefactor.is_some() => {
            // a converging observable: the limit value is the claim, the slope
            // only reflects the finite-ε correction
            row.note = "judged on the limit value".into();
            true
        }
        RateModel::PurePower => {
            let tol = if pred.exponent != 0.0 { pred.exponent_tolerance } else { ZERO_EXPONENT_TOL };
            if pred.exponent != 0.0 {
                // the band collapses to the single slope; reported alongside the fit
                row.bracketing = bracket_rate(pairs, pred.exponent, 0.0).ok();
            }
            row.relative_exponent_error <= tol
        }
        RateModel::LogCorrected => match bracket_rate(pairs, pred.exponent, b) {
            Ok(br) => {
                let ok = br.within(pred.exponent_tolerance);
                row.bracketing = Some(br);
                ok
            }
            Err(e) => {
                row.note = e.to_string();
                false
            }
        },
    };
    let &(e_last, y_last) = pairs.iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("fit succeeded");
    row.observed_prefactor = y_last * e_last.powf(-pred.exponent) / log_factor(e_last, b);
    let prefactor_ok = match pred.prefactor {
        Some(c) => {
            let err = (row.observed_prefactor - c).abs() / c.abs();
            row.prefactor_error = Some(err);
            err <= pred.prefactor_tolerance
        }
        None => true,
    };
    row.pass = exponent_ok && prefactor_ok;
    row
}

/// For a pure power nonlinearity the Nehari–Pohozaev relations between
/// `‖∇u‖²` (resp. `ε‖u‖²`) and `‖u‖_q^q` are exact, so their defect only
/// measures discretization error; it passes below this floor.
pub const RELATION_FLOOR: f64 = 1e-3;

/// Last `k` values are nonincreasing, or all of them are below `floor`.
fn trend_down(values: &[f64], k: usize, floor: f64) -> (f64, bool) {
    let tail = &values[values.len().saturating_sub(k)..];
    let last = tail.last().copied().unwrap_or(f64::NAN);
    let monotone = tail.windows(2).all(|w| w[1] <= w[0]);
    (last, monotone || tail.iter().all(|v| *v < floor))
}

/// Fits every predicted observable over the converged entries and checks
/// the structural invariants. Needs at least six converged entries.
pub fn compare(sweep: &SweepResult, predictions: &Predictions) -> Result<ScalingReport> {
    let conv: Vec<(f64, &Observables)> = sweep.converged().collect();
    if conv.len() < 6 {
        return Err(Error::InvalidArgument(format!("comparison needs at least 6 converged entries, got {}", conv.len())));
    }
    let p = predictions.params;
    let n = p.dim_n as f64;
    let energy_law = predictions.row(Observable::Energy).map(|r| (r.exponent, r.log_exponent));
    let normalised_energy =
        |e: f64, o: &Observables| energy_law.map(|(a, b)| o.energy * e.powf(-a) / log_factor(e, b)).unwrap_or(o.energy);
    let mut rows = Vec::new();
    for pred in &predictions.rows {
        let pairs: Vec<(f64, f64)> = if pred.observable == Observable::EnergyGap {
            match predictions.gap_reference {
                Some(m) => conv.iter().map(|(e, o)| (*e, m - normalised_energy(*e, o))).filter(|p| p.1 > 0.0).collect(),
                None => {
                    let mut r = compare_row(pred, &[]);
                    r.note = "no limit energy attached to the predictions".into();
                    rows.push(r);
                    continue;
                }
            }
        } else {
            conv.iter().map(|(e, o)| (*e, pred.observable.value(o))).collect()
        };
        rows.push(compare_row(pred, &pairs));
    }

    let mut invariants = Vec::new();
    let mut push = |name: &str, value: f64, threshold: f64, pass: bool| {
        invariants.push(InvariantCheck { name: name.into(), value, threshold, pass })
    };
    if let Some(m) = predictions.gap_reference {
        let worst = conv.iter().map(|(e, o)| m - normalised_energy(*e, o)).fold(f64::INFINITY, f64::min);
        push("gap-positive", worst, 0.0, worst > 0.0);
    }
    match p.regime {
        Regime::LowerCritical => {
            let rel: Vec<f64> = conv
                .iter()
                .map(|(_, o)| (o.grad_sq - n * p.a_coef * (p.q - 2.0) / (2.0 * p.q) * o.lq_q).abs() / o.grad_sq)
                .collect();
            let (last, ok) = trend_down(&rel, 4, RELATION_FLOOR);
            push("gradient-lq-relation", last, RELATION_FLOOR, ok);
            if predictions.lower_subcase == Some(LowerSubcase::Concentrating) {
                let ratio = |f: &dyn Fn(&FieldTerms) -> f64| {
                    let v: Vec<f64> = conv.iter().map(|(_, o)| f(&o.frame)).collect();
                    v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
                };
                let worst = [
                    ratio(&|t| t.l2_sq),
                    ratio(&|t| t.d_term),
                    ratio(&|t| t.grad_sq),
                    ratio(&|t| t.lq_q),
                ]
                .into_iter()
                .fold(0.0, f64::max);
                push("frame-norms-bounded", worst, 3.0, worst < 3.0);
                let ne: Vec<f64> = conv.iter().map(|(e, o)| normalised_energy(*e, o)).collect();
                let inc = ne.windows(2).all(|w| w[1] > w[0]);
                push("normalised-energy-increasing", ne.last().copied().unwrap_or(f64::NAN), 0.0, inc);
            }
        }
        Regime::UpperCritical => {
            let qs = 2.0 * n / (n - 2.0);
            let coef = n * p.a_coef * (qs - p.q) / (qs * p.q);
            let rel: Vec<f64> = conv.iter().map(|(e, o)| (e * o.l2_sq - coef * o.lq_q).abs() / (e * o.l2_sq)).collect();
            let (last, ok) = trend_down(&rel, 4, RELATION_FLOOR);
            push("mass-lq-relation", last, RELATION_FLOOR, ok);
        }
    }
    let all_pass = rows.iter().all(|r| r.pass) && invariants.iter().all(|c| c.pass);
    Ok(ScalingReport {
        schema: REPORT_SCHEMA.into(),
        params: p,
        borderline: predictions.borderline,
        rows,
        invariants,
        all_pass,
    })
}

fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(String::from)).unwrap_or_default()
}

/// Report rows as CSV (stable column order).
pub fn report_csv(report: &ScalingReport) -> CsvTable {
    let mut t = CsvTable::new([
        "observable",
        "model",
        "points",
        "predicted_exponent",
        "predicted_log_exponent",
        "fitted_exponent",
        "fitted_prefactor",
        "r_squared",
        "relative_exponent_error",
        "exponent_tolerance",
        "predicted_prefactor",
        "observed_prefactor",
        "prefactor_error",
        "pass",
    ]);
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in &report.rows {
        t.push(vec![
            tag(&r.observable),
            tag(&r.model),
            r.points.to_string(),
            fmt_f64(r.predicted_exponent),
            fmt_f64(r.predicted_log_exponent),
            fmt_f64(r.fitted_exponent),
            fmt_f64(r.fitted_prefactor),
            fmt_f64(r.r_squared),
            fmt_f64(r.relative_exponent_error),
            fmt_f64(r.exponent_tolerance),
            opt(r.predicted_prefactor),
            fmt_f64(r.observed_prefactor),
            opt(r.prefactor_error),
            r.pass.to_string(),
        ]);
    }
    t
}

// ---------------------------------------------------------------------------
// Mass curves

/// A ground state read as a normalized solution: `a = ‖u‖₂`, Lagrange
/// multiplier `λ = −ε`, energy `E = I_ε(u) − (ε/2) a²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassPoint {
    pub epsilon: f64,
    pub a: f64,
    pub lambda: f64,
    pub energy_e: f64,
    pub action: f64,
    pub grad_sq: f64,
}

pub fn mass_curve(sweep: &SweepResult) -> Vec<MassPoint> {
    sweep
        .converged()
        .map(|(e, o)| MassPoint {
            epsilon: e,
            a: o.l2_sq.sqrt(),
            lambda: -e,
            energy_e: o.energy - 0.5 * e * o.l2_sq,
            action: o.energy,
            grad_sq: o.grad_sq,
        })
        .collect()
}

pub fn mass_curve_csv(points: &[MassPoint]) -> CsvTable {
    let mut t = CsvTable::new(["a", "grad_sq", "epsilon", "lambda", "energy_e", "action"]);
    for m in points {
        t.push([m.a, m.grad_sq, m.epsilon, m.lambda, m.energy_e, m.action].iter().map(|v| fmt_f64(*v)).collect());
    }
    t
}

/// Mass-curve laws: for the lower regime (large `a`) the exponents of
/// `‖∇u_a‖²` and `−E(u_a)` in `a`; for the upper regime (small `a`) the
/// limit `E(u_a) → (2+α)/(2(N+α)) S_α^{(N+α)/(2+α)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCurveReport {
    pub schema: String,
    pub params: ProblemParams,
    pub points: Vec<MassPoint>,
    pub grad_fit: Option<PowerFit>,
    pub predicted_grad_exponent: Option<f64>,
    pub grad_exponent_error: Option<f64>,
    pub energy_fit: Option<PowerFit>,
    pub predicted_energy_exponent: Option<f64>,
    pub energy_exponent_error: Option<f64>,
    pub limit_energy: Option<f64>,
    pub energy_at_smallest_a: Option<f64>,
    pub limit_energy_error: Option<f64>,
}

pub fn mass_curve_report(sweep: &SweepResult, constants: &ConstantsTable) -> Result<MassCurveReport> {
    let p = sweep.params;
    check_constants(&p, constants)?;
    let points = mass_curve(sweep);
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!("mass curves need at least 4 converged entries, got {}", points.len())));
    }
    let n = p.dim_n as f64;
    let (alpha, q) = (p.alpha, p.q);
    let mut r = MassCurveReport {
        schema: MASS_CURVE_SCHEMA.into(),
        params: p,
        points: points.clone(),
        grad_fit: None,
        predicted_grad_exponent: None,
        grad_exponent_error: None,
        energy_fit: None,
        predicted_energy_exponent: None,
        energy_exponent_error: None,
        limit_energy: None,
        energy_at_smallest_a: None,
        limit_energy_error: None,
    };
    match p.regime {
        Regime::LowerCritical => {
            let d = 4.0 - n * (q - 2.0);
            let g_pred = 2.0 * (2.0 * n - q * (n - 2.0)) / d;
            let grad = fit_power_law(&points.iter().map(|m| (m.a, m.grad_sq)).collect::<Vec<_>>())?;
            r.grad_exponent_error = Some((grad.exponent - g_pred).abs() / g_pred.abs());
            r.grad_fit = Some(grad);
            r.predicted_grad_exponent = Some(g_pred);
            let e_pred = if p.lower_subcase() == Some(LowerSubcase::Concentrating) { 2.0 * (n + alpha) / n } else { g_pred };
            r.predicted_energy_exponent = Some(e_pred);
            if points.iter().all(|m| m.energy_e < 0.0) {
                let fit = fit_power_law(&points.iter().map(|m| (m.a, -m.energy_e)).collect::<Vec<_>>())?;
                r.energy_exponent_error = Some((fit.exponent - e_pred).abs() / e_pred.abs());
                r.energy_fit = Some(fit);
            }
        }
        Regime::UpperCritical => {
            let limit = constants.m_infty_upper;
            let smallest = points.iter().min_by(|x, y| x.a.total_cmp(&y.a)).expect("non-empty");
            r.limit_energy = Some(limit);
            r.energy_at_smallest_a = Some(smallest.energy_e);
            r.limit_energy_error = Some((smallest.energy_e - limit).abs() / limit);
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(f: impl Fn(f64) -> f64, lo: f64, hi: f64, k: usize) -> Vec<(f64, f64)> {
        log_spaced(lo, hi, k).unwrap().into_iter().map(|e| (e, f(e))).collect()
    }

    #[test]
    fn exact_power_is_recovered() {
        let fit = fit_power_law(&synth(|e| 3.0 * e * e, 1.0, 1e3, 8)).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corrected_power_is_close() {
        let fit = fit_power_law(&synth(|e| e.powf(-1.0 / 3.0) * (1.0 + 0.5 * e.powf(-1.0 / 3.0)), 1e2, 1e5, 12)).unwrap();
        assert!((fit.exponent + 1.0 / 3.0).abs() < 0.05 / 3.0, "{}", fit.exponent);
    }

    #[test]
    fn constant_has_zero_slope() {
        let fit = fit_power_law(&synth(|_| 7.0, 1.0, 1e4, 6)).unwrap();
        assert!(fit.exponent.abs() < 1e-14);
        assert!((fit.prefactor - 7.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, -2.0), (3.0, 3.0), (4.0, 4.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]).is_err());
        let short = synth(|e| e, 10.0, 500.0, 8);
        assert!(fit_log_corrected(&short, 0.5).is_err());
        let few = synth(|e| e, 10.0, 1e4, 5);
        assert!(fit_log_corrected(&few, 0.5).is_err());
    }

    #[test]
    fn log_corrected_data_prefer_the_log_model() {
        let data = synth(|e| (e * e.ln()).powf(-0.5), 1e2, 1e5, 12);
        let f = fit_log_corrected(&data, 0.5).unwrap();
        assert!((f.theta_fit - 0.5).abs() < 0.05, "{}", f.theta_fit);
        assert!(f.r_squared_logpower > f.r_squared_power);
        assert!(f.bracketing.within(1e-12), "{:?}", f.bracketing);
    }

    #[test]
    fn pure_power_data_prefer_the_power_model() {
        let data = synth(|e| 2.0 * e.powf(-0.5), 1e2, 1e5, 12);
        let f = fit_log_corrected(&data, 0.5).unwrap();
        assert!(f.r_squared_power >= f.r_squared_logpower);
        assert!((f.theta_power - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bracketing_detects_growth_outside_the_band() {
        let logarithmic = synth(|e| 3.0 * e.ln(), 1e2, 1e5, 8);
        assert!(bracket_rate(&logarithmic, 0.0, 1.0).unwrap().within(1e-12));
        let too_fast = synth(|e| e.powf(0.5), 1e2, 1e5, 8);
        assert!(!bracket_rate(&too_fast, 0.0, 1.0).unwrap().within(0.15));
    }

    #[test]
    fn log_spacing_hits_the_endpoints() {
        let v = log_spaced(1e2, 1e4, 12).unwrap();
        assert_eq!(v.len(), 12);
        assert_eq!(v[0], 1e2);
        assert_eq!(v[11], 1e4);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(log_spaced(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn predicted_exponents_match_closed_values() {
        let l = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 10.0).unwrap();
        let t = predicted_exponents(&l).unwrap();
        assert!((t.row(Observable::Center).unwrap().exponent - 6.0 / 6.8).abs() < 1e-14);
        assert!((t.row(Observable::L2Sq).unwrap().exponent - 1.5).abs() < 1e-14);
        assert!((t.row(Observable::DTerm).unwrap().exponent - 2.5).abs() < 1e-14);
        assert!((t.row(Observable::GradSq).unwrap().exponent - 3.0 * (6.0 - 2.2) / (2.0 * 3.4)).abs() < 1e-14);
        assert!(!t.borderline);

        let u5 = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 10.0).unwrap();
        let t = predicted_exponents(&u5).unwrap();
        assert!((t.row(Observable::EnergyGap).unwrap().exponent + 1.0 / 3.0).abs() < 1e-14);

        let u3 = ProblemParams::new(3, 2.0, Regime::UpperCritical, 5.0, 1.0, 10.0).unwrap();
        let t = predicted_exponents(&u3).unwrap();
        assert!((t.row(Observable::L2Sq).unwrap().exponent + 1.5).abs() < 1e-14);
        assert!((t.row(Observable::FrameL2Sq).unwrap().exponent - 0.5).abs() < 1e-14);

        let u4 = ProblemParams::new(4, 2.0, Regime::UpperCritical, 3.0, 1.0, 10.0).unwrap();
        let t = predicted_exponents(&u4).unwrap();
        let gap = t.row(Observable::EnergyGap).unwrap();
        assert_eq!(gap.model(), RateModel::LogCorrected);
        assert!((gap.exponent + 1.0).abs() < 1e-14 && (gap.log_exponent + 1.0).abs() < 1e-14);

        let b = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.0 + 2.0 / 3.0, 1.0, 10.0).unwrap();
        let t = predicted_exponents(&b).unwrap();
        assert!(t.borderline);
        assert!(t.row(Observable::EnergyGap).is_none());
    }

    #[test]
    fn exponents_are_consistent_with_the_nehari_pohozaev_balance() {
        // ε‖u‖² and ‖u‖_q^q are tied by an exact identity, so their exponents differ by exactly −1
        for (n, q) in [(5usize, 3.0), (6, 2.5), (7, 2.2)] {
            let p = ProblemParams::new(n, 2.0, Regime::UpperCritical, q, 1.0, 10.0).unwrap();
            let t = predicted_exponents(&p).unwrap();
            let l2 = t.row(Observable::L2Sq).unwrap().exponent;
            let lq = t.row(Observable::LqQ).unwrap().exponent;
            assert!((l2 + 1.0 - lq).abs() < 1e-14);
        }
        for q in [2.1, 2.3, 2.9, 3.2] {
            let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, q, 1.0, 10.0).unwrap();
            let t = predicted_exponents(&p).unwrap();
            let g = t.row(Observable::GradSq).unwrap().exponent;
            let lq = t.row(Observable::LqQ).unwrap().exponent;
            assert!((g - lq).abs() < 1e-14);
        }
    }

    fn synthetic_sweep(pred: &Predictions, eps: &[f64]) -> SweepResult {
        let law = |o: Observable, e: f64| {
            let r = pred.row(o).unwrap();
            r.prefactor.unwrap_or(1.0) * e.powf(r.exponent) * log_factor(e, r.log_exponent)
        };
        let entries = eps
            .iter()
            .map(|&e| {
                let gap = pred.row(Observable::EnergyGap).unwrap();
                let m = pred.gap_reference.unwrap();
                let energy_row = pred.row(Observable::Energy).unwrap();
                let energy = (m - gap.prefactor.unwrap_or(1.0) * e.powf(gap.exponent)) * e.powf(energy_row.exponent);
                let zero = FieldTerms { grad_sq: 1.0, l2_sq: 1.0, d_term: 1.0, lq_q: 1.0 };
                let o = Observables {
                    energy,
                    l2_sq: law(Observable::L2Sq, e),
                    grad_sq: law(Observable::GradSq, e),
                    lq_q: law(Observable::LqQ, e),
                    d_term: law(Observable::DTerm, e),
                    center: law(Observable::Center, e),
                    frame_energy: 1.0,
                    frame: zero,
                    tau: 1.0,
                    distance_norm: DistanceNorm::H1,
                    distance_fixed: 0.0,
                    distance_matched: 0.0,
                    zeta: 1.0,
                    xi: 1.0,
                    predicted_zeta: 1.0,
                    relative_residual: 0.0,
                    nehari_residual: 0.0,
                    pohozaev_residual: 0.0,
                    grad_residual: 0.0,
                    iterations: 0,
                    newton_iterations: 0,
                };
                SweepEntry { epsilon: e, status: EntryStatus::Converged, observables: Some(o), frame_field: None, wall_seconds: 0.0 }
            })
            .collect();
        SweepResult {
            schema: SWEEP_SCHEMA.into(),
            params: pred.params,
            limit_kind: LimitKind::Talenti,
            entries,
            multistart: vec![],
        }
    }

    #[test]
    fn perfect_synthetic_sweep_passes_every_row() {
        let p = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 10.0).unwrap();
        let mut pred = predicted_exponents(&p).unwrap();
        for r in pred.rows.iter_mut() {
            r.prefactor = Some(2.0);
        }
        pred.gap_reference = Some(3.0);
        let sweep = synthetic_sweep(&pred, &log_spaced(1e2, 1e5, 8).unwrap());
        let report = compare(&sweep, &pred).unwrap();
        for r in &report.rows {
            if r.observable == Observable::Energy {
                continue;
            }
            assert!(r.pass, "{r:?}");
            assert!(r.relative_exponent_error < 1e-12, "{r:?}");
            assert!(r.prefactor_error.unwrap() < 1e-12, "{r:?}");
        }
        assert!(report.invariant("gap-positive").unwrap().pass);
    }

    #[test]
    fn compare_needs_six_entries() {
        let p = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 10.0).unwrap();
        let mut pred = predicted_exponents(&p).unwrap();
        pred.gap_reference = Some(2.0);
        let sweep = synthetic_sweep(&pred, &log_spaced(1e2, 1e5, 5).unwrap());
        assert!(compare(&sweep, &pred).is_err());
    }

    #[test]
    fn mass_curve_energy_identity() {
        let p = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 10.0).unwrap();
        let mut pred = predicted_exponents(&p).unwrap();
        pred.gap_reference = Some(2.0);
        let sweep = synthetic_sweep(&pred, &log_spaced(1e2, 1e5, 6).unwrap());
        for (m, (e, o)) in mass_curve(&sweep).iter().zip(sweep.converged()) {
            assert_eq!(m.lambda, -e);
            assert!((m.energy_e - (o.energy - 0.5 * e * m.a * m.a)).abs() <= 1e-12 * o.energy.abs().max(e * m.a * m.a));
        }
    }

    #[test]
    fn tail_exponent_of_a_power() {
        let g = crate::radial_grid::make_grid(3, 1000.0, 400, 20.0).unwrap();
        let w = RadialField::from_fn(&g, |r| (1.0 + r * r).powf(-1.5));
        let fit = tail_exponent(&w, 1e-7, 1e-3).unwrap();
        assert!((fit.exponent - 3.0).abs() < 1e-2, "{}", fit.exponent);
    }
}
