//! Explicit limit profiles and constants: the lower-critical extremals `U_ρ`,
//! the Talenti family `V_ρ`, the ground state `W` of `-ΔW + W = A W^{q-1}`,
//! the best constants `S_1`, `S_q`, `S_α`, and the scale `ρ₀` selected by the
//! local perturbation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::ode::{DormandPrince, Stop};
use crate::quadrature::adaptive;
use crate::radial_grid::{grad_norm_sq_with, neg_laplacian, OuterBoundary, RadialField, RadialGrid};
use crate::riesz::{d_term, hls_sharp_constant, riesz_apply, RieszKernel};
use crate::solver::Regime;

/// Which limit object a profile represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    /// `U_ρ`, radial ground state of `U = (I_α * |U|^{(N+α)/N}) U^{α/N}`.
    LowerExtremal,
    /// `V_ρ`, the Talenti family.
    Talenti,
    /// `W`, the ground state of `-ΔW + W = A W^{q-1}`.
    LocalGroundState,
    /// Solution of the borderline limit problem (computed by the solver).
    MixedLimit,
}

/// A sampled limit profile.
#[derive(Debug, Clone)]
pub struct LimitProfile {
    pub kind: LimitKind,
    /// Scale parameter `ρ` (1 for `W` and mixed limits).
    pub rho: f64,
    pub field: RadialField,
}

/// `V_ρ(r) = ρ^{-(N-2)/2} [N(N-2)]^{(N-2)/4} (1 + (r/ρ)²)^{-(N-2)/2}`.
pub fn talenti_value(dim_n: usize, rho: f64, r: f64) -> f64 {
    let n = dim_n as f64;
    let x = r / rho;
    rho.powf(-0.5 * (n - 2.0)) * (n * (n - 2.0)).powf(0.25 * (n - 2.0)) * (1.0 + x * x).powf(-0.5 * (n - 2.0))
}

/// `U_ρ(r) = ρ^{-N/2} (A₀ / (1 + (r/ρ)²))^{N/2}`.
pub fn lower_extremal_value(dim_n: usize, rho: f64, a0: f64, r: f64) -> f64 {
    let n = dim_n as f64;
    let x = r / rho;
    rho.powf(-0.5 * n) * (a0 / (1.0 + x * x)).powf(0.5 * n)
}

/// Amplitude `t` for which `t V_1` solves the critical Choquard equation
/// `-ΔV = (I_α * |V|^{2*_α}) V^{2*_α - 1}` exactly.
///
/// Using `I_α * (1+|x|²)^{-(N+α)/2} = c_α (1+|x|²)^{-(N-α)/2}` with
/// `c_α = Γ((N-α)/2) / (2^α Γ((N+α)/2))`, one finds
/// `t^{2(2*_α - 1)} = [N(N-2)]^{-α/2} / c_α`. The amplitude
/// `[N(N-2)]^{(N-2)/4}` of `V_1` is therefore exact only for `α = 2`, where
/// `t = 1`; for other `α` it differs by a few percent.
pub fn talenti_choquard_amplitude(dim_n: usize, alpha: f64) -> f64 {
    let n = dim_n as f64;
    let c = gamma(0.5 * (n - alpha)) / (2f64.powf(alpha) * gamma(0.5 * (n + alpha)));
    let p = (n + alpha) / (n - 2.0);
    ((n * (n - 2.0)).powf(-0.5 * alpha) / c).powf(1.0 / (2.0 * (p - 1.0)))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument(format!("scale rho must be positive, got {rho}")));
    }
    Ok(())
}

/// Samples the Talenti profile `V_ρ` on `grid`.
pub fn talenti(grid: &Arc<RadialGrid>, rho: f64) -> Result<LimitProfile> {
    check_rho(rho)?;
    let n = grid.dim_n;
    Ok(LimitProfile { kind: LimitKind::Talenti, rho, field: RadialField::from_fn(grid, |r| talenti_value(n, rho, r)) })
}

/// Samples `U_ρ` for a given amplitude constant `A₀`.
pub fn lower_extremal(grid: &Arc<RadialGrid>, rho: f64, a0: f64) -> Result<LimitProfile> {
    check_rho(rho)?;
    if !(a0.is_finite() && a0 > 0.0) {
        return Err(Error::InvalidArgument(format!("A0 must be positive, got {a0}")));
    }
    let n = grid.dim_n;
    Ok(LimitProfile {
        kind: LimitKind::LowerExtremal,
        rho,
        field: RadialField::from_fn(grid, |r| lower_extremal_value(n, rho, a0, r)),
    })
}

fn l2_of(values: &[f64], grid: &RadialGrid) -> f64 {
    (grid.sphere_area * values.iter().zip(&grid.weights).map(|(v, w)| v * v * w).sum::<f64>()).sqrt()
}

/// Relative `L²` residual of `-ΔV = (I_α * |V|^{2*_α}) V^{2*_α - 1}`,
/// `2*_α = (N+α)/(N-2)`, normalized by `‖-ΔV‖₂`. The discrete Laplacian
/// continues the field by a harmonic tail beyond the truncation radius,
/// since the profile is not truncated.
pub fn talenti_residual(kernel: &RieszKernel, field: &RadialField) -> Result<f64> {
    let n = field.grid.dim_n as f64;
    let p = (n + kernel.alpha) / (n - 2.0);
    let lap = neg_laplacian(field, OuterBoundary::HarmonicTail);
    let pot = riesz_apply(kernel, &field.map(|v| v.abs().powf(p)))?;
    let res: Vec<f64> = (0..field.values.len())
        .map(|k| {
            let v = field.values[k];
            lap.values[k] - pot.values[k] * v.abs().powf(p - 2.0) * v
        })
        .collect();
    Ok(l2_of(&res, &field.grid) / l2_of(&lap.values, &field.grid))
}

/// Relative `L²` residual of `U = (I_α * |U|^{(N+α)/N}) U^{α/N}`,
/// normalized by `‖U‖₂`.
pub fn lower_extremal_residual(kernel: &RieszKernel, field: &RadialField) -> Result<f64> {
    let n = field.grid.dim_n as f64;
    let p = (n + kernel.alpha) / n;
    let pot = riesz_apply(kernel, &field.map(|v| v.abs().powf(p)))?;
    let res: Vec<f64> =
        field.values.iter().zip(&pot.values).map(|(&u, &phi)| u - phi * u.abs().powf(p - 2.0) * u).collect();
    Ok(l2_of(&res, &field.grid) / l2_of(&field.values, &field.grid))
}

/// Result of the `A₀` calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A0Calibration {
    pub a0: f64,
    /// Relative residual of the lower-critical equation at the optimum.
    pub residual: f64,
}

/// Calibrates `A₀` by minimizing the discrete residual of the lower-critical
/// equation over the family `(A₀/(1+r²))^{N/2}`: a logarithmic scan brackets
/// the minimum and golden-section search refines it.
pub fn calibrate_a0(kernel: &RieszKernel) -> Result<A0Calibration> {
    let grid = &kernel.grid;
    let n = grid.dim_n as f64;
    let alpha = kernel.alpha;
    let p = (n + alpha) / n;
    let shape = RadialField::from_fn(grid, |r| (1.0 + r * r).powf(-0.5 * n));
    let pot = riesz_apply(kernel, &shape.map(|v| v.powf(p)))?;
    let image: Vec<f64> = shape.values.iter().zip(&pot.values).map(|(u, phi)| phi * u.powf(p - 1.0)).collect();
    let norm = l2_of(&shape.values, grid);
    // U_A = A^{N/2} shape and its image scales with A^{N(2p-1)/2}, so the
    // relative residual depends on A only through A^α.
    let residual = |log_a: f64| -> f64 {
        let s = (alpha * log_a).exp();
        let diff: Vec<f64> = shape.values.iter().zip(&image).map(|(u, m)| u - s * m).collect();
        l2_of(&diff, grid) / norm
    };
    let (lo, hi, samples) = ((1e-3f64).ln(), (1e3f64).ln(), 121usize);
    let xs: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| residual(x)).collect();
    let best = (0..samples).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    if best == 0 || best == samples - 1 || !vals[best].is_finite() {
        return Err(Error::Bracket(format!(
            "A0 residual has no interior minimum on [1e-3, 1e3] (N={}, alpha={alpha})",
            grid.dim_n
        )));
    }
    let (mut a, mut b) = (xs[best - 1], xs[best + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (residual(c), residual(d));
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = residual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = residual(d);
        }
    }
    let x = 0.5 * (a + b);
    Ok(A0Calibration { a0: x.exp(), residual: residual(x) })
}

/// Ground state of `-ΔW + W = A W^{q-1}` together with integral diagnostics
/// accumulated along the shooting trajectory (independent of any grid).
#[derive(Debug, Clone)]
pub struct ShootingSolution {
    pub profile: LimitProfile,
    /// `W(0)`.
    pub center: f64,
    /// `‖∇W‖₂²`, `‖W‖₂²`, `‖W‖_q^q` from the ODE quadratures.
    pub grad_sq: f64,
    pub l2_sq: f64,
    pub lq_q: f64,
    /// `|(N-2)/2 ‖∇W‖² + N/2 ‖W‖² - NA/q ‖W‖_q^q|` over the largest term.
    pub pohozaev_residual: f64,
    /// `|‖∇W‖² + ‖W‖² - A‖W‖_q^q|` over the largest term.
    pub nehari_residual: f64,
    /// Radius beyond which the exponential tail model is used.
    pub match_radius: f64,
}

const SHOOT_R0: f64 = 1e-4;
const SHOOT_R_END: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    /// `W` turns upward before crossing zero: the center value is too small.
    Under(f64),
    /// `W` crosses zero: the center value is too large.
    Over(f64),
}

struct Shooter {
    dim_n: f64,
    q: f64,
    dp: DormandPrince,
}

impl Shooter {
    fn rhs(&self, r: f64, y: &[f64; 5]) -> [f64; 5] {
        let (w, v) = (y[0], y[1]);
        let jac = r.powf(self.dim_n - 1.0);
        let nl = w.abs().powf(self.q - 2.0) * w;
        [v, w - nl - (self.dim_n - 1.0) / r * v, v * v * jac, w * w * jac, w.abs().powf(self.q) * jac]
    }

    /// State at `SHOOT_R0` from the Taylor expansion about the origin.
    fn start(&self, w0: f64) -> [f64; 5] {
        let n = self.dim_n;
        let f0 = w0 - w0.powf(self.q - 1.0);
        let r = SHOOT_R0;
        let vol = r.powf(n) / n;
        [w0 + f0 * r * r / (2.0 * n), f0 * r / n, 0.0, w0 * w0 * vol, w0.powf(self.q) * vol]
    }

    fn classify(&self, w0: f64) -> Option<Shot> {
        let mut r = SHOOT_R0;
        let mut y = self.start(w0);
        let mut h = 1e-3;
        let f = |r: f64, y: &[f64; 5]| self.rhs(r, y);
        let mut ev = |_: f64, y: &[f64; 5]| y[0] < 0.0 || y[1] > 0.0;
        match self.dp.integrate(&f, &mut r, &mut y, SHOOT_R_END, &mut h, &mut ev)? {
            Stop::Event if y[0] < 0.0 => Some(Shot::Over(r)),
            Stop::Event => Some(Shot::Under(r)),
            Stop::Reached => {
                // still decaying at the far end: decide by the growing mode
                let n = self.dim_n;
                let decaying_slope = -y[0] * (1.0 + (n - 1.0) / (2.0 * r));
                Some(if y[1] > decaying_slope { Shot::Under(r) } else { Shot::Over(r) })
            }
        }
    }
}

/// Shoots the positive radial ground state of `-ΔW + W = A W^{q-1}` in `R^N`
/// and samples it on `grid`.
pub fn shoot_w(dim_n: usize, q: f64, a_coef: f64, grid: &Arc<RadialGrid>) -> Result<LimitProfile> {
    Ok(shoot_w_detailed(dim_n, q, a_coef, grid)?.profile)
}

/// [`shoot_w`] with the trajectory diagnostics.
pub fn shoot_w_detailed(dim_n: usize, q: f64, a_coef: f64, grid: &Arc<RadialGrid>) -> Result<ShootingSolution> {
    let n = dim_n as f64;
    if dim_n < 3 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 3, got {dim_n}")));
    }
    let q_star = 2.0 * n / (n - 2.0);
    if !(q > 2.0 && q < q_star) {
        return Err(Error::InvalidArgument(format!("q must lie in (2, {q_star}), got {q}")));
    }
    if !(a_coef.is_finite() && a_coef > 0.0) {
        return Err(Error::InvalidArgument(format!("A must be positive, got {a_coef}")));
    }
    if grid.dim_n != dim_n {
        return Err(Error::GridMismatch(format!("grid has N={}, requested N={dim_n}", grid.dim_n)));
    }
    let sh = Shooter { dim_n: n, q, dp: DormandPrince::new(1e-13, 1e-300) };

    // bracket: scan W(0) over [1e-3, 1e3] for an undershoot followed by an overshoot
    let scan: Vec<f64> = (0..=120).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0)).collect();
    let mut bracket = None;
    let mut prev: Option<f64> = None;
    for &w0 in &scan {
        let shot = sh.classify(w0).ok_or_else(|| Error::Bracket("shooting integration failed".into()))?;
        match shot {
            Shot::Under(_) => prev = Some(w0),
            Shot::Over(_) => {
                if let Some(lo) = prev {
                    bracket = Some((lo, w0));
                    break;
                }
            }
        }
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::Bracket(format!("no undershoot/overshoot pair for W(0) in [1e-3, 1e3] (N={dim_n}, q={q})"))
    })?;
    let mut under_radius = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match sh.classify(mid).ok_or_else(|| Error::Bracket("shooting integration failed".into()))? {
            Shot::Under(r) => {
                lo = mid;
                under_radius = r;
            }
            Shot::Over(_) => hi = mid,
        }
    }
    if under_radius == 0.0 {
        if let Some(Shot::Under(r)) = sh.classify(lo) {
            under_radius = r;
        }
    }
    let w0 = lo;

    // follow the undershooting trajectory up to the matching radius
    let f = |r: f64, y: &[f64; 5]| sh.rhs(r, y);
    let mut r = SHOOT_R0;
    let mut y = sh.start(w0);
    let mut h = 1e-3;
    let threshold = 1e-6 * w0;
    let cap = (under_radius - 5.0).max(1.0);
    let mut ev = |_: f64, y: &[f64; 5]| y[0] < threshold;
    sh.dp
        .integrate(&f, &mut r, &mut y, cap, &mut h, &mut ev)
        .ok_or_else(|| Error::Bracket("shooting integration failed".into()))?;
    let r_m = r;
    let w_m = y[0];

    // sample on the grid (nodes beyond r_m use the tail model)
    let decay = 0.5 * (n - 1.0);
    let tail_c = w_m * r_m.powf(decay) * r_m.exp();
    let tail = |r: f64| tail_c * r.powf(-decay) * (-r).exp();
    let mut values = Vec::with_capacity(grid.len());
    let mut rr = SHOOT_R0;
    let mut yy = sh.start(w0);
    let mut hh = 1e-3;
    for &node in &grid.nodes {
        let v = if node <= SHOOT_R0 {
            let f0 = w0 - w0.powf(q - 1.0);
            w0 + f0 * node * node / (2.0 * n)
        } else if node <= r_m {
            sh.dp
                .integrate(&f, &mut rr, &mut yy, node, &mut hh, &mut |_, _| false)
                .ok_or_else(|| Error::Bracket("shooting integration failed".into()))?;
            yy[0]
        } else {
            tail(node)
        };
        values.push(v);
    }

    // integral diagnostics: trajectory quadratures plus the tail beyond r_m
    let omega = grid.sphere_area;
    let tail_int = |g: &dyn Fn(f64) -> f64| adaptive(&|s: f64| g(s) * s.powf(n - 1.0), r_m, r_m + 60.0, 1e-22);
    let dtail = |s: f64| -tail(s) * (1.0 + decay / s);
    let grad1 = omega * (y[2] + tail_int(&|s| dtail(s).powi(2)));
    let l2_1 = omega * (y[3] + tail_int(&|s| tail(s).powi(2)));
    let lq_1 = omega * (y[4] + tail_int(&|s| tail(s).powf(q)));

    // rescale from A = 1 to the requested A
    let amp = a_coef.powf(-1.0 / (q - 2.0));
    let norm_scale = amp * amp;
    let grad_sq = grad1 * norm_scale;
    let l2_sq = l2_1 * norm_scale;
    let lq_q = lq_1 * amp.powf(q);
    let poh = [0.5 * (n - 2.0) * grad_sq, 0.5 * n * l2_sq, -n * a_coef / q * lq_q];
    let neh = [grad_sq, l2_sq, -a_coef * lq_q];
    let rel = |t: &[f64; 3]| t.iter().sum::<f64>().abs() / t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let field = RadialField::new(grid.clone(), values.iter().map(|v| v * amp).collect())?;
    Ok(ShootingSolution {
        profile: LimitProfile { kind: LimitKind::LocalGroundState, rho: 1.0, field },
        center: w0 * amp,
        grad_sq,
        l2_sq,
        lq_q,
        pohozaev_residual: rel(&poh),
        nehari_residual: rel(&neh),
        match_radius: r_m,
    })
}

/// `L²`, `Ḣ¹` and `L^q` integrals of a sampled profile over all of `R^N`:
/// grid quadrature inside the truncation radius plus the contribution of the
/// profile's algebraic tail beyond it (`r^{-(N-2)}` for `V_ρ`, `r^{-N}` for
/// `U_ρ`; exponentially decaying profiles need no correction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileNorms {
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub lq_q: f64,
    pub q: f64,
}

pub fn profile_norms(profile: &LimitProfile, q: f64) -> ProfileNorms {
    let field = &profile.field;
    let g = &field.grid;
    let n = g.dim_n as f64;
    let decay = match profile.kind {
        LimitKind::Talenti => Some(n - 2.0),
        LimitKind::LowerExtremal => Some(n),
        LimitKind::LocalGroundState | LimitKind::MixedLimit => None,
    };
    let mut l2_sq = field.integral_abs_pow(2.0);
    let mut lq_q = field.integral_abs_pow(q);
    let grad_sq = match decay {
        None => grad_norm_sq_with(field, OuterBoundary::Dirichlet),
        Some(k) => {
            let last = g.len() - 1;
            let (rl, ul) = (g.nodes[last], field.values[last]);
            let c = ul.abs() * rl.powf(k);
            let r = g.r_max;
            // ∫_R^∞ (c s^{-k})^m s^{N-1} ds = c^m R^{N-km} / (km - N)
            let tail = |m: f64| {
                if k * m > n {
                    c.powf(m) * r.powf(n - k * m) / (k * m - n)
                } else {
                    f64::INFINITY
                }
            };
            l2_sq += g.sphere_area * tail(2.0);
            lq_q += g.sphere_area * tail(q);
            // interior faces plus the gradient energy of the tail beyond r_{n-1}
            let inner = grad_norm_sq_with(field, OuterBoundary::HarmonicTail)
                - g.sphere_area * (n - 2.0) * ul * ul * rl.powf(n - 2.0);
            let tail_grad = k * k * c * c * rl.powf(n - 2.0 * k - 2.0) / (2.0 * k + 2.0 - n);
            inner + g.sphere_area * tail_grad
        }
    };
    ProfileNorms { l2_sq, grad_sq, lq_q, q }
}

/// Best constants and limit least energies, with per-grid values and the
/// largest relative spread across grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    pub dim_n: usize,
    pub alpha: f64,
    pub q: f64,
    pub s1: f64,
    pub sq: f64,
    pub s_alpha: f64,
    pub hls_sharp: f64,
    pub a0: f64,
    pub m_infty_lower: f64,
    pub m_infty_upper: f64,
    /// Values computed on each grid, in input order; the table values are
    /// taken from the last entry.
    pub per_grid: Vec<GridConstants>,
    /// Largest relative difference of each constant across grids.
    pub deltas: GridDeltas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConstants {
    pub node_count: usize,
    pub r_max: f64,
    pub stretch: f64,
    pub a0: f64,
    pub a0_residual: f64,
    pub s1: f64,
    pub sq: f64,
    pub s_alpha: f64,
    /// Norms of `U_1` and `V_1` (with tails) used by `ρ₀`.
    pub u1_norms: ProfileNorms,
    pub v1_norms: ProfileNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDeltas {
    pub a0: f64,
    pub s1: f64,
    pub sq: f64,
    pub s_alpha: f64,
}

/// `m_∞` of the lower-critical limit, `α/(2(N+α)) S_1^{(N+α)/α}`.
pub fn m_infty_lower(dim_n: usize, alpha: f64, s1: f64) -> f64 {
    let n = dim_n as f64;
    alpha / (2.0 * (n + alpha)) * s1.powf((n + alpha) / alpha)
}

/// `m_∞` of the upper-critical limit, `(2+α)/(2(N+α)) S_α^{(N+α)/(2+α)}`.
pub fn m_infty_upper(dim_n: usize, alpha: f64, s_alpha: f64) -> f64 {
    let n = dim_n as f64;
    (2.0 + alpha) / (2.0 * (n + alpha)) * s_alpha.powf((n + alpha) / (2.0 + alpha))
}

/// Least energy of `-ΔW + W = A W^{q-1}`, `(q-2)/(2q) A^{-2/(q-2)} S_q^{q/(q-2)}`.
pub fn m_local(q: f64, a_coef: f64, sq: f64) -> f64 {
    (q - 2.0) / (2.0 * q) * a_coef.powf(-2.0 / (q - 2.0)) * sq.powf(q / (q - 2.0))
}

/// Computes the constants on every kernel's grid (all kernels must share
/// `N` and `α`).
pub fn constants(dim_n: usize, alpha: f64, q: f64, kernels: &[&RieszKernel]) -> Result<ConstantsTable> {
    if kernels.is_empty() {
        return Err(Error::InvalidArgument("at least one kernel is required".into()));
    }
    let n = dim_n as f64;
    let mut per_grid = Vec::with_capacity(kernels.len());
    for k in kernels {
        if k.grid.dim_n != dim_n || (k.alpha - alpha).abs() > 1e-15 {
            return Err(Error::GridMismatch(format!(
                "kernel built for (N={}, alpha={}) but constants requested for (N={dim_n}, alpha={alpha})",
                k.grid.dim_n, k.alpha
            )));
        }
        let grid = &k.grid;
        let cal = calibrate_a0(k)?;
        let u1 = lower_extremal(grid, 1.0, cal.a0)?;
        let u1_norms = profile_norms(&u1, q);
        let s1 = u1_norms.l2_sq / d_term(k, &u1.field, (n + alpha) / n).powf(n / (n + alpha));
        let v1 = talenti(grid, 1.0)?;
        let v1_norms = profile_norms(&v1, q);
        let s_alpha = v1_norms.grad_sq / d_term(k, &v1.field, (n + alpha) / (n - 2.0)).powf((n - 2.0) / (n + alpha));
        let w = shoot_w(dim_n, q, 1.0, grid)?;
        let wn = profile_norms(&w, q);
        let sq = (wn.grad_sq + wn.l2_sq) / wn.lq_q.powf(2.0 / q);
        per_grid.push(GridConstants {
            node_count: grid.len(),
            r_max: grid.r_max,
            stretch: grid.stretch,
            a0: cal.a0,
            a0_residual: cal.residual,
            s1,
            sq,
            s_alpha,
            u1_norms,
            v1_norms,
        });
    }
    let spread = |f: &dyn Fn(&GridConstants) -> f64| {
        let vals: Vec<f64> = per_grid.iter().map(f).collect();
        let mut worst: f64 = 0.0;
        for a in &vals {
            for b in &vals {
                worst = worst.max((a - b).abs() / b.abs());
            }
        }
        worst
    };
    let deltas = GridDeltas {
        a0: spread(&|g| g.a0),
        s1: spread(&|g| g.s1),
        sq: spread(&|g| g.sq),
        s_alpha: spread(&|g| g.s_alpha),
    };
    let last = per_grid.last().cloned().expect("non-empty");
    Ok(ConstantsTable {
        dim_n,
        alpha,
        q,
        s1: last.s1,
        sq: last.sq,
        s_alpha: last.s_alpha,
        hls_sharp: hls_sharp_constant(dim_n, alpha)?,
        a0: last.a0,
        m_infty_lower: m_infty_lower(dim_n, alpha, last.s1),
        m_infty_upper: m_infty_upper(dim_n, alpha, last.s_alpha),
        per_grid,
        deltas,
    })
}

/// The selected scale `ρ₀` and, in the upper regime, the alternative
/// closed form written through `2*` (identical algebraically).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rho0 {
    pub value: f64,
    pub alternate: f64,
    /// `|value - alternate| / value`.
    pub identity_gap: f64,
}

/// Evaluates `ρ₀` from the norms of `U_1` (lower regime, needs `‖∇U_1‖²`
/// and `‖U_1‖_q^q`) or of `V_1` (upper regime, needs `‖V_1‖_q^q` and
/// `‖V_1‖₂²`).
pub fn rho0(regime: Regime, dim_n: usize, alpha: f64, q: f64, a_coef: f64, norms: &ProfileNorms) -> Result<Rho0> {
    let n = dim_n as f64;
    if !(a_coef.is_finite() && a_coef > 0.0) {
        return Err(Error::InvalidArgument(format!("A must be positive, got {a_coef}")));
    }
    if (norms.q - q).abs() > 1e-15 {
        return Err(Error::InvalidArgument(format!("norms were computed for q={}, not q={q}", norms.q)));
    }
    match regime {
        Regime::LowerCritical => {
            let q_hi = 2.0 + 4.0 * alpha / (n * (2.0 + alpha));
            if !(q > 2.0 && q < q_hi) {
                return Err(Error::Regime(format!(
                    "lower-regime rho0 requires q in (2, 2+4α/(N(2+α))) = (2, {q_hi}), got {q}"
                )));
            }
            let base = 2.0 * q * norms.grad_sq / (n * a_coef * (q - 2.0) * norms.lq_q);
            let value = base.powf(2.0 / (4.0 - n * (q - 2.0)));
            Ok(Rho0 { value, alternate: value, identity_gap: 0.0 })
        }
        Regime::UpperCritical => {
            if dim_n < 5 {
                return Err(Error::Regime(format!(
                    "upper-regime rho0 requires N >= 5 so that V_1 is square integrable, got N={dim_n}"
                )));
            }
            let q_star = 2.0 * n / (n - 2.0);
            if !(q > 2.0 && q < q_star) {
                return Err(Error::Regime(format!("upper-regime rho0 requires q in (2, {q_star}), got {q}")));
            }
            let expo = 2.0 / ((n - 2.0) * (q - 2.0));
            let value =
                (a_coef * (2.0 * n - q * (n - 2.0)) * norms.lq_q / (2.0 * q * norms.l2_sq)).powf(expo);
            let alternate = (n * a_coef * (q_star - q) * norms.lq_q / (q_star * q * norms.l2_sq)).powf(expo);
            Ok(Rho0 { value, alternate, identity_gap: (value - alternate).abs() / value })
        }
    }
}

/// Ratios of a field to the radial decay bounds for `H¹` and `D^{1,2}`
/// functions: `|u(r)|² ≤ (2/ω) r^{1-N} ‖u‖₂ ‖∇u‖₂ ≤ (1/ω) r^{1-N} ‖u‖²_{H¹}`
/// and `|u(r)| ≤ (ω (N-2))^{-1/2} r^{(2-N)/2} ‖∇u‖₂`. Each entry is the
/// maximum over nodes with `r ≥ 1` of `|u(r)|` divided by the bound, so a
/// value ≤ 1 means the bound holds with the explicit constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialBounds {
    pub h1_ratio: f64,
    pub d12_ratio: f64,
}

pub fn radial_bounds(field: &RadialField, norms: &ProfileNorms) -> RadialBounds {
    let g = &field.grid;
    let n = g.dim_n as f64;
    let omega = g.sphere_area;
    let h1 = (norms.l2_sq + norms.grad_sq).sqrt();
    let d12 = norms.grad_sq.sqrt();
    let mut out = RadialBounds { h1_ratio: 0.0, d12_ratio: 0.0 };
    for (&r, &u) in g.nodes.iter().zip(&field.values) {
        if r < 1.0 {
            continue;
        }
        let b1 = omega.powf(-0.5) * r.powf(0.5 * (1.0 - n)) * h1;
        let b2 = (omega * (n - 2.0)).powf(-0.5) * r.powf(0.5 * (2.0 - n)) * d12;
        out.h1_ratio = out.h1_ratio.max(u.abs() / b1);
        out.d12_ratio = out.d12_ratio.max(u.abs() / b2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_grid::{lp_norm, make_grid};
    use crate::riesz::build_kernel;

    /// Independent closed form of the lower-critical amplitude:
    /// `A₀ = c^{-1/α}`, `c = Γ((N-α)/2) / (2^α Γ((N+α)/2))`.
    fn a0_oracle(n: f64, alpha: f64) -> f64 {
        let c = gamma(0.5 * (n - alpha)) / (2f64.powf(alpha) * gamma(0.5 * (n + alpha)));
        c.powf(-1.0 / alpha)
    }

    #[test]
    fn choquard_amplitude_of_talenti_profile() {
        for n in [3, 4, 5, 6] {
            assert!((talenti_choquard_amplitude(n, 2.0) - 1.0).abs() < 1e-13);
        }
        // N = 3, α = 1: c_α = 1/2, t⁶ = 2/√3
        let want = (2.0 / 3f64.sqrt()).powf(1.0 / 6.0);
        assert!((talenti_choquard_amplitude(3, 1.0) - want).abs() < 1e-14);
        let g = make_grid(3, 400.0, 400, 20.0).unwrap();
        let k = build_kernel(&g, 1.0).unwrap();
        let v = talenti(&g, 1.0).unwrap().field;
        let plain = talenti_residual(&k, &v).unwrap();
        let scaled = talenti_residual(&k, &v.scaled(want)).unwrap();
        assert!(scaled < 1e-3 && plain > 10.0 * scaled, "{plain} vs {scaled}");
    }

    #[test]
    fn talenti_center_values() {
        let g = make_grid(3, 100.0, 200, 10.0).unwrap();
        assert!((talenti_value(3, 1.0, 0.0) - 3f64.powf(0.25)).abs() < 1e-15);
        assert!((talenti_value(3, 1.0, 0.0) - 1.31607).abs() < 1e-5);
        assert!((talenti_value(4, 1.0, 0.0) - 8f64.sqrt()).abs() < 1e-14);
        assert!((talenti_value(5, 2.0, 0.0) - 2f64.powf(-1.5) * 15f64.powf(0.75)).abs() < 1e-14);
        let v = talenti(&g, 1.0).unwrap();
        assert_eq!(v.kind, LimitKind::Talenti);
        assert!(talenti(&g, 0.0).is_err());
    }

    #[test]
    fn lower_extremal_scaling_laws() {
        let g = make_grid(3, 2000.0, 1500, 40.0).unwrap();
        let u1 = lower_extremal(&g, 1.0, 1.7).unwrap();
        let u2 = lower_extremal(&g, 2.0, 1.7).unwrap();
        assert_eq!(u1.field.values[0], lower_extremal_value(3, 1.0, 1.7, g.nodes[0]));
        let (n1, n2) = (profile_norms(&u1, 2.2), profile_norms(&u2, 2.2));
        assert!((n1.l2_sq - n2.l2_sq).abs() < 1e-6 * n1.l2_sq);
        let factor = 2f64.powf(3.0 - 1.5 * 2.2);
        assert!((n2.lq_q - factor * n1.lq_q).abs() < 1e-6 * n2.lq_q);
    }

    #[test]
    fn calibration_matches_closed_form_amplitude() {
        let g = make_grid(3, 1000.0, 600, 16.4).unwrap();
        let k = build_kernel(&g, 2.0).unwrap();
        let cal = calibrate_a0(&k).unwrap();
        assert!((cal.a0 - a0_oracle(3.0, 2.0)).abs() < 1e-3 * cal.a0, "a0 = {}", cal.a0);
        assert!(cal.residual < 1e-3);
        let res = |a: f64| lower_extremal_residual(&k, &lower_extremal(&g, 1.0, a).unwrap().field).unwrap();
        assert!(res(cal.a0) < res(2.0 * cal.a0) && res(cal.a0) < res(0.5 * cal.a0));
        assert!((res(cal.a0) - cal.residual).abs() < 1e-12);
    }

    #[test]
    fn shooting_satisfies_integral_identities() {
        let g = make_grid(3, 60.0, 800, 8.0).unwrap();
        let s = shoot_w_detailed(3, 4.0, 1.0, &g).unwrap();
        assert!(s.pohozaev_residual < 1e-8, "pohozaev {}", s.pohozaev_residual);
        assert!(s.nehari_residual < 1e-8, "nehari {}", s.nehari_residual);
        let v = &s.profile.field.values;
        assert!(v.iter().all(|&x| x > 0.0));
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        // grid quadrature of the sampled profile agrees with the trajectory integrals
        assert!((lp_norm(&s.profile.field, 2.0).powi(2) - s.l2_sq).abs() < 1e-5 * s.l2_sq);
    }

    #[test]
    fn shooting_amplitude_scaling() {
        let g = make_grid(5, 60.0, 500, 8.0).unwrap();
        let w1 = shoot_w(5, 3.0, 1.0, &g).unwrap();
        let w4 = shoot_w(5, 3.0, 4.0, &g).unwrap();
        let f = 4f64.powf(-1.0);
        for (a, b) in w1.field.values.iter().zip(&w4.field.values) {
            assert!((b - f * a).abs() <= 1e-8 * a.abs().max(1e-300) + 1e-300);
        }
        assert!(shoot_w(5, 10.0 / 3.0, 1.0, &g).is_err());
    }

    #[test]
    fn rho0_forms_agree_and_respect_regimes() {
        let norms = ProfileNorms { l2_sq: 3.0, grad_sq: 2.0, lq_q: 5.0, q: 3.0 };
        let r = rho0(Regime::UpperCritical, 5, 2.0, 3.0, 1.0, &norms).unwrap();
        assert!(r.identity_gap < 1e-12);
        assert!(rho0(Regime::UpperCritical, 4, 2.0, 3.0, 1.0, &norms).is_err());
        let lower = ProfileNorms { q: 2.2, ..norms };
        let a = rho0(Regime::LowerCritical, 3, 2.0, 2.2, 1.0, &lower).unwrap().value;
        let b = rho0(Regime::LowerCritical, 3, 2.0, 2.2, 0.5, &lower).unwrap().value;
        assert!(b > a);
        assert!(rho0(Regime::LowerCritical, 3, 2.0, 2.8, 1.0, &ProfileNorms { q: 2.8, ..norms }).is_err());
    }
}
