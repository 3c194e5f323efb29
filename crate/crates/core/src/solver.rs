//! Radial ground states of
//! `-Δu + εu = (I_α * |u|^p)|u|^{p-2}u + g(u)` by Nehari-projected
//! preconditioned descent followed by a Newton–GMRES polish.
//!
//! The discrete problem is posed in a *frame* `u(y) = λ w(y/ℓ)` chosen so that
//! `w` is of unit size and width. The action transforms as
//! `I_ε(u) = K · J(w)` with `K = λ² ℓ^{N-2}` and
//!
//! `J(w) = ½‖∇w‖² + (b/2)‖w‖² − (c/2p) D_p(w) − μ ∫ G(λw)`,
//!
//! `b = εℓ²`, `c = λ^{2p-2} ℓ^{2+α}`, `μ = ℓ²/λ²`. Because the radial grid and
//! the Riesz kernel are exactly covariant under dilations, the physical field
//! is the frame field on the dilated grid with values scaled by `λ`.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closed_forms::{calibrate_a0, lower_extremal, profile_norms, rho0, shoot_w, talenti};
use crate::error::{Error, Result};
use crate::linalg::{dot, gmres, Cholesky, Tridiagonal};
use crate::radial_grid::{resample_scaled, stiffness_apply, OuterBoundary, RadialField, RadialGrid};
use crate::riesz::RieszKernel;

/// Which critical exponent the nonlocal term carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `p = (N+α)/N`.
    LowerCritical,
    /// `p = (N+α)/(N-2)`.
    UpperCritical,
}

/// Position of `q` relative to `q_b = 2 + 4α/(N(2+α))` in the lower regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerSubcase {
    /// `q < q_b`: concentration on the lower-critical extremal `U_{ρ₀}`.
    Concentrating,
    /// `q = q_b`: both nonlinearities survive in the limit.
    Borderline,
    /// `q > q_b`: the local term dominates and the limit is `W`.
    LocalDominated,
}

/// Physical parameters `(N, α, regime, q, A, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub dim_n: usize,
    pub alpha: f64,
    pub regime: Regime,
    pub q: f64,
    pub a_coef: f64,
    pub epsilon: f64,
}

const BORDERLINE_TOL: f64 = 1e-12;

impl ProblemParams {
    /// Validated constructor.
    pub fn new(dim_n: usize, alpha: f64, regime: Regime, q: f64, a_coef: f64, epsilon: f64) -> Result<Self> {
        let p = Self { dim_n, alpha, regime, q, a_coef, epsilon };
        p.validate()?;
        Ok(p)
    }

    /// Checks the ranges under which ground states exist for large `ε`.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim_n as f64;
        if self.dim_n < 3 {
            return Err(Error::Regime(format!("dimension N must be at least 3, got {}", self.dim_n)));
        }
        if !(self.alpha > 0.0 && self.alpha < n) {
            return Err(Error::Regime(format!("alpha must lie in (0, N) = (0, {n}), got {}", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Regime(format!("epsilon must be positive and finite, got {}", self.epsilon)));
        }
        if !(self.a_coef.is_finite() && self.a_coef > 0.0) {
            return Err(Error::Regime(format!("A must be positive and finite, got {}", self.a_coef)));
        }
        let q = self.q;
        match self.regime {
            Regime::LowerCritical => {
                let hi = 2.0 + 4.0 / n;
                if !(q > 2.0 && q < hi) {
                    return Err(Error::Regime(format!(
                        "lower-critical regime requires 2 < q < 2 + 4/N = {hi}; got q = {q}"
                    )));
                }
            }
            Regime::UpperCritical => {
                let hi = self.q_star();
                let lo = if self.dim_n == 3 { 4.0 } else { 2.0 };
                if !(q > lo && q < hi) {
                    let bound = if self.dim_n == 3 { "4 < q < 6 when N = 3" } else { "2 < q < 2N/(N-2)" };
                    return Err(Error::Regime(format!(
                        "upper-critical regime requires {bound}, i.e. q in ({lo}, {hi}); got q = {q}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }

    /// Exponent of the nonlocal term.
    pub fn p(&self) -> f64 {
        let n = self.dim_n as f64;
        match self.regime {
            Regime::LowerCritical => (n + self.alpha) / n,
            Regime::UpperCritical => (n + self.alpha) / (n - 2.0),
        }
    }

    /// Sobolev exponent `2* = 2N/(N-2)`.
    pub fn q_star(&self) -> f64 {
        let n = self.dim_n as f64;
        2.0 * n / (n - 2.0)
    }

    /// `q_b = 2 + 4α/(N(2+α))`.
    pub fn q_borderline(&self) -> f64 {
        let n = self.dim_n as f64;
        2.0 + 4.0 * self.alpha / (n * (2.0 + self.alpha))
    }

    pub fn lower_subcase(&self) -> Option<LowerSubcase> {
        if self.regime != Regime::LowerCritical {
            return None;
        }
        let qb = self.q_borderline();
        Some(if (self.q - qb).abs() <= BORDERLINE_TOL * qb {
            LowerSubcase::Borderline
        } else if self.q < qb {
            LowerSubcase::Concentrating
        } else {
            LowerSubcase::LocalDominated
        })
    }

    /// Rate `σ` of the leading correction: `(4α − N(2+α)(q−2)) / (α(4 − N(q−2)))`
    /// in the lower regime, `(2* − q)/(q − 2)` in the upper regime.
    pub fn sigma(&self) -> f64 {
        let n = self.dim_n as f64;
        let (a, q) = (self.alpha, self.q);
        match self.regime {
            Regime::LowerCritical => (4.0 * a - n * (2.0 + a) * (q - 2.0)) / (a * (4.0 - n * (q - 2.0))),
            Regime::UpperCritical => (self.q_star() - q) / (q - 2.0),
        }
    }

    /// `τ = 1/(q − 2)`.
    pub fn tau(&self) -> f64 {
        1.0 / (self.q - 2.0)
    }
}

/// Local nonlinearity `g` with primitive `G`, behaving like `A s^{q-1}`.
pub trait Nonlinearity: Send + Sync {
    /// `G(s)`.
    fn primitive(&self, s: f64) -> f64;
    /// `g(s)`.
    fn value(&self, s: f64) -> f64;
    /// `g'(s)`.
    fn derivative(&self, s: f64) -> f64;
    /// Growth exponent `q` and leading coefficient `A`.
    fn exponent(&self) -> f64;
    fn coefficient(&self) -> f64;

    /// Frame-scaled triple `(μ G(λw), μλ g(λw), μλ² g'(λw))` with `λ`, `μ`
    /// passed as logarithms. Override for exact scaling when `λ` is extreme.
    fn scaled(&self, log_lambda: f64, log_mu: f64, w: f64) -> (f64, f64, f64) {
        let lam = log_lambda.exp();
        let mu = log_mu.exp();
        let s = lam * w;
        (mu * self.primitive(s), mu * lam * self.value(s), mu * lam * lam * self.derivative(s))
    }
}

/// The canonical power nonlinearity `g(s) = A |s|^{q-2} s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub a_coef: f64,
    pub q: f64,
}

impl Nonlinearity for PowerLaw {
    fn primitive(&self, s: f64) -> f64 {
        self.a_coef / self.q * s.abs().powf(self.q)
    }
    fn value(&self, s: f64) -> f64 {
        self.a_coef * s.abs().powf(self.q - 2.0) * s
    }
    fn derivative(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        self.a_coef * (self.q - 1.0) * s.abs().powf(self.q - 2.0)
    }
    fn exponent(&self) -> f64 {
        self.q
    }
    fn coefficient(&self) -> f64 {
        self.a_coef
    }
    fn scaled(&self, log_lambda: f64, log_mu: f64, w: f64) -> (f64, f64, f64) {
        // d = A μ λ^q, computed in logarithms so huge λ cannot overflow
        let d = (self.a_coef.ln() + log_mu + self.q * log_lambda).exp();
        let aw = w.abs();
        let pow = if aw == 0.0 { 0.0 } else { aw.powf(self.q - 2.0) };
        (d / self.q * pow * aw * aw, d * pow * w, d * (self.q - 1.0) * pow)
    }
}

/// Amplitude and length scales of the frame `u(y) = λ w(y/ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub log_lambda: f64,
    pub log_ell: f64,
}

/// Coefficients of the frame functional `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCoefficients {
    pub b: f64,
    pub c: f64,
    pub log_mu: f64,
    /// `log K`, with `I_ε(u) = K J(w)`.
    pub log_energy_scale: f64,
}

impl Frame {
    pub const IDENTITY: Frame = Frame { log_lambda: 0.0, log_ell: 0.0 };

    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    pub fn ell(&self) -> f64 {
        self.log_ell.exp()
    }

    pub fn coefficients(&self, params: &ProblemParams) -> FrameCoefficients {
        let n = params.dim_n as f64;
        let p = params.p();
        let (ll, le) = (self.log_lambda, self.log_ell);
        FrameCoefficients {
            b: (params.epsilon.ln() + 2.0 * le).exp(),
            c: ((2.0 * p - 2.0) * ll + (2.0 + params.alpha) * le).exp(),
            log_mu: 2.0 * le - 2.0 * ll,
            log_energy_scale: 2.0 * ll + (n - 2.0) * le,
        }
    }
}

/// Frame in which the ground state is of unit size for the given parameters:
///
/// * lower regime, `q < q_b`: `λ = ε^{2N/(αD)}`, `ℓ = ε^{-N(q-2)/(αD)}`, `D = 4 − N(q−2)`;
/// * lower regime, `q ≥ q_b`: `λ = ε^{1/(q-2)}`, `ℓ = ε^{-1/2}`;
/// * upper regime, `N ≥ 5`: `λ = ε^{1/(q-2)}`, `ℓ = ε^{-2/((N-2)(q-2))}`;
/// * upper regime, `N = 4`: `ℓ = (ε ln ε)^{-1/(q-2)}`, `λ = ℓ^{-1}`;
/// * upper regime, `N = 3`: `ℓ = ε^{-1/(q-4)}`, `λ = ℓ^{-1/2}`.
pub fn natural_frame(params: &ProblemParams) -> Frame {
    let n = params.dim_n as f64;
    let (a, q) = (params.alpha, params.q);
    let le = params.epsilon.ln();
    match params.regime {
        Regime::LowerCritical => match params.lower_subcase() {
            Some(LowerSubcase::Concentrating) => {
                let d = 4.0 - n * (q - 2.0);
                Frame { log_lambda: 2.0 * n / (a * d) * le, log_ell: -n * (q - 2.0) / (a * d) * le }
            }
            _ => Frame { log_lambda: le / (q - 2.0), log_ell: -0.5 * le },
        },
        Regime::UpperCritical => {
            if params.dim_n >= 5 {
                Frame { log_lambda: le / (q - 2.0), log_ell: -2.0 / ((n - 2.0) * (q - 2.0)) * le }
            } else {
                let log_ell = if params.dim_n == 4 {
                    -(le + le.max(1.0).ln()) / (q - 2.0)
                } else {
                    -le / (q - 4.0)
                };
                Frame { log_lambda: -0.5 * (n - 2.0) * log_ell, log_ell }
            }
        }
    }
}

/// Solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Target relative residual of the Euler–Lagrange equation.
    pub tol: f64,
    /// Budget of descent iterations.
    pub max_iter: usize,
    /// Relative residual at which the descent hands over to Newton.
    pub newton_switch: f64,
    pub newton_max_iter: usize,
    pub initial_step: f64,
    pub step_growth: f64,
    pub step_shrink: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 4000,
            newton_switch: 1e-3,
            newton_max_iter: 40,
            initial_step: 1.0,
            step_growth: 1.2,
            step_shrink: 0.5,
            gmres_restart: 80,
            gmres_max_iter: 400,
        }
    }
}

/// Converged ground state with its certificates.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub params: ProblemParams,
    pub frame: Frame,
    /// Frame field `w` on the kernel's grid.
    pub w: RadialField,
    /// Physical field `u = λ w(·/ℓ)` on the dilated grid.
    pub u: RadialField,
    /// Least energy `m_ε = I_ε(u)`.
    pub energy: f64,
    /// Frame functional value `J(w) = m_ε / K`.
    pub frame_energy: f64,
    pub nehari_residual: f64,
    pub pohozaev_residual: f64,
    /// `‖-Δu + εu − (I_α*|u|^p)|u|^{p-2}u − g(u)‖₂` in physical units.
    pub grad_residual: f64,
    /// Dual (`H⁻¹`-type) norm of the frame residual relative to the energy
    /// norm `(‖∇w‖² + b‖w‖²)^{1/2}` of the frame field.
    pub relative_residual: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub center_value: f64,
    /// Frame energies after each accepted descent step and each Newton step.
    pub energy_history: Vec<f64>,
    pub frame_norms: FieldTerms,
}

/// The four integrals entering the functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldTerms {
    pub grad_sq: f64,
    pub l2_sq: f64,
    /// `D_p(w) = ∫ (I_α*|w|^p)|w|^p`.
    pub d_term: f64,
    /// `‖w‖_q^q`.
    pub lq_q: f64,
}

impl GroundState {
    /// Physical `(‖∇u‖², ‖u‖², D_p(u), ‖u‖_q^q)` from the frame integrals.
    pub fn physical_terms(&self) -> FieldTerms {
        let n = self.params.dim_n as f64;
        let p = self.params.p();
        let q = self.params.q;
        let (ll, le) = (self.frame.log_lambda, self.frame.log_ell);
        let t = &self.frame_norms;
        FieldTerms {
            grad_sq: t.grad_sq * (2.0 * ll + (n - 2.0) * le).exp(),
            l2_sq: t.l2_sq * (2.0 * ll + n * le).exp(),
            d_term: t.d_term * (2.0 * p * ll + (n + self.params.alpha) * le).exp(),
            lq_q: t.lq_q * (q * ll + n * le).exp(),
        }
    }

    /// Frame field expressing this solution in the natural frame of `next`
    /// (warm start for a continuation step).
    pub fn warm_start_for(&self, next: &ProblemParams, grid: &Arc<RadialGrid>) -> RadialField {
        let f2 = natural_frame(next);
        let ell = (self.frame.log_ell - f2.log_ell).exp();
        let amp = (self.frame.log_lambda - f2.log_lambda).exp();
        resample_scaled(&self.w, grid, ell, amp).map(|v| v.max(0.0))
    }
}

/// Discrete functional in a frame.
struct Discrete<'a> {
    grid: &'a RadialGrid,
    kernel: &'a RieszKernel,
    cond: Vec<f64>,
    b: f64,
    c: f64,
    p: f64,
    log_lambda: f64,
    log_mu: f64,
    g: &'a dyn Nonlinearity,
    omega: f64,
    /// Sobolev operator `S + bW` and its Cholesky factor.
    pre: Tridiagonal,
    chol: Cholesky,
}

struct Eval {
    terms: FieldTerms,
    local_energy: f64,
    energy: f64,
    /// `K |w|^p`.
    potential: Vec<f64>,
    /// Euler–Lagrange residual at the nodes.
    residual: Vec<f64>,
}

/// Relative amplitude below which the `p < 2` Jacobian term is frozen: the
/// first Newton attempt is nearly exact, later ones are regularised further.
const JACOBIAN_FLOOR_START: f64 = 1e-12;
const JACOBIAN_FLOOR_MAX: f64 = 1e-3;

/// Update safeguard: a positive nodal value may shrink by at most this
/// factor per step, so that steps never punch zeros into the tail (where
/// `|w|^{p-2}` is singular for `p < 2`).
const MIN_SHRINK: f64 = 0.1;

fn keep_positive(old: f64, new: f64) -> f64 {
    if old > 0.0 {
        new.max(MIN_SHRINK * old)
    } else {
        new.max(0.0)
    }
}

fn phi(w: f64, p: f64) -> f64 {
    // |w|^{p-2} w, continuous at 0 for p > 1
    let a = w.abs();
    if a == 0.0 {
        0.0
    } else {
        a.powf(p - 1.0) * w.signum()
    }
}

impl<'a> Discrete<'a> {
    fn new(
        params: &ProblemParams,
        frame: &Frame,
        kernel: &'a RieszKernel,
        g: &'a dyn Nonlinearity,
    ) -> Result<Self> {
        let grid: &RadialGrid = &kernel.grid;
        if grid.dim_n != params.dim_n {
            return Err(Error::GridMismatch(format!(
                "kernel grid has N={} but parameters have N={}",
                grid.dim_n, params.dim_n
            )));
        }
        if (kernel.alpha - params.alpha).abs() > 1e-15 {
            return Err(Error::GridMismatch(format!(
                "kernel built for alpha={} but parameters have alpha={}",
                kernel.alpha, params.alpha
            )));
        }
        let co = frame.coefficients(params);
        let cond = grid.conductances();
        let pre = sobolev_operator(grid, &cond, co.b);
        let chol = pre
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("Sobolev operator is not positive definite".into()))?;
        Ok(Self {
            grid,
            kernel,
            pre,
            chol,
            cond,
            b: co.b,
            c: co.c,
            p: params.p(),
            log_lambda: frame.log_lambda,
            log_mu: co.log_mu,
            g,
            omega: grid.sphere_area,
        })
    }

    fn weighted_sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.omega * self.grid.weights.iter().enumerate().map(|(k, w)| w * f(k)).sum::<f64>()
    }

    fn stiffness(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        stiffness_apply(self.grid, &self.cond, w, &mut out, OuterBoundary::Dirichlet);
        out
    }

    fn eval(&self, w: &[f64]) -> Eval {
        let n = w.len();
        let wp: Vec<f64> = w.iter().map(|v| v.abs().powf(self.p)).collect();
        let potential = self.kernel.apply_values(&wp);
        let sw = self.stiffness(w);
        let grad_sq = self.omega * sw.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let l2_sq = self.weighted_sum(|k| w[k] * w[k]);
        let d_term = self.weighted_sum(|k| wp[k] * potential[k]);
        let q = self.g.exponent();
        let lq_q = self.weighted_sum(|k| w[k].abs().powf(q));
        let mut local_energy = 0.0;
        let mut residual = vec![0.0; n];
        for k in 0..n {
            let wk = self.grid.weights[k];
            let (big_g, small_g, _) = self.g.scaled(self.log_lambda, self.log_mu, w[k]);
            local_energy += wk * big_g;
            let lap = sw[k] / wk;
            let lin = self.b * w[k];
            let nonloc = self.c * potential[k] * phi(w[k], self.p);
            residual[k] = lap + lin - nonloc - small_g;
        }
        local_energy *= self.omega;
        let energy = 0.5 * grad_sq + 0.5 * self.b * l2_sq - self.c / (2.0 * self.p) * d_term - local_energy;
        Eval { terms: FieldTerms { grad_sq, l2_sq, d_term, lq_q }, local_energy, energy, potential, residual }
    }

    fn residual_norm(&self, r: &[f64]) -> f64 {
        self.weighted_sum(|k| r[k] * r[k]).sqrt()
    }

    /// `L⁻¹ W r`, whose Euclidean norm times `√ω` is the dual (H⁻¹) norm of `r`.
    fn dual_coordinates(&self, r: &[f64]) -> Vec<f64> {
        let wr: Vec<f64> = r.iter().zip(&self.grid.weights).map(|(a, b)| a * b).collect();
        self.chol.solve_lower(&wr)
    }

    fn dual_norm(&self, r: &[f64]) -> f64 {
        let c = self.dual_coordinates(r);
        (self.omega * dot(&c, &c)).sqrt()
    }

    /// Dual norm of the residual relative to the energy norm of the field.
    fn relative_residual(&self, e: &Eval) -> f64 {
        let scale = (e.terms.grad_sq + self.b * e.terms.l2_sq).sqrt();
        if scale == 0.0 {
            0.0
        } else {
            self.dual_norm(&e.residual) / scale
        }
    }

    /// Fiber derivative `φ(t) = t a − t^{2p−1} B − L(t)` and its derivative.
    fn fiber(&self, w: &[f64], a: f64, big_b: f64, t: f64) -> (f64, f64) {
        let mut l = 0.0;
        let mut dl = 0.0;
        for (k, &wk) in w.iter().enumerate() {
            let (_, g1, g2) = self.g.scaled(self.log_lambda, self.log_mu, t * wk);
            l += self.grid.weights[k] * g1 * wk;
            dl += self.grid.weights[k] * g2 * wk * wk;
        }
        l *= self.omega;
        dl *= self.omega;
        let p = self.p;
        (t * a - t.powf(2.0 * p - 1.0) * big_b - l, a - (2.0 * p - 1.0) * t.powf(2.0 * p - 2.0) * big_b - dl)
    }

    /// Root `t* > 0` of the fiber derivative, by safeguarded Newton iteration
    /// on a bracket `φ(lo) > 0 > φ(hi)`.
    fn nehari_factor(&self, w: &[f64], terms: &FieldTerms) -> Result<f64> {
        let a = terms.grad_sq + self.b * terms.l2_sq;
        let big_b = self.c * terms.d_term;
        let local_zero = w.iter().all(|&v| self.g.scaled(self.log_lambda, self.log_mu, v).1 == 0.0);
        if (big_b <= 0.0 && local_zero) || !(a > 0.0) {
            return Err(Error::CollapseToZero { norm: terms.l2_sq.sqrt() });
        }
        let h = |t: f64| self.fiber(w, a, big_b, t).0;
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        let mut guard = 0;
        while h(hi) > 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Bracket("Nehari fiber has no sign change above t = 1".into()));
            }
        }
        guard = 0;
        while h(lo) <= 0.0 {
            lo *= 0.5;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Bracket("Nehari fiber has no sign change below t = 1".into()));
            }
        }
        if lo == hi {
            lo = hi * 0.5;
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (f, df) = self.fiber(w, a, big_b, t);
            if f > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = if df < 0.0 { t - f / df } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() <= 1e-15 * t || hi - lo <= 4.0 * f64::EPSILON * hi;
            t = next;
            if done {
                break;
            }
        }
        Ok(t)
    }

    fn nehari_residual(&self, e: &Eval, w: &[f64]) -> f64 {
        let a = e.terms.grad_sq + self.b * e.terms.l2_sq;
        let big_b = self.c * e.terms.d_term;
        let l = a - big_b - self.fiber(w, a, big_b, 1.0).0;
        let terms = [a, big_b, l];
        (a - big_b - l).abs() / terms.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn pohozaev_residual(&self, e: &Eval, dim_n: usize, alpha: f64) -> f64 {
        let n = dim_n as f64;
        let t = [
            0.5 * (n - 2.0) * e.terms.grad_sq,
            0.5 * n * self.b * e.terms.l2_sq,
            -(n + alpha) / (2.0 * self.p) * self.c * e.terms.d_term,
            -n * e.local_energy,
        ];
        let scale = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            0.0
        } else {
            t.iter().sum::<f64>().abs() / scale
        }
    }

    /// Jacobian of the residual map applied to `v`.
    fn jacobian_apply(&self, w: &[f64], potential: &[f64], v: &[f64], floor_rel: f64) -> Vec<f64> {
        let n = w.len();
        let p = self.p;
        let dwp: Vec<f64> = (0..n).map(|k| p * phi(w[k], p) * v[k]).collect();
        let dpot = self.kernel.apply_values(&dwp);
        let sv = self.stiffness(v);
        // for p < 2 the derivative of |w|^{p-2}w is unbounded as w → 0; evaluating it
        // at a floor keeps the linearisation bounded in the negligible far tail
        let floor = if p < 2.0 { floor_rel * w.iter().fold(0.0f64, |m, x| m.max(x.abs())) } else { 0.0 };
        (0..n)
            .map(|k| {
                let wk = w[k];
                let aw = wk.abs().max(floor);
                let dphi = if aw == 0.0 { 0.0 } else { (p - 1.0) * aw.powf(p - 2.0) };
                let (_, _, g2) = self.g.scaled(self.log_lambda, self.log_mu, wk);
                sv[k] / self.grid.weights[k] + self.b * v[k]
                    - self.c * (dpot[k] * phi(wk, p) + potential[k] * dphi * v[k])
                    - g2 * v[k]
            })
            .collect()
    }

    fn project(&self, w: &[f64]) -> Result<(Vec<f64>, Eval)> {
        let e = self.eval(w);
        let t = self.nehari_factor(w, &e.terms)?;
        let projected: Vec<f64> = w.iter().map(|v| t * v).collect();
        let e = self.eval(&projected);
        if e.terms.l2_sq.sqrt() < 1e-12 {
            return Err(Error::CollapseToZero { norm: e.terms.l2_sq.sqrt() });
        }
        Ok((projected, e))
    }
}

/// Minimises the Nehari-projected energy over the dilation family
/// `r ↦ w(s r)`, the softest direction of the problem once ε is large.
/// Returns the improved state, or `None` if no dilation lowers the energy.
fn scale_search(disc: &Discrete, kernel: &RieszKernel, w: &[f64], energy: f64) -> Option<(Vec<f64>, Eval)> {
    let field = RadialField { grid: kernel.grid.clone(), values: w.to_vec() };
    let eval_at = |ls: f64| -> Option<(f64, Vec<f64>, Eval)> {
        let dilated = resample_scaled(&field, &kernel.grid, (-ls).exp(), 1.0);
        disc.project(&dilated.values).ok().map(|(pw, pe)| (pe.energy, pw, pe))
    };
    let f = |ls: f64| eval_at(ls).map_or(f64::INFINITY, |t| t.0);
    // bracket a minimum in ln s starting from the identity
    let f0 = f(0.0);
    let mut h = 0.02;
    let (f_plus, f_minus) = (f(h), f(-h));
    if f_plus >= f0 && f_minus >= f0 {
        // already bracketed around 0
    } else {
        if f_minus < f_plus {
            h = -h;
        }
        let (mut a, mut fa, mut b, mut fb) = (0.0, f0, h, f(h));
        let mut found = false;
        for _ in 0..60 {
            let c = b + 1.618 * (b - a);
            let fc = f(c);
            if fc >= fb {
                h = c;
                found = true;
                let _ = fa;
                break;
            }
            a = b;
            fa = fb;
            b = c;
            fb = fc;
        }
        if !found {
            return None;
        }
        return golden(a, h, &f).and_then(|x| eval_at(x)).filter(|t| t.0 < energy).map(|t| (t.1, t.2));
    }
    golden(-h, h, &f).and_then(|x| eval_at(x)).filter(|t| t.0 < energy).map(|t| (t.1, t.2))
}

/// Golden-section minimisation on `[a, b]` down to `1e-8` in the argument.
fn golden(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> Option<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-8 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    x.is_finite().then_some(x)
}

fn sobolev_operator(grid: &RadialGrid, cond: &[f64], b: f64) -> Tridiagonal {
    let n = grid.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for k in 0..n - 1 {
        diag[k] += cond[k];
        diag[k + 1] += cond[k];
        off[k] = -cond[k];
    }
    diag[n - 1] += cond[n - 1];
    for (d, w) in diag.iter_mut().zip(&grid.weights) {
        *d += b * w;
    }
    Tridiagonal { diag, off }
}

fn power_law(params: &ProblemParams) -> PowerLaw {
    PowerLaw { a_coef: params.a_coef, q: params.q }
}

fn check_field(kernel: &RieszKernel, u: &RadialField) -> Result<()> {
    if !(Arc::ptr_eq(&kernel.grid, &u.grid) || *kernel.grid == *u.grid) {
        return Err(Error::GridMismatch("field and kernel live on different grids".into()));
    }
    Ok(())
}

/// Individual terms of the action on a physical field (kernel on `u`'s grid).
pub fn action_terms(params: &ProblemParams, u: &RadialField, kernel: &RieszKernel) -> Result<FieldTerms> {
    check_field(kernel, u)?;
    let g = power_law(params);
    let d = Discrete::new(params, &Frame::IDENTITY, kernel, &g)?;
    Ok(d.eval(&u.values).terms)
}

/// `I_ε(u) = ½‖∇u‖² + (ε/2)‖u‖² − (1/2p) D_p(u) − (A/q)‖u‖_q^q`.
pub fn action(params: &ProblemParams, u: &RadialField, kernel: &RieszKernel) -> Result<f64> {
    check_field(kernel, u)?;
    let g = power_law(params);
    let d = Discrete::new(params, &Frame::IDENTITY, kernel, &g)?;
    Ok(d.eval(&u.values).energy)
}

/// Discrete `-Δu + εu − (I_α*|u|^p)|u|^{p-2}u − A|u|^{q-2}u` at the nodes.
pub fn euler_lagrange_residual(params: &ProblemParams, u: &RadialField, kernel: &RieszKernel) -> Result<RadialField> {
    check_field(kernel, u)?;
    let g = power_law(params);
    let d = Discrete::new(params, &Frame::IDENTITY, kernel, &g)?;
    RadialField::new(u.grid.clone(), d.eval(&u.values).residual)
}

/// Projects `u` onto the Nehari manifold along its fiber `t ↦ t u`.
pub fn nehari_project(params: &ProblemParams, u: &RadialField, kernel: &RieszKernel) -> Result<(f64, RadialField)> {
    check_field(kernel, u)?;
    let g = power_law(params);
    let d = Discrete::new(params, &Frame::IDENTITY, kernel, &g)?;
    let e = d.eval(&u.values);
    let t = d.nehari_factor(&u.values, &e.terms)?;
    Ok((t, u.scaled(t)))
}

/// Relative Nehari residual `|⟨I'(u), u⟩|` over its largest term.
pub fn nehari_residual(params: &ProblemParams, u: &RadialField, kernel: &RieszKernel) -> Result<f64> {
    check_field(kernel, u)?;
    let g = power_law(params);
    let d = Discrete::new(params, &Frame::IDENTITY, kernel, &g)?;
    let e = d.eval(&u.values);
    Ok(d.nehari_residual(&e, &u.values))
}

/// `P_ε(u) = (N−2)/2 ‖∇u‖² + Nε/2 ‖u‖² − (N+α)/(2p) D_p(u) − (NA/q)‖u‖_q^q`
/// divided by its largest term (0 for the zero field). Parameters are not
/// range-checked so that limit equations (`ε = 0`, `A = 0`) can be audited.
pub fn pohozaev_residual(params: &ProblemParams, u: &RadialField, kernel: &RieszKernel) -> Result<f64> {
    check_field(kernel, u)?;
    let g = power_law(params);
    let frame = Frame::IDENTITY;
    let co = frame.coefficients(params);
    let cond = kernel.grid.conductances();
    let pre = sobolev_operator(&kernel.grid, &cond, params.epsilon.max(0.0));
    let chol = pre
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("Sobolev operator is not positive definite".into()))?;
    let d = Discrete {
        grid: &kernel.grid,
        kernel,
        cond,
        pre,
        chol,
        b: params.epsilon,
        c: 1.0,
        p: params.p(),
        log_lambda: 0.0,
        log_mu: co.log_mu,
        g: &g,
        omega: kernel.grid.sphere_area,
    };
    let e = d.eval(&u.values);
    Ok(d.pohozaev_residual(&e, params.dim_n, params.alpha))
}

/// Default starting field in the natural frame: the regime's limit profile.
pub fn default_initial_guess(params: &ProblemParams, kernel: &RieszKernel) -> Result<RadialField> {
    let grid = &kernel.grid;
    let n = params.dim_n;
    match params.regime {
        Regime::LowerCritical => match params.lower_subcase() {
            Some(LowerSubcase::Concentrating) => {
                let cal = calibrate_a0(kernel)?;
                let u1 = lower_extremal(grid, 1.0, cal.a0)?;
                let norms = profile_norms(&u1, params.q);
                let r0 = rho0(Regime::LowerCritical, n, params.alpha, params.q, params.a_coef, &norms)?;
                Ok(lower_extremal(grid, r0.value, cal.a0)?.field)
            }
            _ => Ok(shoot_w(n, params.q, params.a_coef, grid)?.field),
        },
        Regime::UpperCritical => {
            if n >= 5 {
                let v1 = talenti(grid, 1.0)?;
                let norms = profile_norms(&v1, params.q);
                let r0 = rho0(Regime::UpperCritical, n, params.alpha, params.q, params.a_coef, &norms)?;
                Ok(talenti(grid, r0.value)?.field)
            } else {
                Ok(talenti(grid, 1.0)?.field)
            }
        }
    }
}

/// Random positive radially decreasing field: a sum of three Gaussians with
/// random amplitudes in `[0.5, 2]` and widths in `[0.3, 3]` (deterministic
/// for a given seed).
pub fn random_positive_field(grid: &Arc<RadialGrid>, seed: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.5..2.0), rng.gen_range(0.3..3.0))).collect();
    RadialField::from_fn(grid, |r| bumps.iter().map(|(a, s)| a * (-(r / s) * (r / s)).exp()).sum::<f64>() + 1e-300)
}

/// Computes the ground state in the natural frame on the kernel's grid.
/// `init` is a frame field on that grid (the regime's limit profile if
/// `None`).
pub fn solve_ground_state(
    params: &ProblemParams,
    kernel: &RieszKernel,
    init: Option<&RadialField>,
    opts: &SolverOptions,
) -> Result<GroundState> {
    solve_ground_state_with(params, &power_law(params), kernel, init, opts)
}

/// [`solve_ground_state`] for an arbitrary local nonlinearity.
pub fn solve_ground_state_with(
    params: &ProblemParams,
    g: &dyn Nonlinearity,
    kernel: &RieszKernel,
    init: Option<&RadialField>,
    opts: &SolverOptions,
) -> Result<GroundState> {
    params.validate()?;
    let frame = natural_frame(params);
    solve_in_frame(params, &frame, g, kernel, init, opts)
}

/// Solves in an explicitly given frame.
pub fn solve_in_frame(
    params: &ProblemParams,
    frame: &Frame,
    g: &dyn Nonlinearity,
    kernel: &RieszKernel,
    init: Option<&RadialField>,
    opts: &SolverOptions,
) -> Result<GroundState> {
    let disc = Discrete::new(params, frame, kernel, g)?;
    let start = match init {
        Some(f) => {
            check_field(kernel, f)?;
            f.values.clone()
        }
        None => default_initial_guess(params, kernel)?.values,
    };
    if start.iter().any(|v| !v.is_finite() || *v < 0.0) || start.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidArgument("initial field must be nonnegative, finite and nonzero".into()));
    }
    let (mut w, mut e) = disc.project(&start)?;
    let mut history = vec![e.energy];
    let pre = &disc.pre;
    let mut rel = disc.relative_residual(&e);
    let mut iterations = 0usize;
    let mut newton_iterations = 0usize;
    let mut step = opts.initial_step;
    let mut cycles = 0;

    while rel > opts.tol && cycles < 4 {
        cycles += 1;
        // descent on the Nehari manifold with the Sobolev-preconditioned gradient
        // later cycles descend further: Newton stalls where the p < 2 term makes
        // the nodal equations non-monotone, the energy descent does not
        let target = opts.tol.max(opts.newton_switch * 1e-2f64.powi(cycles as i32 - 1));
        let mut stalled = 0;
        while rel > target && iterations < opts.max_iter {
            iterations += 1;
            let rhs: Vec<f64> = e.residual.iter().zip(&disc.grid.weights).map(|(r, wt)| r * wt).collect();
            let dir = pre.solve(&rhs);
            let mut accepted = false;
            while step > 1e-14 {
                let trial: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| keep_positive(*a, a - step * d)).collect();
                match disc.project(&trial) {
                    Ok((tw, te)) if te.energy <= e.energy + 1e-12 * e.energy.abs() => {
                        w = tw;
                        e = te;
                        accepted = true;
                        step *= opts.step_growth;
                        break;
                    }
                    _ => step *= opts.step_shrink,
                }
            }
            if !accepted {
                stalled += 1;
                step = opts.initial_step;
                if stalled > 2 {
                    break;
                }
                continue;
            }
            history.push(e.energy);
            rel = disc.relative_residual(&e);
        }
        if rel <= opts.tol {
            break;
        }

        if let Some((sw, se)) = scale_search(&disc, kernel, &w, e.energy) {
            w = sw;
            e = se;
            history.push(e.energy);
            rel = disc.relative_residual(&e);
        }

        // Newton–GMRES polish with symmetric Sobolev preconditioning
        let mut newton_ok = true;
        let mut count = 0;
        let mut jac_floor = JACOBIAN_FLOOR_START;
        while rel > opts.tol && count < opts.newton_max_iter {
            count += 1;
            newton_iterations += 1;
            let pot = e.potential.clone();
            let wcur = w.clone();
            // symmetric Sobolev preconditioning L⁻¹ W J L⁻ᵀ: GMRES then minimises
            // the dual norm of the linearised residual
            let apply = |y: &[f64]| disc.dual_coordinates(&disc.jacobian_apply(&wcur, &pot, &disc.chol.solve_upper(y), jac_floor));
            let rhs: Vec<f64> = disc.dual_coordinates(&e.residual).iter().map(|r| -r).collect();
            let forcing = (0.1 * rel).clamp(1e-10, 1e-3);
            let sol = gmres(&apply, |z: &[f64]| z.to_vec(), &rhs, forcing, opts.gmres_restart, opts.gmres_max_iter);
            let delta = disc.chol.solve_upper(&sol.x);
            let r0 = disc.dual_norm(&e.residual);
            let mut lam = 1.0;
            let mut improved = false;
            let mut damped = false;
            let mut slow = false;
            while lam > 1e-4 {
                let trial: Vec<f64> = w.iter().zip(&delta).map(|(a, d)| keep_positive(*a, a + lam * d)).collect();
                if trial.iter().all(|v| v.is_finite()) {
                    let te = disc.eval(&trial);
                    let r1 = disc.dual_norm(&te.residual);
                    if r1 < (1.0 - 1e-4 * lam) * r0 {
                        w = trial;
                        e = te;
                        improved = true;
                        damped = lam < 0.25;
                        slow = r1 > 0.5 * r0;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if (!improved || slow || sol.relative_residual > 0.5) && jac_floor < JACOBIAN_FLOOR_MAX {
                jac_floor = (jac_floor * 1e3).min(JACOBIAN_FLOOR_MAX);
                if !improved {
                    continue;
                }
            }
            if !improved || damped {
                // a heavily damped step signals the soft dilation direction
                let (pw, pe) = disc.project(&w)?;
                match scale_search(&disc, kernel, &pw, pe.energy) {
                    Some((sw, se)) => {
                        w = sw;
                        e = se;
                    }
                    None if !improved => {
                        newton_ok = false;
                        break;
                    }
                    None => {}
                }
            }
            history.push(e.energy);
            rel = disc.relative_residual(&e);
        }
        // land exactly on the Nehari manifold
        let (pw, pe) = disc.project(&w)?;
        w = pw;
        e = pe;
        rel = disc.relative_residual(&e);
        if rel <= opts.tol || (!newton_ok && iterations >= opts.max_iter) {
            break;
        }
        if iterations >= opts.max_iter && newton_iterations >= opts.newton_max_iter * cycles {
            break;
        }
    }
    if rel > opts.tol {
        return Err(Error::NonConvergence { iterations: iterations + newton_iterations, residual: rel });
    }

    let co = frame.coefficients(params);
    let k_scale = co.log_energy_scale.exp();
    let lam = frame.lambda();
    let ell = frame.ell();
    let grid = kernel.grid.clone();
    let wf = RadialField::new(grid.clone(), w.clone())?;
    let ugrid = Arc::new(grid.dilated(ell));
    let u = RadialField::new(ugrid, w.iter().map(|v| lam * v).collect())?;
    let n = params.dim_n as f64;
    // physical residual: (λ/ℓ²) times the frame residual, measured with the dilated weights
    let grad_residual = lam / (ell * ell) * ell.powf(0.5 * n) * disc.residual_norm(&e.residual);
    let center_value = lam * w[0];
    Ok(GroundState {
        params: *params,
        frame: *frame,
        energy: k_scale * e.energy,
        frame_energy: e.energy,
        nehari_residual: disc.nehari_residual(&e, &w),
        pohozaev_residual: disc.pohozaev_residual(&e, params.dim_n, params.alpha),
        grad_residual,
        relative_residual: rel,
        iterations,
        newton_iterations,
        center_value,
        energy_history: history,
        frame_norms: e.terms,
        w: wf,
        u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_grid::make_grid;
    use crate::riesz::build_kernel;

    #[test]
    fn parameter_validation_names_the_bound() {
        let err = ProblemParams::new(3, 2.0, Regime::LowerCritical, 1.5, 1.0, 10.0).unwrap_err();
        assert!(err.to_string().contains("2 + 4/N"), "{err}");
        assert!(ProblemParams::new(3, 2.0, Regime::UpperCritical, 3.5, 1.0, 10.0).is_err());
        assert!(ProblemParams::new(4, 2.0, Regime::UpperCritical, 3.5, 1.0, 10.0).is_ok());
        assert!(ProblemParams::new(3, 3.0, Regime::LowerCritical, 2.2, 1.0, 10.0).is_err());
    }

    #[test]
    fn derived_exponents() {
        let p = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 10.0).unwrap();
        assert!((p.sigma() - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.tau() - 1.0).abs() < 1e-15);
        assert!((p.p() - 7.0 / 3.0).abs() < 1e-15);
        let l = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 10.0).unwrap();
        assert_eq!(l.lower_subcase(), Some(LowerSubcase::Concentrating));
        assert!((l.sigma() - 5.6 / 6.8).abs() < 1e-14);
        let b = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.0 + 2.0 / 3.0, 1.0, 10.0).unwrap();
        assert_eq!(b.lower_subcase(), Some(LowerSubcase::Borderline));
    }

    #[test]
    fn frame_coefficients_match_scaled_problem() {
        let p = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 1e6).unwrap();
        let f = natural_frame(&p);
        let co = f.coefficients(&p);
        assert!((co.b - 1e-2).abs() < 1e-14);
        assert!((co.c - 1.0).abs() < 1e-12);
        assert!(co.log_energy_scale.abs() < 1e-12);
        let (_, g1, _) = power_law(&p).scaled(f.log_lambda, co.log_mu, 1.0);
        assert!((g1 - 1e-2).abs() < 1e-14);
    }

    #[test]
    fn power_law_scaling_is_exact_for_huge_amplitudes() {
        let g = PowerLaw { a_coef: 2.0, q: 3.0 };
        let (e, d, dd) = g.scaled(200.0, -390.0, 1.5);
        let coef = (2f64.ln() - 390.0 + 600.0).exp();
        assert!((d - coef * 2.25).abs() < 1e-12 * d);
        assert!((e - coef / 3.0 * 3.375).abs() < 1e-12 * e);
        assert!((dd - coef * 2.0 * 1.5).abs() < 1e-12 * dd);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = make_grid(5, 50.0, 200, 20.0).unwrap();
        let k = build_kernel(&g, 2.0).unwrap();
        for (regime, q) in [(Regime::UpperCritical, 3.0), (Regime::LowerCritical, 2.3)] {
            let p = ProblemParams::new(5, 2.0, regime, q, 1.0, 7.0).unwrap();
            let nl = power_law(&p);
            let frame = natural_frame(&p);
            let d = Discrete::new(&p, &frame, &k, &nl).unwrap();
            let w = random_positive_field(&g, 3).values;
            let v = random_positive_field(&g, 4).values;
            let e = d.eval(&w);
            let jv = d.jacobian_apply(&w, &e.potential, &v, 0.0);
            let h = 1e-6;
            let wp: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let wm: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let (rp, rm) = (d.eval(&wp).residual, d.eval(&wm).residual);
            let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let err = d.residual_norm(&jv.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err < 1e-6 * d.residual_norm(&fd), "{regime:?}: {err:e} vs {:e}", d.residual_norm(&fd));
        }
    }

    #[test]
    fn zero_field_has_zero_action_and_residual() {
        let g = make_grid(3, 20.0, 64, 4.0).unwrap();
        let k = build_kernel(&g, 2.0).unwrap();
        let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 5.0).unwrap();
        let z = RadialField::zeros(&g);
        assert_eq!(action(&p, &z, &k).unwrap(), 0.0);
        assert!(euler_lagrange_residual(&p, &z, &k).unwrap().values.iter().all(|v| *v == 0.0));
        assert_eq!(pohozaev_residual(&p, &z, &k).unwrap(), 0.0);
        assert!(nehari_project(&p, &z, &k).is_err());
    }
}
