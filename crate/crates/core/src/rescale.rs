//! Rescaling maps between the original problem and its normalised forms,
//! center-matched profile scales, the diagnostic ratios `τ₁`, `τ₂`, and
//! distances between profiles.
//!
//! Every map has the form `w(x) = a · u(b x)`. A field on nodes `r_k` is
//! mapped *exactly* onto the dilated grid with nodes `r_k / b`, so all norm
//! transfer identities hold to rounding; interpolation only enters when a
//! field is moved to a different grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closed_forms::{LimitKind, LimitProfile};
use crate::error::{Error, Result};
use crate::radial_grid::{grad_norm_sq_with, lp_norm, Interpolant, OuterBoundary, RadialField, RadialGrid};
use crate::riesz::{d_term, RieszKernel};
use crate::solver::{FieldTerms, LowerSubcase, ProblemParams, Regime};

/// The map `u ↦ a · u(b ·)`, stored in logarithms so that extreme ε do not
/// overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleMap {
    pub log_amplitude: f64,
    pub log_length: f64,
}

impl ScaleMap {
    pub const IDENTITY: ScaleMap = ScaleMap { log_amplitude: 0.0, log_length: 0.0 };

    pub fn new(amplitude: f64, length: f64) -> Self {
        Self { log_amplitude: amplitude.ln(), log_length: length.ln() }
    }

    pub fn amplitude(&self) -> f64 {
        self.log_amplitude.exp()
    }

    pub fn length(&self) -> f64 {
        self.log_length.exp()
    }

    /// The map undoing this one: `u(y) = a⁻¹ w(y / b)`.
    pub fn inverse(&self) -> Self {
        Self { log_amplitude: -self.log_amplitude, log_length: -self.log_length }
    }

    /// First `self`, then `next`.
    pub fn then(&self, next: &ScaleMap) -> Self {
        // next(self(u))(x) = a₂ a₁ u(b₁ b₂ x)
        Self {
            log_amplitude: self.log_amplitude + next.log_amplitude,
            log_length: self.log_length + next.log_length,
        }
    }

    /// Exact image on the grid dilated by `1/b`.
    pub fn apply(&self, u: &RadialField) -> RadialField {
        let grid = Arc::new(u.grid.dilated((-self.log_length).exp()));
        let a = self.amplitude();
        RadialField { grid, values: u.values.iter().map(|v| a * v).collect() }
    }

    /// Image resampled onto `target` through the monotone interpolant.
    pub fn apply_onto(&self, u: &RadialField, target: &Arc<RadialGrid>) -> RadialField {
        let it = Interpolant::new(u);
        let (a, b) = (self.amplitude(), self.length());
        RadialField::from_fn(target, |r| a * it.eval(b * r))
    }

    /// Riesz kernel living on the grid produced by [`ScaleMap::apply`].
    pub fn kernel_for(&self, kernel: &RieszKernel) -> RieszKernel {
        kernel.dilated((-self.log_length).exp())
    }

    /// Integrals of the image from those of `u`:
    /// `‖∇w‖² = a² b^{2−N} ‖∇u‖²`, `‖w‖² = a² b^{−N} ‖u‖²`,
    /// `D_p(w) = a^{2p} b^{−N−α} D_p(u)`, `‖w‖_q^q = a^q b^{−N} ‖u‖_q^q`.
    pub fn transfer(&self, terms: &FieldTerms, dim_n: usize, alpha: f64, p: f64, q: f64) -> FieldTerms {
        let n = dim_n as f64;
        let (la, lb) = (self.log_amplitude, self.log_length);
        FieldTerms {
            grad_sq: terms.grad_sq * (2.0 * la + (2.0 - n) * lb).exp(),
            l2_sq: terms.l2_sq * (2.0 * la - n * lb).exp(),
            d_term: terms.d_term * (2.0 * p * la - (n + alpha) * lb).exp(),
            lq_q: terms.lq_q * (q * la - n * lb).exp(),
        }
    }
}

fn require_regime(params: &ProblemParams, regime: Regime, what: &str) -> Result<()> {
    if params.regime != regime {
        return Err(Error::Regime(format!("{what} requires the {regime:?} regime, got {:?}", params.regime)));
    }
    Ok(())
}

fn lower_denominator(params: &ProblemParams) -> f64 {
    let n = params.dim_n as f64;
    params.alpha * (4.0 - n * (params.q - 2.0))
}

/// Map of the concentrating lower sub-regime:
/// `w(x) = ε^{−2N/(α[4−N(q−2)])} u(ε^{−N(q−2)/(α[4−N(q−2)])} x)`.
pub fn lower_w_map(params: &ProblemParams) -> Result<ScaleMap> {
    require_regime(params, Regime::LowerCritical, "the w-map")?;
    if params.lower_subcase() != Some(LowerSubcase::Concentrating) {
        return Err(Error::Regime(format!(
            "the w-map requires q < 2 + 4α/(N(2+α)) = {}; got q = {}",
            params.q_borderline(),
            params.q
        )));
    }
    let n = params.dim_n as f64;
    let d = lower_denominator(params);
    let le = params.epsilon.ln();
    Ok(ScaleMap { log_amplitude: -2.0 * n / d * le, log_length: -n * (params.q - 2.0) / d * le })
}

/// Map to the `v`-form.
///
/// * lower regime, `q ≥ 2 + 4α/(N(2+α))`: `v(x) = ε^{−1/(q−2)} u(ε^{−1/2} x)`;
/// * lower regime, concentrating: the composition of the w-map with
///   `v(x) = ε^{−Nσ/4} w(ε^{−σ/2} x)`, which turns the w-equation into one
///   with unit gradient and mass coefficients;
/// * upper regime: `w(x) = ε^{−1/(q−2)} u(ε^{−2/((N−2)(q−2))} x)`.
pub fn v_map(params: &ProblemParams) -> Result<ScaleMap> {
    let n = params.dim_n as f64;
    let q = params.q;
    let le = params.epsilon.ln();
    match params.regime {
        Regime::LowerCritical => match params.lower_subcase() {
            Some(LowerSubcase::Concentrating) => {
                let s = params.sigma();
                let second = ScaleMap { log_amplitude: -n * s / 4.0 * le, log_length: -s / 2.0 * le };
                Ok(lower_w_map(params)?.then(&second))
            }
            _ => Ok(ScaleMap { log_amplitude: -le / (q - 2.0), log_length: -0.5 * le }),
        },
        Regime::UpperCritical => {
            Ok(ScaleMap { log_amplitude: -le / (q - 2.0), log_length: -2.0 / ((n - 2.0) * (q - 2.0)) * le })
        }
    }
}

/// `w_ε` of the concentrating lower sub-regime (exact, on the dilated grid).
pub fn map_w_lower(u: &RadialField, params: &ProblemParams) -> Result<RadialField> {
    Ok(lower_w_map(params)?.apply(u))
}

/// `v`-form of `u` (exact, on the dilated grid); see [`v_map`].
pub fn map_v(u: &RadialField, params: &ProblemParams) -> Result<RadialField> {
    Ok(v_map(params)?.apply(u))
}

/// Center-matched rescaling plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescalePlan {
    pub regime: Regime,
    pub sigma: f64,
    pub tau: f64,
    /// Profile scale `ζ_ε` (the argument scaling `u(ζ x)`).
    pub zeta: f64,
    /// Second scale `ξ_ε` of the upper regime for N ∈ {3, 4} (1 otherwise).
    pub xi: f64,
    /// Prefactor of the full map `u ↦ amplitude · u(ζ ·)`.
    pub amplitude: f64,
    /// Scale law predicted for `ζ_ε` (without its unknown constant).
    pub predicted_zeta: f64,
    /// Value at the origin the rescaled profile is matched to.
    pub center_target: f64,
    /// Whether the scale was fixed by center matching (false for the
    /// parameter-free v-form maps).
    pub center_matched: bool,
}

impl RescalePlan {
    pub fn map(&self) -> ScaleMap {
        ScaleMap::new(self.amplitude, self.zeta)
    }

    /// The rescaled profile (exact, on the dilated grid). For center-matched
    /// plans the value at the innermost node is the target itself, so the
    /// match holds bit for bit rather than up to the rounding of `a · u(0)`.
    pub fn apply(&self, u: &RadialField) -> RadialField {
        let mut w = self.map().apply(u);
        if self.center_matched {
            w.values[0] = self.center_target;
        }
        w
    }

    /// Recovers `u` from a rescaled profile.
    pub fn invert(&self, w: &RadialField) -> RadialField {
        self.map().inverse().apply(w)
    }
}

/// Scale law of `ζ_ε` for the regime: `ε^{−N(q−2)/(α[4−N(q−2)])}` (lower,
/// concentrating), `ε^{−1/2}` (lower, v-form), `ε^{−2/((N−2)(q−2))}`
/// (upper, N ≥ 5), `(ε ln ε)^{−1/(q−2)}` (N = 4), `ε^{−1/(q−4)}` (N = 3).
pub fn predicted_zeta(params: &ProblemParams) -> f64 {
    let n = params.dim_n as f64;
    let q = params.q;
    let e = params.epsilon;
    match params.regime {
        Regime::LowerCritical => match params.lower_subcase() {
            Some(LowerSubcase::Concentrating) => e.powf(-n * (q - 2.0) / lower_denominator(params)),
            _ => e.powf(-0.5),
        },
        Regime::UpperCritical => match params.dim_n {
            3 => e.powf(-1.0 / (q - 4.0)),
            4 => (e * e.ln()).powf(-1.0 / (q - 2.0)),
            _ => e.powf(-2.0 / ((n - 2.0) * (q - 2.0))),
        },
    }
}

/// Fixes the free scale of the regime by matching the rescaled profile's
/// value at the origin to the limit profile's value there.
///
/// * lower, concentrating: `ζ = (U_{ρ₀}(0)/u(0))^{2/N} ε^{1/α}` and
///   `w̃(x) = ε^{−N/(2α)} ζ^{N/2} u(ζ x)`;
/// * upper: `ζ = (V(0)/u(0))^{2/(N−2)}` and `w̃(x) = ζ^{(N−2)/2} u(ζ x)`;
///   for N ∈ {3, 4} the limit is `V₁` and `ξ = ζ / ε^{−2/((N−2)(q−2))}`;
/// * lower, v-form sub-cases: no free scale; the fixed v-map is returned.
pub fn zeta_from_center(u: &RadialField, params: &ProblemParams, limit: &LimitProfile) -> Result<RescalePlan> {
    let u0 = u.values[0];
    if !(u0 > 0.0) {
        return Err(Error::InvalidArgument(format!("center value must be positive, got {u0}")));
    }
    let target = limit.field.values[0];
    let n = params.dim_n as f64;
    let q = params.q;
    let e = params.epsilon;
    let mut center_matched = true;
    let (zeta, xi, amplitude) = match params.regime {
        Regime::LowerCritical => match params.lower_subcase() {
            Some(LowerSubcase::Concentrating) => {
                if limit.kind != LimitKind::LowerExtremal {
                    return Err(Error::InvalidArgument("concentrating lower regime needs the U-profile as limit".into()));
                }
                let zeta = (target / u0).powf(2.0 / n) * e.powf(1.0 / params.alpha);
                // amplitude chosen so that amplitude · u0 == target exactly
                (zeta, 1.0, target / u0)
            }
            _ => {
                let m = v_map(params)?;
                center_matched = false;
                (m.length(), 1.0, m.amplitude())
            }
        },
        Regime::UpperCritical => {
            if limit.kind != LimitKind::Talenti {
                return Err(Error::InvalidArgument("upper regime needs a Talenti profile as limit".into()));
            }
            let zeta = (target / u0).powf(2.0 / (n - 2.0));
            let xi = if params.dim_n <= 4 { zeta / e.powf(-2.0 / ((n - 2.0) * (q - 2.0))) } else { 1.0 };
            (zeta, xi, target / u0)
        }
    };
    Ok(RescalePlan {
        regime: params.regime,
        sigma: params.sigma(),
        tau: params.tau(),
        zeta,
        xi,
        amplitude,
        predicted_zeta: predicted_zeta(params),
        center_target: if center_matched { target } else { amplitude * u0 },
        center_matched,
    })
}

/// `w̃(x) = ξ^{(N−2)/2} w(ξ x)` for the upper regime in dimensions 3 and 4,
/// where `w` is the first-scaling image of `u`.
pub fn second_scaling(w: &RadialField, plan: &RescalePlan) -> Result<RadialField> {
    if plan.regime != Regime::UpperCritical || !(3..=4).contains(&w.grid.dim_n) {
        return Err(Error::Regime("the second scaling applies to the upper regime with N = 3 or 4".into()));
    }
    Ok(second_scaling_map(w.grid.dim_n, plan.xi).apply(w))
}

/// `w ↦ ξ^{(N−2)/2} w(ξ ·)`.
pub fn second_scaling_map(dim_n: usize, xi: f64) -> ScaleMap {
    let l = xi.ln();
    ScaleMap { log_amplitude: 0.5 * (dim_n as f64 - 2.0) * l, log_length: l }
}

fn check_kernel(kernel: &RieszKernel, w: &RadialField) -> Result<()> {
    if !(Arc::ptr_eq(&kernel.grid, &w.grid) || *kernel.grid == *w.grid) {
        return Err(Error::GridMismatch("field and kernel live on different grids".into()));
    }
    Ok(())
}

/// `τ₁(w) = ‖w‖₂² / D_{(N+α)/N}(w)`.
pub fn tau1(w: &RadialField, kernel: &RieszKernel) -> Result<f64> {
    check_kernel(kernel, w)?;
    let n = w.grid.dim_n as f64;
    let d = d_term(kernel, w, (n + kernel.alpha) / n);
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("τ₁ of the zero field is undefined".into()));
    }
    Ok(w.inner(w) / d)
}

/// `τ₂(w) = ‖∇w‖₂² / D_{(N+α)/(N−2)}(w)`, the gradient including the
/// harmonic exterior extension.
pub fn tau2(w: &RadialField, kernel: &RieszKernel) -> Result<f64> {
    check_kernel(kernel, w)?;
    let n = w.grid.dim_n as f64;
    let d = d_term(kernel, w, (n + kernel.alpha) / (n - 2.0));
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("τ₂ of the zero field is undefined".into()));
    }
    Ok(grad_norm_sq_with(w, OuterBoundary::HarmonicTail) / d)
}

/// Norm in which two profiles are compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "norm", content = "exponent")]
pub enum DistanceNorm {
    L2,
    Lq(f64),
    /// `‖∇·‖₂`, the homogeneous Sobolev norm.
    D12,
    H1,
}

/// `‖f − g‖` in the chosen norm. If the grids differ, the field on the
/// coarser grid is interpolated onto the finer one (more nodes; ties go to `f`).
pub fn profile_distance(f: &RadialField, g: &RadialField, norm: DistanceNorm) -> Result<f64> {
    if f.grid.dim_n != g.grid.dim_n {
        return Err(Error::GridMismatch("profiles live in different dimensions".into()));
    }
    let diff = if f.same_grid(g) {
        RadialField { grid: f.grid.clone(), values: f.values.iter().zip(&g.values).map(|(a, b)| a - b).collect() }
    } else if f.grid.len() >= g.grid.len() {
        let it = Interpolant::new(g);
        let values = f.grid.nodes.iter().zip(&f.values).map(|(r, a)| a - it.eval(*r)).collect();
        RadialField { grid: f.grid.clone(), values }
    } else {
        let it = Interpolant::new(f);
        let values = g.grid.nodes.iter().zip(&g.values).map(|(r, b)| it.eval(*r) - b).collect();
        RadialField { grid: g.grid.clone(), values }
    };
    let grad = || grad_norm_sq_with(&diff, OuterBoundary::Dirichlet);
    Ok(match norm {
        DistanceNorm::L2 => lp_norm(&diff, 2.0),
        DistanceNorm::Lq(q) => {
            if !(q >= 1.0) {
                return Err(Error::InvalidArgument(format!("Lq distance needs q ≥ 1, got {q}")));
            }
            lp_norm(&diff, q)
        }
        DistanceNorm::D12 => grad().sqrt(),
        DistanceNorm::H1 => (grad() + diff.inner(&diff)).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{calibrate_a0, lower_extremal, talenti};
    use crate::radial_grid::make_grid;
    use crate::riesz::build_kernel;
    use crate::solver::random_positive_field;

    fn terms_of(u: &RadialField, kernel: &RieszKernel, p: f64, q: f64) -> FieldTerms {
        FieldTerms {
            grad_sq: grad_norm_sq_with(u, OuterBoundary::Dirichlet),
            l2_sq: u.inner(u),
            d_term: d_term(kernel, u, p),
            lq_q: u.integral_abs_pow(q),
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn maps_are_identity_at_unit_epsilon() {
        for (regime, q) in [(Regime::LowerCritical, 2.2), (Regime::LowerCritical, 2.6), (Regime::UpperCritical, 3.0)] {
            let p = ProblemParams::new(5, 2.0, regime, q, 1.0, 1.0).unwrap();
            assert_eq!(v_map(&p).unwrap(), ScaleMap::IDENTITY);
        }
        let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 1.0).unwrap();
        assert_eq!(lower_w_map(&p).unwrap(), ScaleMap::IDENTITY);
        let g = make_grid(3, 20.0, 64, 4.0).unwrap();
        let u = random_positive_field(&g, 1);
        let w = map_w_lower(&u, &p).unwrap();
        assert_eq!(w.values, u.values);
        assert_eq!(w.grid.nodes, u.grid.nodes);
    }

    #[test]
    fn regime_mismatch_is_rejected() {
        let up = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 10.0).unwrap();
        assert!(lower_w_map(&up).is_err());
        let lo = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.8, 1.0, 10.0).unwrap();
        assert!(lower_w_map(&lo).is_err());
        let g = make_grid(3, 20.0, 64, 4.0).unwrap();
        let plan = zeta_from_center(&random_positive_field(&g, 2), &lo, &talenti(&g, 1.0).unwrap());
        assert!(plan.is_ok());
        let w = random_positive_field(&g, 3);
        assert!(second_scaling(&w, &plan.unwrap()).is_err());
    }

    #[test]
    fn lower_w_map_norm_transfer_two_routes() {
        let g = make_grid(3, 40.0, 300, 8.0).unwrap();
        let k = build_kernel(&g, 2.0).unwrap();
        let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 37.0).unwrap();
        let (pl, q) = (p.p(), p.q);
        let u = random_positive_field(&g, 5);
        let map = lower_w_map(&p).unwrap();
        let w = map.apply(&u);
        let kw = map.kernel_for(&k);
        let direct = terms_of(&w, &kw, pl, q);
        let tu = terms_of(&u, &k, pl, q);
        let via = map.transfer(&tu, 3, 2.0, pl, q);
        for (a, b) in [(direct.l2_sq, via.l2_sq), (direct.grad_sq, via.grad_sq), (direct.d_term, via.d_term), (direct.lq_q, via.lq_q)] {
            assert!(rel(a, b) < 1e-12, "{a} vs {b}");
        }
        // the w ↔ v bookkeeping: ‖w‖² = ‖v‖², D(w) = D(v), ε^{−σ}‖∇w‖² = ‖∇v‖²,
        // ε^{−Nσ(q−2)/4}‖w‖_q^q = ‖v‖_q^q
        let vm = v_map(&p).unwrap();
        let v = vm.apply(&u);
        let tv = terms_of(&v, &vm.kernel_for(&k), pl, q);
        let (e, s) = (p.epsilon, p.sigma());
        assert!(rel(tv.l2_sq, direct.l2_sq) < 1e-10);
        assert!(rel(tv.d_term, direct.d_term) < 1e-10);
        assert!(rel(tv.grad_sq, e.powf(-s) * direct.grad_sq) < 1e-10);
        assert!(rel(tv.lq_q, e.powf(-3.0 * s * (q - 2.0) / 4.0) * direct.lq_q) < 1e-10);
    }

    #[test]
    fn v_form_and_upper_norm_transfers() {
        let g = make_grid(3, 40.0, 200, 8.0).unwrap();
        let u = random_positive_field(&g, 8);
        let lo = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.8, 1.0, 55.0).unwrap();
        let v = map_v(&u, &lo).unwrap();
        let (e, q) = (lo.epsilon, lo.q);
        let expo = (4.0 - 3.0 * (q - 2.0)) / (2.0 * (q - 2.0));
        assert!(rel(u.inner(&u), e.powf(expo) * v.inner(&v)) < 1e-10);
        let expo_g = (6.0 - q) / (2.0 * (q - 2.0));
        let gu = grad_norm_sq_with(&u, OuterBoundary::Dirichlet);
        assert!(rel(gu, e.powf(expo_g) * grad_norm_sq_with(&v, OuterBoundary::Dirichlet)) < 1e-10);
        assert!(rel(u.integral_abs_pow(q), e.powf(expo_g) * v.integral_abs_pow(q)) < 1e-10);

        let g5 = make_grid(5, 40.0, 200, 8.0).unwrap();
        let u5 = random_positive_field(&g5, 9);
        let up = ProblemParams::new(5, 2.0, Regime::UpperCritical, 3.0, 1.0, 55.0).unwrap();
        let w = map_v(&u5, &up).unwrap();
        let s = up.sigma();
        let gw = grad_norm_sq_with(&w, OuterBoundary::Dirichlet);
        assert!(rel(gw, grad_norm_sq_with(&u5, OuterBoundary::Dirichlet)) < 1e-10);
        assert!(rel(up.epsilon.powf(-s) * w.inner(&w), up.epsilon * u5.inner(&u5)) < 1e-10);
        assert!(rel(up.epsilon.powf(-s) * w.integral_abs_pow(3.0), u5.integral_abs_pow(3.0)) < 1e-10);
    }

    #[test]
    fn inverse_map_returns_the_field() {
        let g = make_grid(3, 30.0, 400, 8.0).unwrap();
        let u = lower_extremal(&g, 1.3, 1.7).unwrap().field;
        let p = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 300.0).unwrap();
        let map = lower_w_map(&p).unwrap();
        let w = map.apply(&u);
        let back = map.inverse().apply_onto(&w, &g);
        let scale = u.values[0];
        for (a, b) in back.values.iter().zip(&u.values) {
            assert!((a - b).abs() < 1e-6 * scale);
        }
        // exact representation: composing on dilated grids is lossless
        let exact = map.inverse().apply(&w);
        for (a, b) in exact.values.iter().zip(&u.values) {
            assert!((a - b).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn center_matching_is_exact_and_monotone() {
        let g = make_grid(3, 30.0, 200, 8.0).unwrap();
        let limit = lower_extremal(&g, 1.0, 1.7).unwrap();
        let p1 = ProblemParams::new(3, 2.0, Regime::LowerCritical, 2.2, 1.0, 1.0).unwrap();
        let plan = zeta_from_center(&limit.field, &p1, &limit).unwrap();
        assert!(rel(plan.zeta, plan.predicted_zeta) < 1e-14);
        let p = p1.with_epsilon(250.0);
        let u = random_positive_field(&g, 4);
        let plan = zeta_from_center(&u, &p, &limit).unwrap();
        assert_eq!(plan.apply(&u).values[0], limit.field.values[0]);
        let bigger = u.scaled(2.0);
        let plan2 = zeta_from_center(&bigger, &p, &limit).unwrap();
        assert!(plan2.zeta < plan.zeta);
        assert!(zeta_from_center(&RadialField::zeros(&g), &p, &limit).is_err());
    }

    #[test]
    fn second_scaling_preserves_gradient_and_transfers_lq() {
        let g = make_grid(3, 40.0, 300, 8.0).unwrap();
        let limit = talenti(&g, 1.0).unwrap();
        let p = ProblemParams::new(3, 2.0, Regime::UpperCritical, 5.0, 1.0, 40.0).unwrap();
        let w = random_positive_field(&g, 6);
        let plan = zeta_from_center(&w, &p, &limit).unwrap();
        let wt = second_scaling(&w, &plan).unwrap();
        let (a, b) = (grad_norm_sq_with(&wt, OuterBoundary::Dirichlet), grad_norm_sq_with(&w, OuterBoundary::Dirichlet));
        assert!(rel(a, b) < 1e-10);
        // ξ^{N−(N−2)q/2}‖w̃‖_q^q = ‖w‖_q^q and ξ²‖w̃‖² = ‖w‖²
        let (xi, q) = (plan.xi, p.q);
        assert!(rel(xi.powf(3.0 - 0.5 * q) * wt.integral_abs_pow(q), w.integral_abs_pow(q)) < 1e-10);
        assert!(rel(xi * xi * wt.inner(&wt), w.inner(&w)) < 1e-10);
        // identity at ξ = 1
        let id = second_scaling_map(3, 1.0).apply(&w);
        assert_eq!(id.values, w.values);
    }

    #[test]
    fn tau_ratios_of_limit_profiles_and_homogeneity() {
        let g = make_grid(3, 1000.0, 600, 16.4).unwrap();
        let k = build_kernel(&g, 2.0).unwrap();
        let cal = calibrate_a0(&k).unwrap();
        let u1 = lower_extremal(&g, 1.0, cal.a0).unwrap().field;
        let t1 = tau1(&u1, &k).unwrap();
        assert!((t1 - 1.0).abs() < 1e-3, "tau1 = {t1}");
        let t1c = tau1(&u1.scaled(2.0), &k).unwrap();
        assert!(rel(t1c, 2f64.powf(2.0 - 2.0 * 5.0 / 3.0) * t1) < 1e-10);

        let v1 = talenti(&g, 1.0).unwrap().field;
        let t2 = tau2(&v1, &k).unwrap();
        assert!((t2 - 1.0).abs() < 1e-3, "tau2 = {t2}");
        let t2c = tau2(&v1.scaled(2.0), &k).unwrap();
        assert!(rel(t2c, 2f64.powf(2.0 - 2.0 * 5.0) * t2) < 1e-10);
        assert!(tau1(&RadialField::zeros(&g), &k).is_err());
    }

    #[test]
    fn distances_vanish_on_equal_fields_and_obey_triangle_inequality() {
        let g = make_grid(4, 30.0, 200, 8.0).unwrap();
        let fine = make_grid(4, 30.0, 400, 8.0).unwrap();
        let norms = [DistanceNorm::L2, DistanceNorm::Lq(3.0), DistanceNorm::D12, DistanceNorm::H1];
        let f = random_positive_field(&g, 1);
        for n in norms {
            assert_eq!(profile_distance(&f, &f, n).unwrap(), 0.0);
        }
        for seed in 0..10 {
            let a = random_positive_field(&g, 3 * seed + 10);
            let b = random_positive_field(&g, 3 * seed + 11);
            let c = random_positive_field(&g, 3 * seed + 12);
            for n in norms {
                let ab = profile_distance(&a, &b, n).unwrap();
                let bc = profile_distance(&b, &c, n).unwrap();
                let ac = profile_distance(&a, &c, n).unwrap();
                assert!(ac <= ab + bc + 1e-12 * (ab + bc));
            }
        }
        // resampling: the same smooth profile on two grids is close
        let v = talenti(&g, 1.0).unwrap().field;
        let vf = talenti(&fine, 1.0).unwrap().field;
        let d = profile_distance(&v, &vf, DistanceNorm::L2).unwrap();
        assert!(d < 1e-3 * lp_norm(&vf, 2.0), "{d} vs {}", lp_norm(&vf, 2.0));
    }
}
