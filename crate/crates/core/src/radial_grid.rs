//! Radial discretization of functions on `R^N`.
//!
//! A grid consists of `n` cells `[x_k, x_{k+1}]` covering `[0, R]` whose widths
//! grow geometrically, with one node at each cell midpoint. Three families of
//! weights are carried:
//!
//! * quadrature weights `w_k` for `∫_0^R f(r) r^{N-1} dr ≈ Σ w_k f(r_k)`, built by
//!   integrating the local three-point quadratic interpolant of `f` exactly over
//!   every cell, so that polynomials of degree ≤ 2 are integrated exactly and
//!   `Σ w_k = R^N / N`;
//! * face weights `W_f = ∫_{r_k}^{r_{k+1}} r^{N-1} dr` of the dual cells used by
//!   the discrete Dirichlet form (second-order difference quotients);
//! * a boundary face `[r_{n-1}, R]` carrying the homogeneous Dirichlet condition.
//!
//! With geometric widths every weight is a homogeneous function of the edges, so
//! the discrete functionals transform under dilations by the width ratio exactly
//! as their continuous counterparts do.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Surface measure `ω_{N-1} = 2 π^{N/2} / Γ(N/2)` of the unit sphere in `R^N`.
pub fn sphere_area(dim_n: usize) -> f64 {
    let n = dim_n as f64;
    2.0 * std::f64::consts::PI.powf(0.5 * n) / gamma(0.5 * n)
}

/// Discretization of the radial coordinate together with its quadrature data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub dim_n: usize,
    /// Cell midpoints `r_k`, strictly increasing in `(0, R)`.
    pub nodes: Vec<f64>,
    /// Cell edges `x_0 = 0 < x_1 < … < x_n = R`.
    pub edges: Vec<f64>,
    /// Quadrature weights for `∫ · r^{N-1} dr`.
    pub weights: Vec<f64>,
    /// Dual-cell weights: entry `k < n-1` is `∫_{r_k}^{r_{k+1}} r^{N-1}dr`,
    /// the last entry is `∫_{r_{n-1}}^{R} r^{N-1}dr`.
    pub face_weights: Vec<f64>,
    pub r_max: f64,
    pub sphere_area: f64,
    /// Stretch parameter the grid was built with (1 for uniform).
    pub stretch: f64,
}

/// Samples of a radial function on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

/// Boundary treatment of the discrete Laplacian at `r = R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterBoundary {
    /// Homogeneous Dirichlet condition `u(R) = 0` (used by the solver).
    Dirichlet,
    /// Flux of a harmonic tail `c r^{2-N}` continued through `R`; used when
    /// checking closed-form profiles that are not truncated.
    HarmonicTail,
}

/// Builds a graded cell-midpoint grid.
///
/// Cell widths form a geometric sequence whose last-to-first ratio is
/// `stretch³`; `stretch = 1` gives uniform cells.
pub fn make_grid(dim_n: usize, r_max: f64, node_count: usize, stretch: f64) -> Result<Arc<RadialGrid>> {
    if dim_n < 3 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 3, got {dim_n}")));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::InvalidArgument(format!("r_max must be positive and finite, got {r_max}")));
    }
    if node_count < 4 {
        return Err(Error::InvalidArgument(format!("node_count must be at least 4, got {node_count}")));
    }
    if !(stretch.is_finite() && stretch >= 1.0) {
        return Err(Error::InvalidArgument(format!("stretch must be finite and >= 1, got {stretch}")));
    }
    let n = node_count;
    let ratio = stretch.powi(3).powf(1.0 / (n as f64 - 1.0));
    let mut widths: Vec<f64> = (0..n).map(|k| ratio.powi(k as i32)).collect();
    let total: f64 = widths.iter().sum();
    for w in &mut widths {
        *w *= r_max / total;
    }
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(0.0);
    let mut acc = 0.0;
    for w in &widths[..n - 1] {
        acc += w;
        edges.push(acc);
    }
    edges.push(r_max);
    Ok(Arc::new(RadialGrid::from_edges(dim_n, edges, stretch)?))
}

/// Returns the `stretch` argument of [`make_grid`] that produces a given
/// last-to-first cell width ratio.
pub fn stretch_for_width_ratio(ratio: f64) -> f64 {
    ratio.max(1.0).cbrt()
}

impl RadialGrid {
    /// Builds the grid data for arbitrary strictly increasing edges starting at 0.
    pub fn from_edges(dim_n: usize, edges: Vec<f64>, stretch: f64) -> Result<Self> {
        let n = edges.len() - 1;
        if edges[0] != 0.0 || edges.windows(2).any(|e| !(e[1] > e[0])) {
            return Err(Error::InvalidArgument("edges must start at 0 and increase strictly".into()));
        }
        let nodes: Vec<f64> = edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
        let pw = dim_n as i32 - 1;
        let rule = GaussLegendre::new(dim_n / 2 + 4);
        let mut weights = vec![0.0; n];
        for c in 0..n {
            // centred stencils, except near the origin where r^{N-1} varies too
            // fast across a cell for the backward node to keep a positive weight
            let steep = (dim_n as f64 - 1.0) * (edges[c + 1] - edges[c]) > 0.5 * nodes[c];
            let s0 = if steep { c } else { c.saturating_sub(1) }.min(n - 3);
            let st = [s0, s0 + 1, s0 + 2];
            let (a, b) = (edges[c], edges[c + 1]);
            for (m, &j) in st.iter().enumerate() {
                let others: Vec<usize> = st.iter().copied().filter(|&k| k != st[m]).collect();
                let (o1, o2) = (nodes[others[0]], nodes[others[1]]);
                let denom = (nodes[j] - o1) * (nodes[j] - o2);
                weights[j] += rule.integrate(a, b, |r| r.powi(pw) * (r - o1) * (r - o2)) / denom;
            }
        }
        let mut face_weights = Vec::with_capacity(n);
        for k in 0..n - 1 {
            face_weights.push(rule.integrate(nodes[k], nodes[k + 1], |r| r.powi(pw)));
        }
        let r_max = edges[n];
        face_weights.push(rule.integrate(nodes[n - 1], r_max, |r| r.powi(pw)));
        let grid = Self {
            dim_n,
            nodes,
            edges,
            weights,
            face_weights,
            r_max,
            sphere_area: sphere_area(dim_n),
            stretch,
        };
        if grid.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("grid grading too abrupt: non-positive quadrature weight".into()));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The same grid with every length multiplied by `ell`; weights scale by `ell^N`.
    pub fn dilated(&self, ell: f64) -> RadialGrid {
        let nf = self.dim_n as i32;
        RadialGrid {
            dim_n: self.dim_n,
            nodes: self.nodes.iter().map(|r| r * ell).collect(),
            edges: self.edges.iter().map(|r| r * ell).collect(),
            weights: self.weights.iter().map(|w| w * ell.powi(nf)).collect(),
            face_weights: self.face_weights.iter().map(|w| w * ell.powi(nf)).collect(),
            r_max: self.r_max * ell,
            sphere_area: self.sphere_area,
            stretch: self.stretch,
        }
    }

    /// Conductances `W_f / Δr_f²` of the discrete Dirichlet form; the last
    /// entry belongs to the Dirichlet boundary face.
    pub fn conductances(&self) -> Vec<f64> {
        let n = self.len();
        let mut g = Vec::with_capacity(n);
        for k in 0..n - 1 {
            let dr = self.nodes[k + 1] - self.nodes[k];
            g.push(self.face_weights[k] / (dr * dr));
        }
        let dr = self.r_max - self.nodes[n - 1];
        g.push(self.face_weights[n - 1] / (dr * dr));
        g
    }

    /// Stable content hash of the grid (dimension, stretch and all edges).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim_n as u64).to_le_bytes());
        h.update(self.stretch.to_le_bytes());
        for e in &self.edges {
            h.update(e.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Index of the last node with `r_k <= r`, or `None` if `r < r_0`.
    pub fn locate(&self, r: f64) -> Option<usize> {
        if r < self.nodes[0] {
            return None;
        }
        Some(self.nodes.partition_point(|&x| x <= r) - 1)
    }
}

impl RadialField {
    /// Wraps values sampled on `grid`.
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the nodes of `grid`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, f: F) -> Self {
        Self { grid: grid.clone(), values: grid.nodes.iter().map(|&r| f(r)).collect() }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    /// Same values on another grid object (used after dilating a grid).
    pub fn with_grid(&self, grid: Arc<RadialGrid>) -> Self {
        assert_eq!(grid.len(), self.values.len());
        Self { grid, values: self.values.clone() }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `ω Σ w_k f_k g_k`, the discrete `L²` pairing.
    pub fn inner(&self, other: &RadialField) -> f64 {
        debug_assert!(self.same_grid(other));
        let g = &self.grid;
        g.sphere_area * self.values.iter().zip(&other.values).zip(&g.weights).map(|((a, b), w)| a * b * w).sum::<f64>()
    }

    /// `ω Σ w_k |f_k|^p`.
    pub fn integral_abs_pow(&self, p: f64) -> f64 {
        let g = &self.grid;
        let s: f64 = if p == 2.0 {
            self.values.iter().zip(&g.weights).map(|(v, w)| v * v * w).sum()
        } else {
            self.values.iter().zip(&g.weights).map(|(v, w)| v.abs().powf(p) * w).sum()
        };
        g.sphere_area * s
    }
}

/// `L^p(R^N)` norm `(ω Σ w_k |u_k|^p)^{1/p}`.
pub fn lp_norm(u: &RadialField, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm requires p >= 1");
    u.integral_abs_pow(p).powf(1.0 / p)
}

/// `‖∇u‖₂²` from second-order difference quotients on the dual cells;
/// `u` is even at `r = 0` and vanishes at `r = R`.
pub fn grad_norm_sq(u: &RadialField) -> f64 {
    let g = &u.grid;
    let n = g.len();
    let v = &u.values;
    let mut s = 0.0;
    for k in 0..n - 1 {
        let dr = g.nodes[k + 1] - g.nodes[k];
        let d = (v[k + 1] - v[k]) / dr;
        s += g.face_weights[k] * d * d;
    }
    let d = v[n - 1] / (g.r_max - g.nodes[n - 1]);
    s += g.face_weights[n - 1] * d * d;
    g.sphere_area * s
}

/// `‖∇u‖₂²` with a chosen outer boundary treatment: [`OuterBoundary::Dirichlet`]
/// matches [`grad_norm_sq`]; [`OuterBoundary::HarmonicTail`] replaces the
/// boundary face by the energy `(N-2) ω u_{n-1}² r_{n-1}^{N-2}` of the harmonic
/// continuation `c r^{2-N}` beyond the last node.
pub fn grad_norm_sq_with(u: &RadialField, boundary: OuterBoundary) -> f64 {
    match boundary {
        OuterBoundary::Dirichlet => grad_norm_sq(u),
        OuterBoundary::HarmonicTail => {
            let g = &u.grid;
            let n = g.len();
            let v = &u.values;
            let mut s = 0.0;
            for k in 0..n - 1 {
                let d = (v[k + 1] - v[k]) / (g.nodes[k + 1] - g.nodes[k]);
                s += g.face_weights[k] * d * d;
            }
            let rl = g.nodes[n - 1];
            s += (g.dim_n as f64 - 2.0) * v[n - 1] * v[n - 1] * rl.powi(g.dim_n as i32 - 2);
            g.sphere_area * s
        }
    }
}

/// Applies the stiffness matrix `S` of the discrete Dirichlet form
/// (`grad_norm_sq(u) = ω uᵀ S u`), writing into `out`.
pub fn stiffness_apply(grid: &RadialGrid, cond: &[f64], u: &[f64], out: &mut [f64], boundary: OuterBoundary) {
    let n = grid.len();
    for o in out.iter_mut() {
        *o = 0.0;
    }
    for k in 0..n - 1 {
        let flux = cond[k] * (u[k] - u[k + 1]);
        out[k] += flux;
        out[k + 1] -= flux;
    }
    match boundary {
        OuterBoundary::Dirichlet => out[n - 1] += cond[n - 1] * u[n - 1],
        OuterBoundary::HarmonicTail => {
            let nn = grid.dim_n as f64;
            let r = grid.r_max;
            let tail = u[n - 1] * (grid.nodes[n - 1] / r).powf(nn - 2.0);
            out[n - 1] += r.powf(nn - 1.0) * (nn - 2.0) / r * tail;
        }
    }
}

/// Discrete `-Δu` at the nodes, `(S u)_k / w_k`.
pub fn neg_laplacian(u: &RadialField, boundary: OuterBoundary) -> RadialField {
    let g = &u.grid;
    let cond = g.conductances();
    let mut out = vec![0.0; g.len()];
    stiffness_apply(g, &cond, &u.values, &mut out, boundary);
    for (o, w) in out.iter_mut().zip(&g.weights) {
        *o /= w;
    }
    RadialField { grid: g.clone(), values: out }
}

/// Precomputed monotone cubic interpolant of a radial field, continued evenly
/// through `r = 0` and by the harmonic decay law `c r^{-(N-2)}` matched to the
/// last node beyond it.
#[derive(Debug, Clone)]
pub struct Interpolant<'a> {
    field: &'a RadialField,
    slopes: Vec<f64>,
    tail_coef: f64,
}

impl<'a> Interpolant<'a> {
    pub fn new(field: &'a RadialField) -> Self {
        let g = &field.grid;
        let (r, u) = (&g.nodes, &field.values);
        let n = r.len();
        let secant = |k: usize| (u[k + 1] - u[k]) / (r[k + 1] - r[k]);
        let mut slopes = vec![0.0; n];
        for (k, slope) in slopes.iter_mut().enumerate() {
            // neighbours, mirroring through the origin for the first node
            let (r0, u0, r1, u1, r2, u2) = if k == 0 {
                (-r[0], u[0], r[0], u[0], r[1], u[1])
            } else if k == n - 1 {
                (r[n - 3], u[n - 3], r[n - 2], u[n - 2], r[n - 1], u[n - 1])
            } else {
                (r[k - 1], u[k - 1], r[k], u[k], r[k + 1], u[k + 1])
            };
            let x = r[k];
            // derivative of the quadratic through the three points, at x
            let d = u0 * (2.0 * x - r1 - r2) / ((r0 - r1) * (r0 - r2))
                + u1 * (2.0 * x - r0 - r2) / ((r1 - r0) * (r1 - r2))
                + u2 * (2.0 * x - r0 - r1) / ((r2 - r0) * (r2 - r1));
            let left = if k == 0 { 0.0 } else { secant(k - 1) };
            let right = if k == n - 1 { secant(n - 2) } else { secant(k) };
            *slope = limit_slope(d, left, right, k == 0);
        }
        // continuous continuation by the exterior harmonic decay law
        let tail_coef = u[n - 1] * r[n - 1].powf(g.dim_n as f64 - 2.0);
        Self { field, slopes, tail_coef }
    }

    /// Coefficient `c` of the tail law `c r^{-(N-2)}`.
    pub fn tail_coefficient(&self) -> f64 {
        self.tail_coef
    }

    pub fn eval(&self, r: f64) -> f64 {
        let g = &self.field.grid;
        let (x, u) = (&g.nodes, &self.field.values);
        let n = x.len();
        let r = r.abs();
        if r > x[n - 1] {
            return self.tail_coef * r.powf(2.0 - g.dim_n as f64);
        }
        match g.locate(r) {
            None => hermite(-x[0], x[0], u[0], u[0], -self.slopes[0], self.slopes[0], r),
            Some(k) if k == n - 1 => u[n - 1],
            Some(k) => hermite(x[k], x[k + 1], u[k], u[k + 1], self.slopes[k], self.slopes[k + 1], r),
        }
    }
}

fn limit_slope(d: f64, left: f64, right: f64, at_origin: bool) -> f64 {
    if at_origin {
        // even symmetry: only the right secant constrains the slope
        if d * right <= 0.0 {
            return 0.0;
        }
        return d.signum() * d.abs().min(3.0 * right.abs());
    }
    if left * right <= 0.0 {
        return 0.0;
    }
    if d * left <= 0.0 {
        return 0.0;
    }
    d.signum() * d.abs().min(3.0 * left.abs().min(right.abs()))
}

fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m1
}

/// Evaluates `u` at radius `r ≥ 0` (monotone cubic inside, decay law outside).
pub fn eval_at(u: &RadialField, r: f64) -> f64 {
    Interpolant::new(u).eval(r)
}

/// Resamples `u` onto another grid through the interpolant `r ↦ u(r / ell) · amp`.
pub fn resample_scaled(u: &RadialField, target: &Arc<RadialGrid>, ell: f64, amp: f64) -> RadialField {
    let it = Interpolant::new(u);
    RadialField::from_fn(target, |r| amp * it.eval(r / ell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_small_grid_nodes_and_weights() {
        let g = make_grid(3, 10.0, 4, 1.0).unwrap();
        for (got, want) in g.nodes.iter().zip([1.25, 3.75, 6.25, 8.75]) {
            assert!((got - want).abs() < 1e-14);
        }
        let s: f64 = g.weights.iter().sum();
        assert!((s - 1000.0 / 3.0).abs() < 1e-12 * 1000.0);
    }

    #[test]
    fn quadratics_are_integrated_exactly() {
        for n in [3usize, 4, 5] {
            let g = make_grid(n, 7.0, 64, 1.0).unwrap();
            for m in 0..=2 {
                let got: f64 = g.nodes.iter().zip(&g.weights).map(|(r, w)| r.powi(m) * w).sum();
                let want = 7f64.powi(n as i32 + m) / (n as f64 + m as f64);
                assert!((got - want).abs() < 1e-12 * want, "N={n} m={m}");
            }
        }
    }

    #[test]
    fn weights_positive_on_strongly_graded_grid() {
        let g = make_grid(5, 1e4, 2000, 200.0).unwrap();
        assert!(g.weights.iter().all(|w| *w > 0.0));
        let s: f64 = g.weights.iter().sum();
        let want = 1e20 / 5.0;
        assert!((s - want).abs() < 1e-12 * want);
    }

    #[test]
    fn gaussian_gradient_norm() {
        let g = make_grid(3, 12.0, 4000, 1.0).unwrap();
        let u = RadialField::from_fn(&g, |r| (-0.5 * r * r).exp());
        let want = 1.5 * PI.powf(1.5);
        assert!((grad_norm_sq(&u) - want).abs() < 1e-4 * want);
    }

    #[test]
    fn stiffness_matches_gradient_form() {
        let g = make_grid(4, 9.0, 200, 5.0).unwrap();
        let u = RadialField::from_fn(&g, |r| 1.0 / (1.0 + r * r));
        let cond = g.conductances();
        let mut su = vec![0.0; g.len()];
        stiffness_apply(&g, &cond, &u.values, &mut su, OuterBoundary::Dirichlet);
        let quad: f64 = g.sphere_area * su.iter().zip(&u.values).map(|(a, b)| a * b).sum::<f64>();
        assert!((quad - grad_norm_sq(&u)).abs() < 1e-12 * quad);
    }

    #[test]
    fn interpolant_reproduces_nodes_and_constants() {
        let g = make_grid(3, 5.0, 64, 2.0).unwrap();
        let u = RadialField::from_fn(&g, |r| (-r).exp());
        let it = Interpolant::new(&u);
        for (k, r) in g.nodes.iter().enumerate() {
            assert_eq!(it.eval(*r), u.values[k]);
        }
        let c = RadialField::from_fn(&g, |_| 2.5);
        let it = Interpolant::new(&c);
        for r in [0.0, 0.01, 1.3, 4.9] {
            assert!((it.eval(r) - 2.5).abs() < 1e-15);
        }
    }

    #[test]
    fn dilation_scales_moments() {
        let g = make_grid(5, 3.0, 100, 3.0).unwrap();
        let d = g.dilated(2.0);
        let s: f64 = d.weights.iter().sum();
        assert!((s - 6f64.powi(5) / 5.0).abs() < 1e-10 * s);
    }
}
