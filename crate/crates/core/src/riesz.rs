//! Riesz potential `I_α * f` of radial functions.
//!
//! For radial `f`, `(I_α * f)(r) = A_α(N) ∫_0^∞ κ(r, s) f(s) s^{N-1} ds` where
//! `κ(r, s) = ∫_{S^{N-1}} |r e - s y|^{α-N} dσ(y)` is the spherical mean of the
//! Riesz kernel. With `M = max(r, s)`, `t = min(r, s)/M`,
//!
//! `κ(r, s) = ω_{N-1} M^{α-N} ₂F₁((N-α)/2, 1-α/2; N/2; t²)`,
//!
//! which is evaluated by its power series for moderate `t`, by the connection
//! formula around `t = 1` (where the `(1-t²)^{α-1}` singular factor appears
//! explicitly, with the logarithmic variant at `α = 1`), and by graded angular
//! quadrature in the remaining degenerate cases.
//!
//! The discrete operator is a Galerkin matrix on the grid cells: the symmetric
//! bilinear matrix is `B_ij = A_α (w_i/v_i)(w_j/v_j) ∫_{cell i}∫_{cell j} κ r^{N-1}s^{N-1}`
//! (`v` = exact cell volumes, `w` = quadrature weights), and `K_ij = B_ij / w_i`,
//! so `w_i K_ij = w_j K_ji` holds to rounding. Cell pairs that touch the
//! diagonal are integrated with panels graded toward the singular set.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use statrs::function::gamma::{digamma, gamma};

use crate::error::{Error, Result};
use crate::quadrature::{graded_offsets, GaussLegendre};
use crate::radial_grid::{sphere_area, RadialField, RadialGrid};

/// Normalisation `A_α(N) = Γ((N-α)/2) / (Γ(α/2) π^{N/2} 2^α)` of the Riesz kernel.
pub fn a_alpha(dim_n: usize, alpha: f64) -> f64 {
    let n = dim_n as f64;
    gamma(0.5 * (n - alpha)) / (gamma(0.5 * alpha) * std::f64::consts::PI.powf(0.5 * n) * 2f64.powf(alpha))
}

/// Sharp Hardy–Littlewood–Sobolev constant
/// `C_α(N) = π^{(N-α)/2} Γ(α/2)/Γ((N+α)/2) · {Γ(N/2)/Γ(N)}^{-α/N}`.
pub fn hls_sharp_constant(dim_n: usize, alpha: f64) -> Result<f64> {
    let n = dim_n as f64;
    if dim_n < 1 || !(alpha > 0.0 && alpha < n) {
        return Err(Error::InvalidArgument(format!("HLS constant needs 0 < alpha < N, got alpha={alpha}, N={dim_n}")));
    }
    Ok(std::f64::consts::PI.powf(0.5 * (n - alpha)) * gamma(0.5 * alpha) / gamma(0.5 * (n + alpha))
        * (gamma(0.5 * n) / gamma(n)).powf(-alpha / n))
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && (x - x.round()).abs() < 1e-12
}

/// Evaluator of the spherical mean `κ(r, s)` for fixed `(N, α)`.
#[derive(Debug, Clone)]
pub struct SphericalMean {
    dim_n: usize,
    alpha: f64,
    omega: f64,
    a: f64,
    b: f64,
    c: f64,
    method_near: NearMethod,
    angular: GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NearMethod {
    /// `b` is a non-positive integer: the series terminates.
    Polynomial,
    /// Non-integer `c - a - b = α - 1`: connection formula.
    Connection { c1: f64, c2: f64 },
    /// `α = 1`: logarithmic connection formula.
    Logarithmic { pref: f64 },
    /// Integer `α ≥ 3`: angular quadrature.
    Angular,
}

/// Below this `t` the hypergeometric series is summed directly.
const DIRECT_SERIES_T: f64 = 0.7;

impl SphericalMean {
    pub fn new(dim_n: usize, alpha: f64) -> Self {
        let n = dim_n as f64;
        let a = 0.5 * (n - alpha);
        let b = 1.0 - 0.5 * alpha;
        let c = 0.5 * n;
        let near_int = (alpha - alpha.round()).abs() < 1e-9;
        let method_near = if is_nonpositive_integer(b) {
            NearMethod::Polynomial
        } else if near_int && alpha.round() == 1.0 {
            NearMethod::Logarithmic { pref: gamma(a + b) / (gamma(a) * gamma(b)) }
        } else if (alpha - alpha.round()).abs() > 1e-6 {
            NearMethod::Connection {
                c1: gamma(c) * gamma(c - a - b) / (gamma(c - a) * gamma(c - b)),
                c2: gamma(c) * gamma(a + b - c) / (gamma(a) * gamma(b)),
            }
        } else {
            NearMethod::Angular
        };
        Self { dim_n, alpha, omega: sphere_area(dim_n), a, b, c, method_near, angular: GaussLegendre::new(12) }
    }

    /// Relative size of the first correction to the monopole term at ratio `t`.
    #[inline]
    pub fn monopole_correction(&self, t: f64) -> f64 {
        (self.a * self.b / self.c).abs() * t * t
    }

    /// `κ(r, s)`; for `α ≤ 1` it diverges at `r = s` and must not be called there.
    pub fn value(&self, r: f64, s: f64) -> f64 {
        let (m, lo) = if r >= s { (r, s) } else { (s, r) };
        let t = lo / m;
        // 1 - t² computed without cancellation
        let y = (m - lo) * (m + lo) / (m * m);
        self.omega * m.powf(self.alpha - self.dim_n as f64) * self.hyp(t, y)
    }

    /// `₂F₁(a, b; c; t²)` with `y = 1 - t²` supplied separately.
    fn hyp(&self, t: f64, y: f64) -> f64 {
        if self.b == 0.0 {
            return 1.0;
        }
        let z = t * t;
        if self.monopole_correction(t) < 1e-17 {
            return 1.0;
        }
        if t <= DIRECT_SERIES_T || self.method_near == NearMethod::Polynomial {
            return series(self.a, self.b, self.c, z);
        }
        match self.method_near {
            NearMethod::Connection { c1, c2 } => {
                let (a, b, c) = (self.a, self.b, self.c);
                c1 * series(a, b, a + b - c + 1.0, y) + c2 * y.powf(c - a - b) * series(c - a, c - b, c - a - b + 1.0, y)
            }
            NearMethod::Logarithmic { pref } => log_connection(self.a, self.b, y, pref),
            NearMethod::Angular => self.angular_average(t),
            NearMethod::Polynomial => unreachable!(),
        }
    }

    /// `κ / (ω M^{α-N})` by graded Gauss–Legendre quadrature over the polar angle.
    fn angular_average(&self, t: f64) -> f64 {
        let n = self.dim_n as f64;
        let e = 0.5 * (self.alpha - n);
        let gap = (1.0 - t) * (1.0 - t);
        let (mut th, mut wt) = (Vec::new(), Vec::new());
        graded_offsets(&self.angular, std::f64::consts::PI, 0.25, 30, &mut th, &mut wt);
        let mut acc = 0.0;
        for (x, w) in th.iter().zip(&wt) {
            let sh = (0.5 * x).sin();
            let base = gap + 4.0 * t * sh * sh;
            acc += w * x.sin().powf(n - 2.0) * base.powf(e);
        }
        // normalise by ∫_0^π sin^{N-2}θ dθ = ω_{N-1}/ω_{N-2}
        acc * sphere_area(self.dim_n - 1) / self.omega
    }

    /// Independent evaluation by angular quadrature (used to cross-check the
    /// hypergeometric branches).
    pub fn value_by_angular_quadrature(&self, r: f64, s: f64) -> f64 {
        let (m, lo) = if r >= s { (r, s) } else { (s, r) };
        self.omega * m.powf(self.alpha - self.dim_n as f64) * self.angular_average(lo / m)
    }
}

fn series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..2000 {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 || term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn log_connection(a: f64, b: f64, y: f64, pref: f64) -> f64 {
    // F(a,b;a+b;z) = Γ(a+b)/(Γ(a)Γ(b)) Σ (a)_n (b)_n/(n!)² [2ψ(n+1) - ψ(a+n) - ψ(b+n) - ln y] y^n
    let ln_y = y.ln();
    let (mut psi1, mut psia, mut psib) = (digamma(1.0), digamma(a), digamma(b));
    let mut coef = 1.0;
    let mut sum = 0.0;
    for k in 0..2000 {
        let kf = k as f64;
        let term = coef * (2.0 * psi1 - psia - psib - ln_y);
        sum += term;
        if k > 2 && term.abs() < 1e-17 * sum.abs() {
            break;
        }
        coef *= (a + kf) * (b + kf) / ((kf + 1.0) * (kf + 1.0)) * y;
        psi1 += 1.0 / (kf + 1.0);
        psia += 1.0 / (a + kf);
        psib += 1.0 / (b + kf);
    }
    pref * sum
}

/// Dense discrete Riesz operator on a radial grid.
#[derive(Debug, Clone)]
pub struct RieszKernel {
    pub grid: Arc<RadialGrid>,
    pub alpha: f64,
    pub a_alpha: f64,
    /// Row-major `K_ij` with `(I_α * f)(r_i) ≈ Σ_j scale · K_ij f_j`.
    pub matrix: Arc<Vec<f64>>,
    /// Factor `ℓ^α` carried by dilated views of a kernel (1 when built).
    pub scale: f64,
}

/// Layout version of the kernel cache file.
pub const KERNEL_CACHE_VERSION: u32 = 1;

/// Builds the discrete Riesz operator for `0 < α < N`.
pub fn build_kernel(grid: &Arc<RadialGrid>, alpha: f64) -> Result<RieszKernel> {
    let n_dim = grid.dim_n as f64;
    if !(alpha > 0.0 && alpha < n_dim) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, N) = (0, {n_dim}), got {alpha}")));
    }
    let n = grid.len();
    if n < 16 {
        return Err(Error::InvalidArgument(format!("kernel needs at least 16 nodes, got {n}")));
    }
    let kappa = SphericalMean::new(grid.dim_n, alpha);
    let builder = PairIntegrator::new(grid, &kappa);
    let aa = a_alpha(grid.dim_n, alpha);
    // upper triangle of the symmetric bilinear matrix, row by row
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| (i..n).map(|j| builder.pair(i, j)).collect()).collect();
    let mut matrix = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (off, &bij) in row.iter().enumerate() {
            let j = i + off;
            let b = aa * bij;
            matrix[i * n + j] = b / grid.weights[i];
            matrix[j * n + i] = b / grid.weights[j];
        }
    }
    Ok(RieszKernel { grid: grid.clone(), alpha, a_alpha: aa, matrix: Arc::new(matrix), scale: 1.0 })
}

/// Computes the normalised cell-pair integrals `(w_i/v_i)(w_j/v_j) ∫∫ κ r^{N-1}s^{N-1}`.
struct PairIntegrator<'a> {
    grid: &'a RadialGrid,
    kappa: &'a SphericalMean,
    volumes: Vec<f64>,
    rules: [GaussLegendre; 4],
    singular_rule: GaussLegendre,
    singular_levels: usize,
}

impl<'a> PairIntegrator<'a> {
    fn new(grid: &'a RadialGrid, kappa: &'a SphericalMean) -> Self {
        let pw = grid.dim_n as i32 - 1;
        let vol_rule = GaussLegendre::new(grid.dim_n / 2 + 3);
        let volumes = grid.edges.windows(2).map(|e| vol_rule.integrate(e[0], e[1], |r| r.powi(pw))).collect();
        let alpha = kappa.alpha;
        // the kernel is smooth on either side of the diagonal for even α (b ≤ 0 integer)
        let singular_levels = if is_nonpositive_integer(kappa.b) {
            0
        } else if alpha < 1.5 {
            24
        } else {
            12
        };
        Self {
            grid,
            kappa,
            volumes,
            rules: [GaussLegendre::new(1), GaussLegendre::new(2), GaussLegendre::new(4), GaussLegendre::new(8)],
            singular_rule: GaussLegendre::new(8),
            singular_levels,
        }
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        let g = self.grid;
        let pw = g.dim_n as i32 - 1;
        let (ai, bi) = (g.edges[i], g.edges[i + 1]);
        let (aj, bj) = (g.edges[j], g.edges[j + 1]);
        let raw = if i == j {
            self.diagonal(ai, bi)
        } else if j == i + 1 {
            self.touching(ai, bi, bj)
        } else {
            let hmax = (bi - ai).max(bj - aj);
            let gap = aj - bi;
            if self.kappa.monopole_correction(bi / aj) < 1e-10 && gap > 4.0 * hmax {
                // far field: only the monopole term of κ survives
                let e = self.kappa.alpha - g.dim_n as f64;
                let rule = if gap > 16.0 * hmax { &self.rules[1] } else { &self.rules[2] };
                let inner = rule.integrate(aj, bj, |s| s.powf(e) * s.powi(pw));
                self.kappa.omega * inner * self.volumes[i]
            } else {
                let rule = if gap > 16.0 * hmax {
                    &self.rules[1]
                } else if gap > 4.0 * hmax {
                    &self.rules[2]
                } else {
                    &self.rules[3]
                };
                rule.integrate(ai, bi, |r| r.powi(pw) * rule.integrate(aj, bj, |s| self.kappa.value(r, s) * s.powi(pw)))
            }
        };
        raw * (g.weights[i] / self.volumes[i]) * (g.weights[j] / self.volumes[j])
    }

    /// Graded offsets on `[0, len]` toward 0, or a plain rule when the kernel is
    /// piecewise smooth.
    fn offsets(&self, len: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut d, mut w) = (Vec::new(), Vec::new());
        if self.singular_levels == 0 {
            self.singular_rule.push_mapped(0.0, len, &mut d, &mut w);
        } else {
            graded_offsets(&self.singular_rule, len, 0.3, self.singular_levels, &mut d, &mut w);
        }
        (d, w)
    }

    /// `∫∫_{[a,b]²} κ r^{N-1} s^{N-1}` = `2 ∫_a^b ∫_0^{r-a} κ(r, r-d) …`.
    fn diagonal(&self, a: f64, b: f64) -> f64 {
        let pw = self.grid.dim_n as i32 - 1;
        let (ro, rw) = self.offsets(b - a);
        let mut acc = 0.0;
        for (x, wx) in ro.iter().zip(&rw) {
            let r = a + x;
            let (dd, dw) = self.offsets(*x);
            let mut inner = 0.0;
            for (d, w) in dd.iter().zip(&dw) {
                let s = r - d;
                inner += w * self.kappa_close(r, s, *d) * s.powi(pw);
            }
            acc += wx * r.powi(pw) * inner;
        }
        2.0 * acc
    }

    /// Cells `[a, e]` and `[e, c]` sharing the edge `e`.
    fn touching(&self, a: f64, e: f64, c: f64) -> f64 {
        let pw = self.grid.dim_n as i32 - 1;
        let (lo, lw) = self.offsets(e - a);
        let (ro, rw) = self.offsets(c - e);
        let mut acc = 0.0;
        for (d1, w1) in lo.iter().zip(&lw) {
            let r = e - d1;
            let mut inner = 0.0;
            for (d2, w2) in ro.iter().zip(&rw) {
                let s = e + d2;
                inner += w2 * self.kappa_close(r, s, d1 + d2) * s.powi(pw);
            }
            acc += w1 * r.powi(pw) * inner;
        }
        acc
    }

    /// `κ(r, s)` where `|r - s| = dist` is known exactly.
    #[inline]
    fn kappa_close(&self, r: f64, s: f64, dist: f64) -> f64 {
        let (m, lo) = if r >= s { (r, s) } else { (s, r) };
        let k = self.kappa;
        let t = lo / m;
        let y = dist * (m + lo) / (m * m);
        k.omega * m.powf(k.alpha - k.dim_n as f64) * k.hyp(t, y)
    }
}

impl RieszKernel {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.matrix[i * n..(i + 1) * n]
    }

    /// `K f` on raw value slices.
    pub fn apply_values(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(f.len(), n);
        let s = self.scale;
        self.matrix.par_chunks(n).map(|row| s * row.iter().zip(f).map(|(k, v)| k * v).sum::<f64>()).collect()
    }

    /// The operator on the grid dilated by `ell`, sharing the matrix: every
    /// entry is homogeneous of degree `α` in the edges, so the dilated
    /// operator is `ℓ^α K`.
    pub fn dilated(&self, ell: f64) -> RieszKernel {
        RieszKernel {
            grid: Arc::new(self.grid.dilated(ell)),
            alpha: self.alpha,
            a_alpha: self.a_alpha,
            matrix: self.matrix.clone(),
            scale: self.scale * ell.powf(self.alpha),
        }
    }

    /// Writes the binary cache file: header `(version, N, α, n, R)` followed by
    /// the row-major matrix as little-endian 64-bit floats.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(40 + 8 * self.matrix.len());
        buf.extend_from_slice(b"RIESZKRN");
        buf.extend_from_slice(&KERNEL_CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.grid.dim_n as u32).to_le_bytes());
        buf.extend_from_slice(&self.alpha.to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&self.grid.r_max.to_le_bytes());
        for v in self.matrix.iter() {
            buf.extend_from_slice(&(v * self.scale).to_le_bytes());
        }
        crate::io::write_atomic(path, &buf)
    }

    /// Reads a cache file written by [`RieszKernel::save`] for the given grid.
    pub fn load(path: &Path, grid: &Arc<RadialGrid>, alpha: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let n = grid.len();
        let bad = |m: &str| Error::InvalidArgument(format!("kernel cache {}: {m}", path.display()));
        if bytes.len() != 40 + 8 * n * n || &bytes[..8] != b"RIESZKRN" {
            return Err(bad("size or magic mismatch"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(8) != KERNEL_CACHE_VERSION
            || u32_at(12) as usize != grid.dim_n
            || f64_at(16) != alpha
            || u64_at(24) as usize != n
            || f64_at(32) != grid.r_max
        {
            return Err(bad("header mismatch"));
        }
        let matrix = bytes[40..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { grid: grid.clone(), alpha, a_alpha: a_alpha(grid.dim_n, alpha), matrix: Arc::new(matrix), scale: 1.0 })
    }
}

/// Cache file name for `(N, α, grid hash)`.
pub fn cache_file_name(grid: &RadialGrid, alpha: f64) -> String {
    format!("riesz_N{}_a{:016x}_{}.bin", grid.dim_n, alpha.to_bits(), &grid.content_hash()[..24])
}

/// Loads the kernel from `cache_dir` when present, otherwise builds and stores it.
pub fn build_kernel_cached(grid: &Arc<RadialGrid>, alpha: f64, cache_dir: Option<&Path>) -> Result<RieszKernel> {
    let Some(dir) = cache_dir else {
        return build_kernel(grid, alpha);
    };
    let path: PathBuf = dir.join(cache_file_name(grid, alpha));
    if path.exists() {
        if let Ok(k) = RieszKernel::load(&path, grid, alpha) {
            return Ok(k);
        }
    }
    let k = build_kernel(grid, alpha)?;
    fs::create_dir_all(dir)?;
    k.save(&path)?;
    Ok(k)
}

/// `(I_α * f)(r_i)` at every node.
pub fn riesz_apply(kernel: &RieszKernel, f: &RadialField) -> Result<RadialField> {
    if !(Arc::ptr_eq(&kernel.grid, &f.grid) || *kernel.grid == *f.grid) {
        return Err(Error::GridMismatch("field and kernel live on different grids".into()));
    }
    Ok(RadialField { grid: f.grid.clone(), values: kernel.apply_values(&f.values) })
}

/// `∫ (I_α * |f|^p) |f|^p` by quadrature.
pub fn d_term(kernel: &RieszKernel, f: &RadialField, p: f64) -> f64 {
    let fp: Vec<f64> = f.values.iter().map(|v| v.abs().powf(p)).collect();
    d_term_of_power(kernel, &fp)
}

/// `ω Σ_i w_i g_i (K g)_i` for a precomputed `g = |f|^p`.
pub fn d_term_of_power(kernel: &RieszKernel, g: &[f64]) -> f64 {
    let grid = &kernel.grid;
    let kg = kernel.apply_values(g);
    grid.sphere_area * g.iter().zip(&kg).zip(&grid.weights).map(|((a, b), w)| a * b * w).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn newtonian_normalisation() {
        assert!((a_alpha(3, 2.0) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let k = SphericalMean::new(3, 2.0);
        assert!((k.value(2.0, 0.5) - 4.0 * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn hypergeometric_branches_agree_with_angular_quadrature() {
        for &(n, alpha) in &[(3usize, 1.0), (3, 1.5), (4, 0.7), (5, 1.0), (5, 2.5), (4, 3.0), (3, 2.0)] {
            let k = SphericalMean::new(n, alpha);
            for &(r, s) in &[(1.0, 0.2), (1.0, 0.69), (1.0, 0.71), (1.0, 0.95), (2.0, 1.999), (0.3, 0.3001)] {
                let a = k.value(r, s);
                let b = k.value_by_angular_quadrature(r, s);
                assert!((a - b).abs() < 1e-9 * b.abs(), "N={n} alpha={alpha} r={r} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn log_kernel_closed_form_in_three_dimensions() {
        // N = 3, α = 1: κ = (2π / (r s)) ln((r+s)/|r-s|)
        let k = SphericalMean::new(3, 1.0);
        for &(r, s) in &[(1.0, 0.5), (1.0, 0.9), (1.0, 0.999)] {
            let want = 2.0 * PI / (r * s) * ((r + s) / (r - s as f64).abs()).ln();
            assert!((k.value(r, s) - want).abs() < 1e-11 * want);
        }
    }

    #[test]
    fn hls_constant_three_two() {
        let c = hls_sharp_constant(3, 2.0).unwrap();
        let g25: f64 = 1.329340388179137;
        let g15: f64 = 0.886226925452758;
        let want = PI.sqrt() * 1.0 / g25 * (g15 / 2.0).powf(-2.0 / 3.0);
        assert!((c - want).abs() < 1e-12);
        assert!((c - 2.2942).abs() < 5e-4);
        assert!(hls_sharp_constant(3, 3.0).is_err());
    }

    #[test]
    fn kernel_symmetry_and_positivity() {
        let g = make_grid(3, 10.0, 80, 3.0).unwrap();
        for alpha in [1.0, 2.0, 0.8] {
            let k = build_kernel(&g, alpha).unwrap();
            let n = g.len();
            for i in 0..n {
                for j in 0..n {
                    let kij = k.matrix[i * n + j];
                    assert!(kij >= 0.0);
                    let a = g.weights[i] * kij;
                    let b = g.weights[j] * k.matrix[j * n + i];
                    assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
                }
            }
        }
    }

    #[test]
    fn cache_round_trip() {
        let g = make_grid(4, 5.0, 32, 2.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = build_kernel_cached(&g, 1.5, Some(dir.path())).unwrap();
        let b = build_kernel_cached(&g, 1.5, Some(dir.path())).unwrap();
        assert_eq!(a.matrix, b.matrix);
    }
}
