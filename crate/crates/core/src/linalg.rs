//! Small dense/tridiagonal linear-algebra kernels used by the solver.

/// Symmetric tridiagonal matrix stored by diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[k]` couples unknowns `k` and `k+1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    /// Solves `T x = rhs` by the Thomas algorithm (no pivoting; the matrices
    /// used here are symmetric positive definite).
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut beta = self.diag[0];
        d[0] = rhs[0] / beta;
        for k in 1..n {
            c[k - 1] = self.off[k - 1] / beta;
            beta = self.diag[k] - self.off[k - 1] * c[k - 1];
            d[k] = (rhs[k] - self.off[k - 1] * d[k - 1]) / beta;
        }
        for k in (0..n - 1).rev() {
            d[k] -= c[k] * d[k + 1];
        }
        d
    }

    /// Cholesky factorisation; `None` if the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.diag.len();
        let mut diag = vec![0.0; n];
        let mut sub = vec![0.0; n.saturating_sub(1)];
        let mut prev = 0.0;
        for k in 0..n {
            let d = self.diag[k] - if k > 0 { prev * prev } else { 0.0 };
            if !(d > 0.0) {
                return None;
            }
            diag[k] = d.sqrt();
            if k + 1 < n {
                sub[k] = self.off[k] / diag[k];
                prev = sub[k];
            }
        }
        Some(Cholesky { diag, sub })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for k in 0..n - 1 {
            y[k] += self.off[k] * x[k + 1];
            y[k + 1] += self.off[k] * x[k];
        }
        y
    }
}

/// Lower bidiagonal Cholesky factor `L` of a symmetric positive definite
/// tridiagonal matrix, `T = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    diag: Vec<f64>,
    /// `sub[k]` is the entry at row `k+1`, column `k`.
    sub: Vec<f64>,
}

impl Cholesky {
    /// Solves `L x = rhs`.
    pub fn solve_lower(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; rhs.len()];
        x[0] = rhs[0] / self.diag[0];
        for k in 1..rhs.len() {
            x[k] = (rhs[k] - self.sub[k - 1] * x[k - 1]) / self.diag[k];
        }
        x
    }

    /// Solves `Lᵀ x = rhs`.
    pub fn solve_upper(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = vec![0.0; n];
        x[n - 1] = rhs[n - 1] / self.diag[n - 1];
        for k in (0..n - 1).rev() {
            x[k] = (rhs[k] - self.sub[k] * x[k + 1]) / self.diag[k];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual norm relative to `‖b‖`.
    pub relative_residual: f64,
}

/// Restarted GMRES for `A x = b` with right preconditioning `x = M y`,
/// started from zero. Stops when `‖b - A x‖ ≤ rtol ‖b‖` or after
/// `max_iter` inner iterations.
pub fn gmres<A, M>(apply: A, precond: M, b: &[f64], rtol: f64, restart: usize, max_iter: usize) -> GmresResult
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return GmresResult { x, iterations: 0, relative_residual: 0.0 };
    }
    let mut total = 0;
    let mut rel = 1.0;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= rtol {
            break;
        }
        let m = restart.min(max_iter - total);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let zj = precond(&v[j]);
            let mut w = apply(&zj);
            z.push(zj);
            // modified Gram–Schmidt
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let den = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if den == 0.0 {
                break;
            }
            cs[j] = h[j][j] / den;
            sn[j] = h[j + 1][j] / den;
            h[j][j] = den;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= rtol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wk| wk / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for k in i + 1..used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            for (xk, zk) in x.iter_mut().zip(zi) {
                *xk += yi * zk;
            }
        }
        if rel <= rtol || used == 0 {
            break;
        }
    }
    GmresResult { x, iterations: total, relative_residual: rel }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_poisson_matrix() {
        let n = 50;
        let t = Tridiagonal { diag: vec![2.0; n], off: vec![-1.0; n - 1] };
        let x_true: Vec<f64> = (0..n).map(|k| (k as f64 * 0.3).sin()).collect();
        let b = t.apply(&x_true);
        let x = t.solve(&b);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn cholesky_factor_reproduces_matrix() {
        let n = 40;
        let t = Tridiagonal { diag: (0..n).map(|k| 3.0 + k as f64 * 0.1).collect(), off: vec![-1.2; n - 1] };
        let l = t.cholesky().unwrap();
        let b: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let x = l.solve_upper(&l.solve_lower(&b));
        let tx = t.apply(&x);
        for (a, c) in tx.iter().zip(&b) {
            assert!((a - c).abs() < 1e-12);
        }
        let indefinite = Tridiagonal { diag: vec![1.0, 1.0], off: vec![2.0] };
        assert!(indefinite.cholesky().is_none());
    }

    #[test]
    fn gmres_solves_nonsymmetric_system_with_preconditioner() {
        let n = 80;
        let t = Tridiagonal { diag: vec![4.0; n], off: vec![-1.0; n - 1] };
        let apply = |x: &[f64]| {
            let mut y = t.apply(x);
            for k in 1..n {
                y[k] += 0.3 * x[k - 1];
            }
            y
        };
        let b: Vec<f64> = (0..n).map(|k| 1.0 + (k as f64).cos()).collect();
        let res = gmres(apply, |v| t.solve(v), &b, 1e-12, 20, 200);
        let r = apply(&res.x);
        let err: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10 * norm(&b), "err {err}");
    }
}
