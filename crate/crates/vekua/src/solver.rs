//! Closed-form ridge-regression output layer with an analytic adjoint.
//!
//! The output layer solves `w* = (Phi^T Phi + lambda I)^{-1} Phi^T y` by a
//! dense Cholesky factorization, and differentiates the solve by implicit
//! differentiation so upstream modules (basis, warp) receive exact gradients
//! without a tape. The factorization is computed once per forward-backward
//! pass and reused through [`RidgeSolution`].

use crate::error::{Result, VekuaError};
use crate::mat::{self, Mat};

/// Result of a ridge solve. Carries the Cholesky factor so the backward pass
/// ([`ridge_vjp`], [`fit_loss_grad`]) can reuse it: exactly one factorization
/// happens per forward-backward pass.
#[derive(Debug, Clone)]
pub struct RidgeSolution {
    /// Linear coefficients, length `M`.
    pub w: Vec<f64>,
    /// Prediction minus target, `Phi w - y`, length `N`.
    pub residual: Vec<f64>,
    /// Effective regularization actually used (grows by factors of 10 if the
    /// factorization needed jitter retries).
    pub lambda: f64,
    /// Lower-triangular Cholesky factor of `A = Phi^T Phi + lambda I`.
    chol: Mat,
}

impl RidgeSolution {
    /// Solve `A x = b` by reusing the stored factorization.
    fn solve_system(&self, b: &[f64]) -> Vec<f64> {
        chol_solve(&self.chol, b)
    }
}

/// Error-free transformation of a sum: returns `(s, e)` with `s = fl(a + b)`
/// and `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free transformation of a product via fused multiply-add:
/// `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Lower-triangular Cholesky factorization of a symmetric matrix. Fails with
/// the 0-based index of the first non-positive pivot.
fn cholesky(a: &Mat, lambda: f64) -> Result<Mat> {
    let p = a.rows;
    let mut l = Mat::zeros(p, p);
    for j in 0..p {
        let mut d = a.at(j, j);
        for k in 0..j {
            d -= l.at(j, k) * l.at(j, k);
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(VekuaError::SingularSystem { pivot: j, lambda });
        }
        let dj = d.sqrt();
        *l.at_mut(j, j) = dj;
        for i in (j + 1)..p {
            let mut s = a.at(i, j);
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k);
            }
            *l.at_mut(i, j) = s / dj;
        }
    }
    Ok(l)
}

/// Solve `L L^T x = b` by forward then backward substitution.
// Indexed loops: the backward pass reads `x[k]` while writing `x[i]` and
// walks a column of `l`; the textbook form is clearer than iterator chains.
#[allow(clippy::needless_range_loop)]
fn chol_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let p = l.rows;
    let mut x = vec![0.0f64; p];
    for i in 0..p {
        let row = l.row(i);
        let mut s = b[i];
        for k in 0..i {
            s -= row[k] * x[k];
        }
        x[i] = s / row[i];
    }
    for i in (0..p).rev() {
        let mut s = x[i];
        for k in (i + 1)..p {
            s -= l.at(k, i) * x[k];
        }
        x[i] = s / l.at(i, i);
    }
    x
}

/// One step of iterative refinement with a compensated (double-double)
/// residual: recompute `b - A w` with error-free sums/products so the
/// correction is accurate to well below unit roundoff of the naive solve.
fn refine(a: &Mat, l: &Mat, b: &[f64], w: &mut [f64]) {
    let p = a.rows;
    let mut s = vec![0.0f64; p];
    for i in 0..p {
        let row = a.row(i);
        let (mut hi, mut lo) = (b[i], 0.0f64);
        for (aj, wj) in row.iter().zip(w.iter()) {
            let (ph, pl) = two_prod(-aj, *wj);
            let (sh, se) = two_sum(hi, ph);
            hi = sh;
            lo += se + pl;
        }
        s[i] = hi + lo;
    }
    let dw = chol_solve(l, &s);
    for (wi, d) in w.iter_mut().zip(dw) {
        *wi += d;
    }
}

fn check_inputs(phi: &Mat, y: &[f64], lambda: f64) -> Result<()> {
    if phi.rows == 0 || phi.cols == 0 {
        return Err(VekuaError::InvalidSize(
            "design matrix must have at least one row and one column".into(),
        ));
    }
    if y.len() != phi.rows {
        return Err(VekuaError::ShapeMismatch(format!(
            "target length {} does not match {} rows",
            y.len(),
            phi.rows
        )));
    }
    if !(lambda > 0.0) {
        return Err(VekuaError::InvalidParameter(format!(
            "ridge lambda must be positive, got {lambda}"
        )));
    }
    if !phi.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(VekuaError::InvalidInput(
            "non-finite entries in ridge inputs".into(),
        ));
    }
    Ok(())
}

/// Solve the regularized least-squares problem
/// `min_w ||Phi w - y||^2 + lambda ||w||^2` in closed form.
///
/// On a factorization failure (numerically non-SPD normal matrix) the
/// regularization is multiplied by 10 and the factorization retried, up to 3
/// times; after that the singular-system error (carrying the failing pivot
/// index) is raised. The returned solution records the effective lambda.
pub fn ridge_solve(phi: &Mat, y: &[f64], lambda: f64) -> Result<RidgeSolution> {
    check_inputs(phi, y, lambda)?;
    let gram = mat::gram(phi, 0.0);
    let rhs = mat::matvec_t(phi, y);
    let p = phi.cols;

    let mut lam = lambda;
    let mut last_err = None;
    for _attempt in 0..4 {
        let mut a = gram.clone();
        for j in 0..p {
            *a.at_mut(j, j) += lam;
        }
        match cholesky(&a, lam) {
            Ok(chol) => {
                let mut w = chol_solve(&chol, &rhs);
                refine(&a, &chol, &rhs, &mut w);
                let pred = mat::matvec(phi, &w);
                let residual: Vec<f64> = pred.iter().zip(y).map(|(&p_i, &y_i)| p_i - y_i).collect();
                return Ok(RidgeSolution {
                    w,
                    residual,
                    lambda: lam,
                    chol,
                });
            }
            Err(e) => {
                last_err = Some(e);
                lam *= 10.0;
            }
        }
    }
    Err(last_err.expect("at least one factorization attempt"))
}

/// Vector-Jacobian product of [`ridge_solve`] with respect to `Phi` and `y`.
///
/// Given the upstream gradient `gbar = d loss / d w*`, implicit
/// differentiation of the normal equations gives, with `u = A^{-1} gbar`:
///
/// ```text
/// grad_Phi = y u^T - Phi (u w^T + w u^T) = -r u^T - (Phi u) w^T
/// grad_y   = Phi u
/// ```
///
/// where `r = Phi w - y` is the stored residual. Direct-loss terms through
/// the residual are the caller's responsibility (see [`fit_loss_grad`]).
/// Reuses the factorization stored in `sol`; no new factorization happens.
pub fn ridge_vjp(phi: &Mat, sol: &RidgeSolution, gbar: &[f64]) -> Result<(Mat, Vec<f64>)> {
    if gbar.len() != phi.cols || sol.w.len() != phi.cols || sol.residual.len() != phi.rows {
        return Err(VekuaError::ShapeMismatch(format!(
            "ridge vjp expects upstream of length {}, got {}",
            phi.cols,
            gbar.len()
        )));
    }
    let u = sol.solve_system(gbar);
    let grad_y = mat::matvec(phi, &u);

    let mut grad_phi = Mat::zeros(phi.rows, phi.cols);
    let cols = phi.cols;
    let r = &sol.residual;
    let w = &sol.w;
    let phiu = &grad_y;
    mat::fill_rows(&mut grad_phi, true, |first, block| {
        for (k, row) in block.chunks_mut(cols).enumerate() {
            let i = first + k;
            let (ri, pi) = (r[i], phiu[i]);
            for ((g, &uj), &wj) in row.iter_mut().zip(&u).zip(w) {
                *g = -ri * uj - pi * wj;
            }
        }
    });
    Ok((grad_phi, grad_y))
}

/// Fit quality of the *optimal* ridge coefficients and its total derivative.
///
/// Returns `loss = (1/N) ||Phi w* - y||^2`, the total gradient of that loss
/// with respect to `Phi` (accounting for the dependence of `w*` on `Phi`),
/// and the solution itself for reuse.
///
/// The total gradient combines the direct term `(2/N) r w*^T` with the
/// implicit term from [`ridge_vjp`] at `gbar = (2/N) Phi^T r`; fused, row `n`
/// is `r[n] * v - (Phi u)[n] * w*` with `v = (2/N) w* - u`.
pub fn fit_loss_grad(phi: &Mat, y: &[f64], lambda: f64) -> Result<(f64, Mat, RidgeSolution)> {
    let sol = ridge_solve(phi, y, lambda)?;
    let n = phi.rows;
    let cols = phi.cols;
    let loss = mat::mean_sq(&sol.residual);

    let scale = 2.0 / n as f64;
    let mut gbar = mat::matvec_t(phi, &sol.residual);
    for g in &mut gbar {
        *g *= scale;
    }
    let u = sol.solve_system(&gbar);
    let phiu = mat::matvec(phi, &u);
    let v: Vec<f64> = sol
        .w
        .iter()
        .zip(&u)
        .map(|(&wj, &uj)| scale * wj - uj)
        .collect();

    let mut grad = Mat::zeros(n, cols);
    let r = &sol.residual;
    let w = &sol.w;
    mat::fill_rows(&mut grad, true, |first, block| {
        for (k, row) in block.chunks_mut(cols).enumerate() {
            let i = first + k;
            let (ri, pi) = (r[i], phiu[i]);
            for ((g, &vj), &wj) in row.iter_mut().zip(&v).zip(w) {
                *g = ri * vj - pi * wj;
            }
        }
    });
    Ok((loss, grad, sol))
}
