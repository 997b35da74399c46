//! Preconditioned BiCGStab and the grid-specific linear systems built on it.

mod problems;
pub mod spectral;

pub use problems::GridSolvers;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PreconditionerKind {
    Jacobi,
    /// Exact inverse of the constant-coefficient part of the operator.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, max_iter: 10_000, preconditioner: PreconditionerKind::Spectral }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let ok = |t: f64| t > 0.0 && t.is_finite();
        if !ok(self.rel_tol) || !ok(self.abs_tol) || self.max_iter == 0 {
            return Err(SolveError::InvalidConfig(format!(
                "tolerances must be positive and max_iter at least 1 (rel_tol {}, abs_tol {}, max_iter {})",
                self.rel_tol, self.abs_tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("{system}: no convergence after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NotConverged { system: String, iterations: usize, residual: f64, target: f64 },
    #[error("{system}: non-finite values in the iteration")]
    NonFinite { system: String },
    #[error("{system}: right-hand side is incompatible with the nullspace (mean {mean:.3e})")]
    Incompatible { system: String, mean: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

pub struct FnPreconditioner<F: Fn(&[f64], &mut [f64])>(pub F);

impl<F: Fn(&[f64], &mut [f64])> Preconditioner for FnPreconditioner<F> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        (self.0)(r, z)
    }
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling.
pub struct Jacobi {
    pub inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self { inv_diag: diag.iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect() }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the mean; used for operators whose nullspace is the constants.
pub fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    for v in x {
        *v -= m;
    }
}

/// Right-preconditioned BiCGStab.
///
/// Converges when the true residual `||b - A x||_2` drops below
/// `max(rel_tol ||b||_2, abs_tol)`. With `project` set, iterates and
/// residuals are kept in the range of the projection (singular systems).
/// Breakdowns restart the recurrence from the current iterate.
pub fn bicgstab(
    system: &str,
    op: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = op.dim();
    assert_eq!(b.len(), n, "{system}: right-hand side has wrong length");
    let proj = |v: &mut [f64]| {
        if let Some(p) = project {
            p(v)
        }
    };
    let mut bb = b.to_vec();
    proj(&mut bb);
    let target = (cfg.rel_tol * norm(&bb)).max(cfg.abs_tol);

    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => {
            let mut z = vec![0.0; n];
            pc.apply(&bb, &mut z);
            z
        }
    };
    proj(&mut x);

    let residual = |x: &[f64]| {
        let mut r = vec![0.0; n];
        op.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(&bb) {
            *ri = bi - *ri;
        }
        proj(&mut r);
        r
    };

    let mut r = residual(&x);
    let mut res = norm(&r);
    let mut iterations = 0usize;
    let non_finite = || SolveError::NonFinite { system: system.to_string() };

    let (mut p, mut v, mut phat, mut shat, mut s, mut t) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    while res > target && iterations < cfg.max_iter {
        let before = iterations;
        let r_hat = r.clone();
        let (mut rho_old, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
        let mut first = true;
        loop {
            let rho = dot(&r_hat, &r);
            if !rho.is_finite() {
                return Err(non_finite());
            }
            if rho.abs() <= 1e-300 {
                break;
            }
            if first {
                p.copy_from_slice(&r);
                first = false;
            } else {
                let beta = (rho / rho_old) * (alpha / omega);
                for k in 0..n {
                    p[k] = r[k] + beta * (p[k] - omega * v[k]);
                }
            }
            pc.apply(&p, &mut phat);
            proj(&mut phat);
            op.apply(&phat, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 || !rv.is_finite() {
                break;
            }
            alpha = rho / rv;
            for k in 0..n {
                x[k] += alpha * phat[k];
                s[k] = r[k] - alpha * v[k];
            }
            iterations += 1;
            if norm(&s) <= target {
                break;
            }
            pc.apply(&s, &mut shat);
            proj(&mut shat);
            op.apply(&shat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 || !tt.is_finite() {
                r.copy_from_slice(&s);
                break;
            }
            omega = dot(&t, &s) / tt;
            for k in 0..n {
                x[k] += omega * shat[k];
                r[k] = s[k] - omega * t[k];
            }
            let rn = norm(&r);
            if !rn.is_finite() {
                return Err(non_finite());
            }
            if rn <= target || omega == 0.0 || iterations >= cfg.max_iter {
                break;
            }
            rho_old = rho;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(non_finite());
        }
        // restart from the true residual so the stopping test is honest
        r = residual(&x);
        res = norm(&r);
        if iterations == before {
            break;
        }
    }

    let converged = res <= target;
    let report = SolveReport { iterations, final_residual: res, converged };
    if !converged {
        return Err(SolveError::NotConverged { system: system.to_string(), iterations, residual: res, target });
    }
    Ok((x, report))
}
