use super::spectral::{Basis1d, SpectralBasis, Stencil1d};
use super::{
    bicgstab, remove_mean, FnOperator, FnPreconditioner, Jacobi, Preconditioner, PreconditionerKind, SolveError,
    SolveReport, SolverConfig,
};
use crate::grid::{laplacian, vector_laplacian, CellVector, FaceVelocity, GridSpec, ScalarField};

/// Linear systems arising in one time step, with cached eigenbases for the
/// constant-coefficient preconditioners.
#[derive(Debug, Clone)]
pub struct GridSolvers {
    grid: GridSpec,
    cells: SpectralBasis,
    vel_u: SpectralBasis,
    vel_v: SpectralBasis,
}

impl GridSolvers {
    pub fn new(grid: &GridSpec) -> Self {
        let (nx, ny, hx, hy) = (grid.nx(), grid.ny(), grid.hx(), grid.hy());
        let bx = Basis1d::new(nx, hx, Stencil1d::Periodic);
        let (cy, uy, vy) = if grid.is_wall() {
            (
                Basis1d::new(ny, hy, Stencil1d::Reflect),
                Basis1d::new(ny, hy, Stencil1d::OddReflect),
                Basis1d::new(ny - 1, hy, Stencil1d::Dirichlet),
            )
        } else {
            let p = Basis1d::new(ny, hy, Stencil1d::Periodic);
            (p.clone(), p.clone(), p)
        };
        Self {
            grid: *grid,
            cells: SpectralBasis::new(bx.clone(), cy),
            vel_u: SpectralBasis::new(bx.clone(), uy),
            vel_v: SpectralBasis::new(bx, vy),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Solves `lap p = rhs` with homogeneous Neumann (or periodic) data. The
    /// right-hand side must have zero mean up to `max(abs_tol, rel_tol rms)`,
    /// or up to summation round-off when that is larger; the remainder is
    /// projected out. The solution has zero mean.
    pub fn solve_poisson_neumann(
        &self,
        rhs: &ScalarField,
        cfg: &SolverConfig,
    ) -> Result<(ScalarField, SolveReport), SolveError> {
        let g = self.grid;
        let n = g.cells();
        let mean = rhs.mean();
        let rms = (rhs.data().iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        let roundoff = n as f64 * f64::EPSILON * rhs.max_abs();
        if mean.abs() > cfg.abs_tol.max(cfg.rel_tol * rms).max(roundoff) {
            return Err(SolveError::Incompatible { system: "pressure Poisson".into(), mean });
        }
        let op = FnOperator {
            dim: n,
            f: |x: &[f64], y: &mut [f64]| {
                let f = ScalarField::from_vec(&g, x.to_vec()).expect("length");
                y.copy_from_slice(laplacian(&f).data());
            },
        };
        let spectral = FnPreconditioner(|r: &[f64], z: &mut [f64]| {
            self.cells.apply_fn(r, z, |l| if l == 0.0 { 0.0 } else { 1.0 / l })
        });
        let jacobi = Jacobi::new(&self.laplacian_diagonal());
        let pc: &dyn Preconditioner = match cfg.preconditioner {
            PreconditionerKind::Spectral => &spectral,
            PreconditionerKind::Jacobi => &jacobi,
        };
        let project = |v: &mut [f64]| remove_mean(v);
        let (x, rep) = bicgstab("pressure Poisson", &op, pc, rhs.data(), None, cfg, Some(&project))?;
        Ok((ScalarField::from_vec(&g, x).expect("length"), rep))
    }

    fn laplacian_diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let mut d = vec![-2.0 * cx - 2.0 * cy; g.cells()];
        if g.is_wall() {
            for i in 0..g.nx() {
                d[g.idx(i, 0)] += cy;
                d[g.idx(i, g.ny() - 1)] += cy;
            }
        }
        d
    }

    /// Solves `(alpha - eta lap) w = rhs` for a staggered velocity with the
    /// grid's no-slip or periodic conditions.
    pub fn solve_helmholtz_velocity(
        &self,
        alpha: f64,
        eta: f64,
        rhs: &FaceVelocity,
        cfg: &SolverConfig,
    ) -> Result<(FaceVelocity, SolveReport), SolveError> {
        let g = self.grid;
        let n = g.cells();
        let b = rhs.pack();
        let op = FnOperator {
            dim: b.len(),
            f: |x: &[f64], y: &mut [f64]| {
                let w = FaceVelocity::unpack(&g, x);
                let lw = vector_laplacian(&w);
                let lp = lw.pack();
                for k in 0..x.len() {
                    y[k] = alpha * x[k] - eta * lp[k];
                }
            },
        };
        let spectral = FnPreconditioner(|r: &[f64], z: &mut [f64]| {
            let s = |l: f64| 1.0 / (alpha - eta * l);
            self.vel_u.apply_fn(&r[..n], &mut z[..n], s);
            self.vel_v.apply_fn(&r[n..], &mut z[n..], s);
        });
        let jacobi = {
            let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
            let mut d = vec![alpha + eta * (2.0 * cx + 2.0 * cy); b.len()];
            if g.is_wall() {
                for i in 0..g.nx() {
                    d[g.idx(i, 0)] += eta * cy;
                    d[g.idx(i, g.ny() - 1)] += eta * cy;
                }
            }
            Jacobi::new(&d)
        };
        let pc: &dyn Preconditioner = match cfg.preconditioner {
            PreconditionerKind::Spectral => &spectral,
            PreconditionerKind::Jacobi => &jacobi,
        };
        let (x, rep) = bicgstab("velocity Helmholtz", &op, pc, &b, None, cfg, None)?;
        Ok((FaceVelocity::unpack(&g, &x), rep))
    }

    /// Solves the Cahn-Hilliard block
    ///
    /// ```text
    /// a0 phi - m lap mu                                 = rhs_phi
    /// mu + eps2 lap phi - gamma0 phi - gsq phi          = rhs_mu
    /// ```
    ///
    /// by eliminating `mu`. The iteration runs on the fourth-order equation
    /// for `phi`, preconditioned by its constant-coefficient version with
    /// `gsq` replaced by its mean; `mu` then follows exactly from the second
    /// row. The integral of `phi` is set to the value implied by the first
    /// row so solver tolerance cannot leak mass.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_ch_block(
        &self,
        a0: f64,
        mobility: f64,
        eps2: f64,
        gamma0: f64,
        gsq: &ScalarField,
        rhs_phi: &ScalarField,
        rhs_mu: &ScalarField,
        cfg: &SolverConfig,
    ) -> Result<(ScalarField, ScalarField, SolveReport), SolveError> {
        let g = self.grid;
        let n = g.cells();
        let coef = gsq.map(|v| v + gamma0);
        let mut b = rhs_phi.clone();
        b.axpy(mobility, &laplacian(rhs_mu));
        let op = FnOperator {
            dim: n,
            f: |x: &[f64], y: &mut [f64]| {
                let phi = ScalarField::from_vec(&g, x.to_vec()).expect("length");
                let mut inner = laplacian(&phi).scaled(eps2);
                for (t, (c, p)) in inner.data_mut().iter_mut().zip(coef.data().iter().zip(x)) {
                    *t -= c * p;
                }
                let outer = laplacian(&inner);
                for k in 0..n {
                    y[k] = a0 * x[k] + mobility * outer.data()[k];
                }
            },
        };
        let cbar = coef.mean();
        let pc = FnPreconditioner(|r: &[f64], z: &mut [f64]| {
            self.cells.apply_fn(r, z, |l| 1.0 / (a0 + mobility * (eps2 * l * l - cbar * l)))
        });
        let (x, rep) = bicgstab("Cahn-Hilliard block", &op, &pc, b.data(), None, cfg, None)?;
        let mut phi = ScalarField::from_vec(&g, x).expect("length");
        phi.add_constant((rhs_phi.mean() / a0) - phi.mean());
        let mut mu = rhs_mu.clone();
        mu.axpy(-eps2, &laplacian(&phi));
        for (m, (c, p)) in mu.data_mut().iter_mut().zip(coef.data().iter().zip(phi.data())) {
            *m += c * p;
        }
        Ok((phi, mu, rep))
    }

    /// Solves `(alpha - beta lap) p + gamma g (g . p) = rhs` for a cell
    /// vector `p`, with reflecting (or periodic) boundaries.
    pub fn solve_director_block(
        &self,
        alpha: f64,
        beta: f64,
        gamma: f64,
        g: &CellVector,
        rhs: &CellVector,
        cfg: &SolverConfig,
    ) -> Result<(CellVector, SolveReport), SolveError> {
        let grid = self.grid;
        let n = grid.cells();
        let (gx, gy) = (g.x.data(), g.y.data());
        let op = FnOperator {
            dim: 2 * n,
            f: |x: &[f64], y: &mut [f64]| {
                let px = ScalarField::from_vec(&grid, x[..n].to_vec()).expect("length");
                let py = ScalarField::from_vec(&grid, x[n..].to_vec()).expect("length");
                let (lx, ly) = (laplacian(&px), laplacian(&py));
                for k in 0..n {
                    let gp = gx[k] * x[k] + gy[k] * x[n + k];
                    y[k] = alpha * x[k] - beta * lx.data()[k] + gamma * gx[k] * gp;
                    y[n + k] = alpha * x[n + k] - beta * ly.data()[k] + gamma * gy[k] * gp;
                }
            },
        };
        let gbar = 0.5 * g.dot(g).mean();
        let pc = FnPreconditioner(|r: &[f64], z: &mut [f64]| {
            let s = |l: f64| 1.0 / (alpha + gamma * gbar - beta * l);
            self.cells.apply_fn(&r[..n], &mut z[..n], s);
            self.cells.apply_fn(&r[n..], &mut z[n..], s);
        });
        let mut b = rhs.x.data().to_vec();
        b.extend_from_slice(rhs.y.data());
        let (mut x, rep) = bicgstab("director block", &op, &pc, &b, None, cfg, None)?;
        let y = x.split_off(n);
        Ok((
            CellVector {
                x: ScalarField::from_vec(&grid, x).expect("length"),
                y: ScalarField::from_vec(&grid, y).expect("length"),
            },
            rep,
        ))
    }
}
