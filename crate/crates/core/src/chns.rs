//! Cahn-Hilliard / Navier-Stokes two-phase flow.
//!
//! The double-well bulk energy is carried by the quadratic variable
//! `q = (phi^2 - 1 - gamma0) / sqrt(2)`, so the free energy is
//! `eps^2/2 |grad phi|^2 + gamma0/2 phi^2 + q^2/2`. Velocity and pressure
//! are decoupled by an incremental projection whose pressure term is part of
//! the discrete energy.

use crate::eqrid::{EqRidModel, History, SchemeKind, StepContext, StepError};
use crate::grid::{
    convect_b, convect_scalar, divergence, face_average, gradient, laplacian, vector_laplacian, FaceVelocity,
    GridSpec, ScalarField,
};
use crate::linsolve::{remove_mean, GridSolvers, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChnsParams {
    pub rho: f64,
    pub eta: f64,
    pub mobility: f64,
    pub eps: f64,
    pub gamma0: f64,
    /// Relaxation time of the invariant scalar.
    pub relax_time: f64,
}

impl Default for ChnsParams {
    fn default() -> Self {
        Self { rho: 1.0, eta: 1.0, mobility: 1e-3, eps: 0.01, gamma0: 0.0, relax_time: 100.0 }
    }
}

impl ChnsParams {
    pub fn validate(&self) -> Result<(), StepError> {
        let positive = [("rho", self.rho), ("eta", self.eta), ("eps", self.eps), ("relax_time", self.relax_time)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StepError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.mobility >= 0.0 && self.mobility.is_finite()) {
            return Err(StepError::InvalidInput(format!("mobility must be non-negative, got {}", self.mobility)));
        }
        if !(self.gamma0 >= 0.0 && self.gamma0.is_finite()) {
            return Err(StepError::InvalidInput(format!("gamma0 must be non-negative, got {}", self.gamma0)));
        }
        Ok(())
    }
}

/// One time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChnsLevel {
    pub u: FaceVelocity,
    pub pressure: ScalarField,
    pub phi: ScalarField,
    pub q: ScalarField,
}

/// `q(phi)` for the double well.
pub fn auxiliary_q(phi: &ScalarField, gamma0: f64) -> ScalarField {
    phi.map(|p| 0.5 * SQRT_2 * (p * p - 1.0 - gamma0))
}

/// `dq/dphi`.
pub fn q_slope(phi: &ScalarField) -> ScalarField {
    phi.map(|p| SQRT_2 * p)
}

pub struct ChnsModel {
    params: ChnsParams,
    grid: GridSpec,
    solvers: GridSolvers,
    solver: SolverConfig,
}

pub struct ChnsFrozen {
    g: ScalarField,
    gsq: ScalarField,
    conv: ScalarField,
    force: FaceVelocity,
    phi_base: ScalarField,
    q_base: ScalarField,
    u_base: FaceVelocity,
}

/// Solution of one linear system of a step.
#[derive(Debug, Clone)]
pub struct ChnsPart {
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub u: FaceVelocity,
}

impl ChnsModel {
    pub fn new(params: ChnsParams, grid: &GridSpec, solver: SolverConfig) -> Result<Self, StepError> {
        params.validate()?;
        solver.validate()?;
        Ok(Self { params, grid: *grid, solvers: GridSolvers::new(grid), solver })
    }

    pub fn params(&self) -> &ChnsParams {
        &self.params
    }
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    /// Builds the initial level: projects `u0`, sets `q = q(phi0)` and a
    /// zero pressure.
    pub fn init(&self, phi0: ScalarField, u0: FaceVelocity) -> Result<ChnsLevel, StepError> {
        if phi0.grid() != &self.grid || u0.grid() != &self.grid {
            return Err(StepError::InvalidInput("initial fields are not on the model grid".into()));
        }
        let u = project(&self.solvers, &u0, &self.solver)?;
        let q = auxiliary_q(&phi0, self.params.gamma0);
        Ok(ChnsLevel { u, pressure: ScalarField::zeros(&self.grid), phi: phi0, q })
    }

    /// Chemical potential `-eps^2 lap phi + gamma0 phi + q g(phi)`.
    pub fn chemical_potential(&self, phi: &ScalarField, q: &ScalarField) -> ScalarField {
        self.mu_half(phi, q, phi)
    }

    /// Chemical potential at the implicit level with the slope `g` frozen at
    /// the extrapolated field `phi_bar`.
    pub fn mu_half(&self, phi: &ScalarField, q: &ScalarField, phi_bar: &ScalarField) -> ScalarField {
        self.linear_mu(phi, q, &q_slope(phi_bar))
    }

    fn linear_mu(&self, phi: &ScalarField, q: &ScalarField, g: &ScalarField) -> ScalarField {
        let eps2 = self.params.eps * self.params.eps;
        let mut mu = laplacian(phi).scaled(-eps2);
        mu.axpy(self.params.gamma0, phi);
        mu.axpy(1.0, &q.zip_map(g, |a, b| a * b));
        mu
    }

    /// Reversible forcing of the momentum equation,
    /// `rho B(u, u) + phi grad mu` on faces.
    pub fn reversible_momentum(&self, u: &FaceVelocity, phi: &ScalarField, mu: &ScalarField) -> FaceVelocity {
        let mut f = convect_b(u, u).scaled(self.params.rho);
        f.axpy(1.0, &face_average(phi).times(&gradient(mu)));
        f.zero_walls();
        f
    }

    /// Crank-Nicolson modified energy of a single level (no scalar part).
    pub fn level_energy(&self, lvl: &ChnsLevel, dt: f64) -> f64 {
        self.quadratic_energy(SchemeKind::CrankNicolson, dt, lvl, lvl)
    }

    /// Original free energy `eps^2/2 |grad phi|^2 + 1/4 (phi^2 - 1)^2`
    /// (plus `gamma0/2 phi^2` shifted consistently with `q`).
    pub fn free_energy(&self, phi: &ScalarField) -> f64 {
        let eps2 = self.params.eps * self.params.eps;
        let grad = gradient(phi);
        let q = auxiliary_q(phi, self.params.gamma0);
        let bulk = phi.zip_map(&q, |p, q| 0.5 * self.params.gamma0 * p * p + 0.5 * q * q);
        0.5 * eps2 * grad.inner(&grad) + bulk.integral()
    }
}

/// Divergence with its round-off mean removed; the exact mean is zero.
fn mean_free_divergence(w: &FaceVelocity) -> ScalarField {
    let mut div = divergence(w);
    remove_mean(div.data_mut());
    div
}

/// Leray projection of a face velocity; returns the divergence-free part.
pub fn project(solvers: &GridSolvers, w: &FaceVelocity, cfg: &SolverConfig) -> Result<FaceVelocity, StepError> {
    let div = mean_free_divergence(w);
    if div.max_abs() == 0.0 {
        return Ok(w.clone());
    }
    let (phi, _) = solvers.solve_poisson_neumann(&div, cfg)?;
    let mut out = w.clone();
    out.axpy(-1.0, &gradient(&phi));
    out.zero_walls();
    Ok(out)
}

fn combine(w: (f64, f64), a: &ScalarField, b: &ScalarField) -> ScalarField {
    ScalarField::lincomb(w.0, a, w.1, b)
}

fn combine_u(w: (f64, f64), a: &FaceVelocity, b: &FaceVelocity) -> FaceVelocity {
    FaceVelocity::lincomb(w.0, a, w.1, b)
}

/// Incremental projection shared by both models: from the provisional
/// velocity `uhat` and the old pressure returns `(u, p)` with
/// `rho m (u - uhat) = -grad (p - p_old)` and `div u = 0`.
pub(crate) fn pressure_correction(
    solvers: &GridSolvers,
    cfg: &SolverConfig,
    rho: f64,
    mass: f64,
    uhat: &FaceVelocity,
    p_old: &ScalarField,
) -> Result<(FaceVelocity, ScalarField), StepError> {
    let rhs = mean_free_divergence(uhat).scaled(rho * mass);
    let (dp, _) = solvers.solve_poisson_neumann(&rhs, cfg)?;
    let mut u = uhat.clone();
    u.axpy(-1.0 / (rho * mass), &gradient(&dp));
    u.zero_walls();
    let mut p = p_old.clone();
    p.axpy(1.0, &dp);
    Ok((u, p))
}

/// Kinetic plus pressure contribution to the modified energy.
pub(crate) fn flow_energy(
    scheme: SchemeKind,
    dt: f64,
    rho: f64,
    u: &FaceVelocity,
    u_prev: &FaceVelocity,
    p: &ScalarField,
) -> f64 {
    let gp = gradient(p);
    match scheme {
        SchemeKind::CrankNicolson => 0.5 * rho * u.inner(u) + dt * dt / (8.0 * rho) * gp.inner(&gp),
        SchemeKind::ImplicitEuler => 0.5 * rho * u.inner(u) + dt * dt / (2.0 * rho) * gp.inner(&gp),
        SchemeKind::Bdf2 => {
            let x = FaceVelocity::lincomb(2.0, u, -1.0, u_prev);
            0.25 * rho * (u.inner(u) + x.inner(&x)) + dt * dt / (3.0 * rho) * gp.inner(&gp)
        }
    }
}

/// `sum 1/2 (a, a)`-type energy in the scheme's form for a quadratic
/// functional `e`.
pub(crate) fn two_level<T>(scheme: SchemeKind, cur: &T, prev: &T, e: impl Fn(&T) -> f64, lin: impl Fn(&T, &T) -> T) -> f64 {
    match scheme {
        SchemeKind::CrankNicolson | SchemeKind::ImplicitEuler => e(cur),
        SchemeKind::Bdf2 => 0.5 * (e(cur) + e(&lin(cur, prev))),
    }
}

impl EqRidModel for ChnsModel {
    type Level = ChnsLevel;
    type Frozen = ChnsFrozen;
    type Part = ChnsPart;

    fn freeze(&self, ctx: &StepContext, h: &History<ChnsLevel>) -> Result<ChnsFrozen, StepError> {
        let (cur, prev) = (&h.current, &h.previous);
        let we = ctx.extrapolation();
        let wb = ctx.base();
        let u_bar = combine_u(we, &cur.u, &prev.u);
        let phi_bar = combine(we, &cur.phi, &prev.phi);
        let q_bar = combine(we, &cur.q, &prev.q);
        let mu_bar = self.chemical_potential(&phi_bar, &q_bar);
        let g = q_slope(&phi_bar);
        let gsq = g.map(|x| x * x);
        let mut conv = convect_scalar(&u_bar, &phi_bar);
        // exactly conservative up to round-off; keep the round-off out of the mass
        remove_mean(conv.data_mut());
        let force = self.reversible_momentum(&u_bar, &phi_bar, &mu_bar);
        Ok(ChnsFrozen {
            g,
            gsq,
            conv,
            force,
            phi_base: combine(wb, &cur.phi, &prev.phi),
            q_base: combine(wb, &cur.q, &prev.q),
            u_base: combine_u(wb, &cur.u, &prev.u),
        })
    }

    fn solve_irreversible_part(
        &self,
        ctx: &StepContext,
        h: &History<ChnsLevel>,
        fz: &ChnsFrozen,
    ) -> Result<ChnsPart, StepError> {
        let p = &self.params;
        let m = ctx.mass;
        // solve for the increment over the base state so the solver
        // tolerance applies to the change, not to the state itself
        let rhs_phi = ScalarField::zeros(&self.grid);
        let rhs_mu = self.linear_mu(&fz.phi_base, &fz.q_base, &fz.g);
        let (dphi, mu, _) = self.solvers.solve_ch_block(
            m,
            p.mobility,
            p.eps * p.eps,
            p.gamma0,
            &fz.gsq,
            &rhs_phi,
            &rhs_mu,
            &self.solver,
        )?;
        let phi = ScalarField::lincomb(1.0, &fz.phi_base, 1.0, &dphi);
        let mut rhs_u = vector_laplacian(&fz.u_base).scaled(p.eta);
        rhs_u.axpy(-1.0, &gradient(&h.current.pressure));
        rhs_u.zero_walls();
        let (du, _) = self.solvers.solve_helmholtz_velocity(m * p.rho, p.eta, &rhs_u, &self.solver)?;
        let u = FaceVelocity::lincomb(1.0, &fz.u_base, 1.0, &du);
        Ok(ChnsPart { phi, mu, u })
    }

    fn solve_reversible_forced_part(
        &self,
        ctx: &StepContext,
        _h: &History<ChnsLevel>,
        fz: &ChnsFrozen,
    ) -> Result<ChnsPart, StepError> {
        let p = &self.params;
        let m = ctx.mass;
        let e = ctx.exp_factor;
        let rhs_phi = fz.conv.scaled(-e);
        let rhs_mu = ScalarField::zeros(&self.grid);
        let (phi, mu, _) = self.solvers.solve_ch_block(
            m,
            p.mobility,
            p.eps * p.eps,
            p.gamma0,
            &fz.gsq,
            &rhs_phi,
            &rhs_mu,
            &self.solver,
        )?;
        let rhs_u = fz.force.scaled(-e);
        let (u, _) = self.solvers.solve_helmholtz_velocity(m * p.rho, p.eta, &rhs_u, &self.solver)?;
        Ok(ChnsPart { phi, mu, u })
    }

    fn reversible_power(&self, ctx: &StepContext, fz: &ChnsFrozen, part: &ChnsPart) -> f64 {
        ctx.exp_factor * (part.u.inner(&fz.force) + part.mu.inner(&fz.conv))
    }

    fn assemble(&self, p1: &ChnsPart, p2: &ChnsPart, s: f64) -> ChnsPart {
        ChnsPart {
            phi: ScalarField::lincomb(1.0, &p1.phi, s, &p2.phi),
            mu: ScalarField::lincomb(1.0, &p1.mu, s, &p2.mu),
            u: FaceVelocity::lincomb(1.0, &p1.u, s, &p2.u),
        }
    }

    fn irreversible_dissipation(&self, _ctx: &StepContext, _fz: &ChnsFrozen, star: &ChnsPart) -> f64 {
        let gm = gradient(&star.mu);
        self.params.mobility * gm.inner(&gm) - self.params.eta * vector_laplacian(&star.u).inner(&star.u)
    }

    fn complete(
        &self,
        ctx: &StepContext,
        h: &History<ChnsLevel>,
        fz: &ChnsFrozen,
        star: ChnsPart,
    ) -> Result<ChnsLevel, StepError> {
        let wc = ctx.completion();
        let cur = &h.current;
        let phi = combine(wc, &star.phi, &cur.phi);
        let dphi = ScalarField::lincomb(1.0, &phi, -1.0, &fz.phi_base);
        let mut q = fz.q_base.clone();
        q.axpy(1.0, &dphi.zip_map(&fz.g, |a, b| a * b));
        let uhat = combine_u(wc, &star.u, &cur.u);
        let (u, pressure) =
            pressure_correction(&self.solvers, &self.solver, self.params.rho, ctx.mass, &uhat, &cur.pressure)?;
        if phi.data().iter().any(|x| !x.is_finite()) || u.max_abs().is_nan() {
            return Err(StepError::NonFinite("phase field or velocity".into()));
        }
        Ok(ChnsLevel { u, pressure, phi, q })
    }

    fn quadratic_energy(&self, scheme: SchemeKind, dt: f64, cur: &ChnsLevel, prev: &ChnsLevel) -> f64 {
        let p = &self.params;
        let eps2 = p.eps * p.eps;
        let flow = flow_energy(scheme, dt, p.rho, &cur.u, &prev.u, &cur.pressure);
        let lin = |a: &ScalarField, b: &ScalarField| ScalarField::lincomb(2.0, a, -1.0, b);
        let grad = |f: &ScalarField| {
            let g = gradient(f);
            0.5 * eps2 * g.inner(&g)
        };
        let bulk_phi = |f: &ScalarField| 0.5 * p.gamma0 * f.inner(f);
        let bulk_q = |f: &ScalarField| 0.5 * f.inner(f);
        flow + two_level(scheme, &cur.phi, &prev.phi, grad, lin)
            + two_level(scheme, &cur.phi, &prev.phi, bulk_phi, lin)
            + two_level(scheme, &cur.q, &prev.q, bulk_q, lin)
    }

    fn invariants(&self, level: &ChnsLevel) -> (f64, f64) {
        (level.phi.integral(), divergence(&level.u).max_abs())
    }
}

/// Layered initial data `0.9 (y/Ly - 1/2)` plus seeded uniform noise of the
/// given amplitude.
pub fn coarsening_ic(grid: &GridSpec, seed: u64, noise: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ly = grid.ly();
    let mut phi = ScalarField::from_fn(grid, |_, y| 0.9 * (y / ly - 0.5));
    for v in phi.data_mut() {
        *v += noise * rng.gen_range(-1.0..1.0);
    }
    phi
}

/// Smooth single-mode data compatible with walls in y.
pub fn smooth_ic(grid: &GridSpec, amplitude: f64, offset: f64) -> ScalarField {
    let (lx, ly) = (grid.lx(), grid.ly());
    ScalarField::from_fn(grid, |x, y| offset + amplitude * (2.0 * PI * x / lx).cos() * (PI * y / ly).cos())
}

/// Seven drops of different radii in the minority phase; the smaller ones
/// dissolve into the larger ones.
pub fn ostwald_ic(grid: &GridSpec, eps: f64) -> ScalarField {
    let (lx, ly) = (grid.lx(), grid.ly());
    let drops = [
        (0.50, 0.50, 0.20),
        (0.25, 0.75, 0.13),
        (0.75, 0.75, 0.08),
        (0.25, 0.25, 0.10),
        (0.75, 0.25, 0.12),
        (0.50, 0.86, 0.06),
        (0.90, 0.50, 0.07),
    ];
    let width = SQRT_2 * eps.max(0.75 * grid.hx().max(grid.hy()));
    ScalarField::from_fn(grid, |x, y| {
        let mut phi = -1.0;
        for &(cx, cy, r) in &drops {
            let d = (x - cx * lx).hypot(y - cy * ly);
            phi += 1.0 + ((r * lx.min(ly) - d) / width).tanh();
        }
        phi
    })
}

/// Divergence-free smooth velocity from a stream function vanishing on the
/// y-boundaries.
pub fn smooth_velocity(grid: &GridSpec, amplitude: f64) -> FaceVelocity {
    let (lx, ly) = (grid.lx(), grid.ly());
    FaceVelocity::from_streamfunction(grid, |x, y| {
        amplitude * (2.0 * PI * x / lx).sin() * (PI * y / ly).sin().powi(2)
    })
}
