//! Ericksen-Leslie hydrodynamics of a nematic with a vector order parameter
//! (the director `d`), using the same quadratization and decoupling as the
//! two-phase model.
//!
//! Bulk energy `(|d|^2 - 1)^2 / (4 eps^2)` is carried by
//! `q = (|d|^2 - 1 - eps^2 gamma0) / (sqrt(2) eps)`. The molecular field is
//! `h = K lap d - gamma0 d - q g(d)` with `g = dq/dd`. Director transport
//! `u.grad d - (W + a D) d` and the elastic force are discrete adjoints of
//! each other, so the reversible coupling exchanges energy exactly.

use crate::chns::{flow_energy, pressure_correction, project, two_level};
use crate::eqrid::{EqRidModel, History, SchemeKind, StepContext, StepError};
use crate::grid::{
    cell_gradient, convect_b, divergence, gradient, laplacian, split_gradient, vector_laplacian, CellTensor,
    CellVector, FaceVelocity, GridSpec, ScalarField, VelocityGradientOps,
};
use crate::linsolve::{GridSolvers, SolverConfig};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElParams {
    pub rho: f64,
    pub eta: f64,
    pub mobility: f64,
    pub eps: f64,
    /// Tumbling / aligning parameter multiplying the strain rate.
    pub alignment: f64,
    /// One-constant Frank elasticity.
    pub k_frank: f64,
    pub gamma0: f64,
    pub relax_time: f64,
}

impl Default for ElParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eta: 100.0,
            mobility: 1.0,
            eps: 0.1f64.sqrt(),
            alignment: 1.2,
            k_frank: 0.01,
            gamma0: 0.0,
            relax_time: 0.5,
        }
    }
}

impl ElParams {
    pub fn validate(&self) -> Result<(), StepError> {
        let positive = [
            ("rho", self.rho),
            ("eta", self.eta),
            ("eps", self.eps),
            ("relax_time", self.relax_time),
            ("k_frank", self.k_frank),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StepError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("mobility", self.mobility), ("gamma0", self.gamma0)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(StepError::InvalidInput(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.alignment.is_finite() {
            return Err(StepError::InvalidInput("alignment must be finite".into()));
        }
        Ok(())
    }

    /// Energy shift making the modified energy equal the original one for
    /// consistent `q`.
    pub fn energy_offset(&self, area: f64) -> f64 {
        area * (self.eps * self.eps * self.gamma0 * self.gamma0 / 4.0 + self.gamma0 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElLevel {
    pub u: FaceVelocity,
    pub pressure: ScalarField,
    pub director: CellVector,
    pub q: ScalarField,
}

pub fn auxiliary_q(d: &CellVector, eps: f64, gamma0: f64) -> ScalarField {
    d.dot(d).map(|s| (s - 1.0 - eps * eps * gamma0) / (SQRT_2 * eps))
}

/// `dq/dd`.
pub fn q_slope(d: &CellVector, eps: f64) -> CellVector {
    d.scaled(SQRT_2 / eps)
}

/// Director transport `u.grad d - (W + a D) d` from a precomputed velocity
/// gradient.
pub fn transport(vg: &crate::grid::VelocityGradient, d: &CellVector, alignment: f64) -> CellVector {
    let (strain, vort) = split_gradient(&vg.l);
    let grad_x = cell_gradient(&d.x);
    let grad_y = cell_gradient(&d.y);
    let ux = &vg.velocity.x;
    let uy = &vg.velocity.y;
    let adv = CellVector {
        x: ScalarField::lincomb(1.0, &ux.zip_map(&grad_x.x, |a, b| a * b), 1.0, &uy.zip_map(&grad_x.y, |a, b| a * b)),
        y: ScalarField::lincomb(1.0, &ux.zip_map(&grad_y.x, |a, b| a * b), 1.0, &uy.zip_map(&grad_y.y, |a, b| a * b)),
    };
    let rot = CellTensor {
        xx: ScalarField::lincomb(1.0, &vort.xx, alignment, &strain.xx),
        xy: ScalarField::lincomb(1.0, &vort.xy, alignment, &strain.xy),
        yx: ScalarField::lincomb(1.0, &vort.yx, alignment, &strain.yx),
        yy: ScalarField::lincomb(1.0, &vort.yy, alignment, &strain.yy),
    };
    let mut out = adv;
    out.axpy(-1.0, &rot.apply(d));
    out
}

/// Elastic stress `1/2 (d h^T - h d^T) - a/2 (d h^T + h d^T)`.
pub fn elastic_stress(d: &CellVector, h: &CellVector, alignment: f64) -> CellTensor {
    let outer = |a: &ScalarField, b: &ScalarField| a.zip_map(b, |x, y| x * y);
    let comp = |di: &ScalarField, dj: &ScalarField, hi: &ScalarField, hj: &ScalarField| {
        let dh = outer(di, hj);
        let hd = outer(hi, dj);
        dh.zip_map(&hd, |a, b| 0.5 * (a - b) - 0.5 * alignment * (a + b))
    };
    CellTensor {
        xx: comp(&d.x, &d.x, &h.x, &h.x),
        xy: comp(&d.x, &d.y, &h.x, &h.y),
        yx: comp(&d.y, &d.x, &h.y, &h.x),
        yy: comp(&d.y, &d.y, &h.y, &h.y),
    }
}

/// Elastic body force `div sigma - (grad d)^T h` on faces, built as the
/// exact negative adjoint of [`transport`] with respect to the velocity.
pub fn elastic_force(ops: &VelocityGradientOps, d: &CellVector, h: &CellVector, alignment: f64) -> FaceVelocity {
    let sigma = elastic_stress(d, h, alignment);
    let gx = cell_gradient(&d.x);
    let gy = cell_gradient(&d.y);
    // (grad d)^T h at cells, paired with the cell velocity
    let a = CellVector {
        x: ScalarField::lincomb(1.0, &h.x.zip_map(&gx.x, |a, b| a * b), 1.0, &h.y.zip_map(&gy.x, |a, b| a * b)),
        y: ScalarField::lincomb(1.0, &h.x.zip_map(&gx.y, |a, b| a * b), 1.0, &h.y.zip_map(&gy.y, |a, b| a * b)),
    };
    let neg = |t: &ScalarField| t.scaled(-1.0);
    let m = CellTensor { xx: neg(&sigma.xx), xy: neg(&sigma.xy), yx: neg(&sigma.yx), yy: neg(&sigma.yy) };
    let mut f = ops.adjoint(&a.scaled(-1.0), &m);
    f.zero_walls();
    f
}

pub struct ElModel {
    params: ElParams,
    grid: GridSpec,
    solvers: GridSolvers,
    vel_ops: VelocityGradientOps,
    solver: SolverConfig,
}

pub struct ElFrozen {
    g: CellVector,
    transport: CellVector,
    force: FaceVelocity,
    d_base: CellVector,
    q_base: ScalarField,
    u_base: FaceVelocity,
}

#[derive(Debug, Clone)]
pub struct ElPart {
    pub director: CellVector,
    pub h: CellVector,
    pub u: FaceVelocity,
}

impl ElModel {
    pub fn new(params: ElParams, grid: &GridSpec, solver: SolverConfig) -> Result<Self, StepError> {
        params.validate()?;
        solver.validate()?;
        Ok(Self { params, grid: *grid, solvers: GridSolvers::new(grid), vel_ops: VelocityGradientOps::new(grid), solver })
    }

    pub fn params(&self) -> &ElParams {
        &self.params
    }
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn velocity_ops(&self) -> &VelocityGradientOps {
        &self.vel_ops
    }

    pub fn init(&self, d0: CellVector, u0: FaceVelocity) -> Result<ElLevel, StepError> {
        if d0.grid() != &self.grid || u0.grid() != &self.grid {
            return Err(StepError::InvalidInput("initial fields are not on the model grid".into()));
        }
        let u = project(&self.solvers, &u0, &self.solver)?;
        let q = auxiliary_q(&d0, self.params.eps, self.params.gamma0);
        Ok(ElLevel { u, pressure: ScalarField::zeros(&self.grid), director: d0, q })
    }

    /// Molecular field `K lap d - gamma0 d - q g(d)`.
    pub fn molecular_field(&self, d: &CellVector, q: &ScalarField) -> CellVector {
        let p = &self.params;
        let g = q_slope(d, p.eps);
        let mut h = CellVector { x: laplacian(&d.x), y: laplacian(&d.y) }.scaled(p.k_frank);
        h.axpy(-p.gamma0, d);
        h.axpy(-1.0, &g.times(q));
        h
    }

    /// Original energy: Frank elasticity plus the bulk term.
    pub fn free_energy(&self, d: &CellVector) -> f64 {
        let p = &self.params;
        let (gx, gy) = (gradient(&d.x), gradient(&d.y));
        let q = auxiliary_q(d, p.eps, p.gamma0);
        let bulk = d.dot(d).zip_map(&q, |s, q| 0.5 * p.gamma0 * s + 0.5 * q * q);
        0.5 * p.k_frank * (gx.inner(&gx) + gy.inner(&gy)) + bulk.integral() - p.energy_offset(self.grid.area())
    }
}

fn combine_v(w: (f64, f64), a: &CellVector, b: &CellVector) -> CellVector {
    CellVector::lincomb(w.0, a, w.1, b)
}

impl EqRidModel for ElModel {
    type Level = ElLevel;
    type Frozen = ElFrozen;
    type Part = ElPart;

    fn freeze(&self, ctx: &StepContext, h: &History<ElLevel>) -> Result<ElFrozen, StepError> {
        let p = &self.params;
        let (cur, prev) = (&h.current, &h.previous);
        let we = ctx.extrapolation();
        let wb = ctx.base();
        let u_bar = FaceVelocity::lincomb(we.0, &cur.u, we.1, &prev.u);
        let d_bar = combine_v(we, &cur.director, &prev.director);
        let q_bar = ScalarField::lincomb(we.0, &cur.q, we.1, &prev.q);
        let h_bar = self.molecular_field(&d_bar, &q_bar);
        let vg = self.vel_ops.apply(&u_bar);
        let tr = transport(&vg, &d_bar, p.alignment);
        let mut force = convect_b(&u_bar, &u_bar).scaled(p.rho);
        force.axpy(-1.0, &elastic_force(&self.vel_ops, &d_bar, &h_bar, p.alignment));
        force.zero_walls();
        Ok(ElFrozen {
            g: q_slope(&d_bar, p.eps),
            transport: tr,
            force,
            d_base: combine_v(wb, &cur.director, &prev.director),
            q_base: ScalarField::lincomb(wb.0, &cur.q, wb.1, &prev.q),
            u_base: FaceVelocity::lincomb(wb.0, &cur.u, wb.1, &prev.u),
        })
    }

    fn solve_irreversible_part(
        &self,
        ctx: &StepContext,
        h: &History<ElLevel>,
        fz: &ElFrozen,
    ) -> Result<ElPart, StepError> {
        let p = &self.params;
        let m = ctx.mass;
        // increments over the base state, as in the phase-field model
        let gd = fz.g.dot(&fz.d_base);
        let h_base = self.linear_molecular_field(&fz.d_base, &fz.q_base, &fz.g);
        let (dd, _) = self.solvers.solve_director_block(
            m + p.mobility * p.gamma0,
            p.mobility * p.k_frank,
            p.mobility,
            &fz.g,
            &h_base.scaled(p.mobility),
            &self.solver,
        )?;
        let d1 = CellVector::lincomb(1.0, &fz.d_base, 1.0, &dd);
        // h1 = K lap d1 - gamma0 d1 - (q_base + g.(d1 - d_base)) g
        let qlin = ScalarField::lincomb(1.0, &fz.q_base, 1.0, &fz.g.dot(&d1).zip_map(&gd, |a, b| a - b));
        let h1 = self.linear_molecular_field(&d1, &qlin, &fz.g);
        let mut rhs_u = vector_laplacian(&fz.u_base).scaled(p.eta);
        rhs_u.axpy(-1.0, &gradient(&h.current.pressure));
        rhs_u.zero_walls();
        let (du, _) = self.solvers.solve_helmholtz_velocity(m * p.rho, p.eta, &rhs_u, &self.solver)?;
        let u = FaceVelocity::lincomb(1.0, &fz.u_base, 1.0, &du);
        Ok(ElPart { director: d1, h: h1, u })
    }

    fn solve_reversible_forced_part(
        &self,
        ctx: &StepContext,
        _h: &History<ElLevel>,
        fz: &ElFrozen,
    ) -> Result<ElPart, StepError> {
        let p = &self.params;
        let m = ctx.mass;
        let e = ctx.exp_factor;
        let rhs = fz.transport.scaled(-e);
        let (d2, _) = self.solvers.solve_director_block(
            m + p.mobility * p.gamma0,
            p.mobility * p.k_frank,
            p.mobility,
            &fz.g,
            &rhs,
            &self.solver,
        )?;
        let qlin = fz.g.dot(&d2);
        let h2 = self.linear_molecular_field(&d2, &qlin, &fz.g);
        let (u, _) = self.solvers.solve_helmholtz_velocity(m * p.rho, p.eta, &fz.force.scaled(-e), &self.solver)?;
        Ok(ElPart { director: d2, h: h2, u })
    }

    fn reversible_power(&self, ctx: &StepContext, fz: &ElFrozen, part: &ElPart) -> f64 {
        ctx.exp_factor * (part.u.inner(&fz.force) - part.h.inner(&fz.transport))
    }

    fn assemble(&self, p1: &ElPart, p2: &ElPart, s: f64) -> ElPart {
        ElPart {
            director: CellVector::lincomb(1.0, &p1.director, s, &p2.director),
            h: CellVector::lincomb(1.0, &p1.h, s, &p2.h),
            u: FaceVelocity::lincomb(1.0, &p1.u, s, &p2.u),
        }
    }

    fn irreversible_dissipation(&self, _ctx: &StepContext, _fz: &ElFrozen, star: &ElPart) -> f64 {
        self.params.mobility * star.h.inner(&star.h) - self.params.eta * vector_laplacian(&star.u).inner(&star.u)
    }

    fn complete(
        &self,
        ctx: &StepContext,
        h: &History<ElLevel>,
        fz: &ElFrozen,
        star: ElPart,
    ) -> Result<ElLevel, StepError> {
        let wc = ctx.completion();
        let cur = &h.current;
        let director = combine_v(wc, &star.director, &cur.director);
        let dd = CellVector::lincomb(1.0, &director, -1.0, &fz.d_base);
        let mut q = fz.q_base.clone();
        q.axpy(1.0, &fz.g.dot(&dd));
        let uhat = FaceVelocity::lincomb(wc.0, &star.u, wc.1, &cur.u);
        let (u, pressure) =
            pressure_correction(&self.solvers, &self.solver, self.params.rho, ctx.mass, &uhat, &cur.pressure)?;
        if director.max_abs().is_nan() || u.max_abs().is_nan() {
            return Err(StepError::NonFinite("director or velocity".into()));
        }
        Ok(ElLevel { u, pressure, director, q })
    }

    fn quadratic_energy(&self, scheme: SchemeKind, dt: f64, cur: &ElLevel, prev: &ElLevel) -> f64 {
        let p = &self.params;
        let flow = flow_energy(scheme, dt, p.rho, &cur.u, &prev.u, &cur.pressure);
        let linv = |a: &CellVector, b: &CellVector| CellVector::lincomb(2.0, a, -1.0, b);
        let lins = |a: &ScalarField, b: &ScalarField| ScalarField::lincomb(2.0, a, -1.0, b);
        let frank = |d: &CellVector| {
            let (gx, gy) = (gradient(&d.x), gradient(&d.y));
            0.5 * p.k_frank * (gx.inner(&gx) + gy.inner(&gy)) + 0.5 * p.gamma0 * d.inner(d)
        };
        let bulk_q = |f: &ScalarField| 0.5 * f.inner(f);
        flow + two_level(scheme, &cur.director, &prev.director, frank, linv)
            + two_level(scheme, &cur.q, &prev.q, bulk_q, lins)
            - p.energy_offset(self.grid.area())
    }

    fn invariants(&self, level: &ElLevel) -> (f64, f64) {
        (0.0, divergence(&level.u).max_abs())
    }
}

impl ElModel {
    /// `K lap d - gamma0 d - q g` for given (already linearised) `q`.
    fn linear_molecular_field(&self, d: &CellVector, q: &ScalarField, g: &CellVector) -> CellVector {
        let p = &self.params;
        let mut h = CellVector { x: laplacian(&d.x), y: laplacian(&d.y) }.scaled(p.k_frank);
        h.axpy(-p.gamma0, d);
        h.axpy(-1.0, &g.times(q));
        h
    }
}

/// Smooth small-amplitude director used for refinement studies.
pub fn convergence_ic(grid: &GridSpec, amplitude: f64) -> CellVector {
    let (lx, ly) = (grid.lx(), grid.ly());
    CellVector::from_fn(grid, |x, y| {
        let c = (2.0 * PI * y / ly).cos() * (2.0 * PI * x / lx).cos();
        (amplitude * c, amplitude * c)
    })
}

/// A point defect of integer (or half-integer) charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub x: f64,
    pub y: f64,
    pub charge: f64,
}

/// Default layout on `[0, lx] x [0, ly]`: charges +2, -2, +1, -1 stacked
/// vertically along the centre line.
pub fn default_defects(lx: f64, ly: f64) -> Vec<Defect> {
    [2.0, -2.0, 1.0, -1.0]
        .iter()
        .enumerate()
        .map(|(k, &charge)| Defect { x: 0.5 * lx, y: ly * (k as f64 + 1.0) / 5.0, charge })
        .collect()
}

/// Unit director with the given defects, tapered to zero length at each
/// core over `core_radius`.
///
/// The phase of each defect is `arg sin(pi (z - z_k) / Lx)`, the field of a
/// periodic row of copies, so the director is periodic in x whenever the
/// total charge is even.
pub fn seed_defects(
    grid: &GridSpec,
    defects: &[Defect],
    theta0: f64,
    core_radius: f64,
) -> Result<CellVector, StepError> {
    let (lx, ly) = (grid.lx(), grid.ly());
    for d in defects {
        if !(d.x >= 0.0 && d.x <= lx && d.y >= 0.0 && d.y <= ly) {
            return Err(StepError::InvalidInput(format!("defect centre ({}, {}) outside the domain", d.x, d.y)));
        }
        if !(d.charge.is_finite() && d.charge != 0.0) {
            return Err(StepError::InvalidInput(format!("defect charge must be non-zero, got {}", d.charge)));
        }
    }
    if !(core_radius > 0.0) {
        return Err(StepError::InvalidInput(format!("core radius must be positive, got {core_radius}")));
    }
    Ok(CellVector::from_fn(grid, |x, y| {
        let mut theta = theta0;
        let mut amp = 1.0;
        for dft in defects {
            let a = PI * (x - dft.x) / lx;
            let b = PI * (y - dft.y) / lx;
            theta += dft.charge * (a.cos() * b.sinh()).atan2(a.sin() * b.cosh());
            let mut dx = (x - dft.x).abs() % lx;
            dx = dx.min(lx - dx);
            amp *= (dx.hypot(y - dft.y) / core_radius).tanh();
        }
        (amp * theta.cos(), amp * theta.sin())
    }))
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Winding number of the director along the rectangle of cell centres with
/// corners `(i0, j0)` and `(i1, j1)`, traversed counter-clockwise.
pub fn winding_number(d: &CellVector, i0: usize, j0: usize, i1: usize, j1: usize) -> f64 {
    let mut path = Vec::new();
    for i in i0..i1 {
        path.push((i, j0));
    }
    for j in j0..j1 {
        path.push((i1, j));
    }
    for i in (i0 + 1..=i1).rev() {
        path.push((i, j1));
    }
    for j in (j0 + 1..=j1).rev() {
        path.push((i0, j));
    }
    let angle = |(i, j): (usize, usize)| d.y.at(i, j).atan2(d.x.at(i, j));
    let mut total = 0.0;
    for k in 0..path.len() {
        let a = angle(path[k]);
        let b = angle(path[(k + 1) % path.len()]);
        total += wrap_angle(b - a);
    }
    total / (2.0 * PI)
}

/// Winding number on the largest loop one cell inside the boundary.
pub fn outer_winding(d: &CellVector) -> f64 {
    let g = d.grid();
    winding_number(d, 1, 1, g.nx() - 2, g.ny() - 2)
}

/// Largest `| |d| - 1 |` over cells farther than `radius` from every centre
/// (distances periodic in x).
pub fn bulk_deviation(d: &CellVector, centres: &[Defect], radius: f64) -> f64 {
    let g = *d.grid();
    let lx = g.lx();
    let mag = d.magnitude();
    let mut worst = 0.0f64;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (x, y) = (g.x_center(i), g.y_center(j));
            let far = centres.iter().all(|c| {
                let mut dx = (x - c.x).abs() % lx;
                dx = dx.min(lx - dx);
                dx.hypot(y - c.y) > radius
            });
            if far {
                worst = worst.max((mag.at(i, j) - 1.0).abs());
            }
        }
    }
    worst
}
