//! Model-agnostic linear stepping for energy-quadratized models with a
//! relaxed invariant scalar.
//!
//! A model is written as
//!
//! ```text
//! dPsi/dt = -Ns L Psi - s e^{t/T} Na L Psi,      ds/dt = -s/T + e^{t/T} (L Psi, Na L Psi)
//! ```
//!
//! with `Ns` positive semi-definite and `Na` skew. The exact solution has
//! `s(t) = exp(-t/T)`. Discretely the reversible part is frozen at an
//! extrapolated state, so one step costs two linear solves with the same
//! operator, a scalar formula for `s`, and an affine recombination. The
//! modified energy `1/2 (Psi, L Psi) - A0 + 1/2 s^2` then obeys an exact
//! discrete dissipation law (Crank-Nicolson) or a dissipation inequality
//! (BDF2).

use crate::diagnostics::EnergyRecord;
use crate::linsolve::SolveError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this magnitude the scalar-update denominator is treated as singular.
pub const SCALAR_DENOMINATOR_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    CrankNicolson,
    Bdf2,
    /// First-order implicit Euler; only used for damped startup substeps.
    ImplicitEuler,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("scalar update is singular (denominator {denominator:.3e})")]
    SingularScalarUpdate { denominator: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Coefficients of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub t_n: f64,
    pub relax_time: f64,
    /// Coefficient `m` of the discrete time derivative `m (Psi* - base)`.
    pub mass: f64,
    /// `exp(t*/T)` at the implicit time level.
    pub exp_factor: f64,
}

impl StepContext {
    pub fn new(scheme: SchemeKind, dt: f64, t_n: f64, relax_time: f64) -> Self {
        let (mass, t_star) = match scheme {
            SchemeKind::CrankNicolson => (2.0 / dt, t_n + 0.5 * dt),
            SchemeKind::Bdf2 => (1.5 / dt, t_n + dt),
            SchemeKind::ImplicitEuler => (1.0 / dt, t_n + dt),
        };
        Self { scheme, dt, t_n, relax_time, mass, exp_factor: (t_star / relax_time).exp() }
    }

    pub fn t_star(&self) -> f64 {
        match self.scheme {
            SchemeKind::CrankNicolson => self.t_n + 0.5 * self.dt,
            SchemeKind::Bdf2 | SchemeKind::ImplicitEuler => self.t_n + self.dt,
        }
    }

    /// Weights on `(Psi^n, Psi^{n-1})` of the explicit extrapolation to the
    /// implicit level.
    pub fn extrapolation(&self) -> (f64, f64) {
        match self.scheme {
            SchemeKind::CrankNicolson => (1.5, -0.5),
            SchemeKind::Bdf2 => (2.0, -1.0),
            SchemeKind::ImplicitEuler => (1.0, 0.0),
        }
    }

    /// Weights on `(Psi^n, Psi^{n-1})` of the state the time derivative is
    /// taken against.
    pub fn base(&self) -> (f64, f64) {
        match self.scheme {
            SchemeKind::CrankNicolson | SchemeKind::ImplicitEuler => (1.0, 0.0),
            SchemeKind::Bdf2 => (4.0 / 3.0, -1.0 / 3.0),
        }
    }

    /// Weights on `(Psi*, Psi^n)` giving `Psi^{n+1}`.
    pub fn completion(&self) -> (f64, f64) {
        match self.scheme {
            SchemeKind::CrankNicolson => (2.0, -1.0),
            SchemeKind::Bdf2 | SchemeKind::ImplicitEuler => (1.0, 0.0),
        }
    }

    /// Denominator `m + 1/T` of the scalar equation.
    pub fn scalar_denominator(&self) -> f64 {
        self.mass + 1.0 / self.relax_time
    }
}

/// Two most recent time levels plus the scalar and the clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History<L> {
    pub current: L,
    pub previous: L,
    pub s: f64,
    pub s_prev: f64,
    pub t: f64,
    pub steps: usize,
}

impl<L: Clone> History<L> {
    /// Starts at `t = 0`, `s = 1`, with the previous level primed by copying.
    pub fn start(level: L) -> Self {
        Self { previous: level.clone(), current: level, s: 1.0, s_prev: 1.0, t: 0.0, steps: 0 }
    }
}

/// The pieces a concrete model supplies to the generic step.
pub trait EqRidModel {
    /// One time level of the state (including any projection pressure).
    type Level: Clone;
    /// Extrapolated coefficients and explicit reversible forcing of a step.
    type Frozen;
    /// A solution of one of the two linear systems of a step.
    type Part;

    fn freeze(&self, ctx: &StepContext, h: &History<Self::Level>) -> Result<Self::Frozen, StepError>;

    /// Solves `m (Psi1 - base) = -Ns L Psi1`.
    fn solve_irreversible_part(
        &self,
        ctx: &StepContext,
        h: &History<Self::Level>,
        fz: &Self::Frozen,
    ) -> Result<Self::Part, StepError>;

    /// Solves `m Psi2 = -Ns L Psi2 - e^{t*/T} Na L Psibar`.
    fn solve_reversible_forced_part(
        &self,
        ctx: &StepContext,
        h: &History<Self::Level>,
        fz: &Self::Frozen,
    ) -> Result<Self::Part, StepError>;

    /// `e^{t*/T} (L Psi_k, Na L Psibar)` for one part.
    fn reversible_power(&self, ctx: &StepContext, fz: &Self::Frozen, part: &Self::Part) -> f64;

    /// `Psi1 + s Psi2`.
    fn assemble(&self, p1: &Self::Part, p2: &Self::Part, s: f64) -> Self::Part;

    /// Rate `(L Psi*, Ns L Psi*)` at the implicit level.
    fn irreversible_dissipation(&self, ctx: &StepContext, fz: &Self::Frozen, star: &Self::Part) -> f64;

    /// Builds `Psi^{n+1}` from the implicit-level state, including any
    /// projection.
    fn complete(
        &self,
        ctx: &StepContext,
        h: &History<Self::Level>,
        fz: &Self::Frozen,
        star: Self::Part,
    ) -> Result<Self::Level, StepError>;

    /// Modified energy without the scalar contribution. For BDF2 it is the
    /// two-level form built from `current` and `previous`.
    fn quadratic_energy(&self, scheme: SchemeKind, dt: f64, current: &Self::Level, previous: &Self::Level) -> f64;

    /// `(mass, max |div u|)` of a level; models without either return 0.
    fn invariants(&self, level: &Self::Level) -> (f64, f64);
}

/// Closed-form scalar update `s = (c_n + p1) / (1 - p2)` where `p_k` are the
/// pairings of the two partial solutions with the normalised reversible
/// forcing.
pub fn cn_scalar_update(c_n: f64, p1: f64, p2: f64) -> Result<f64, StepError> {
    let denominator = 1.0 - p2;
    if denominator.abs() < SCALAR_DENOMINATOR_GUARD || !denominator.is_finite() {
        return Err(StepError::SingularScalarUpdate { denominator });
    }
    let s = (c_n + p1) / denominator;
    if !s.is_finite() {
        return Err(StepError::NonFinite("scalar update".into()));
    }
    Ok(s)
}

/// Same closed form; only the inputs `c_n`, `p1`, `p2` differ between the
/// two schemes.
pub fn bdf2_scalar_update(c_n: f64, p1: f64, p2: f64) -> Result<f64, StepError> {
    cn_scalar_update(c_n, p1, p2)
}

/// Normalised pairings `(p1, p2)` of the two parts with the reversible
/// forcing of the scalar equation.
pub fn reversible_pairing<M: EqRidModel>(
    model: &M,
    ctx: &StepContext,
    fz: &M::Frozen,
    p1: &M::Part,
    p2: &M::Part,
) -> (f64, f64) {
    let d = ctx.scalar_denominator();
    (model.reversible_power(ctx, fz, p1) / d, model.reversible_power(ctx, fz, p2) / d)
}

/// What one step did, beyond updating the history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub scheme: SchemeKind,
    /// Scalar at the implicit level.
    pub s_star: f64,
    /// `dt (L Psi*, Ns L Psi*)`.
    pub dissipation_irreversible: f64,
    /// `dt/T (s*)^2`.
    pub dissipation_s: f64,
}

fn advance<M: EqRidModel>(
    model: &M,
    h: &mut History<M::Level>,
    scheme: SchemeKind,
    dt: f64,
    relax_time: f64,
) -> Result<StepOutcome, StepError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if !(relax_time > 0.0 && relax_time.is_finite()) {
        return Err(StepError::InvalidInput(format!("relaxation time must be positive, got {relax_time}")));
    }
    let ctx = StepContext::new(scheme, dt, h.t, relax_time);
    let fz = model.freeze(&ctx, h)?;
    let part1 = model.solve_irreversible_part(&ctx, h, &fz)?;
    let part2 = model.solve_reversible_forced_part(&ctx, h, &fz)?;
    let (p1, p2) = reversible_pairing(model, &ctx, &fz, &part1, &part2);
    let (wb0, wb1) = ctx.base();
    let c_n = ctx.mass * (wb0 * h.s + wb1 * h.s_prev) / ctx.scalar_denominator();
    let s_star = match scheme {
        SchemeKind::Bdf2 => bdf2_scalar_update(c_n, p1, p2)?,
        _ => cn_scalar_update(c_n, p1, p2)?,
    };
    let star = model.assemble(&part1, &part2, s_star);
    let dissipation_irreversible = dt * model.irreversible_dissipation(&ctx, &fz, &star);
    let next = model.complete(&ctx, h, &fz, star)?;
    let (wc0, wc1) = ctx.completion();
    let s_next = wc0 * s_star + wc1 * h.s;
    h.previous = std::mem::replace(&mut h.current, next);
    h.s_prev = h.s;
    h.s = s_next;
    h.t += dt;
    h.steps += 1;
    Ok(StepOutcome { scheme, s_star, dissipation_irreversible, dissipation_s: dt / relax_time * s_star * s_star })
}

/// One Crank-Nicolson step.
pub fn step_cn<M: EqRidModel>(
    model: &M,
    h: &mut History<M::Level>,
    dt: f64,
    relax_time: f64,
) -> Result<StepOutcome, StepError> {
    advance(model, h, SchemeKind::CrankNicolson, dt, relax_time)
}

/// One BDF2 step; the first step of a run is taken with Crank-Nicolson.
pub fn step_bdf2<M: EqRidModel>(
    model: &M,
    h: &mut History<M::Level>,
    dt: f64,
    relax_time: f64,
) -> Result<StepOutcome, StepError> {
    if h.steps == 0 {
        step_cn(model, h, dt, relax_time)
    } else {
        advance(model, h, SchemeKind::Bdf2, dt, relax_time)
    }
}

/// Replaces the first step of a run by `substeps` implicit Euler steps of
/// size `dt / substeps`, damping stiff modes excited by initial data that
/// is incompatible with the constraint or forcing. The level at `t = 0` is
/// kept as the previous level, so later extrapolations see step `dt`.
pub fn damped_start<M: EqRidModel>(
    model: &M,
    h: &mut History<M::Level>,
    dt: f64,
    relax_time: f64,
    substeps: usize,
) -> Result<StepOutcome, StepError> {
    if h.steps != 0 {
        return Err(StepError::InvalidInput("damped start must be the first step".into()));
    }
    let k = substeps.max(1);
    let initial = h.current.clone();
    let (s0, t0) = (h.s, h.t);
    let mut total = StepOutcome {
        scheme: SchemeKind::ImplicitEuler,
        s_star: 0.0,
        dissipation_irreversible: 0.0,
        dissipation_s: 0.0,
    };
    for _ in 0..k {
        let o = advance(model, h, SchemeKind::ImplicitEuler, dt / k as f64, relax_time)?;
        total.s_star = o.s_star;
        total.dissipation_irreversible += o.dissipation_irreversible;
        total.dissipation_s += o.dissipation_s;
    }
    h.previous = initial;
    h.s_prev = s0;
    h.t = t0 + dt;
    h.steps = 1;
    Ok(total)
}

/// Scalar contribution to the modified energy.
pub fn scalar_energy(scheme: SchemeKind, s: f64, s_prev: f64) -> f64 {
    match scheme {
        SchemeKind::CrankNicolson | SchemeKind::ImplicitEuler => 0.5 * s * s,
        SchemeKind::Bdf2 => 0.25 * (s * s + (2.0 * s - s_prev).powi(2)),
    }
}

/// Drives a model with a fixed scheme and step size and records the energy
/// series.
#[derive(Debug, Clone)]
pub struct Stepper<M: EqRidModel> {
    pub model: M,
    pub history: History<M::Level>,
    pub scheme: SchemeKind,
    pub dt: f64,
    pub relax_time: f64,
    /// Implicit Euler substeps replacing the first step; 0 disables.
    pub startup_substeps: usize,
}

impl<M: EqRidModel> Stepper<M> {
    pub fn new(model: M, initial: M::Level, scheme: SchemeKind, dt: f64, relax_time: f64) -> Self {
        Self { model, history: History::start(initial), scheme, dt, relax_time, startup_substeps: 0 }
    }

    pub fn from_history(model: M, history: History<M::Level>, scheme: SchemeKind, dt: f64, relax_time: f64) -> Self {
        Self { model, history, scheme, dt, relax_time, startup_substeps: 0 }
    }

    pub fn with_damped_start(mut self, substeps: usize) -> Self {
        self.startup_substeps = substeps;
        self
    }

    pub fn step(&mut self) -> Result<StepOutcome, StepError> {
        if self.history.steps == 0 && self.startup_substeps > 0 {
            return damped_start(&self.model, &mut self.history, self.dt, self.relax_time, self.startup_substeps);
        }
        match self.scheme {
            SchemeKind::CrankNicolson => step_cn(&self.model, &mut self.history, self.dt, self.relax_time),
            SchemeKind::Bdf2 => step_bdf2(&self.model, &mut self.history, self.dt, self.relax_time),
            SchemeKind::ImplicitEuler => {
                advance(&self.model, &mut self.history, SchemeKind::ImplicitEuler, self.dt, self.relax_time)
            }
        }
    }

    /// Modified energy of the current history in the scheme's own form.
    pub fn energy(&self) -> f64 {
        let h = &self.history;
        self.model.quadratic_energy(self.scheme, self.dt, &h.current, &h.previous)
            + scalar_energy(self.scheme, h.s, h.s_prev)
    }

    /// Diagnostics row for the current state; `outcome` is the step that
    /// produced it (`None` for the initial state).
    pub fn record(&self, outcome: Option<&StepOutcome>) -> EnergyRecord {
        let h = &self.history;
        let (mass, div_inf) = self.model.invariants(&h.current);
        EnergyRecord {
            t: h.t,
            total_energy: self.energy(),
            dissipation_irreversible: outcome.map_or(0.0, |o| o.dissipation_irreversible),
            dissipation_s: outcome.map_or(0.0, |o| o.dissipation_s),
            s_value: h.s,
            s_exact: (-h.t / self.relax_time).exp(),
            mass,
            div_inf,
        }
    }

    /// Steps until `t_end` (within a tenth of a step), collecting the
    /// series including the initial row.
    pub fn run_until(&mut self, t_end: f64) -> Result<Vec<EnergyRecord>, StepError> {
        let mut series = vec![self.record(None)];
        while self.history.t < t_end - 0.1 * self.dt {
            let o = self.step()?;
            series.push(self.record(Some(&o)));
        }
        Ok(series)
    }
}

/// `dPsi/dt = -(lambda I + omega J) Psi` in the plane with `L = I`: a
/// damped rotation with a closed-form solution, used to check the generic
/// machinery in isolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOdeModel {
    pub lambda: f64,
    pub omega: f64,
}

fn rot(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

impl LinearOdeModel {
    pub fn exact(&self, psi0: [f64; 2], t: f64) -> [f64; 2] {
        let (c, s) = ((self.omega * t).cos(), (self.omega * t).sin());
        let j = rot(psi0);
        let d = (-self.lambda * t).exp();
        [d * (c * psi0[0] - s * j[0]), d * (c * psi0[1] - s * j[1])]
    }
}

pub struct LinearOdeFrozen {
    bar: [f64; 2],
    base: [f64; 2],
}

impl EqRidModel for LinearOdeModel {
    type Level = [f64; 2];
    type Frozen = LinearOdeFrozen;
    type Part = [f64; 2];

    fn freeze(&self, ctx: &StepContext, h: &History<[f64; 2]>) -> Result<LinearOdeFrozen, StepError> {
        let (a, b) = ctx.extrapolation();
        let (c, d) = ctx.base();
        let (x, y) = (h.current, h.previous);
        Ok(LinearOdeFrozen {
            bar: [a * x[0] + b * y[0], a * x[1] + b * y[1]],
            base: [c * x[0] + d * y[0], c * x[1] + d * y[1]],
        })
    }

    fn solve_irreversible_part(
        &self,
        ctx: &StepContext,
        _h: &History<[f64; 2]>,
        fz: &LinearOdeFrozen,
    ) -> Result<[f64; 2], StepError> {
        let k = ctx.mass / (ctx.mass + self.lambda);
        Ok([k * fz.base[0], k * fz.base[1]])
    }

    fn solve_reversible_forced_part(
        &self,
        ctx: &StepContext,
        _h: &History<[f64; 2]>,
        fz: &LinearOdeFrozen,
    ) -> Result<[f64; 2], StepError> {
        let j = rot(fz.bar);
        let k = -ctx.exp_factor * self.omega / (ctx.mass + self.lambda);
        Ok([k * j[0], k * j[1]])
    }

    fn reversible_power(&self, ctx: &StepContext, fz: &LinearOdeFrozen, part: &[f64; 2]) -> f64 {
        let j = rot(fz.bar);
        ctx.exp_factor * self.omega * (part[0] * j[0] + part[1] * j[1])
    }

    fn assemble(&self, p1: &[f64; 2], p2: &[f64; 2], s: f64) -> [f64; 2] {
        [p1[0] + s * p2[0], p1[1] + s * p2[1]]
    }

    fn irreversible_dissipation(&self, _ctx: &StepContext, _fz: &LinearOdeFrozen, star: &[f64; 2]) -> f64 {
        self.lambda * (star[0] * star[0] + star[1] * star[1])
    }

    fn complete(
        &self,
        ctx: &StepContext,
        h: &History<[f64; 2]>,
        _fz: &LinearOdeFrozen,
        star: [f64; 2],
    ) -> Result<[f64; 2], StepError> {
        let (a, b) = ctx.completion();
        Ok([a * star[0] + b * h.current[0], a * star[1] + b * h.current[1]])
    }

    fn quadratic_energy(&self, scheme: SchemeKind, _dt: f64, cur: &[f64; 2], prev: &[f64; 2]) -> f64 {
        let sq = |v: [f64; 2]| v[0] * v[0] + v[1] * v[1];
        match scheme {
            SchemeKind::CrankNicolson | SchemeKind::ImplicitEuler => 0.5 * sq(*cur),
            SchemeKind::Bdf2 => 0.25 * (sq(*cur) + sq([2.0 * cur[0] - prev[0], 2.0 * cur[1] - prev[1]])),
        }
    }

    fn invariants(&self, _level: &[f64; 2]) -> (f64, f64) {
        (0.0, 0.0)
    }
}
