//! Energy series checks, field errors and temporal refinement studies.

use crate::grid::{CellVector, FaceVelocity, ScalarField};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// Environment variable capping internal parallelism.
pub const THREADS_ENV: &str = "ONSAGER_FLOW_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field {field}: zero error at dt = {dt:e}; adjacent runs are identical")]
    ZeroError { field: String, dt: f64 },
    #[error("field {0} missing from a refinement run")]
    MissingField(String),
    #[error("refinement run at dt = {dt:e} failed: {message}")]
    Run { dt: f64, message: String },
    #[error("need at least two refinement levels")]
    TooFewLevels,
}

/// One row of an energy series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub total_energy: f64,
    /// Irreversible dissipation of the step that led here (already times dt).
    pub dissipation_irreversible: f64,
    /// Relaxation dissipation of the scalar over that step.
    pub dissipation_s: f64,
    pub s_value: f64,
    pub s_exact: f64,
    pub mass: f64,
    pub div_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    /// No step raised the energy by more than the tolerance.
    pub monotone: bool,
    /// Largest `E^{n+1} - E^n` over the series (negative when decaying).
    pub max_increase: f64,
    /// Index of the first row whose energy exceeds its predecessor's plus
    /// the tolerance.
    pub first_violation: Option<usize>,
    /// Largest `|E^{n+1} - E^n + dissipation|`.
    pub max_identity_residual: f64,
    /// Largest `E^{n+1} - E^n + dissipation`; non-positive for a
    /// dissipation inequality.
    pub max_identity_excess: f64,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.monotone
    }
}

/// Flags any `E^{n+1} > E^n + tol` and measures how well the recorded
/// dissipation accounts for the energy change.
pub fn assert_energy_monotone(series: &[EnergyRecord], tol: f64) -> MonotoneReport {
    let mut rep = MonotoneReport {
        monotone: true,
        max_increase: f64::NEG_INFINITY,
        first_violation: None,
        max_identity_residual: 0.0,
        max_identity_excess: f64::NEG_INFINITY,
    };
    for (n, w) in series.windows(2).enumerate() {
        let de = w[1].total_energy - w[0].total_energy;
        rep.max_increase = rep.max_increase.max(de);
        if de > tol && rep.first_violation.is_none() {
            rep.monotone = false;
            rep.first_violation = Some(n + 1);
        }
        let r = de + w[1].dissipation_irreversible + w[1].dissipation_s;
        rep.max_identity_residual = rep.max_identity_residual.max(r.abs());
        rep.max_identity_excess = rep.max_identity_excess.max(r);
    }
    if series.len() < 2 {
        rep.max_increase = 0.0;
        rep.max_identity_excess = 0.0;
    }
    rep
}

/// Largest `|s^n - exp(-t_n/T)|` over a series.
pub fn scalar_tracking_error(series: &[EnergyRecord]) -> f64 {
    series.iter().fold(0.0, |m, r| m.max((r.s_value - r.s_exact).abs()))
}

/// Largest relative mass drift `|m^n - m^0| / |m^0|` (absolute when the
/// initial mass is zero).
pub fn mass_drift(series: &[EnergyRecord]) -> f64 {
    let Some(first) = series.first() else { return 0.0 };
    let scale = if first.mass != 0.0 { first.mass.abs() } else { 1.0 };
    series.iter().fold(0.0, |m, r| m.max((r.mass - first.mass).abs() / scale))
}

/// A field captured at the end of a run, for error measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSnapshot {
    Scalar(ScalarField),
    Face(FaceVelocity),
    Vector(CellVector),
}

impl From<ScalarField> for FieldSnapshot {
    fn from(f: ScalarField) -> Self {
        Self::Scalar(f)
    }
}
impl From<FaceVelocity> for FieldSnapshot {
    fn from(f: FaceVelocity) -> Self {
        Self::Face(f)
    }
}
impl From<CellVector> for FieldSnapshot {
    fn from(f: CellVector) -> Self {
        Self::Vector(f)
    }
}

fn diff_norms(a: &[f64], b: &[f64], weight: f64) -> (f64, f64) {
    let mut sq = 0.0;
    let mut inf = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sq += d * d;
        inf = inf.max(d.abs());
    }
    ((sq * weight).sqrt(), inf)
}

/// Discrete `(L2, Linf)` norms of `a - b`.
pub fn field_error(a: &FieldSnapshot, b: &FieldSnapshot) -> Result<(f64, f64), DiagError> {
    match (a, b) {
        (FieldSnapshot::Scalar(a), FieldSnapshot::Scalar(b)) if a.grid() == b.grid() => {
            Ok(diff_norms(a.data(), b.data(), a.grid().cell_volume()))
        }
        (FieldSnapshot::Face(a), FieldSnapshot::Face(b)) if a.grid() == b.grid() => {
            let w = a.grid().cell_volume();
            let (u2, ui) = diff_norms(a.u(), b.u(), w);
            let (v2, vi) = diff_norms(a.v(), b.v(), w);
            Ok(((u2 * u2 + v2 * v2).sqrt(), ui.max(vi)))
        }
        (FieldSnapshot::Vector(a), FieldSnapshot::Vector(b)) if a.grid() == b.grid() => {
            let w = a.grid().cell_volume();
            let (x2, xi) = diff_norms(a.x.data(), b.x.data(), w);
            let (y2, yi) = diff_norms(a.y.data(), b.y.data(), w);
            Ok(((x2 * x2 + y2 * y2).sqrt(), xi.max(yi)))
        }
        _ => Err(DiagError::GridMismatch),
    }
}

/// `log2(e_coarse / e_fine)` for a halving of the step.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// Errors and observed orders of one field over a refinement sequence.
/// Row `k` holds the step `dt_k` and the difference between the runs at
/// `dt_k` and `dt_k / 2`; `*_order[k]` compares rows `k` and `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub field: String,
    pub dt: Vec<f64>,
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
    pub l2_order: Vec<f64>,
    pub linf_order: Vec<f64>,
}

impl ConvergenceTable {
    pub fn from_errors(field: &str, dt: Vec<f64>, l2: Vec<f64>, linf: Vec<f64>) -> Result<Self, DiagError> {
        for (k, (a, b)) in l2.iter().zip(&linf).enumerate() {
            if *a == 0.0 || *b == 0.0 {
                return Err(DiagError::ZeroError { field: field.to_string(), dt: dt[k] });
            }
        }
        let orders = |e: &[f64]| e.windows(2).map(|w| observed_order(w[0], w[1])).collect::<Vec<_>>();
        Ok(Self { field: field.to_string(), l2_order: orders(&l2), linf_order: orders(&linf), dt, l2, linf })
    }

    /// All observed orders in both norms lie in `[lo, hi]`.
    pub fn orders_within(&self, lo: f64, hi: f64) -> bool {
        !self.l2_order.is_empty()
            && self.l2_order.iter().chain(&self.linf_order).all(|o| (lo..=hi).contains(o))
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "field {}", self.field)?;
        writeln!(f, "{:>12} {:>12} {:>7} {:>12} {:>7}", "dt", "l2", "order", "linf", "order")?;
        for k in 0..self.dt.len() {
            let (o2, oi) = if k == 0 {
                ("-".to_string(), "-".to_string())
            } else {
                (format!("{:.3}", self.l2_order[k - 1]), format!("{:.3}", self.linf_order[k - 1]))
            };
            writeln!(f, "{:>12.4e} {:>12.4e} {:>7} {:>12.4e} {:>7}", self.dt[k], self.l2[k], o2, self.linf[k], oi)?;
        }
        Ok(())
    }
}

/// Worker count: `ONSAGER_FLOW_THREADS` when set, else the machine's
/// available parallelism.
pub fn thread_budget() -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => avail,
    }
}

fn find_field<'a>(level: &'a [(String, FieldSnapshot)], name: &str) -> Result<&'a FieldSnapshot, DiagError> {
    level.iter().find(|(n, _)| n == name).map(|(_, f)| f).ok_or_else(|| DiagError::MissingField(name.to_string()))
}

/// Runs `run(dt0 * 2^-k)` for `k = 0..=kmax` and compares adjacent levels.
/// `run` returns named end-of-run fields; every run must return the same
/// names. Levels are computed on up to [`thread_budget`] threads.
pub fn refine_in_time<F, E>(dt0: f64, kmax: usize, run: F) -> Result<Vec<ConvergenceTable>, DiagError>
where
    F: Fn(f64) -> Result<Vec<(String, FieldSnapshot)>, E> + Sync,
    E: fmt::Display,
{
    if kmax < 1 {
        return Err(DiagError::TooFewLevels);
    }
    let dts: Vec<f64> = (0..=kmax).map(|k| dt0 * 0.5f64.powi(k as i32)).collect();
    let results: Vec<Mutex<Option<Result<Vec<(String, FieldSnapshot)>, String>>>> =
        dts.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread_budget().min(dts.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                // finest (most expensive) levels first
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= dts.len() {
                    break;
                }
                let level = dts.len() - 1 - k;
                let out = run(dts[level]).map_err(|e| e.to_string());
                *results[level].lock().unwrap() = Some(out);
            });
        }
    });
    let mut levels = Vec::with_capacity(dts.len());
    for (k, slot) in results.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(fields)) => levels.push(fields),
            Some(Err(message)) => return Err(DiagError::Run { dt: dts[k], message }),
            None => return Err(DiagError::Run { dt: dts[k], message: "not run".into() }),
        }
    }
    let names: Vec<String> = levels[0].iter().map(|(n, _)| n.clone()).collect();
    let mut tables = Vec::new();
    for name in names {
        let (mut l2, mut linf) = (Vec::new(), Vec::new());
        for k in 0..kmax {
            let (a, b) = field_error(find_field(&levels[k], &name)?, find_field(&levels[k + 1], &name)?)?;
            l2.push(a);
            linf.push(b);
        }
        tables.push(ConvergenceTable::from_errors(&name, dts[..kmax].to_vec(), l2, linf)?);
    }
    Ok(tables)
}
