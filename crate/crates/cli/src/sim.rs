//! Running, restarting and refining simulations described by a [`SimConfig`].

use crate::config::{InitialPreset, ModelParams, Scheme, SimConfig};
use crate::output::{io_err, read_series, series_csv, write_atomic, write_snapshot, OutputError, Snapshot};
use onsager_flow::chns::{self, ChnsLevel, ChnsModel};
use onsager_flow::diagnostics::{
    assert_energy_monotone, mass_drift, refine_in_time, scalar_tracking_error, ConvergenceTable, DiagError,
    EnergyRecord, FieldSnapshot, MonotoneReport,
};
use onsager_flow::eqrid::{History, SchemeKind, StepError, StepOutcome, Stepper};
use onsager_flow::ericksen_leslie::{self as el, ElLevel, ElModel};
use onsager_flow::grid::{CellVector, FaceVelocity, GridSpec, ScalarField};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error("restart: {0}")]
    Restart(String),
    #[error("step {step} (t = {t}): {source}")]
    Solver { step: usize, t: f64, source: StepError },
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Refinement(#[from] DiagError),
}

impl RunError {
    /// Process exit status: 2 for bad input, 1 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Setup(_) | Self::Restart(_) => 2,
            _ => 1,
        }
    }
}

fn scheme_kind(s: Scheme) -> SchemeKind {
    match s {
        Scheme::Cn => SchemeKind::CrankNicolson,
        Scheme::Bdf2 => SchemeKind::Bdf2,
    }
}

/// Saved history of either model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SavedHistory {
    Chns(History<ChnsLevel>),
    El(History<ElLevel>),
}

/// A stepper for the configured model.
pub enum Engine {
    Chns(Stepper<ChnsModel>),
    El(Stepper<ElModel>),
}

fn setup(e: StepError) -> RunError {
    RunError::Setup(e.to_string())
}

fn initial_velocity(grid: &GridSpec, amplitude: f64) -> FaceVelocity {
    if amplitude == 0.0 {
        FaceVelocity::zeros(grid)
    } else {
        chns::smooth_velocity(grid, amplitude)
    }
}

impl Engine {
    /// Builds the model and its initial level.
    pub fn new(cfg: &SimConfig) -> Result<Self, RunError> {
        let g = &cfg.grid;
        let ic = &cfg.initial;
        let u0 = initial_velocity(g, ic.velocity);
        let history = match &cfg.params {
            ModelParams::Chns(p) => {
                let model = ChnsModel::new(*p, g, cfg.solver).map_err(setup)?;
                let phi0 = match ic.preset {
                    InitialPreset::Equilibrium => ScalarField::constant(g, 1.0),
                    InitialPreset::Coarsening => chns::coarsening_ic(g, ic.seed, ic.noise),
                    InitialPreset::Smooth => chns::smooth_ic(g, ic.amplitude, ic.offset),
                    InitialPreset::Ostwald => chns::ostwald_ic(g, p.eps),
                    other => return Err(RunError::Setup(format!("preset {other:?} needs the el model"))),
                };
                let level = model.init(phi0, u0).map_err(setup)?;
                SavedHistory::Chns(History::start(level))
            }
            ModelParams::El(p) => {
                let model = ElModel::new(*p, g, cfg.solver).map_err(setup)?;
                let d0 = match ic.preset {
                    InitialPreset::Equilibrium => {
                        CellVector::from_fn(g, |_, _| (ic.theta0.cos(), ic.theta0.sin()))
                    }
                    InitialPreset::ElConvergence => el::convergence_ic(g, ic.amplitude),
                    InitialPreset::Defects => {
                        let defects = ic.defects.clone().unwrap_or_else(|| el::default_defects(g.lx(), g.ly()));
                        let radius = ic.core_radius.unwrap_or(2.0 * p.eps);
                        el::seed_defects(g, &defects, ic.theta0, radius).map_err(setup)?
                    }
                    other => return Err(RunError::Setup(format!("preset {other:?} needs the chns model"))),
                };
                let level = model.init(d0, u0).map_err(setup)?;
                SavedHistory::El(History::start(level))
            }
        };
        Self::resume(cfg, history)
    }

    /// Continues from a saved history.
    pub fn resume(cfg: &SimConfig, history: SavedHistory) -> Result<Self, RunError> {
        let g = &cfg.grid;
        let scheme = scheme_kind(cfg.scheme);
        Ok(match (&cfg.params, history) {
            (ModelParams::Chns(p), SavedHistory::Chns(h)) => {
                let model = ChnsModel::new(*p, g, cfg.solver).map_err(setup)?;
                if h.current.phi.grid() != g {
                    return Err(RunError::Restart("saved state lives on a different grid".into()));
                }
                Self::Chns(
                    Stepper::from_history(model, h, scheme, cfg.dt, p.relax_time)
                        .with_damped_start(cfg.startup_substeps),
                )
            }
            (ModelParams::El(p), SavedHistory::El(h)) => {
                let model = ElModel::new(*p, g, cfg.solver).map_err(setup)?;
                if h.current.director.grid() != g {
                    return Err(RunError::Restart("saved state lives on a different grid".into()));
                }
                Self::El(
                    Stepper::from_history(model, h, scheme, cfg.dt, p.relax_time)
                        .with_damped_start(cfg.startup_substeps),
                )
            }
            _ => return Err(RunError::Restart("saved state belongs to the other model".into())),
        })
    }

    pub fn step(&mut self) -> Result<StepOutcome, StepError> {
        match self {
            Self::Chns(s) => s.step(),
            Self::El(s) => s.step(),
        }
    }

    pub fn record(&self, outcome: Option<&StepOutcome>) -> EnergyRecord {
        match self {
            Self::Chns(s) => s.record(outcome),
            Self::El(s) => s.record(outcome),
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            Self::Chns(s) => s.history.steps,
            Self::El(s) => s.history.steps,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Self::Chns(s) => s.history.t,
            Self::El(s) => s.history.t,
        }
    }

    pub fn saved(&self) -> SavedHistory {
        match self {
            Self::Chns(s) => SavedHistory::Chns(s.history.clone()),
            Self::El(s) => SavedHistory::El(s.history.clone()),
        }
    }

    /// Cell-centred output fields with face velocities averaged to cells.
    pub fn snapshot(&self) -> Snapshot {
        let (t, s, grid, mut fields) = match self {
            Self::Chns(st) => {
                let h = &st.history;
                let c = &h.current;
                (h.t, h.s, *c.phi.grid(), vec![("phi".to_string(), c.phi.clone()), ("q".to_string(), c.q.clone())])
            }
            Self::El(st) => {
                let h = &st.history;
                let c = &h.current;
                let fields = vec![
                    ("px".to_string(), c.director.x.clone()),
                    ("py".to_string(), c.director.y.clone()),
                    ("q".to_string(), c.q.clone()),
                ];
                (h.t, h.s, *c.director.grid(), fields)
            }
        };
        let (u, p) = match self {
            Self::Chns(st) => (&st.history.current.u, &st.history.current.pressure),
            Self::El(st) => (&st.history.current.u, &st.history.current.pressure),
        };
        let cells = u.to_cells();
        fields.push(("u".to_string(), cells.x));
        fields.push(("v".to_string(), cells.y));
        fields.push(("p".to_string(), p.clone()));
        Snapshot { t, s, grid, fields }
    }

    /// End-of-run fields compared in refinement studies.
    pub fn refinement_fields(&self) -> Vec<(String, FieldSnapshot)> {
        match self {
            Self::Chns(st) => {
                let c = &st.history.current;
                vec![("phi".into(), c.phi.clone().into()), ("u".into(), c.u.clone().into())]
            }
            Self::El(st) => {
                let c = &st.history.current;
                vec![
                    ("px".into(), c.director.x.clone().into()),
                    ("py".into(), c.director.y.clone().into()),
                    ("u".into(), c.u.clone().into()),
                ]
            }
        }
    }
}

/// Number of steps that reach `t_end`.
pub fn step_count(cfg: &SimConfig) -> usize {
    (cfg.t_end / cfg.dt).round().max(1.0) as usize
}

/// Everything a restart needs: both history levels (with q), s, t, the
/// series so far and the dissipation accumulated since its last row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Config echo without the keys a restart may change.
    pub config: String,
    pub history: SavedHistory,
    pub series: Vec<EnergyRecord>,
    pub pending_dissipation: [f64; 2],
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub file: String,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SERIES_FILE: &str = "energy.csv";
pub const INDEX_FILE: &str = "snapshots.csv";

fn restart_key(cfg: &SimConfig) -> String {
    cfg.echo()
        .lines()
        .filter(|l| !l.starts_with("time.t_end") && !l.starts_with("output.directory"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint, RunError> {
    let path = dir.join(CHECKPOINT_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| RunError::Restart(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub t: f64,
    pub series: Vec<EnergyRecord>,
}

struct Run<'a> {
    cfg: &'a SimConfig,
    dir: PathBuf,
    engine: Engine,
    series: Vec<EnergyRecord>,
    pending: [f64; 2],
    snapshots: Vec<SnapshotEntry>,
}

impl Run<'_> {
    fn write_series(&self) -> Result<(), OutputError> {
        write_atomic(&self.dir.join(SERIES_FILE), series_csv(&self.series).as_bytes())
    }

    fn snapshot(&mut self) -> Result<(), OutputError> {
        let snap = self.engine.snapshot();
        let ext = match self.cfg.output.format {
            crate::config::SnapshotFormat::Csv => "csv",
            crate::config::SnapshotFormat::Vtk => "vtk",
        };
        let step = self.engine.steps();
        let file = format!("snap_{step:06}.{ext}");
        write_snapshot(&snap, self.cfg.output.format, &self.dir.join(&file))?;
        self.snapshots.retain(|e| e.step != step);
        self.snapshots.push(SnapshotEntry { step, t: snap.t, s: snap.s, file });
        let g = &self.cfg.grid;
        let mut index = String::from("step,t,s,nx,ny,lx,ly,file\n");
        for e in &self.snapshots {
            let _ = writeln!(
                index,
                "{},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{}",
                e.step,
                e.t,
                e.s,
                g.nx(),
                g.ny(),
                g.lx(),
                g.ly(),
                e.file
            );
        }
        write_atomic(&self.dir.join(INDEX_FILE), index.as_bytes())
    }

    fn checkpoint(&self) -> Result<(), OutputError> {
        let ck = Checkpoint {
            config: restart_key(self.cfg),
            history: self.engine.saved(),
            series: self.series.clone(),
            pending_dissipation: self.pending,
            snapshots: self.snapshots.clone(),
        };
        let json = serde_json::to_vec(&ck).map_err(|e| OutputError::Encode(e.to_string()))?;
        write_atomic(&self.dir.join(CHECKPOINT_FILE), &json)?;
        self.write_series()
    }
}

/// Runs (or, with `restart`, continues) the configured simulation, writing
/// `energy.csv`, snapshots and checkpoints to `dir`. On a solver failure
/// the series up to the failing step is written and the last checkpoint is
/// left in place.
pub fn run_simulation(cfg: &SimConfig, dir: &Path, restart: bool) -> Result<RunSummary, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut run = if restart {
        let ck = load_checkpoint(dir)?;
        if ck.config != restart_key(cfg) {
            return Err(RunError::Restart("config differs from the one that wrote the checkpoint".into()));
        }
        Run {
            cfg,
            dir: dir.to_path_buf(),
            engine: Engine::resume(cfg, ck.history)?,
            series: ck.series,
            pending: ck.pending_dissipation,
            snapshots: ck.snapshots,
        }
    } else {
        let engine = Engine::new(cfg)?;
        let series = vec![engine.record(None)];
        let mut run =
            Run { cfg, dir: dir.to_path_buf(), engine, series, pending: [0.0; 2], snapshots: Vec::new() };
        let cfg_path = dir.join("config.ini");
        write_atomic(&cfg_path, cfg.echo().as_bytes())?;
        run.snapshot()?;
        run.checkpoint()?;
        run
    };

    let total = step_count(cfg);
    let (every_row, every_snap) = (cfg.output.series_interval, cfg.output.snapshot_interval);
    while run.engine.steps() < total {
        let outcome = match run.engine.step() {
            Ok(o) => o,
            Err(source) => {
                let (step, t) = (run.engine.steps() + 1, run.engine.time());
                run.write_series()?;
                return Err(RunError::Solver { step, t, source });
            }
        };
        run.pending[0] += outcome.dissipation_irreversible;
        run.pending[1] += outcome.dissipation_s;
        let n = run.engine.steps();
        let last = n == total;
        if n % every_row == 0 || last {
            let mut row = run.engine.record(Some(&outcome));
            row.dissipation_irreversible = run.pending[0];
            row.dissipation_s = run.pending[1];
            run.pending = [0.0; 2];
            run.series.push(row);
        }
        if (every_snap > 0 && n % every_snap == 0) || last {
            run.snapshot()?;
            run.checkpoint()?;
        }
    }
    run.write_series()?;
    Ok(RunSummary { steps: run.engine.steps(), t: run.engine.time(), series: run.series })
}

/// Runs the config at `dt, dt/2, ..., dt/2^kmax` to `t_end` and compares
/// adjacent end states.
pub fn converge(cfg: &SimConfig, kmax: usize) -> Result<Vec<ConvergenceTable>, RunError> {
    let tables = refine_in_time(cfg.dt, kmax, |dt| -> Result<_, RunError> {
        let c = SimConfig { dt, ..cfg.clone() };
        let mut e = Engine::new(&c)?;
        let total = step_count(&c);
        while e.steps() < total {
            let (step, t) = (e.steps() + 1, e.time());
            e.step().map_err(|source| RunError::Solver { step, t, source })?;
        }
        Ok(e.refinement_fields())
    })?;
    Ok(tables)
}

pub fn convergence_csv(tables: &[ConvergenceTable]) -> String {
    let mut out = String::from("field,dt,l2,l2_order,linf,linf_order\n");
    for t in tables {
        for k in 0..t.dt.len() {
            let order = |o: &[f64]| if k == 0 { String::new() } else { format!("{:.6}", o[k - 1]) };
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{},{:.16e},{}",
                t.field,
                t.dt[k],
                t.l2[k],
                order(&t.l2_order),
                t.linf[k],
                order(&t.linf_order)
            );
        }
    }
    out
}

/// Summary of a written energy series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub rows: usize,
    pub monotone: MonotoneReport,
    pub tolerance: f64,
    pub s_tracking: f64,
    pub mass_drift: f64,
    pub max_div: f64,
}

/// Checks `energy.csv` for energy increases above `rel_tol |E0|`.
pub fn report(series_path: &Path, rel_tol: f64) -> Result<SeriesReport, RunError> {
    let series = read_series(series_path)?;
    let e0 = series.first().map_or(0.0, |r| r.total_energy.abs());
    let tolerance = rel_tol * e0.max(f64::MIN_POSITIVE);
    Ok(SeriesReport {
        rows: series.len(),
        monotone: assert_energy_monotone(&series, tolerance),
        tolerance,
        s_tracking: scalar_tracking_error(&series),
        mass_drift: mass_drift(&series),
        max_div: series.iter().fold(0.0, |m, r| m.max(r.div_inf)),
    })
}
