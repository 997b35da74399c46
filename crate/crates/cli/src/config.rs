//! Flat `section.key = value` configuration.
//!
//! Keys may be written fully qualified or under a `[section]` header. Lines
//! starting with `#` or `;` are comments.

use onsager_flow::chns::ChnsParams;
use onsager_flow::ericksen_leslie::{Defect, ElParams};
use onsager_flow::grid::{Boundary, GridSpec};
use onsager_flow::linsolve::{PreconditionerKind, SolverConfig};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: cannot parse `{text}` (expected `key = value`)")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: `{key}` = `{value}`: expected {expected}")]
    Type { line: usize, key: String, value: String, expected: String },
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("line {line}: invalid `{key}`: {reason}")]
    Invalid { line: usize, key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Chns,
    El,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Cn,
    Bdf2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Vtk,
}

/// Named initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialPreset {
    /// `phi = 1` or a uniform unit director, `u = 0`.
    Equilibrium,
    /// Layered field plus seeded noise.
    Coarsening,
    /// Single smooth mode.
    Smooth,
    /// Drops of different radii.
    Ostwald,
    /// Small smooth director perturbation.
    ElConvergence,
    /// Director with point defects.
    Defects,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub preset: InitialPreset,
    pub seed: u64,
    pub amplitude: f64,
    pub noise: f64,
    pub offset: f64,
    /// Amplitude of a smooth stream-function velocity; 0 starts at rest.
    pub velocity: f64,
    pub theta0: f64,
    /// Taper radius of defect cores; `None` means twice `eps`.
    pub core_radius: Option<f64>,
    /// Explicit defect list; `None` uses the default layout.
    pub defects: Option<Vec<Defect>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Steps between snapshots (and checkpoints); 0 disables both until
    /// the end of the run.
    pub snapshot_interval: usize,
    /// Steps between rows of the energy series.
    pub series_interval: usize,
    pub format: SnapshotFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Chns(ChnsParams),
    El(ElParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: ModelKind,
    pub scheme: Scheme,
    /// Implicit Euler substeps replacing the first step; 0 is plain CN/BDF2.
    pub startup_substeps: usize,
    pub grid: GridSpec,
    pub params: ModelParams,
    pub dt: f64,
    pub t_end: f64,
    pub output: OutputConfig,
    pub initial: InitialCondition,
    pub solver: SolverConfig,
}

const REQUIRED: [&str; 6] = ["model.kind", "grid.nx", "grid.ny", "time.dt", "time.t_end", "initial.preset"];

const COMMON_KEYS: [&str; 30] = [
    "model.kind",
    "model.scheme",
    "model.startup_substeps",
    "grid.nx",
    "grid.ny",
    "grid.lx",
    "grid.ly",
    "grid.bc_y",
    "params.rho",
    "params.eta",
    "params.mobility",
    "params.eps",
    "params.gamma0",
    "params.relax_time",
    "time.dt",
    "time.t_end",
    "output.directory",
    "output.snapshot_interval",
    "output.series_interval",
    "output.format",
    "initial.preset",
    "initial.seed",
    "initial.amplitude",
    "initial.noise",
    "initial.offset",
    "initial.velocity",
    "solver.rel_tol",
    "solver.abs_tol",
    "solver.max_iter",
    "solver.preconditioner",
];

const EL_KEYS: [&str; 5] = ["params.alignment", "params.k_frank", "initial.theta0", "initial.core_radius", "initial.defects"];

struct Entry {
    line: usize,
    value: String,
}

struct Table {
    entries: BTreeMap<String, Entry>,
}

impl Table {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = t.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: t.to_string() });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, text: t.to_string() });
            }
            let key = if key.contains('.') || section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            let value = value.split([' ', '\t']).take_while(|w| !w.starts_with(['#', ';'])).collect::<Vec<_>>();
            let value = value.join(" ").trim().to_string();
            if let Some(prev) = entries.get(&key) {
                return Err(ConfigError::Duplicate { line, key, first: prev.line });
            }
            entries.insert(key, Entry { line, value });
        }
        Ok(Self { entries })
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn get<T: std::str::FromStr>(&self, key: &str, expected: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| ConfigError::Type {
                line: e.line,
                key: key.to_string(),
                value: e.value.clone(),
                expected: expected.to_string(),
            }),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.get::<f64>(key, "a real number")?.unwrap_or(default))
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.get::<usize>(key, "a non-negative integer")?.unwrap_or(default))
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)], default: Option<T>) -> Result<T, ConfigError> {
        match self.entries.get(key) {
            None => Ok(default.expect("required keys are checked first")),
            Some(e) => options.iter().find(|(n, _)| *n == e.value).map(|(_, v)| *v).ok_or_else(|| {
                ConfigError::Type {
                    line: e.line,
                    key: key.to_string(),
                    value: e.value.clone(),
                    expected: format!("one of {}", options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")),
                }
            }),
        }
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { line: self.line(key), key: key.to_string(), reason: reason.into() }
    }
}

const MODELS: [(&str, ModelKind); 2] = [("chns", ModelKind::Chns), ("el", ModelKind::El)];
const SCHEMES: [(&str, Scheme); 2] = [("cn", Scheme::Cn), ("bdf2", Scheme::Bdf2)];
const BOUNDARIES: [(&str, Boundary); 2] = [("wall", Boundary::Wall), ("periodic", Boundary::Periodic)];
const FORMATS: [(&str, SnapshotFormat); 2] = [("csv", SnapshotFormat::Csv), ("vtk", SnapshotFormat::Vtk)];
const PRECONDITIONERS: [(&str, PreconditionerKind); 2] =
    [("spectral", PreconditionerKind::Spectral), ("jacobi", PreconditionerKind::Jacobi)];
const PRESETS: [(&str, InitialPreset); 6] = [
    ("equilibrium", InitialPreset::Equilibrium),
    ("coarsening", InitialPreset::Coarsening),
    ("smooth", InitialPreset::Smooth),
    ("ostwald", InitialPreset::Ostwald),
    ("el-convergence", InitialPreset::ElConvergence),
    ("defects", InitialPreset::Defects),
];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, o)| *o == v).map(|(n, _)| *n).unwrap_or("?")
}

/// `x:y:charge` triples separated by commas.
fn parse_defects(text: &str) -> Option<Vec<Defect>> {
    text.split(',')
        .map(|item| {
            let v: Vec<f64> = item.split(':').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().ok()?;
            (v.len() == 3).then(|| Defect { x: v[0], y: v[1], charge: v[2] })
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let t = Table::parse(text)?;
    let missing: Vec<String> = REQUIRED.iter().filter(|k| !t.entries.contains_key(**k)).map(|k| k.to_string()).collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }
    let model = t.choice("model.kind", &MODELS, None)?;
    for (key, e) in &t.entries {
        let known = COMMON_KEYS.contains(&key.as_str()) || (model == ModelKind::El && EL_KEYS.contains(&key.as_str()));
        if !known {
            return Err(ConfigError::UnknownKey { line: e.line, key: key.clone() });
        }
    }

    let scheme = t.choice("model.scheme", &SCHEMES, Some(Scheme::Cn))?;
    let startup_substeps = t.count("model.startup_substeps", 0)?;
    let nx = t.count("grid.nx", 0)?;
    let ny = t.count("grid.ny", 0)?;
    let lx = t.real("grid.lx", 1.0)?;
    let ly = t.real("grid.ly", 1.0)?;
    let bc = t.choice("grid.bc_y", &BOUNDARIES, Some(Boundary::Wall))?;
    let grid = GridSpec::new(nx, ny, lx, ly, bc).map_err(|e| t.invalid("grid.nx", e.to_string()))?;

    let params = match model {
        ModelKind::Chns => {
            let d = ChnsParams::default();
            let p = ChnsParams {
                rho: t.real("params.rho", d.rho)?,
                eta: t.real("params.eta", d.eta)?,
                mobility: t.real("params.mobility", d.mobility)?,
                eps: t.real("params.eps", d.eps)?,
                gamma0: t.real("params.gamma0", d.gamma0)?,
                relax_time: t.real("params.relax_time", d.relax_time)?,
            };
            p.validate().map_err(|e| t.invalid(param_key(&e.to_string()), e.to_string()))?;
            ModelParams::Chns(p)
        }
        ModelKind::El => {
            let d = ElParams::default();
            let p = ElParams {
                rho: t.real("params.rho", d.rho)?,
                eta: t.real("params.eta", d.eta)?,
                mobility: t.real("params.mobility", d.mobility)?,
                eps: t.real("params.eps", d.eps)?,
                alignment: t.real("params.alignment", d.alignment)?,
                k_frank: t.real("params.k_frank", d.k_frank)?,
                gamma0: t.real("params.gamma0", d.gamma0)?,
                relax_time: t.real("params.relax_time", d.relax_time)?,
            };
            p.validate().map_err(|e| t.invalid(param_key(&e.to_string()), e.to_string()))?;
            ModelParams::El(p)
        }
    };

    let dt = t.real("time.dt", 0.0)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(t.invalid("time.dt", format!("must be positive, got {dt}")));
    }
    let t_end = t.real("time.t_end", 0.0)?;
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(t.invalid("time.t_end", format!("must be at least time.dt = {dt}, got {t_end}")));
    }

    let output = OutputConfig {
        directory: PathBuf::from(t.get::<String>("output.directory", "a path")?.unwrap_or_else(|| "out".into())),
        snapshot_interval: t.count("output.snapshot_interval", 0)?,
        series_interval: t.count("output.series_interval", 1)?,
        format: t.choice("output.format", &FORMATS, Some(SnapshotFormat::Csv))?,
    };
    if output.series_interval == 0 {
        return Err(t.invalid("output.series_interval", "must be at least 1"));
    }

    let preset = t.choice("initial.preset", &PRESETS, None)?;
    let fits = match preset {
        InitialPreset::Equilibrium => true,
        InitialPreset::ElConvergence | InitialPreset::Defects => model == ModelKind::El,
        _ => model == ModelKind::Chns,
    };
    if !fits {
        return Err(t.invalid("initial.preset", format!("preset does not apply to model {}", name_of(&MODELS, model))));
    }
    let defects = match t.get::<String>("initial.defects", "a list")? {
        None => None,
        Some(s) => Some(parse_defects(&s).ok_or_else(|| t.invalid("initial.defects", "expected x:y:charge, ..."))?),
    };
    let (amp_default, noise_default) = match preset {
        InitialPreset::Smooth => (0.5, 0.0),
        InitialPreset::ElConvergence => (0.01, 0.0),
        InitialPreset::Coarsening => (0.0, 1e-3),
        _ => (0.0, 0.0),
    };
    let initial = InitialCondition {
        preset,
        seed: t.get::<u64>("initial.seed", "a non-negative integer")?.unwrap_or(0),
        amplitude: t.real("initial.amplitude", amp_default)?,
        noise: t.real("initial.noise", noise_default)?,
        offset: t.real("initial.offset", 0.0)?,
        velocity: t.real("initial.velocity", 0.0)?,
        theta0: t.real("initial.theta0", 0.0)?,
        core_radius: t.get::<f64>("initial.core_radius", "a real number")?,
        defects,
    };

    let d = SolverConfig::default();
    let solver = SolverConfig {
        rel_tol: t.real("solver.rel_tol", d.rel_tol)?,
        abs_tol: t.real("solver.abs_tol", d.abs_tol)?,
        max_iter: t.count("solver.max_iter", d.max_iter)?,
        preconditioner: t.choice("solver.preconditioner", &PRECONDITIONERS, Some(d.preconditioner))?,
    };
    solver.validate().map_err(|e| t.invalid("solver.rel_tol", e.to_string()))?;

    Ok(SimConfig { model, scheme, startup_substeps, grid, params, dt, t_end, output, initial, solver })
}

/// Maps a parameter validation message to the key it mentions.
fn param_key(message: &str) -> &'static str {
    const NAMES: [(&str, &str); 8] = [
        ("rho", "params.rho"),
        ("eta", "params.eta"),
        ("eps", "params.eps"),
        ("relax_time", "params.relax_time"),
        ("mobility", "params.mobility"),
        ("gamma0", "params.gamma0"),
        ("k_frank", "params.k_frank"),
        ("alignment", "params.alignment"),
    ];
    message
        .split_whitespace()
        .find_map(|w| NAMES.iter().find(|(n, _)| *n == w).map(|(_, k)| *k))
        .unwrap_or("params")
}

impl SimConfig {
    /// Every setting, defaults included, in the input syntax.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "model.kind = {}", name_of(&MODELS, self.model));
        let _ = writeln!(s, "model.scheme = {}", name_of(&SCHEMES, self.scheme));
        let _ = writeln!(s, "model.startup_substeps = {}", self.startup_substeps);
        let _ = writeln!(s, "grid.nx = {}\ngrid.ny = {}\ngrid.lx = {:?}\ngrid.ly = {:?}", g.nx(), g.ny(), g.lx(), g.ly());
        let _ = writeln!(s, "grid.bc_y = {}", name_of(&BOUNDARIES, g.bc_y()));
        match &self.params {
            ModelParams::Chns(p) => {
                let _ = writeln!(
                    s,
                    "params.rho = {:?}\nparams.eta = {:?}\nparams.mobility = {:?}\nparams.eps = {:?}\nparams.gamma0 = {:?}\nparams.relax_time = {:?}",
                    p.rho, p.eta, p.mobility, p.eps, p.gamma0, p.relax_time
                );
            }
            ModelParams::El(p) => {
                let _ = writeln!(
                    s,
                    "params.rho = {:?}\nparams.eta = {:?}\nparams.mobility = {:?}\nparams.eps = {:?}\nparams.alignment = {:?}\nparams.k_frank = {:?}\nparams.gamma0 = {:?}\nparams.relax_time = {:?}",
                    p.rho, p.eta, p.mobility, p.eps, p.alignment, p.k_frank, p.gamma0, p.relax_time
                );
            }
        }
        let _ = writeln!(s, "time.dt = {:?}\ntime.t_end = {:?}", self.dt, self.t_end);
        let o = &self.output;
        let _ = writeln!(s, "output.directory = {}", o.directory.display());
        let _ = writeln!(s, "output.snapshot_interval = {}", o.snapshot_interval);
        let _ = writeln!(s, "output.series_interval = {}", o.series_interval);
        let _ = writeln!(s, "output.format = {}", name_of(&FORMATS, o.format));
        let i = &self.initial;
        let _ = writeln!(s, "initial.preset = {}", name_of(&PRESETS, i.preset));
        let _ = writeln!(
            s,
            "initial.seed = {}\ninitial.amplitude = {:?}\ninitial.noise = {:?}\ninitial.offset = {:?}\ninitial.velocity = {:?}",
            i.seed, i.amplitude, i.noise, i.offset, i.velocity
        );
        if self.model == ModelKind::El {
            let _ = writeln!(s, "initial.theta0 = {:?}", i.theta0);
            if let Some(r) = i.core_radius {
                let _ = writeln!(s, "initial.core_radius = {r:?}");
            }
            if let Some(d) = &i.defects {
                let list: Vec<String> = d.iter().map(|d| format!("{:?}:{:?}:{:?}", d.x, d.y, d.charge)).collect();
                let _ = writeln!(s, "initial.defects = {}", list.join(", "));
            }
        }
        let v = &self.solver;
        let _ = writeln!(
            s,
            "solver.rel_tol = {:?}\nsolver.abs_tol = {:?}\nsolver.max_iter = {}\nsolver.preconditioner = {}",
            v.rel_tol,
            v.abs_tol,
            v.max_iter,
            name_of(&PRECONDITIONERS, v.preconditioner)
        );
        s
    }
}
