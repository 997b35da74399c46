//! Snapshot and energy-series files.

use crate::config::SnapshotFormat;
use onsager_flow::diagnostics::EnergyRecord;
use onsager_flow::grid::{GridSpec, ScalarField};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}, line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{0}")]
    Encode(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), OutputError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Cell-centred fields at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub s: f64,
    pub grid: GridSpec,
    pub fields: Vec<(String, ScalarField)>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn snapshot_csv(snap: &Snapshot) -> String {
    let g = &snap.grid;
    let mut out = String::from("x,y");
    for (name, _) in &snap.fields {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            out.push_str(&num(g.x_center(i)));
            out.push(',');
            out.push_str(&num(g.y_center(j)));
            for (_, f) in &snap.fields {
                out.push(',');
                out.push_str(&num(f.at(i, j)));
            }
            out.push('\n');
        }
    }
    out
}

pub fn snapshot_vtk(snap: &Snapshot) -> String {
    let g = &snap.grid;
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "onsager-flow t={} s={}", num(snap.t), num(snap.s));
    let _ = writeln!(out, "ASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {} {} 1", g.nx(), g.ny());
    let _ = writeln!(out, "ORIGIN {} {} 0", num(0.5 * g.hx()), num(0.5 * g.hy()));
    let _ = writeln!(out, "SPACING {} {} 1", num(g.hx()), num(g.hy()));
    let _ = writeln!(out, "POINT_DATA {}", g.cells());
    for (name, f) in &snap.fields {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in f.data() {
            out.push_str(&num(*v));
            out.push('\n');
        }
    }
    out
}

pub fn write_snapshot(snap: &Snapshot, format: SnapshotFormat, path: &Path) -> Result<(), OutputError> {
    let text = match format {
        SnapshotFormat::Csv => snapshot_csv(snap),
        SnapshotFormat::Vtk => snapshot_vtk(snap),
    };
    write_atomic(path, text.as_bytes())
}

/// Column names and rows of a numeric CSV file with one header line.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| OutputError::Parse { path: path.into(), line: 1, reason: "empty file".into() })?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| OutputError::Parse { path: path.into(), line: k + 2, reason: e.to_string() })?;
        if row.len() != header.len() {
            return Err(OutputError::Parse {
                path: path.into(),
                line: k + 2,
                reason: format!("{} values for {} columns", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub const SERIES_HEADER: &str = "t,E,diss_irr,diss_s,s,s_exact,mass,div_inf";

pub fn series_csv(rows: &[EnergyRecord]) -> String {
    let mut out = format!("{SERIES_HEADER}\n");
    for r in rows {
        let v = [
            r.t,
            r.total_energy,
            r.dissipation_irreversible,
            r.dissipation_s,
            r.s_value,
            r.s_exact,
            r.mass,
            r.div_inf,
        ];
        out.push_str(&v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn read_series(path: &Path) -> Result<Vec<EnergyRecord>, OutputError> {
    let (header, rows) = read_csv(path)?;
    if header.join(",") != SERIES_HEADER {
        return Err(OutputError::Parse {
            path: path.into(),
            line: 1,
            reason: format!("expected header `{SERIES_HEADER}`"),
        });
    }
    Ok(rows
        .into_iter()
        .map(|r| EnergyRecord {
            t: r[0],
            total_energy: r[1],
            dissipation_irreversible: r[2],
            dissipation_s: r[3],
            s_value: r[4],
            s_exact: r[5],
            mass: r[6],
            div_inf: r[7],
        })
        .collect())
}
