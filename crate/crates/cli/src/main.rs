use clap::{Parser, Subcommand};
use onsager_flow::diagnostics::thread_budget;
use onsager_flow_cli::config::{parse_config, SimConfig};
use onsager_flow_cli::output::write_atomic;
use onsager_flow_cli::sim::{convergence_csv, converge, report, run_simulation, RunError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "onsager-flow", version, about = "Energy-stable two-phase and nematic flow simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        restart: bool,
    },
    /// Temporal refinement study starting from time.dt.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        kmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an energy series for monotone decay.
    Report {
        #[arg(long)]
        series: PathBuf,
        /// Allowed energy increase per row, relative to |E0|.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

fn load(path: &Path) -> Result<SimConfig, (i32, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| (2, format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| (2, format!("{}: {e}", path.display())))
}

fn fail(e: RunError) -> (i32, String) {
    (e.exit_code(), e.to_string())
}

fn execute(cli: Cli) -> Result<(), (i32, String)> {
    match cli.command {
        Command::Run { config, out, restart } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let summary = run_simulation(&cfg, &dir, restart).map_err(fail)?;
            let last = summary.series.last().expect("series has the initial row");
            println!(
                "{} steps to t = {:.6}: E = {:.10e}, s = {:.10e}, max div {:.2e}",
                summary.steps,
                summary.t,
                last.total_energy,
                last.s_value,
                summary.series.iter().fold(0.0f64, |m, r| m.max(r.div_inf))
            );
        }
        Command::Converge { config, kmax, out } => {
            let cfg = load(&config)?;
            eprintln!("refining from dt = {} over {} levels, thread budget {}", cfg.dt, kmax + 1, thread_budget());
            let tables = converge(&cfg, kmax).map_err(fail)?;
            std::fs::create_dir_all(&out).map_err(|e| (1, format!("{}: {e}", out.display())))?;
            let path = out.join("convergence.csv");
            write_atomic(&path, convergence_csv(&tables).as_bytes()).map_err(|e| (1, e.to_string()))?;
            for t in &tables {
                print!("{t}");
            }
        }
        Command::Report { series, tol } => {
            let r = report(&series, tol).map_err(fail)?;
            let m = &r.monotone;
            println!("rows {}", r.rows);
            println!("max energy increase {:.3e} (tolerance {:.3e})", m.max_increase, r.tolerance);
            println!("max identity residual {:.3e} (signed max {:.3e})", m.max_identity_residual, m.max_identity_excess);
            println!("s tracking error {:.3e}", r.s_tracking);
            println!("mass drift {:.3e}", r.mass_drift);
            println!("max divergence {:.3e}", r.max_div);
            match m.first_violation {
                None => println!("energy monotone: yes"),
                Some(k) => {
                    println!("energy monotone: no (first increase at row {k})");
                    return Err((1, "energy increased".into()));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
