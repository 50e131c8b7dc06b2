use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use ptflow::catalog::{builtin, NAMES};
use ptflow::diagnostics::{
    convergence_table, front_speed, plateau_report, ConvergenceRow, DEFAULT_PLATEAU_TOL,
    MIN_PLATEAU_CELLS,
};
use ptflow::output::{list_snapshots, read_snapshot, read_spacetime, write_run};
use ptflow::par::with_threads;
use ptflow::scenario::TrajectorySeeding;
use ptflow::{
    parse_scenario, run, serialize_scenario, Error, ErrorKind, Execution, Result, RunOptions,
    Scenario,
};

const DEFAULT_SEEDING: TrajectorySeeding = TrajectorySeeding {
    seed_spacing_m: 100.0,
    release_interval_s: 50.0,
};

#[derive(Parser)]
#[command(name = "ptflow", version, about = "Phase-transition traffic flow simulator")]
struct Cli {
    /// Worker threads for the data-parallel core (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Use the sequential code path.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a scenario file.
    Run(RunArgs),
    /// Self-convergence table against a fine reference run.
    Convergence(ConvergenceArgs),
    /// List built-in scenarios, or print one as JSON.
    Catalog { name: Option<String> },
    /// Diagnostics on a run directory.
    #[command(subcommand)]
    Diag(Diag),
}

#[derive(Args)]
struct RunArgs {
    scenario: String,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Output directory (default: runs/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
    /// Steps between space-time frames; 0 disables the file.
    #[arg(long)]
    spacetime_stride: Option<usize>,
    /// Write vehicle trajectories (100 m seed spacing, 50 s releases unless
    /// the scenario says otherwise).
    #[arg(long)]
    trajectories: bool,
}

#[derive(Args)]
struct ConvergenceArgs {
    scenario: String,
    #[arg(long, value_delimiter = ',', required = true)]
    dx_list: Vec<f64>,
    #[arg(long)]
    ref_dx: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Diag {
    /// Constant-density plateaus of one snapshot.
    Plateaus {
        run_dir: PathBuf,
        /// Snapshot time (default: the latest).
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_PLATEAU_TOL)]
        tol: f64,
        #[arg(long, default_value_t = MIN_PLATEAU_CELLS)]
        min_cells: usize,
    },
    /// Speed of a density threshold crossing in the space-time file.
    Front {
        run_dir: PathBuf,
        #[arg(long)]
        threshold: f64,
        /// Cell-centre window `a,b` searched for the crossing.
        #[arg(long, value_parser = parse_pair)]
        x_window: Option<(f64, f64)>,
        /// Time window `a,b` of frames used in the fit.
        #[arg(long, value_parser = parse_pair)]
        t_window: Option<(f64, f64)>,
    },
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Validation => 3,
        ErrorKind::Numerical | ErrorKind::Io => 4,
    }
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    if let Some(s) = builtin(arg) {
        return Ok(s);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::Usage(format!(
            "'{arg}' is neither a built-in scenario nor a file (see `ptflow catalog`)"
        )));
    }
    parse_scenario(&fs::read_to_string(path)?)
}

fn scenario_name(s: &Scenario, arg: &str) -> String {
    s.name.clone().unwrap_or_else(|| {
        Path::new(arg)
            .file_stem()
            .map_or_else(|| "scenario".into(), |n| n.to_string_lossy().into_owned())
    })
}

fn apply_overrides(mut s: Scenario, a: &RunArgs) -> Result<Scenario> {
    if let Some(dx) = a.dx {
        s = s.with_dx(dx)?;
    }
    if let Some(cfl) = a.cfl {
        s.cfl = cfl;
    }
    if let Some(t) = a.t_final {
        s.t_final = t;
        s.output.snapshots.retain(|&ts| ts <= t);
        if !s.output.snapshots.contains(&t) {
            s.output.snapshots.push(t);
        }
    }
    if let Some(snaps) = &a.snapshots {
        s.output.snapshots = snaps.clone();
    }
    if a.spacetime_stride.is_some() {
        s.output.spacetime_stride = a.spacetime_stride;
    }
    if a.trajectories && s.output.trajectories.is_none() {
        s.output.trajectories = Some(DEFAULT_SEEDING);
    }
    s.validate()?;
    Ok(s)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn versions() -> serde_json::Value {
    json!({
        "ptflow": env!("CARGO_PKG_VERSION"),
        "scenario_schema": ptflow::scenario::SCHEMA_VERSION,
    })
}

fn cmd_run(a: &RunArgs, opts: &RunOptions) -> Result<()> {
    let scenario = apply_overrides(load_scenario(&a.scenario)?, a)?;
    let name = scenario_name(&scenario, &a.scenario);
    let out_dir = a.out.clone().unwrap_or_else(|| Path::new("runs").join(&name));
    let echo = serialize_scenario(&scenario)?;

    let start = Instant::now();
    let out = run(&scenario, opts)?;
    let wall = start.elapsed().as_secs_f64();

    let files = write_run(&out_dir, &out)?;
    write_json(
        &out_dir.join("meta.json"),
        &json!({
            "name": name,
            "scenario_sha256": sha256_hex(echo.as_bytes()),
            "versions": versions(),
            "grid": {
                "x_left": scenario.grid.x_left(),
                "x_right": scenario.grid.x_right(),
                "n_cells": scenario.grid.n_cells(),
                "dx": scenario.grid.dx(),
            },
            "steps": out.steps,
            "max_conservation_residual": out.max_conservation_residual(),
            "trajectory_warnings": out.trajectory_warnings,
            "scenario": serde_json::from_str::<serde_json::Value>(&echo)?,
        }),
    )?;
    write_json(
        &out_dir.join("timing.json"),
        &json!({ "wall_time_s": wall, "execution": format!("{:?}", opts.exec) }),
    )?;

    if out.trajectory_warnings > 0 {
        eprintln!(
            "warning: {} trajectory samples saw the speed change by more than 20% between frames \
             (expected where a trajectory crosses a shock)",
            out.trajectory_warnings
        );
    }
    eprintln!(
        "{name}: {} steps to t = {} in {wall:.3} s, {} files in {}",
        out.steps,
        scenario.t_final,
        files.len() + 2,
        out_dir.display()
    );
    Ok(())
}

fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("dx,l1,eoc\n");
    for r in rows {
        let eoc = r.eoc.map(|e| e.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{eoc}\n", r.dx, r.l1));
    }
    s
}

fn cmd_convergence(a: &ConvergenceArgs, opts: &RunOptions) -> Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let name = scenario_name(&scenario, &a.scenario);
    let rows = convergence_table(&scenario, &a.dx_list, a.ref_dx, opts)?;
    fs::create_dir_all(&a.out)?;
    let table = convergence_csv(&rows);
    fs::write(a.out.join("convergence.csv"), &table)?;
    let echo = serialize_scenario(&scenario)?;
    write_json(
        &a.out.join("meta.json"),
        &json!({
            "name": name,
            "scenario_sha256": sha256_hex(echo.as_bytes()),
            "versions": versions(),
            "dx_list": a.dx_list,
            "ref_dx": a.ref_dx,
            "scenario": serde_json::from_str::<serde_json::Value>(&echo)?,
        }),
    )?;
    emit(&table)
}

fn cmd_catalog(name: Option<&str>) -> Result<()> {
    let Some(name) = name else {
        let mut text = String::from("name,x_left,x_right,n_cells,dx,t_final\n");
        for n in NAMES {
            let s = builtin(n).expect("catalog entry");
            let _ = writeln!(
                text,
                "{n},{},{},{},{},{}",
                s.grid.x_left(),
                s.grid.x_right(),
                s.grid.n_cells(),
                s.grid.dx(),
                s.t_final
            );
        }
        return emit(&text);
    };
    let s = builtin(name).ok_or_else(|| Error::Usage(format!("no built-in scenario '{name}'")))?;
    emit(&(serialize_scenario(&s)? + "\n"))
}

fn parse_pair(arg: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = arg.split_once(',').ok_or("expected two values `a,b`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if a < b {
        Ok((a, b))
    } else {
        Err(format!("empty window [{a}, {b}]"))
    }
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_diag(d: &Diag) -> Result<()> {
    match d {
        Diag::Plateaus {
            run_dir,
            t,
            tol,
            min_cells,
        } => {
            if !(*tol > 0.0) {
                return Err(Error::Usage(format!("--tol must be positive, got {tol}")));
            }
            let snaps = list_snapshots(run_dir)?;
            let chosen = match t {
                Some(t) => snaps.iter().find(|(ts, _)| ts == t),
                None => snaps.last(),
            };
            let Some((ts, path)) = chosen else {
                return Err(Error::Usage(format!(
                    "no matching snapshot in {}",
                    run_dir.display()
                )));
            };
            let rows = read_snapshot(path)?;
            let x: Vec<f64> = rows.iter().map(|r| r.x).collect();
            let rho: Vec<f64> = rows.iter().map(|r| r.rho).collect();
            let mut text = format!("# t = {ts}\nvalue,x_start,x_end,extent,cells\n");
            for p in plateau_report(&x, &rho, *tol, *min_cells) {
                let _ = writeln!(text, "{},{},{},{},{}", p.value, p.x_start, p.x_end, p.extent(), p.cells);
            }
            emit(&text)
        }
        Diag::Front {
            run_dir,
            threshold,
            x_window,
            t_window,
        } => {
            let path = run_dir.join("spacetime.csv");
            if !path.exists() {
                return Err(Error::Usage(format!("{} not found", path.display())));
            }
            let (x, frames) = read_spacetime(&path)?;
            let s = front_speed(&x, &frames, *threshold, *x_window, *t_window)?;
            emit(&format!("{s}\n"))
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let opts = RunOptions {
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
        ..RunOptions::default()
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a, &opts),
        Command::Convergence(a) => cmd_convergence(a, &opts),
        Command::Catalog { name } => cmd_catalog(name.as_deref()),
        Command::Diag(d) => cmd_diag(d),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(Error::Usage("--threads must be at least 1".into())),
        Some(n) => with_threads(n, || dispatch(&cli)),
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
