//! Drives a scenario from `t = 0` to its final time.

use crate::diagnostics::{integrate_trajectories, Trajectory};
use crate::error::{Error, Result};
use crate::model::{Phase, State};
use crate::par::Execution;
use crate::scenario::Scenario;
use crate::stepper::{cfl_dt, CellField, Stepper};

/// Space-time frames are taken every step up to this many cells.
pub const AUTO_STRIDE_CELLS: usize = 500;
/// Target number of frames for larger grids.
pub const AUTO_STRIDE_FRAMES: usize = 2000;
pub const DEFAULT_MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub exec: Execution,
    /// Re-check admissibility of every cell after every stage.
    pub check_stages: bool,
    pub max_steps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            exec: Execution::default(),
            check_stages: true,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// Full cell data at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub states: Vec<State>,
    pub phases: Vec<Phase>,
    pub v: Vec<f64>,
}

/// Strided space-time record.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub flux_in: f64,
    pub flux_out: f64,
}

impl LedgerRow {
    /// Discrete conservation residual of the step ending at this row.
    pub fn residual(&self, prev_mass: f64) -> f64 {
        self.mass - prev_mass + self.dt * (self.flux_out - self.flux_in)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub spacetime: Vec<Frame>,
    pub trajectories: Vec<Trajectory>,
    /// Trajectory samples where the local speed changed by more than 20%
    /// between consecutive frames.
    pub trajectory_warnings: usize,
    /// First row is the initial state with `dt = 0`.
    pub ledger: Vec<LedgerRow>,
    pub steps: usize,
    pub final_field: CellField,
}

impl RunOutput {
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }

    /// Largest relative conservation residual over all steps.
    pub fn max_conservation_residual(&self) -> f64 {
        self.ledger
            .windows(2)
            .map(|w| w[1].residual(w[0].mass).abs() / w[0].mass.max(w[1].mass).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

fn snapshot(field: &CellField, st: &Stepper) -> Result<Snapshot> {
    Ok(Snapshot {
        t: field.time,
        states: field.states.clone(),
        phases: field.phases.clone(),
        v: field.speeds(&st.params)?,
    })
}

fn frame(snap: &Snapshot) -> Frame {
    Frame {
        t: snap.t,
        rho: snap.states.iter().map(|s| s.rho).collect(),
        q: snap.states.iter().map(|s| s.q).collect(),
        v: snap.v.clone(),
    }
}

pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    scenario.validate()?;
    let stepper = Stepper::new(scenario.params, scenario.bc_left.clone(), scenario.bc_right.clone())
        .with_execution(opts.exec)
        .with_stage_checks(opts.check_stages);
    let dx = scenario.grid.dx();
    let t_final = scenario.t_final;
    let mut field = scenario.initial_field()?;

    let snap_times = scenario.snapshot_times();
    let mut events: Vec<f64> = snap_times.iter().copied().filter(|&t| t > 0.0).collect();
    if events.last() != Some(&t_final) && t_final > 0.0 {
        events.push(t_final);
    }

    let mut k1 = stepper.rhs_at(&field.states, &field.phases, 0.0, dx)?;
    let stride = match scenario.output.spacetime_stride {
        Some(0) if scenario.output.trajectories.is_none() => 0,
        Some(n) if n > 0 => n,
        _ if scenario.grid.n_cells() <= AUTO_STRIDE_CELLS => 1,
        _ => {
            let est = cfl_dt(k1.max_speed, dx, scenario.cfl)
                .map_or(1.0, |dt| (t_final / dt).ceil());
            ((est / AUTO_STRIDE_FRAMES as f64).ceil() as usize).max(1)
        }
    };

    let mut snapshots = Vec::new();
    let mut spacetime = Vec::new();
    let initial = snapshot(&field, &stepper)?;
    if stride > 0 {
        spacetime.push(frame(&initial));
    }
    if snap_times.first() == Some(&0.0) {
        snapshots.push(initial);
    }
    let mut ledger = vec![LedgerRow {
        t: 0.0,
        dt: 0.0,
        mass: field.mass(),
        flux_in: k1.flux_in(),
        flux_out: k1.flux_out(),
    }];

    let mut steps = 0;
    for &event in &events {
        while field.time < event {
            if steps >= opts.max_steps {
                return Err(Error::StepLimit {
                    steps,
                    t: field.time,
                });
            }
            let remaining = event - field.time;
            let (dt, lands) = match cfl_dt(k1.max_speed, dx, scenario.cfl) {
                Some(dt) if dt < remaining * (1.0 - 1e-12) => (dt, false),
                _ => (remaining, true),
            };
            let report = stepper.step_with(&mut field, dt, k1)?;
            if lands {
                field.time = event;
            }
            steps += 1;
            ledger.push(LedgerRow {
                t: field.time,
                dt,
                mass: report.mass_after,
                flux_in: report.flux_in,
                flux_out: report.flux_out,
            });
            let at_end = lands && event == t_final;
            let snap_due = lands && snap_times.contains(&event);
            let frame_due = stride > 0 && (steps % stride == 0 || at_end);
            if snap_due || frame_due {
                let snap = snapshot(&field, &stepper)?;
                if frame_due {
                    spacetime.push(frame(&snap));
                }
                if snap_due {
                    snapshots.push(snap);
                }
            }
            k1 = stepper.rhs_at(&field.states, &field.phases, field.time, dx)?;
        }
    }

    let x = scenario.grid.centers();
    let (trajectories, trajectory_warnings) = match &scenario.output.trajectories {
        Some(seed) => integrate_trajectories(&spacetime, &scenario.grid, seed, t_final)?,
        None => (Vec::new(), 0),
    };
    if scenario.output.spacetime_stride == Some(0) {
        spacetime.clear();
    }

    Ok(RunOutput {
        scenario: scenario.clone(),
        x,
        snapshots,
        spacetime,
        trajectories,
        trajectory_warnings,
        ledger,
        steps,
        final_field: field,
    })
}
