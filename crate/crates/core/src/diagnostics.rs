//! Post-processing: vehicle trajectories, grid convergence, plateau detection
//! and front tracking.

use crate::error::{Error, Result};
use crate::run::{run, Frame, RunOptions};
use crate::scenario::{Scenario, TrajectorySeeding};
use crate::stepper::Grid;

pub const DEFAULT_PLATEAU_TOL: f64 = 0.002;
pub const MIN_PLATEAU_CELLS: usize = 5;
/// Relative change of the sampled speed between frames above which a
/// trajectory sample is flagged.
pub const TRAJECTORY_SPEED_CHANGE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    /// `(t, x)` samples at frame times.
    pub samples: Vec<(f64, f64)>,
}

/// Piecewise-linear interpolation of cell-centre values, constant beyond the
/// outermost centres.
fn sample(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let s = (x - grid.x_left()) / grid.dx() - 0.5;
    let n = values.len();
    if s <= 0.0 {
        return values[0];
    }
    let j = s.floor() as usize;
    if j + 1 >= n {
        return values[n - 1];
    }
    let w = s - j as f64;
    values[j] * (1.0 - w) + values[j + 1] * w
}

/// Integrates `dx/dt = V(x, t)` through the frames with the explicit midpoint
/// rule. Vehicles are seeded along the road at `t = 0` and released at the
/// left boundary afterwards; each stops on reaching `x_right`. Returns the
/// trajectories and the number of flagged samples.
pub fn integrate_trajectories(
    frames: &[Frame],
    grid: &Grid,
    seed: &TrajectorySeeding,
    t_final: f64,
) -> Result<(Vec<Trajectory>, usize)> {
    if !(seed.seed_spacing_m > 0.0 && seed.release_interval_s > 0.0) {
        return Err(Error::Usage("trajectory seeding needs positive spacing and interval".into()));
    }
    if frames.is_empty() {
        return Ok((Vec::new(), 0));
    }
    let mut starts = Vec::new();
    let mut k = 0;
    loop {
        let x = grid.x_left() + k as f64 * seed.seed_spacing_m;
        if x >= grid.x_right() {
            break;
        }
        starts.push((0.0, x));
        k += 1;
    }
    let mut m = 1;
    loop {
        let t = m as f64 * seed.release_interval_s;
        if t >= t_final {
            break;
        }
        starts.push((t, grid.x_left()));
        m += 1;
    }

    let mut flagged = 0;
    let mut out = Vec::with_capacity(starts.len());
    for (id, (t0, x0)) in starts.into_iter().enumerate() {
        let mut samples = vec![(t0, x0)];
        let mut x = x0;
        let first = frames.partition_point(|f| f.t < t0);
        if first > 0 && first < frames.len() && frames[first].t > t0 {
            // Released between frames: start from the preceding frame.
            samples[0] = (frames[first - 1].t.max(t0), x0);
        }
        let mut t = samples[0].0;
        for w in frames[first.saturating_sub(1)..].windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.t <= t {
                continue;
            }
            let h = b.t - t;
            let wt = |tt: f64| ((tt - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            let vel = |xx: f64, tt: f64| {
                let w = wt(tt);
                sample(grid, &a.v, xx) * (1.0 - w) + sample(grid, &b.v, xx) * w
            };
            let va = vel(x, t);
            let vb = sample(grid, &b.v, x);
            if (vb - va).abs() > TRAJECTORY_SPEED_CHANGE * va.abs().max(1e-12) {
                flagged += 1;
            }
            let x_mid = x + 0.5 * h * va;
            x += h * vel(x_mid, t + 0.5 * h);
            t = b.t;
            if x >= grid.x_right() {
                samples.push((t, grid.x_right()));
                break;
            }
            samples.push((t, x));
        }
        out.push(Trajectory { id, samples });
    }
    Ok((out, flagged))
}

/// L1 distance between a coarse field and a nested fine reference, after
/// averaging fine cells onto the coarse grid.
pub fn l1_against_reference(coarse: &[f64], reference: &[f64], coarse_dx: f64) -> Result<f64> {
    if coarse.is_empty() || !reference.len().is_multiple_of(coarse.len()) {
        return Err(Error::Usage(format!(
            "grids of {} and {} cells are not nested",
            coarse.len(),
            reference.len()
        )));
    }
    let ratio = reference.len() / coarse.len();
    Ok(coarse
        .iter()
        .zip(reference.chunks_exact(ratio))
        .map(|(c, fine)| (c - fine.iter().sum::<f64>() / ratio as f64).abs())
        .sum::<f64>()
        * coarse_dx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub l1: f64,
    /// Order relative to the previous row.
    pub eoc: Option<f64>,
}

fn nested_ratio(dx: f64, ref_dx: f64) -> Result<()> {
    let r = dx / ref_dx;
    if !(r >= 1.0 && (r - r.round()).abs() < 1e-9 * r) {
        return Err(Error::Usage(format!(
            "reference spacing {ref_dx} does not divide {dx}"
        )));
    }
    Ok(())
}

/// Convergence table against a precomputed reference density at the final
/// time.
pub fn convergence_against(
    scenario: &Scenario,
    dx_list: &[f64],
    reference: &[f64],
    ref_dx: f64,
    opts: &RunOptions,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(dx_list.len());
    for &dx in dx_list {
        nested_ratio(dx, ref_dx)?;
        let out = run(&scenario.with_dx(dx)?, opts)?;
        let l1 = l1_against_reference(&out.final_field.densities(), reference, dx)?;
        let eoc = rows
            .last()
            .map(|prev| (prev.l1 / l1).ln() / (prev.dx / dx).ln());
        rows.push(ConvergenceRow { dx, l1, eoc });
    }
    Ok(rows)
}

/// Final-time density on the reference grid.
pub fn reference_density(scenario: &Scenario, ref_dx: f64, opts: &RunOptions) -> Result<Vec<f64>> {
    Ok(run(&scenario.with_dx(ref_dx)?, opts)?.final_field.densities())
}

pub fn convergence_table(
    scenario: &Scenario,
    dx_list: &[f64],
    ref_dx: f64,
    opts: &RunOptions,
) -> Result<Vec<ConvergenceRow>> {
    for &dx in dx_list {
        nested_ratio(dx, ref_dx)?;
    }
    let reference = reference_density(scenario, ref_dx, opts)?;
    convergence_against(scenario, dx_list, &reference, ref_dx, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub value: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub cells: usize,
}

impl Plateau {
    pub fn extent(&self) -> f64 {
        self.x_end - self.x_start
    }
}

/// Greedy left-to-right clustering of cells within `tol` of the running
/// cluster mean; clusters shorter than `min_cells` are dropped.
pub fn plateau_report(x: &[f64], rho: &[f64], tol: f64, min_cells: usize) -> Vec<Plateau> {
    let n = rho.len().min(x.len());
    if n == 0 {
        return Vec::new();
    }
    let half = if n > 1 { 0.5 * (x[1] - x[0]) } else { 0.0 };
    let mut found = Vec::new();
    let mut start = 0;
    let mut sum = rho[0];
    let close = |start: usize, end: usize, sum: f64, found: &mut Vec<Plateau>| {
        let cells = end - start;
        if cells >= min_cells {
            found.push(Plateau {
                value: sum / cells as f64,
                x_start: x[start] - half,
                x_end: x[end - 1] + half,
                cells,
            });
        }
    };
    for j in 1..n {
        let mean = sum / (j - start) as f64;
        if (rho[j] - mean).abs() <= tol {
            sum += rho[j];
        } else {
            close(start, j, sum, &mut found);
            start = j;
            sum = rho[j];
        }
    }
    close(start, n, sum, &mut found);
    found
}

/// Least-squares speed of the first crossing of `threshold` (scanning left
/// to right inside `x_window`) over frames inside `t_window`.
pub fn front_speed(
    x: &[f64],
    frames: &[Frame],
    threshold: f64,
    x_window: Option<(f64, f64)>,
    t_window: Option<(f64, f64)>,
) -> Result<f64> {
    let (xa, xb) = x_window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (ta, tb) = t_window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut pts = Vec::new();
    for f in frames.iter().filter(|f| f.t >= ta && f.t <= tb) {
        let crossing = (0..x.len().saturating_sub(1))
            .filter(|&j| x[j] >= xa && x[j + 1] <= xb)
            .find_map(|j| {
                let (a, b) = (f.rho[j] - threshold, f.rho[j + 1] - threshold);
                (a * b < 0.0 || (a == 0.0 && b != 0.0))
                    .then(|| x[j] + (x[j + 1] - x[j]) * a / (a - b))
            });
        if let Some(xc) = crossing {
            pts.push((f.t, xc));
        }
    }
    if pts.len() < 2 {
        return Err(Error::Diagnostic(format!(
            "threshold {threshold} crossed in {} frame(s); need at least 2",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    if stt == 0.0 {
        return Err(Error::Diagnostic("all crossings at one instant".into()));
    }
    Ok(stx / stt)
}
