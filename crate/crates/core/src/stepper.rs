//! Method-of-lines time integration.
//!
//! Each right-hand-side evaluation fills two ghost cells per side, tags
//! domains, reconstructs point values, and differences central-upwind fluxes.
//! Time is advanced with the three-stage SSP Runge-Kutta method, and every
//! stage is followed by a cell-wise projection onto the admissible set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::cu_flux_with_speeds;
use crate::model::{Membership, ModelParams, Phase, State};
use crate::par::Execution;
use crate::projection::{project_cells, project_phased};
use crate::reconstruction::{detect_interfaces, reconstruct, tag_domains, DomainTag, ExtendedField};
use crate::scenario::{boundary_state, BoundarySpec};

pub const GHOSTS: usize = 2;
pub const MIN_CELLS: usize = 8;

/// Uniform grid on `[x_left, x_right]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct Grid {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        Grid::new(r.x_left, r.x_right, r.n_cells)
    }
}

impl From<Grid> for RawGrid {
    fn from(g: Grid) -> Self {
        RawGrid {
            x_left: g.x_left,
            x_right: g.x_right,
            n_cells: g.n_cells,
        }
    }
}

impl Grid {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite() && x_right > x_left) {
            return Err(Error::validation(
                "grid",
                format!("need finite x_left < x_right, got [{x_left}, {x_right}]"),
            ));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::validation(
                "grid.n_cells",
                format!("need at least {MIN_CELLS} cells, got {n_cells}"),
            ));
        }
        Ok(Grid {
            x_left,
            x_right,
            n_cells,
        })
    }

    /// Grid of spacing `dx`; the domain length must be a whole number of cells.
    pub fn with_spacing(x_left: f64, x_right: f64, dx: f64) -> Result<Self> {
        let cells = (x_right - x_left) / dx;
        let n = cells.round();
        if !(dx > 0.0) || (cells - n).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::Usage(format!(
                "dx = {dx} does not divide the domain [{x_left}, {x_right}]"
            )));
        }
        Grid::new(x_left, x_right, n as usize)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }
    pub fn x_right(&self) -> f64 {
        self.x_right
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }
    pub fn dx(&self) -> f64 {
        self.length() / self.n_cells as f64
    }
    pub fn center(&self, j: usize) -> f64 {
        self.x_left + (j as f64 + 0.5) * self.dx()
    }
    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|j| self.center(j)).collect()
    }
}

/// Cell averages with their phase and domain tags.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub grid: Grid,
    pub states: Vec<State>,
    pub phases: Vec<Phase>,
    pub tags: Vec<DomainTag>,
    pub time: f64,
}

impl CellField {
    /// Builds a field from arbitrary cell averages, projecting them first.
    pub fn new(grid: Grid, states: Vec<State>, p: &ModelParams) -> Result<Self> {
        if states.len() != grid.n_cells() {
            return Err(Error::Usage(format!(
                "{} states for a grid of {} cells",
                states.len(),
                grid.n_cells()
            )));
        }
        let mut field = CellField {
            grid,
            phases: vec![Phase::Free; states.len()],
            tags: Vec::new(),
            states,
            time: 0.0,
        };
        field.project(p)?;
        Ok(field)
    }

    /// Cell-wise projection with phase and domain tags refreshed.
    pub fn project(&mut self, p: &ModelParams) -> Result<()> {
        project_cells(&mut self.states, &mut self.phases, p)?;
        self.refresh_tags(p);
        Ok(())
    }

    fn refresh_tags(&mut self, p: &ModelParams) {
        let rho = self.densities();
        self.tags = tag_domains(&rho, &detect_interfaces(&rho, p), p);
    }

    pub fn densities(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.rho).collect()
    }

    /// Total number of vehicles, summed left to right.
    pub fn mass(&self) -> f64 {
        self.states.iter().map(|s| s.rho).sum::<f64>() * self.grid.dx()
    }

    pub fn speeds(&self, p: &ModelParams) -> Result<Vec<f64>> {
        self.states
            .iter()
            .zip(&self.phases)
            .map(|(&s, &ph)| p.speed(s, ph))
            .collect()
    }
}

/// Cell data extended by [`GHOSTS`] ghost cells per side.
#[derive(Debug, Clone, PartialEq)]
pub struct Extended {
    pub states: Vec<State>,
    pub phases: Vec<Phase>,
    pub tags: Vec<DomainTag>,
}

impl Extended {
    pub fn view(&self, dx: f64) -> ExtendedField<'_> {
        ExtendedField {
            states: &self.states,
            phases: &self.phases,
            tags: &self.tags,
            dx,
        }
    }
}

fn ghost_value(
    bc: &BoundarySpec,
    edge: (State, Phase),
    t: f64,
    p: &ModelParams,
) -> Result<(State, Phase)> {
    if bc.is_free() {
        return Ok(edge);
    }
    boundary_state(bc, t, p)
        .and_then(|s| project_phased(s, p))
        .map_err(|e| Error::Boundary {
            t,
            source: Box::new(e),
        })
}

/// Pads `states` with ghost cells. Free boundaries copy the edge cell;
/// Dirichlet boundaries use the projected boundary state at time `t`.
pub fn ghost_fill(
    states: &[State],
    phases: &[Phase],
    bc_left: &BoundarySpec,
    bc_right: &BoundarySpec,
    t: f64,
    p: &ModelParams,
) -> Result<Extended> {
    let n = states.len();
    let (first, last) = ((states[0], phases[0]), (states[n - 1], phases[n - 1]));
    let left = ghost_value(bc_left, first, t, p)?;
    let right = ghost_value(bc_right, last, t, p)?;

    let mut ext_states = Vec::with_capacity(n + 2 * GHOSTS);
    let mut ext_phases = Vec::with_capacity(n + 2 * GHOSTS);
    ext_states.extend([left.0; GHOSTS]);
    ext_phases.extend([left.1; GHOSTS]);
    ext_states.extend_from_slice(states);
    ext_phases.extend_from_slice(phases);
    ext_states.extend([right.0; GHOSTS]);
    ext_phases.extend([right.1; GHOSTS]);

    let rho: Vec<f64> = ext_states.iter().map(|s| s.rho).collect();
    let mut tags = tag_domains(&rho, &detect_interfaces(&rho, p), p);
    // Copied ghosts join the stencil with the edge cell's strategy.
    if bc_left.is_free() {
        let edge = tags[GHOSTS];
        tags[..GHOSTS].fill(edge);
    }
    if bc_right.is_free() {
        let edge = tags[GHOSTS + n - 1];
        tags[GHOSTS + n..].fill(edge);
    }

    Ok(Extended {
        states: ext_states,
        phases: ext_phases,
        tags,
    })
}

/// Semi-discrete right-hand side together with the boundary mass fluxes and
/// the largest local wave speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub derivative: Vec<State>,
    /// Numerical flux at every interface, boundary faces included.
    pub fluxes: Vec<State>,
    pub max_speed: f64,
}

impl Rhs {
    pub fn flux_in(&self) -> f64 {
        self.fluxes[0].rho
    }
    pub fn flux_out(&self) -> f64 {
        self.fluxes[self.fluxes.len() - 1].rho
    }
}

pub fn rhs(ext: &Extended, dx: f64, p: &ModelParams, exec: Execution) -> Result<Rhs> {
    let values = reconstruct(ext.view(dx), p, exec)?;
    let per_face = exec.try_map(values.len(), |i| {
        cu_flux_with_speeds(&values[i], p).map_err(|e| Error::Interface {
            interface: i,
            source: Box::new(e),
        })
    })?;
    let max_speed = per_face
        .iter()
        .map(|(_, s)| s.max_abs())
        .fold(0.0_f64, f64::max);
    let fluxes: Vec<State> = per_face.into_iter().map(|(f, _)| f).collect();

    let n = fluxes.len() - 1;
    let mut derivative = vec![State::ZERO; n];
    let inv_dx = 1.0 / dx;
    exec.for_each_indexed(&mut derivative, |j, d| {
        *d = (fluxes[j + 1] - fluxes[j]) * (-inv_dx);
    });
    Ok(Rhs {
        derivative,
        fluxes,
        max_speed,
    })
}

/// CFL time step `nu dx / a_max`, or `None` when every wave speed vanishes.
pub fn cfl_dt(max_speed: f64, dx: f64, nu: f64) -> Option<f64> {
    (max_speed > 0.0).then(|| nu * dx / max_speed)
}

/// Summary of one completed time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Stage-weighted mass flux through the left boundary face.
    pub flux_in: f64,
    /// Stage-weighted mass flux through the right boundary face.
    pub flux_out: f64,
    pub mass_before: f64,
    pub mass_after: f64,
}

/// SSP-RK3 driver bound to one problem setup.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub params: ModelParams,
    pub bc_left: BoundarySpec,
    pub bc_right: BoundarySpec,
    pub exec: Execution,
    /// Re-verify admissibility of every cell after every stage.
    pub check_stages: bool,
}

impl Stepper {
    pub fn new(params: ModelParams, bc_left: BoundarySpec, bc_right: BoundarySpec) -> Self {
        Stepper {
            params,
            bc_left,
            bc_right,
            exec: Execution::default(),
            check_stages: false,
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn with_stage_checks(mut self, on: bool) -> Self {
        self.check_stages = on;
        self
    }

    pub fn ghost_fill(&self, states: &[State], phases: &[Phase], t: f64) -> Result<Extended> {
        ghost_fill(states, phases, &self.bc_left, &self.bc_right, t, &self.params)
    }

    /// Right-hand side for the given cell data at time `t`.
    pub fn rhs_at(&self, states: &[State], phases: &[Phase], t: f64, dx: f64) -> Result<Rhs> {
        let ext = self.ghost_fill(states, phases, t)?;
        rhs(&ext, dx, &self.params, self.exec)
    }

    /// `base * w_base + (stage + dt L) * (1 - w_base)`, then projection.
    fn stage(
        &self,
        base: &[State],
        stage: &[State],
        k: &Rhs,
        dt: f64,
        w_base: f64,
        t_stage: f64,
    ) -> Result<(Vec<State>, Vec<Phase>)> {
        let w_stage = 1.0 - w_base;
        let mut next: Vec<State> = base
            .iter()
            .zip(stage)
            .zip(&k.derivative)
            .map(|((&b, &s), &d)| {
                if w_base == 0.0 {
                    s + d * dt
                } else {
                    b * w_base + (s + d * dt) * w_stage
                }
            })
            .collect();
        if let Some(cell) = next.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { cell, t: t_stage });
        }
        let mut phases = vec![Phase::Free; next.len()];
        project_cells(&mut next, &mut phases, &self.params).map_err(|e| match e {
            Error::Cell { cell, source } => match *source {
                Error::InadmissibleDensity { .. } => Error::Inadmissible { cell, t: t_stage },
                other => Error::Cell {
                    cell,
                    source: Box::new(other),
                },
            },
            other => other,
        })?;
        if self.check_stages {
            if let Some(cell) = next
                .iter()
                .position(|&s| self.params.classify(s) == Membership::Outside)
            {
                return Err(Error::Inadmissible { cell, t: t_stage });
            }
        }
        Ok((next, phases))
    }

    /// One SSP-RK3 step of size `dt`, reusing `k1` evaluated at the current
    /// field.
    pub fn step_with(&self, field: &mut CellField, dt: f64, k1: Rhs) -> Result<StepReport> {
        let t = field.time;
        let dx = field.grid.dx();
        let mass_before = field.mass();
        let u0 = &field.states;

        let (u1, ph1) = self.stage(u0, u0, &k1, dt, 0.0, t + dt)?;
        let k2 = self.rhs_at(&u1, &ph1, t + dt, dx)?;
        let (u2, ph2) = self.stage(u0, &u1, &k2, dt, 0.75, t + 0.5 * dt)?;
        let k3 = self.rhs_at(&u2, &ph2, t + 0.5 * dt, dx)?;
        let (u3, ph3) = self.stage(u0, &u2, &k3, dt, 1.0 / 3.0, t + dt)?;

        let weighted = |f: fn(&Rhs) -> f64| (f(&k1) + f(&k2) + 4.0 * f(&k3)) / 6.0;
        let flux_in = weighted(Rhs::flux_in);
        let flux_out = weighted(Rhs::flux_out);

        field.states = u3;
        field.phases = ph3;
        field.time = t + dt;
        field.refresh_tags(&self.params);
        Ok(StepReport {
            dt,
            flux_in,
            flux_out,
            mass_before,
            mass_after: field.mass(),
        })
    }

    pub fn ssp_rk3_step(&self, field: &mut CellField, dt: f64) -> Result<StepReport> {
        let k1 = self.rhs_at(&field.states, &field.phases, field.time, field.grid.dx())?;
        self.step_with(field, dt, k1)
    }
}
