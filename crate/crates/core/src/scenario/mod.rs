//! Scenario documents, initial data and the built-in catalog.

mod boundary;
pub mod catalog;

pub use boundary::{bc_q_closure, boundary_state, BoundarySpec, PulseCenter, CLOSURE_A};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::model::{Membership, ModelParams, Phase, State};
use crate::stepper::{CellField, Grid};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CFL: f64 = 0.4;

/// One constant piece of piecewise initial data, given as density and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub rho: f64,
    pub v: f64,
    pub phase: Phase,
}

impl Piece {
    pub const fn new(rho: f64, v: f64, phase: Phase) -> Self {
        Piece { rho, v, phase }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Piece `i` covers cell centres in `(breakpoints[i-1], breakpoints[i]]`.
    Piecewise {
        breakpoints: Vec<f64>,
        pieces: Vec<Piece>,
    },
    /// Free-flow background with a `cos^4` bump; cell averages are exact to
    /// quadrature accuracy.
    FreeBump {
        background: f64,
        amplitude: f64,
        center: f64,
        half_width: f64,
    },
}

impl InitialCondition {
    /// Density of the bump profile at `x`.
    pub fn bump_density(&self, x: f64) -> Option<f64> {
        match *self {
            InitialCondition::FreeBump {
                background,
                amplitude,
                center,
                half_width,
            } => {
                let z = (x - center) / half_width;
                let bump = if z.abs() < 1.0 {
                    (0.5 * std::f64::consts::PI * z).cos().powi(4)
                } else {
                    0.0
                };
                Some(background + amplitude * bump)
            }
            InitialCondition::Piecewise { .. } => None,
        }
    }

    fn validate(&self, grid: &Grid, p: &ModelParams) -> Result<()> {
        match self {
            InitialCondition::Piecewise { breakpoints, pieces } => {
                if pieces.len() != breakpoints.len() + 1 {
                    return Err(Error::validation(
                        "ic.pieces",
                        format!(
                            "expected {} pieces for {} breakpoints, got {}",
                            breakpoints.len() + 1,
                            breakpoints.len(),
                            pieces.len()
                        ),
                    ));
                }
                let mut prev = grid.x_left();
                for (i, &b) in breakpoints.iter().enumerate() {
                    if !(b > prev && b < grid.x_right()) {
                        return Err(Error::validation(
                            format!("ic.breakpoints[{i}]"),
                            format!("{b} must be ascending and strictly inside the domain"),
                        ));
                    }
                    prev = b;
                }
                for (i, piece) in pieces.iter().enumerate() {
                    piece_state(piece, p).map_err(|e| {
                        Error::validation(format!("ic.pieces[{i}]"), e.to_string())
                    })?;
                }
                Ok(())
            }
            InitialCondition::FreeBump {
                background,
                amplitude,
                half_width,
                ..
            } => {
                let top = background + amplitude.max(0.0);
                let bottom = background + amplitude.min(0.0);
                if !(*half_width > 0.0) {
                    return Err(Error::validation("ic.half_width", "must be positive"));
                }
                if !(bottom >= 0.0 && top <= p.rho_cr_f()) {
                    return Err(Error::validation(
                        "ic",
                        format!("bump densities [{bottom}, {top}] leave [0, rho_cr_f]"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Cell averages on `grid`.
    pub fn cell_states(&self, grid: &Grid, p: &ModelParams) -> Result<Vec<State>> {
        match self {
            InitialCondition::Piecewise { breakpoints, pieces } => {
                let states = pieces
                    .iter()
                    .map(|piece| piece_state(piece, p))
                    .collect::<Result<Vec<_>>>()?;
                Ok(grid
                    .centers()
                    .iter()
                    .map(|&x| states[breakpoints.iter().filter(|&&b| x > b).count()])
                    .collect())
            }
            InitialCondition::FreeBump { .. } => {
                // Five-point Gauss-Legendre nodes and weights on [-1, 1].
                const NODES: [f64; 5] = [
                    -0.906_179_845_938_664,
                    -0.538_469_310_105_683,
                    0.0,
                    0.538_469_310_105_683,
                    0.906_179_845_938_664,
                ];
                const WEIGHTS: [f64; 5] = [
                    0.236_926_885_056_189,
                    0.478_628_670_499_366,
                    0.568_888_888_888_889,
                    0.478_628_670_499_366,
                    0.236_926_885_056_189,
                ];
                let half = 0.5 * grid.dx();
                (0..grid.n_cells())
                    .map(|j| {
                        let xc = grid.center(j);
                        let rho: f64 = NODES
                            .iter()
                            .zip(WEIGHTS)
                            .map(|(&n, w)| 0.5 * w * self.bump_density(xc + n * half).unwrap())
                            .sum();
                        Ok(State::new(rho, p.q_free(rho)?))
                    })
                    .collect()
            }
        }
    }
}

fn piece_state(piece: &Piece, p: &ModelParams) -> Result<State> {
    let s = p.state_from_density_speed(piece.rho, piece.v, piece.phase)?;
    match p.classify(s) {
        Membership::Outside => Err(Error::InconsistentInput(format!(
            "state (rho = {}, q = {}) is not admissible",
            s.rho, s.q
        ))),
        m if m.phase() != Some(piece.phase) => Err(Error::InconsistentInput(format!(
            "state (rho = {}, q = {}) does not belong to the {} phase",
            s.rho,
            s.q,
            piece.phase.as_str()
        ))),
        _ => Ok(s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySeeding {
    /// Spacing of vehicles placed along the road at `t = 0`.
    pub seed_spacing_m: f64,
    /// Interval between vehicles released at the left boundary.
    pub release_interval_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPlan {
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Steps between space-time frames; `0` disables, absent means automatic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacetime_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectorySeeding>,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub params: ModelParams,
    pub grid: Grid,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_final: f64,
    #[serde(deserialize_with = "deserialize_ic")]
    pub ic: InitialCondition,
    pub bc_left: BoundarySpec,
    pub bc_right: BoundarySpec,
    #[serde(default)]
    pub output: OutputPlan,
}

/// Accepts initial data without a `kind` key as piecewise data.
fn deserialize_ic<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<InitialCondition, D::Error> {
    let mut value = serde_json::Value::deserialize(d)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.entry("kind")
            .or_insert_with(|| serde_json::Value::String("piecewise".into()));
    }
    serde_json::from_value(value).map_err(serde::de::Error::custom)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::validation("cfl", format!("{} is outside (0, 1)", self.cfl)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation(
                "t_final",
                format!("{} must be finite and non-negative", self.t_final),
            ));
        }
        for (i, &t) in self.output.snapshots.iter().enumerate() {
            if !(t >= 0.0 && t <= self.t_final) {
                return Err(Error::validation(
                    format!("output.snapshots[{i}]"),
                    format!("{t} is outside [0, t_final = {}]", self.t_final),
                ));
            }
        }
        if let Some(seed) = &self.output.trajectories {
            if !(seed.seed_spacing_m > 0.0 && seed.release_interval_s > 0.0) {
                return Err(Error::validation(
                    "output.trajectories",
                    "seed spacing and release interval must be positive",
                ));
            }
        }
        self.ic.validate(&self.grid, &self.params)?;
        self.bc_left.validate(self.t_final, &self.params, "bc_left")?;
        self.bc_right.validate(self.t_final, &self.params, "bc_right")?;
        Ok(())
    }

    /// Snapshot times sorted and deduplicated.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut t = self.output.snapshots.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Same scenario on a grid of spacing `dx`.
    pub fn with_dx(&self, dx: f64) -> Result<Scenario> {
        let grid = Grid::with_spacing(self.grid.x_left(), self.grid.x_right(), dx)?;
        Ok(Scenario {
            grid,
            ..self.clone()
        })
    }

    /// Projected initial field.
    pub fn initial_field(&self) -> Result<CellField> {
        let states = self.ic.cell_states(&self.grid, &self.params)?;
        CellField::new(self.grid, states, &self.params)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn serialize_scenario(s: &Scenario) -> Result<String> {
    Ok(serde_json::to_string_pretty(s)?)
}
