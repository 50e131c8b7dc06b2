//! Central-upwind finite-volume solver for a two-phase traffic model with
//! a scalar free-flow phase and a 2x2 congested phase.
//!
//! The pipeline per time stage is: ghost fill, domain tagging,
//! reconstruction, central-upwind fluxes, SSP-RK3 update, projection.

pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod model;
pub mod output;
pub mod par;
pub mod projection;
pub mod reconstruction;
pub mod run;
pub mod scenario;
pub mod stepper;

pub use error::{Error, ErrorKind, Result};
pub use model::{Membership, ModelParams, Phase, State};
pub use par::Execution;
pub use run::{run, RunOptions, RunOutput};
pub use scenario::{catalog, parse_scenario, serialize_scenario, Scenario};
