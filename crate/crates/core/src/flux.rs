//! Central-upwind numerical flux with built-in anti-diffusion.

use crate::error::Result;
use crate::model::{ModelParams, Phase, State};
use crate::reconstruction::{minmod2, InterfaceValues};

/// Relative guard on `a+ - a-` (scaled by `v_max`).
pub const EPS_SPEED_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSpeeds {
    pub a_plus: f64,
    pub a_minus: f64,
}

impl LocalSpeeds {
    pub fn max_abs(self) -> f64 {
        self.a_plus.max(-self.a_minus)
    }
}

/// One-sided local speeds. In free flow both eigenvalues equal `v_max`, which
/// dominates every congested eigenvalue, so any free side pins `a+ = v_max`.
pub fn local_speeds(
    minus: State,
    plus: State,
    phases: (Phase, Phase),
    p: &ModelParams,
) -> Result<LocalSpeeds> {
    use Phase::*;
    let speeds = match phases {
        (Congested, Congested) => {
            let (l1m, l2m) = p.eigen_congested(minus)?;
            let (l1p, l2p) = p.eigen_congested(plus)?;
            LocalSpeeds {
                a_plus: l2m.max(l2p).max(0.0),
                a_minus: l1m.min(l1p).min(0.0),
            }
        }
        (Free, Free) => LocalSpeeds {
            a_plus: p.v_max(),
            a_minus: 0.0,
        },
        (Congested, Free) => LocalSpeeds {
            a_plus: p.v_max(),
            a_minus: p.eigen_congested(minus)?.0.min(0.0),
        },
        (Free, Congested) => LocalSpeeds {
            a_plus: p.v_max(),
            a_minus: p.eigen_congested(plus)?.0.min(0.0),
        },
    };
    Ok(speeds)
}

/// Intermediate state of the local Riemann fan. `None` when the speeds are
/// degenerate.
pub fn u_star(
    minus: State,
    plus: State,
    f_minus: State,
    f_plus: State,
    speeds: LocalSpeeds,
    v_max: f64,
) -> Option<State> {
    let width = speeds.a_plus - speeds.a_minus;
    if width <= EPS_SPEED_REL * v_max {
        return None;
    }
    Some((speeds.a_plus * plus - speeds.a_minus * minus - (f_plus - f_minus)) * (1.0 / width))
}

pub fn anti_diffusion(minus: State, plus: State, star: State) -> State {
    let a = plus - star;
    let b = star - minus;
    State::new(minmod2(a.rho, b.rho), minmod2(a.q, b.q))
}

/// Flux at one interface together with the local speeds used.
pub fn cu_flux_with_speeds(v: &InterfaceValues, p: &ModelParams) -> Result<(State, LocalSpeeds)> {
    let f_minus = p.flux(v.minus, v.phase_minus)?;
    let f_plus = p.flux(v.plus, v.phase_plus)?;
    let speeds = local_speeds(v.minus, v.plus, (v.phase_minus, v.phase_plus), p)?;
    let Some(star) = u_star(v.minus, v.plus, f_minus, f_plus, speeds, p.v_max()) else {
        return Ok(((f_minus + f_plus) * 0.5, speeds));
    };
    let q = anti_diffusion(v.minus, v.plus, star);
    let LocalSpeeds { a_plus, a_minus } = speeds;
    let width = a_plus - a_minus;
    let flux = (a_plus * f_minus - a_minus * f_plus) * (1.0 / width)
        + (v.plus - v.minus - q) * (a_plus * a_minus / width);
    Ok((flux, speeds))
}

pub fn cu_numerical_flux(v: &InterfaceValues, p: &ModelParams) -> Result<State> {
    cu_flux_with_speeds(v, p).map(|(f, _)| f)
}
