//! Boundary specifications and the time-dependent Dirichlet families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::projection::project;

/// Default shape parameter of the congested `q` closure.
pub const CLOSURE_A: f64 = 30.0 / 7.0;

fn default_a() -> f64 {
    CLOSURE_A
}

/// `q` carried by boundary data of density `rho_b`: a smooth congested
/// closure above the free critical density and the free-flow curve below it.
pub fn bc_q_closure(rho_b: f64, a: f64, p: &ModelParams) -> Result<f64> {
    let rho_max = p.rho_max();
    if !(rho_b > 0.0 && rho_b < rho_max) {
        return Err(Error::OutOfDomain {
            quantity: "boundary q closure",
            value: rho_b,
        });
    }
    let r = rho_b / rho_max;
    if rho_b > p.rho_cr_f() {
        let blend = ((a * r).powi(20) + (1.0 - r).powi(20)).powf(1.0 / 20.0);
        Ok(21.0 / 4.0 * rho_max * (1.0 + (a - 1.0) * r - blend))
    } else {
        Ok(rho_b * p.v_max() / (1.0 - r))
    }
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

/// Placement of the stop-and-go pulse centre `T0(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PulseCenter {
    /// One pulse per window: `T0 = period * floor(t / period) + offset`.
    #[default]
    Periodic,
    /// `T0 = floor(t / period) + offset`, which yields a single early pulse.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// Zero-order extrapolation.
    Free,
    DirichletConstant {
        rho: f64,
        #[serde(default = "default_a")]
        a: f64,
    },
    /// Two `sech^2` pulse profiles switching at `switch_time`.
    DirichletPulse {
        early_base: f64,
        early_amplitude: f64,
        late_base: f64,
        late_amplitude: f64,
        tail_ratio: f64,
        w: f64,
        t0: f64,
        t1: f64,
        switch_time: f64,
        #[serde(default = "default_a")]
        a: f64,
    },
    /// Periodic stop-and-go pulses, then a held congested state, then free
    /// flow.
    DirichletStopAndGo {
        base: f64,
        amplitude: f64,
        tail_ratio: f64,
        w: f64,
        t1: f64,
        #[serde(default)]
        pulse_center: PulseCenter,
        period: f64,
        offset: f64,
        pulse_end: f64,
        hold_until: f64,
        hold_rho: f64,
        release_rho: f64,
        #[serde(default = "default_a")]
        a: f64,
    },
}

impl BoundarySpec {
    pub fn is_free(&self) -> bool {
        matches!(self, BoundarySpec::Free)
    }

    /// Boundary density at time `t`; `None` for free boundaries.
    pub fn density(&self, t: f64) -> Option<f64> {
        match *self {
            BoundarySpec::Free => None,
            BoundarySpec::DirichletConstant { rho, .. } => Some(rho),
            BoundarySpec::DirichletPulse {
                early_base,
                early_amplitude,
                late_base,
                late_amplitude,
                tail_ratio,
                w,
                t0,
                t1,
                switch_time,
                ..
            } => {
                let (base, amp, center) = if t <= switch_time {
                    (early_base, early_amplitude, 0.5 * t0)
                } else {
                    (late_base, late_amplitude, t0)
                };
                Some(
                    base + amp
                        * (sech2((t - center) / w) - tail_ratio * sech2((t - t1 - center) / w)),
                )
            }
            BoundarySpec::DirichletStopAndGo {
                base,
                amplitude,
                tail_ratio,
                w,
                t1,
                pulse_center,
                period,
                offset,
                pulse_end,
                hold_until,
                hold_rho,
                release_rho,
                ..
            } => {
                if t <= pulse_end {
                    let center = match pulse_center {
                        PulseCenter::Periodic => period * (t / period).floor() + offset,
                        PulseCenter::Literal => (t / period).floor() + offset,
                    };
                    Some(
                        base + amplitude
                            * (sech2((t - center) / w)
                                - tail_ratio * sech2((t - t1 - center) / w)),
                    )
                } else if t < hold_until {
                    Some(hold_rho)
                } else {
                    Some(release_rho)
                }
            }
        }
    }

    fn closure_a(&self) -> f64 {
        match *self {
            BoundarySpec::Free => CLOSURE_A,
            BoundarySpec::DirichletConstant { a, .. }
            | BoundarySpec::DirichletPulse { a, .. }
            | BoundarySpec::DirichletStopAndGo { a, .. } => a,
        }
    }

    /// Samples the density on `[0, t_end]` and rejects profiles leaving
    /// `(0, rho_max)`.
    pub fn validate(&self, t_end: f64, p: &ModelParams, field: &str) -> Result<()> {
        let width = match *self {
            BoundarySpec::Free => return Ok(()),
            BoundarySpec::DirichletConstant { .. } => f64::INFINITY,
            BoundarySpec::DirichletPulse { w, .. } | BoundarySpec::DirichletStopAndGo { w, .. } => {
                if !(w > 0.0) {
                    return Err(Error::validation(field, format!("pulse width w must be positive, got {w}")));
                }
                w
            }
        };
        let n = ((t_end / (width / 20.0)).ceil() as usize).clamp(1000, 1_000_000);
        for i in 0..=n {
            let t = t_end * i as f64 / n as f64;
            let rho = self.density(t).expect("dirichlet");
            if !(rho > 0.0 && rho < p.rho_max()) || !rho.is_finite() {
                return Err(Error::validation(
                    field,
                    format!("boundary density {rho} at t = {t} leaves (0, rho_max)"),
                ));
            }
        }
        Ok(())
    }
}

/// Admissible boundary state at time `t`.
pub fn boundary_state(spec: &BoundarySpec, t: f64, p: &ModelParams) -> Result<State> {
    let rho = spec
        .density(t)
        .ok_or_else(|| Error::Usage("free boundaries carry no Dirichlet state".into()))?;
    let q = bc_q_closure(rho, spec.closure_a(), p)?;
    project(State::new(rho, q), p)
}
