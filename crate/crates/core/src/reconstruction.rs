//! Piecewise-linear reconstruction of interface point values.
//!
//! Cells are split into three domains:
//!
//! * Domain I (free flow, away from phase interfaces): only `rho` is
//!   reconstructed, with `theta = 1.5`; `q` is slaved to `rho` through the
//!   free-flow curve.
//! * Domain II (congested, away from phase interfaces): the limiter acts on
//!   local characteristic variables with `theta = 1.5`.
//! * Domain III (the six cells around each free/congested interface): both
//!   components are limited componentwise with the more dissipative
//!   `theta = 1`.
//!
//! Every emitted point value is projected back onto the admissible set.

use crate::error::{Error, Result};
use crate::model::{ModelParams, Phase, State, EPS_RHO};
use crate::par::Execution;
use crate::projection::project_phased;

pub const THETA_FREE: f64 = 1.5;
pub const THETA_CONGESTED: f64 = 1.5;
pub const THETA_TRANSITION: f64 = 1.0;

/// Below this `|q_hat - q_star|` the eigenvector matrix is treated as singular.
pub const EPS_CHAR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainTag {
    /// Domain I.
    Free,
    /// Domain II.
    Congested,
    /// Domain III.
    Transition,
}

/// Reconstructed one-sided values at a single interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceValues {
    pub minus: State,
    pub plus: State,
    pub phase_minus: Phase,
    pub phase_plus: Phase,
}

/// Generalized minmod: the smallest magnitude if all arguments share a
/// strict sign, zero otherwise.
pub fn minmod(values: &[f64]) -> Result<f64> {
    let (&first, rest) = values.split_first().ok_or(Error::EmptyMinmod)?;
    Ok(rest.iter().fold(first, |acc, &z| minmod2(acc, z)))
}

#[inline]
pub(crate) fn minmod2(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        a.min(b)
    } else if a < 0.0 && b < 0.0 {
        a.max(b)
    } else {
        0.0
    }
}

#[inline]
pub fn minmod_slope(prev: f64, cur: f64, next: f64, dx: f64, theta: f64) -> f64 {
    let back = theta * (cur - prev) / dx;
    let central = (next - prev) / (2.0 * dx);
    let fwd = theta * (next - cur) / dx;
    minmod2(minmod2(back, central), fwd)
}

fn slope_state(prev: State, cur: State, next: State, dx: f64, theta: f64) -> State {
    State::new(
        minmod_slope(prev.rho, cur.rho, next.rho, dx, theta),
        minmod_slope(prev.q, cur.q, next.q, dx, theta),
    )
}

/// Indices `J` such that a phase interface sits between cells `J` and `J + 1`.
pub fn detect_interfaces(rho_bar: &[f64], p: &ModelParams) -> Vec<usize> {
    let crit = p.rho_cr_f();
    rho_bar
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - crit) * (w[1] - crit) <= 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Cells `J-2 ..= J+3` around each interface become Domain III (truncated at
/// the array ends); the rest are tagged by density.
pub fn tag_domains(rho_bar: &[f64], interfaces: &[usize], p: &ModelParams) -> Vec<DomainTag> {
    let mut tags: Vec<DomainTag> = rho_bar
        .iter()
        .map(|&r| {
            if r <= p.rho_cr_f() {
                DomainTag::Free
            } else {
                DomainTag::Congested
            }
        })
        .collect();
    let n = tags.len();
    for &j in interfaces {
        let lo = j.saturating_sub(2);
        let hi = (j + 3).min(n.saturating_sub(1));
        for t in &mut tags[lo..=hi] {
            *t = DomainTag::Transition;
        }
    }
    tags
}

/// Eigenvector basis of the congested Jacobian at an interface average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicBasis {
    /// Columns are the right eigenvectors for `lambda1` and `lambda2`.
    pub r: [[f64; 2]; 2],
    pub r_inv: [[f64; 2]; 2],
}

impl CharacteristicBasis {
    /// Returns `None` where the basis degenerates (`q_hat` too close to
    /// `q_star`, or vanishing density).
    pub fn at(avg: State, p: &ModelParams) -> Option<Self> {
        let (rho, q) = (avg.rho, avg.q);
        let (rm, qs) = (p.rho_max(), p.q_star());
        if (q - qs).abs() < EPS_CHAR || rho < EPS_RHO || q.abs() < EPS_RHO {
            return None;
        }
        let r = [[rho / (q - qs), rho * (rm - rho) / (q * rm)], [1.0, 1.0]];
        let d = q * rho + qs * (rm - rho);
        let r_inv = [
            [q * (q - qs) * rm / (rho * d), (q - qs) * (rho - rm) / d],
            [q * (qs - q) * rm / (rho * d), q * rm / d],
        ];
        Some(CharacteristicBasis { r, r_inv })
    }

    pub fn to_characteristic(&self, u: State) -> State {
        let m = &self.r_inv;
        State::new(m[0][0] * u.rho + m[0][1] * u.q, m[1][0] * u.rho + m[1][1] * u.q)
    }

    pub fn from_characteristic(&self, g: State) -> State {
        let m = &self.r;
        State::new(m[0][0] * g.rho + m[0][1] * g.q, m[1][0] * g.rho + m[1][1] * g.q)
    }
}

/// Limits characteristic variables over the four cells `j-1 ..= j+2` around
/// interface `j+1/2` and returns `(U-, U+)` there. `None` signals a
/// degenerate basis; callers fall back to componentwise limiting.
pub fn characteristic_reconstruct(
    stencil: [State; 4],
    dx: f64,
    theta: f64,
    p: &ModelParams,
) -> Option<(State, State)> {
    let avg = (stencil[1] + stencil[2]) * 0.5;
    let basis = CharacteristicBasis::at(avg, p)?;
    let g = stencil.map(|u| basis.to_characteristic(u));
    let slope_j = slope_state(g[0], g[1], g[2], dx, theta);
    let slope_j1 = slope_state(g[1], g[2], g[3], dx, theta);
    let minus = g[1] + slope_j * (0.5 * dx);
    let plus = g[2] - slope_j1 * (0.5 * dx);
    Some((basis.from_characteristic(minus), basis.from_characteristic(plus)))
}

#[derive(Clone, Copy)]
enum Side {
    /// Value at the right face of the cell (`U-` there).
    Right,
    /// Value at the left face of the cell (`U+` there).
    Left,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Right => 0.5,
            Side::Left => -0.5,
        }
    }
}

/// Inputs for [`reconstruct`]: extended arrays including two ghost cells on
/// each side.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedField<'a> {
    pub states: &'a [State],
    pub phases: &'a [Phase],
    pub tags: &'a [DomainTag],
    pub dx: f64,
}

impl ExtendedField<'_> {
    fn componentwise(&self, k: usize, side: Side, theta: f64) -> State {
        let s = self.states;
        let slope = slope_state(s[k - 1], s[k], s[k + 1], self.dx, theta);
        s[k] + slope * (side.sign() * self.dx)
    }

    fn free_side(&self, k: usize, side: Side, p: &ModelParams) -> State {
        let s = self.states;
        let slope = minmod_slope(s[k - 1].rho, s[k].rho, s[k + 1].rho, self.dx, THETA_FREE);
        let rho = s[k].rho + side.sign() * self.dx * slope;
        let q = if (0.0..=p.rho_cr_f()).contains(&rho) {
            p.q_free_unchecked(rho)
        } else {
            s[k].q
        };
        State::new(rho, q)
    }

    /// Characteristic reconstruction at the interface between ext cells
    /// `f` and `f + 1`, if the stencil is fully congested and the basis is
    /// regular.
    fn characteristic_at(&self, f: usize, p: &ModelParams) -> Option<(State, State)> {
        let idx = [f - 1, f, f + 1, f + 2];
        if idx.iter().any(|&i| self.phases[i] != Phase::Congested) {
            return None;
        }
        let stencil = idx.map(|i| self.states[i]);
        characteristic_reconstruct(stencil, self.dx, THETA_CONGESTED, p)
    }

    fn interface(&self, f: usize, p: &ModelParams) -> Result<InterfaceValues> {
        let (tl, tr) = (self.tags[f], self.tags[f + 1]);
        let char_vals = if tl == DomainTag::Congested || tr == DomainTag::Congested {
            self.characteristic_at(f, p)
        } else {
            None
        };

        let raw_minus = match tl {
            DomainTag::Free => self.free_side(f, Side::Right, p),
            DomainTag::Transition => self.componentwise(f, Side::Right, THETA_TRANSITION),
            DomainTag::Congested => match char_vals {
                Some((m, _)) => m,
                None => self.componentwise(f, Side::Right, THETA_TRANSITION),
            },
        };
        let raw_plus = match tr {
            DomainTag::Free => self.free_side(f + 1, Side::Left, p),
            DomainTag::Transition => self.componentwise(f + 1, Side::Left, THETA_TRANSITION),
            DomainTag::Congested => match char_vals {
                Some((_, pl)) => pl,
                None => self.componentwise(f + 1, Side::Left, THETA_TRANSITION),
            },
        };

        let (minus, phase_minus) = project_phased(raw_minus, p)?;
        let (plus, phase_plus) = project_phased(raw_plus, p)?;
        Ok(InterfaceValues {
            minus,
            plus,
            phase_minus,
            phase_plus,
        })
    }
}

/// Point values at every interface between ext cells `f` and `f + 1` for
/// `f = 1 ..= len - 3`; with two ghosts per side that is exactly the
/// physical interfaces, boundary faces included.
pub fn reconstruct(
    field: ExtendedField<'_>,
    p: &ModelParams,
    exec: Execution,
) -> Result<Vec<InterfaceValues>> {
    let m = field.states.len();
    if m < 5 || field.phases.len() != m || field.tags.len() != m {
        return Err(Error::Usage(format!(
            "reconstruction needs matching arrays of at least 5 cells, got {m}"
        )));
    }
    exec.try_map(m - 3, |i| {
        field.interface(i + 1, p).map_err(|e| Error::Interface {
            interface: i,
            source: Box::new(e),
        })
    })
}
