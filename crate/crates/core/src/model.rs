//! Algebra of the two-phase traffic model.
//!
//! Free flow lives on the curve `L_f` where vehicles travel at `v_max` and
//! `q` is slaved to `rho`. Congested flow lives in the region `Omega_c`
//! bounded below by the line `L2`, above by `L3` (for `rho < rho_cr_c`) or
//! the line `L1` (for `rho >= rho_cr_c`), and on the right by `rho = rho_max`.
//!
//! Units are veh/m, m/s and veh/s throughout.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard for divisions by density.
pub const EPS_RHO: f64 = 1e-12;

/// Absolute tolerance (in `q` units) for set membership.
pub const EPS_MEMBERSHIP: f64 = 1e-9;

/// Conserved pair `(rho, q)`. Also used for flux vectors and differences of
/// states, which share the same two-component layout.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub rho: f64,
    pub q: f64,
}

impl State {
    pub const ZERO: State = State { rho: 0.0, q: 0.0 };

    pub const fn new(rho: f64, q: f64) -> Self {
        State { rho, q }
    }

    pub fn is_finite(self) -> bool {
        self.rho.is_finite() && self.q.is_finite()
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.rho + o.rho, self.q + o.q)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.rho - o.rho, self.q - o.q)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.rho, -self.q)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, a: f64) -> State {
        State::new(self.rho * a, self.q * a)
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, u: State) -> State {
        State::new(self * u.rho, self * u.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Free,
    Congested,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Free => "free",
            Phase::Congested => "congested",
        }
    }
}

/// Where a `(rho, q)` pair sits relative to the admissible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    OnFreeCurve,
    InCongested,
    Outside,
}

impl Membership {
    pub fn phase(self) -> Option<Phase> {
        match self {
            Membership::OnFreeCurve => Some(Phase::Free),
            Membership::InCongested => Some(Phase::Congested),
            Membership::Outside => None,
        }
    }
}

/// Model constants. The congested critical density `rho_cr_c` is derived at
/// construction and never read from input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    v_max: f64,
    v_c_plus: f64,
    rho_max: f64,
    q_star: f64,
    rho_cr_f: f64,
    q_plus: f64,
    q_minus: f64,
    rho_cr_c: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams::new(30.0, 24.0, 0.16, 0.6, 0.02, 0.93186, 0.18856)
            .expect("default parameters are consistent")
    }
}

impl ModelParams {
    pub fn new(
        v_max: f64,
        v_c_plus: f64,
        rho_max: f64,
        q_star: f64,
        rho_cr_f: f64,
        q_plus: f64,
        q_minus: f64,
    ) -> Result<Self> {
        let all = [v_max, v_c_plus, rho_max, q_star, rho_cr_f, q_plus, q_minus];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if !(0.0 < v_c_plus && v_c_plus <= v_max) {
            return Err(Error::InvalidParams(format!(
                "need 0 < v_c_plus <= v_max, got v_c_plus = {v_c_plus}, v_max = {v_max}"
            )));
        }
        if !(q_minus < q_star && q_star < q_plus) {
            return Err(Error::InvalidParams(format!(
                "need q_minus < q_star < q_plus, got {q_minus}, {q_star}, {q_plus}"
            )));
        }
        if !(0.0 < rho_cr_f && rho_cr_f < rho_max) {
            return Err(Error::InvalidParams(format!(
                "need 0 < rho_cr_f < rho_max, got {rho_cr_f}, {rho_max}"
            )));
        }

        // Intersection of L1 with L3: the positive root of
        // k rho^2 + b rho - q_star rho_max = 0 with k = (q_plus - q_star) / rho_max,
        // written in the cancellation-free form.
        let b = rho_max * v_c_plus + 2.0 * q_star - q_plus;
        let disc = b * b + 4.0 * (q_plus - q_star) * q_star;
        let rho_cr_c = 2.0 * rho_max * q_star / (b + disc.sqrt());

        if !(rho_cr_f < rho_cr_c && rho_cr_c < rho_max) {
            return Err(Error::InvalidParams(format!(
                "derived rho_cr_c = {rho_cr_c} must lie in (rho_cr_f, rho_max)"
            )));
        }

        Ok(ModelParams {
            v_max,
            v_c_plus,
            rho_max,
            q_star,
            rho_cr_f,
            q_plus,
            q_minus,
            rho_cr_c,
        })
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }
    pub fn v_c_plus(&self) -> f64 {
        self.v_c_plus
    }
    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }
    pub fn q_star(&self) -> f64 {
        self.q_star
    }
    pub fn rho_cr_f(&self) -> f64 {
        self.rho_cr_f
    }
    pub fn q_plus(&self) -> f64 {
        self.q_plus
    }
    pub fn q_minus(&self) -> f64 {
        self.q_minus
    }
    pub fn rho_cr_c(&self) -> f64 {
        self.rho_cr_c
    }

    fn check_density(&self, rho: f64) -> Result<()> {
        if rho < EPS_RHO || !rho.is_finite() {
            Err(Error::SingularDensity { rho })
        } else {
            Ok(())
        }
    }

    /// Congested speed `(1 - rho/rho_max) q / rho` without the density guard.
    fn v_congested(&self, s: State) -> f64 {
        (1.0 - s.rho / self.rho_max) * s.q / s.rho
    }

    pub fn speed(&self, s: State, phase: Phase) -> Result<f64> {
        match phase {
            Phase::Free => Ok(self.v_max),
            Phase::Congested => {
                self.check_density(s.rho)?;
                Ok(self.v_congested(s))
            }
        }
    }

    /// `q` on the free-flow curve.
    pub fn q_free(&self, rho: f64) -> Result<f64> {
        if !(0.0..=self.rho_cr_f).contains(&rho) {
            return Err(Error::OutOfDomain {
                quantity: "free-flow q(rho)",
                value: rho,
            });
        }
        Ok(self.q_free_unchecked(rho))
    }

    /// Same formula as [`q_free`](Self::q_free), rearranged to be regular at
    /// zero density and without the range check.
    pub(crate) fn q_free_unchecked(&self, rho: f64) -> f64 {
        self.v_max * rho * self.rho_max / (self.rho_max - rho)
    }

    pub fn state_from_density_speed(&self, rho: f64, v: f64, phase: Phase) -> Result<State> {
        match phase {
            Phase::Free => {
                if v != self.v_max {
                    return Err(Error::InconsistentInput(format!(
                        "free-flow speed must equal v_max = {}, got {v}",
                        self.v_max
                    )));
                }
                Ok(State::new(rho, self.q_free(rho)?))
            }
            Phase::Congested => {
                if !(rho > 0.0 && rho < self.rho_max) {
                    return Err(Error::InconsistentInput(format!(
                        "congested density must lie in (0, rho_max), got {rho}"
                    )));
                }
                if !(v > 0.0) {
                    return Err(Error::InconsistentInput(format!(
                        "congested speed must be positive, got {v}"
                    )));
                }
                Ok(State::new(rho, rho * v / (1.0 - rho / self.rho_max)))
            }
        }
    }

    pub fn flux(&self, s: State, phase: Phase) -> Result<State> {
        match phase {
            Phase::Free => Ok(State::new(s.rho * self.v_max, s.q * self.v_max)),
            Phase::Congested => {
                self.check_density(s.rho)?;
                let v = self.v_congested(s);
                Ok(State::new(s.rho * v, (s.q - self.q_star) * v))
            }
        }
    }

    /// Eigenvalues `(lambda1, lambda2)` of the congested flux Jacobian.
    pub fn eigen_congested(&self, s: State) -> Result<(f64, f64)> {
        self.check_density(s.rho)?;
        let l1 = (s.q - self.q_star) * (1.0 / s.rho - 2.0 / self.rho_max)
            - self.q_star / self.rho_max;
        Ok((l1, self.v_congested(s)))
    }

    /// Jacobian of the congested flux at `s`, row-major.
    pub fn jacobian_congested(&self, s: State) -> Result<[[f64; 2]; 2]> {
        self.check_density(s.rho)?;
        let (rho, q, rm, qs) = (s.rho, s.q, self.rho_max, self.q_star);
        Ok([
            [-q / rm, (rm - rho) / rm],
            [
                q * (qs - q) / (rho * rho),
                (qs - 2.0 * q) * (rho - rm) / (rho * rm),
            ],
        ])
    }

    pub fn curve_l1(&self, rho: f64) -> f64 {
        self.q_star + (self.q_plus - self.q_star) / self.rho_max * rho
    }

    pub fn curve_l2(&self, rho: f64) -> f64 {
        self.q_star + (self.q_minus - self.q_star) / self.rho_max * rho
    }

    pub fn curve_l3(&self, rho: f64) -> Result<f64> {
        if rho >= self.rho_max {
            return Err(Error::OutOfDomain {
                quantity: "curve L3",
                value: rho,
            });
        }
        Ok(self.l3_unchecked(rho))
    }

    pub(crate) fn l3_unchecked(&self, rho: f64) -> f64 {
        rho * self.rho_max / (self.rho_max - rho) * self.v_c_plus
    }

    /// Upper boundary of `Omega_c` at `rho`.
    pub(crate) fn congested_ceiling(&self, rho: f64) -> f64 {
        let l1 = self.curve_l1(rho);
        if rho < self.rho_cr_c {
            l1.min(self.l3_unchecked(rho))
        } else {
            l1
        }
    }

    pub fn classify(&self, s: State) -> Membership {
        let State { rho, q } = s;
        if rho <= self.rho_cr_f
            && rho >= 0.0
            && (q - self.q_free_unchecked(rho)).abs() <= EPS_MEMBERSHIP
        {
            return Membership::OnFreeCurve;
        }
        if rho >= self.rho_cr_f - EPS_MEMBERSHIP
            && rho <= self.rho_max
            && q >= self.curve_l2(rho) - EPS_MEMBERSHIP
            && q <= self.congested_ceiling(rho) + EPS_MEMBERSHIP
        {
            return Membership::InCongested;
        }
        Membership::Outside
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(default = "d_v_max")]
    v_max: f64,
    #[serde(default = "d_v_c_plus")]
    v_c_plus: f64,
    #[serde(default = "d_rho_max")]
    rho_max: f64,
    #[serde(default = "d_q_star")]
    q_star: f64,
    #[serde(default = "d_rho_cr_f")]
    rho_cr_f: f64,
    #[serde(default = "d_q_plus")]
    q_plus: f64,
    #[serde(default = "d_q_minus")]
    q_minus: f64,
}

fn d_v_max() -> f64 {
    ModelParams::default().v_max
}
fn d_v_c_plus() -> f64 {
    ModelParams::default().v_c_plus
}
fn d_rho_max() -> f64 {
    ModelParams::default().rho_max
}
fn d_q_star() -> f64 {
    ModelParams::default().q_star
}
fn d_rho_cr_f() -> f64 {
    ModelParams::default().rho_cr_f
}
fn d_q_plus() -> f64 {
    ModelParams::default().q_plus
}
fn d_q_minus() -> f64 {
    ModelParams::default().q_minus
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(
            r.v_max, r.v_c_plus, r.rho_max, r.q_star, r.rho_cr_f, r.q_plus, r.q_minus,
        )
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            v_max: p.v_max,
            v_c_plus: p.v_c_plus,
            rho_max: p.rho_max,
            q_star: p.q_star,
            rho_cr_f: p.rho_cr_f,
            q_plus: p.q_plus,
            q_minus: p.q_minus,
        }
    }
}
