//! Repair of `(rho, q)` pairs that fall off the admissible set.
//!
//! Only `q` is ever modified; density, and with it the number of vehicles on
//! the road, is left untouched.

use crate::error::{Error, Result};
use crate::model::{Membership, ModelParams, Phase, State};

/// Relative slack on `[0, rho_max]` absorbed as round-off before dispatch.
pub const RHO_CLAMP_REL: f64 = 1e-14;

/// Which repair branch [`project`] took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionCase {
    /// Already admissible.
    Unchanged,
    /// Free density: `q` snapped onto the free-flow curve.
    FreeCurve,
    /// Above `L3` below the congested critical density.
    DownToL3,
    /// Above `L1` beyond the congested critical density.
    DownToL1,
    /// Below `L2`.
    UpToL2,
}

fn clamp_density(rho: f64, p: &ModelParams) -> Result<f64> {
    let rho_max = p.rho_max();
    if (0.0..=rho_max).contains(&rho) {
        Ok(rho)
    } else if rho < 0.0 && rho >= -RHO_CLAMP_REL * rho_max {
        Ok(0.0)
    } else if rho > rho_max && rho <= rho_max * (1.0 + RHO_CLAMP_REL) {
        Ok(rho_max)
    } else {
        Err(Error::InadmissibleDensity { rho })
    }
}

/// Projects `s` and reports which case fired.
pub fn project_with_case(s: State, p: &ModelParams) -> Result<(State, ProjectionCase)> {
    if !s.is_finite() {
        return Err(Error::InadmissibleDensity { rho: s.rho });
    }
    let rho = clamp_density(s.rho, p)?;
    let s = State::new(rho, s.q);
    if p.classify(s) != Membership::Outside {
        return Ok((s, ProjectionCase::Unchanged));
    }

    if rho <= p.rho_cr_f() {
        return Ok((
            State::new(rho, p.q_free_unchecked(rho)),
            ProjectionCase::FreeCurve,
        ));
    }
    let l2 = p.curve_l2(rho);
    if s.q < l2 {
        return Ok((State::new(rho, l2), ProjectionCase::UpToL2));
    }
    // Ties at rho == rho_cr_c go to L3; both curves agree there.
    if rho <= p.rho_cr_c() {
        Ok((State::new(rho, p.l3_unchecked(rho)), ProjectionCase::DownToL3))
    } else {
        Ok((State::new(rho, p.curve_l1(rho)), ProjectionCase::DownToL1))
    }
}

pub fn project(s: State, p: &ModelParams) -> Result<State> {
    project_with_case(s, p).map(|(s, _)| s)
}

/// Projects a state and returns it with the phase of the set it landed in.
pub fn project_phased(s: State, p: &ModelParams) -> Result<(State, Phase)> {
    let s = project(s, p)?;
    let phase = p
        .classify(s)
        .phase()
        .expect("projected states are admissible");
    Ok((s, phase))
}

/// Cell-wise projection; phases are refreshed alongside the states.
pub fn project_cells(states: &mut [State], phases: &mut [Phase], p: &ModelParams) -> Result<()> {
    debug_assert_eq!(states.len(), phases.len());
    for (cell, (s, ph)) in states.iter_mut().zip(phases.iter_mut()).enumerate() {
        let (projected, phase) = project_phased(*s, p).map_err(|e| Error::Cell {
            cell,
            source: Box::new(e),
        })?;
        *s = projected;
        *ph = phase;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn single_state_examples() {
        let p = p();
        let cases = [
            ((0.08, 0.6), (0.08, 0.6), ProjectionCase::Unchanged),
            ((0.01, 0.9), (0.01, 0.32), ProjectionCase::FreeCurve),
            ((0.0225, 0.9), (0.0225, 0.628_363_636_363_636_4), ProjectionCase::DownToL3),
            ((0.08, 0.9), (0.08, 0.76593), ProjectionCase::DownToL1),
            ((0.08, 0.2), (0.08, 0.39428), ProjectionCase::UpToL2),
        ];
        for ((r, q), (er, eq), case) in cases {
            let (out, c) = project_with_case(State::new(r, q), &p).unwrap();
            assert_eq!(c, case, "input ({r}, {q})");
            assert_eq!(out.rho, er);
            assert!((out.q - eq).abs() < 1e-14, "{out:?}");
        }
    }

    #[test]
    fn density_outside_range_is_an_error() {
        let p = p();
        assert!(matches!(
            project(State::new(0.17, 0.5), &p),
            Err(Error::InadmissibleDensity { .. })
        ));
        assert!(project(State::new(-1e-3, 0.0), &p).is_err());
        // Round-off dust is absorbed.
        let s = project(State::new(-1e-18, 0.0), &p).unwrap();
        assert_eq!(s, State::new(0.0, 0.0));
    }

    #[test]
    fn cell_projection() {
        let p = p();
        let mut states = vec![State::new(0.01, 0.9), State::new(0.08, 0.2)];
        let mut phases = vec![Phase::Congested; 2];
        project_cells(&mut states, &mut phases, &p).unwrap();
        assert_eq!(states[0], State::new(0.01, 0.32));
        assert!((states[1].q - 0.39428).abs() < 1e-14);
        assert_eq!(phases, vec![Phase::Free, Phase::Congested]);

        let mut empty: Vec<State> = vec![];
        project_cells(&mut empty, &mut [], &p).unwrap();

        let mut bad = vec![State::new(0.01, 0.32), State::new(0.5, 0.3)];
        let err = project_cells(&mut bad, &mut [Phase::Free; 2], &p).unwrap_err();
        assert!(matches!(err, Error::Cell { cell: 1, .. }));
    }
}
