//! Built-in scenarios: twelve Riemann tests, three road examples, and two
//! diagnostic setups.

use super::{
    BoundarySpec, InitialCondition, OutputPlan, Piece, PulseCenter, Scenario, TrajectorySeeding,
    CLOSURE_A, DEFAULT_CFL, SCHEMA_VERSION,
};
use crate::model::ModelParams;
use crate::model::Phase::{Congested as C, Free as F};
use crate::stepper::Grid;

pub const NAMES: [&str; 17] = [
    "test1",
    "test2",
    "test3",
    "test4",
    "test5",
    "test6",
    "test7",
    "test8",
    "test9",
    "test10",
    "test11",
    "test12",
    "example2",
    "example3",
    "example4",
    "advection_smooth",
    "uniform_const",
];

/// Left and right Riemann states `(rho, V, phase)` of tests 1 to 12.
pub const RIEMANN_DATA: [(Piece, Piece); 12] = [
    (Piece::new(0.011, 30.0, F), Piece::new(0.0825, 4.5113, C)),
    (Piece::new(0.011, 30.0, F), Piece::new(0.0775, 4.5945, C)),
    (Piece::new(0.0075, 30.0, F), Piece::new(0.0675, 5.338, C)),
    (Piece::new(0.001, 30.0, F), Piece::new(0.0625, 4.73, C)),
    (Piece::new(0.001, 30.0, F), Piece::new(0.0875, 2.9945, C)),
    (Piece::new(0.128, 0.42321, C), Piece::new(0.0375, 13.838, C)),
    (Piece::new(0.0375, 13.838, C), Piece::new(0.128, 0.42321, C)),
    (Piece::new(0.0825, 4.5113, C), Piece::new(0.011, 30.0, F)),
    (Piece::new(0.0775, 4.5945, C), Piece::new(0.011, 30.0, F)),
    (Piece::new(0.0675, 5.338, C), Piece::new(0.0075, 30.0, F)),
    (Piece::new(0.0625, 4.73, C), Piece::new(0.001, 30.0, F)),
    (Piece::new(0.0875, 2.9945, C), Piece::new(0.001, 30.0, F)),
];

pub const RIEMANN_X0: f64 = 40000.0;
pub const RIEMANN_T_FINAL: f64 = 900.0;
const ROAD_LENGTH: f64 = 10000.0;

fn base(name: &str, grid: Grid, t_final: f64, ic: InitialCondition) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: Some(name.to_string()),
        params: ModelParams::default(),
        grid,
        cfl: DEFAULT_CFL,
        t_final,
        ic,
        bc_left: BoundarySpec::Free,
        bc_right: BoundarySpec::Free,
        output: OutputPlan {
            snapshots: vec![0.0, t_final],
            spacetime_stride: None,
            trajectories: None,
        },
    }
}

fn road_grid() -> Grid {
    Grid::new(0.0, ROAD_LENGTH, 400).expect("valid grid")
}

fn three_pieces(b1: f64, b2: f64, pieces: [Piece; 3]) -> InitialCondition {
    InitialCondition::Piecewise {
        breakpoints: vec![b1, b2],
        pieces: pieces.to_vec(),
    }
}

fn seeding() -> Option<TrajectorySeeding> {
    Some(TrajectorySeeding {
        seed_spacing_m: 100.0,
        release_interval_s: 50.0,
    })
}

/// Riemann test `k` (1-based) on `[0, 80000]` with spacing 200.
pub fn riemann_test(k: usize) -> Option<Scenario> {
    let (left, right) = *RIEMANN_DATA.get(k.checked_sub(1)?)?;
    let grid = Grid::new(0.0, 80000.0, 400).expect("valid grid");
    let ic = InitialCondition::Piecewise {
        breakpoints: vec![RIEMANN_X0],
        pieces: vec![left, right],
    };
    Some(base(&format!("test{k}"), grid, RIEMANN_T_FINAL, ic))
}

/// Two-pulse downstream boundary, switching branches at two thirds of the
/// run length.
pub fn example3_right_boundary(t_final: f64) -> BoundarySpec {
    BoundarySpec::DirichletPulse {
        early_base: 0.05,
        early_amplitude: 0.3,
        late_base: 0.03,
        late_amplitude: 0.2,
        tail_ratio: 0.25,
        w: 201.25,
        t0: 1500.0,
        t1: 3000.0,
        switch_time: 2.0 / 3.0 * t_final,
        a: CLOSURE_A,
    }
}

/// Stop-and-go downstream boundary: pulses until 1000 s, a held congested
/// state until 1200 s, free flow afterwards.
pub fn example4_right_boundary() -> BoundarySpec {
    BoundarySpec::DirichletStopAndGo {
        base: 0.03,
        amplitude: 0.03,
        tail_ratio: 2.05,
        w: 10.25,
        t1: 3000.0,
        pulse_center: PulseCenter::Periodic,
        period: 100.0,
        offset: 50.0,
        pulse_end: 1000.0,
        hold_until: 1200.0,
        hold_rho: 0.03,
        release_rho: 0.01,
        a: CLOSURE_A,
    }
}

fn example2() -> Scenario {
    let l = ROAD_LENGTH;
    let ic = three_pieces(
        l / 3.0,
        2.0 * l / 3.0,
        [
            Piece::new(0.01, 30.0, F),
            Piece::new(0.03, 17.729, C),
            Piece::new(0.04, 11.812, C),
        ],
    );
    let mut s = base("example2", road_grid(), 250.0, ic);
    s.bc_left = BoundarySpec::DirichletConstant {
        rho: 0.01,
        a: CLOSURE_A,
    };
    s.output.snapshots = vec![0.0, 50.0, 200.0, 250.0];
    s.output.trajectories = seeding();
    s
}

fn example3() -> Scenario {
    let l = ROAD_LENGTH;
    let t_final = 500.0;
    let ic = three_pieces(
        l / 3.0,
        2.0 * l / 3.0,
        [
            Piece::new(0.01, 30.0, F),
            Piece::new(0.03, 17.729, C),
            Piece::new(0.05, 7.941, C),
        ],
    );
    let mut s = base("example3", road_grid(), t_final, ic);
    s.bc_right = example3_right_boundary(t_final);
    s.output.snapshots = vec![0.0, 50.0, 200.0, 350.0, 500.0];
    s.output.trajectories = seeding();
    s
}

fn example4() -> Scenario {
    let l = ROAD_LENGTH;
    let ic = three_pieces(
        l / 2.0,
        3.0 * l / 5.0,
        [
            Piece::new(0.015, 30.0, F),
            Piece::new(0.08, 4.375, C),
            Piece::new(0.025, 21.94, C),
        ],
    );
    let mut s = base("example4", road_grid(), 1500.0, ic);
    s.bc_right = example4_right_boundary();
    s.output.snapshots = vec![0.0, 500.0, 1000.0, 1500.0];
    s.output.trajectories = seeding();
    s
}

fn advection_smooth() -> Scenario {
    let grid = Grid::new(0.0, 20000.0, 400).expect("valid grid");
    let ic = InitialCondition::FreeBump {
        background: 0.004,
        amplitude: 0.012,
        center: 4000.0,
        half_width: 2000.0,
    };
    base("advection_smooth", grid, 300.0, ic)
}

fn uniform_const() -> Scenario {
    let grid = Grid::new(0.0, ROAD_LENGTH, 100).expect("valid grid");
    let ic = InitialCondition::Piecewise {
        breakpoints: vec![],
        pieces: vec![Piece::new(0.08, 3.75, C)],
    };
    base("uniform_const", grid, 600.0, ic)
}

/// Looks up a built-in scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    if let Some(k) = name.strip_prefix("test") {
        return k.parse().ok().and_then(riemann_test);
    }
    match name {
        "example2" => Some(example2()),
        "example3" => Some(example3()),
        "example4" => Some(example4()),
        "advection_smooth" => Some(advection_smooth()),
        "uniform_const" => Some(uniform_const()),
        _ => None,
    }
}

pub fn builtin_scenarios() -> Vec<Scenario> {
    NAMES.iter().map(|n| builtin(n).expect("catalog name")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Phase;
    use crate::scenario::{parse_scenario, serialize_scenario};

    #[test]
    fn every_entry_validates_and_round_trips() {
        for s in builtin_scenarios() {
            s.validate().unwrap_or_else(|e| panic!("{:?}: {e}", s.name));
            let back = parse_scenario(&serialize_scenario(&s).unwrap()).unwrap();
            assert_eq!(back, s);
        }
        assert!(builtin("test13").is_none());
        assert!(builtin("test0").is_none());
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn test7_states() {
        let s = builtin("test7").unwrap();
        let InitialCondition::Piecewise { pieces, breakpoints } = &s.ic else {
            panic!("piecewise expected")
        };
        assert_eq!(breakpoints, &vec![40000.0]);
        assert_eq!(pieces[0], Piece::new(0.0375, 13.838, Phase::Congested));
        assert_eq!(pieces[1], Piece::new(0.128, 0.42321, Phase::Congested));
        assert_eq!(s.grid.dx(), 200.0);
        assert_eq!(s.t_final, 900.0);
    }

    #[test]
    fn table_offsets_reproduced() {
        // q - q* column of the Riemann data table.
        let offsets = [
            (-0.2456, 0.1684),
            (-0.2456, 0.0906),
            (-0.3639, 0.02325),
            (-0.5698, -0.1149),
            (-0.5698, -0.02175),
            (-0.3291, 0.07778),
            (0.07778, -0.3291),
            (0.1684, -0.2456),
            (0.0906, -0.2456),
            (0.02324, -0.3639),
            (-0.1149, -0.5698),
            (-0.02175, -0.5698),
        ];
        let p = ModelParams::default();
        for (k, ((l, r), (dl, dr))) in RIEMANN_DATA.iter().zip(offsets).enumerate() {
            for (piece, d) in [(l, dl), (r, dr)] {
                let s = p.state_from_density_speed(piece.rho, piece.v, piece.phase).unwrap();
                assert!((s.q - p.q_star() - d).abs() < 5e-5, "test{}: {}", k + 1, s.q - 0.6);
            }
        }
    }

    #[test]
    fn example_layouts() {
        let s = builtin("example2").unwrap();
        let InitialCondition::Piecewise { breakpoints, pieces } = &s.ic else {
            panic!()
        };
        assert!((breakpoints[0] - 10000.0 / 3.0).abs() < 1e-9);
        assert_eq!(pieces.iter().map(|p| p.rho).collect::<Vec<_>>(), [0.01, 0.03, 0.04]);
        assert_eq!(s.output.snapshots, [0.0, 50.0, 200.0, 250.0]);
        assert_eq!(s.grid.dx(), 25.0);

        let s = builtin("example4").unwrap();
        match s.bc_right {
            BoundarySpec::DirichletStopAndGo { w, t1, a, .. } => {
                assert_eq!((w, t1, a), (10.25, 3000.0, 30.0 / 7.0));
            }
            ref other => panic!("{other:?}"),
        }
    }
}
