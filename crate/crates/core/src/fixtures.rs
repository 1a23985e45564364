//! Small hand-built instances shared by tests, demos and the CLI.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::costmap::{Cell, LabelCosts, StochasticLabelMap};
use crate::risk::{AssignmentProblem, AssignmentTriple, EfficiencyTable, EmpiricalDist};
use crate::team::{MotionPrimitive, PrimitiveKind, Robot};
use crate::world::{Point, Target};

fn still_target(id: usize, x: f64, y: f64) -> Target {
    Target::new(id, Point::new(x, y), (0.0, 0.0))
}

/// Two robots with uneven action sets. Robot 1 has three primitives and its
/// first one covers targets {3, 4}; robot 2 has four and its fourth covers
/// {1, 2, 3}. Together they cover all four targets.
pub fn coverage_illustration() -> (Vec<Robot>, Vec<Target>) {
    let prim = MotionPrimitive::standard;
    let r1 = Robot {
        id: 1,
        position: Point::new(30.0, 10.0),
        sensing_range: 20.0,
        comm_range: 10.0,
        actions: vec![prim(PrimitiveKind::Forward), prim(PrimitiveKind::Right), prim(PrimitiveKind::Idle)],
    };
    let r2 = Robot {
        id: 2,
        position: Point::new(25.0, 12.0),
        sensing_range: 20.0,
        comm_range: 10.0,
        actions: vec![
            prim(PrimitiveKind::Backward),
            prim(PrimitiveKind::Idle),
            prim(PrimitiveKind::Right),
            prim(PrimitiveKind::Forward),
        ],
    };
    let targets = vec![
        still_target(1, 23.0, 20.0),
        still_target(2, 24.0, 30.0),
        still_target(3, 27.5, 25.0),
        still_target(4, 31.0, 32.0),
    ];
    (vec![r1, r2], targets)
}

pub const ROAD: usize = 0;
pub const GRASS: usize = 1;
pub const BUILDING: usize = 2;

/// Label map with fixed endpoints.
#[derive(Debug, Clone)]
pub struct CorridorFixture {
    pub map: StochasticLabelMap,
    pub start: Cell,
    pub goal: Cell,
}

const CORRIDOR_WIDTH: usize = 11;
const CORRIDOR_HEIGHT: usize = 9;
const CORRIDOR_ROW: usize = 4;
const CORRIDOR_SAMPLES: usize = 20;

/// 11x9 map: roads along the left, right and top borders, a direct middle
/// corridor (row 4) whose samples alternate between road-leaning and
/// grass-leaning vectors, and buildings everywhere else. Road costs 1, grass 3.
///
/// At lambda 10 the corridor costs 1.6 per cell and the direct route wins;
/// at lambda 50 it costs 4 per cell and the border detour wins.
pub fn two_corridor_map() -> CorridorFixture {
    let costs = LabelCosts::new(vec![1.0, 3.0, f64::INFINITY]).expect("valid costs");
    let mut probs = Vec::with_capacity(CORRIDOR_WIDTH * CORRIDOR_HEIGHT * CORRIDOR_SAMPLES * 3);
    for y in 0..CORRIDOR_HEIGHT {
        for x in 0..CORRIDOR_WIDTH {
            let border = x == 0 || x == CORRIDOR_WIDTH - 1 || y == 0;
            for s in 0..CORRIDOR_SAMPLES {
                let v: [f32; 3] = if border {
                    [1.0, 0.0, 0.0]
                } else if y == CORRIDOR_ROW {
                    if s % 2 == 0 {
                        [0.9, 0.1, 0.0]
                    } else {
                        [0.3, 0.7, 0.0]
                    }
                } else {
                    [0.0, 0.0, 1.0]
                };
                probs.extend(v);
            }
        }
    }
    let map = StochasticLabelMap::new(CORRIDOR_WIDTH, CORRIDOR_HEIGHT, 3, CORRIDOR_SAMPLES, probs, costs)
        .expect("fixture is valid");
    CorridorFixture { map, start: (0, CORRIDOR_ROW), goal: (CORRIDOR_WIDTH - 1, CORRIDOR_ROW) }
}

/// Vehicles and demand locations on the two-corridor map.
#[derive(Debug, Clone)]
pub struct AssignmentDemoFixture {
    pub map: StochasticLabelMap,
    pub vehicles: Vec<(usize, Cell)>,
    pub demands: Vec<(usize, Cell)>,
}

/// Three vehicles on the left border and two demands on the right border.
pub fn assignment_demo() -> AssignmentDemoFixture {
    let fx = two_corridor_map();
    AssignmentDemoFixture {
        map: fx.map,
        vehicles: vec![(1, (0, CORRIDOR_ROW)), (2, (0, 6)), (3, (0, 2))],
        demands: vec![(1, (CORRIDOR_WIDTH - 1, CORRIDOR_ROW)), (2, (CORRIDOR_WIDTH - 1, 6))],
    }
}

/// `n` samples at the normal quantiles `(i + 0.5) / n`, clamped at zero.
pub fn normal_quantile_samples(mean: f64, std_dev: f64, n: usize) -> Vec<f64> {
    let normal = Normal::new(mean, std_dev).expect("positive std dev");
    (0..n).map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64).max(0.0)).collect()
}

pub const TWO_PATH_SAMPLES: usize = 50;

/// One vehicle, one demand, two paths: path 0 (A) has mean 0.8 and std 0.05,
/// path 1 (B) has mean 1.0 and std 0.4.
pub fn two_path_problem() -> AssignmentProblem {
    let mut dists = EfficiencyTable::new();
    for (k, (mean, sd)) in [(0.8, 0.05), (1.0, 0.4)].into_iter().enumerate() {
        let d = EmpiricalDist::new(normal_quantile_samples(mean, sd, TWO_PATH_SAMPLES)).expect("finite samples");
        dists.insert(AssignmentTriple::new(1, 1, k), d);
    }
    AssignmentProblem::new(dists).expect("fixture is valid")
}
