//! Robot team state, motion primitives, the distance-based communication
//! graph, and the target-coverage objective.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Point, Target};

pub const DEFAULT_SENSING_RANGE: f64 = 20.0;
pub const DEFAULT_COMM_RANGE: f64 = 10.0;
pub const DEFAULT_TRAVEL: f64 = 20.0;
pub const DEFAULT_FOOTPRINT: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    /// +y
    Forward,
    /// -y
    Backward,
    /// -x
    Left,
    /// +x
    Right,
    Idle,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [
        PrimitiveKind::Forward,
        PrimitiveKind::Backward,
        PrimitiveKind::Left,
        PrimitiveKind::Right,
        PrimitiveKind::Idle,
    ];

    fn direction(self) -> (f64, f64) {
        match self {
            PrimitiveKind::Forward => (0.0, 1.0),
            PrimitiveKind::Backward => (0.0, -1.0),
            PrimitiveKind::Left => (-1.0, 0.0),
            PrimitiveKind::Right => (1.0, 0.0),
            PrimitiveKind::Idle => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub kind: PrimitiveKind,
    /// Distance flown along the primitive (`d_m`); zero for idle.
    pub travel: f64,
    /// Side of the square camera footprint (`d_o`).
    pub footprint: f64,
}

impl MotionPrimitive {
    pub fn new(kind: PrimitiveKind, travel: f64, footprint: f64) -> Result<Self> {
        let p = MotionPrimitive { kind, travel, footprint };
        p.validate()?;
        Ok(p)
    }

    /// The standard primitive of `kind` with `d_m = 20`, `d_o = 6`.
    pub fn standard(kind: PrimitiveKind) -> Self {
        let travel = if kind == PrimitiveKind::Idle { 0.0 } else { DEFAULT_TRAVEL };
        MotionPrimitive { kind, travel, footprint: DEFAULT_FOOTPRINT }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.travel >= 0.0 && self.travel.is_finite()) {
            return Err(Error::input("primitive travel must be finite and non-negative"));
        }
        if !(self.footprint > 0.0 && self.footprint.is_finite()) {
            return Err(Error::input("primitive footprint must be positive"));
        }
        if self.kind == PrimitiveKind::Idle && self.travel != 0.0 {
            return Err(Error::input("idle primitive must have zero travel"));
        }
        Ok(())
    }

    /// Closed rectangle swept by the camera when executed from `origin`.
    ///
    /// Along the motion axis it spans `[-d_o/2, d_m + d_o/2]` relative to the
    /// robot; across it spans `[-d_o/2, d_o/2]`. Idle is the centered square.
    pub fn footprint_rect(&self, origin: Point) -> Rect {
        let half = self.footprint / 2.0;
        let (dx, dy) = self.kind.direction();
        let end = Point::new(origin.x + dx * self.travel, origin.y + dy * self.travel);
        Rect {
            min_x: origin.x.min(end.x) - half,
            max_x: origin.x.max(end.x) + half,
            min_y: origin.y.min(end.y) - half,
            max_y: origin.y.max(end.y) + half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub id: usize,
    #[serde(flatten)]
    pub position: Point,
    #[serde(default = "default_sensing_range")]
    pub sensing_range: f64,
    #[serde(default = "default_comm_range")]
    pub comm_range: f64,
    pub actions: Vec<MotionPrimitive>,
}

fn default_sensing_range() -> f64 {
    DEFAULT_SENSING_RANGE
}

fn default_comm_range() -> f64 {
    DEFAULT_COMM_RANGE
}

impl Robot {
    /// A robot with default ranges and the five standard primitives.
    pub fn standard(id: usize, position: Point) -> Self {
        Robot {
            id,
            position,
            sensing_range: DEFAULT_SENSING_RANGE,
            comm_range: DEFAULT_COMM_RANGE,
            actions: PrimitiveKind::ALL.iter().map(|k| MotionPrimitive::standard(*k)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sensing_range > 0.0) || !(self.comm_range > 0.0) {
            return Err(Error::input(format!("robot {}: ranges must be positive", self.id)));
        }
        if self.actions.is_empty() {
            return Err(Error::input(format!("robot {} has no actions", self.id)));
        }
        self.actions.iter().try_for_each(MotionPrimitive::validate)
    }
}

/// Places `count` standard robots uniformly at random on a `width × height` grid.
pub fn place_robots<R: Rng + ?Sized>(count: usize, width: f64, height: f64, rng: &mut R) -> Vec<Robot> {
    (0..count)
        .map(|id| Robot::standard(id, Point::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height))))
        .collect()
}

/// Serialized team description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Team {
    pub robots: Vec<Robot>,
}

impl Team {
    pub fn new(robots: Vec<Robot>) -> Result<Self> {
        validate_team(&robots)?;
        Ok(Team { robots })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let team: Team = serde_json::from_str(text)?;
        validate_team(&team.robots)?;
        Ok(team)
    }
}

pub fn validate_team(robots: &[Robot]) -> Result<()> {
    if robots.is_empty() {
        return Err(Error::input("team has no robots"));
    }
    let ids: BTreeSet<usize> = robots.iter().map(|r| r.id).collect();
    if ids.len() != robots.len() {
        return Err(Error::input("robot ids must be unique"));
    }
    robots.iter().try_for_each(Robot::validate)
}

/// Undirected graph over robots (indexed by their position in the team slice)
/// with an edge iff the pair is within communication range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    adjacency: Vec<Vec<bool>>,
}

impl CommGraph {
    pub fn empty(n: usize) -> Self {
        CommGraph { adjacency: vec![vec![false; n]; n] }
    }

    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n).map(|i| (0..n).map(|j| i != j).collect()).collect();
        CommGraph { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn connected(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.adjacency[i][j] = true;
            self.adjacency[j][i] = true;
        }
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().enumerate().filter_map(|(j, &e)| e.then_some(j))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|row| row.iter().filter(|e| **e).count()).sum::<usize>() / 2
    }

    /// Component label per node; labels are the smallest node index in the component.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        for root in 0..n {
            if label[root] != usize::MAX {
                continue;
            }
            let mut stack = vec![root];
            label[root] = root;
            while let Some(u) = stack.pop() {
                for v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = root;
                        stack.push(v);
                    }
                }
            }
        }
        label
    }
}

/// Edge `(i, j)` iff `‖p_i − p_j‖₂ ≤ r_c`. A pair with different ranges links
/// only if both robots reach each other.
pub fn build_comm_graph(robots: &[Robot]) -> CommGraph {
    let mut graph = CommGraph::empty(robots.len());
    for (i, a) in robots.iter().enumerate() {
        for (j, b) in robots.iter().enumerate().skip(i + 1) {
            if a.position.distance(b.position) <= a.comm_range.min(b.comm_range) {
                graph.add_edge(i, j);
            }
        }
    }
    graph
}

/// One action index per robot, keyed by robot id. Partial assignments are
/// representable; planners always return complete ones.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointAction {
    pub choice: BTreeMap<usize, usize>,
}

impl JointAction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, robot: usize, action: usize) -> Self {
        self.choice.insert(robot, action);
        self
    }

    pub fn get(&self, robot: usize) -> Option<usize> {
        self.choice.get(&robot).copied()
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    /// Every key is a team member and every index addresses one of its actions.
    pub fn check_feasible(&self, robots: &[Robot]) -> Result<()> {
        for (&id, &action) in &self.choice {
            let robot = robots
                .iter()
                .find(|r| r.id == id)
                .ok_or_else(|| Error::input(format!("robot {id} is not in the team")))?;
            if action >= robot.actions.len() {
                return Err(Error::input(format!("robot {id} has no action {action}")));
            }
        }
        Ok(())
    }

    /// Exactly one action for every robot.
    pub fn is_complete(&self, robots: &[Robot]) -> bool {
        self.choice.len() == robots.len() && self.check_feasible(robots).is_ok()
    }
}

fn robot_by_id(robots: &[Robot], id: usize) -> Result<&Robot> {
    robots.iter().find(|r| r.id == id).ok_or_else(|| Error::input(format!("robot {id} is not in the team")))
}

fn covered_indices(robot: &Robot, primitive: usize, targets: &[Target]) -> Result<Vec<usize>> {
    let p = robot
        .actions
        .get(primitive)
        .ok_or_else(|| Error::input(format!("robot {} has no action {primitive}", robot.id)))?;
    let rect = p.footprint_rect(robot.position);
    Ok(targets.iter().enumerate().filter(|(_, t)| rect.contains(t.position)).map(|(i, _)| i).collect())
}

/// Ids of targets inside the footprint swept by `robot` executing `primitive`.
pub fn covered_targets(robot: &Robot, primitive: usize, targets: &[Target]) -> Result<BTreeSet<usize>> {
    Ok(covered_indices(robot, primitive, targets)?.into_iter().map(|i| targets[i].id).collect())
}

/// Number of distinct targets covered by the assignment; `f(∅) = 0`.
pub fn coverage_value(assignment: &JointAction, robots: &[Robot], targets: &[Target]) -> Result<usize> {
    assignment.check_feasible(robots)?;
    let mut covered = vec![false; targets.len()];
    for (&id, &action) in &assignment.choice {
        for i in covered_indices(robot_by_id(robots, id)?, action, targets)? {
            covered[i] = true;
        }
    }
    Ok(covered.iter().filter(|c| **c).count())
}

/// `f(U ∪ {(robot, primitive)}) − f(U)` for a robot not yet in `U`.
pub fn marginal_gain(
    assignment: &JointAction,
    robot: usize,
    primitive: usize,
    robots: &[Robot],
    targets: &[Target],
) -> Result<usize> {
    if assignment.get(robot).is_some() {
        return Err(Error::input(format!("robot {robot} is already assigned")));
    }
    let base = coverage_value(assignment, robots, targets)?;
    let extended = assignment.clone().with(robot, primitive);
    Ok(coverage_value(&extended, robots, targets)? - base)
}

/// Precomputed covered-target lists for every (robot, action) pair, indexed by
/// the robot's position in the team slice. All planners evaluate gains here.
#[derive(Debug, Clone)]
pub struct CoverageTable {
    covers: Vec<Vec<Vec<u32>>>,
    target_count: usize,
}

impl CoverageTable {
    pub fn build(robots: &[Robot], targets: &[Target]) -> Self {
        Self::build_for(robots, targets, 0..robots.len())
    }

    /// Only fills rows for `members`; other rows stay empty.
    pub fn build_for(robots: &[Robot], targets: &[Target], members: impl IntoIterator<Item = usize>) -> Self {
        let mut covers = vec![Vec::new(); robots.len()];
        for r in members {
            let robot = &robots[r];
            covers[r] = robot
                .actions
                .iter()
                .map(|p| {
                    let rect = p.footprint_rect(robot.position);
                    targets
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| rect.contains(t.position))
                        .map(|(i, _)| i as u32)
                        .collect()
                })
                .collect();
        }
        CoverageTable { covers, target_count: targets.len() }
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn covered(&self, robot: usize, action: usize) -> &[u32] {
        &self.covers[robot][action]
    }

    pub fn gain(&self, covered: &[bool], robot: usize, action: usize) -> usize {
        self.covers[robot][action].iter().filter(|&&t| !covered[t as usize]).count()
    }

    pub fn apply(&self, covered: &mut [bool], robot: usize, action: usize) {
        for &t in &self.covers[robot][action] {
            covered[t as usize] = true;
        }
    }

    /// Coverage of a choice vector (`None` = unassigned), by team index.
    pub fn value(&self, choice: &[Option<usize>]) -> usize {
        let mut covered = vec![false; self.target_count];
        for (r, a) in choice.iter().enumerate() {
            if let Some(a) = a {
                self.apply(&mut covered, r, *a);
            }
        }
        covered.iter().filter(|c| **c).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn target(id: usize, x: f64, y: f64) -> Target {
        Target::new(id, Point::new(x, y), (0.0, 0.0))
    }

    fn idle_index(robot: &Robot) -> usize {
        robot.actions.iter().position(|a| a.kind == PrimitiveKind::Idle).unwrap()
    }

    #[test]
    fn illustration_footprints() {
        let (robots, targets) = crate::fixtures::coverage_illustration();
        assert_eq!(covered_targets(&robots[0], 0, &targets).unwrap(), BTreeSet::from([3, 4]));
        assert_eq!(covered_targets(&robots[1], 3, &targets).unwrap(), BTreeSet::from([1, 2, 3]));
        let u = JointAction::new().with(1, 0).with(2, 3);
        assert_eq!(coverage_value(&u, &robots, &targets).unwrap(), 4);
        assert_eq!(marginal_gain(&JointAction::new(), 2, 3, &robots, &targets).unwrap(), 3);
    }

    #[test]
    fn comm_graph_distance_rule() {
        let a = Robot::standard(0, Point::new(0.0, 0.0));
        let near = Robot::standard(1, Point::new(3.0, 4.0));
        let edge = Robot::standard(2, Point::new(0.0, 10.0));
        let far = Robot::standard(3, Point::new(0.0, 10.5));
        assert!(build_comm_graph(&[a.clone(), near]).connected(0, 1));
        assert!(build_comm_graph(&[a.clone(), edge]).connected(0, 1));
        assert!(!build_comm_graph(&[a.clone(), far]).connected(0, 1));
        assert_eq!(build_comm_graph(&[a]).edge_count(), 0);
    }

    #[test]
    fn idle_covers_centered_square() {
        let r = Robot::standard(0, Point::new(50.0, 50.0));
        let idle = idle_index(&r);
        let targets = [target(0, 51.0, 51.0), target(1, 53.0, 53.0), target(2, 53.1, 50.0)];
        assert_eq!(covered_targets(&r, idle, &targets).unwrap(), BTreeSet::from([0, 1]));
    }

    #[test]
    fn forward_rectangle_reach() {
        let r = Robot::standard(0, Point::new(50.0, 50.0));
        // Forward extends d_m + d_o/2 = 23 ahead and d_o/2 = 3 behind.
        let targets = [
            target(0, 50.0, 73.0),
            target(1, 50.0, 50.0 + 20.0 + 6.0 + 1.0),
            target(2, 50.0, 47.0),
            target(3, 50.0, 46.9),
            target(4, 53.0, 60.0),
        ];
        assert_eq!(covered_targets(&r, 0, &targets).unwrap(), BTreeSet::from([0, 2, 4]));
        assert!(matches!(covered_targets(&r, 9, &targets), Err(Error::Input(_))));
    }

    #[test]
    fn coverage_counts_union_once() {
        let a = Robot::standard(0, Point::new(10.0, 10.0));
        let b = Robot::standard(1, Point::new(11.0, 10.0));
        let robots = vec![a.clone(), b];
        let targets = [target(0, 10.5, 10.5)];
        let idle = idle_index(&a);
        let u = JointAction::new().with(0, idle).with(1, idle);
        assert_eq!(coverage_value(&u, &robots, &targets).unwrap(), 1);
        assert_eq!(coverage_value(&JointAction::new(), &robots, &targets).unwrap(), 0);
    }

    #[test]
    fn marginal_gain_set_difference() {
        let (robots, targets) = crate::fixtures::coverage_illustration();
        // Robot 1 idle at (30,10) covers nothing.
        assert_eq!(marginal_gain(&JointAction::new(), 1, 2, &robots, &targets).unwrap(), 0);
        // U covers {t1, t2, t3}; robot 1's forward primitive covers {t3, t4}.
        let u = JointAction::new().with(2, 3);
        assert_eq!(marginal_gain(&u, 1, 0, &robots, &targets).unwrap(), 1);
        assert!(matches!(marginal_gain(&u, 2, 0, &robots, &targets), Err(Error::Input(_))));
    }

    #[test]
    fn infeasible_assignment_rejected() {
        let (robots, targets) = crate::fixtures::coverage_illustration();
        assert!(coverage_value(&JointAction::new().with(7, 0), &robots, &targets).is_err());
        assert!(coverage_value(&JointAction::new().with(1, 3), &robots, &targets).is_err());
    }

    #[test]
    fn primitive_validation() {
        assert!(MotionPrimitive::new(PrimitiveKind::Idle, 1.0, 6.0).is_err());
        assert!(MotionPrimitive::new(PrimitiveKind::Left, -1.0, 6.0).is_err());
        assert!(MotionPrimitive::new(PrimitiveKind::Left, 5.0, 0.0).is_err());
        let mut r = Robot::standard(0, Point::default());
        r.actions.clear();
        assert!(r.validate().is_err());
    }

    #[test]
    fn team_json_roundtrip() {
        let (robots, _) = crate::fixtures::coverage_illustration();
        let team = Team::new(robots).unwrap();
        let text = team.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["robots"][0]["x"], 30.0);
        assert_eq!(v["robots"][1]["actions"][2]["kind"], "right");
        assert_eq!(Team::from_json(&text).unwrap(), team);
        let dup = r#"{"robots":[{"id":0,"x":0,"y":0,"actions":[{"kind":"idle","travel":0,"footprint":6}]},
                                {"id":0,"x":1,"y":0,"actions":[{"kind":"idle","travel":0,"footprint":6}]}]}"#;
        assert!(Team::from_json(dup).is_err());
    }

    #[test]
    fn components_follow_edges() {
        let mut g = CommGraph::empty(5);
        g.add_edge(0, 2);
        g.add_edge(3, 4);
        assert_eq!(g.components(), vec![0, 1, 0, 3, 3]);
    }

    fn instance(seed: u64, n: usize, side: f64, n_targets: usize) -> (Vec<Robot>, Vec<Target>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let robots = place_robots(n, side, side, &mut rng);
        let targets = (0..n_targets).map(|i| target(i, rng.gen_range(0.0..side), rng.gen_range(0.0..side))).collect();
        (robots, targets)
    }

    proptest! {
        #[test]
        fn comm_graph_symmetric_irreflexive(seed in any::<u64>(), n in 1usize..12) {
            let (robots, _) = instance(seed, n, 30.0, 0);
            let g = build_comm_graph(&robots);
            for i in 0..n {
                prop_assert!(!g.connected(i, i));
                for j in 0..n {
                    prop_assert_eq!(g.connected(i, j), g.connected(j, i));
                    if i != j {
                        let d = robots[i].position.distance(robots[j].position);
                        prop_assert_eq!(g.connected(i, j), d <= 10.0);
                    }
                }
            }
        }

        #[test]
        fn coverage_monotone_submodular(seed in any::<u64>(), n in 2usize..=5) {
            let (robots, targets) = instance(seed, n, 40.0, 60);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
            // Random nested partial assignments small ⊆ large, probe robot outside both.
            let probe = rng.gen_range(0..n);
            let mut small = JointAction::new();
            let mut large = JointAction::new();
            for r in robots.iter().filter(|r| r.id != probe) {
                let a = rng.gen_range(0..r.actions.len());
                if rng.gen_bool(0.5) {
                    small.choice.insert(r.id, a);
                    large.choice.insert(r.id, a);
                } else if rng.gen_bool(0.5) {
                    large.choice.insert(r.id, a);
                }
            }
            let action = rng.gen_range(0..5);
            let g_small = marginal_gain(&small, probe, action, &robots, &targets).unwrap();
            let g_large = marginal_gain(&large, probe, action, &robots, &targets).unwrap();
            prop_assert!(g_small >= g_large);
            prop_assert!(coverage_value(&large, &robots, &targets).unwrap()
                >= coverage_value(&small, &robots, &targets).unwrap());
            let union_bound: usize = large.choice.iter()
                .map(|(&id, &a)| covered_targets(&robots[id], a, &targets).unwrap().len())
                .sum();
            prop_assert!(coverage_value(&large, &robots, &targets).unwrap() <= union_bound);
        }

        #[test]
        fn table_matches_direct_evaluation(seed in any::<u64>(), n in 1usize..=5) {
            let (robots, targets) = instance(seed, n, 40.0, 50);
            let table = CoverageTable::build(&robots, &targets);
            let choice: Vec<Option<usize>> = (0..n).map(|i| Some((seed as usize + i) % 5)).collect();
            let mut u = JointAction::new();
            for (i, a) in choice.iter().enumerate() {
                u.choice.insert(robots[i].id, a.unwrap());
            }
            prop_assert_eq!(table.value(&choice), coverage_value(&u, &robots, &targets).unwrap());
        }
    }
}
