//! Coverage planners: random, exhaustive optimum, centralized greedy,
//! 1-hop decentralized greedy and ID-ordered sequential greedy.
//!
//! Ties are always broken toward the smaller robot id, then the smaller
//! action index.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::team::{build_comm_graph, validate_team, CommGraph, CoverageTable, JointAction, Robot};
use crate::world::Target;

pub const DEFAULT_OPTIMAL_CAP: usize = 10;

/// Team indices sorted by robot id.
fn id_order(robots: &[Robot]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..robots.len()).collect();
    order.sort_by_key(|&i| robots[i].id);
    order
}

fn to_joint(robots: &[Robot], choice: &[Option<usize>]) -> JointAction {
    let mut joint = JointAction::new();
    for (r, a) in choice.iter().enumerate() {
        if let Some(a) = a {
            joint.choice.insert(robots[r].id, *a);
        }
    }
    joint
}

pub fn plan_random<R: Rng + ?Sized>(robots: &[Robot], rng: &mut R) -> Result<JointAction> {
    validate_team(robots)?;
    let mut joint = JointAction::new();
    for r in id_order(robots) {
        joint.choice.insert(robots[r].id, rng.gen_range(0..robots[r].actions.len()));
    }
    Ok(joint)
}

/// Exhaustive search over every joint action; refuses teams larger than `cap`.
pub fn plan_optimal(robots: &[Robot], targets: &[Target], cap: usize) -> Result<JointAction> {
    validate_team(robots)?;
    if robots.len() > cap {
        return Err(Error::Capacity { robots: robots.len(), cap });
    }
    let table = CoverageTable::build(robots, targets);
    let order = id_order(robots);
    let mut search = Exhaustive {
        table: &table,
        robots,
        order: &order,
        counts: vec![0u32; targets.len()],
        current: vec![None; robots.len()],
        best: None,
    };
    search.descend(0, 0);
    let (_, best) = search.best.expect("at least one joint action exists");
    Ok(to_joint(robots, &best))
}

struct Exhaustive<'a> {
    table: &'a CoverageTable,
    robots: &'a [Robot],
    order: &'a [usize],
    counts: Vec<u32>,
    current: Vec<Option<usize>>,
    best: Option<(usize, Vec<Option<usize>>)>,
}

impl Exhaustive<'_> {
    // Depth-first in lexicographic (id, action) order; only a strictly better
    // value replaces the incumbent, so the first maximizer found is kept.
    fn descend(&mut self, depth: usize, value: usize) {
        if depth == self.order.len() {
            if self.best.as_ref().is_none_or(|(v, _)| value > *v) {
                self.best = Some((value, self.current.clone()));
            }
            return;
        }
        let r = self.order[depth];
        for a in 0..self.robots[r].actions.len() {
            let mut gained = 0;
            for &t in self.table.covered(r, a) {
                if self.counts[t as usize] == 0 {
                    gained += 1;
                }
                self.counts[t as usize] += 1;
            }
            self.current[r] = Some(a);
            self.descend(depth + 1, value + gained);
            for &t in self.table.covered(r, a) {
                self.counts[t as usize] -= 1;
            }
        }
        self.current[r] = None;
    }
}

/// Standard greedy over the robots in `members` (team indices): each round takes
/// the (robot, action) pair with the largest marginal gain and retires the robot.
fn greedy_over(table: &CoverageTable, robots: &[Robot], members: &[usize]) -> Vec<Option<usize>> {
    let mut choice = vec![None; robots.len()];
    let mut covered = vec![false; table.target_count()];
    let mut pending: Vec<usize> = members.to_vec();
    pending.sort_by_key(|&i| robots[i].id);
    while !pending.is_empty() {
        let mut best: Option<(usize, usize, usize)> = None;
        for (slot, &r) in pending.iter().enumerate() {
            for a in 0..robots[r].actions.len() {
                let gain = table.gain(&covered, r, a);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, slot, a));
                }
            }
        }
        let (_, slot, a) = best.expect("pending robots have actions");
        let r = pending.remove(slot);
        table.apply(&mut covered, r, a);
        choice[r] = Some(a);
    }
    choice
}

pub fn plan_centralized_greedy(robots: &[Robot], targets: &[Target]) -> Result<JointAction> {
    validate_team(robots)?;
    let table = CoverageTable::build(robots, targets);
    let members: Vec<usize> = (0..robots.len()).collect();
    Ok(to_joint(robots, &greedy_over(&table, robots, &members)))
}

/// Each robot independently runs greedy over itself and its 1-hop neighbors and
/// keeps the action that local greedy gives it.
pub fn plan_decentralized_greedy(robots: &[Robot], targets: &[Target], graph: &CommGraph) -> Result<JointAction> {
    plan_decentralized_greedy_timed(robots, targets, graph).map(|(joint, _)| joint)
}

/// As [`plan_decentralized_greedy`], also returning the longest time any single
/// robot spent on its local computation.
pub fn plan_decentralized_greedy_timed(
    robots: &[Robot],
    targets: &[Target],
    graph: &CommGraph,
) -> Result<(JointAction, Duration)> {
    validate_team(robots)?;
    check_graph(robots, graph)?;
    let mut joint = JointAction::new();
    let mut slowest = Duration::ZERO;
    for i in id_order(robots) {
        let started = Instant::now();
        let mut members: Vec<usize> = graph.neighbors(i).collect();
        members.push(i);
        let table = CoverageTable::build_for(robots, targets, members.iter().copied());
        let local = greedy_over(&table, robots, &members);
        let action = local[i].expect("robot is in its own sub-team");
        slowest = slowest.max(started.elapsed());
        joint.choice.insert(robots[i].id, action);
    }
    Ok((joint, slowest))
}

/// Within each connected component robots choose in ascending id order, each
/// maximizing marginal gain given the choices already made in its component.
pub fn plan_sequential_greedy(robots: &[Robot], targets: &[Target], graph: &CommGraph) -> Result<JointAction> {
    validate_team(robots)?;
    check_graph(robots, graph)?;
    let table = CoverageTable::build(robots, targets);
    let component = graph.components();
    let mut covered: Vec<Option<Vec<bool>>> = vec![None; robots.len()];
    let mut choice = vec![None; robots.len()];
    for r in id_order(robots) {
        let seen = covered[component[r]].get_or_insert_with(|| vec![false; targets.len()]);
        let mut best = (0, 0);
        for a in 0..robots[r].actions.len() {
            let gain = table.gain(seen, r, a);
            if a == 0 || gain > best.0 {
                best = (gain, a);
            }
        }
        table.apply(seen, r, best.1);
        choice[r] = Some(best.1);
    }
    Ok(to_joint(robots, &choice))
}

fn check_graph(robots: &[Robot], graph: &CommGraph) -> Result<()> {
    if graph.len() != robots.len() {
        return Err(Error::input(format!("communication graph has {} nodes for {} robots", graph.len(), robots.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Planner {
    Random,
    Optimal,
    Greedy,
    Decentralized,
    Sequential,
}

impl Planner {
    pub const ALL: [Planner; 5] =
        [Planner::Optimal, Planner::Greedy, Planner::Decentralized, Planner::Sequential, Planner::Random];

    pub fn name(self) -> &'static str {
        match self {
            Planner::Random => "random",
            Planner::Optimal => "optimal",
            Planner::Greedy => "greedy",
            Planner::Decentralized => "decentralized",
            Planner::Sequential => "sequential",
        }
    }

    /// Runs the planner with the team's distance-based graph. The reported
    /// runtime for the decentralized planner is the slowest robot's time.
    pub fn plan_timed<R: Rng + ?Sized>(
        self,
        robots: &[Robot],
        targets: &[Target],
        optimal_cap: usize,
        rng: &mut R,
    ) -> Result<(JointAction, Duration)> {
        let started = Instant::now();
        let joint = match self {
            Planner::Random => plan_random(robots, rng)?,
            Planner::Optimal => plan_optimal(robots, targets, optimal_cap)?,
            Planner::Greedy => plan_centralized_greedy(robots, targets)?,
            Planner::Decentralized => {
                let graph = build_comm_graph(robots);
                return plan_decentralized_greedy_timed(robots, targets, &graph);
            }
            Planner::Sequential => plan_sequential_greedy(robots, targets, &build_comm_graph(robots))?,
        };
        Ok((joint, started.elapsed()))
    }

    pub fn plan<R: Rng + ?Sized>(
        self,
        robots: &[Robot],
        targets: &[Target],
        optimal_cap: usize,
        rng: &mut R,
    ) -> Result<JointAction> {
        self.plan_timed(robots, targets, optimal_cap, rng).map(|(j, _)| j)
    }
}

impl fmt::Display for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Planner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Planner::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::input(format!("unknown planner '{s}'")))
    }
}
