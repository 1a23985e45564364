//! Seeded Monte Carlo experiments and the risk-aware assignment demo.
//!
//! Every trial derives its own generator from `(base seed, trial index)`, and all
//! planners in a trial see the same world so comparisons are paired.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costmap::{candidate_paths, Cell, StochasticLabelMap};
use crate::error::{Error, Result};
use crate::fixtures::{assignment_demo, AssignmentDemoFixture};
use crate::planners::{Planner, DEFAULT_OPTIMAL_CAP};
use crate::risk::{
    assign_risk_aware, tau_seed, AssignmentProblem, AssignmentTriple, CVaRConfig, EfficiencyTable, EmpiricalDist,
    RiskAwareAssignment,
};
use crate::team::{coverage_value, place_robots, Robot};
use crate::world::{generate_density, sample_targets, Target};

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_TARGET_DENSITY: f64 = 0.025;

/// Square environment side for `n` robots: `100·√(n/20)`, rounded.
pub fn environment_side(robots: usize) -> usize {
    ((100.0 * (robots as f64 / 20.0).sqrt()).round() as usize).max(1)
}

/// Generator seed for trial `index`.
pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    tau_seed(base_seed, index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignmentDemoConfig {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub delta: f64,
    pub oracle_samples: usize,
}

impl Default for AssignmentDemoConfig {
    fn default() -> Self {
        AssignmentDemoConfig { lambdas: vec![10.0, 50.0], alphas: vec![0.01, 1.0], delta: 0.002, oracle_samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub robot_counts: Vec<usize>,
    pub trials: usize,
    /// Fraction of cells that hold a target.
    pub density: f64,
    pub planners: Vec<Planner>,
    pub seed: u64,
    pub optimal_cap: usize,
    pub output_dir: Option<PathBuf>,
    pub format: OutputFormat,
    pub assignment: AssignmentDemoConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            robot_counts: vec![4],
            trials: DEFAULT_TRIALS,
            density: DEFAULT_TARGET_DENSITY,
            planners: Planner::ALL.to_vec(),
            seed: 0,
            optimal_cap: DEFAULT_OPTIMAL_CAP,
            output_dir: None,
            format: OutputFormat::Csv,
            assignment: AssignmentDemoConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::input(format!("density {} outside (0, 1]", self.density)));
        }
        if self.robot_counts.is_empty() || self.robot_counts.contains(&0) {
            return Err(Error::input("robot counts must be non-empty and positive"));
        }
        if self.planners.is_empty() {
            return Err(Error::input("no planners selected"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BenchConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One planner run on one generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub planner: Planner,
    pub robots: usize,
    pub coverage: usize,
    pub runtime_ms: f64,
    pub seed: u64,
}

/// A generated trial world.
#[derive(Debug, Clone)]
pub struct TrialWorld {
    pub robots: Vec<Robot>,
    pub targets: Vec<Target>,
    pub seed: u64,
}

/// Density field, then targets at `density` fill, then uniformly placed robots.
pub fn generate_trial_world(robot_count: usize, density: f64, seed: u64) -> Result<TrialWorld> {
    let side = environment_side(robot_count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = generate_density(side, side, &mut rng)?;
    let targets = sample_targets(&field, density, &mut rng)?;
    let robots = place_robots(robot_count, side as f64, side as f64, &mut rng);
    Ok(TrialWorld { robots, targets, seed })
}

/// Runs one planner on a prepared world. World generation is not timed.
pub fn run_planner(world: &TrialWorld, planner: Planner, optimal_cap: usize) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(tau_seed(world.seed, 1));
    let (joint, elapsed) = planner.plan_timed(&world.robots, &world.targets, optimal_cap, &mut rng)?;
    Ok(TrialRecord {
        planner,
        robots: world.robots.len(),
        coverage: coverage_value(&joint, &world.robots, &world.targets)?,
        runtime_ms: elapsed.as_secs_f64() * 1e3,
        seed: world.seed,
    })
}

pub fn run_coverage_trial(
    config: &BenchConfig,
    planner: Planner,
    robot_count: usize,
    seed: u64,
) -> Result<TrialRecord> {
    config.validate()?;
    let world = generate_trial_world(robot_count, config.density, seed)?;
    run_planner(&world, planner, config.optimal_cap)
}

/// Aggregate statistics for one `(planner, N)` pair, or the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub planner: Planner,
    pub robots: usize,
    pub trials: usize,
    pub mean_coverage: Option<f64>,
    /// Sample standard deviation; zero for a single trial.
    pub std_coverage: Option<f64>,
    pub mean_runtime_ms: Option<f64>,
    pub ratio_vs_greedy: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AggregateTable {
    pub rows: Vec<AggregateRow>,
}

impl AggregateTable {
    pub fn row(&self, planner: Planner, robots: usize) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.planner == planner && r.robots == robots)
    }

    pub fn mean(&self, planner: Planner, robots: usize) -> Option<f64> {
        self.row(planner, robots).and_then(|r| r.mean_coverage)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::input(format!("csv buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::input(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<AggregateRow>, _>>()?;
        Ok(AggregateTable { rows })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub table: AggregateTable,
    pub records: Vec<TrialRecord>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_monte_carlo(config: &BenchConfig) -> Result<MonteCarloResult> {
    config.validate()?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &n in &config.robot_counts {
        let active: Vec<Planner> =
            config.planners.iter().copied().filter(|p| !(*p == Planner::Optimal && n > config.optimal_cap)).collect();
        let mut per_planner: BTreeMap<Planner, Vec<TrialRecord>> = BTreeMap::new();
        for t in 0..config.trials {
            let world = generate_trial_world(n, config.density, trial_seed(config.seed, t))?;
            for &p in &active {
                per_planner.entry(p).or_default().push(run_planner(&world, p, config.optimal_cap)?);
            }
        }
        let greedy_mean = per_planner.get(&Planner::Greedy).map(|r| mean_std(&coverages(r)).0);
        for &p in &config.planners {
            let Some(recs) = per_planner.get(&p) else {
                rows.push(AggregateRow {
                    planner: p,
                    robots: n,
                    trials: 0,
                    mean_coverage: None,
                    std_coverage: None,
                    mean_runtime_ms: None,
                    ratio_vs_greedy: None,
                    skipped: Some(Error::Capacity { robots: n, cap: config.optimal_cap }.to_string()),
                });
                continue;
            };
            let (mean, std) = mean_std(&coverages(recs));
            let runtime = recs.iter().map(|r| r.runtime_ms).sum::<f64>() / recs.len() as f64;
            rows.push(AggregateRow {
                planner: p,
                robots: n,
                trials: recs.len(),
                mean_coverage: Some(mean),
                std_coverage: Some(std),
                mean_runtime_ms: Some(runtime),
                ratio_vs_greedy: greedy_mean.filter(|g| *g > 0.0).map(|g| mean / g),
                skipped: None,
            });
        }
        records.extend(per_planner.into_values().flatten());
    }
    Ok(MonteCarloResult { table: AggregateTable { rows }, records })
}

fn coverages(records: &[TrialRecord]) -> Vec<f64> {
    records.iter().map(|r| r.coverage as f64).collect()
}

/// Writes the aggregate table and per-trial records into `dir`.
pub fn write_monte_carlo(result: &MonteCarloResult, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (table_path, records_path, table, records) = match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &result.records {
                w.serialize(r)?;
            }
            let records = String::from_utf8(w.into_inner().map_err(|e| Error::input(e.to_string()))?)
                .map_err(|e| Error::input(e.to_string()))?;
            (dir.join("coverage_summary.csv"), dir.join("coverage_trials.csv"), result.table.to_csv()?, records)
        }
        OutputFormat::Json => (
            dir.join("coverage_summary.json"),
            dir.join("coverage_trials.json"),
            result.table.to_json()?,
            serde_json::to_string_pretty(&result.records)?,
        ),
    };
    fs::write(&table_path, table).map_err(|e| Error::io(&table_path, e))?;
    fs::write(&records_path, records).map_err(|e| Error::io(&records_path, e))?;
    Ok(vec![table_path, records_path])
}

/// Candidate path `k` from vehicle `i` to demand `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoPath {
    #[serde(flatten)]
    pub triple: AssignmentTriple,
    pub lambda: f64,
    pub cells: Vec<Cell>,
    pub efficiency: EmpiricalDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRun {
    pub alpha: f64,
    pub assignment: RiskAwareAssignment,
    pub selected: Vec<DemoPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDemoResult {
    pub candidates: Vec<DemoPath>,
    pub runs: Vec<DemoRun>,
}

/// Candidate paths for every `(vehicle, demand)` pair of `fixture` as an assignment problem.
pub fn build_assignment_problem(
    map: &StochasticLabelMap,
    vehicles: &[(usize, Cell)],
    demands: &[(usize, Cell)],
    lambdas: &[f64],
) -> Result<(AssignmentProblem, Vec<DemoPath>)> {
    let mut table = EfficiencyTable::new();
    let mut paths = Vec::new();
    for &(i, start) in vehicles {
        for &(j, goal) in demands {
            let set = candidate_paths(map, start, goal, lambdas).map_err(|e| match e {
                Error::Unreachable { .. } => Error::input(format!("vehicle {i} cannot reach demand {j}: {e}")),
                other => other,
            })?;
            for (k, c) in set.paths.into_iter().enumerate() {
                let triple = AssignmentTriple::new(i, j, k);
                table.insert(triple, c.efficiency.clone());
                paths.push(DemoPath { triple, lambda: c.lambda, cells: c.path.cells, efficiency: c.efficiency });
            }
        }
    }
    Ok((AssignmentProblem::new(table)?, paths))
}

pub fn run_assignment_demo(config: &BenchConfig) -> Result<AssignmentDemoResult> {
    run_assignment_demo_on(&assignment_demo(), config)
}

pub fn run_assignment_demo_on(fixture: &AssignmentDemoFixture, config: &BenchConfig) -> Result<AssignmentDemoResult> {
    let demo = &config.assignment;
    if demo.alphas.is_empty() {
        return Err(Error::input("no risk levels supplied"));
    }
    let (problem, candidates) =
        build_assignment_problem(&fixture.map, &fixture.vehicles, &fixture.demands, &demo.lambdas)?;
    let runs = demo
        .alphas
        .iter()
        .map(|&alpha| {
            let mut cvar = CVaRConfig::new(alpha, demo.delta);
            cvar.oracle_samples = demo.oracle_samples;
            cvar.rng_seed = config.seed;
            let assignment = assign_risk_aware(&problem, &cvar)?;
            let selected =
                assignment.triples.iter().filter_map(|t| candidates.iter().find(|c| c.triple == *t).cloned()).collect();
            Ok(DemoRun { alpha, assignment, selected })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AssignmentDemoResult { candidates, runs })
}
