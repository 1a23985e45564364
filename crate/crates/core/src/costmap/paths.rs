use std::io::Write;

use serde::{Deserialize, Serialize};

use super::astar::{astar, check_endpoints, step_weight, Path};
use super::{build_risk_map, Cell, StochasticLabelMap};
use crate::error::{Error, Result};
use crate::risk::EmpiricalDist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePath {
    pub lambda: f64,
    pub path: Path,
    /// Cost of the fixed geometry under each sample's argmax labels.
    pub sample_costs: Vec<f64>,
    pub efficiency: EmpiricalDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLambda {
    pub lambda: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub paths: Vec<CandidatePath>,
    pub skipped: Vec<SkippedLambda>,
}

/// Per-sample cost of `path`: entered cells only, each weighted by its step length.
pub fn path_sample_costs(map: &StochasticLabelMap, path: &Path) -> Vec<f64> {
    (0..map.n_samples())
        .map(|s| {
            path.cells.windows(2).map(|w| map.label_costs()[map.sample_label(w[1], s)] * step_weight(w[0], w[1])).sum()
        })
        .collect()
}

pub fn candidate_paths(map: &StochasticLabelMap, start: Cell, goal: Cell, lambdas: &[f64]) -> Result<CandidateSet> {
    if lambdas.is_empty() {
        return Err(Error::input("no lambda values supplied"));
    }
    if start == goal {
        return Err(Error::input("start equals goal"));
    }
    let mut paths: Vec<CandidatePath> = Vec::new();
    let mut skipped = Vec::new();
    for &lambda in lambdas {
        let risk = build_risk_map(map, lambda)?;
        check_endpoints(&risk, start, goal)?;
        let path = match astar(&risk, start, goal) {
            Ok(p) => p,
            Err(e @ Error::Unreachable { .. }) => {
                skipped.push(SkippedLambda { lambda, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(e),
        };
        if paths.iter().any(|c| c.path.cells == path.cells) {
            continue;
        }
        let sample_costs = path_sample_costs(map, &path);
        let eff = sample_costs
            .iter()
            .map(|c| match *c {
                c if c.is_infinite() => Ok(0.0),
                c if c > 0.0 => Ok(1.0 / c),
                _ => Err(Error::input("zero-cost path has unbounded efficiency")),
            })
            .collect::<Result<Vec<f64>>>()?;
        paths.push(CandidatePath { lambda, path, sample_costs, efficiency: EmpiricalDist::new(eff)? });
    }
    if paths.is_empty() {
        return Err(Error::Unreachable { start, goal });
    }
    Ok(CandidateSet { paths, skipped })
}

/// Ground-truth label cost minus predicted label cost, summed over every cell of `path`.
pub fn surprise(path: &Path, gt_labels: &[usize], map: &StochasticLabelMap) -> Result<f64> {
    if gt_labels.len() != map.width() * map.height() {
        return Err(Error::input("ground-truth labels do not cover the map"));
    }
    let predicted = map.predicted_labels();
    let costs = map.label_costs();
    let (mut truth, mut guess) = (0.0, 0.0);
    for &cell in &path.cells {
        if !map.contains(cell) {
            return Err(Error::input(format!("path cell {cell:?} is outside the map")));
        }
        let i = cell.1 * map.width() + cell.0;
        let gt = gt_labels[i];
        if gt >= map.classes() {
            return Err(Error::input(format!("ground-truth label {gt} is not a class")));
        }
        truth += costs[gt];
        guess += costs[predicted[i]];
    }
    Ok(truth - guess)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub success: bool,
    /// Shortest achievable completion time.
    pub shortest: f64,
    /// Measured completion time.
    pub measured: f64,
}

impl Episode {
    pub fn new(success: bool, shortest: f64, measured: f64) -> Self {
        Episode { success, shortest, measured }
    }
}

pub fn sct(episodes: &[Episode]) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::input("no episodes"));
    }
    let mut total = 0.0;
    for e in episodes {
        if !(e.shortest > 0.0) || !(e.measured >= 0.0) {
            return Err(Error::input(format!("episode times {} / {} out of range", e.shortest, e.measured)));
        }
        if e.success {
            total += e.shortest / e.measured.max(e.shortest);
        }
    }
    Ok(total / episodes.len() as f64)
}

/// Linear confidence to speed model, clamped to `[0, max_speed]`.
pub fn confidence_speed(confidence: f64, gain: f64, max_speed: f64) -> f64 {
    (gain * confidence).clamp(0.0, max_speed)
}

/// One row per path cell: `path,lambda,step,x,y`.
pub fn write_path_csv<W: Write>(paths: &[CandidatePath], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "lambda", "step", "x", "y"])?;
    for (k, c) in paths.iter().enumerate() {
        for (step, (x, y)) in c.path.cells.iter().enumerate() {
            w.write_record([k.to_string(), c.lambda.to_string(), step.to_string(), x.to_string(), y.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<path csv>", e))
}
