//! Stochastic semantic cost maps and the planning utilities built on them.

mod astar;
mod clearance;
mod io;
mod paths;
mod synth;

pub use astar::{astar, octile_distance, Path};
pub use clearance::{clearance_check, supercover_line, ClearanceStatus, PlannerChoice, SwitchFilter};
pub use io::{read_label_stack, write_label_stack, LabelCosts};
pub use paths::{
    candidate_paths, confidence_speed, path_sample_costs, sct, surprise, write_path_csv, CandidatePath, CandidateSet,
    Episode, SkippedLambda,
};
pub use synth::{synthesize_label_map, SyntheticLayout};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid cell as `(x, y)`.
pub type Cell = (usize, usize);

pub const DEFAULT_LABEL_SAMPLES: usize = 20;
const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// The per-sample class-probability vectors of one cell.
#[derive(Debug, Clone, Copy)]
pub struct SampleStack<'a> {
    classes: usize,
    data: &'a [f32],
}

impl<'a> SampleStack<'a> {
    /// `data` holds `n_samples` consecutive vectors of `classes` probabilities.
    pub fn new(classes: usize, data: &'a [f32]) -> Result<Self> {
        if classes == 0 || data.is_empty() || !data.len().is_multiple_of(classes) {
            return Err(Error::input("sample stack length must be a positive multiple of the class count"));
        }
        Ok(SampleStack { classes, data })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &'a [f32]> + 'a {
        self.data.chunks_exact(self.classes)
    }
}

/// Most likely class of one probability vector; ties go to the lowest id.
pub fn argmax_class(probs: &[f32]) -> usize {
    let mut best = 0;
    for (c, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = c;
        }
    }
    best
}

/// Mode over samples of the per-sample argmax class; ties go to the lowest id.
pub fn predicted_label(stack: SampleStack<'_>) -> usize {
    let mut votes = vec![0usize; stack.classes];
    for s in stack.samples() {
        votes[argmax_class(s)] += 1;
    }
    let mut best = 0;
    for (c, v) in votes.iter().enumerate() {
        if *v > votes[best] {
            best = c;
        }
    }
    best
}

/// Mean over classes of the population variance of that class's probability.
pub fn cell_uncertainty(stack: SampleStack<'_>) -> Result<f64> {
    let n = stack.len();
    if n < 2 {
        return Err(Error::input("uncertainty needs at least two samples"));
    }
    let total: f64 = (0..stack.classes)
        .map(|c| {
            let vals: Vec<f64> = stack.samples().map(|s| s[c] as f64).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
        })
        .sum();
    Ok(total / stack.classes as f64)
}

/// Per-cell stacks of class-probability samples plus the class cost table.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticLabelMap {
    width: usize,
    height: usize,
    classes: usize,
    n_samples: usize,
    probs: Vec<f32>,
    label_costs: LabelCosts,
}

impl StochasticLabelMap {
    /// `probs` is row-major over cells, then samples, then classes.
    pub fn new(
        width: usize,
        height: usize,
        classes: usize,
        n_samples: usize,
        probs: Vec<f32>,
        label_costs: LabelCosts,
    ) -> Result<Self> {
        if width == 0 || height == 0 || classes == 0 {
            return Err(Error::input("label map dimensions must be positive"));
        }
        if n_samples < 2 {
            return Err(Error::input("label map needs at least two samples per cell"));
        }
        if probs.len() != width * height * n_samples * classes {
            return Err(Error::input(format!(
                "expected {} probabilities, got {}",
                width * height * n_samples * classes,
                probs.len()
            )));
        }
        if label_costs.len() != classes {
            return Err(Error::input(format!("{} label costs for {classes} classes", label_costs.len())));
        }
        for (i, v) in probs.chunks_exact(classes).enumerate() {
            if v.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::input(format!("negative or NaN probability in vector {i}")));
            }
            let sum: f64 = v.iter().map(|p| *p as f64).sum();
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(Error::input(format!("probability vector {i} sums to {sum}")));
            }
        }
        Ok(StochasticLabelMap { width, height, classes, n_samples, probs, label_costs })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn probs(&self) -> &[f32] {
        &self.probs
    }

    pub fn label_costs(&self) -> &LabelCosts {
        &self.label_costs
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height
    }

    pub fn stack(&self, cell: Cell) -> SampleStack<'_> {
        let per_cell = self.n_samples * self.classes;
        let start = (cell.1 * self.width + cell.0) * per_cell;
        SampleStack { classes: self.classes, data: &self.probs[start..start + per_cell] }
    }

    pub fn predicted_labels(&self) -> Vec<usize> {
        self.cells().map(|c| predicted_label(self.stack(c))).collect()
    }

    /// Label of sample `s` at `cell`: the argmax of that sample's vector.
    pub fn sample_label(&self, cell: Cell, s: usize) -> usize {
        let per_cell = self.n_samples * self.classes;
        let start = (cell.1 * self.width + cell.0) * per_cell + s * self.classes;
        argmax_class(&self.probs[start..start + self.classes])
    }

    fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| (x, y)))
    }
}

/// Per-cell traversal cost `Ĉ(x) = C(l_x) + λ·uncertainty(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCostMap {
    width: usize,
    height: usize,
    #[serde(with = "io::infinite_as_null")]
    cell_cost: Vec<f64>,
    lambda: f64,
}

impl RiskCostMap {
    /// Costs must be non-negative; infinity marks untraversable cells.
    pub fn from_costs(width: usize, height: usize, cell_cost: Vec<f64>, lambda: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("cost map dimensions must be positive"));
        }
        if cell_cost.len() != width * height {
            return Err(Error::input("cost count does not match grid size"));
        }
        if cell_cost.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::input("cell costs must be non-negative"));
        }
        Ok(RiskCostMap { width, height, cell_cost, lambda })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn costs(&self) -> &[f64] {
        &self.cell_cost
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height
    }

    pub fn cost(&self, cell: Cell) -> f64 {
        self.cell_cost[cell.1 * self.width + cell.0]
    }

    pub fn min_finite_cost(&self) -> Option<f64> {
        self.cell_cost.iter().copied().filter(|c| c.is_finite()).reduce(f64::min)
    }
}

pub fn build_risk_map(map: &StochasticLabelMap, lambda: f64) -> Result<RiskCostMap> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::input(format!("lambda {lambda} must be finite and non-negative")));
    }
    let costs = map
        .cells()
        .map(|cell| {
            let stack = map.stack(cell);
            let base = map.label_costs[predicted_label(stack)];
            if base.is_infinite() {
                Ok(f64::INFINITY)
            } else {
                Ok(base + lambda * cell_uncertainty(stack)?)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    RiskCostMap::from_costs(map.width, map.height, costs, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stack(classes: usize, data: &[f32]) -> SampleStack<'_> {
        SampleStack::new(classes, data).unwrap()
    }

    #[test]
    fn predicted_label_examples() {
        assert_eq!(predicted_label(stack(3, &[0.1, 0.1, 0.8, 0.0, 0.3, 0.7])), 2);
        let votes_112 = [0.0, 0.9, 0.1, 0.0, 0.6, 0.4, 0.0, 0.2, 0.8];
        assert_eq!(predicted_label(stack(3, &votes_112)), 1);
        let votes_1122 = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        assert_eq!(predicted_label(stack(3, &votes_1122)), 1);
        // Argmax ties inside a vector resolve to the lower class.
        assert_eq!(predicted_label(stack(2, &[0.5, 0.5])), 0);
    }

    #[test]
    fn uncertainty_examples() {
        assert_eq!(cell_uncertainty(stack(2, &[0.3, 0.7, 0.3, 0.7, 0.3, 0.7])).unwrap(), 0.0);
        assert_eq!(cell_uncertainty(stack(2, &[0.0, 1.0, 1.0, 0.0])).unwrap(), 0.25);
        assert!(cell_uncertainty(stack(2, &[0.0, 1.0])).is_err());
        let a = cell_uncertainty(stack(3, &[0.2, 0.3, 0.5, 0.6, 0.1, 0.3])).unwrap();
        let b = cell_uncertainty(stack(3, &[0.5, 0.2, 0.3, 0.3, 0.6, 0.1])).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    fn one_cell_map(data: Vec<f32>, costs: Vec<f64>) -> StochasticLabelMap {
        let classes = costs.len();
        let n = data.len() / classes;
        StochasticLabelMap::new(1, 1, classes, n, data, LabelCosts::new(costs).unwrap()).unwrap()
    }

    #[test]
    fn risk_map_examples() {
        let m = one_cell_map(vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0], vec![1.0, 4.0]);
        // Votes tie 2-1 for class 0: cost 1, uncertainty 2/9.
        let zero = build_risk_map(&m, 0.0).unwrap();
        assert_eq!(zero.cost((0, 0)), 1.0);

        let m = one_cell_map(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 1.0]);
        assert_eq!(build_risk_map(&m, 50.0).unwrap().cost((0, 0)), 13.5);

        let blocked = one_cell_map(vec![0.0, 1.0, 0.2, 0.8], vec![1.0, f64::INFINITY]);
        assert!(build_risk_map(&blocked, 100.0).unwrap().cost((0, 0)).is_infinite());
        assert!(build_risk_map(&m, -1.0).is_err());
    }

    #[test]
    fn label_map_validation() {
        let costs = || LabelCosts::new(vec![1.0, 2.0]).unwrap();
        assert!(StochasticLabelMap::new(1, 1, 2, 1, vec![1.0, 0.0], costs()).is_err());
        assert!(StochasticLabelMap::new(1, 1, 2, 2, vec![0.6, 0.6, 0.5, 0.5], costs()).is_err());
        assert!(StochasticLabelMap::new(1, 1, 2, 2, vec![-0.5, 1.5, 0.5, 0.5], costs()).is_err());
        assert!(StochasticLabelMap::new(1, 1, 2, 2, vec![0.5, 0.5], costs()).is_err());
        assert!(StochasticLabelMap::new(1, 1, 2, 2, vec![0.5, 0.5, 0.5, 0.5], costs()).is_ok());
    }

    proptest! {
        #[test]
        fn risk_cost_monotone_in_lambda(seed in any::<u64>(), l1 in 0.0f64..100.0, extra in 0.0f64..100.0) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let layout = SyntheticLayout::random(6, 5, 3, &mut rng);
            let costs = LabelCosts::new(vec![1.0, 3.0, f64::INFINITY]).unwrap();
            let map = synthesize_label_map(&layout, 3, 6, costs, &mut rng).unwrap();
            let a = build_risk_map(&map, l1).unwrap();
            let b = build_risk_map(&map, l1 + extra).unwrap();
            for (x, y) in a.costs().iter().zip(b.costs()) {
                prop_assert!(y >= x);
            }
        }
    }
}
