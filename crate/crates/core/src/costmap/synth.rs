use rand::Rng;
use rand_distr::{Dirichlet, Distribution};

use super::{LabelCosts, StochasticLabelMap};
use crate::error::{Error, Result};

const IN_DISTRIBUTION_PEAK: f64 = 40.0;

/// Ground-truth labels plus the cells whose predictions should be unreliable.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLayout {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
    pub ood: Vec<bool>,
}

impl SyntheticLayout {
    /// Random labels with one rectangular out-of-distribution patch.
    pub fn random<R: Rng + ?Sized>(width: usize, height: usize, classes: usize, rng: &mut R) -> Self {
        let labels = (0..width * height).map(|_| rng.gen_range(0..classes)).collect();
        let (x0, x1) = ordered(rng.gen_range(0..width), rng.gen_range(0..width));
        let (y0, y1) = ordered(rng.gen_range(0..height), rng.gen_range(0..height));
        let ood = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| (x0..=x1).contains(&x) && (y0..=y1).contains(&y))
            .collect();
        SyntheticLayout { width, height, labels, ood }
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Draws `n_samples` class-probability vectors per cell: sharply peaked on the
/// layout label in-distribution, flat Dirichlet(1) inside OOD cells.
pub fn synthesize_label_map<R: Rng + ?Sized>(
    layout: &SyntheticLayout,
    classes: usize,
    n_samples: usize,
    label_costs: LabelCosts,
    rng: &mut R,
) -> Result<StochasticLabelMap> {
    let cells = layout.width * layout.height;
    if layout.labels.len() != cells || layout.ood.len() != cells {
        return Err(Error::input("layout vectors do not match its dimensions"));
    }
    if let Some(l) = layout.labels.iter().find(|l| **l >= classes) {
        return Err(Error::input(format!("layout label {l} is not below {classes}")));
    }
    let mut probs = Vec::with_capacity(cells * n_samples * classes);
    for (label, ood) in layout.labels.iter().zip(&layout.ood) {
        if classes == 1 {
            probs.extend(std::iter::repeat_n(1.0f32, n_samples));
            continue;
        }
        let mut alpha = vec![1.0; classes];
        if !ood {
            alpha[*label] += IN_DISTRIBUTION_PEAK;
        }
        let dirichlet = Dirichlet::new(&alpha).map_err(|e| Error::input(format!("dirichlet: {e}")))?;
        for _ in 0..n_samples {
            let v: Vec<f64> = dirichlet.sample(rng);
            let sum: f64 = v.iter().sum();
            probs.extend(v.iter().map(|p| (p / sum) as f32));
        }
    }
    StochasticLabelMap::new(layout.width, layout.height, classes, n_samples, probs, label_costs)
}
