//! CVaR machinery and risk-aware path assignment.
//!
//! Efficiencies `e_ijk` (vehicle `i` serving demand `j` over candidate path `k`)
//! are empirical distributions. The total efficiency of an assignment set `S`
//! is `f(S, y) = Σ_j max_{(i,j,k) ∈ S_j} e_ijk(y)`, and CVaR of `f` is maximized
//! through the auxiliary function
//!
//! ```text
//! H(S, τ) = τ − (1/α) · E[(τ − f(S, y))₊]
//! ```
//!
//! by a sequential greedy over a grid of `τ` values, with `E` estimated from a
//! fixed schedule of joint sample draws.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-empty sample set of finite, non-negative efficiencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmpiricalDist {
    samples: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("empirical distribution has no samples"));
        }
        if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::input("efficiency samples must be finite and non-negative"));
        }
        Ok(EmpiricalDist { samples })
    }

    /// Point mass at `value`, repeated `n` times.
    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sample at draw index `q`; indices wrap for shorter distributions.
    fn at(&self, q: usize) -> f64 {
        self.samples[q % self.samples.len()]
    }
}

impl TryFrom<Vec<f64>> for EmpiricalDist {
    type Error = Error;

    fn try_from(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples)
    }
}

impl From<EmpiricalDist> for Vec<f64> {
    fn from(d: EmpiricalDist) -> Self {
        d.samples
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("risk level {alpha} outside (0, 1]")))
    }
}

/// Left-tail CVaR of a reward sample: the mean of the lowest `⌈α·n⌉` values.
pub fn cvar(dist: &EmpiricalDist, alpha: f64) -> Result<f64> {
    cvar_of(&dist.samples, alpha)
}

pub fn cvar_of(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if samples.is_empty() {
        return Err(Error::input("empirical distribution has no samples"));
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Guard against α·n landing a hair above an integer.
    let k = ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    // Prefix means of ascending values never decrease; the running max keeps
    // rounding in the prefix sums from breaking that across different α.
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    for (i, v) in sorted[..k].iter().enumerate() {
        sum += v;
        best = best.max(sum / (i + 1) as f64);
    }
    Ok(best)
}

/// `(i, j, k)`: vehicle `i` serves demand `j` over path `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AssignmentTriple {
    #[serde(rename = "i")]
    pub vehicle: usize,
    #[serde(rename = "j")]
    pub demand: usize,
    #[serde(rename = "k")]
    pub path: usize,
}

impl AssignmentTriple {
    pub const fn new(vehicle: usize, demand: usize, path: usize) -> Self {
        AssignmentTriple { vehicle, demand, path }
    }
}

/// Assignment set under the vehicle partition matroid: each vehicle appears
/// in at most one triple.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentSet {
    triples: Vec<AssignmentTriple>,
}

impl AssignmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = AssignmentTriple>) -> Result<Self> {
        let mut set = Self::new();
        for t in triples {
            set.insert(t)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, triple: AssignmentTriple) -> Result<()> {
        if self.has_vehicle(triple.vehicle) {
            return Err(Error::input(format!("vehicle {} is already assigned", triple.vehicle)));
        }
        let at = self.triples.partition_point(|t| *t < triple);
        self.triples.insert(at, triple);
        Ok(())
    }

    pub fn has_vehicle(&self, vehicle: usize) -> bool {
        self.triples.iter().any(|t| t.vehicle == vehicle)
    }

    pub fn triples(&self) -> &[AssignmentTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// The disjoint per-demand groups `S_j`.
    pub fn by_demand(&self) -> BTreeMap<usize, Vec<AssignmentTriple>> {
        let mut groups: BTreeMap<usize, Vec<AssignmentTriple>> = BTreeMap::new();
        for t in &self.triples {
            groups.entry(t.demand).or_default().push(*t);
        }
        groups
    }
}

/// Efficiency distribution per candidate triple.
pub type EfficiencyTable = BTreeMap<AssignmentTriple, EmpiricalDist>;

fn lookup<'a>(dists: &'a EfficiencyTable, t: &AssignmentTriple) -> Result<&'a EmpiricalDist> {
    dists.get(t).ok_or_else(|| {
        Error::input(format!("no efficiency distribution for ({}, {}, {})", t.vehicle, t.demand, t.path))
    })
}

/// `f(S, y_q)`: per demand, the best efficiency among its triples at sample `q`.
pub fn total_efficiency(set: &AssignmentSet, sample_index: usize, dists: &EfficiencyTable) -> Result<f64> {
    let mut total = 0.0;
    for group in set.by_demand().values() {
        let mut best = f64::NEG_INFINITY;
        for t in group {
            let d = lookup(dists, t)?;
            let v = d.samples.get(sample_index).ok_or_else(|| {
                Error::input(format!("sample index {sample_index} out of range for a {}-sample distribution", d.len()))
            })?;
            best = best.max(*v);
        }
        total += best;
    }
    Ok(total)
}

/// Upper bound on `f`: per demand, the largest sample over all its triples, summed.
pub fn compute_gamma(dists: &EfficiencyTable, demands: &BTreeSet<usize>) -> f64 {
    demands.iter().map(|j| dists.iter().filter(|(t, _)| t.demand == *j).map(|(_, d)| d.max()).fold(0.0, f64::max)).sum()
}

pub const DEFAULT_ORACLE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVaRConfig {
    pub alpha: f64,
    /// Upper end of the `τ` search range; computed from the data when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Grid separation `Δ`.
    pub delta: f64,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Skip rounds whose best marginal gain is not positive instead of adding
    /// the argmax anyway.
    #[serde(default)]
    pub strict_gains: bool,
    #[serde(default)]
    pub rounds: GreedyRounds,
}

/// How many greedy rounds run at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyRounds {
    /// `|D|` rounds, as written in the algorithm listing.
    #[default]
    Demands,
    /// One round per vehicle: plain greedy over the whole partition matroid.
    Vehicles,
}

fn default_oracle_samples() -> usize {
    DEFAULT_ORACLE_SAMPLES
}

impl CVaRConfig {
    pub fn new(alpha: f64, delta: f64) -> Self {
        CVaRConfig {
            alpha,
            gamma: None,
            delta,
            oracle_samples: DEFAULT_ORACLE_SAMPLES,
            rng_seed: 0,
            strict_gains: false,
            rounds: GreedyRounds::Demands,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::input("grid separation must be positive"));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::input("gamma must be finite and non-negative"));
            }
            if g > 0.0 && self.delta > g {
                return Err(Error::input(format!("grid separation {} exceeds gamma {g}", self.delta)));
            }
        }
        if self.oracle_samples == 0 {
            return Err(Error::input("oracle needs at least one sample"));
        }
        Ok(())
    }
}

/// `τ_i = i·Δ` for `i = 0..=⌈Γ/Δ⌉`.
pub fn tau_grid(gamma: f64, delta: f64) -> Vec<f64> {
    let steps = (gamma / delta).ceil().max(0.0) as usize;
    (0..=steps).map(|i| i as f64 * delta).collect()
}

/// Seed for the oracle draws at grid index `index`.
pub fn tau_seed(base_seed: u64, index: usize) -> u64 {
    // SplitMix64 finalizer over the combined input.
    let mut z = base_seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A fixed schedule of joint sample indices. Every distribution is read at the
/// same index within one draw, so all candidates are compared on shared noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleDraws {
    indices: Vec<usize>,
}

impl OracleDraws {
    pub fn sample(seed: u64, draws: usize, sample_count: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OracleDraws { indices: (0..draws).map(|_| rng.gen_range(0..sample_count.max(1))).collect() }
    }

    /// Every index `0..sample_count` exactly once: the exact expectation over
    /// the empirical joint distribution.
    pub fn exhaustive(sample_count: usize) -> Self {
        OracleDraws { indices: (0..sample_count).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn longest_sample(dists: &EfficiencyTable) -> usize {
    dists.values().map(EmpiricalDist::len).max().unwrap_or(0)
}

/// Per-draw values of `f(S, ·)`.
pub fn efficiency_draws(set: &AssignmentSet, draws: &OracleDraws, dists: &EfficiencyTable) -> Result<Vec<f64>> {
    let groups: Vec<Vec<&EmpiricalDist>> = set
        .by_demand()
        .values()
        .map(|g| g.iter().map(|t| lookup(dists, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(draws
        .indices
        .iter()
        .map(|&q| groups.iter().map(|g| g.iter().map(|d| d.at(q)).fold(f64::NEG_INFINITY, f64::max)).sum())
        .collect())
}

fn shortfall(values: &[f64], tau: f64) -> f64 {
    values.iter().map(|f| (tau - f).max(0.0)).sum()
}

fn h_from_shortfall(tau: f64, shortfall_sum: f64, draws: usize, alpha: f64) -> f64 {
    tau - shortfall_sum / draws as f64 / alpha
}

/// `Ĥ(S, τ)` under an explicit draw schedule.
pub fn estimate_h_with(
    set: &AssignmentSet,
    tau: f64,
    alpha: f64,
    draws: &OracleDraws,
    dists: &EfficiencyTable,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(tau >= 0.0) {
        return Err(Error::input("tau must be non-negative"));
    }
    if draws.is_empty() {
        return Err(Error::input("oracle needs at least one draw"));
    }
    let values = efficiency_draws(set, draws, dists)?;
    Ok(h_from_shortfall(tau, shortfall(&values, tau), values.len(), alpha))
}

/// `Ĥ(S, τ) = τ − (1/α) · mean_q (τ − f(S, y_q))₊` with `config.oracle_samples`
/// draws seeded from `config.rng_seed`.
pub fn estimate_h(set: &AssignmentSet, tau: f64, config: &CVaRConfig, dists: &EfficiencyTable) -> Result<f64> {
    config.validate()?;
    let draws = OracleDraws::sample(config.rng_seed, config.oracle_samples, longest_sample(dists));
    estimate_h_with(set, tau, config.alpha, &draws, dists)
}

/// Vehicles, demands and the efficiency distribution of every candidate triple.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    vehicles: BTreeSet<usize>,
    demands: BTreeSet<usize>,
    dists: EfficiencyTable,
}

impl AssignmentProblem {
    pub fn new(dists: EfficiencyTable) -> Result<Self> {
        if dists.is_empty() {
            return Err(Error::input("assignment problem has no efficiency distributions"));
        }
        let vehicles = dists.keys().map(|t| t.vehicle).collect();
        let demands = dists.keys().map(|t| t.demand).collect();
        Ok(AssignmentProblem { vehicles, demands, dists })
    }

    pub fn vehicles(&self) -> &BTreeSet<usize> {
        &self.vehicles
    }

    pub fn demands(&self) -> &BTreeSet<usize> {
        &self.demands
    }

    pub fn dists(&self) -> &EfficiencyTable {
        &self.dists
    }

    pub fn gamma(&self) -> f64 {
        compute_gamma(&self.dists, &self.demands)
    }

    /// Every vehicle-unique assignment set, including the empty one.
    pub fn feasible_sets(&self) -> Vec<AssignmentSet> {
        let mut options: Vec<Vec<Option<AssignmentTriple>>> = Vec::new();
        for v in &self.vehicles {
            let mut opts = vec![None];
            opts.extend(self.dists.keys().filter(|t| t.vehicle == *v).map(|t| Some(*t)));
            options.push(opts);
        }
        let mut out = vec![AssignmentSet::new()];
        for opts in options {
            let mut next = Vec::with_capacity(out.len() * opts.len());
            for base in &out {
                for o in &opts {
                    let mut s = base.clone();
                    if let Some(t) = o {
                        s.insert(*t).expect("one option per vehicle");
                    }
                    next.push(s);
                }
            }
            out = next;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ProblemDoc {
            vehicles: self.vehicles.iter().copied().collect(),
            demands: self.demands.iter().copied().collect(),
            efficiencies: self
                .dists
                .iter()
                .map(|(t, d)| TripleSamples { triple: *t, samples: d.samples.clone() })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemDoc = serde_json::from_str(text)?;
        let vehicles: BTreeSet<usize> = doc.vehicles.into_iter().collect();
        let demands: BTreeSet<usize> = doc.demands.into_iter().collect();
        let mut dists = EfficiencyTable::new();
        for e in doc.efficiencies {
            let t = e.triple;
            if !vehicles.contains(&t.vehicle) || !demands.contains(&t.demand) {
                return Err(Error::input(format!(
                    "triple ({}, {}, {}) names an unknown vehicle or demand",
                    t.vehicle, t.demand, t.path
                )));
            }
            if dists.insert(t, EmpiricalDist::new(e.samples)?).is_some() {
                return Err(Error::input(format!("duplicate triple ({}, {}, {})", t.vehicle, t.demand, t.path)));
            }
        }
        let mut problem = Self::new(dists)?;
        problem.vehicles = vehicles;
        problem.demands = demands;
        Ok(problem)
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemDoc {
    vehicles: Vec<usize>,
    demands: Vec<usize>,
    efficiencies: Vec<TripleSamples>,
}

#[derive(Serialize, Deserialize)]
struct TripleSamples {
    #[serde(flatten)]
    triple: AssignmentTriple,
    samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAwareAssignment {
    pub triples: Vec<AssignmentTriple>,
    pub tau_star: f64,
    #[serde(rename = "H_hat")]
    pub h_hat: f64,
    pub alpha: f64,
}

impl RiskAwareAssignment {
    pub fn set(&self) -> AssignmentSet {
        AssignmentSet::from_triples(self.triples.iter().copied()).expect("solver output is vehicle-unique")
    }
}

/// Greedy result for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCandidate {
    pub tau: f64,
    pub set: AssignmentSet,
    pub h_hat: f64,
}

/// Sequential greedy over the `τ` grid: at each `τ`, `|D|` rounds each add the
/// triple with the largest marginal `Ĥ` gain and retire its vehicle; the
/// `(S, τ)` pair with the largest `Ĥ` wins.
pub fn assign_risk_aware(problem: &AssignmentProblem, config: &CVaRConfig) -> Result<RiskAwareAssignment> {
    let candidates = assign_risk_aware_grid(problem, config)?;
    let best = candidates
        .iter()
        .fold(None::<&GridCandidate>, |acc, c| match acc {
            Some(b) if b.h_hat >= c.h_hat => Some(b),
            _ => Some(c),
        })
        .expect("grid has at least one point");
    Ok(RiskAwareAssignment {
        triples: best.set.triples().to_vec(),
        tau_star: best.tau,
        h_hat: best.h_hat,
        alpha: config.alpha,
    })
}

/// Runs the greedy at every grid point and returns all `(τ, S, Ĥ)` candidates.
pub fn assign_risk_aware_grid(problem: &AssignmentProblem, config: &CVaRConfig) -> Result<Vec<GridCandidate>> {
    config.validate()?;
    let gamma = config.gamma.unwrap_or_else(|| problem.gamma());
    let n_samples = longest_sample(&problem.dists);
    tau_grid(gamma, config.delta)
        .into_iter()
        .enumerate()
        .map(|(index, tau)| {
            let draws = OracleDraws::sample(tau_seed(config.rng_seed, index), config.oracle_samples, n_samples);
            let set = greedy_at_tau(problem, tau, &draws, config.strict_gains, config.rounds);
            let values = efficiency_draws(&set, &draws, &problem.dists)?;
            let h_hat = h_from_shortfall(tau, shortfall(&values, tau), draws.len(), config.alpha);
            Ok(GridCandidate { tau, set, h_hat })
        })
        .collect()
}

/// Greedy assignment for a fixed `τ`. The marginal gain in `Ĥ` equals the drop in
/// the shortfall sum `Σ_q (τ − f)₊` scaled by `1/(α·draws)`, so candidates are
/// ranked on the shortfall alone and the chosen sets do not depend on `α`.
pub fn greedy_at_tau(
    problem: &AssignmentProblem,
    tau: f64,
    draws: &OracleDraws,
    strict: bool,
    rounds: GreedyRounds,
) -> AssignmentSet {
    let demand_slot: BTreeMap<usize, usize> = problem.demands.iter().enumerate().map(|(s, j)| (*j, s)).collect();
    let m = demand_slot.len();
    // best[q * m + slot]: current max efficiency at a demand in draw q (0 if unserved).
    let mut best = vec![0.0f64; draws.len() * m];
    let mut totals = vec![0.0f64; draws.len()];
    let mut current = shortfall(&totals, tau);
    let mut set = AssignmentSet::new();
    let mut free: BTreeSet<usize> = problem.vehicles.clone();

    let round_count = match rounds {
        GreedyRounds::Demands => problem.demands.len(),
        GreedyRounds::Vehicles => problem.vehicles.len(),
    };
    for _ in 0..round_count {
        let mut pick: Option<(f64, AssignmentTriple)> = None;
        for (t, d) in &problem.dists {
            if !free.contains(&t.vehicle) {
                continue;
            }
            let slot = demand_slot[&t.demand];
            let sf: f64 = draws
                .indices
                .iter()
                .enumerate()
                .map(|(q, &idx)| {
                    let old = best[q * m + slot];
                    let f = totals[q] - old + old.max(d.at(idx));
                    (tau - f).max(0.0)
                })
                .sum();
            if pick.is_none_or(|(s, _)| sf < s) {
                pick = Some((sf, *t));
            }
        }
        let Some((sf, t)) = pick else { break };
        if strict && sf >= current {
            break;
        }
        let d = &problem.dists[&t];
        let slot = demand_slot[&t.demand];
        for (q, &idx) in draws.indices.iter().enumerate() {
            let cell = &mut best[q * m + slot];
            let v = cell.max(d.at(idx));
            totals[q] += v - *cell;
            *cell = v;
        }
        current = sf;
        set.insert(t).expect("vehicle was free");
        free.remove(&t.vehicle);
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dist(v: &[f64]) -> EmpiricalDist {
        EmpiricalDist::new(v.to_vec()).unwrap()
    }

    fn t(i: usize, j: usize, k: usize) -> AssignmentTriple {
        AssignmentTriple::new(i, j, k)
    }

    /// Sort-and-average reference for the left-tail CVaR.
    fn cvar_oracle(samples: &[f64], alpha: f64) -> f64 {
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = ((alpha * s.len() as f64) - 1e-9).ceil().max(1.0) as usize;
        s.iter().take(k).sum::<f64>() / k as f64
    }

    #[test]
    fn cvar_examples() {
        let d = dist(&[4.0, 2.0, 3.0, 1.0]);
        assert_eq!(cvar(&d, 0.5).unwrap(), 1.5);
        assert_eq!(cvar(&d, 1.0).unwrap(), 2.5);
        assert_eq!(cvar(&d, 0.25).unwrap(), 1.0);
        assert_eq!(cvar(&dist(&[7.0; 9]), 0.3).unwrap(), 7.0);
        assert!(cvar(&d, 0.0).is_err());
        assert!(cvar(&d, 1.5).is_err());
        assert!(EmpiricalDist::new(vec![]).is_err());
        assert!(EmpiricalDist::new(vec![-1.0]).is_err());
        assert!(EmpiricalDist::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn total_efficiency_examples() {
        let mut dists = EfficiencyTable::new();
        dists.insert(t(0, 0, 0), dist(&[2.0]));
        dists.insert(t(1, 0, 0), dist(&[5.0]));
        dists.insert(t(2, 1, 0), dist(&[4.0]));
        dists.insert(t(3, 0, 1), dist(&[3.0]));
        assert_eq!(total_efficiency(&AssignmentSet::new(), 0, &dists).unwrap(), 0.0);
        let s = AssignmentSet::from_triples([t(0, 0, 0), t(1, 0, 0)]).unwrap();
        assert_eq!(total_efficiency(&s, 0, &dists).unwrap(), 5.0);
        let s = AssignmentSet::from_triples([t(3, 0, 1), t(2, 1, 0)]).unwrap();
        assert_eq!(total_efficiency(&s, 0, &dists).unwrap(), 7.0);
        assert!(total_efficiency(&s, 1, &dists).is_err());
        let missing = AssignmentSet::from_triples([t(9, 0, 0)]).unwrap();
        assert!(total_efficiency(&missing, 0, &dists).is_err());
    }

    #[test]
    fn assignment_set_rejects_second_triple_for_vehicle() {
        let mut s = AssignmentSet::new();
        s.insert(t(0, 0, 0)).unwrap();
        assert!(s.insert(t(0, 1, 0)).is_err());
        s.insert(t(1, 0, 1)).unwrap();
        assert_eq!(s.by_demand()[&0].len(), 2);
    }

    #[test]
    fn gamma_examples() {
        let mut dists = EfficiencyTable::new();
        dists.insert(t(0, 0, 0), dist(&[1.0, 5.0]));
        dists.insert(t(1, 0, 0), dist(&[2.0, 3.0]));
        assert_eq!(compute_gamma(&dists, &BTreeSet::from([0])), 5.0);
        dists.insert(t(0, 1, 0), dist(&[7.0, 0.5]));
        assert_eq!(compute_gamma(&dists, &BTreeSet::from([0, 1])), 12.0);
        let zeros: EfficiencyTable = [(t(0, 0, 0), dist(&[0.0, 0.0]))].into_iter().collect();
        let problem = AssignmentProblem::new(zeros).unwrap();
        assert_eq!(problem.gamma(), 0.0);
        let grid = assign_risk_aware_grid(&problem, &CVaRConfig::new(0.5, 0.1)).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].tau, 0.0);
    }

    #[test]
    fn tau_grid_is_inclusive() {
        assert_eq!(tau_grid(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(tau_grid(1.1, 0.5), vec![0.0, 0.5, 1.0, 1.5]);
        assert_eq!(tau_grid(0.0, 0.5), vec![0.0]);
    }

    #[test]
    fn estimate_h_examples() {
        let dists: EfficiencyTable = [(t(0, 0, 0), dist(&[1.0, 2.0, 3.0]))].into_iter().collect();
        let s = AssignmentSet::from_triples([t(0, 0, 0)]).unwrap();
        let cfg = CVaRConfig { oracle_samples: 200, ..CVaRConfig::new(0.3, 0.1) };
        assert_eq!(estimate_h(&s, 0.0, &cfg, &dists).unwrap(), 0.0);
        let full = CVaRConfig::new(1.0, 0.1);
        assert_eq!(estimate_h(&AssignmentSet::new(), 2.5, &full, &dists).unwrap(), 0.0);
        assert!(estimate_h(&s, -1.0, &cfg, &dists).is_err());
    }

    #[test]
    fn deterministic_h_peaks_at_value() {
        // Closed form for f ≡ c: H(τ) = τ for τ ≤ c, τ − (τ − c)/α beyond.
        let c = 2.0;
        let dists: EfficiencyTable = [(t(0, 0, 0), dist(&[c; 5]))].into_iter().collect();
        let s = AssignmentSet::from_triples([t(0, 0, 0)]).unwrap();
        let draws = OracleDraws::exhaustive(5);
        for alpha in [0.1, 0.5, 1.0] {
            let hs: Vec<f64> = tau_grid(4.0, 0.25)
                .into_iter()
                .map(|tau| estimate_h_with(&s, tau, alpha, &draws, &dists).unwrap())
                .collect();
            let (arg, max) = hs.iter().enumerate().fold((0, f64::MIN), |a, (i, h)| if *h > a.1 { (i, *h) } else { a });
            assert_eq!(max, c);
            assert_eq!(arg as f64 * 0.25, c);
        }
    }

    #[test]
    fn single_triple_problem() {
        let dists: EfficiencyTable = [(t(0, 0, 0), dist(&[0.5, 1.0, 1.5]))].into_iter().collect();
        let problem = AssignmentProblem::new(dists).unwrap();
        let out = assign_risk_aware(&problem, &CVaRConfig::new(0.5, 0.1)).unwrap();
        assert_eq!(out.triples, vec![t(0, 0, 0)]);
        let grid = assign_risk_aware_grid(&problem, &CVaRConfig::new(0.5, 0.1)).unwrap();
        assert!(grid.iter().all(|c| c.h_hat <= out.h_hat));
        assert!(grid.iter().any(|c| c.tau == out.tau_star && c.h_hat == out.h_hat));
    }

    #[test]
    fn fewer_vehicles_than_demands() {
        let dists: EfficiencyTable =
            [(t(0, 0, 0), dist(&[1.0, 2.0])), (t(0, 1, 0), dist(&[3.0, 3.0]))].into_iter().collect();
        let problem = AssignmentProblem::new(dists).unwrap();
        let out = assign_risk_aware(&problem, &CVaRConfig::new(1.0, 0.5)).unwrap();
        assert_eq!(out.triples, vec![t(0, 1, 0)]);
    }

    #[test]
    fn strict_mode_skips_useless_rounds() {
        // Second vehicle adds nothing on top of the first at the same demand.
        let dists: EfficiencyTable =
            [(t(0, 0, 0), dist(&[2.0, 2.0])), (t(1, 0, 0), dist(&[1.0, 1.0])), (t(1, 1, 0), dist(&[0.0, 0.0]))]
                .into_iter()
                .collect();
        let problem = AssignmentProblem::new(dists).unwrap();
        let draws = OracleDraws::exhaustive(2);
        assert_eq!(greedy_at_tau(&problem, 2.0, &draws, false, GreedyRounds::Demands).len(), 2);
        assert_eq!(greedy_at_tau(&problem, 2.0, &draws, true, GreedyRounds::Demands).triples(), &[t(0, 0, 0)]);
    }

    #[test]
    fn vehicle_rounds_add_redundant_vehicles() {
        // One demand, two vehicles whose good draws alternate.
        let dists: EfficiencyTable =
            [(t(0, 0, 0), dist(&[1.0, 0.0])), (t(1, 0, 0), dist(&[0.0, 1.0]))].into_iter().collect();
        let problem = AssignmentProblem::new(dists).unwrap();
        let draws = OracleDraws::exhaustive(2);
        assert_eq!(greedy_at_tau(&problem, 1.0, &draws, false, GreedyRounds::Demands).len(), 1);
        assert_eq!(greedy_at_tau(&problem, 1.0, &draws, false, GreedyRounds::Vehicles).len(), 2);
        let mut config = CVaRConfig::new(0.5, 0.25);
        config.rounds = GreedyRounds::Vehicles;
        let out = assign_risk_aware(&problem, &config).unwrap();
        assert_eq!(out.triples.len(), 2);
        assert!(out.h_hat > assign_risk_aware(&problem, &CVaRConfig::new(0.5, 0.25)).unwrap().h_hat);
    }

    #[test]
    fn problem_json_roundtrip() {
        let dists: EfficiencyTable =
            [(t(0, 0, 0), dist(&[1.0, 2.0])), (t(1, 0, 1), dist(&[0.5, 0.25]))].into_iter().collect();
        let problem = AssignmentProblem::new(dists).unwrap();
        let text = problem.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["efficiencies"][1]["k"], 1);
        assert_eq!(AssignmentProblem::from_json(&text).unwrap(), problem);
        let bad = r#"{"vehicles":[0],"demands":[0],"efficiencies":[{"i":3,"j":0,"k":0,"samples":[1.0]}]}"#;
        assert!(AssignmentProblem::from_json(bad).is_err());
    }

    #[test]
    fn result_json_field_names() {
        let r = RiskAwareAssignment { triples: vec![t(2, 1, 0)], tau_star: 0.5, h_hat: 0.4, alpha: 0.1 };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["triples"][0]["i"], 2);
        assert_eq!(v["H_hat"], 0.4);
        assert_eq!(v["tau_star"], 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(CVaRConfig::new(0.0, 0.1).validate().is_err());
        assert!(CVaRConfig::new(0.5, 0.0).validate().is_err());
        assert!(CVaRConfig { gamma: Some(1.0), ..CVaRConfig::new(0.5, 2.0) }.validate().is_err());
        assert!(CVaRConfig { oracle_samples: 0, ..CVaRConfig::new(0.5, 0.1) }.validate().is_err());
    }

    proptest! {
        #[test]
        fn cvar_matches_oracle_and_is_monotone(samples in proptest::collection::vec(0.0f64..10.0, 1..40)) {
            let d = dist(&samples);
            let mut last = f64::NEG_INFINITY;
            for alpha in [0.01, 0.1, 0.25, 0.5, 0.75, 1.0] {
                let c = cvar(&d, alpha).unwrap();
                prop_assert!((c - cvar_oracle(&samples, alpha)).abs() < 1e-12);
                prop_assert!(c >= last);
                last = c;
            }
            prop_assert!((cvar(&d, 1.0).unwrap() - d.mean()).abs() < 1e-12);
            prop_assert_eq!(cvar(&d, 1.0 / samples.len() as f64).unwrap(), d.min());
        }

        #[test]
        fn grid_max_of_h_approaches_cvar(samples in proptest::collection::vec(0.0f64..5.0, 5..30), alpha in 0.05f64..=1.0) {
            let dists: EfficiencyTable = [(t(0, 0, 0), dist(&samples))].into_iter().collect();
            let s = AssignmentSet::from_triples([t(0, 0, 0)]).unwrap();
            let draws = OracleDraws::exhaustive(samples.len());
            let delta = 0.01;
            let best = tau_grid(5.0, delta)
                .into_iter()
                .map(|tau| estimate_h_with(&s, tau, alpha, &draws, &dists).unwrap())
                .fold(f64::MIN, f64::max);
            // Exact maximum over τ is the interpolated CVaR; the order-statistic
            // CVaR differs from it by at most the spread of one sample's weight.
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len() as f64;
            let k = (alpha * n).floor() as usize;
            let exact = if k >= sorted.len() {
                sorted.iter().sum::<f64>() / n
            } else {
                (sorted[..k].iter().sum::<f64>() + (alpha * n - k as f64) * sorted[k]) / (alpha * n)
            };
            prop_assert!(best <= exact + 1e-9);
            prop_assert!(best >= exact - delta / alpha - 1e-9);
        }

        #[test]
        fn solver_respects_matroid(seed in any::<u64>(), nv in 1usize..=4, nd in 1usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut dists = EfficiencyTable::new();
            for i in 0..nv {
                for j in 0..nd {
                    for k in 0..2 {
                        let s: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..2.0)).collect();
                        dists.insert(t(i, j, k), dist(&s));
                    }
                }
            }
            let problem = AssignmentProblem::new(dists).unwrap();
            let cfg = CVaRConfig { oracle_samples: 100, rng_seed: seed, ..CVaRConfig::new(0.3, 0.2) };
            let out = assign_risk_aware(&problem, &cfg).unwrap();
            let vehicles: BTreeSet<usize> = out.triples.iter().map(|t| t.vehicle).collect();
            prop_assert_eq!(vehicles.len(), out.triples.len());
            prop_assert!(out.triples.len() <= nd.min(nv));
            prop_assert!(out.h_hat >= 0.0);
        }
    }
}
