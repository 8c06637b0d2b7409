//! Randomized-evidence influence ranking.
//!
//! For each positive row the row's findings are entered one variable at a
//! time in a shuffled order, and the step from `ev_{j−1}` to `ev_j` is scored
//! as
//!
//! ```text
//! RRV = 100 · (ln p(t | ev_j) − ln p(t | ev_{j−1})) / |ln p(t | ev_{j−1})|
//! ```
//!
//! The absolute value in the denominator keeps the sign equal to the
//! direction of the risk change (`ln p < 0`, so dividing by it would flip it).

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, KahanSum, ANALYTICS_FORMAT_VERSION};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::query;
use crate::model::{BayesianNetwork, Evidence};
use crate::params::ParameterPosterior;

/// `|ln p|` below this counts as a vanishing denominator.
const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateInfluence {
    pub state: String,
    pub mean: f64,
    pub std_dev: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableInfluence {
    pub variable: String,
    /// Mean signed RRV (percent): per-iteration row averages, then averaged
    /// over iterations.
    pub mean: f64,
    /// Same aggregation over `|RRV|`.
    pub mean_abs: f64,
    /// Standard deviation over every recorded RRV of this variable.
    pub std_dev: f64,
    /// `std_dev / √count`.
    pub std_error: f64,
    pub count: u64,
    pub per_state: Vec<StateInfluence>,
}

/// Terms left out of the averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipTally {
    /// `p(t | ev_{j−1}) ≈ 1`, so the denominator vanishes.
    pub unit_probability: u64,
    /// `p(t | ·) = 0` on either side of the step.
    pub zero_probability: u64,
    /// The row's partial evidence has probability 0.
    pub impossible_evidence: u64,
}

impl SkipTally {
    pub fn total(&self) -> u64 {
        self.unit_probability + self.zero_probability + self.impossible_evidence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub format_version: String,
    pub target: String,
    pub target_state: String,
    pub iterations: usize,
    pub seed: u64,
    pub n_rows: usize,
    /// One entry per evidence variable, in schema order.
    pub variables: Vec<VariableInfluence>,
    pub skipped: SkipTally,
}

impl InfluenceReport {
    /// Variable names sorted by decreasing signed mean.
    pub fn ranking(&self) -> Vec<&str> {
        let mut v: Vec<&VariableInfluence> = self.variables.iter().collect();
        v.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.variable.cmp(&b.variable)));
        v.into_iter().map(|x| x.variable.as_str()).collect()
    }

    pub fn variable(&self, name: &str) -> Option<&VariableInfluence> {
        self.variables.iter().find(|v| v.variable == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub variable: usize,
    pub state: usize,
    /// `p(t | ev_j)`, `None` when the evidence became impossible.
    pub probability: Option<f64>,
    pub rrv: Option<f64>,
}

enum Step {
    Term(f64),
    Unit,
    Zero,
    Impossible,
}

fn rrv(prev: f64, next: f64) -> Step {
    if prev <= 0.0 || next <= 0.0 {
        return Step::Zero;
    }
    let lp = prev.ln();
    if lp.abs() < LOG_EPS {
        return Step::Unit;
    }
    Step::Term(100.0 * (next.ln() - lp) / lp.abs())
}

type Cache = HashMap<Vec<(usize, usize)>, Option<f64>>;

fn target_prob(
    net: &BayesianNetwork,
    ev: &Evidence,
    target: usize,
    state: usize,
    cache: &mut Cache,
) -> Option<f64> {
    let key: Vec<(usize, usize)> = ev.iter().collect();
    if let Some(p) = cache.get(&key) {
        return *p;
    }
    let p = query(net, ev, target).ok().map(|r| r.distribution[state]);
    cache.insert(key, p);
    p
}

fn walk_order(
    net: &BayesianNetwork,
    row: &[usize],
    order: &[usize],
    target: usize,
    state: usize,
    cache: &mut Cache,
) -> Vec<(usize, Step)> {
    let mut ev = Evidence::new();
    let mut prev = target_prob(net, &ev, target, state, cache);
    let mut out = Vec::with_capacity(order.len());
    for &v in order {
        ev.set(v, row[v]);
        let next = target_prob(net, &ev, target, state, cache);
        let step = match (prev, next) {
            (Some(a), Some(b)) => rrv(a, b),
            _ => Step::Impossible,
        };
        out.push((v, step));
        prev = next;
    }
    out
}

/// The per-step walk for one row and one explicit evidence order.
pub fn influence_trace(
    net: &BayesianNetwork,
    row: &[usize],
    order: &[usize],
    target: usize,
    target_state: usize,
) -> Result<Vec<TraceStep>> {
    let schema = net.schema();
    if row.len() != schema.len() {
        return Err(Error::contract("row length does not match the schema"));
    }
    if order.contains(&target) || order.iter().any(|&v| v >= schema.len()) {
        return Err(Error::contract("evidence order must name non-target variables"));
    }
    let mut cache = Cache::new();
    let mut ev = Evidence::new();
    let mut steps = Vec::new();
    for (v, step) in walk_order(net, row, order, target, target_state, &mut cache) {
        ev.set(v, row[v]);
        steps.push(TraceStep {
            variable: v,
            state: row[v],
            probability: target_prob(net, &ev, target, target_state, &mut cache),
            rrv: match step {
                Step::Term(x) => Some(x),
                _ => None,
            },
        });
    }
    Ok(steps)
}

#[derive(Default, Clone)]
struct Moments {
    sum: KahanSum,
    sum_sq: KahanSum,
    count: u64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum.value() / self.count as f64
        }
    }

    /// Sample standard deviation (n − 1).
    fn std_dev(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.mean();
        ((self.sum_sq.value() - n * m * m) / (n - 1.0)).max(0.0).sqrt()
    }
}

pub fn influential_findings(
    post: &ParameterPosterior,
    positives: &Dataset,
    target: usize,
    target_state: usize,
    iterations: usize,
    seed: u64,
) -> Result<InfluenceReport> {
    let schema = post.schema();
    if positives.schema() != schema {
        return Err(Error::SchemaMismatch("positives do not use the model's schema".into()));
    }
    if target >= schema.len() || target_state >= schema.cardinality(target) {
        return Err(Error::contract("influence target is out of range"));
    }
    if iterations == 0 {
        return Err(Error::contract("iterations must be at least 1"));
    }
    let rows: Vec<Vec<usize>> = (0..positives.n_rows())
        .map(|r| {
            positives.complete_row(r).ok_or_else(|| Error::IncompleteData {
                node: schema.name(target).to_owned(),
                column: (0..schema.len())
                    .find(|&v| positives.get(r, v).is_none())
                    .map(|v| schema.name(v).to_owned())
                    .unwrap_or_default(),
            })
        })
        .collect::<Result<_>>()?;

    let net = post.posterior_mean_network();
    let evidence_vars: Vec<usize> = (0..schema.len()).filter(|&v| v != target).collect();
    let n_rows = rows.len();

    // each row owns a cache; its walks are independent of every other row
    let per_row: Vec<Vec<Vec<(usize, Step)>>> = rows
        .par_iter()
        .enumerate()
        .map(|(r, row)| {
            let mut cache = Cache::new();
            (0..iterations)
                .map(|it| {
                    let unit = (it * n_rows + r) as u64;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, unit));
                    let mut order = evidence_vars.clone();
                    order.shuffle(&mut rng);
                    walk_order(&net, row, &order, target, target_state, &mut cache)
                })
                .collect()
        })
        .collect();

    let n = schema.len();
    let mut pooled = vec![Moments::default(); n];
    let mut pooled_abs = vec![Moments::default(); n];
    let mut per_state: Vec<Vec<Moments>> = (0..n)
        .map(|v| vec![Moments::default(); schema.cardinality(v)])
        .collect();
    let mut iter_means = vec![KahanSum::default(); n];
    let mut iter_abs_means = vec![KahanSum::default(); n];
    let mut iter_hits = vec![0u64; n];
    let mut skipped = SkipTally::default();

    for it in 0..iterations {
        let mut this = vec![Moments::default(); n];
        let mut this_abs = vec![Moments::default(); n];
        for (r, walks) in per_row.iter().enumerate() {
            for (v, step) in &walks[it] {
                match step {
                    Step::Term(x) => {
                        this[*v].push(*x);
                        this_abs[*v].push(x.abs());
                        pooled[*v].push(*x);
                        pooled_abs[*v].push(x.abs());
                        per_state[*v][rows[r][*v]].push(*x);
                    }
                    Step::Unit => skipped.unit_probability += 1,
                    Step::Zero => skipped.zero_probability += 1,
                    Step::Impossible => skipped.impossible_evidence += 1,
                }
            }
        }
        for v in 0..n {
            if this[v].count > 0 {
                iter_means[v].add(this[v].mean());
                iter_abs_means[v].add(this_abs[v].mean());
                iter_hits[v] += 1;
            }
        }
    }

    let variables = evidence_vars
        .iter()
        .map(|&v| {
            let hits = iter_hits[v].max(1) as f64;
            let sd = pooled[v].std_dev();
            let count = pooled[v].count;
            VariableInfluence {
                variable: schema.name(v).to_owned(),
                mean: iter_means[v].value() / hits,
                mean_abs: iter_abs_means[v].value() / hits,
                std_dev: sd,
                std_error: if count > 0 { sd / (count as f64).sqrt() } else { 0.0 },
                count,
                per_state: per_state[v]
                    .iter()
                    .enumerate()
                    .map(|(s, m)| StateInfluence {
                        state: schema.variable(v).states()[s].clone(),
                        mean: m.mean(),
                        std_dev: m.std_dev(),
                        count: m.count,
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(InfluenceReport {
        format_version: ANALYTICS_FORMAT_VERSION.to_owned(),
        target: schema.name(target).to_owned(),
        target_state: schema.variable(target).states()[target_state].clone(),
        iterations,
        seed,
        n_rows,
        variables,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rrv_sign_follows_risk_direction() {
        match rrv(0.1, 0.2) {
            Step::Term(x) => assert!((x - 100.0 * 2f64.ln() / 0.1f64.ln().abs()).abs() < 1e-12 && x > 0.0),
            _ => panic!(),
        }
        assert!(matches!(rrv(0.2, 0.1), Step::Term(x) if x < 0.0));
        assert!(matches!(rrv(1.0, 0.5), Step::Unit));
        assert!(matches!(rrv(0.0, 0.5), Step::Zero));
        assert!(matches!(rrv(0.3, 0.0), Step::Zero));
    }

    #[test]
    fn moments() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.std_dev() - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
