use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, quantile_sorted, ANALYTICS_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::inference::query_joint;
use crate::model::{BayesianNetwork, ConfigIndexer, Evidence, NetworkSchema};
use crate::params::ParameterPosterior;

#[derive(Debug, Clone, PartialEq)]
pub struct RiskMapSpec {
    pub target: usize,
    pub target_state: usize,
    pub condition: Evidence,
    pub axes: Vec<usize>,
    pub n_param_samples: usize,
    pub level: f64,
    pub seed: u64,
}

impl RiskMapSpec {
    pub const DEFAULT_SAMPLES: usize = 1000;
    pub const DEFAULT_LEVEL: f64 = 0.9;

    pub fn new(target: usize, target_state: usize, condition: Evidence, axes: Vec<usize>, seed: u64) -> Self {
        Self {
            target,
            target_state,
            condition,
            axes,
            n_param_samples: Self::DEFAULT_SAMPLES,
            level: Self::DEFAULT_LEVEL,
            seed,
        }
    }

    /// Builds a spec from `name=label` strings.
    pub fn from_names(
        schema: &NetworkSchema,
        target: &str,
        condition: &[String],
        axes: &[String],
        seed: u64,
    ) -> Result<Self> {
        let (t, ts) = Evidence::parse_pair(schema, target)?;
        let mut cond = Evidence::new();
        for c in condition {
            let (v, s) = Evidence::parse_pair(schema, c)?;
            cond.set(v, s);
        }
        let axes = axes
            .iter()
            .map(|a| schema.require(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(t, ts, cond, axes, seed))
    }

    pub fn validate(&self, schema: &NetworkSchema) -> Result<()> {
        self.condition.validate(schema)?;
        if self.target >= schema.len() || self.target_state >= schema.cardinality(self.target) {
            return Err(Error::contract("risk map target is out of range"));
        }
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::contract(format!(
                "a risk map needs one or two axes, got {}",
                self.axes.len()
            )));
        }
        if self.axes.len() == 2 && self.axes[0] == self.axes[1] {
            return Err(Error::contract("risk map axes must differ"));
        }
        for &a in &self.axes {
            if a >= schema.len() {
                return Err(Error::contract(format!("unknown axis index {a}")));
            }
            if self.condition.contains(a) {
                return Err(Error::contract(format!(
                    "axis `{}` is also in the condition",
                    schema.name(a)
                )));
            }
            if a == self.target {
                return Err(Error::contract("the target cannot be an axis"));
            }
        }
        if self.condition.contains(self.target) {
            return Err(Error::contract("the target cannot be in the condition"));
        }
        if self.n_param_samples == 0 {
            return Err(Error::contract("n_param_samples must be at least 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::contract(format!("level must be in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoEvidence,
    Increase,
    Decrease,
}

impl Verdict {
    /// Interval endpoints within this of 0 count as 0: a conditionally
    /// independent axis gives `r = 0` up to rounding in every draw.
    pub const ZERO_TOLERANCE: f64 = 1e-12;

    pub fn from_interval(lower: f64, upper: f64) -> Self {
        if lower > Self::ZERO_TOLERANCE {
            Verdict::Increase
        } else if upper < -Self::ZERO_TOLERANCE {
            Verdict::Decrease
        } else {
            Verdict::NoEvidence
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCell {
    /// State label per axis.
    pub b_value: Vec<String>,
    pub b_states: Vec<usize>,
    /// `log p(t | c, b, q̂) − log p(t | c, q̂)`.
    pub r_hat: f64,
    pub lower: f64,
    pub upper: f64,
    /// Median of the Monte-Carlo draws of `r(b, q)`.
    pub mc_median: f64,
    pub verdict: Verdict,
    /// `p(b | c, q̂)`.
    pub population_share: f64,
    /// `r_hat` lies outside `[lower, upper]`; reported, not an error.
    pub r_hat_outside_interval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMap {
    pub format_version: String,
    pub target: String,
    pub target_state: String,
    pub condition: BTreeMap<String, String>,
    pub axes: Vec<String>,
    pub axis_states: Vec<Vec<String>>,
    pub level: f64,
    pub n_param_samples: usize,
    pub seed: u64,
    /// `p(t | c, q̂)`.
    pub baseline_probability: f64,
    /// Row-major over the axes, last axis fastest.
    pub cells: Vec<RiskCell>,
    /// Parameter draws dropped from a cell because `r` was not finite there.
    pub skipped_draws: u64,
}

impl RiskMap {
    pub fn shape(&self) -> Vec<usize> {
        self.axis_states.iter().map(Vec::len).collect()
    }
}

struct CellLogs {
    r: Vec<f64>,
    share: Vec<f64>,
    baseline: f64,
}

fn cell_logs(net: &BayesianNetwork, spec: &RiskMapSpec, n_cells: usize) -> Result<CellLogs> {
    let mut scope = spec.axes.clone();
    scope.push(spec.target);
    let joint = query_joint(net, &spec.condition, &scope)?;
    let k = net.schema().cardinality(spec.target);
    let vals = joint.distribution.values();
    let mut p_t = 0.0;
    let mut share = Vec::with_capacity(n_cells);
    let mut p_bt = Vec::with_capacity(n_cells);
    for b in 0..n_cells {
        let row = &vals[b * k..(b + 1) * k];
        share.push(row.iter().sum::<f64>());
        p_bt.push(row[spec.target_state]);
        p_t += row[spec.target_state];
    }
    let baseline_ln = p_t.ln();
    let r = p_bt
        .iter()
        .zip(&share)
        .map(|(&pbt, &pb)| (pbt / pb).ln() - baseline_ln)
        .collect();
    Ok(CellLogs {
        r,
        share,
        baseline: p_t,
    })
}

pub fn risk_map(post: &ParameterPosterior, spec: &RiskMapSpec) -> Result<RiskMap> {
    let schema = post.schema();
    spec.validate(schema)?;
    let dims = ConfigIndexer::new(spec.axes.iter().map(|&a| schema.cardinality(a)).collect());
    let n_cells = dims.size();

    let net = post.posterior_mean_network();
    let point = cell_logs(&net, spec, n_cells)?;
    let degenerate = || Error::DegenerateBaseline {
        target: format!(
            "{}={}",
            schema.name(spec.target),
            schema.variable(spec.target).states()[spec.target_state]
        ),
    };
    if point.baseline <= 0.0 {
        return Err(degenerate());
    }
    if point.share.iter().any(|&s| s <= 0.0) {
        return Err(Error::ImpossibleEvidence);
    }
    if point.r.iter().any(|r| !r.is_finite()) {
        // p(t | c, b) = 0 in some cell
        return Err(degenerate());
    }

    // only ancestors of the queried variables influence the answer
    let relevant = post.dag().ancestral_closure(
        spec.axes
            .iter()
            .copied()
            .chain([spec.target])
            .chain(spec.condition.vars()),
    );
    let draws: Vec<Vec<f64>> = (0..spec.n_param_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, s as u64));
            let q = post.sample_parameters_with(&mut rng, Some(&relevant));
            match cell_logs(&q, spec, n_cells) {
                Ok(c) => c.r,
                Err(_) => vec![f64::NAN; n_cells],
            }
        })
        .collect();

    let tail = (1.0 - spec.level) / 2.0;
    let mut skipped = 0u64;
    let mut cells = Vec::with_capacity(n_cells);
    for b in 0..n_cells {
        let mut xs: Vec<f64> = draws.iter().map(|d| d[b]).filter(|x| x.is_finite()).collect();
        skipped += (draws.len() - xs.len()) as u64;
        if xs.is_empty() {
            // every draw put zero mass on the target in this cell
            return Err(degenerate());
        }
        xs.sort_by(f64::total_cmp);
        let lower = quantile_sorted(&xs, tail);
        let upper = quantile_sorted(&xs, 1.0 - tail);
        let states = dims.decode(b);
        let r_hat = point.r[b];
        cells.push(RiskCell {
            b_value: spec
                .axes
                .iter()
                .zip(&states)
                .map(|(&a, &s)| schema.variable(a).states()[s].clone())
                .collect(),
            b_states: states,
            r_hat,
            lower,
            upper,
            mc_median: quantile_sorted(&xs, 0.5),
            verdict: Verdict::from_interval(lower, upper),
            population_share: point.share[b],
            r_hat_outside_interval: r_hat < lower || r_hat > upper,
        });
    }

    Ok(RiskMap {
        format_version: ANALYTICS_FORMAT_VERSION.to_owned(),
        target: schema.name(spec.target).to_owned(),
        target_state: schema.variable(spec.target).states()[spec.target_state].clone(),
        condition: spec.condition.to_labels(schema),
        axes: spec.axes.iter().map(|&a| schema.name(a).to_owned()).collect(),
        axis_states: spec
            .axes
            .iter()
            .map(|&a| schema.variable(a).states().to_vec())
            .collect(),
        level: spec.level,
        n_param_samples: spec.n_param_samples,
        seed: spec.seed,
        baseline_probability: point.baseline,
        cells,
        skipped_draws: skipped,
    })
}
