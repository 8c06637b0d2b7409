//! Dirichlet-multinomial parameter learning.
//!
//! Every CPT row `θ_{X|u}` carries a Dirichlet whose hyperparameters are
//! `α · marginal(X) + m[u, ·]`. Prior mass and counts are stored apart so
//! that absorbing datasets one at a time or all at once gives bit-identical
//! hyperparameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{BayesianNetwork, ConfigIndexer, Cpt, Dag, NetworkSchema};

/// Marginal entries are floored here before scaling so no hyperparameter is 0.
pub const MARGINAL_FLOOR: f64 = 1e-6;

/// Input marginals may be rounded (published percentages); anything summing
/// to within this of 1 is accepted and renormalized.
pub const MARGINAL_SUM_TOLERANCE: f64 = 1e-3;

/// Default equivalent sample size: rows / 10000.
pub const DEFAULT_ALPHA_DENOMINATOR: f64 = 10_000.0;

pub fn default_alpha(rows: usize) -> f64 {
    rows as f64 / DEFAULT_ALPHA_DENOMINATOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha: f64,
    /// Floored and renormalized marginal per variable, in schema order.
    pub marginal_means: Vec<Vec<f64>>,
}

impl PriorSpec {
    /// Hyperparameters shared by every parent configuration of `node`.
    pub fn hyperparameters(&self, node: usize) -> Vec<f64> {
        self.marginal_means[node]
            .iter()
            .map(|p| self.alpha * p)
            .collect()
    }
}

pub fn build_prior(schema: &NetworkSchema, marginals: &[Vec<f64>], alpha: f64) -> Result<PriorSpec> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::contract(format!("alpha must be positive, got {alpha}")));
    }
    if marginals.len() != schema.len() {
        return Err(Error::contract(format!(
            "expected {} marginal vectors, got {}",
            schema.len(),
            marginals.len()
        )));
    }
    let mut means = Vec::with_capacity(marginals.len());
    for (v, m) in marginals.iter().enumerate() {
        let name = schema.name(v);
        if m.len() != schema.cardinality(v) {
            return Err(Error::contract(format!(
                "marginal for `{name}` has {} entries, variable has {} states",
                m.len(),
                schema.cardinality(v)
            )));
        }
        if m.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::contract(format!(
                "marginal for `{name}` has a negative or non-finite entry"
            )));
        }
        let s: f64 = m.iter().sum();
        if (s - 1.0).abs() > MARGINAL_SUM_TOLERANCE {
            return Err(Error::contract(format!(
                "marginal for `{name}` sums to {s}, not 1"
            )));
        }
        let floored: Vec<f64> = m.iter().map(|p| (p / s).max(MARGINAL_FLOOR)).collect();
        let t: f64 = floored.iter().sum();
        means.push(floored.into_iter().map(|p| p / t).collect());
    }
    Ok(PriorSpec {
        alpha,
        marginal_means: means,
    })
}

/// Dirichlet state of one node's CPT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPosterior {
    pub node: usize,
    pub parents: Vec<usize>,
    pub cardinality: usize,
    /// Prior hyperparameters, configuration-major (`Q · K` entries).
    pub prior: Vec<f64>,
    /// Absorbed counts `m[u, x]`, same layout as `prior`.
    pub counts: Vec<u64>,
}

impl FamilyPosterior {
    pub fn n_configs(&self) -> usize {
        self.prior.len() / self.cardinality
    }

    pub fn hyperparameters(&self, config: usize) -> Vec<f64> {
        let k = self.cardinality;
        let r = config * k..(config + 1) * k;
        self.prior[r.clone()]
            .iter()
            .zip(&self.counts[r])
            .map(|(a, &m)| a + m as f64)
            .collect()
    }

    pub fn mean(&self, config: usize) -> Vec<f64> {
        let h = self.hyperparameters(config);
        let s: f64 = h.iter().sum();
        h.into_iter().map(|a| a / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPosterior {
    schema: NetworkSchema,
    dag: Dag,
    alpha: f64,
    families: Vec<FamilyPosterior>,
    provenance: Vec<String>,
}

impl ParameterPosterior {
    /// Posterior before any data: every row carries `prior`'s hyperparameters.
    pub fn from_prior(schema: NetworkSchema, dag: Dag, prior: &PriorSpec) -> Result<Self> {
        if dag.len() != schema.len() || prior.marginal_means.len() != schema.len() {
            return Err(Error::contract("schema, DAG and prior sizes differ"));
        }
        let families = (0..schema.len())
            .map(|v| {
                let parents = dag.parents(v).to_vec();
                let q = ConfigIndexer::new(parents.iter().map(|&p| schema.cardinality(p)).collect()).size();
                let row = prior.hyperparameters(v);
                let k = row.len();
                FamilyPosterior {
                    node: v,
                    parents,
                    cardinality: k,
                    prior: row.iter().copied().cycle().take(q * k).collect(),
                    counts: vec![0; q * k],
                }
            })
            .collect();
        Ok(Self {
            schema,
            dag,
            alpha: prior.alpha,
            families,
            provenance: Vec::new(),
        })
    }

    /// Reassembles a posterior from stored parts, checking every shape.
    pub fn from_parts(
        schema: NetworkSchema,
        dag: Dag,
        alpha: f64,
        mut families: Vec<FamilyPosterior>,
        provenance: Vec<String>,
    ) -> Result<Self> {
        if dag.len() != schema.len() || families.len() != schema.len() {
            return Err(Error::contract("schema, DAG and family counts differ"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::contract(format!("alpha must be positive, got {alpha}")));
        }
        families.sort_by_key(|f| f.node);
        for (v, f) in families.iter().enumerate() {
            let name = schema.name(v);
            if f.node != v || f.parents != dag.parents(v) {
                return Err(Error::contract(format!(
                    "family of `{name}` does not match the DAG"
                )));
            }
            let q: usize = f.parents.iter().map(|&p| schema.cardinality(p)).product();
            let k = schema.cardinality(v);
            if f.cardinality != k || f.prior.len() != q * k || f.counts.len() != q * k {
                return Err(Error::contract(format!(
                    "family of `{name}` has the wrong table shape"
                )));
            }
            if f.prior.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(Error::contract(format!(
                    "family of `{name}` has a non-positive hyperparameter"
                )));
            }
        }
        Ok(Self {
            schema,
            dag,
            alpha,
            families,
            provenance,
        })
    }

    /// Data-free posterior centred on `net`'s CPTs: every row's hyperparameters
    /// are `concentration ×` the CPT row (zeros raised to the smallest positive
    /// double so the Dirichlet stays proper).
    pub fn from_network(net: &BayesianNetwork, concentration: f64) -> Result<Self> {
        if !(concentration > 0.0 && concentration.is_finite()) {
            return Err(Error::contract(format!(
                "concentration must be positive, got {concentration}"
            )));
        }
        let families = net
            .cpts()
            .iter()
            .map(|cpt| FamilyPosterior {
                node: cpt.node(),
                parents: cpt.parents().to_vec(),
                cardinality: cpt.cardinality(),
                prior: cpt
                    .table()
                    .iter()
                    .map(|p| (p * concentration).max(f64::MIN_POSITIVE))
                    .collect(),
                counts: vec![0; cpt.table().len()],
            })
            .collect();
        Self::from_parts(
            net.schema().clone(),
            net.dag().clone(),
            concentration,
            families,
            Vec::new(),
        )
    }

    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn families(&self) -> &[FamilyPosterior] {
        &self.families
    }

    pub fn family(&self, node: usize) -> &FamilyPosterior {
        &self.families[node]
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn total_count(&self) -> u64 {
        self.families
            .first()
            .map_or(0, |f| f.counts.iter().sum())
    }

    /// Adds `data`'s counts; `self` is left untouched.
    pub fn fit(&self, data: &Dataset) -> Result<ParameterPosterior> {
        if data.schema() != &self.schema {
            return Err(Error::SchemaMismatch(format!(
                "dataset `{}` does not use the model's schema",
                data.id()
            )));
        }
        let mut out = self.clone();
        for f in &mut out.families {
            let counts = data.family_counts(f.node, &f.parents)?;
            for (acc, c) in f.counts.iter_mut().zip(counts) {
                *acc += c;
            }
        }
        out.provenance.push(data.id().to_owned());
        Ok(out)
    }

    pub fn posterior_mean_network(&self) -> BayesianNetwork {
        let cpts = self
            .families
            .iter()
            .map(|f| {
                let table = (0..f.n_configs()).flat_map(|u| f.mean(u)).collect();
                Cpt::from_flat(&self.schema, f.node, f.parents.clone(), table)
                    .expect("posterior means form valid rows")
            })
            .collect();
        BayesianNetwork::new(self.schema.clone(), self.dag.clone(), cpts)
            .expect("families match the DAG")
    }

    /// One joint draw of every CPT row.
    pub fn sample_parameters(&self, seed: u64) -> BayesianNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_parameters_with(&mut rng, None)
    }

    /// Draws the CPTs of nodes flagged in `only` (all nodes when `None`);
    /// the rest keep their posterior means.
    pub fn sample_parameters_with<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        only: Option<&[bool]>,
    ) -> BayesianNetwork {
        let cpts = self
            .families
            .iter()
            .map(|f| {
                let draw = only.is_none_or(|m| m[f.node]);
                let table = (0..f.n_configs())
                    .flat_map(|u| {
                        if draw {
                            sample_dirichlet(&f.hyperparameters(u), rng)
                        } else {
                            f.mean(u)
                        }
                    })
                    .collect();
                Cpt::from_flat(&self.schema, f.node, f.parents.clone(), table)
                    .expect("Dirichlet draws form valid rows")
            })
            .collect();
        BayesianNetwork::new(self.schema.clone(), self.dag.clone(), cpts)
            .expect("families match the DAG")
    }

    /// Equal-tailed interval per state from the Beta marginals of the row's
    /// Dirichlet.
    pub fn credible_interval(&self, node: usize, config: usize, level: f64) -> Result<Vec<(f64, f64)>> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::contract(format!("level must be in (0, 1), got {level}")));
        }
        let f = self
            .families
            .get(node)
            .ok_or_else(|| Error::contract(format!("unknown node index {node}")))?;
        if config >= f.n_configs() {
            return Err(Error::contract(format!(
                "parent configuration {config} out of range for `{}`",
                self.schema.name(node)
            )));
        }
        let h = f.hyperparameters(config);
        let total: f64 = h.iter().sum();
        let tail = (1.0 - level) / 2.0;
        Ok(h.iter()
            .map(|&a| {
                let b = total - a;
                (beta_quantile(a, b, tail), beta_quantile(a, b, 1.0 - tail))
            })
            .collect())
    }
}

/// `posterior_t = fit(posterior_{t−1}, yearly_t)`; returns one posterior per year.
pub fn sequential_fit(
    prior: &PriorSpec,
    schema: &NetworkSchema,
    dag: &Dag,
    yearly: &[Dataset],
) -> Result<Vec<ParameterPosterior>> {
    let mut current = ParameterPosterior::from_prior(schema.clone(), dag.clone(), prior)?;
    let mut out = Vec::with_capacity(yearly.len());
    for d in yearly {
        current = current.fit(d)?;
        out.push(current.clone());
    }
    Ok(out)
}

/// Dirichlet draw via normalized Gamma variates, done in log space so that
/// shapes far below 1 do not underflow to an all-zero row.
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alphas.iter().map(|&a| ln_gamma_variate(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// `ln G` with `G ~ Gamma(shape, 1)`. Small shapes use
/// `G(a) = G(a + 1) · U^{1/a}`.
fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        g.ln() + u.ln() / shape
    } else {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    }
}

/// Inverse of the regularized incomplete beta function by bisection.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
