//! Request and response documents shared by the CLI and the HTTP service.
//! Variables and states travel by name; both front ends run the same
//! conversions so identical requests give identical JSON.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{influential_findings, risk_map, InfluenceReport, RiskMap, RiskMapSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{forward_sample_with, query};
use crate::io::model_checksum;
use crate::model::{BayesianNetwork, Evidence, NamedDag, NetworkSchema};
use crate::params::ParameterPosterior;

pub const API_FORMAT_VERSION: &str = "1.0";

/// Seed used when a request leaves it out; echoed back in the response.
pub const DEFAULT_SEED: u64 = 0;

/// Forward draws allowed per requested synthetic positive.
pub const MAX_DRAWS_PER_POSITIVE: usize = 1_000_000;

/// `{name: label}` to evidence; labels may use the reference aliases.
pub fn evidence_from_labels(schema: &NetworkSchema, labels: &BTreeMap<String, String>) -> Result<Evidence> {
    let mut ev = Evidence::new();
    for (name, label) in labels {
        let (v, s) = Evidence::parse_pair(schema, &format!("{name}={label}"))?;
        ev.set(v, s);
    }
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRequest {
    pub target: String,
    #[serde(default)]
    pub evidence: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub format_version: String,
    pub target: String,
    /// Evidence as applied, with labels in canonical form.
    pub evidence: BTreeMap<String, String>,
    pub states: Vec<String>,
    pub distribution: Vec<f64>,
    pub evidence_probability: f64,
}

impl QueryRequest {
    pub fn run(&self, net: &BayesianNetwork) -> Result<QueryResponse> {
        let schema = net.schema();
        let target = schema.require(&self.target)?;
        let ev = evidence_from_labels(schema, &self.evidence)?;
        let r = query(net, &ev, target)?;
        Ok(QueryResponse {
            format_version: API_FORMAT_VERSION.into(),
            target: self.target.clone(),
            evidence: ev.to_labels(schema),
            states: schema.variable(target).states().to_vec(),
            distribution: r.distribution,
            evidence_probability: r.evidence_probability,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskMapRequest {
    pub target: String,
    pub target_state: String,
    #[serde(default)]
    pub condition: BTreeMap<String, String>,
    pub axes: Vec<String>,
    #[serde(default)]
    pub n_param_samples: Option<usize>,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RiskMapRequest {
    pub fn to_spec(&self, schema: &NetworkSchema) -> Result<RiskMapSpec> {
        let (t, ts) = Evidence::parse_pair(schema, &format!("{}={}", self.target, self.target_state))?;
        let cond = evidence_from_labels(schema, &self.condition)?;
        let axes = self
            .axes
            .iter()
            .map(|a| schema.require(a))
            .collect::<Result<Vec<_>>>()?;
        let mut spec = RiskMapSpec::new(t, ts, cond, axes, self.seed.unwrap_or(DEFAULT_SEED));
        if let Some(n) = self.n_param_samples {
            spec.n_param_samples = n;
        }
        if let Some(l) = self.level {
            spec.level = l;
        }
        spec.validate(schema)?;
        Ok(spec)
    }

    pub fn run(&self, post: &ParameterPosterior) -> Result<RiskMap> {
        risk_map(post, &self.to_spec(post.schema())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceRequest {
    pub target: String,
    pub target_state: String,
    pub iterations: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Explicit positive rows, each a complete `{name: label}` map.
    #[serde(default)]
    pub rows: Option<Vec<BTreeMap<String, String>>>,
    /// Otherwise draw this many positives from the posterior-mean network.
    #[serde(default)]
    pub synthetic_positives: Option<usize>,
}

impl InfluenceRequest {
    /// Row count × iterations, the unit of influence work.
    pub fn workload(&self) -> usize {
        let rows = self
            .rows
            .as_ref()
            .map_or(self.synthetic_positives.unwrap_or(0), Vec::len);
        rows.saturating_mul(self.iterations)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn run(&self, post: &ParameterPosterior) -> Result<InfluenceReport> {
        let schema = post.schema();
        let (t, ts) = Evidence::parse_pair(schema, &format!("{}={}", self.target, self.target_state))?;
        let positives = match (&self.rows, self.synthetic_positives) {
            (Some(rows), None) => {
                let mut d = Dataset::new("request-rows", schema.clone());
                for r in rows {
                    let ev = evidence_from_labels(schema, r)?;
                    let a = ev.to_assignment(schema)?;
                    d.push_complete(a.states(), 0)?;
                }
                d
            }
            (None, Some(n)) => synthetic_positives(&post.posterior_mean_network(), t, ts, n, self.seed())?,
            _ => {
                return Err(Error::Contract(
                    "give exactly one of `rows` or `synthetic_positives`".into(),
                ))
            }
        };
        influential_findings(post, &positives, t, ts, self.iterations, self.seed())
    }
}

/// Rejection-samples `n` rows with `target = state` from `net`.
pub fn synthetic_positives(net: &BayesianNetwork, target: usize, state: usize, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Dataset::new(format!("positives-seed-{seed}"), net.schema().clone());
    let budget = n.saturating_mul(MAX_DRAWS_PER_POSITIVE);
    let mut drawn = 0usize;
    const BATCH: usize = 4096;
    while out.n_rows() < n {
        if drawn >= budget {
            return Err(Error::Contract(format!(
                "found {} of {n} positives in {drawn} draws; the target state is too rare",
                out.n_rows()
            )));
        }
        let batch = forward_sample_with(net, BATCH, &mut rng);
        drawn += BATCH;
        for r in 0..batch.n_rows() {
            if out.n_rows() < n && batch.get(r, target) == Some(state) {
                out.push_row(&batch.row(r), 0)?;
            }
        }
    }
    Ok(out)
}

/// What `GET /model` returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub format_version: String,
    /// Checksum of the model document, stable for a given posterior.
    pub model_id: String,
    pub schema: NetworkSchema,
    pub dag: NamedDag,
    pub alpha: f64,
    pub provenance: Vec<String>,
    pub total_count: u64,
}

impl ModelSummary {
    pub fn of(post: &ParameterPosterior) -> Result<Self> {
        Ok(Self {
            format_version: API_FORMAT_VERSION.into(),
            model_id: model_checksum(post)?,
            schema: post.schema().clone(),
            dag: post.dag().to_named(post.schema()),
            alpha: post.alpha(),
            provenance: post.provenance().to_vec(),
            total_count: post.total_count(),
        })
    }
}
