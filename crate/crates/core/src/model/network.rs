//! Conditional probability tables and the product-of-conditionals joint.

use super::dag::Dag;
use super::schema::{Assignment, ConfigIndexer, Evidence, NetworkSchema};
use crate::error::{Error, Result};

const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// `p(node | parents)`: one probability row per parent configuration, rows
/// in lexicographic order over the (sorted) parent state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    node: usize,
    parents: Vec<usize>,
    card: usize,
    configs: ConfigIndexer,
    table: Vec<f64>,
}

impl Cpt {
    /// `rows` holds one distribution per parent configuration.
    pub fn new(
        schema: &NetworkSchema,
        node: usize,
        parents: Vec<usize>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let card = schema.cardinality(node);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != card) {
            return Err(Error::contract(format!(
                "CPT for `{}` has a row whose length is not {card}",
                schema.name(node)
            )));
        }
        Self::from_flat(schema, node, parents, flat)
    }

    /// Flat row-major table (configuration-major, state-minor).
    pub fn from_flat(
        schema: &NetworkSchema,
        node: usize,
        parents: Vec<usize>,
        table: Vec<f64>,
    ) -> Result<Self> {
        if node >= schema.len() || parents.iter().any(|&p| p >= schema.len()) {
            return Err(Error::contract("CPT references a variable outside the schema"));
        }
        if !parents.windows(2).all(|w| w[0] < w[1]) || parents.contains(&node) {
            return Err(Error::contract(format!(
                "CPT parents of `{}` must be sorted, unique and exclude the node",
                schema.name(node)
            )));
        }
        let card = schema.cardinality(node);
        let configs = ConfigIndexer::new(parents.iter().map(|&p| schema.cardinality(p)).collect());
        if table.len() != configs.size() * card {
            return Err(Error::contract(format!(
                "CPT for `{}` needs {} rows of {card}, got {} entries",
                schema.name(node),
                configs.size(),
                table.len()
            )));
        }
        for (u, row) in table.chunks(card).enumerate() {
            if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                return Err(Error::contract(format!(
                    "CPT for `{}` row {u} has a negative or non-finite entry",
                    schema.name(node)
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::contract(format!(
                    "CPT for `{}` row {u} sums to {s}",
                    schema.name(node)
                )));
            }
        }
        Ok(Self {
            node,
            parents,
            card,
            configs,
            table,
        })
    }

    /// Uniform rows.
    pub fn uniform(schema: &NetworkSchema, node: usize, parents: Vec<usize>) -> Result<Self> {
        let card = schema.cardinality(node);
        let n_cfg: usize = parents.iter().map(|&p| schema.cardinality(p)).product();
        Self::from_flat(schema, node, parents, vec![1.0 / card as f64; n_cfg * card])
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn cardinality(&self) -> usize {
        self.card
    }

    pub fn configs(&self) -> &ConfigIndexer {
        &self.configs
    }

    pub fn n_configs(&self) -> usize {
        self.configs.size()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.table[config * self.card..(config + 1) * self.card]
    }

    /// Configuration index of the parents under a full state vector.
    pub fn config_of(&self, states: &[usize]) -> usize {
        self.configs.index(self.parents.iter().map(|&p| states[p]))
    }

    pub fn prob(&self, states: &[usize]) -> f64 {
        self.table[self.config_of(states) * self.card + states[self.node]]
    }
}

/// A DAG plus one CPT per node.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    schema: NetworkSchema,
    dag: Dag,
    cpts: Vec<Cpt>,
}

impl BayesianNetwork {
    pub fn new(schema: NetworkSchema, dag: Dag, mut cpts: Vec<Cpt>) -> Result<Self> {
        if dag.len() != schema.len() {
            return Err(Error::contract(format!(
                "DAG has {} nodes, schema has {} variables",
                dag.len(),
                schema.len()
            )));
        }
        if cpts.len() != schema.len() {
            return Err(Error::contract(format!(
                "expected {} CPTs, got {}",
                schema.len(),
                cpts.len()
            )));
        }
        cpts.sort_by_key(Cpt::node);
        for (i, cpt) in cpts.iter().enumerate() {
            if cpt.node != i {
                return Err(Error::contract(format!(
                    "missing or duplicate CPT for `{}`",
                    schema.name(i)
                )));
            }
            if cpt.parents != dag.parents(i) {
                return Err(Error::contract(format!(
                    "CPT parents of `{}` differ from the DAG",
                    schema.name(i)
                )));
            }
            if cpt.card != schema.cardinality(i) {
                return Err(Error::contract(format!(
                    "CPT cardinality of `{}` differs from the schema",
                    schema.name(i)
                )));
            }
        }
        Ok(Self { schema, dag, cpts })
    }

    /// Every CPT row uniform.
    pub fn uniform(schema: NetworkSchema, dag: Dag) -> Result<Self> {
        let cpts = (0..schema.len())
            .map(|v| Cpt::uniform(&schema, v, dag.parents(v).to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(schema, dag, cpts)
    }

    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    /// Product over nodes of `p(node | parents)`, accumulated in log space.
    pub fn joint_probability(&self, a: &Assignment) -> f64 {
        self.joint_probability_states(a.states())
    }

    /// Same as [`joint_probability`](Self::joint_probability) for evidence
    /// that must cover every variable.
    pub fn joint_probability_of(&self, ev: &Evidence) -> Result<f64> {
        let a = ev.to_assignment(&self.schema)?;
        Ok(self.joint_probability(&a))
    }

    /// Unchecked fast path over a full state vector in schema order.
    pub fn joint_probability_states(&self, states: &[usize]) -> f64 {
        let mut log_p = 0.0;
        for cpt in &self.cpts {
            let p = cpt.prob(states);
            if p == 0.0 {
                return 0.0;
            }
            log_p += p.ln();
        }
        log_p.exp()
    }
}
