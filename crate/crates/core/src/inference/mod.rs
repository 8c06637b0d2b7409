//! Exact conditional queries, an enumeration oracle, ancestral sampling and
//! d-separation.
//!
//! [`query`] runs variable elimination:
//!
//! 1. nodes that are not ancestors of the target or the evidence are barren
//!    and dropped;
//! 2. CPT factors are reduced by the evidence;
//! 3. the remaining hidden variables are summed out in greedy min-fill order
//!    (ties by variable name);
//! 4. each new factor is rescaled to sum 1 and the log of the scale is
//!    accumulated, so `p(evidence)` survives long products.
//!
//! [`brute_force_query`] sums the joint over all completions and exists to
//! check the above.

mod dsep;
mod factor;
mod sampling;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use dsep::is_d_separated;
pub use factor::Factor;
pub use sampling::{forward_sample, forward_sample_with};

use crate::error::{Error, Result};
use crate::model::{BayesianNetwork, Evidence, NetworkSchema};

/// Enumeration guard for [`brute_force_query`]: 2^25 joint states.
pub const ORACLE_MAX_STATES: u128 = 1 << 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub target: usize,
    pub distribution: Vec<f64>,
    pub evidence_probability: f64,
}

/// Normalized joint distribution over several targets.
#[derive(Debug, Clone, PartialEq)]
pub struct JointQueryResult {
    /// Scope equals the requested target order.
    pub distribution: Factor,
    pub evidence_probability: f64,
}

fn check_query(schema: &NetworkSchema, evidence: &Evidence, targets: &[usize]) -> Result<()> {
    evidence.validate(schema)?;
    let mut seen = BTreeSet::new();
    for &t in targets {
        if t >= schema.len() {
            return Err(Error::contract(format!("unknown target index {t}")));
        }
        if evidence.contains(t) {
            return Err(Error::contract(format!(
                "target `{}` is also in the evidence",
                schema.name(t)
            )));
        }
        if !seen.insert(t) {
            return Err(Error::contract(format!(
                "target `{}` requested twice",
                schema.name(t)
            )));
        }
    }
    if targets.is_empty() {
        return Err(Error::contract("query needs at least one target"));
    }
    Ok(())
}

/// Exact `p(target | evidence)` by variable elimination.
pub fn query(net: &BayesianNetwork, evidence: &Evidence, target: usize) -> Result<QueryResult> {
    let joint = query_joint(net, evidence, &[target])?;
    Ok(QueryResult {
        target,
        distribution: joint.distribution.into_values(),
        evidence_probability: joint.evidence_probability,
    })
}

/// Exact joint `p(targets | evidence)` by variable elimination.
pub fn query_joint(
    net: &BayesianNetwork,
    evidence: &Evidence,
    targets: &[usize],
) -> Result<JointQueryResult> {
    let schema = net.schema();
    check_query(schema, evidence, targets)?;

    let relevant = net
        .dag()
        .ancestral_closure(targets.iter().copied().chain(evidence.vars()));

    let mut factors: Vec<Factor> = Vec::new();
    for v in (0..schema.len()).filter(|&v| relevant[v]) {
        let mut f = Factor::from_cpt(net.cpt(v), schema);
        for &u in net.cpt(v).parents().iter().chain([&v]) {
            if let Some(s) = evidence.get(u) {
                f = f.reduce(u, s);
            }
        }
        factors.push(f);
    }

    let mut hidden: Vec<usize> = (0..schema.len())
        .filter(|&v| relevant[v] && !evidence.contains(v) && !targets.contains(&v))
        .collect();

    let mut log_scale = 0.0;
    while !hidden.is_empty() {
        let pick = min_fill_pick(&factors, &hidden, schema);
        let var = hidden.swap_remove(pick);
        let (with, without): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(var));
        factors = without;
        let Some(prod) = with.into_iter().reduce(|a, b| a.product(&b)) else {
            continue;
        };
        let mut summed = prod.sum_out(var);
        let s = summed.sum();
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::ImpossibleEvidence);
        }
        summed.scale(1.0 / s);
        log_scale += s.ln();
        factors.push(summed);
    }

    let prod = factors
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(&f));
    let mut result = prod.permute(targets);
    let s = result.sum();
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::ImpossibleEvidence);
    }
    result.scale(1.0 / s);
    Ok(JointQueryResult {
        distribution: result,
        evidence_probability: (log_scale + s.ln()).exp(),
    })
}

/// Index into `hidden` of the variable whose elimination adds the fewest
/// fill edges to the interaction graph; ties go to the smaller name.
fn min_fill_pick(factors: &[Factor], hidden: &[usize], schema: &NetworkSchema) -> usize {
    let mut best: Option<(usize, &str, usize)> = None;
    for (i, &v) in hidden.iter().enumerate() {
        let mut nbrs: BTreeSet<usize> = BTreeSet::new();
        for f in factors.iter().filter(|f| f.contains(v)) {
            nbrs.extend(f.vars().iter().copied().filter(|&u| u != v));
        }
        let nbrs: Vec<usize> = nbrs.into_iter().collect();
        let mut fill = 0;
        for a in 0..nbrs.len() {
            for b in a + 1..nbrs.len() {
                let (x, y) = (nbrs[a], nbrs[b]);
                if !factors.iter().any(|f| f.contains(x) && f.contains(y)) {
                    fill += 1;
                }
            }
        }
        let name = schema.name(v);
        let better = match best {
            None => true,
            Some((bf, bn, _)) => fill < bf || (fill == bf && name < bn),
        };
        if better {
            best = Some((fill, name, i));
        }
    }
    best.map(|(_, _, i)| i).unwrap_or(0)
}

/// `p(target | evidence)` by summing the joint over every completion.
pub fn brute_force_query(
    net: &BayesianNetwork,
    evidence: &Evidence,
    target: usize,
) -> Result<QueryResult> {
    let schema = net.schema();
    check_query(schema, evidence, &[target])?;
    let states = schema.joint_size();
    if states > ORACLE_MAX_STATES {
        return Err(Error::OracleInfeasible { states });
    }
    let free: Vec<usize> = (0..schema.len()).filter(|&v| !evidence.contains(v)).collect();
    let cards = schema.cardinalities();
    let mut current = vec![0usize; schema.len()];
    for (v, s) in evidence.iter() {
        current[v] = s;
    }
    let mut mass = vec![0.0; cards[target]];
    loop {
        mass[current[target]] += net.joint_probability_states(&current);
        // odometer over the free variables
        let mut i = free.len();
        loop {
            if i == 0 {
                let total: f64 = mass.iter().sum();
                if total <= 0.0 {
                    return Err(Error::ImpossibleEvidence);
                }
                return Ok(QueryResult {
                    target,
                    distribution: mass.iter().map(|m| m / total).collect(),
                    evidence_probability: total,
                });
            }
            i -= 1;
            let v = free[i];
            current[v] += 1;
            if current[v] < cards[v] {
                break;
            }
            current[v] = 0;
        }
    }
}
