//! Synthetic generator over the reference schema.
//!
//! CPT rows are softmax(ln marginal + Σ parent effects). Generic effects are
//! drawn once from a fixed stream and centred under the parent's marginal so
//! node marginals stay close to the published class percentages. CRC carries
//! hand-set effects, dominated by age. Sleep duration is only weakly tied to
//! its parents (sex, age) and its children, so its association with CRC stays
//! small.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::inference::forward_sample;
use crate::io::published_marginals;
use crate::model::reference::*;
use crate::model::{BayesianNetwork, ConfigIndexer, Cpt};

const EFFECT_STREAM: u64 = 0x5eed_2012;
/// Scale of generic parent effects on the logit of each child state.
const EFFECT_SCALE: f64 = 0.35;
/// Scale for every effect into or out of sleep duration.
const SD_EFFECT_SCALE: f64 = 0.05;

/// Additive log-odds for CRC = yes, by parent state (schema order).
fn crc_effect(parent: &str, state: usize) -> f64 {
    match parent {
        AGE => [-1.3, -0.45, 0.35, 1.1][state],
        SEX => [-0.15, 0.15][state],
        SMOKING => [0.0, 0.15, 0.35][state],
        ALCOHOL => [0.0, 0.35][state],
        DIABETES | HYPERTENSION => [0.0, 0.25][state],
        HYPERCHOLESTEROLEMIA => [0.0, 0.1][state],
        _ => 0.0,
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// The demo generator: reference structure, published class marginals.
pub fn demo_network() -> BayesianNetwork {
    let (schema, dag) = reference_crc_network();
    let marg = published_marginals()
        .for_schema(&schema)
        .expect("fixture covers the reference schema");
    let mut rng = ChaCha8Rng::seed_from_u64(EFFECT_STREAM);
    let crc = schema.index_of(CRC).unwrap();
    let sd = schema.index_of(SD).unwrap();

    let cpts = (0..schema.len())
        .map(|node| {
            let parents: Vec<usize> = dag.parents(node).to_vec();
            let k = schema.cardinality(node);
            let base: Vec<f64> = marg[node].iter().map(|p| p.max(1e-6).ln()).collect();
            // effects[i][parent state][child state]
            let effects: Vec<Vec<Vec<f64>>> = parents
                .iter()
                .map(|&p| {
                    let kp = schema.cardinality(p);
                    if node == crc {
                        let name = schema.name(p);
                        return (0..kp)
                            .map(|s| {
                                let e = crc_effect(name, s);
                                vec![0.0, e]
                            })
                            .collect();
                    }
                    let scale = if p == sd || node == sd { SD_EFFECT_SCALE } else { EFFECT_SCALE };
                    let mut w: Vec<Vec<f64>> = (0..kp)
                        .map(|_| (0..k).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect())
                        .collect();
                    for c in 0..k {
                        let mean: f64 = (0..kp).map(|s| marg[p][s] * w[s][c]).sum();
                        for row in w.iter_mut() {
                            row[c] -= mean;
                        }
                    }
                    w
                })
                .collect();
            let ix = ConfigIndexer::new(parents.iter().map(|&p| schema.cardinality(p)).collect());
            let mut rows = Vec::with_capacity(ix.size());
            for cfg in 0..ix.size() {
                let states = ix.decode(cfg);
                let mut logits = base.clone();
                for (i, &s) in states.iter().enumerate() {
                    for (l, e) in logits.iter_mut().zip(&effects[i][s]) {
                        *l += e;
                    }
                }
                rows.push(softmax(&logits));
            }
            Cpt::new(&schema, node, parents, rows).expect("softmax rows are distributions")
        })
        .collect();
    BayesianNetwork::new(schema, dag, cpts).expect("demo CPTs match the structure")
}

/// `n` rows per year for each year in `years`; rows of year i use `seed + i`.
pub fn demo_dataset(n_per_year: usize, years: &[i32], seed: u64) -> Result<Dataset> {
    let net = demo_network();
    let mut out = Dataset::new(format!("demo-seed-{seed}"), net.schema().clone());
    for (i, &y) in years.iter().enumerate() {
        out.extend_from(&forward_sample(&net, n_per_year, seed.wrapping_add(i as u64)).with_year(y))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::query;
    use crate::model::Evidence;

    #[test]
    fn marginals_stay_near_published_values() {
        let net = demo_network();
        let marg = published_marginals();
        for v in 0..net.schema().len() {
            let name = net.schema().name(v);
            let q = query(&net, &Evidence::new(), v).unwrap();
            let target = marg.get(name).unwrap();
            for (p, t) in q.distribution.iter().zip(target) {
                assert!((p - t).abs() < 0.03, "{name}: {:?} vs {target:?}", q.distribution);
            }
        }
    }

    #[test]
    fn crc_rises_with_age() {
        let net = demo_network();
        let s = net.schema();
        let (crc, yes) = s.resolve(CRC, "yes").unwrap();
        let age = s.index_of(AGE).unwrap();
        let risks: Vec<f64> = (0..4)
            .map(|a| query(&net, &Evidence::new().with(age, a), crc).unwrap().distribution[yes])
            .collect();
        assert!(risks.windows(2).all(|w| w[0] < w[1]), "{risks:?}");
    }
}
