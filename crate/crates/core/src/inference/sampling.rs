use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::model::BayesianNetwork;

/// Draws `n` complete rows ancestrally. Rows are tagged with year 0; use
/// [`Dataset::with_year`] to re-tag.
pub fn forward_sample(net: &BayesianNetwork, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    forward_sample_with(net, n, &mut rng).with_id(format!("forward-sample-seed-{seed}"))
}

pub fn forward_sample_with<R: Rng + ?Sized>(net: &BayesianNetwork, n: usize, rng: &mut R) -> Dataset {
    let order = net.dag().topological_order();
    let mut data = Dataset::new("forward-sample", net.schema().clone());
    let mut states = vec![0usize; net.schema().len()];
    for _ in 0..n {
        for &v in &order {
            let cpt = net.cpt(v);
            states[v] = draw_categorical(cpt.row(cpt.config_of(&states)), rng.random::<f64>());
        }
        data.push_complete(&states, 0)
            .expect("sampled states are in range");
    }
    data
}

/// Inverse-CDF pick; `u` in [0, 1).
fn draw_categorical(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left `acc` slightly below 1
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draw_skips_zero_mass_states() {
        assert_eq!(draw_categorical(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(draw_categorical(&[0.0, 1.0, 0.0], 0.999_999), 1);
        assert_eq!(draw_categorical(&[0.5, 0.5], 0.5), 1);
        assert_eq!(draw_categorical(&[0.3, 0.7 - 1e-16], 1.0 - 1e-17), 1);
    }
}
