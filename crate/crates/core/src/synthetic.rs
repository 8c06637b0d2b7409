//! Small generator networks with known structure and parameters, used by the
//! test suites and the `generate` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{BayesianNetwork, ConfigIndexer, Cpt, Dag, NetworkSchema, Variable};
use crate::params::sample_dirichlet;

fn binary(name: &str) -> Variable {
    Variable::new(name, ["0", "1"]).expect("two states")
}

fn build(schema: NetworkSchema, dag: Dag, rows: Vec<Vec<Vec<f64>>>) -> Result<BayesianNetwork> {
    let cpts = rows
        .into_iter()
        .enumerate()
        .map(|(v, r)| Cpt::new(&schema, v, dag.parents(v).to_vec(), r))
        .collect::<Result<Vec<_>>>()?;
    BayesianNetwork::new(schema, dag, cpts)
}

/// `A → B`, `p(A=1) = 0.3`, `p(B=1 | A) = (0.2, 0.6)`.
pub fn two_node_network() -> BayesianNetwork {
    let schema = NetworkSchema::new(vec![binary("A"), binary("B")]).unwrap();
    let dag = Dag::from_arcs(2, [(0, 1)]).unwrap();
    build(
        schema,
        dag,
        vec![vec![vec![0.7, 0.3]], vec![vec![0.8, 0.2], vec![0.4, 0.6]]],
    )
    .unwrap()
}

/// Binary chain `X0 → X1 → …` where each child copies its parent with
/// probability `p_same`; the root is uniform.
pub fn chain_network(n: usize, p_same: f64) -> BayesianNetwork {
    let schema = NetworkSchema::new((0..n).map(|i| binary(&format!("X{i}"))).collect()).unwrap();
    let arcs: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    let dag = Dag::from_arcs(n, arcs).unwrap();
    let rows = (0..n)
        .map(|i| {
            if i == 0 {
                vec![vec![0.5, 0.5]]
            } else {
                vec![vec![p_same, 1.0 - p_same], vec![1.0 - p_same, p_same]]
            }
        })
        .collect();
    build(schema, dag, rows).unwrap()
}

/// Mutually independent uniform variables, `cards[i]` states each.
pub fn independent_network(cards: &[usize]) -> BayesianNetwork {
    let schema = NetworkSchema::new(
        cards
            .iter()
            .enumerate()
            .map(|(i, &k)| Variable::new(format!("X{i}"), (0..k).map(|s| s.to_string())).unwrap())
            .collect(),
    )
    .unwrap();
    let dag = Dag::empty(cards.len());
    let rows = cards
        .iter()
        .map(|&k| vec![vec![1.0 / k as f64; k]])
        .collect();
    build(schema, dag, rows).unwrap()
}

/// Random DAG over `n` nodes with 2..=`max_states` states each, at most
/// `max_parents` parents, and CPT rows drawn from a flat Dirichlet.
pub fn random_network<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    max_states: usize,
    max_parents: usize,
) -> BayesianNetwork {
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=max_states.max(2))).collect();
    let schema = NetworkSchema::new(
        cards
            .iter()
            .enumerate()
            .map(|(i, &k)| Variable::new(format!("X{i}"), (0..k).map(|s| format!("s{s}"))).unwrap())
            .collect(),
    )
    .unwrap();
    // arcs follow a random permutation so any topological order can occur
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut dag = Dag::empty(n);
    for j in 1..n {
        for i in 0..j {
            if dag.parents(perm[j]).len() < max_parents && rng.random_bool(0.5) {
                dag.add_arc(perm[i], perm[j]).expect("arcs respect the permutation");
            }
        }
    }
    let rows = (0..n)
        .map(|v| {
            let q = ConfigIndexer::new(dag.parents(v).iter().map(|&p| cards[p]).collect()).size();
            (0..q)
                .map(|_| sample_dirichlet(&vec![1.0; cards[v]], rng))
                .collect()
        })
        .collect();
    build(schema, dag, rows).unwrap()
}

pub fn random_network_seeded(seed: u64, n: usize, max_states: usize, max_parents: usize) -> BayesianNetwork {
    random_network(&mut ChaCha8Rng::seed_from_u64(seed), n, max_states, max_parents)
}

/// Variables `C, B, D, T` with `C → B`, `C → T`, `B → T` and `D` isolated.
/// `p(T=1 | B=1, C) = ratio · p(T=1 | B=0, C)` for both values of `C`.
pub fn relative_risk_network(base: f64, ratio: f64) -> BayesianNetwork {
    let schema =
        NetworkSchema::new(vec![binary("C"), binary("B"), binary("D"), binary("T")]).unwrap();
    let dag = Dag::from_arcs(4, [(0, 1), (0, 3), (1, 3)]).unwrap();
    let t = |p: f64| vec![1.0 - p, p];
    build(
        schema,
        dag,
        vec![
            vec![vec![0.6, 0.4]],
            vec![vec![0.7, 0.3], vec![0.45, 0.55]],
            vec![vec![0.5, 0.5]],
            // parents (C, B), B fastest
            vec![t(base), t(base * ratio), t(1.5 * base), t(1.5 * base * ratio)],
        ],
    )
    .unwrap()
}

/// Target `T` (binary) with a single three-state parent `P`; `n_noise`
/// further binary variables are disconnected. Variables are `P, N0.., T`.
pub fn single_parent_network(n_noise: usize) -> BayesianNetwork {
    let mut vars = vec![Variable::new("P", ["low", "mid", "high"]).unwrap()];
    vars.extend((0..n_noise).map(|i| binary(&format!("N{i}"))));
    vars.push(binary("T"));
    let schema = NetworkSchema::new(vars).unwrap();
    let t = schema.len() - 1;
    let dag = Dag::from_arcs(schema.len(), [(0, t)]).unwrap();
    let mut rows = vec![vec![vec![0.5, 0.3, 0.2]]];
    rows.extend((0..n_noise).map(|i| {
        let p = 0.2 + 0.6 * (i as f64 + 1.0) / (n_noise as f64 + 1.0);
        vec![vec![1.0 - p, p]]
    }));
    rows.push(vec![vec![0.9, 0.1], vec![0.75, 0.25], vec![0.5, 0.5]]);
    build(schema, dag, rows).unwrap()
}
