//! Score-based structure discovery.
//!
//! Family scores are Bayesian-Dirichlet log marginal likelihoods:
//!
//! ```text
//! log p(D_X | U) = Σ_u [ lnΓ(a_u) − lnΓ(a_u + N_u) + Σ_x ( lnΓ(a_ux + N_ux) − lnΓ(a_ux) ) ]
//! ```
//!
//! BDeu uses `a_ux = iss / (K·Q)` over all `Q` parent configurations. BDs
//! only spreads the imposed sample size over the `Q̃` configurations seen in
//! the data (`a_ux = iss / (K·Q̃)`); unseen configurations get no prior mass
//! and contribute nothing.
//!
//! [`hill_climb`] is greedy add / delete / reverse search that never breaks
//! arc constraints and only accepts strictly improving moves.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ArcConstraints, Dag, NetworkSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Bds,
    Bdeu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub imposed_sample_size: f64,
    pub score_kind: ScoreKind,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            imposed_sample_size: 1.0,
            score_kind: ScoreKind::Bds,
        }
    }
}

impl ScoreConfig {
    pub fn new(score_kind: ScoreKind, imposed_sample_size: f64) -> Result<Self> {
        if !(imposed_sample_size > 0.0 && imposed_sample_size.is_finite()) {
            return Err(Error::contract(format!(
                "imposed sample size must be positive, got {imposed_sample_size}"
            )));
        }
        Ok(Self {
            imposed_sample_size,
            score_kind,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Smallest (move kind, parent name, child name) wins.
    Lexicographic,
    /// Seeded shuffle among tied moves.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_iterations: usize,
    pub tie_break: TieBreak,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            tie_break: TieBreak::Lexicographic,
            seed: 0,
        }
    }
}

/// Log marginal likelihood of `node`'s column given `parents`.
pub fn family_score(
    node: usize,
    parents: &[usize],
    data: &Dataset,
    cfg: &ScoreConfig,
) -> Result<f64> {
    if parents.contains(&node) {
        return Err(Error::contract("a node cannot be its own parent"));
    }
    let schema = data.schema();
    let mut sorted = parents.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let observed = data.observed_family_counts(node, &sorted)?;
    let k = schema.cardinality(node) as f64;
    let q = match cfg.score_kind {
        ScoreKind::Bdeu => sorted
            .iter()
            .map(|&p| schema.cardinality(p) as f64)
            .product::<f64>(),
        ScoreKind::Bds => observed.len().max(1) as f64,
    };
    let a_ux = cfg.imposed_sample_size / (k * q);
    let a_u = a_ux * k;
    let lg_a_ux = ln_gamma(a_ux);
    let lg_a_u = ln_gamma(a_u);
    let mut score = 0.0;
    for (_, counts) in &observed {
        let n_u: u64 = counts.iter().sum();
        score += lg_a_u - ln_gamma(a_u + n_u as f64);
        for &c in counts {
            if c > 0 {
                score += ln_gamma(a_ux + c as f64) - lg_a_ux;
            }
        }
    }
    Ok(score)
}

/// Sum of family scores (the score decomposes over families).
pub fn network_score(dag: &Dag, data: &Dataset, cfg: &ScoreConfig) -> Result<f64> {
    check_dims(dag, data.schema())?;
    (0..dag.len())
        .map(|v| family_score(v, dag.parents(v), data, cfg))
        .sum()
}

fn check_dims(dag: &Dag, schema: &NetworkSchema) -> Result<()> {
    if dag.len() != schema.len() {
        return Err(Error::contract(format!(
            "DAG has {} nodes, data has {} variables",
            dag.len(),
            schema.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Add,
    Delete,
    Reverse,
}

/// One accepted move. `parent → child` names the arc before the move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub kind: MoveKind,
    pub parent: String,
    pub child: String,
    pub delta: f64,
    pub score_after: f64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub dag: Dag,
    pub initial_score: f64,
    pub score: f64,
    pub moves: Vec<MoveRecord>,
    /// Stopped by `max_iterations` rather than a local optimum.
    pub hit_iteration_limit: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    kind: MoveKind,
    parent: usize,
    child: usize,
    delta: f64,
}

struct ScoreCache<'a> {
    data: &'a Dataset,
    cfg: ScoreConfig,
    scores: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> ScoreCache<'a> {
    fn new(data: &'a Dataset, cfg: ScoreConfig) -> Self {
        Self {
            data,
            cfg,
            scores: HashMap::new(),
        }
    }

    /// Scores every missing family in parallel; insertion order does not
    /// affect the values, so the search stays deterministic.
    fn fill(&mut self, mut keys: Vec<(usize, Vec<usize>)>) -> Result<()> {
        keys.retain(|k| !self.scores.contains_key(k));
        keys.sort();
        keys.dedup();
        let computed: Vec<((usize, Vec<usize>), f64)> = keys
            .into_par_iter()
            .map(|(v, ps)| family_score(v, &ps, self.data, &self.cfg).map(|s| ((v, ps), s)))
            .collect::<Result<_>>()?;
        self.scores.extend(computed);
        Ok(())
    }

    fn get(&self, node: usize, parents: &[usize]) -> f64 {
        self.scores[&(node, parents.to_vec())]
    }
}

fn with_parent(parents: &[usize], p: usize) -> Vec<usize> {
    let mut v = parents.to_vec();
    let pos = v.binary_search(&p).unwrap_or_else(|x| x);
    v.insert(pos, p);
    v
}

fn without_parent(parents: &[usize], p: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&x| x != p).collect()
}

/// Legal moves from `dag` under `constraints`.
fn legal_moves(dag: &Dag, constraints: &ArcConstraints) -> Vec<(MoveKind, usize, usize)> {
    let n = dag.len();
    let mut out = Vec::new();
    for p in 0..n {
        for c in 0..n {
            if p == c {
                continue;
            }
            if dag.has_arc(p, c) {
                if !constraints.is_required(p, c) {
                    out.push((MoveKind::Delete, p, c));
                    // reversal is legal unless another path p ⇝ c exists
                    if !constraints.is_forbidden(c, p) && !path_avoiding_arc(dag, p, c) {
                        out.push((MoveKind::Reverse, p, c));
                    }
                }
            } else if !constraints.is_forbidden(p, c) && !dag.has_path(c, p) {
                out.push((MoveKind::Add, p, c));
            }
        }
    }
    out
}

/// Is there a directed path `from ⇝ to` that does not use the arc `from → to`?
fn path_avoiding_arc(dag: &Dag, from: usize, to: usize) -> bool {
    dag.children(from)
        .iter()
        .any(|&c| c != to && dag.has_path(c, to))
}

fn apply(dag: &mut Dag, kind: MoveKind, p: usize, c: usize) -> Result<()> {
    match kind {
        MoveKind::Add => dag.add_arc(p, c),
        MoveKind::Delete => dag.remove_arc(p, c),
        MoveKind::Reverse => dag.reverse_arc(p, c),
    }
}

/// Greedy hill climbing from `initial`.
pub fn hill_climb(
    data: &Dataset,
    constraints: &ArcConstraints,
    initial: &Dag,
    score_cfg: &ScoreConfig,
    search_cfg: &SearchConfig,
) -> Result<SearchResult> {
    let schema = data.schema();
    check_dims(initial, schema)?;
    if search_cfg.max_iterations == 0 {
        return Err(Error::contract("max_iterations must be at least 1"));
    }
    if let Some(why) = constraints.check(initial) {
        return Err(Error::InfeasibleStart(why));
    }
    if let Some(v) = (0..schema.len()).find(|&v| data.missing_in(v) > 0) {
        return Err(Error::IncompleteData {
            node: schema.name(v).to_owned(),
            column: schema.name(v).to_owned(),
        });
    }

    let mut cache = ScoreCache::new(data, *score_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(search_cfg.seed);
    let mut dag = initial.clone();
    cache.fill(
        (0..dag.len())
            .map(|v| (v, dag.parents(v).to_vec()))
            .collect(),
    )?;
    let initial_score: f64 = (0..dag.len()).map(|v| cache.get(v, dag.parents(v))).sum();
    let mut score = initial_score;
    let mut moves = Vec::new();
    let mut hit_limit = true;

    for _ in 0..search_cfg.max_iterations {
        let legal = legal_moves(&dag, constraints);
        let mut needed = Vec::new();
        for &(kind, p, c) in &legal {
            match kind {
                MoveKind::Add => needed.push((c, with_parent(dag.parents(c), p))),
                MoveKind::Delete => needed.push((c, without_parent(dag.parents(c), p))),
                MoveKind::Reverse => {
                    needed.push((c, without_parent(dag.parents(c), p)));
                    needed.push((p, with_parent(dag.parents(p), c)));
                }
            }
        }
        cache.fill(needed)?;

        let candidates: Vec<Candidate> = legal
            .iter()
            .map(|&(kind, p, c)| {
                let pc = dag.parents(c);
                let old_c = cache.get(c, pc);
                let delta = match kind {
                    MoveKind::Add => cache.get(c, &with_parent(pc, p)) - old_c,
                    MoveKind::Delete => cache.get(c, &without_parent(pc, p)) - old_c,
                    MoveKind::Reverse => {
                        let pp = dag.parents(p);
                        (cache.get(c, &without_parent(pc, p)) - old_c)
                            + (cache.get(p, &with_parent(pp, c)) - cache.get(p, pp))
                    }
                };
                Candidate {
                    kind,
                    parent: p,
                    child: c,
                    delta,
                }
            })
            .collect();

        let tol = 1e-10 * score.abs().max(1.0);
        let Some(best_delta) = candidates.iter().map(|c| c.delta).reduce(f64::max) else {
            hit_limit = false;
            break;
        };
        if best_delta <= tol {
            hit_limit = false;
            break;
        }
        let mut tied: Vec<Candidate> = candidates
            .into_iter()
            .filter(|c| c.delta >= best_delta - tol)
            .collect();
        tied.sort_by(|a, b| {
            (a.kind, schema.name(a.parent), schema.name(a.child))
                .cmp(&(b.kind, schema.name(b.parent), schema.name(b.child)))
        });
        if search_cfg.tie_break == TieBreak::Random {
            tied.shuffle(&mut rng);
        }
        let chosen = tied[0];
        apply(&mut dag, chosen.kind, chosen.parent, chosen.child)?;
        score += chosen.delta;
        moves.push(MoveRecord {
            kind: chosen.kind,
            parent: schema.name(chosen.parent).to_owned(),
            child: schema.name(chosen.child).to_owned(),
            delta: chosen.delta,
            score_after: score,
        });
    }

    // recompute from cached family scores to shed accumulated rounding
    let score: f64 = (0..dag.len()).map(|v| cache.get(v, dag.parents(v))).sum();
    Ok(SearchResult {
        dag,
        initial_score,
        score,
        moves,
        hit_iteration_limit: hit_limit,
    })
}

/// Replays a move log from `initial`, returning every intermediate DAG
/// (the first entry is `initial`).
pub fn replay_moves(initial: &Dag, schema: &NetworkSchema, moves: &[MoveRecord]) -> Result<Vec<Dag>> {
    let mut dag = initial.clone();
    let mut out = vec![dag.clone()];
    for m in moves {
        let p = schema.require(&m.parent)?;
        let c = schema.require(&m.child)?;
        apply(&mut dag, m.kind, p, c)?;
        out.push(dag.clone());
    }
    Ok(out)
}
