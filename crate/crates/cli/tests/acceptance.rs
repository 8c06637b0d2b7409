//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//! Runs with `harness = false`; each criterion is timed against its budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskbn_core::analytics::{influence_trace, influential_findings, risk_map, RiskMapSpec, Verdict};
use riskbn_core::api::synthetic_positives;
use riskbn_core::evaluation::{calibration_curve, confusion_at, score_dataset, ScoredPredictions};
use riskbn_core::inference::{brute_force_query, forward_sample, is_d_separated, query, query_joint};
use riskbn_core::model::reference::CRC;
use riskbn_core::model::{ArcConstraints, BayesianNetwork, Dag, Evidence};
use riskbn_core::params::{build_prior, default_alpha, sequential_fit, ParameterPosterior};
use riskbn_core::structure::{hill_climb, network_score, replay_moves, ScoreConfig, SearchConfig};
use riskbn_core::synthetic::{
    chain_network, independent_network, random_network, random_network_seeded, relative_risk_network,
    single_parent_network, two_node_network,
};
use riskbn_core::{demo, Dataset, Error};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(n: usize, name: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let took = start.elapsed();
    let in_budget = took <= budget;
    let (pass, detail) = match outcome {
        Ok(d) if in_budget => (true, d),
        Ok(d) => (false, format!("{d}; over the time budget")),
        Err(d) => (false, d),
    };
    println!(
        "{} {n:>2} {name}: {detail} [{:.2} s / {} s]",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn random_evidence<R: Rng>(net: &BayesianNetwork, target: usize, rng: &mut R) -> Evidence {
    let s = net.schema();
    let mut ev = Evidence::new();
    for v in 0..s.len() {
        if v != target && rng.random_bool(0.4) {
            ev.set(v, rng.random_range(0..s.cardinality(v)));
        }
    }
    ev
}

// 1. confusion arithmetic on published counts

fn predictions_from_counts(tn: usize, fp: usize, fn_: usize, tp: usize) -> ScoredPredictions {
    let mut labels = Vec::with_capacity(tn + fp + fn_ + tp);
    let mut scores = Vec::with_capacity(labels.capacity());
    for (label, score, n) in [(false, 0.0, tn), (false, 1.0, fp), (true, 0.0, fn_), (true, 1.0, tp)] {
        labels.extend(std::iter::repeat_n(label, n));
        scores.extend(std::iter::repeat_n(score, n));
    }
    ScoredPredictions::new(labels, scores).unwrap()
}

fn confusion_arithmetic() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, counts, sens, spec) in [
        ("crc", (243_326, 96_163, 70, 148), 0.679, 0.717),
        ("diabetes", (249_937, 78_361, 3_118, 8_291), 0.727, 0.761),
    ] {
        let (tn, fp, fn_, tp) = counts;
        let m = confusion_at(&predictions_from_counts(tn, fp, fn_, tp), 0.5);
        ok &= (m.tn, m.fp, m.fn_, m.tp) == (tn as u64, fp as u64, fn_ as u64, tp as u64);
        ok &= (m.sensitivity() - sens).abs() <= 1e-3 && (m.specificity() - spec).abs() <= 1e-3;
        parts.push(format!(
            "{name} sens {:.4} (want {sens} ± 0.001) spec {:.4} (want {spec} ± 0.001)",
            m.sensitivity(),
            m.specificity()
        ));
    }
    ensure(ok, parts.join("; "))
}

// 2. variable elimination against enumeration

fn max_gap(net: &BayesianNetwork, ev: &Evidence, target: usize) -> Result<f64, String> {
    match (query(net, ev, target), brute_force_query(net, ev, target)) {
        (Ok(a), Ok(b)) => {
            let d = a
                .distribution
                .iter()
                .zip(&b.distribution)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            Ok(d.max((a.evidence_probability - b.evidence_probability).abs()))
        }
        (Err(Error::ImpossibleEvidence), Err(Error::ImpossibleEvidence)) => Ok(0.0),
        other => Err(format!("engines disagree: {other:?}")),
    }
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut small: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let net = random_network(&mut rng, n, 4, 3);
        let target = rng.random_range(0..n);
        let ev = random_evidence(&net, target, &mut rng);
        small = small.max(max_gap(&net, &ev, target)?);
    }
    let net = ParameterPosterior::from_network(&demo::demo_network(), 50.0)
        .map_err(|e| e.to_string())?
        .sample_parameters(11);
    let states = net.schema().joint_size();
    let mut large: f64 = 0.0;
    for _ in 0..100 {
        let target = rng.random_range(0..net.schema().len());
        let ev = random_evidence(&net, target, &mut rng);
        large = large.max(max_gap(&net, &ev, target)?);
    }
    ensure(
        small <= 1e-9 && large <= 1e-9 && states == 221_184,
        format!("max gap {small:.1e} on 1000 small networks, {large:.1e} on the {states}-state reference network (tol 1e-9)"),
    )
}

// 3. sequential updating equals a one-shot fit

fn conjugacy_exactness() -> Check {
    let net = demo::demo_network();
    let schema = net.schema().clone();
    let years: Vec<Dataset> = (0..4)
        .map(|i| forward_sample(&net, 25_000, 300 + i).with_year(2012 + i as i32))
        .collect();
    let refs: Vec<&Dataset> = years.iter().collect();
    let all = Dataset::concat("all", &refs).map_err(|e| e.to_string())?;
    let prior = build_prior(&schema, &all.marginals(), default_alpha(all.n_rows())).map_err(|e| e.to_string())?;
    let seq = sequential_fit(&prior, &schema, net.dag(), &years).map_err(|e| e.to_string())?;
    let once = ParameterPosterior::from_prior(schema, net.dag().clone(), &prior)
        .and_then(|p| p.fit(&all))
        .map_err(|e| e.to_string())?;
    let last = seq.last().ok_or("no posterior")?;
    let mut cells = 0;
    let mut mismatched = 0;
    for (a, b) in last.families().iter().zip(once.families()) {
        cells += a.counts.len();
        mismatched += a.counts.iter().zip(&b.counts).filter(|(x, y)| x != y).count();
        mismatched += a.prior.iter().zip(&b.prior).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
    }
    ensure(
        mismatched == 0 && cells > 0,
        format!("{cells} hyperparameter cells over 4x25000 rows, {mismatched} differ"),
    )
}

// 4. posterior means recover the generator

fn worst_row_l1(net: &BayesianNetwork, post: &ParameterPosterior) -> f64 {
    let est = post.posterior_mean_network();
    let mut worst: f64 = 0.0;
    for v in 0..net.schema().len() {
        let parents = net.dag().parents(v);
        let mass = if parents.is_empty() {
            vec![1.0]
        } else {
            query_joint(net, &Evidence::new(), parents).unwrap().distribution.values().to_vec()
        };
        for (u, m) in mass.into_iter().enumerate() {
            if m >= 0.05 {
                let l1: f64 = net.cpt(v).row(u).iter().zip(est.cpt(v).row(u)).map(|(a, b)| (a - b).abs()).sum();
                worst = worst.max(l1);
            }
        }
    }
    worst
}

fn parameter_recovery() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, net) in [("random 6-node", random_network_seeded(33, 6, 3, 2)), ("14-variable demo", demo::demo_network())] {
        let d = forward_sample(&net, 100_000, 5);
        let schema = net.schema().clone();
        let prior = build_prior(&schema, &d.marginals(), default_alpha(d.n_rows())).map_err(|e| e.to_string())?;
        let post = ParameterPosterior::from_prior(schema, net.dag().clone(), &prior)
            .and_then(|p| p.fit(&d))
            .map_err(|e| e.to_string())?;
        let l1 = worst_row_l1(&net, &post);
        ok &= l1 <= 0.02;
        parts.push(format!("{name} worst L1 {l1:.4}"));
    }
    ensure(ok, format!("{} (tol 0.02, rows with parent mass >= 0.05)", parts.join(", ")))
}

// 5. credible interval coverage

fn interval_coverage() -> Check {
    let net = two_node_network();
    let schema = net.schema().clone();
    let flat: Vec<Vec<f64>> = (0..schema.len()).map(|v| vec![0.5; schema.cardinality(v)]).collect();
    let prior = build_prior(&schema, &flat, 2.0).map_err(|e| e.to_string())?;
    let base = ParameterPosterior::from_prior(schema, net.dag().clone(), &prior).map_err(|e| e.to_string())?;
    let truth = net.cpt(1).row(1)[1];
    let trials = 200;
    let mut hits = 0;
    for t in 0..trials {
        let post = base.fit(&forward_sample(&net, 400, 1_000 + t)).map_err(|e| e.to_string())?;
        let (lo, hi) = post.credible_interval(1, 1, 0.9).map_err(|e| e.to_string())?[1];
        hits += usize::from(lo <= truth && truth <= hi);
    }
    let rate = hits as f64 / trials as f64;
    ensure((rate - 0.9).abs() <= 0.05, format!("coverage {rate:.3} over {trials} refits (want 0.90 ± 0.05)"))
}

// 6. structure recovery

fn structure_recovery() -> Check {
    let cfg = ScoreConfig::default();
    let search = SearchConfig::default();
    let chain = chain_network(3, 0.9);
    let d = forward_sample(&chain, 50_000, 3);
    let r = hill_climb(&d, &ArcConstraints::none(), &Dag::empty(3), &cfg, &search).map_err(|e| e.to_string())?;
    let shd = r.dag.shd(chain.dag());
    let skeleton = r.dag.skeleton() == chain.dag().skeleton();

    let ind = independent_network(&[2, 3, 2, 4, 3]);
    let d2 = forward_sample(&ind, 50_000, 4);
    let r2 = hill_climb(&d2, &ArcConstraints::none(), &Dag::empty(5), &cfg, &search).map_err(|e| e.to_string())?;
    let spurious = r2.dag.arc_count();

    let mut audited = 0;
    let mut bad = 0;
    for (res, data, n) in [(&r, &d, 3), (&r2, &d2, 5)] {
        let mut prev = res.initial_score;
        for m in &res.moves {
            audited += 1;
            bad += usize::from(!(m.delta > 0.0 && m.score_after > prev));
            prev = m.score_after;
        }
        let dags = replay_moves(&Dag::empty(n), data.schema(), &res.moves).map_err(|e| e.to_string())?;
        let full = network_score(&res.dag, data, &cfg).map_err(|e| e.to_string())?;
        bad += usize::from(dags.last() != Some(&res.dag) || (full - res.score).abs() > 1e-7 * full.abs());
    }
    ensure(
        skeleton && shd <= 1 && spurious <= 1 && bad == 0,
        format!(
            "chain SHD {shd} (skeleton {}), {spurious} spurious arc(s) on independent data, {audited} moves audited with {bad} violations",
            if skeleton { "matches" } else { "differs" }
        ),
    )
}

// 7. risk-map nullity and the relative-risk gap

fn risk_map_nullity() -> Check {
    let post = ParameterPosterior::from_network(&relative_risk_network(0.04, 2.0), 5_000.0).map_err(|e| e.to_string())?;
    let s = post.schema();
    let idx = |n: &str| s.index_of(n).ok_or(format!("no variable {n}"));
    let (t, b, c, d) = (idx("T")?, idx("B")?, idx("C")?, idx("D")?);
    let mut worst_gap: f64 = 0.0;
    let mut worst_null: f64 = 0.0;
    let mut verdicts_ok = true;
    for cs in 0..2 {
        let mut spec = RiskMapSpec::new(t, 1, Evidence::new().with(c, cs), vec![b], 42);
        spec.n_param_samples = 1000;
        let map = risk_map(&post, &spec).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max((map.cells[1].r_hat - map.cells[0].r_hat - std::f64::consts::LN_2).abs());
        let mut spec = RiskMapSpec::new(t, 1, Evidence::new().with(c, cs), vec![d], 42);
        spec.n_param_samples = 1000;
        for cell in risk_map(&post, &spec).map_err(|e| e.to_string())?.cells {
            worst_null = worst_null.max(cell.r_hat.abs());
            verdicts_ok &= cell.verdict == Verdict::NoEvidence;
        }
    }
    // separated axes on random networks
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut separated = 0;
    while separated < 30 {
        let net = random_network(&mut rng, 6, 3, 2);
        let target = rng.random_range(0..6);
        let axis = (target + 1 + rng.random_range(0..5)) % 6;
        let cond: Vec<usize> = (0..6).filter(|&v| v != target && v != axis && rng.random_bool(0.5)).collect();
        if !is_d_separated(net.dag(), &[axis], &[target], &cond).map_err(|e| e.to_string())? {
            continue;
        }
        let post = ParameterPosterior::from_network(&net, 50.0).map_err(|e| e.to_string())?;
        let ev: Evidence = cond.iter().map(|&v| (v, 0)).collect();
        let mut spec = RiskMapSpec::new(target, 0, ev, vec![axis], separated);
        spec.n_param_samples = 200;
        match risk_map(&post, &spec) {
            Ok(map) => {
                for cell in map.cells {
                    worst_null = worst_null.max(cell.r_hat.abs());
                    verdicts_ok &= cell.verdict == Verdict::NoEvidence;
                }
                separated += 1;
            }
            // the random condition may be impossible or leave the target at zero
            Err(Error::ImpossibleEvidence | Error::DegenerateBaseline { .. }) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    ensure(
        worst_gap <= 1e-9 && worst_null <= 1e-9 && verdicts_ok,
        format!(
            "log-2 gap error {worst_gap:.1e}, max |r_hat| {worst_null:.1e} on separated axes (1 + {separated} networks), verdicts {} (tol 1e-9)",
            if verdicts_ok { "all no-evidence" } else { "wrong" }
        ),
    )
}

// 8. influential-findings properties

fn first_positives(net: &BayesianNetwork, target: usize, n: usize, seed: u64) -> Dataset {
    let d = forward_sample(net, n * 40, seed);
    let mut kept = 0;
    d.filter(|r| {
        let keep = kept < n && d.get(r, target) == Some(1);
        kept += usize::from(keep);
        keep
    })
}

fn influence_properties() -> Check {
    // disconnected variables
    let net = single_parent_network(4);
    let t = net.schema().len() - 1;
    let post = ParameterPosterior::from_network(&net, 1e7).map_err(|e| e.to_string())?;
    let pos = first_positives(&net, t, 500, 1);
    if pos.n_rows() != 500 {
        return Err(format!("only {} positives", pos.n_rows()));
    }
    let rep = influential_findings(&post, &pos, t, 1, 50, 3).map_err(|e| e.to_string())?;
    let disconnected = rep
        .variables
        .iter()
        .filter(|v| v.variable != "P")
        .map(|v| v.mean.abs().max(v.mean_abs))
        .fold(0.0, f64::max);

    // terms after the full parent set, for a target without children
    let mut after_parents: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let net = random_network_seeded(seed, 6, 3, 3);
        let Some(target) = (0..6)
            .filter(|&v| net.dag().children(v).is_empty() && !net.dag().parents(v).is_empty())
            .max_by_key(|&v| net.dag().parents(v).len())
        else {
            continue;
        };
        let parents = net.dag().parents(target).to_vec();
        let d = forward_sample(&net, 25, seed);
        for r in 0..d.n_rows() {
            let row = d.complete_row(r).unwrap();
            let mut order: Vec<usize> = (0..6).filter(|&v| v != target).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let mut seen = 0;
            for step in influence_trace(&net, &row, &order, target, 0).map_err(|e| e.to_string())? {
                if seen == parents.len() {
                    after_parents = after_parents.max(step.rrv.map_or(0.0, f64::abs));
                }
                seen += usize::from(parents.contains(&step.variable));
            }
        }
    }

    // stability across seeds on the 14-variable model
    let net = demo::demo_network();
    let crc = net.schema().index_of(CRC).unwrap();
    let post = ParameterPosterior::from_network(&net, 1e6).map_err(|e| e.to_string())?;
    let pos = synthetic_positives(&net, crc, 1, 500, 9).map_err(|e| e.to_string())?;
    let a = influential_findings(&post, &pos, crc, 1, 50, 1).map_err(|e| e.to_string())?;
    let b = influential_findings(&post, &pos, crc, 1, 50, 2).map_err(|e| e.to_string())?;
    let mut unstable = Vec::new();
    for (x, y) in a.variables.iter().zip(&b.variables) {
        let bound = 2.0 * (x.std_error.powi(2) + y.std_error.powi(2)).sqrt();
        if (x.mean - y.mean).abs() > bound.max(1e-9) {
            unstable.push(x.variable.clone());
        }
    }
    ensure(
        disconnected <= 1e-9 && after_parents <= 1e-9 && unstable.is_empty() && pos.n_rows() == 500,
        format!(
            "disconnected |mean| {disconnected:.1e}, post-parent |RRV| {after_parents:.1e} (tol 1e-9), \
             {} of {} variables outside 2 SE across seeds on {} positives",
            unstable.len(),
            a.variables.len(),
            pos.n_rows()
        ),
    )
}

// 9. calibration binning

fn calibration_binning() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut vectors = 0;
    let mut worst_spread = 0;
    for _ in 0..500 {
        let n = rng.random_range(20..2_000);
        let bins = rng.random_range(2..=20).min(n);
        let levels = [1, 2, 3, 5][rng.random_range(0..4)];
        // mostly one value, a few others: ties straddle every cut
        let scores: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.8) { 0.5 } else { f64::from(rng.random_range(0..levels)) / 5.0 })
            .collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0 || rng.random_bool(0.1)).collect();
        let p = ScoredPredictions::new(labels, scores).map_err(|e| e.to_string())?;
        let counts: Vec<usize> = calibration_curve(&p, bins).map_err(|e| e.to_string())?.bins.iter().map(|b| b.count).collect();
        if counts.len() != bins || counts.iter().sum::<usize>() != n {
            return Err(format!("bins {counts:?} for n = {n}"));
        }
        worst_spread = worst_spread.max(counts.iter().max().unwrap() - counts.iter().min().unwrap());
        vectors += 1;
    }

    let net = single_parent_network(2);
    let d = forward_sample(&net, 100_000, 6);
    let t = net.schema().index_of("T").unwrap();
    let p = score_dataset(&net, &d, t, 1).map_err(|e| e.to_string())?;
    let worst_gap = calibration_curve(&p, 10)
        .map_err(|e| e.to_string())?
        .bins
        .iter()
        .map(|b| (b.mean_score - b.positive_rate).abs())
        .fold(0.0, f64::max);
    ensure(
        worst_spread <= 1 && worst_gap < 0.03,
        format!(
            "bin count spread {worst_spread} over {vectors} tie-heavy vectors (want <= 1), \
             worst |mean score - frequency| {worst_gap:.4} at 100000 rows (want < 0.03)"
        ),
    )
}

// 10. the automatic alpha rule, through the binary

fn alpha_rule() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_riskbn");
    let gen = dir.path().join("gen");
    let fit = dir.path().join("fit");
    let status = Command::new(bin)
        .args(["generate", "--generator", "independent", "--nodes", "3", "--n", "316900", "--seed", "1", "--out"])
        .arg(&gen)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("generate failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let status = Command::new(bin)
        .args(["fit", "--alpha", "auto", "--data"])
        .arg(gen.join("data.csv"))
        .arg("--structure")
        .arg(gen.join("generator.json"))
        .arg("--out")
        .arg(&fit)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("fit failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let text = std::fs::read_to_string(fit.join("run.json")).map_err(|e| e.to_string())?;
    let manifest: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let alpha = manifest["results"]["alpha"].as_f64().ok_or("manifest has no alpha")?;
    let rows = manifest["results"]["total_rows"].as_u64().unwrap_or(0);
    ensure(
        (alpha - 31.69).abs() <= 0.01,
        format!("manifest alpha {alpha} for {rows} rows (want 31.69 ± 0.01)"),
    )
}

fn main() -> ExitCode {
    // criteria report their own panics
    std::panic::set_hook(Box::new(|_| {}));
    let secs = Duration::from_secs;
    let results = [
        run(1, "confusion arithmetic", secs(1), confusion_arithmetic),
        run(2, "oracle equivalence", secs(120), oracle_equivalence),
        run(3, "conjugacy exactness", secs(30), conjugacy_exactness),
        run(4, "parameter recovery", secs(60), parameter_recovery),
        run(5, "interval coverage", secs(300), interval_coverage),
        run(6, "structure recovery", secs(120), structure_recovery),
        run(7, "risk-map nullity", secs(60), risk_map_nullity),
        run(8, "influential findings", secs(120), influence_properties),
        run(9, "calibration binning", secs(30), calibration_binning),
        run(10, "alpha rule", secs(60), alpha_rule),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
