use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskbn_core::analytics::{
    influence_trace, influential_findings, parse_risk_map, render_risk_map, risk_map, RenderFormat,
    RiskCell, RiskMap, RiskMapSpec, Verdict, RAMP_MID,
};
use riskbn_core::inference::{forward_sample, is_d_separated};
use riskbn_core::model::reference::*;
use riskbn_core::model::Evidence;
use riskbn_core::params::{build_prior, default_alpha, ParameterPosterior};
use riskbn_core::synthetic::{random_network, random_network_seeded, relative_risk_network, single_parent_network};
use riskbn_core::{demo, Dataset, Error};

const LN2: f64 = std::f64::consts::LN_2;

fn rr_posterior() -> ParameterPosterior {
    ParameterPosterior::from_network(&relative_risk_network(0.04, 2.0), 5_000.0).unwrap()
}

fn spec(post: &ParameterPosterior, cond: &[&str], axes: &[&str], samples: usize) -> RiskMapSpec {
    let mut s = RiskMapSpec::from_names(
        post.schema(),
        "T=1",
        &cond.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        &axes.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        42,
    )
    .unwrap();
    s.n_param_samples = samples;
    s
}

#[test]
fn relative_risk_two_gives_a_log_two_gap() {
    let post = rr_posterior();
    for cond in [&["C=0"][..], &["C=1"], &[]] {
        let map = risk_map(&post, &spec(&post, cond, &["B"], 1000)).unwrap();
        assert_eq!(map.cells.len(), 2);
        let gap = map.cells[1].r_hat - map.cells[0].r_hat;
        if cond.is_empty() {
            // C is not fixed, so the ratio mixes over C and is not exactly 2
            assert!(gap > 0.0);
        } else {
            assert!((gap - LN2).abs() <= 1e-9, "{gap}");
        }
        let total: f64 = map.cells.iter().map(|c| c.population_share).sum();
        assert!((total - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn separated_axis_gives_null_cells() {
    let post = rr_posterior();
    let map = risk_map(&post, &spec(&post, &["C=1"], &["D"], 1000)).unwrap();
    for c in &map.cells {
        assert!(c.r_hat.abs() <= 1e-9);
        assert_eq!(c.verdict, Verdict::NoEvidence);
    }
}

#[test]
fn two_axis_maps_are_row_major() {
    let post = rr_posterior();
    let map = risk_map(&post, &spec(&post, &[], &["B", "D"], 200)).unwrap();
    assert_eq!(map.shape(), vec![2, 2]);
    let states: Vec<Vec<usize>> = map.cells.iter().map(|c| c.b_states.clone()).collect();
    assert_eq!(states, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    assert_eq!(map.cells[3].b_value, vec!["1", "1"]);
}

#[test]
fn same_seed_same_map() {
    let post = rr_posterior();
    let s = spec(&post, &["C=1"], &["B"], 300);
    assert_eq!(risk_map(&post, &s).unwrap(), risk_map(&post, &s).unwrap());
    let mut other = s.clone();
    other.seed = 43;
    assert_ne!(risk_map(&post, &s).unwrap().cells, risk_map(&post, &other).unwrap().cells);
}

#[test]
fn invalid_specs_are_rejected() {
    let post = rr_posterior();
    let s = post.schema();
    let bad = |cond: &[&str], axes: &[&str]| {
        RiskMapSpec::from_names(
            s,
            "T=1",
            &cond.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            &axes.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            1,
        )
        .and_then(|sp| risk_map(&post, &sp))
    };
    assert!(bad(&["B=1"], &["B"]).is_err());
    assert!(bad(&[], &["T"]).is_err());
    assert!(bad(&[], &[]).is_err());
    assert!(bad(&[], &["B", "C", "D"]).is_err());
    assert!(bad(&["T=1"], &["B"]).is_err());
}

#[test]
fn zero_baseline_is_degenerate() {
    // T = 1 keeps only the smallest positive hyperparameter
    let post = ParameterPosterior::from_network(&relative_risk_network(0.0, 2.0), 1.0).unwrap();
    let r = risk_map(&post, &spec(&post, &[], &["B"], 10));
    assert!(matches!(r, Err(Error::DegenerateBaseline { .. })), "{r:?}");
}

#[test]
fn more_data_does_not_widen_intervals() {
    let net = relative_risk_network(0.1, 2.0);
    let widths: Vec<f64> = [4_000, 8_000]
        .iter()
        .map(|&n| {
            let d = forward_sample(&net, n, 12);
            let prior = build_prior(net.schema(), &d.marginals(), 1.0).unwrap();
            let post = ParameterPosterior::from_prior(net.schema().clone(), net.dag().clone(), &prior)
                .unwrap()
                .fit(&d)
                .unwrap();
            let map = risk_map(&post, &spec(&post, &["C=0"], &["B"], 400)).unwrap();
            let mut w: Vec<f64> = map.cells.iter().map(|c| c.upper - c.lower).collect();
            w.sort_by(f64::total_cmp);
            w[w.len() / 2]
        })
        .collect();
    assert!(widths[1] <= widths[0], "{widths:?}");
}

#[test]
fn sleep_duration_alone_shows_no_evidence_for_women() {
    let net = demo::demo_network();
    let d = forward_sample(&net, 316_900, 2012);
    let schema = d.schema().clone();
    let prior = build_prior(&schema, &d.marginals(), default_alpha(d.n_rows())).unwrap();
    let post = ParameterPosterior::from_prior(schema.clone(), net.dag().clone(), &prior)
        .unwrap()
        .fit(&d)
        .unwrap();
    let mut s = RiskMapSpec::from_names(&schema, "v_CRC=yes", &["v_sex=woman".into()], &[SD.into()], 4).unwrap();
    s.n_param_samples = 1000;
    let map = risk_map(&post, &s).unwrap();
    assert_eq!(map.cells.len(), 3);
    for c in &map.cells {
        assert_eq!(c.verdict, Verdict::NoEvidence, "{c:?}");
        assert!(c.lower <= c.mc_median && c.mc_median <= c.upper);
    }
    assert_eq!(map.condition.get(SEX).map(String::as_str), Some("female"));
}

#[test]
fn age_raises_risk_in_the_demo_model() {
    let post = ParameterPosterior::from_network(&demo::demo_network(), 2e6).unwrap();
    let mut s = RiskMapSpec::from_names(post.schema(), "v_CRC=yes", &["v_sex=man".into()], &[AGE.into()], 4).unwrap();
    s.n_param_samples = 200;
    let map = risk_map(&post, &s).unwrap();
    assert_eq!(map.cells[0].verdict, Verdict::Decrease);
    assert_eq!(map.cells[3].verdict, Verdict::Increase);
}

fn sample_map(shares: &[f64], r: &[f64]) -> RiskMap {
    RiskMap {
        format_version: "1.0".into(),
        target: "T".into(),
        target_state: "1".into(),
        condition: BTreeMap::new(),
        axes: vec!["B".into()],
        axis_states: vec![(0..shares.len()).map(|i| format!("b{i}")).collect()],
        level: 0.9,
        n_param_samples: 10,
        seed: 0,
        baseline_probability: 0.1,
        cells: shares
            .iter()
            .zip(r)
            .enumerate()
            .map(|(i, (&share, &r))| RiskCell {
                b_value: vec![format!("b{i}")],
                b_states: vec![i],
                r_hat: r,
                lower: r - 0.1,
                upper: r + 0.1,
                mc_median: r,
                verdict: Verdict::from_interval(r - 0.1, r + 0.1),
                population_share: share,
                r_hat_outside_interval: false,
            })
            .collect(),
        skipped_draws: 0,
    }
}

fn attr<'a>(tag: &'a str, name: &str) -> &'a str {
    let key = format!("{name}=\"");
    let start = tag.find(&key).unwrap() + key.len();
    &tag[start..start + tag[start..].find('"').unwrap()]
}

#[test]
fn svg_encodes_share_by_border_and_zero_by_midpoint() {
    let map = sample_map(&[0.8, 0.15, 0.05], &[0.0, 0.5, -0.5]);
    let svg = render_risk_map(&map, RenderFormat::Svg).unwrap();
    let cells: Vec<&str> = svg.split("<rect").filter(|t| t.contains("class=\"cell\"")).collect();
    assert_eq!(cells.len(), 3);
    let (r, g, b) = RAMP_MID;
    assert_eq!(attr(cells[0], "fill"), format!("#{r:02x}{g:02x}{b:02x}"));
    let widths: Vec<f64> = cells.iter().map(|c| attr(c, "stroke-width").parse().unwrap()).collect();
    assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    for forbidden in ["red", "yellow", "green"] {
        assert!(!svg.contains(forbidden));
    }
}

#[test]
fn json_round_trip_and_text_glyphs() {
    let post = rr_posterior();
    let map = risk_map(&post, &spec(&post, &["C=1"], &["B", "D"], 50)).unwrap();
    let json = render_risk_map(&map, RenderFormat::Json).unwrap();
    assert_eq!(parse_risk_map(&json).unwrap(), map);
    let text = render_risk_map(&map, RenderFormat::Text).unwrap();
    assert!(text.contains('▲') || text.contains('○'));
    assert!("pdf".parse::<RenderFormat>().is_err());
}

// ---- influential findings ----------------------------------------------

fn positives(net: &riskbn_core::model::BayesianNetwork, target: usize, n: usize, seed: u64) -> Dataset {
    let d = forward_sample(net, n * 20, seed);
    let mut kept = 0;
    d.filter(|r| {
        let keep = kept < n && d.get(r, target) == Some(1);
        kept += usize::from(keep);
        keep
    })
}

#[test]
fn disconnected_variables_have_zero_influence() {
    let net = single_parent_network(4);
    let t = net.schema().len() - 1;
    let post = ParameterPosterior::from_network(&net, 1e7).unwrap();
    let pos = positives(&net, t, 200, 1);
    assert_eq!(pos.n_rows(), 200);
    let rep = influential_findings(&post, &pos, t, 1, 10, 3).unwrap();
    assert_eq!(rep.variables.len(), 5);
    for v in &rep.variables {
        assert_eq!(v.count, 200 * 10, "{}", v.variable);
        if v.variable == "P" {
            assert!(v.mean_abs > 1.0);
        } else {
            assert!(v.mean.abs() <= 1e-9 && v.mean_abs <= 1e-9, "{v:?}");
        }
    }
    assert_eq!(rep.ranking().len(), 5);
    // risk rises for P=high and falls for P=low
    let p = rep.variable("P").unwrap();
    assert!(p.per_state[0].mean < 0.0 && p.per_state[2].mean > 0.0);
}

#[test]
fn terms_after_the_full_parent_set_vanish() {
    let net = random_network_seeded(31, 6, 3, 3);
    let target = (0..6).max_by_key(|&v| net.dag().parents(v).len()).unwrap();
    let parents = net.dag().parents(target).to_vec();
    let d = forward_sample(&net, 200, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut finals = Vec::new();
    for r in 0..d.n_rows() {
        let row = d.complete_row(r).unwrap();
        let mut order: Vec<usize> = (0..6).filter(|&v| v != target).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let trace = influence_trace(&net, &row, &order, target, 0).unwrap();
        let mut seen = 0;
        for step in &trace {
            if seen == parents.len() {
                assert!(step.rrv.is_none_or(|x| x.abs() <= 1e-9), "{trace:?}");
            }
            if parents.contains(&step.variable) {
                seen += 1;
            }
        }
        if r < 5 {
            finals.push((row.clone(), trace.last().unwrap().probability));
        }
    }
    // the final conditional does not depend on the order
    for (row, p) in finals {
        let order: Vec<usize> = (0..6).filter(|&v| v != target).rev().collect();
        let again = influence_trace(&net, &row, &order, target, 0).unwrap();
        let (a, b) = (p.unwrap(), again.last().unwrap().probability.unwrap());
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn means_are_stable_across_seeds() {
    let net = random_network_seeded(7, 6, 3, 2);
    let t = 5;
    let post = ParameterPosterior::from_network(&net, 1e6).unwrap();
    let pos = forward_sample(&net, 300, 9);
    let a = influential_findings(&post, &pos, t, 0, 50, 1).unwrap();
    let b = influential_findings(&post, &pos, t, 0, 50, 2).unwrap();
    for (x, y) in a.variables.iter().zip(&b.variables) {
        let bound = 2.0 * (x.std_error.powi(2) + y.std_error.powi(2)).sqrt();
        assert!((x.mean - y.mean).abs() <= bound.max(1e-9), "{x:?} {y:?}");
    }
    assert_eq!(a, influential_findings(&post, &pos, t, 0, 50, 1).unwrap());
}

#[test]
fn standard_error_shrinks_with_iterations() {
    let net = random_network_seeded(8, 6, 3, 2);
    let post = ParameterPosterior::from_network(&net, 1e6).unwrap();
    let pos = forward_sample(&net, 100, 3);
    let one = influential_findings(&post, &pos, 5, 0, 1, 1).unwrap();
    let many = influential_findings(&post, &pos, 5, 0, 50, 1).unwrap();
    for (x, y) in one.variables.iter().zip(&many.variables) {
        if x.std_dev > 0.0 {
            let ratio = y.std_error / x.std_error;
            assert!(ratio < 0.3, "{} {ratio}", x.variable);
        }
    }
}

#[test]
fn influence_rejects_bad_input() {
    let net = single_parent_network(1);
    let post = ParameterPosterior::from_network(&net, 10.0).unwrap();
    let pos = forward_sample(&net, 5, 1);
    assert!(influential_findings(&post, &pos, 2, 1, 0, 1).is_err());
    assert!(influential_findings(&post, &pos, 9, 1, 1, 1).is_err());
    let mut missing = pos.clone();
    missing.push_row(&[None, Some(0), Some(1)], 0).unwrap();
    assert!(matches!(
        influential_findings(&post, &missing, 2, 1, 1, 1),
        Err(Error::IncompleteData { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn verdicts_partition_intervals(lo in -5.0f64..5.0, w in 0.0f64..5.0) {
        let v = Verdict::from_interval(lo, lo + w);
        let expect = if lo > 0.0 { Verdict::Increase } else if lo + w < 0.0 { Verdict::Decrease } else { Verdict::NoEvidence };
        prop_assert_eq!(v, expect);
    }

    #[test]
    fn separated_axes_are_null_on_random_networks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 5, 3, 2);
        let target = rng.random_range(0..5);
        let axis = (target + 1 + rng.random_range(0..4)) % 5;
        let cond: Vec<usize> = (0..5).filter(|&v| v != target && v != axis && rng.random_bool(0.5)).collect();
        if is_d_separated(net.dag(), &[axis], &[target], &cond).unwrap() {
            let post = ParameterPosterior::from_network(&net, 50.0).unwrap();
            let ev: Evidence = cond.iter().map(|&v| (v, 0)).collect();
            let mut s = RiskMapSpec::new(target, 0, ev, vec![axis], seed);
            s.n_param_samples = 40;
            let map = risk_map(&post, &s).unwrap();
            for c in &map.cells {
                prop_assert!(c.r_hat.abs() <= 1e-9);
                prop_assert_eq!(c.verdict, Verdict::NoEvidence);
            }
        }
    }
}
