use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riskbn_core::analytics::{influential_findings, render_risk_map, RenderFormat};
use riskbn_core::api::{InfluenceRequest, QueryRequest, RiskMapRequest};
use riskbn_core::evaluation::{score_dataset, select_threshold_gmean, MetricsReport, ThresholdSource};
use riskbn_core::inference::forward_sample;
use riskbn_core::io::{
    complete_cases, load_dataset, load_model, published_marginals, prepare_records, read_raw_records, save_dataset,
    save_model, ContinuousField, MarginalTable, SesBinning,
};
use riskbn_core::model::reference::{reference_crc_network, reference_schema, AGE, CRC, SEX};
use riskbn_core::model::{ArcConstraints, Dag, Evidence, NamedConstraints, NamedDag, NetworkSchema};
use riskbn_core::params::{build_prior, sequential_fit, ParameterPosterior};
use riskbn_core::structure::{hill_climb, ScoreConfig, ScoreKind, SearchConfig, TieBreak};
use riskbn_core::synthetic::{chain_network, independent_network};
use riskbn_core::{demo, Dataset};

use crate::manifest::{Recorder, RunManifest};
use crate::*;

pub const STRUCTURE_FORMAT_VERSION: &str = "1.0";

/// Chain generator: probability a node copies its parent's state.
const CHAIN_P_SAME: f64 = 0.9;

/// Structure file: schema plus named arcs, with the search score if learned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDoc {
    pub format_version: String,
    pub schema: NetworkSchema,
    pub dag: NamedDag,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub score_config: Option<ScoreConfig>,
}

impl StructureDoc {
    pub fn new(schema: &NetworkSchema, dag: &Dag) -> Self {
        Self {
            format_version: STRUCTURE_FORMAT_VERSION.into(),
            schema: schema.clone(),
            dag: dag.to_named(schema),
            score: None,
            score_config: None,
        }
    }
}

pub fn execute(cmd: &Command, config_file: Option<PathBuf>) -> CliResult<RunManifest> {
    let configuration = serde_json::to_value(cmd).map_err(|e| CliError::Internal(e.to_string()))?;
    let out = match cmd {
        Command::LearnStructure(a) => &a.out,
        Command::Fit(a) => &a.out,
        Command::Query(a) => &a.out,
        Command::Riskmap(a) => &a.out,
        Command::Influence(a) => &a.out,
        Command::Validate(a) => &a.out,
        Command::Generate(a) => &a.out,
        Command::Demo(a) => &a.out,
        Command::Prepare(a) => &a.out,
    };
    let mut rec = Recorder::new(cmd.name(), configuration, config_file, &out.out)?;
    match cmd {
        Command::LearnStructure(a) => learn_structure(a, &mut rec)?,
        Command::Fit(a) => fit(a, &mut rec)?,
        Command::Query(a) => query(a, &mut rec)?,
        Command::Riskmap(a) => riskmap(a, &mut rec)?,
        Command::Influence(a) => influence(a, &mut rec)?,
        Command::Validate(a) => validate(a, &mut rec)?,
        Command::Generate(a) => generate(a, &mut rec)?,
        Command::Demo(a) => demo_cmd(a, &mut rec)?,
        Command::Prepare(a) => prepare(a, &mut rec)?,
    }
    rec.finish()
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_data(rec: &mut Recorder, path: &Path, schema: &NetworkSchema, drop_incomplete: bool) -> CliResult<Dataset> {
    let bytes = rec.read_input(path)?;
    let (data, report) = load_dataset(bytes.as_slice(), schema, file_stem(path))?;
    for r in &report.rejected {
        eprintln!(
            "{}: line {}: rejected ({} = `{}`: {})",
            path.display(),
            r.line,
            r.column,
            r.value,
            r.reason
        );
    }
    rec.result(&format!("ingest:{}", path.display()), &report);
    if drop_incomplete {
        let (kept, dropped) = complete_cases(&data);
        if dropped > 0 {
            eprintln!("{}: dropped {dropped} incomplete rows", path.display());
        }
        return Ok(kept);
    }
    Ok(data)
}

fn load_posterior(rec: &mut Recorder, path: &Path) -> CliResult<ParameterPosterior> {
    let text = rec.read_input_text(path)?;
    load_model(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_structure(rec: &mut Recorder, path: &Path) -> CliResult<(NetworkSchema, Dag)> {
    let doc: StructureDoc = parse_json(&rec.read_input_text(path)?, path)?;
    let dag = doc.dag.to_dag(&doc.schema)?;
    Ok((doc.schema, dag))
}

/// `name=state` into its two halves.
fn split_pair(text: &str) -> CliResult<(String, String)> {
    text.split_once('=')
        .map(|(n, s)| (n.trim().to_owned(), s.trim().to_owned()))
        .ok_or_else(|| CliError::Usage(format!("expected name=state, got `{text}`")))
}

fn pairs_to_map(pairs: &[String]) -> CliResult<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for p in pairs {
        let (n, s) = split_pair(p)?;
        if m.insert(n.clone(), s).is_some() {
            return Err(CliError::Usage(format!("`{n}` given twice")));
        }
    }
    Ok(m)
}

fn learn_structure(a: &LearnStructureArgs, rec: &mut Recorder) -> CliResult<()> {
    let schema = match &a.schema {
        Some(p) => parse_json::<NetworkSchema>(&rec.read_input_text(p)?, p)?,
        None => reference_schema(),
    };
    let mut parts = Vec::with_capacity(a.data.len());
    for p in &a.data {
        parts.push(load_data(rec, p, &schema, a.complete_cases)?);
    }
    let data = Dataset::concat("pooled", &parts.iter().collect::<Vec<_>>())?;

    let constraints = match &a.constraints {
        Some(p) => {
            let text = rec.read_input_text(p)?;
            let named: NamedConstraints = if p.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            } else {
                parse_json(&text, p)?
            };
            ArcConstraints::from_named(&named, &schema)?
        }
        None => ArcConstraints::none(),
    };
    let initial = match &a.initial {
        Some(p) => {
            let (s, dag) = load_structure(rec, p)?;
            if s != schema {
                return Err(CliError::Usage(format!("{}: schema differs from the data schema", p.display())));
            }
            dag
        }
        None => Dag::from_arcs(schema.len(), constraints.required())?,
    };
    let tie_break = match a.tie_break {
        TieBreakArg::Lexicographic => TieBreak::Lexicographic,
        TieBreakArg::Random => TieBreak::Random,
    };
    let seed = match (tie_break, a.seed) {
        (TieBreak::Random, None) => {
            return Err(CliError::Usage("`--tie-break random` needs `--seed`".into()));
        }
        (_, s) => s.unwrap_or(0),
    };
    if tie_break == TieBreak::Random {
        rec.seed("tie_break", seed);
    }
    let kind = match a.score {
        ScoreArg::Bds => ScoreKind::Bds,
        ScoreArg::Bdeu => ScoreKind::Bdeu,
    };
    let score_cfg = ScoreConfig::new(kind, a.iss)?;
    let search = SearchConfig {
        max_iterations: a.max_iterations,
        tie_break,
        seed,
    };
    let r = hill_climb(&data, &constraints, &initial, &score_cfg, &search)?;

    let mut doc = StructureDoc::new(&schema, &r.dag);
    doc.score = Some(r.score);
    doc.score_config = Some(score_cfg);
    rec.write_json("structure.json", &doc)?;
    rec.write_json("moves.json", &r.moves)?;
    rec.result("rows", data.n_rows());
    rec.result("initial_score", r.initial_score);
    rec.result("score", r.score);
    rec.result("arcs", r.dag.arc_count());
    rec.result("moves", r.moves.len());
    rec.result("hit_iteration_limit", r.hit_iteration_limit);
    println!(
        "{} arcs, score {:.4} after {} moves{}",
        r.dag.arc_count(),
        r.score,
        r.moves.len(),
        if r.hit_iteration_limit { " (iteration limit)" } else { "" }
    );
    Ok(())
}

fn fit(a: &FitArgs, rec: &mut Recorder) -> CliResult<()> {
    let (schema, dag) = load_structure(rec, &a.structure)?;
    let mut yearly = Vec::with_capacity(a.data.len());
    for p in &a.data {
        yearly.push(load_data(rec, p, &schema, a.complete_cases)?);
    }
    let total_rows: usize = yearly.iter().map(Dataset::n_rows).sum();

    let alpha = if a.alpha == "auto" {
        if !(a.alpha_denominator > 0.0 && a.alpha_denominator.is_finite()) {
            return Err(CliError::Usage(format!(
                "--alpha-denominator must be positive, got {}",
                a.alpha_denominator
            )));
        }
        total_rows as f64 / a.alpha_denominator
    } else {
        a.alpha
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--alpha must be `auto` or a number, got `{}`", a.alpha)))?
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CliError::Usage(format!("alpha must be positive, got {alpha}")));
    }

    let marginals = match a.marginals.as_str() {
        "empirical" => Dataset::concat("pooled", &yearly.iter().collect::<Vec<_>>())?.marginals(),
        "published" => published_marginals()
            .for_schema(&schema)
            .ok_or_else(|| CliError::Usage("published marginals only cover the reference schema".into()))?,
        path => {
            let p = Path::new(path);
            let table: MarginalTable = parse_json(&rec.read_input_text(p)?, p)?;
            table
                .for_schema(&schema)
                .ok_or_else(|| CliError::Usage(format!("{path}: does not cover every schema variable")))?
        }
    };
    let prior = build_prior(&schema, &marginals, alpha)?;
    let posts = sequential_fit(&prior, &schema, &dag, &yearly)?;

    for (i, (post, p)) in posts.iter().zip(&a.data).enumerate() {
        rec.write(&format!("model_{}_{}.json", i + 1, file_stem(p)), save_model(post)? + "\n")?;
    }
    let last = posts.last().expect("at least one data file");
    rec.write("model.json", save_model(last)? + "\n")?;
    rec.result("alpha", alpha);
    rec.result(
        "alpha_rule",
        if a.alpha == "auto" {
            format!("rows / {}", a.alpha_denominator)
        } else {
            "fixed".into()
        },
    );
    rec.result("total_rows", total_rows);
    rec.result("rows_per_file", yearly.iter().map(Dataset::n_rows).collect::<Vec<_>>());
    rec.result("model_checksum", riskbn_core::io::model_checksum(last)?);
    println!("alpha = {alpha}; fitted {} file(s), {total_rows} rows", yearly.len());
    Ok(())
}

fn query(a: &QueryArgs, rec: &mut Recorder) -> CliResult<()> {
    let post = load_posterior(rec, &a.model)?;
    let req = QueryRequest {
        target: a.target.clone(),
        evidence: pairs_to_map(&a.evidence)?,
    };
    let resp = req.run(&post.posterior_mean_network())?;
    rec.write_json("query.json", &resp)?;
    for (s, p) in resp.states.iter().zip(&resp.distribution) {
        println!("{}={s}\t{p:.6}", resp.target);
    }
    println!("p(evidence)\t{:.6e}", resp.evidence_probability);
    Ok(())
}

fn riskmap(a: &RiskmapArgs, rec: &mut Recorder) -> CliResult<()> {
    let post = load_posterior(rec, &a.model)?;
    let (target, target_state) = split_pair(&a.target)?;
    let req = RiskMapRequest {
        target,
        target_state,
        condition: pairs_to_map(&a.cond)?,
        axes: a.axes.clone(),
        n_param_samples: Some(a.samples),
        level: Some(a.level),
        seed: Some(a.seed),
    };
    rec.seed("riskmap", a.seed);
    let map = req.run(&post)?;
    rec.write("riskmap.json", render_risk_map(&map, RenderFormat::Json)? + "\n")?;
    match a.format {
        MapFormat::Svg => {
            rec.write("riskmap.svg", render_risk_map(&map, RenderFormat::Svg)?)?;
        }
        MapFormat::Text => {
            rec.write("riskmap.txt", render_risk_map(&map, RenderFormat::Text)?)?;
        }
        MapFormat::Json => {}
    }
    rec.result("cells", map.cells.len());
    rec.result("skipped_draws", map.skipped_draws);
    print!("{}", render_risk_map(&map, RenderFormat::Text)?);
    Ok(())
}

fn influence(a: &InfluenceArgs, rec: &mut Recorder) -> CliResult<()> {
    let post = load_posterior(rec, &a.model)?;
    let schema = post.schema().clone();
    let (target, target_state) = split_pair(&a.target)?;
    rec.seed("influence", a.seed);
    let report = match (&a.data, a.synthetic) {
        (Some(p), None) => {
            let (t, ts) = Evidence::parse_pair(&schema, &a.target)?;
            let data = load_data(rec, p, &schema, true)?;
            let mut positives = data.filter(|r| data.get(r, t) == Some(ts));
            if let Some(m) = a.max_rows {
                let mut kept = 0;
                positives = positives.filter(|_| {
                    kept += 1;
                    kept <= m
                });
            }
            rec.result("positive_rows", positives.n_rows());
            influential_findings(&post, &positives, t, ts, a.iterations, a.seed)?
        }
        (None, Some(n)) => {
            let n = a.max_rows.map_or(n, |m| n.min(m));
            rec.seed("synthetic_positives", a.seed);
            rec.result("positive_rows", n);
            InfluenceRequest {
                target,
                target_state,
                iterations: a.iterations,
                seed: Some(a.seed),
                rows: None,
                synthetic_positives: Some(n),
            }
            .run(&post)?
        }
        _ => return Err(CliError::Usage("give `--data` or `--synthetic`".into())),
    };
    rec.write_json("influence.json", &report)?;
    rec.result("skipped", report.skipped);
    for name in report.ranking() {
        let v = report.variable(name).expect("ranked names exist");
        println!("{name:<12} mean {:>9.4}  |mean| {:>9.4}  se {:>8.4}  n {}", v.mean, v.mean_abs, v.std_error, v.count);
    }
    Ok(())
}

fn validate(a: &ValidateArgs, rec: &mut Recorder) -> CliResult<()> {
    let post = load_posterior(rec, &a.model)?;
    let net = post.posterior_mean_network();
    let schema = post.schema().clone();
    let (t, ts) = Evidence::parse_pair(&schema, &a.target)?;
    let data = load_data(rec, &a.data, &schema, false)?;
    let preds = score_dataset(&net, &data, t, ts)?;

    let (threshold, source, degenerate) = if a.threshold == "gmean" {
        match &a.threshold_data {
            Some(p) => {
                let train = load_data(rec, p, &schema, false)?;
                let c = select_threshold_gmean(&score_dataset(&net, &train, t, ts)?)?;
                (c.threshold, ThresholdSource::Train, c.degenerate)
            }
            None => {
                let c = select_threshold_gmean(&preds)?;
                (c.threshold, ThresholdSource::Validation, c.degenerate)
            }
        }
    } else {
        let v: f64 = a
            .threshold
            .parse()
            .map_err(|_| CliError::Usage(format!("--threshold must be `gmean` or a number, got `{}`", a.threshold)))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Usage(format!("--threshold must lie in [0, 1], got {v}")));
        }
        (v, ThresholdSource::Fixed, false)
    };
    let report = MetricsReport::build(
        schema.name(t),
        &schema.variable(t).states()[ts],
        &preds,
        threshold,
        source,
        degenerate,
        a.bins,
    )?;
    rec.write_json("metrics.json", &report)?;
    rec.write("metrics.txt", report.to_text())?;
    rec.result("auc", report.auc);
    rec.result("g_mean", report.g_mean);
    print!("{}", report.to_text());
    Ok(())
}

/// Rows of year `years[i]` are drawn with seed `seed + i`.
fn sample_years(net: &riskbn_core::model::BayesianNetwork, n: usize, years: &[i32], seed: u64) -> CliResult<Vec<Dataset>> {
    Ok(years
        .iter()
        .enumerate()
        .map(|(i, &y)| forward_sample(net, n, seed.wrapping_add(i as u64)).with_year(y))
        .collect())
}

fn csv_text(d: &Dataset) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    save_dataset(&mut buf, d).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(buf)
}

fn generate(a: &GenerateArgs, rec: &mut Recorder) -> CliResult<()> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let (net, name) = match &a.model {
        Some(p) => (load_posterior(rec, p)?.posterior_mean_network(), format!("model:{}", p.display())),
        None => match a.generator {
            GeneratorArg::Demo => (demo::demo_network(), "demo".to_owned()),
            GeneratorArg::Chain => {
                if a.nodes < 2 {
                    return Err(CliError::Usage("a chain needs at least 2 nodes".into()));
                }
                (chain_network(a.nodes, CHAIN_P_SAME), format!("chain:{}", a.nodes))
            }
            GeneratorArg::Independent => {
                if a.nodes == 0 {
                    return Err(CliError::Usage("--nodes must be at least 1".into()));
                }
                (independent_network(&vec![2; a.nodes]), format!("independent:{}", a.nodes))
            }
        },
    };
    rec.seed("generate", a.seed);
    let parts = sample_years(&net, a.n, &a.years, a.seed)?;
    let data = Dataset::concat(format!("generate-seed-{}", a.seed), &parts.iter().collect::<Vec<_>>())?;
    rec.write("data.csv", csv_text(&data)?)?;
    rec.write_json("schema.json", net.schema())?;
    rec.write_json("generator.json", &StructureDoc::new(net.schema(), net.dag()))?;
    rec.result("generator", name);
    rec.result("rows", data.n_rows());
    println!("wrote {} rows", data.n_rows());
    Ok(())
}

/// Expert constraints shipped with the demo: nothing causes sex or age, and
/// both reach CRC directly.
pub fn demo_constraints() -> NamedConstraints {
    NamedConstraints {
        required: vec![(AGE.into(), CRC.into()), (SEX.into(), CRC.into())],
        forbidden: vec![("*".into(), SEX.into()), ("*".into(), AGE.into())],
    }
}

fn demo_cmd(a: &DemoArgs, rec: &mut Recorder) -> CliResult<()> {
    if a.n_per_year == 0 || a.years.is_empty() {
        return Err(CliError::Usage("need at least one year and one row per year".into()));
    }
    let net = demo::demo_network();
    let (schema, dag) = reference_crc_network();
    rec.seed("demo", a.seed);
    for (d, y) in sample_years(&net, a.n_per_year, &a.years, a.seed)?.iter().zip(&a.years) {
        rec.write(&format!("data_{y}.csv"), csv_text(d)?)?;
    }
    rec.write_json("schema.json", &schema)?;
    rec.write_json("structure.json", &StructureDoc::new(&schema, &dag))?;
    rec.write_json("constraints.json", &demo_constraints())?;
    rec.result("rows", a.n_per_year * a.years.len());
    println!(
        "wrote {} yearly files of {} rows to {}",
        a.years.len(),
        a.n_per_year,
        rec.out_dir().display()
    );
    Ok(())
}

fn prepare(a: &PrepareArgs, rec: &mut Recorder) -> CliResult<()> {
    let bytes = rec.read_input(&a.raw)?;
    let records = read_raw_records(bytes.as_slice())?;
    let ses = match (a.ses_low, a.ses_high) {
        (Some(l), Some(h)) => Some(SesBinning::new(l, h)?),
        _ => None,
    };
    let fields: &[ContinuousField] = if a.no_screen { &[] } else { &ContinuousField::DEFAULT };
    let (data, report) = prepare_records(&records, fields, ses, file_stem(&a.raw))?;
    rec.write("coded.csv", csv_text(&data)?)?;
    rec.write_json("prepare.json", &report)?;
    rec.result("input_records", records.len());
    rec.result("coded_rows", report.coded_rows);
    println!(
        "{} records in, {} kept by the screen, {} coded",
        records.len(),
        report.cleaning.kept,
        report.coded_rows
    );
    Ok(())
}
