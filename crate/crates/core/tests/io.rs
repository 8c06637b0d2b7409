use proptest::prelude::*;

use riskbn_core::inference::forward_sample;
use riskbn_core::io::{
    clean_continuous, complete_cases, discretize, load_dataset, load_model, model_checksum, prepare_records,
    read_raw_records, save_dataset, save_model, ContinuousField, RawRecord, SesBinning,
};
use riskbn_core::model::reference::*;
use riskbn_core::params::{build_prior, ParameterPosterior};
use riskbn_core::synthetic::random_network_seeded;
use riskbn_core::{demo, Error};

/// Header plus one line per row, each row given as the state index of every
/// reference variable (`None` leaves the cell empty).
fn reference_csv(rows: &[Vec<Option<usize>>]) -> String {
    let s = reference_schema();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = s.variables().iter().map(|v| v.name().to_owned()).collect();
    header.push("year".into());
    w.write_record(&header).unwrap();
    for row in rows {
        let mut cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(v, st)| st.map(|i| s.variable(v).states()[i].clone()).unwrap_or_default())
            .collect();
        cells.push("2014".into());
        w.write_record(&cells).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[test]
fn missing_cells_are_counted_not_rejected() {
    let s = reference_schema();
    let n = s.len();
    let mut rows = vec![vec![Some(0); n]; 3];
    rows[1][s.index_of(BMI).unwrap()] = None;
    let (d, rep) = load_dataset(reference_csv(&rows).as_bytes(), &s, "t").unwrap();
    assert_eq!((rep.total_rows, rep.loaded_rows, rep.missing_cells), (3, 3, 1));
    assert_eq!(rep.missing_by_column.get(BMI), Some(&1));
    assert_eq!(d.get(1, s.index_of(BMI).unwrap()), None);
    let (complete, dropped) = complete_cases(&d);
    assert_eq!((complete.n_rows(), dropped), (2, 1));
}

#[test]
fn unknown_labels_reject_the_row_with_its_line() {
    let s = reference_schema();
    let rows = vec![vec![Some(0); s.len()]; 2];
    let text = reference_csv(&rows);
    // first data row is line 2
    let diab = s.index_of(DIABETES).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(lines[1].as_bytes());
    let mut cells: Vec<String> = rdr.records().next().unwrap().unwrap().iter().map(String::from).collect();
    cells[diab] = "maybe".into();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&cells).unwrap();
    lines[1] = String::from_utf8(w.into_inner().unwrap()).unwrap().trim_end().to_owned();
    let (d, rep) = load_dataset(lines.join("\n").as_bytes(), &s, "t").unwrap();
    assert_eq!(d.n_rows(), 1);
    assert_eq!(rep.rejected.len(), 1);
    let r = &rep.rejected[0];
    assert_eq!((r.line, r.column.as_str(), r.value.as_str()), (2, DIABETES, "maybe"));
}

#[test]
fn header_problems_are_errors() {
    let s = reference_schema();
    let text = reference_csv(&[]);
    let no_year = text.replace(",year", "");
    assert!(matches!(load_dataset(no_year.as_bytes(), &s, "t"), Err(Error::Csv { line: 1, .. })));
    let extra = text.replace(",year", ",year,v_unknown");
    assert!(matches!(load_dataset(extra.as_bytes(), &s, "t"), Err(Error::Csv { line: 1, .. })));
}

#[test]
fn csv_round_trip_preserves_rows_and_years() {
    let net = demo::demo_network();
    let mut d = forward_sample(&net, 200, 3).with_year(2013);
    let mut row = d.row(0);
    row[2] = None;
    d.push_row(&row, 2015).unwrap();
    let mut buf = Vec::new();
    save_dataset(&mut buf, &d).unwrap();
    let (back, rep) = load_dataset(buf.as_slice(), net.schema(), d.id()).unwrap();
    assert_eq!(rep.loaded_rows, d.n_rows());
    assert_eq!(back, d);
}

#[test]
fn outlier_screening_uses_the_batch_statistics() {
    let mut rs: Vec<RawRecord> = (0..200)
        .map(|i| RawRecord {
            weight_kg: Some(60.0 + (i % 21) as f64),
            height_cm: Some(170.0),
            ..Default::default()
        })
        .collect();
    rs.push(RawRecord {
        weight_kg: Some(342.0),
        height_cm: Some(170.0),
        ..Default::default()
    });
    let (kept, rep) = clean_continuous(&rs, &[ContinuousField::Weight, ContinuousField::Height]);
    assert_eq!(kept.len(), 200);
    assert_eq!(rep.per_field["weight"], 1);
    // a constant field has σ = 0 and excludes nothing
    assert_eq!(rep.per_field["height"], 0);
    assert_eq!(rep.stats["height"].std_dev, 0.0);
}

#[test]
fn coding_a_typical_record() {
    let r = RawRecord {
        weight_kg: Some(72.0),
        height_cm: Some(170.0),
        glycemia: Some(125.0),
        sleep_hours: Some(6.0),
        age_years: Some(50.0),
        sex: Some("Woman".into()),
        ses_score: Some(0.5),
        ..Default::default()
    };
    let row = discretize(&r, &SesBinning::new(0.0, 1.0).unwrap()).unwrap();
    let s = reference_schema();
    let label = |v: &str| {
        let i = s.index_of(v).unwrap();
        row[i].map(|st| s.variable(i).states()[st].clone())
    };
    assert_eq!(label(BMI).as_deref(), Some("normal"));
    assert_eq!(label(DIABETES).as_deref(), Some("yes"));
    assert_eq!(label(SD).as_deref(), Some("normal"));
    assert_eq!(label(AGE).as_deref(), Some("(44,54]"));
    assert_eq!(label(SEX).as_deref(), Some("female"));
    assert_eq!(label(CRC), None);
}

#[test]
fn raw_csv_is_prepared_end_to_end() {
    let text = "height_cm,weight_kg,sleep_hours,age_years,ses_score,sex,crc,year\n\
                170,72,7,30,1.0,male,false,2012\n\
                160,50,5,40,2.0,female,true,2012\n\
                180,90,10,70,3.0,male,false,2013\n";
    let recs = read_raw_records(text.as_bytes()).unwrap();
    assert_eq!(recs.len(), 3);
    let (d, rep) = prepare_records(&recs, &[], None, "raw").unwrap();
    assert_eq!(d.n_rows(), 2);
    assert_eq!(rep.rejected.len(), 1);
    assert!(rep.rejected[0].1.contains("age"));
    let b = rep.ses_binning.unwrap();
    assert!(b.low < 2.0 && 2.0 < b.high);
}

fn fitted() -> ParameterPosterior {
    let net = random_network_seeded(21, 5, 3, 2);
    let d = forward_sample(&net, 500, 21);
    let prior = build_prior(net.schema(), &d.marginals(), 3.0).unwrap();
    ParameterPosterior::from_prior(net.schema().clone(), net.dag().clone(), &prior)
        .unwrap()
        .fit(&d)
        .unwrap()
}

#[test]
fn model_documents_round_trip_exactly() {
    let post = fitted();
    let text = save_model(&post).unwrap();
    let back = load_model(&text).unwrap();
    assert_eq!(back, post);
    assert_eq!(save_model(&back).unwrap(), text);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["checksum"].as_str().unwrap(), model_checksum(&post).unwrap());
}

#[test]
fn tampered_documents_fail_the_checksum() {
    let text = save_model(&fitted()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["model"]["alpha"] = serde_json::json!(4.0);
    assert!(matches!(load_model(&doc.to_string()), Err(Error::Checksum { .. })));
}

#[test]
fn later_minor_versions_with_extra_fields_load() {
    let post = fitted();
    let mut doc: serde_json::Value = serde_json::from_str(&save_model(&post).unwrap()).unwrap();
    doc["format_version"] = "1.3".into();
    doc["model"]["notes"] = "added by a newer writer".into();
    doc["checksum"] = riskbn_core::io::content_checksum(&doc["model"]).unwrap().into();
    assert_eq!(load_model(&doc.to_string()).unwrap(), post);

    doc["format_version"] = "2.0".into();
    assert!(matches!(load_model(&doc.to_string()), Err(Error::Version { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn saved_models_reload_with_identical_predictions(seed in any::<u64>()) {
        let net = random_network_seeded(seed, 4, 3, 2);
        let d = forward_sample(&net, 100, seed);
        let prior = build_prior(net.schema(), &d.marginals(), 2.0).unwrap();
        let post = ParameterPosterior::from_prior(net.schema().clone(), net.dag().clone(), &prior)
            .unwrap()
            .fit(&d)
            .unwrap();
        let back = load_model(&save_model(&post).unwrap()).unwrap();
        prop_assert_eq!(back.posterior_mean_network(), post.posterior_mean_network());
    }
}
