//! Raw health-assessment records: outlier cleaning and coding into the
//! fourteen reference variables.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::reference::*;
use crate::model::NetworkSchema;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RawRecord {
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub glycemia: Option<f64>,
    pub ldl: Option<f64>,
    pub hdl: Option<f64>,
    pub triglycerides: Option<f64>,
    pub total_cholesterol: Option<f64>,
    pub systolic: Option<f64>,
    pub diastolic: Option<f64>,
    pub sleep_hours: Option<f64>,
    pub age_years: Option<f64>,
    pub ses_score: Option<f64>,
    pub diabetes_medication: Option<bool>,
    pub cholesterol_medication: Option<bool>,
    pub hypertension_medication: Option<bool>,
    pub sex: Option<String>,
    pub smoking: Option<String>,
    pub alcohol: Option<String>,
    pub physical_activity: Option<String>,
    pub anxiety: Option<bool>,
    pub depression: Option<bool>,
    pub crc: Option<bool>,
    pub year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousField {
    Height,
    Weight,
    Glycemia,
    Ldl,
    Hdl,
    Triglycerides,
    TotalCholesterol,
    Systolic,
    Diastolic,
    Sleep,
}

impl ContinuousField {
    /// Fields screened by default: the measured, roughly symmetric ones.
    pub const DEFAULT: [ContinuousField; 10] = [
        Self::Height,
        Self::Weight,
        Self::Glycemia,
        Self::Ldl,
        Self::Hdl,
        Self::Triglycerides,
        Self::TotalCholesterol,
        Self::Systolic,
        Self::Diastolic,
        Self::Sleep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Height => "height",
            Self::Weight => "weight",
            Self::Glycemia => "glycemia",
            Self::Ldl => "ldl",
            Self::Hdl => "hdl",
            Self::Triglycerides => "triglycerides",
            Self::TotalCholesterol => "total_cholesterol",
            Self::Systolic => "systolic",
            Self::Diastolic => "diastolic",
            Self::Sleep => "sleep",
        }
    }

    pub fn get(self, r: &RawRecord) -> Option<f64> {
        match self {
            Self::Height => r.height_cm,
            Self::Weight => r.weight_kg,
            Self::Glycemia => r.glycemia,
            Self::Ldl => r.ldl,
            Self::Hdl => r.hdl,
            Self::Triglycerides => r.triglycerides,
            Self::TotalCholesterol => r.total_cholesterol,
            Self::Systolic => r.systolic,
            Self::Diastolic => r.diastolic,
            Self::Sleep => r.sleep_hours,
        }
        .filter(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub input: usize,
    pub kept: usize,
    /// Records outside the band, per field (one record may count in several).
    pub per_field: BTreeMap<String, usize>,
    pub stats: BTreeMap<String, FieldStats>,
}

/// Drops records with any screened field beyond mean ± 3σ. Statistics come
/// from the batch itself in a single pass.
pub fn clean_continuous(records: &[RawRecord], fields: &[ContinuousField]) -> (Vec<RawRecord>, ExclusionReport) {
    let mut report = ExclusionReport {
        input: records.len(),
        ..Default::default()
    };
    let mut bands = Vec::with_capacity(fields.len());
    for &f in fields {
        let xs: Vec<f64> = records.iter().filter_map(|r| f.get(r)).collect();
        let n = xs.len();
        let (mean, sd) = if n == 0 {
            (0.0, 0.0)
        } else {
            let m = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            (m, var.sqrt())
        };
        report.stats.insert(f.name().into(), FieldStats { mean, std_dev: sd, n });
        report.per_field.insert(f.name().into(), 0);
        bands.push((f, mean, sd));
    }
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        let mut ok = true;
        for &(f, mean, sd) in &bands {
            if let Some(x) = f.get(r) {
                if (x - mean).abs() > 3.0 * sd {
                    ok = false;
                    *report.per_field.get_mut(f.name()).expect("inserted above") += 1;
                }
            }
        }
        if ok {
            kept.push(r.clone());
        }
    }
    report.kept = kept.len();
    (kept, report)
}

/// SES level cut points: `score < low` → 1, `low ≤ score ≤ high` → 2,
/// `score > high` → 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SesBinning {
    pub low: f64,
    pub high: f64,
}

impl SesBinning {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low <= high) {
            return Err(Error::contract(format!("invalid SES cut points {low}, {high}")));
        }
        Ok(Self { low, high })
    }

    /// Mean ± one (population) standard deviation of the observed scores.
    pub fn from_scores(scores: impl IntoIterator<Item = f64>) -> Result<Self> {
        let xs: Vec<f64> = scores.into_iter().filter(|x| x.is_finite()).collect();
        if xs.is_empty() {
            return Err(Error::contract("no SES scores to derive cut points from"));
        }
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        Self::new(m - sd, m + sd)
    }

    pub fn level(&self, score: f64) -> usize {
        if score < self.low {
            0
        } else if score <= self.high {
            1
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizeRejection {
    pub reason: String,
}

pub fn age_group(age: f64) -> Option<usize> {
    match age {
        a if a > 24.0 && a <= 34.0 => Some(0),
        a if a > 34.0 && a <= 44.0 => Some(1),
        a if a > 44.0 && a <= 54.0 => Some(2),
        a if a > 54.0 && a <= 64.0 => Some(3),
        _ => None,
    }
}

/// WHO classes on kg/m².
pub fn bmi_class(bmi: f64) -> usize {
    if bmi < 18.5 {
        0
    } else if bmi < 25.0 {
        1
    } else if bmi < 30.0 {
        2
    } else {
        3
    }
}

/// Below 6 h short, 6–9 h (both ends included) normal, above 9 h excessive.
pub fn sleep_class(hours: f64) -> usize {
    if hours < 6.0 {
        0
    } else if hours <= 9.0 {
        1
    } else {
        2
    }
}

/// Yes if any available criterion says yes, no if at least one was assessed,
/// missing otherwise.
fn any_criterion(flags: &[Option<bool>]) -> Option<usize> {
    if flags.contains(&Some(true)) {
        Some(1)
    } else if flags.iter().any(Option::is_some) {
        Some(0)
    } else {
        None
    }
}

fn yes_no(b: Option<bool>) -> Option<usize> {
    b.map(usize::from)
}

fn label(schema: &NetworkSchema, var: &str, raw: &Option<String>, aliases: &[(&str, &str)]) -> std::result::Result<Option<usize>, DiscretizeRejection> {
    let Some(text) = raw.as_deref().map(str::trim).filter(|s| !s.is_empty()) else {
        return Ok(None);
    };
    let lower = text.to_ascii_lowercase();
    let canonical = aliases
        .iter()
        .find(|(a, _)| *a == lower)
        .map_or(lower.as_str(), |(_, c)| c);
    let v = schema.index_of(var).expect("reference variable");
    schema
        .variable(v)
        .state_index(canonical)
        .map(Some)
        .ok_or_else(|| DiscretizeRejection {
            reason: format!("`{text}` is not a valid {var} value"),
        })
}

/// Codes one record against the reference schema (missing inputs stay missing).
pub fn discretize(record: &RawRecord, ses: &SesBinning) -> std::result::Result<Vec<Option<usize>>, DiscretizeRejection> {
    let schema = reference_schema();
    let mut row = vec![None; schema.len()];
    let idx = |name: &str| schema.index_of(name).expect("reference variable");

    if let Some(age) = record.age_years {
        row[idx(AGE)] = Some(age_group(age).ok_or_else(|| DiscretizeRejection {
            reason: format!("age {age} outside (24, 64]"),
        })?);
    }
    row[idx(SEX)] = label(&schema, SEX, &record.sex, &[("f", "female"), ("woman", "female"), ("m", "male"), ("man", "male")])?;
    row[idx(SES)] = record.ses_score.filter(|x| x.is_finite()).map(|s| ses.level(s));
    row[idx(BMI)] = match (record.weight_kg, record.height_cm) {
        (Some(w), Some(h)) if h > 0.0 => Some(bmi_class(w / (h / 100.0).powi(2))),
        _ => None,
    };
    row[idx(PA)] = label(
        &schema,
        PA,
        &record.physical_activity,
        &[("1", "insufficient"), ("2", "sufficient"), ("insufficiently active", "insufficient"), ("sufficiently active", "sufficient"), ("regularly active", "sufficient")],
    )?;
    row[idx(SD)] = record.sleep_hours.filter(|x| x.is_finite()).map(sleep_class);
    row[idx(ALCOHOL)] = label(&schema, ALCOHOL, &record.alcohol, &[])?;
    row[idx(SMOKING)] = label(&schema, SMOKING, &record.smoking, &[("never", "non-smoker"), ("former", "ex-smoker"), ("current", "smoker")])?;
    row[idx(ANXIETY)] = yes_no(record.anxiety);
    row[idx(DEPRESSION)] = yes_no(record.depression);
    row[idx(DIABETES)] = any_criterion(&[
        record.diabetes_medication,
        record.glycemia.map(|g| g >= 125.0),
    ]);
    row[idx(HYPERCHOLESTEROLEMIA)] = any_criterion(&[
        record.cholesterol_medication,
        record.ldl.map(|x| x >= 130.0),
        record.hdl.map(|x| x <= 40.0),
        record.triglycerides.map(|x| x >= 150.0),
        record.total_cholesterol.map(|x| x >= 200.0),
    ]);
    row[idx(HYPERTENSION)] = any_criterion(&[
        record.hypertension_medication,
        record.systolic.map(|x| x >= 139.0),
        record.diastolic.map(|x| x >= 90.0),
    ]);
    row[idx(CRC)] = yes_no(record.crc);
    Ok(row)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub cleaning: ExclusionReport,
    pub ses_binning: Option<SesBinning>,
    /// (record index after cleaning, reason).
    pub rejected: Vec<(usize, String)>,
    pub coded_rows: usize,
}

pub fn read_raw_records<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<RawRecord>() {
        out.push(rec.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            column: None,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Cleaning then coding. SES cut points default to mean ± 1σ of the
/// cleaned batch.
pub fn prepare_records(
    records: &[RawRecord],
    fields: &[ContinuousField],
    ses: Option<SesBinning>,
    id: impl Into<String>,
) -> Result<(Dataset, PrepareReport)> {
    let (clean, cleaning) = clean_continuous(records, fields);
    let ses = match ses {
        Some(s) => Some(s),
        None => SesBinning::from_scores(clean.iter().filter_map(|r| r.ses_score)).ok(),
    };
    let binning = ses.unwrap_or(SesBinning { low: f64::NEG_INFINITY, high: f64::INFINITY });
    let mut data = Dataset::new(id, reference_schema());
    let mut rejected = Vec::new();
    for (i, r) in clean.iter().enumerate() {
        match discretize(r, &binning) {
            Ok(row) => data.push_row(&row, r.year)?,
            Err(e) => rejected.push((i, e.reason)),
        }
    }
    let coded_rows = data.n_rows();
    Ok((
        data,
        PrepareReport {
            cleaning,
            ses_binning: ses,
            rejected,
            coded_rows,
        },
    ))
}
