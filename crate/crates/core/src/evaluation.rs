//! The network as a classifier: scoring, thresholds, AUC and calibration.
//!
//! A row is predicted positive when `score ≥ threshold`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::query;
use crate::model::{BayesianNetwork, Evidence};

pub const METRICS_FORMAT_VERSION: &str = "1.0";

/// Relative slack when comparing G-means of candidate thresholds.
const GMEAN_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPredictions {
    pub labels: Vec<bool>,
    pub scores: Vec<f64>,
    /// Source row indices, parallel to `labels`/`scores`.
    pub rows: Vec<usize>,
    /// Rows whose evidence has probability 0 under the network.
    pub excluded_impossible: Vec<usize>,
    /// Rows without an observed target value.
    pub excluded_unlabelled: Vec<usize>,
}

impl ScoredPredictions {
    pub fn new(labels: Vec<bool>, scores: Vec<f64>) -> Result<Self> {
        if labels.len() != scores.len() {
            return Err(Error::contract("labels and scores differ in length"));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::contract(format!("score {s} is outside [0, 1]")));
        }
        let rows = (0..labels.len()).collect();
        Ok(Self {
            labels,
            scores,
            rows,
            excluded_impossible: Vec::new(),
            excluded_unlabelled: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    fn require_both_classes(&self) -> Result<()> {
        let p = self.positives();
        if p == 0 || p == self.len() {
            return Err(Error::DegenerateLabels);
        }
        Ok(())
    }
}

/// `score = p(target = state | every other column of the row)`.
pub fn score_dataset(
    net: &BayesianNetwork,
    data: &Dataset,
    target: usize,
    target_state: usize,
) -> Result<ScoredPredictions> {
    let schema = net.schema();
    if data.schema() != schema {
        return Err(Error::SchemaMismatch("dataset does not use the network's schema".into()));
    }
    if target >= schema.len() || target_state >= schema.cardinality(target) {
        return Err(Error::contract("scoring target is out of range"));
    }
    for v in (0..schema.len()).filter(|&v| v != target) {
        if data.missing_in(v) > 0 {
            return Err(Error::IncompleteData {
                node: schema.name(target).to_owned(),
                column: schema.name(v).to_owned(),
            });
        }
    }

    // rows with identical evidence share one query
    let mut groups: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut keys: Vec<Vec<usize>> = Vec::new();
    let mut row_key = Vec::with_capacity(data.n_rows());
    for r in 0..data.n_rows() {
        let key: Vec<usize> = (0..schema.len())
            .filter(|&v| v != target)
            .map(|v| data.get(r, v).expect("checked complete"))
            .collect();
        let id = *groups.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            keys.len() - 1
        });
        row_key.push(id);
    }
    let others: Vec<usize> = (0..schema.len()).filter(|&v| v != target).collect();
    let answers: Vec<Option<f64>> = keys
        .par_iter()
        .map(|key| {
            let ev: Evidence = others.iter().copied().zip(key.iter().copied()).collect();
            match query(net, &ev, target) {
                Ok(r) => Ok(Some(r.distribution[target_state].clamp(0.0, 1.0))),
                Err(Error::ImpossibleEvidence) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut out = ScoredPredictions {
        labels: Vec::new(),
        scores: Vec::new(),
        rows: Vec::new(),
        excluded_impossible: Vec::new(),
        excluded_unlabelled: Vec::new(),
    };
    for (r, &k) in row_key.iter().enumerate() {
        let Some(label) = data.get(r, target) else {
            out.excluded_unlabelled.push(r);
            continue;
        };
        match answers[k] {
            Some(s) => {
                out.labels.push(label == target_state);
                out.scores.push(s);
                out.rows.push(r);
            }
            None => out.excluded_impossible.push(r),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        Self { tn, fp, fn_, tp }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    /// `tp / (tp + fn)`; 0 when there are no positives.
    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `tn / (tn + fp)`; 0 when there are no negatives.
    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn g_mean(&self) -> f64 {
        (self.sensitivity() * self.specificity()).sqrt()
    }
}

pub fn confusion_at(preds: &ScoredPredictions, threshold: f64) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::new(0, 0, 0, 0);
    for (&l, &s) in preds.labels.iter().zip(&preds.scores) {
        match (l, s >= threshold) {
            (true, true) => m.tp += 1,
            (true, false) => m.fn_ += 1,
            (false, true) => m.fp += 1,
            (false, false) => m.tn += 1,
        }
    }
    m
}

/// `{0, 1}` plus midpoints between consecutive distinct scores, ascending.
pub fn candidate_thresholds(preds: &ScoredPredictions) -> Vec<f64> {
    let mut s = preds.scores.clone();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut out = vec![0.0];
    out.extend(s.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(1.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub g_mean: f64,
    /// Every candidate has G-mean 0; the threshold carries no information.
    pub degenerate: bool,
}

/// Candidate threshold with the largest G-mean; ties go to the higher
/// specificity.
pub fn select_threshold_gmean(preds: &ScoredPredictions) -> Result<ThresholdChoice> {
    preds.require_both_classes()?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds.scores[a].total_cmp(&preds.scores[b]));
    let total_pos = preds.positives() as u64;
    let total_neg = preds.len() as u64 - total_pos;

    let mut best: Option<ThresholdChoice> = None;
    let mut below = 0usize; // rows with score < threshold
    let (mut neg_below, mut pos_below) = (0u64, 0u64);
    for t in candidate_thresholds(preds) {
        while below < order.len() && preds.scores[order[below]] < t {
            if preds.labels[order[below]] {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            below += 1;
        }
        let m = ConfusionMatrix::new(neg_below, total_neg - neg_below, pos_below, total_pos - pos_below);
        let g = m.g_mean();
        let better = match &best {
            None => true,
            Some(b) => {
                let tol = GMEAN_TIE * b.g_mean.max(g).max(1.0);
                g > b.g_mean + tol
                    || ((g - b.g_mean).abs() <= tol && m.specificity() > b.confusion.specificity())
            }
        };
        if better {
            best = Some(ThresholdChoice {
                threshold: t,
                confusion: m,
                g_mean: g,
                degenerate: false,
            });
        }
    }
    let mut best = best.expect("at least two candidates");
    best.degenerate = best.g_mean == 0.0;
    Ok(best)
}

/// Mann–Whitney AUC with average ranks for ties.
pub fn auc(preds: &ScoredPredictions) -> Result<f64> {
    preds.require_both_classes()?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds.scores[a].total_cmp(&preds.scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && preds.scores[order[j + 1]] == preds.scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if preds.labels[k] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let n_pos = preds.positives() as f64;
    let n_neg = preds.len() as f64 - n_pos;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_score: f64,
    pub positive_rate: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub bins: Vec<CalibrationBin>,
}

/// Equal-count bins over rows sorted by score; the first `n % n_bins` bins
/// take one extra row.
pub fn calibration_curve(preds: &ScoredPredictions, n_bins: usize) -> Result<CalibrationCurve> {
    let n = preds.len();
    if n_bins < 2 || n_bins > n {
        return Err(Error::contract(format!(
            "need 2 ≤ n_bins ≤ {n} rows, got {n_bins}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| preds.scores[a].total_cmp(&preds.scores[b]).then(a.cmp(&b)));
    let (base, rem) = (n / n_bins, n % n_bins);
    let mut bins = Vec::with_capacity(n_bins);
    let mut start = 0;
    for b in 0..n_bins {
        let len = base + usize::from(b < rem);
        let idx = &order[start..start + len];
        let s: f64 = idx.iter().map(|&i| preds.scores[i]).sum();
        let pos = idx.iter().filter(|&&i| preds.labels[i]).count();
        bins.push(CalibrationBin {
            mean_score: s / len as f64,
            positive_rate: pos as f64 / len as f64,
            count: len,
        });
        start += len;
    }
    Ok(CalibrationCurve { bins })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    /// Chosen by G-mean on the evaluated rows themselves.
    Validation,
    /// Chosen by G-mean on a separate training set.
    Train,
    /// Supplied by the caller.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: String,
    pub target: String,
    pub target_state: String,
    pub threshold: f64,
    pub threshold_source: ThresholdSource,
    pub degenerate_threshold: bool,
    pub confusion: ConfusionMatrix,
    pub sensitivity: f64,
    pub specificity: f64,
    pub g_mean: f64,
    pub auc: f64,
    pub calibration: CalibrationCurve,
    pub n_scored: usize,
    pub n_positive: usize,
    pub excluded_impossible: usize,
    pub excluded_unlabelled: usize,
}

impl MetricsReport {
    /// Assembles the report for `preds` at `threshold`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        target: &str,
        target_state: &str,
        preds: &ScoredPredictions,
        threshold: f64,
        source: ThresholdSource,
        degenerate: bool,
        n_bins: usize,
    ) -> Result<Self> {
        let confusion = confusion_at(preds, threshold);
        Ok(Self {
            format_version: METRICS_FORMAT_VERSION.to_owned(),
            target: target.to_owned(),
            target_state: target_state.to_owned(),
            threshold,
            threshold_source: source,
            degenerate_threshold: degenerate,
            confusion,
            sensitivity: confusion.sensitivity(),
            specificity: confusion.specificity(),
            g_mean: confusion.g_mean(),
            auc: auc(preds)?,
            calibration: calibration_curve(preds, n_bins.min(preds.len()).max(2))?,
            n_scored: preds.len(),
            n_positive: preds.positives(),
            excluded_impossible: preds.excluded_impossible.len(),
            excluded_unlabelled: preds.excluded_unlabelled.len(),
        })
    }

    pub fn to_text(&self) -> String {
        let c = &self.confusion;
        let mut s = String::new();
        let _ = writeln!(s, "target            {}={}", self.target, self.target_state);
        let _ = writeln!(
            s,
            "threshold         {:.6} ({:?}{})",
            self.threshold,
            self.threshold_source,
            if self.degenerate_threshold { ", degenerate" } else { "" }
        );
        let _ = writeln!(s, "rows scored       {} ({} positive)", self.n_scored, self.n_positive);
        if self.excluded_impossible + self.excluded_unlabelled > 0 {
            let _ = writeln!(
                s,
                "rows excluded     {} impossible evidence, {} unlabelled",
                self.excluded_impossible, self.excluded_unlabelled
            );
        }
        let _ = writeln!(s, "                  pred -      pred +");
        let _ = writeln!(s, "actual -      {:>10}  {:>10}", c.tn, c.fp);
        let _ = writeln!(s, "actual +      {:>10}  {:>10}", c.fn_, c.tp);
        let _ = writeln!(s, "sensitivity       {:.4}", self.sensitivity);
        let _ = writeln!(s, "specificity       {:.4}", self.specificity);
        let _ = writeln!(s, "g-mean            {:.4}", self.g_mean);
        let _ = writeln!(s, "auc               {:.4}", self.auc);
        let _ = writeln!(s, "calibration (mean score / positive rate / count)");
        for b in &self.calibration.bins {
            let _ = writeln!(s, "  {:.6}  {:.6}  {}", b.mean_score, b.positive_rate, b.count);
        }
        s
    }
}

/// Rows before `year` and rows from `year` on.
pub fn split_holdout(data: &Dataset, year: i32) -> (Dataset, Dataset) {
    let train = data.filter(|r| data.year(r) < year).with_id(format!("{}[<{year}]", data.id()));
    let test = data.filter(|r| data.year(r) >= year).with_id(format!("{}[>={year}]", data.id()));
    (train, test)
}
