//! Result documents written by `cv`, `eval`, `analyze` and `report`.

use std::path::Path;

use brainfeat_core::analysis::{
    ensemble_proba, error_overlap, feature_correlation_matrix, greedy_ensemble_selection, importance_topomap,
    majority_vote, CorrelationMatrix, ErrorOverlap, TopomapData,
};
use brainfeat_core::dataset::FeatureMatrix;
use brainfeat_core::evaluate::{accuracy, sign_test, sign_test_counts, ConfusionMetrics, CvResult, FinalEval};
use brainfeat_core::features::{Band, FeatureLabel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::Error;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub seed: u64,
    pub row_ids: Vec<String>,
    pub truth: Vec<bool>,
    pub result: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub seed: u64,
    pub row_ids: Vec<String>,
    pub truth: Vec<bool>,
    pub result: FinalEval,
}

impl EvalReport {
    /// Hard labels of the first repeat.
    pub fn predictions(&self) -> Vec<bool> {
        self.result.proba[0].iter().map(|p| *p > 0.5).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model: String,
    pub cv_accuracy: Option<f64>,
    pub eval_mean: Option<f64>,
    pub eval_std: Option<f64>,
    pub eval_min: Option<f64>,
    pub eval_max: Option<f64>,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub model: String,
    #[serde(flatten)]
    pub metrics: ConfusionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTestRow {
    pub model_a: String,
    pub model_b: String,
    /// Rows `model_a` gets right and `model_b` wrong, ties split.
    pub n_a: usize,
    pub n_b: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub accuracies: Vec<AccuracyRow>,
    pub confusion: Vec<ConfusionRow>,
    pub sign_tests: Vec<SignTestRow>,
}

fn population_std(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Collects accuracies, confusion counts and pairwise sign tests.
///
/// Models appear in the order of `evals`, then CV-only models. Sign tests
/// compare first-repeat predictions on the evaluation set.
pub fn build_report(cvs: &[CvReport], evals: &[EvalReport]) -> Result<Report, Error> {
    let mut names: Vec<&str> = evals.iter().map(|e| e.model.as_str()).collect();
    for c in cvs {
        if !names.contains(&c.model.as_str()) {
            names.push(&c.model);
        }
    }
    let accuracies = names
        .iter()
        .map(|&name| {
            let cv = cvs.iter().find(|c| c.model == name);
            let ev = evals.iter().find(|e| e.model == name);
            let accs = ev.map(|e| e.result.accuracies.as_slice()).unwrap_or_default();
            AccuracyRow {
                model: name.to_string(),
                cv_accuracy: cv.map(|c| c.result.accuracy),
                eval_mean: ev.map(|e| e.result.mean_accuracy),
                eval_std: ev.map(|_| population_std(accs)),
                eval_min: ev.map(|_| accs.iter().copied().fold(f64::INFINITY, f64::min)),
                eval_max: ev.map(|_| accs.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                repeats: accs.len(),
            }
        })
        .collect();
    let confusion = evals
        .iter()
        .map(|e| ConfusionRow {
            model: e.model.clone(),
            metrics: e.result.confusion,
        })
        .collect();
    let mut sign_tests = Vec::new();
    for (i, a) in evals.iter().enumerate() {
        for b in &evals[i + 1..] {
            if a.row_ids != b.row_ids || a.truth != b.truth {
                return Err(Error::Data(format!(
                    "{} and {} were evaluated on different rows",
                    a.model, b.model
                )));
            }
            let (pa, pb) = (a.predictions(), b.predictions());
            let (n_a, n_b) = sign_test_counts(&pa, &pb, &a.truth)?;
            sign_tests.push(SignTestRow {
                model_a: a.model.clone(),
                model_b: b.model.clone(),
                n_a,
                n_b,
                p_value: sign_test(&pa, &pb, &a.truth)?,
            });
        }
    }
    Ok(Report {
        accuracies,
        confusion,
        sign_tests,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_report_csvs(dir: &Path, r: &Report) -> Result<(), Error> {
    let write = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<(), Error> {
        let path = dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        w.write_record(header).map_err(|e| Error::csv(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| Error::csv(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    };
    write(
        "accuracies.csv",
        &[
            "model",
            "cv_accuracy",
            "eval_mean",
            "eval_std",
            "eval_min",
            "eval_max",
            "repeats",
        ],
        r.accuracies
            .iter()
            .map(|a| {
                vec![
                    a.model.clone(),
                    opt(a.cv_accuracy),
                    opt(a.eval_mean),
                    opt(a.eval_std),
                    opt(a.eval_min),
                    opt(a.eval_max),
                    a.repeats.to_string(),
                ]
            })
            .collect(),
    )?;
    write(
        "confusion.csv",
        &[
            "model",
            "tp",
            "tn",
            "fp",
            "fn",
            "accuracy",
            "specificity",
            "sensitivity",
            "precision",
            "false_omission_rate",
        ],
        r.confusion
            .iter()
            .map(|c| {
                let m = &c.metrics;
                vec![
                    c.model.clone(),
                    m.tp.to_string(),
                    m.tn.to_string(),
                    m.fp.to_string(),
                    m.fn_.to_string(),
                    format!("{}", m.accuracy),
                    opt(m.specificity),
                    opt(m.sensitivity),
                    opt(m.precision),
                    opt(m.false_omission_rate),
                ]
            })
            .collect(),
    )?;
    write(
        "sign_tests.csv",
        &["model_a", "model_b", "n_a", "n_b", "p_value"],
        r.sign_tests
            .iter()
            .map(|s| {
                vec![
                    s.model_a.clone(),
                    s.model_b.clone(),
                    s.n_a.to_string(),
                    s.n_b.to_string(),
                    format!("{}", s.p_value),
                ]
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopomapSummary {
    pub band: Band,
    pub file_stem: String,
    pub ranking: Vec<String>,
    pub total_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub filter: String,
    pub n_columns: usize,
    pub mean_abs_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub models: Vec<String>,
    pub error_overlap: ErrorOverlap,
    pub majority_vote_accuracy: f64,
    /// Greedy selection weights fitted on cross-validation probabilities.
    pub weights: Option<Vec<f64>>,
    pub weighted_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub topomaps: Vec<TopomapSummary>,
    pub correlation: Option<CorrelationSummary>,
    pub ensemble: Option<EnsembleSummary>,
}

pub fn topomap_stem(band: Band) -> String {
    format!("topomap_{}-{}", band.lo, band.hi)
}

/// One topomap per configured band; bands without matching features are
/// skipped.
pub fn topomaps(importance: &[f64], labels: &[FeatureLabel], cfg: &AnalysisConfig) -> Result<Vec<TopomapData>, Error> {
    let mut out = Vec::new();
    for band in cfg.bands() {
        match importance_topomap(importance, labels, band) {
            Ok(t) => out.push(t),
            Err(brainfeat_core::analysis::AnalysisError::EmptySelection) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

pub fn write_topomap_csv(path: &Path, t: &TopomapData) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for e in &t.entries {
        w.serialize(e).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Spearman correlations between the columns whose label contains `filter`,
/// over the rows of `m` (missing cells median-imputed).
pub fn correlation(m: &FeatureMatrix, filter: &str) -> Result<CorrelationMatrix, Error> {
    let columns: Vec<usize> = (0..m.n_cols())
        .filter(|&j| m.labels[j].to_string().contains(filter))
        .collect();
    if columns.is_empty() {
        return Err(Error::Data(format!("no feature column matches `{filter}`")));
    }
    let imputer = brainfeat_core::dataset::MedianImputer::fit(&m.values, &m.missing)?;
    let values = imputer.apply(&m.values, &m.missing);
    Ok(feature_correlation_matrix(&values, &columns)?)
}

pub fn correlation_summary(c: &CorrelationMatrix, filter: &str) -> CorrelationSummary {
    let n = c.columns.len();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += c.rho[i][j].abs();
                count += 1;
            }
        }
    }
    CorrelationSummary {
        filter: filter.to_string(),
        n_columns: n,
        mean_abs_rho: if count > 0 { sum / count as f64 } else { 0.0 },
    }
}

pub fn write_correlation_csv(path: &Path, c: &CorrelationMatrix, labels: &[FeatureLabel]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let names: Vec<String> = c.columns.iter().map(|&j| labels[j].to_string()).collect();
    let mut header = vec![String::from("feature")];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (i, row) in c.rho.iter().enumerate() {
        let mut rec = vec![names[i].clone()];
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Error overlap, majority vote and weighted ensemble over models evaluated
/// on the same rows. `cvs`, when given, must align with `evals`.
pub fn ensemble_summary(
    evals: &[EvalReport],
    cvs: Option<&[CvReport]>,
    cfg: &AnalysisConfig,
) -> Result<EnsembleSummary, Error> {
    let first = evals
        .first()
        .ok_or_else(|| Error::Data("ensemble analysis needs at least one evaluated model".into()))?;
    if evals.iter().any(|e| e.row_ids != first.row_ids) {
        return Err(Error::Data("evaluated models disagree on the evaluation rows".into()));
    }
    let truth = &first.truth;
    let preds: Vec<Vec<bool>> = evals.iter().map(EvalReport::predictions).collect();
    let refs: Vec<&[bool]> = preds.iter().map(Vec::as_slice).collect();
    let overlap = error_overlap(&refs, truth)?;
    let vote = majority_vote(&refs, &vec![1.0; refs.len()], cfg.vote_tie_pathological);
    let (weights, weighted_accuracy) = match cvs {
        Some(cvs) => {
            let cv_truth = &cvs[0].truth;
            let cv_probs: Vec<Vec<f64>> = cvs.iter().map(|c| c.result.proba.clone()).collect();
            let w = greedy_ensemble_selection(&cv_probs, cv_truth, cfg.ensemble_rounds)?;
            let eval_probs: Vec<Vec<f64>> = evals.iter().map(|e| e.result.proba[0].clone()).collect();
            let p = ensemble_proba(&eval_probs, &w);
            let pred: Vec<bool> = p.iter().map(|v| *v > 0.5).collect();
            let acc = accuracy(&pred, truth);
            (Some(w), Some(acc))
        }
        None => (None, None),
    };
    Ok(EnsembleSummary {
        models: evals.iter().map(|e| e.model.clone()).collect(),
        error_overlap: overlap,
        majority_vote_accuracy: accuracy(&vote, truth),
        weights,
        weighted_accuracy,
    })
}
