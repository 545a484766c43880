//! Labeled feature matrices.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{median, ChannelRef, Domain, FeatureLabel, FeatureRow};
use crate::linalg::Matrix;
use crate::recording::{ClassLabel, Gender, PatientMeta, Split};
use crate::riemann::vectorize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("cannot aggregate an empty crop matrix")]
    EmptyMatrix,
    #[error("row {row} has {got} features, expected {expected}")]
    FeatureCountMismatch { row: usize, expected: usize, got: usize },
    #[error("feature labels differ between blocks")]
    LabelMismatch,
    #[error("no training rows")]
    NoTrainingRows,
}

/// Rows × columns of feature values with a per-cell missing mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub labels: Vec<FeatureLabel>,
    pub row_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub missing: Vec<Vec<bool>>,
    pub y: Vec<Option<ClassLabel>>,
    pub split: Vec<Option<Split>>,
}

/// Metadata attached to one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowInfo {
    pub id: String,
    pub label: Option<ClassLabel>,
    pub split: Option<Split>,
}

impl FeatureMatrix {
    pub fn empty(labels: Vec<FeatureLabel>) -> Self {
        Self {
            labels,
            row_ids: Vec::new(),
            values: Vec::new(),
            missing: Vec::new(),
            y: Vec::new(),
            split: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.labels.len()
    }

    pub fn push_row(&mut self, info: RowInfo, values: Vec<f64>, missing: Vec<bool>) -> Result<(), DatasetError> {
        let expected = self.n_cols();
        if values.len() != expected || missing.len() != expected {
            return Err(DatasetError::FeatureCountMismatch {
                row: self.n_rows(),
                expected,
                got: values.len(),
            });
        }
        self.row_ids.push(info.id);
        self.values.push(values);
        self.missing.push(missing);
        self.y.push(info.label);
        self.split.push(info.split);
        Ok(())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.to_string() == label)
    }

    pub fn rows_in_split(&self, split: Split) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.split[i] == Some(split)).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            labels: self.labels.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            values: rows.iter().map(|&i| self.values[i].clone()).collect(),
            missing: rows.iter().map(|&i| self.missing[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            split: rows.iter().map(|&i| self.split[i]).collect(),
        }
    }

    /// Keeps the columns whose labels satisfy `keep`.
    pub fn select_columns(&self, keep: impl Fn(&FeatureLabel) -> bool) -> Self {
        let cols: Vec<usize> = (0..self.n_cols()).filter(|&j| keep(&self.labels[j])).collect();
        let pick = |row: &Vec<f64>| cols.iter().map(|&j| row[j]).collect();
        Self {
            labels: cols.iter().map(|&j| self.labels[j].clone()).collect(),
            row_ids: self.row_ids.clone(),
            values: self.values.iter().map(pick).collect(),
            missing: self
                .missing
                .iter()
                .map(|row| cols.iter().map(|&j| row[j]).collect())
                .collect(),
            y: self.y.clone(),
            split: self.split.clone(),
        }
    }

    /// Class labels as booleans (`true` = pathological); unlabeled rows fail.
    pub fn targets(&self) -> Option<Vec<bool>> {
        self.y.iter().map(|l| l.map(ClassLabel::is_pathological)).collect()
    }

    pub fn n_missing(&self) -> usize {
        self.missing.iter().flatten().filter(|m| **m).count()
    }

    /// Appends age (years, −1 unknown) and gender (M=1, F=0, unknown=−1).
    pub fn append_meta(&self, meta: &[PatientMeta]) -> Self {
        let mut out = self.clone();
        out.labels.push(FeatureLabel::new(Domain::Meta, "age", None, None));
        out.labels.push(FeatureLabel::new(Domain::Meta, "gender", None, None));
        for (i, m) in meta.iter().enumerate().take(out.n_rows()) {
            let age = m.age_years.map_or(-1.0, f64::from);
            let gender = match m.gender {
                Gender::Male => 1.0,
                Gender::Female => 0.0,
                Gender::Unknown => -1.0,
            };
            out.values[i].extend([age, gender]);
            out.missing[i].extend([false, false]);
        }
        out
    }

    /// Concatenates the columns of `other`, whose rows must match.
    pub fn hstack(&self, other: &Self) -> Result<Self, DatasetError> {
        if self.row_ids != other.row_ids {
            return Err(DatasetError::LabelMismatch);
        }
        let mut out = self.clone();
        out.labels.extend(other.labels.iter().cloned());
        for (i, row) in out.values.iter_mut().enumerate() {
            row.extend_from_slice(&other.values[i]);
            out.missing[i].extend_from_slice(&other.missing[i]);
        }
        Ok(out)
    }
}

/// Columnwise median over the valid crops of one recording.
///
/// Returns `(values, missing)`; a column with no valid crop is missing.
pub fn aggregate_median(rows: &[FeatureRow]) -> Result<(Vec<f64>, Vec<bool>), DatasetError> {
    let first = rows.first().ok_or(DatasetError::EmptyMatrix)?;
    let f = first.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != f {
            return Err(DatasetError::FeatureCountMismatch {
                row: i,
                expected: f,
                got: r.len(),
            });
        }
    }
    let mut values = vec![0.0; f];
    let mut missing = vec![false; f];
    let mut col = Vec::with_capacity(rows.len());
    for j in 0..f {
        col.clear();
        col.extend(rows.iter().filter(|r| r.valid[j]).map(|r| r.values[j]));
        if col.is_empty() {
            missing[j] = true;
        } else {
            values[j] = median(&col);
        }
    }
    Ok((values, missing))
}

/// Per-column medians of the training rows used to fill missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianImputer {
    pub fill: Vec<f64>,
}

impl MedianImputer {
    pub fn fit(values: &[Vec<f64>], missing: &[Vec<bool>]) -> Result<Self, DatasetError> {
        let f = values.first().ok_or(DatasetError::NoTrainingRows)?.len();
        let fill = (0..f)
            .map(|j| {
                let col: Vec<f64> = values
                    .iter()
                    .zip(missing)
                    .filter(|(_, m)| !m[j])
                    .map(|(v, _)| v[j])
                    .collect();
                if col.is_empty() {
                    0.0
                } else {
                    median(&col)
                }
            })
            .collect();
        Ok(Self { fill })
    }

    pub fn apply(&self, values: &[Vec<f64>], missing: &[Vec<bool>]) -> Vec<Vec<f64>> {
        values
            .iter()
            .zip(missing)
            .map(|(row, m)| {
                row.iter()
                    .zip(m)
                    .zip(&self.fill)
                    .map(|((&v, &miss), &f)| if miss { f } else { v })
                    .collect()
            })
            .collect()
    }
}

/// Labels for a vectorized `E × E` covariance: diagonal entries carry one
/// channel, off-diagonal entries a pair.
pub fn covariance_labels(name: &str, channels: &[String]) -> Vec<FeatureLabel> {
    let mut out = Vec::with_capacity(channels.len() * (channels.len() + 1) / 2);
    for i in 0..channels.len() {
        for j in i..channels.len() {
            out.push(if i == j {
                FeatureLabel::single(Domain::Riemann, name, None, &channels[i])
            } else {
                FeatureLabel::pair(Domain::Riemann, name, None, &channels[i], &channels[j])
            });
        }
    }
    out
}

/// One row per recording holding its vectorized aggregate covariance.
pub fn covariance_row(cov: &Matrix) -> (Vec<f64>, Vec<bool>) {
    let v = vectorize(cov);
    let m = vec![false; v.len()];
    (v, m)
}

/// Id of row `c` of a time-resolved matrix.
pub fn crop_row_id(recording_id: &str, crop: usize) -> String {
    format!("{recording_id}#{crop}")
}

/// Column labels must be unique and parse back to themselves.
pub fn check_labels(labels: &[FeatureLabel]) -> bool {
    let mut names: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    let roundtrip = names
        .iter()
        .zip(labels)
        .all(|(s, l)| FeatureLabel::parse(s).as_ref() == Ok(l));
    names.sort();
    let n = names.len();
    names.dedup();
    roundtrip && names.len() == n
}

/// Electrodes a label refers to (none for channel-free features).
pub fn label_electrodes(label: &FeatureLabel) -> Vec<&str> {
    label.channel.as_ref().map(ChannelRef::electrodes).unwrap_or_default()
}
