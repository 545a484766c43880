//! Classifiers over feature matrices: random forest, RBF SVM and the
//! covariance (Riemannian) pipeline.

pub mod forest;
pub mod svm;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{Criterion, MaxFeatures, RandomForest, RfConfig};
pub use svm::{Gamma, Svm, SvmConfig};

use crate::dataset::{DatasetError, FeatureMatrix, MedianImputer};
use crate::features::FeatureLabel;
use crate::riemann::{geometric_mean, unvectorize, KarcherConfig, MeanKind, RiemannError, TangentReference};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("training targets contain a single class")]
    SingleClass,
    #[error("no training rows")]
    EmptyTraining,
    #[error("row {0} has no class label")]
    Unlabeled(usize),
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("feature columns differ from the ones the model was trained on")]
    FeatureMismatch,
    #[error("invalid model configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

pub(crate) fn check_targets(x: &[Vec<f64>], y: &[bool]) -> Result<(), ModelError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(ModelError::EmptyTraining);
    }
    if y.iter().all(|t| *t) || y.iter().all(|t| !*t) {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

/// Per-column z-scoring with training statistics.
///
/// Zero-variance columns pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, ModelError> {
        let first = x.first().ok_or(ModelError::EmptyTraining)?;
        let n = x.len() as f64;
        let f = first.len();
        let mut mean = alloc::vec![0.0; f];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; f];
        for r in x {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| libm::sqrt(s / n)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { v })
            .collect()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply_row(r)).collect()
    }
}

type Rows = Vec<Vec<f64>>;

/// Fits on `train` and scales both matrices with the training statistics.
pub fn standardize_fit_apply(train: &[Vec<f64>], test: &[Vec<f64>]) -> Result<(Rows, Rows), ModelError> {
    let s = Standardizer::fit(train)?;
    Ok((s.apply(train), s.apply(test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ModelKind {
    Rf,
    Svm,
    /// SVM on per-recording aggregate covariances, optionally mapped to the
    /// tangent space at the training geometric mean.
    Riemann {
        mean: MeanKind,
        tangent: bool,
    },
}

impl ModelKind {
    pub const RIEMANN_VARIANTS: [ModelKind; 4] = [
        ModelKind::Riemann {
            mean: MeanKind::Geometric,
            tangent: true,
        },
        ModelKind::Riemann {
            mean: MeanKind::Geometric,
            tangent: false,
        },
        ModelKind::Riemann {
            mean: MeanKind::Euclidean,
            tangent: true,
        },
        ModelKind::Riemann {
            mean: MeanKind::Euclidean,
            tangent: false,
        },
    ];

    /// Short name such as `rf`, `svm`, `rg-geo-ts`, `rg-euclid`.
    pub fn name(&self) -> String {
        match self {
            Self::Rf => "rf".into(),
            Self::Svm => "svm".into(),
            Self::Riemann { mean, tangent } => {
                let m = match mean {
                    MeanKind::Geometric => "geo",
                    MeanKind::Euclidean => "euclid",
                };
                format!("rg-{m}{}", if *tangent { "-ts" } else { "" })
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rf" => Some(Self::Rf),
            "svm" => Some(Self::Svm),
            "rg" => Some(Self::RIEMANN_VARIANTS[0]),
            _ => Self::RIEMANN_VARIANTS.into_iter().find(|k| k.name() == s),
        }
    }

    pub fn is_riemann(&self) -> bool {
        matches!(self, Self::Riemann { .. })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub rf: RfConfig,
    pub svm: SvmConfig,
    pub riemann_tangent_svm: SvmConfig,
    pub riemann_raw_svm: SvmConfig,
    pub karcher: KarcherConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rf: RfConfig::default(),
            svm: SvmConfig::default(),
            riemann_tangent_svm: SvmConfig::tangent(),
            riemann_raw_svm: SvmConfig::raw_covariance(),
            karcher: KarcherConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Classifier {
    Forest(RandomForest),
    Svm(Svm),
}

/// A fitted model with everything needed to score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub labels: Vec<FeatureLabel>,
    pub imputer: MedianImputer,
    pub tangent: Option<TangentReference>,
    pub scaler: Standardizer,
    pub classifier: Classifier,
}

impl TrainedModel {
    pub fn fit(kind: ModelKind, cfg: &ModelConfig, train: &FeatureMatrix, seed: u64) -> Result<Self, ModelError> {
        let y = targets(train)?;
        let imputer = MedianImputer::fit(&train.values, &train.missing)?;
        let x = imputer.apply(&train.values, &train.missing);
        let tangent = match kind {
            ModelKind::Riemann { tangent: true, .. } => {
                let covs: Vec<_> = x.iter().map(|r| unvectorize(r)).collect();
                Some(TangentReference::new(geometric_mean(&covs, &cfg.karcher)?)?)
            }
            _ => None,
        };
        let x = map_rows(&tangent, x)?;
        let scaler = Standardizer::fit(&x)?;
        let x = scaler.apply(&x);
        let classifier = match kind {
            ModelKind::Rf => Classifier::Forest(RandomForest::fit(&x, &y, &cfg.rf, seed)?),
            ModelKind::Svm => Classifier::Svm(Svm::fit(&x, &y, &cfg.svm)?),
            ModelKind::Riemann { tangent, .. } => {
                let c = if tangent {
                    &cfg.riemann_tangent_svm
                } else {
                    &cfg.riemann_raw_svm
                };
                Classifier::Svm(Svm::fit(&x, &y, c)?)
            }
        };
        Ok(Self {
            kind,
            labels: train.labels.clone(),
            imputer,
            tangent,
            scaler,
            classifier,
        })
    }

    /// Probability of the pathological class per row.
    pub fn predict_proba(&self, m: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        if m.labels != self.labels {
            return Err(ModelError::FeatureMismatch);
        }
        let x = self.imputer.apply(&m.values, &m.missing);
        let x = map_rows(&self.tangent, x)?;
        let x = self.scaler.apply(&x);
        Ok(x.iter()
            .map(|r| match &self.classifier {
                Classifier::Forest(f) => f.predict_proba_row(r),
                Classifier::Svm(s) => s.predict_proba_row(r),
            })
            .collect())
    }

    /// Hard labels: pathological when the probability exceeds 0.5.
    pub fn predict(&self, m: &FeatureMatrix) -> Result<Vec<bool>, ModelError> {
        Ok(self.predict_proba(m)?.into_iter().map(|p| p > 0.5).collect())
    }

    pub fn importance(&self) -> Option<&[f64]> {
        match &self.classifier {
            Classifier::Forest(f) => Some(&f.importance),
            Classifier::Svm(_) => None,
        }
    }
}

pub fn targets(m: &FeatureMatrix) -> Result<Vec<bool>, ModelError> {
    m.y.iter()
        .enumerate()
        .map(|(i, l)| l.map(|l| l.is_pathological()).ok_or(ModelError::Unlabeled(i)))
        .collect()
}

fn map_rows(tangent: &Option<TangentReference>, x: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>, ModelError> {
    match tangent {
        None => Ok(x),
        Some(t) => x.iter().map(|r| Ok(t.map(&unvectorize(r))?)).collect(),
    }
}
