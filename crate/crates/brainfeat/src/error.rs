//! Errors with stable machine-readable codes.

use std::path::{Path, PathBuf};

use brainfeat_core::analysis::AnalysisError;
use brainfeat_core::dataset::DatasetError;
use brainfeat_core::edf::EdfError;
use brainfeat_core::evaluate::EvalError;
use brainfeat_core::features::FeatureError;
use brainfeat_core::models::ModelError;
use brainfeat_core::preprocess::PreprocessError;
use brainfeat_core::riemann::RiemannError;
use brainfeat_core::synth::SynthError;
use serde::Serialize;
use thiserror::Error;

use crate::manifest::ManifestError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{0}")]
    Data(String),
    #[error("{id}: {source}")]
    Edf { id: String, source: EdfError },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        Self::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        Self::Json {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) | Self::Synth(_) => "E_CONFIG",
            Self::Io { .. } => "E_IO",
            Self::Csv { .. } | Self::Json { .. } => "E_FORMAT",
            Self::Manifest(ManifestError::Io { .. }) => "E_IO",
            Self::Manifest(_) => "E_MANIFEST",
            Self::Edf { .. } => "E_EDF",
            Self::Data(_) | Self::Dataset(_) | Self::Preprocess(_) | Self::Feature(_) => "E_DATA",
            Self::Riemann(_) | Self::Model(_) | Self::Eval(_) => "E_MODEL",
            Self::Analysis(_) => "E_ANALYSIS",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "E_CONFIG" => 2,
            "E_IO" => 3,
            "E_FORMAT" | "E_MANIFEST" | "E_EDF" | "E_DATA" => 4,
            _ => 5,
        }
    }

    /// `{"error": {"code": ..., "message": ...}}`
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Inner<'a> {
            code: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Outer<'a> {
            error: Inner<'a>,
        }
        serde_json::to_string(&Outer {
            error: Inner {
                code: self.code(),
                message: self.to_string(),
            },
        })
        .unwrap_or_else(|_| format!("{{\"error\":{{\"code\":\"{}\"}}}}", self.code()))
    }
}
