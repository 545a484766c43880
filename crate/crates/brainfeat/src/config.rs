//! Pipeline configuration: one JSON document covering every stage.

use std::path::Path;

use brainfeat_core::features::extract::FeatureConfig;
use brainfeat_core::features::Band;
use brainfeat_core::models::{ModelConfig, ModelKind, RfConfig};
use brainfeat_core::preprocess::PreprocessConfig;
use brainfeat_core::riemann::DEFAULT_RIDGE;
use brainfeat_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full forest size from the reference hyperparameter table.
    Paper,
    /// 100 trees of depth at most 20.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Adds age and gender columns to the feature matrix.
    pub append_meta: bool,
    /// Also writes one row per crop.
    pub time_resolved: bool,
    pub covariance_ridge: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            append_meta: false,
            time_resolved: false,
            covariance_ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub folds: usize,
    pub repeats: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { folds: 5, repeats: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub topomap_bands: Vec<[f64; 2]>,
    /// Substring selecting the columns of the correlation matrix.
    pub correlation_filter: String,
    pub ensemble_rounds: usize,
    /// Label given to tied votes.
    pub vote_tie_pathological: bool,
    pub ensemble_models: Vec<String>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            topomap_bands: vec![[0.0, 4.0], [4.0, 8.0], [8.0, 13.0], [13.0, 30.0]],
            correlation_filter: "FT__power__".into(),
            ensemble_rounds: 26,
            vote_tie_pathological: false,
            ensemble_models: vec!["rf".into(), "svm".into(), "rg-geo-ts".into()],
        }
    }
}

impl AnalysisConfig {
    pub fn bands(&self) -> Vec<Band> {
        self.topomap_bands.iter().map(|b| Band::new(b[0], b[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub profile: Profile,
    pub seed: u64,
    pub threads: Option<usize>,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub dataset: DatasetConfig,
    pub models: ModelConfig,
    pub evaluate: EvaluateConfig,
    pub analysis: AnalysisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::preset(Profile::Desk)
    }
}

impl PipelineConfig {
    pub fn preset(profile: Profile) -> Self {
        let rf = match profile {
            Profile::Paper => RfConfig::default(),
            Profile::Desk => RfConfig::desk(),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            profile,
            seed: 0,
            threads: None,
            synth: SynthConfig::default(),
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            dataset: DatasetConfig::default(),
            models: ModelConfig {
                rf,
                ..ModelConfig::default()
            },
            evaluate: EvaluateConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }

    /// Starts from the profile preset and overlays the JSON document.
    ///
    /// `profile` overrides the document's own `profile` key.
    pub fn from_json(doc: Option<Value>, profile: Option<Profile>) -> Result<Self, Error> {
        let doc = doc.unwrap_or(Value::Object(Default::default()));
        if !doc.is_object() {
            return Err(Error::Config("the configuration must be a JSON object".into()));
        }
        let from_doc = match doc.get("profile") {
            Some(p) => {
                Some(serde_json::from_value::<Profile>(p.clone()).map_err(|e| Error::Config(format!("profile: {e}")))?)
            }
            None => None,
        };
        let profile = profile.or(from_doc).unwrap_or(Profile::Desk);
        let mut base = serde_json::to_value(Self::preset(profile)).expect("config serializes");
        merge(&mut base, doc);
        base["profile"] = serde_json::to_value(profile).expect("profile serializes");
        let cfg: Self = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, profile: Option<Profile>) -> Result<Self, Error> {
        let doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Some(serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)
            }
            None => None,
        };
        Self::from_json(doc, profile)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return cfg(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.threads == Some(0) {
            return cfg("threads must be positive".into());
        }
        self.synth.validate()?;
        self.preprocess.validate()?;
        self.models.rf.validate()?;
        for s in [
            &self.models.svm,
            &self.models.riemann_tangent_svm,
            &self.models.riemann_raw_svm,
        ] {
            s.validate()?;
        }
        if !self.features.domains.any() {
            return cfg("at least one feature domain must be enabled".into());
        }
        if self.evaluate.folds < 2 || self.evaluate.repeats == 0 {
            return cfg("evaluate.folds must be at least 2 and repeats positive".into());
        }
        if self.dataset.covariance_ridge.is_nan() || self.dataset.covariance_ridge < 0.0 {
            return cfg("dataset.covariance_ridge must be non-negative".into());
        }
        if self.analysis.ensemble_rounds == 0
            || self
                .analysis
                .topomap_bands
                .iter()
                .any(|b| b[1].partial_cmp(&b[0]) != Some(std::cmp::Ordering::Greater))
        {
            return cfg("analysis needs positive rounds and bands with hi > lo".into());
        }
        for m in &self.analysis.ensemble_models {
            if ModelKind::parse(m).is_none() {
                return cfg(format!("unknown model `{m}`"));
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
