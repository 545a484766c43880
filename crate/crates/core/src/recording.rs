//! Multichannel recordings and the labels attached to them.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// The 21 electrodes of the 10-20 montage used throughout, in canonical order.
pub const CANONICAL_CHANNELS: [&str; 21] = [
    "A1", "A2", "C3", "C4", "CZ", "F3", "F4", "F7", "F8", "FP1", "FP2", "FZ", "O1", "O2", "P3", "P4", "PZ", "T3", "T4",
    "T5", "T6",
];

/// Position of a normalized label in [`CANONICAL_CHANNELS`].
pub fn canonical_index(label: &str) -> Option<usize> {
    CANONICAL_CHANNELS.iter().position(|c| *c == label)
}

/// Normalizes raw EDF labels such as `"EEG FP1-REF"` to `"FP1"`.
pub fn normalize_channel_label(raw: &str) -> String {
    let mut s = raw.trim().to_ascii_uppercase();
    if let Some(rest) = s.strip_prefix("EEG ") {
        s = rest.trim_start().to_string();
    }
    for suffix in ["-REF", "-LE"] {
        if let Some(rest) = s.strip_suffix(suffix) {
            s = rest.to_string();
            break;
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassLabel {
    NonPathological,
    Pathological,
}

impl ClassLabel {
    pub fn is_pathological(self) -> bool {
        matches!(self, ClassLabel::Pathological)
    }

    pub fn from_bool(pathological: bool) -> Self {
        if pathological {
            ClassLabel::Pathological
        } else {
            ClassLabel::NonPathological
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Pathological => "pathological",
            ClassLabel::NonPathological => "non-pathological",
        }
    }

    /// Accepts the canonical names plus the aliases used by public corpora.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pathological" | "abnormal" | "patho" | "1" => Some(ClassLabel::Pathological),
            "non-pathological" | "nonpathological" | "normal" | "non_pathological" | "0" => {
                Some(ClassLabel::NonPathological)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Development,
    Evaluation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Development => "development",
            Split::Evaluation => "evaluation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "development" | "dev" | "train" => Some(Split::Development),
            "evaluation" | "eval" | "test" => Some(Split::Evaluation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gender {
    Male,
    Female,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PatientMeta {
    pub age_years: Option<u32>,
    pub gender: Gender,
}

/// Channels × samples in µV, all channels sharing one sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub sampling_rate_hz: f64,
    pub channels: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub meta: PatientMeta,
    pub label: Option<ClassLabel>,
    pub split: Option<Split>,
}

impl Recording {
    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate_hz
    }

    /// Copy with the same metadata and different signal content.
    pub fn with_data(&self, sampling_rate_hz: f64, data: Vec<Vec<f64>>) -> Self {
        Self {
            id: self.id.clone(),
            sampling_rate_hz,
            channels: self.channels.clone(),
            data,
            meta: self.meta,
            label: self.label,
            split: self.split,
        }
    }
}
