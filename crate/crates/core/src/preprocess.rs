//! Common preprocessing and cropping.
//!
//! The chain is channel selection → trim → resample → clip → crops. Every step
//! is a pure function of its input recording.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recording::{normalize_channel_label, Recording, CANONICAL_CHANNELS};
use crate::signal::{self, ResamplerConfig, SignalError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("channel {0} not present in recording")]
    MissingChannel(String),
    #[error("recording lasts {duration_s:.2} s, need at least {required_s:.2} s")]
    TooShort { duration_s: f64, required_s: f64 },
    #[error("no crops left after discarding saturated windows")]
    NoCropsRemaining,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub channel_subset: Vec<String>,
    pub skip_initial_s: f64,
    pub max_duration_min: f64,
    pub target_fs_hz: f64,
    pub clip_uv: f64,
    pub crop_len_samples: usize,
    /// Discard crops touching the clip value (`|x| >= clip`) rather than only
    /// those exceeding it.
    pub discard_at_limit: bool,
    pub resampler: ResamplerConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            channel_subset: CANONICAL_CHANNELS.iter().map(|c| c.to_string()).collect(),
            skip_initial_s: 60.0,
            max_duration_min: 20.0,
            target_fs_hz: 100.0,
            clip_uv: 800.0,
            crop_len_samples: 600,
            discard_at_limit: true,
            resampler: ResamplerConfig::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        let bad = |m: &str| Err(PreprocessError::Config(m.to_string()));
        if self.crop_len_samples == 0 {
            return bad("crop_len_samples must be positive");
        }
        if !(self.clip_uv > 0.0) {
            return bad("clip_uv must be positive");
        }
        if !(self.target_fs_hz > 0.0) {
            return bad("target_fs_hz must be positive");
        }
        if self.skip_initial_s < 0.0 || !(self.max_duration_min > 0.0) {
            return bad("trim window must be non-negative and non-empty");
        }
        let mut seen: Vec<&str> = self.channel_subset.iter().map(String::as_str).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("channel subset contains duplicates");
        }
        Ok(())
    }

    pub fn crop_duration_s(&self) -> f64 {
        self.crop_len_samples as f64 / self.target_fs_hz
    }
}

/// Picks `subset` (matched after label normalization) in the order given.
pub fn select_channels(rec: &Recording, subset: &[String]) -> Result<Recording, PreprocessError> {
    let normalized: Vec<String> = rec.channels.iter().map(|c| normalize_channel_label(c)).collect();
    let mut channels = Vec::with_capacity(subset.len());
    let mut data = Vec::with_capacity(subset.len());
    for want in subset {
        let want_norm = normalize_channel_label(want);
        let idx = normalized
            .iter()
            .position(|c| *c == want_norm)
            .ok_or_else(|| PreprocessError::MissingChannel(want_norm.clone()))?;
        channels.push(want_norm);
        data.push(rec.data[idx].clone());
    }
    let mut out = rec.with_data(rec.sampling_rate_hz, data);
    out.channels = channels;
    Ok(out)
}

/// Drops the first `skip_initial_s` and keeps at most `max_duration_min`.
///
/// Anything shorter than the skip plus one crop is rejected.
pub fn trim(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording, PreprocessError> {
    let fs = rec.sampling_rate_hz;
    let required_s = cfg.skip_initial_s + cfg.crop_duration_s();
    let duration_s = rec.duration_s();
    if duration_s < required_s {
        return Err(PreprocessError::TooShort { duration_s, required_s });
    }
    let start = libm::round(cfg.skip_initial_s * fs) as usize;
    let max_len = libm::round(cfg.max_duration_min * 60.0 * fs) as usize;
    let end = rec.n_samples().min(start + max_len);
    let data = rec.data.iter().map(|c| c[start..end].to_vec()).collect();
    Ok(rec.with_data(fs, data))
}

pub fn resample(rec: &Recording, target_fs: f64, cfg: &ResamplerConfig) -> Result<Recording, PreprocessError> {
    let data = rec
        .data
        .iter()
        .map(|c| signal::resample(c, rec.sampling_rate_hz, target_fs, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rec.with_data(target_fs, data))
}

pub fn clip(rec: &Recording, limit: f64) -> Recording {
    let data = rec
        .data
        .iter()
        .map(|c| c.iter().map(|&x| x.clamp(-limit, limit)).collect())
        .collect();
    rec.with_data(rec.sampling_rate_hz, data)
}

/// Full common chain: select, trim, resample, clip.
pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording, PreprocessError> {
    cfg.validate()?;
    let rec = select_channels(rec, &cfg.channel_subset)?;
    let rec = trim(&rec, cfg)?;
    let rec = resample(&rec, cfg.target_fs_hz, &cfg.resampler)?;
    Ok(clip(&rec, cfg.clip_uv))
}

/// Which non-overlapping windows of a preprocessed recording survive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropLayout {
    pub crop_len: usize,
    pub n_samples: usize,
    pub kept_mask: Vec<bool>,
}

impl CropLayout {
    pub fn n_raw(&self) -> usize {
        self.kept_mask.len()
    }

    pub fn n_kept(&self) -> usize {
        self.kept_mask.iter().filter(|k| **k).count()
    }

    /// Start sample of every kept crop.
    pub fn kept_starts(&self) -> impl Iterator<Item = usize> + '_ {
        self.kept_mask
            .iter()
            .enumerate()
            .filter(|(_, k)| **k)
            .map(move |(i, _)| i * self.crop_len)
    }
}

/// Decides which crops to keep without copying any signal.
pub fn crop_layout(rec: &Recording, cfg: &PreprocessConfig) -> CropLayout {
    let len = cfg.crop_len_samples;
    let n = rec.n_samples();
    let n_raw = n / len;
    let limit = cfg.clip_uv;
    let saturated = |x: f64| {
        if cfg.discard_at_limit {
            x.abs() >= limit
        } else {
            x.abs() > limit
        }
    };
    let kept_mask = (0..n_raw)
        .map(|i| {
            rec.data
                .iter()
                .all(|c| !c[i * len..(i + 1) * len].iter().any(|&x| saturated(x)))
        })
        .collect();
    CropLayout {
        crop_len: len,
        n_samples: n,
        kept_mask,
    }
}

/// Retained crops of one recording, each `channels × crop_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct CropSet {
    pub recording_id: String,
    pub channels: Vec<String>,
    pub crops: Vec<Vec<Vec<f64>>>,
    pub layout: CropLayout,
}

impl CropSet {
    pub fn kept_mask(&self) -> &[bool] {
        &self.layout.kept_mask
    }
}

/// Splits a preprocessed recording into consecutive crops and drops any crop
/// containing a saturated sample.
pub fn make_crops(rec: &Recording, cfg: &PreprocessConfig) -> Result<CropSet, PreprocessError> {
    let layout = crop_layout(rec, cfg);
    if layout.n_kept() == 0 {
        return Err(PreprocessError::NoCropsRemaining);
    }
    let len = layout.crop_len;
    let crops = layout
        .kept_starts()
        .map(|s| rec.data.iter().map(|c| c[s..s + len].to_vec()).collect())
        .collect();
    Ok(CropSet {
        recording_id: rec.id.clone(),
        channels: rec.channels.clone(),
        crops,
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::PatientMeta;
    use alloc::format;
    use alloc::vec;

    fn rec(channels: &[&str], fs: f64, n: usize) -> Recording {
        Recording {
            id: "r".into(),
            sampling_rate_hz: fs,
            channels: channels.iter().map(|c| c.to_string()).collect(),
            data: (0..channels.len())
                .map(|c| (0..n).map(|i| (c * 1000 + i % 100) as f64 * 0.01).collect())
                .collect(),
            meta: PatientMeta::default(),
            label: None,
            split: None,
        }
    }

    fn tuh_labels() -> Vec<String> {
        let mut v: Vec<String> = CANONICAL_CHANNELS.iter().map(|c| format!("EEG {c}-REF")).collect();
        for extra in ["EEG EKG1-REF", "EEG T1-REF", "EEG T2-REF", "PHOTIC-REF", "IBI"] {
            v.push(extra.to_string());
        }
        v
    }

    #[test]
    fn selects_canonical_order_from_larger_montage() {
        let mut labels = tuh_labels();
        labels.reverse();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let r = rec(&refs, 100.0, 10);
        let out = select_channels(&r, &PreprocessConfig::default().channel_subset).unwrap();
        assert_eq!(out.channels, CANONICAL_CHANNELS.to_vec());
        // each output row must be the input row that carried that label
        for (name, row) in out.channels.iter().zip(&out.data) {
            let idx = labels.iter().position(|l| normalize_channel_label(l) == *name).unwrap();
            assert_eq!(row, &r.data[idx]);
        }
    }

    #[test]
    fn permuted_inputs_select_identically() {
        let labels = tuh_labels();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let base = rec(&refs, 100.0, 20);
        let subset = PreprocessConfig::default().channel_subset;
        let expected = select_channels(&base, &subset).unwrap();
        for shift in [1, 5, 13] {
            let mut p = base.clone();
            p.channels.rotate_left(shift);
            p.data.rotate_left(shift);
            let got = select_channels(&p, &subset).unwrap();
            assert_eq!(got.data, expected.data);
            assert_eq!(got.channels, expected.channels);
        }
    }

    #[test]
    fn missing_channel_is_named() {
        let labels: Vec<String> = CANONICAL_CHANNELS
            .iter()
            .filter(|c| **c != "O2")
            .map(|c| c.to_string())
            .collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let err = select_channels(&rec(&refs, 100.0, 5), &PreprocessConfig::default().channel_subset).unwrap_err();
        assert_eq!(err, PreprocessError::MissingChannel("O2".into()));
    }

    #[test]
    fn trim_lengths() {
        let cfg = PreprocessConfig::default();
        let r = trim(&rec(&["A"], 100.0, 25 * 60 * 100), &cfg).unwrap();
        assert_eq!(r.n_samples(), 120_000);
        let r = trim(&rec(&["A"], 100.0, 15 * 60 * 100), &cfg).unwrap();
        assert_eq!(r.n_samples(), 84_000);
        assert!(matches!(
            trim(&rec(&["A"], 100.0, 59 * 100), &cfg),
            Err(PreprocessError::TooShort { .. })
        ));
        // 60 s plus less than one crop is still too short
        assert!(trim(&rec(&["A"], 100.0, 6500), &cfg).is_err());
        let once = trim(&rec(&["A"], 100.0, 30 * 60 * 100), &cfg).unwrap();
        assert_eq!(once.n_samples(), 120_000);
    }

    #[test]
    fn clip_values_and_idempotence() {
        let mut r = rec(&["A"], 100.0, 4);
        r.data[0] = vec![900.0, -1200.0, 12.5, -799.0];
        let c = clip(&r, 800.0);
        assert_eq!(c.data[0], vec![800.0, -800.0, 12.5, -799.0]);
        assert_eq!(clip(&c, 800.0), c);
    }

    #[test]
    fn crops_and_discard_mask() {
        let cfg = PreprocessConfig::default();
        let r = rec(&["A", "B"], 100.0, 120_000);
        assert_eq!(make_crops(&r, &cfg).unwrap().crops.len(), 200);

        let mut r = rec(&["A", "B"], 100.0, 3000 + 250);
        r.data[1][2 * 600 + 17] = 800.0;
        let cs = make_crops(&r, &cfg).unwrap();
        assert_eq!(cs.kept_mask(), &[true, true, false, true, true]);
        assert_eq!(cs.crops.len(), 4);
        assert_eq!(cs.crops[2][0], r.data[0][1800..2400].to_vec());

        let strict = PreprocessConfig {
            discard_at_limit: false,
            ..cfg.clone()
        };
        assert_eq!(make_crops(&r, &strict).unwrap().crops.len(), 5);

        let mut sat = rec(&["A"], 100.0, 1200);
        sat.data[0].iter_mut().for_each(|x| *x = 800.0);
        assert_eq!(make_crops(&sat, &cfg).unwrap_err(), PreprocessError::NoCropsRemaining);
    }

    #[test]
    fn full_chain_is_deterministic() {
        let labels: Vec<&str> = CANONICAL_CHANNELS.to_vec();
        let r = rec(&labels, 250.0, 250 * 80);
        let cfg = PreprocessConfig::default();
        let a = preprocess(&r, &cfg).unwrap();
        let b = preprocess(&r, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sampling_rate_hz, 100.0);
        assert_eq!(a.n_samples(), 2000);
        let cs = make_crops(&a, &cfg).unwrap();
        assert_eq!(cs.crops.len(), 3);
    }
}
