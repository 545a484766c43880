//! Per-recording feature extraction over all enabled domains.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::connectivity::{channel_pairs, plv_features, ConnectivityConfig};
use super::spectral::{SpectralConfig, SpectralExtractor, FT_FEATURE_NAMES, WAVELET_FEATURE_NAMES};
use super::time::{time_features, TimeFeatureConfig, TIME_FEATURE_NAMES};
use super::{Domain, FeatureError, FeatureLabel, FeatureRow};
use crate::preprocess::CropLayout;
use crate::recording::Recording;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSet {
    pub time: bool,
    pub ft: bool,
    pub cwt: bool,
    pub dwt: bool,
    pub conn: bool,
}

impl Default for DomainSet {
    fn default() -> Self {
        Self {
            time: true,
            ft: true,
            cwt: true,
            dwt: true,
            conn: true,
        }
    }
}

impl DomainSet {
    pub fn none() -> Self {
        Self {
            time: false,
            ft: false,
            cwt: false,
            dwt: false,
            conn: false,
        }
    }

    /// Parses a comma separated list such as `time,ft,conn`.
    pub fn parse(list: &str) -> Option<Self> {
        let mut set = Self::none();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match Domain::parse(item)? {
                Domain::Time => set.time = true,
                Domain::Ft => set.ft = true,
                Domain::Cwt => set.cwt = true,
                Domain::Dwt => set.dwt = true,
                Domain::Conn => set.conn = true,
                Domain::Riemann | Domain::Meta => return None,
            }
        }
        Some(set)
    }

    pub fn any(&self) -> bool {
        self.time || self.ft || self.cwt || self.dwt || self.conn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub domains: DomainSet,
    pub time: TimeFeatureConfig,
    pub spectral: SpectralConfig,
    pub connectivity: ConnectivityConfig,
}

/// Per-crop features of one recording, columns already in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct CropFeatures {
    pub rows: Vec<FeatureRow>,
}

/// Extractor bound to a channel list, sampling rate and crop length.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    channels: Vec<String>,
    spectral: SpectralExtractor,
    labels: Vec<FeatureLabel>,
    /// `order[k]` is the natural index of sorted column `k`.
    order: Vec<usize>,
}

impl FeatureExtractor {
    pub fn new(cfg: &FeatureConfig, fs: f64, crop_len: usize, channels: &[String]) -> Result<Self, FeatureError> {
        cfg.time.validate(crop_len)?;
        let spectral = SpectralExtractor::new(&cfg.spectral, fs, crop_len)?;
        let natural = natural_labels(cfg, &spectral, channels);
        let mut order: Vec<usize> = (0..natural.len()).collect();
        order.sort_by(|&a, &b| natural[a].column_cmp(&natural[b]));
        let labels = order.iter().map(|&i| natural[i].clone()).collect();
        Ok(Self {
            cfg: cfg.clone(),
            channels: channels.to_vec(),
            spectral,
            labels,
            order,
        })
    }

    pub fn labels(&self) -> &[FeatureLabel] {
        &self.labels
    }

    pub fn n_features(&self) -> usize {
        self.labels.len()
    }

    /// Features of every kept crop of a preprocessed recording.
    pub fn extract(&self, rec: &Recording, layout: &CropLayout) -> Result<CropFeatures, FeatureError> {
        if rec.channels != self.channels {
            return Err(FeatureError::Config("recording channels differ from the extractor's"));
        }
        let d = self.cfg.domains;
        let conn = if d.conn {
            Some(plv_features(
                rec,
                layout,
                &self.spectral.ft_bands,
                &self.cfg.connectivity,
            )?)
        } else {
            None
        };
        let len = layout.crop_len;
        let mut rows = Vec::with_capacity(layout.n_kept());
        for (ci, start) in layout.kept_starts().enumerate() {
            let mut nat = FeatureRow::with_capacity(self.labels.len());
            for ch in &rec.data {
                let x = &ch[start..start + len];
                if d.time {
                    let t = time_features(x, &self.cfg.time);
                    nat.values.extend_from_slice(&t.values);
                    nat.valid.extend_from_slice(&t.valid);
                }
                if d.ft {
                    for band in self.spectral.ft(x) {
                        band.into_iter().for_each(|v| nat.push(v));
                    }
                }
                if d.cwt {
                    for band in self.spectral.cwt(x) {
                        band.into_iter().for_each(|v| nat.push(v));
                    }
                }
                if d.dwt {
                    for band in self.spectral.dwt(x) {
                        band.into_iter().for_each(|v| nat.push(v));
                    }
                }
            }
            if let Some(conn) = &conn {
                nat.values.extend_from_slice(&conn[ci].values);
                nat.valid.extend_from_slice(&conn[ci].valid);
            }
            debug_assert_eq!(nat.len(), self.order.len());
            rows.push(FeatureRow {
                values: self.order.iter().map(|&i| nat.values[i]).collect(),
                valid: self.order.iter().map(|&i| nat.valid[i]).collect(),
            });
        }
        Ok(CropFeatures { rows })
    }
}

fn natural_labels(cfg: &FeatureConfig, sp: &SpectralExtractor, channels: &[String]) -> Vec<FeatureLabel> {
    let d = cfg.domains;
    let mut out = Vec::new();
    for ch in channels {
        if d.time {
            for name in TIME_FEATURE_NAMES {
                out.push(FeatureLabel::single(Domain::Time, name, None, ch));
            }
        }
        let mut banded = |on: bool, domain, bands: &[super::Band], names: &[&str]| {
            if on {
                for &b in bands {
                    for name in names {
                        out.push(FeatureLabel::single(domain, name, Some(b), ch));
                    }
                }
            }
        };
        banded(d.ft, Domain::Ft, &sp.ft_bands, &FT_FEATURE_NAMES);
        banded(d.cwt, Domain::Cwt, &sp.cwt_bands, &WAVELET_FEATURE_NAMES);
        banded(d.dwt, Domain::Dwt, &sp.dwt_bands, &WAVELET_FEATURE_NAMES);
    }
    if d.conn {
        let pairs = channel_pairs(channels.len());
        for &b in &sp.ft_bands {
            for &(i, j) in &pairs {
                out.push(FeatureLabel::pair(
                    Domain::Conn,
                    "plv",
                    Some(b),
                    &channels[i],
                    &channels[j],
                ));
            }
        }
    }
    out
}
