//! Dataset synthesis and per-recording extraction.

use std::path::Path;

use brainfeat_core::dataset::{
    aggregate_median, covariance_labels, covariance_row, crop_row_id, FeatureMatrix, RowInfo,
};
use brainfeat_core::edf::{encode_edf, parse_edf, EdfEncodeOptions};
use brainfeat_core::features::extract::FeatureExtractor;
use brainfeat_core::features::FeatureRow;
use brainfeat_core::models::ModelKind;
use brainfeat_core::preprocess::{crop_layout, preprocess, PreprocessError};
use brainfeat_core::recording::{normalize_channel_label, ClassLabel, PatientMeta, Recording, Split};
use brainfeat_core::riemann::{crop_covariance, euclidean_mean, geometric_mean, MeanKind};
use brainfeat_core::synth::{generate_recording, patient_field, plan_dataset};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::Error;
use crate::manifest::{Manifest, ManifestEntry};

pub const FEATURES_FILE: &str = "features.csv";
pub const CROPS_FILE: &str = "features_crops.csv";
pub const RIEMANN_GEO_FILE: &str = "riemann_geometric.csv";
pub const RIEMANN_EUCLID_FILE: &str = "riemann_euclidean.csv";

/// Matrix file a model kind trains on.
pub fn matrix_file(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Rf | ModelKind::Svm => FEATURES_FILE,
        ModelKind::Riemann {
            mean: MeanKind::Geometric,
            ..
        } => RIEMANN_GEO_FILE,
        ModelKind::Riemann {
            mean: MeanKind::Euclidean,
            ..
        } => RIEMANN_EUCLID_FILE,
    }
}

/// Runs `f` on a dedicated pool; `None` lets rayon pick the size.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Writes `edf/<id>.edf` for every synthetic recording and returns the
/// manifest entries, paths relative to `out`.
pub fn write_synth_dataset(cfg: &PipelineConfig, out: &Path) -> Result<Vec<ManifestEntry>, Error> {
    let plan = plan_dataset(&cfg.synth, cfg.seed)?;
    let edf_dir = out.join("edf");
    std::fs::create_dir_all(&edf_dir).map_err(|e| Error::io(&edf_dir, e))?;
    plan.par_iter()
        .map(|entry| {
            let rec = generate_recording(entry, &cfg.synth);
            let opts = EdfEncodeOptions {
                patient_id: patient_field(&entry.meta),
                recording_id: format!("Startdate 01-JAN-2015 {} X X", entry.id),
                ..EdfEncodeOptions::default()
            };
            let bytes = encode_edf(&rec, &opts).map_err(|source| Error::Edf {
                id: entry.id.clone(),
                source,
            })?;
            let rel = format!("edf/{}.edf", entry.id);
            let path = out.join(&rel);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            Ok(ManifestEntry {
                path: rel,
                label: entry.label,
                split: entry.split,
                order_index: entry.order_index as i64,
            })
        })
        .collect()
}

/// A recording left out of the feature matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub recording_id: String,
    pub path: String,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub n_listed: usize,
    pub n_extracted: usize,
    pub n_excluded: usize,
    pub n_features: usize,
    pub n_riemann_features: usize,
    pub crops_total: usize,
    pub crops_kept: usize,
    pub missing_cells: usize,
    pub target_fs_hz: f64,
    pub crop_len_samples: usize,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// Per-recording median features, plus demographics when configured.
    pub features: FeatureMatrix,
    /// One row per kept crop when time-resolved output is enabled.
    pub crops: Option<FeatureMatrix>,
    pub riemann_geo: FeatureMatrix,
    pub riemann_euclid: FeatureMatrix,
    pub meta: Vec<PatientMeta>,
    pub excluded: Vec<Excluded>,
    pub summary: ExtractionSummary,
}

/// One recording's input to [`extract_recordings`].
#[derive(Debug, Clone)]
pub struct Source {
    pub id: String,
    pub path: String,
    pub label: ClassLabel,
    pub split: Split,
}

struct RecordingOutput {
    id: String,
    label: ClassLabel,
    split: Split,
    meta: PatientMeta,
    values: Vec<f64>,
    missing: Vec<bool>,
    crop_rows: Vec<(usize, FeatureRow)>,
    geo: Vec<f64>,
    euclid: Vec<f64>,
    crops_total: usize,
    crops_kept: usize,
}

enum Outcome {
    Done(Box<RecordingOutput>),
    Skipped(Excluded),
}

fn extractor_channels(cfg: &PipelineConfig) -> Vec<String> {
    cfg.preprocess
        .channel_subset
        .iter()
        .map(|c| normalize_channel_label(c))
        .collect()
}

fn process(
    src: &Source,
    mut rec: Recording,
    cfg: &PipelineConfig,
    extractor: &FeatureExtractor,
) -> Result<Outcome, Error> {
    rec.id = src.id.clone();
    rec.label = Some(src.label);
    rec.split = Some(src.split);
    let skip = |e: &PreprocessError| {
        Outcome::Skipped(Excluded {
            recording_id: src.id.clone(),
            path: src.path.clone(),
            reason: match e {
                PreprocessError::TooShort { .. } => "too_short",
                PreprocessError::NoCropsRemaining => "no_crops_remaining",
                _ => "missing_channel",
            }
            .into(),
            detail: e.to_string(),
        })
    };
    let pre = match preprocess(&rec, &cfg.preprocess) {
        Ok(p) => p,
        Err(e @ (PreprocessError::TooShort { .. } | PreprocessError::MissingChannel(_))) => return Ok(skip(&e)),
        Err(e) => return Err(e.into()),
    };
    let layout = crop_layout(&pre, &cfg.preprocess);
    if layout.n_kept() == 0 {
        return Ok(skip(&PreprocessError::NoCropsRemaining));
    }
    let feats = extractor.extract(&pre, &layout)?;
    let (values, missing) = aggregate_median(&feats.rows)?;
    let len = layout.crop_len;
    let covs: Vec<_> = layout
        .kept_starts()
        .map(|s| {
            let crop: Vec<&[f64]> = pre.data.iter().map(|c| &c[s..s + len]).collect();
            crop_covariance(&crop, cfg.dataset.covariance_ridge)
        })
        .collect();
    let geo = covariance_row(&geometric_mean(&covs, &cfg.models.karcher)?).0;
    let euclid = covariance_row(&euclidean_mean(&covs)?).0;
    let crop_rows = if cfg.dataset.time_resolved {
        layout.kept_starts().map(|s| s / len).zip(feats.rows).collect()
    } else {
        Vec::new()
    };
    Ok(Outcome::Done(Box::new(RecordingOutput {
        id: src.id.clone(),
        label: src.label,
        split: src.split,
        meta: pre.meta,
        values,
        missing,
        crop_rows,
        geo,
        euclid,
        crops_total: layout.n_raw(),
        crops_kept: layout.n_kept(),
    })))
}

/// Extracts every source, loading recordings through `load`.
///
/// Runs on the current rayon pool; the result does not depend on its size.
pub fn extract_recordings<L>(sources: &[Source], cfg: &PipelineConfig, load: L) -> Result<Extraction, Error>
where
    L: Fn(&Source) -> Result<Recording, Error> + Sync,
{
    let channels = extractor_channels(cfg);
    let extractor = FeatureExtractor::new(
        &cfg.features,
        cfg.preprocess.target_fs_hz,
        cfg.preprocess.crop_len_samples,
        &channels,
    )?;
    let outcomes: Vec<Outcome> = sources
        .par_iter()
        .map(|src| process(src, load(src)?, cfg, &extractor))
        .collect::<Result<_, Error>>()?;

    let labels = extractor.labels().to_vec();
    let mut features = FeatureMatrix::empty(labels.clone());
    let mut crops = FeatureMatrix::empty(labels);
    let mut riemann_geo = FeatureMatrix::empty(covariance_labels("geo", &channels));
    let mut riemann_euclid = FeatureMatrix::empty(covariance_labels("euclid", &channels));
    let mut meta = Vec::new();
    let mut excluded = Vec::new();
    let (mut crops_total, mut crops_kept) = (0, 0);
    for o in outcomes {
        let r = match o {
            Outcome::Done(r) => r,
            Outcome::Skipped(x) => {
                excluded.push(x);
                continue;
            }
        };
        let info = |id: String| RowInfo {
            id,
            label: Some(r.label),
            split: Some(r.split),
        };
        crops_total += r.crops_total;
        crops_kept += r.crops_kept;
        for (c, row) in &r.crop_rows {
            let missing = row.valid.iter().map(|v| !v).collect();
            crops.push_row(info(crop_row_id(&r.id, *c)), row.values.clone(), missing)?;
        }
        let n_cov = r.geo.len();
        features.push_row(info(r.id.clone()), r.values, r.missing)?;
        riemann_geo.push_row(info(r.id.clone()), r.geo, vec![false; n_cov])?;
        riemann_euclid.push_row(info(r.id.clone()), r.euclid, vec![false; n_cov])?;
        meta.push(r.meta);
    }
    if cfg.dataset.append_meta {
        features = features.append_meta(&meta);
    }
    let summary = ExtractionSummary {
        n_listed: sources.len(),
        n_extracted: features.n_rows(),
        n_excluded: excluded.len(),
        n_features: features.n_cols(),
        n_riemann_features: riemann_geo.n_cols(),
        crops_total,
        crops_kept,
        missing_cells: features.n_missing(),
        target_fs_hz: cfg.preprocess.target_fs_hz,
        crop_len_samples: cfg.preprocess.crop_len_samples,
    };
    Ok(Extraction {
        features,
        crops: cfg.dataset.time_resolved.then_some(crops),
        riemann_geo,
        riemann_euclid,
        meta,
        excluded,
        summary,
    })
}

pub fn read_recording(path: &Path, id: &str) -> Result<Recording, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_edf(&bytes).map_err(|source| Error::Edf {
        id: id.to_string(),
        source,
    })
}

pub fn manifest_sources(m: &Manifest) -> Vec<Source> {
    m.entries
        .iter()
        .map(|e| Source {
            id: Manifest::recording_id(e),
            path: m.resolve(e).to_string_lossy().into_owned(),
            label: e.label,
            split: e.split,
        })
        .collect()
}

/// Extracts every recording listed in a manifest.
pub fn extract_manifest(m: &Manifest, cfg: &PipelineConfig) -> Result<Extraction, Error> {
    let sources = manifest_sources(m);
    let mut ids: Vec<&str> = sources.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Data(format!(
            "two manifest entries share the recording id `{}`",
            w[0]
        )));
    }
    extract_recordings(&sources, cfg, |s| read_recording(Path::new(&s.path), &s.id))
}
