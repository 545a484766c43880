//! Labeled synthetic EEG with planted class signatures.
//!
//! Every channel is synthesized in the frequency domain as a 1/f background
//! plus a component shared by all channels and a 10 Hz alpha source that is
//! strongest over the occipital electrodes. Pathological recordings scale the
//! 0-8 Hz content at T3/T4 by `temporal_boost` and the 8-13 Hz content at
//! O1/O2 by `occipital_alpha_atten`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::fft::FftPlan;
use crate::recording::{ClassLabel, Gender, PatientMeta, Recording, Split, CANONICAL_CHANNELS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_recordings: usize,
    pub pathological_ratio: f64,
    pub duration_s: f64,
    pub fs_hz: f64,
    /// Amplitude factor on 0-8 Hz at T3/T4 for pathological recordings.
    pub temporal_boost: f64,
    /// Amplitude factor on 8-13 Hz at O1/O2 for pathological recordings.
    pub occipital_alpha_atten: f64,
    /// Mean number of large artifacts per recording.
    pub artifact_rate: f64,
    pub artifact_uv: f64,
    pub background_std_uv: f64,
    pub alpha_std_uv: f64,
    /// Fraction of background variance shared by all channels.
    pub shared_fraction: f64,
    /// Log-normal spread of the per-recording amplitude.
    pub gain_jitter: f64,
    pub dev_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_recordings: 100,
            pathological_ratio: 0.5,
            duration_s: 480.0,
            fs_hz: 250.0,
            temporal_boost: 2.0,
            occipital_alpha_atten: 0.5,
            artifact_rate: 1.0,
            artifact_uv: 900.0,
            background_std_uv: 25.0,
            alpha_std_uv: 20.0,
            shared_fraction: 0.3,
            gain_jitter: 0.15,
            dev_fraction: 0.8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_recordings == 0 {
            return Err(SynthError::Config("n_recordings must be positive"));
        }
        if !(self.pathological_ratio > 0.0 && self.pathological_ratio < 1.0) {
            return Err(SynthError::Config("pathological_ratio must lie in (0, 1)"));
        }
        if !(self.temporal_boost > 1.0) {
            return Err(SynthError::Config("temporal_boost must exceed 1"));
        }
        if !(self.occipital_alpha_atten > 0.0 && self.occipital_alpha_atten < 1.0) {
            return Err(SynthError::Config("occipital_alpha_atten must lie in (0, 1)"));
        }
        if !(self.fs_hz > 26.0 && self.duration_s > 0.0) {
            return Err(SynthError::Config(
                "fs_hz must exceed 26 Hz and duration must be positive",
            ));
        }
        if !(self.artifact_rate >= 0.0 && (0.0..=1.0).contains(&self.shared_fraction)) {
            return Err(SynthError::Config("artifact_rate and shared_fraction out of range"));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction <= 1.0 && self.gain_jitter >= 0.0) {
            return Err(SynthError::Config("dev_fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        libm::round(self.duration_s * self.fs_hz) as usize
    }
}

/// Everything that identifies one synthetic recording before its signal is
/// generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEntry {
    pub id: String,
    pub order_index: usize,
    pub label: ClassLabel,
    pub split: Split,
    pub meta: PatientMeta,
    pub seed: u64,
}

/// Class labels, splits, demographics and per-recording seeds.
///
/// The first `dev_fraction` of recordings (by order index) form the
/// development split.
pub fn plan_dataset(cfg: &SynthConfig, seed: u64) -> Result<Vec<SynthEntry>, SynthError> {
    cfg.validate()?;
    let n = cfg.n_recordings;
    let n_path = (libm::round(n as f64 * cfg.pathological_ratio) as usize).min(n);
    let n_dev = (libm::round(n as f64 * cfg.dev_fraction) as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let mut classes: Vec<bool> = (0..n).map(|i| i < n_path).collect();
    classes.shuffle(&mut rng);
    let width = format!("{}", n.saturating_sub(1)).len().max(4);
    Ok(classes
        .into_iter()
        .enumerate()
        .map(|(i, path)| {
            let seed = derive_seed(seed, i as u64);
            SynthEntry {
                id: format!("synth_{i:0width$}"),
                order_index: i,
                label: ClassLabel::from_bool(path),
                split: if i < n_dev {
                    Split::Development
                } else {
                    Split::Evaluation
                },
                meta: draw_meta(path, seed),
                seed,
            }
        })
        .collect())
}

fn draw_meta(pathological: bool, seed: u64) -> PatientMeta {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let (mu, sd) = if pathological { (65.0, 12.0) } else { (45.0, 15.0) };
    let age = Normal::new(mu, sd).unwrap().sample(&mut rng);
    let gender = if rng.random_bool(0.5) {
        Gender::Male
    } else {
        Gender::Female
    };
    PatientMeta {
        age_years: Some(libm::round(age).clamp(1.0, 100.0) as u32),
        gender,
    }
}

fn alpha_weight(label: &str) -> f64 {
    match label {
        "O1" | "O2" => 1.0,
        "P3" | "P4" | "PZ" | "T5" | "T6" => 0.6,
        _ => 0.25,
    }
}

/// One-sided spectrum with unit total variance for a PSD shape, drawn with
/// independent complex Gaussian coefficients.
struct SpectrumShape {
    amp: Vec<f64>,
}

impl SpectrumShape {
    fn new(n: usize, fs: f64, psd: impl Fn(f64) -> f64) -> Self {
        let df = fs / n as f64;
        let half = n / 2;
        let raw: Vec<f64> = (0..=half).map(|k| psd(k as f64 * df)).collect();
        // interior bins carry the variance; DC and Nyquist are left empty
        let total: f64 = raw.iter().skip(1).take(half.saturating_sub(1)).sum();
        let norm = if total > 0.0 { 1.0 / total } else { 0.0 };
        let amp = raw.iter().map(|p| libm::sqrt(p * norm / 2.0) * n as f64).collect();
        Self { amp }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let half = self.amp.len() - 1;
        let mut out = vec![Complex64::new(0.0, 0.0); half + 1];
        for (k, o) in out.iter_mut().enumerate().take(half).skip(1) {
            let re: f64 = StandardNormal.sample(&mut *rng);
            let im: f64 = StandardNormal.sample(&mut *rng);
            *o = Complex64::new(re, im) * (self.amp[k] / core::f64::consts::SQRT_2);
        }
        out
    }
}

fn to_time(half: &[Complex64], n: usize, plan: &FftPlan) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in half.iter().enumerate() {
        if k < n {
            buf[k] = *v;
        }
        if k > 0 && n - k != k && n - k < n {
            buf[n - k] = v.conj();
        }
    }
    plan.inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// Generates the signal of one planned recording.
///
/// The signal depends only on the entry's seed, so two entries sharing a
/// seed but not a class differ exactly by the planted signatures.
pub fn generate_recording(entry: &SynthEntry, cfg: &SynthConfig) -> Recording {
    let n = cfg.n_samples();
    let fs = cfg.fs_hz;
    let df = fs / n as f64;
    let plan = FftPlan::new(n);
    let pink = SpectrumShape::new(n, fs, |f| if f < 0.5 { 0.0 } else { 1.0 / (1.0 + f) });
    let alpha = SpectrumShape::new(n, fs, |f| libm::exp(-(f - 10.0) * (f - 10.0) / 2.0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(entry.seed, 2));

    let log_gain: f64 = StandardNormal.sample(&mut rng);
    let gain = libm::exp(cfg.gain_jitter * log_gain);
    let shared = pink.draw(&mut rng);
    let alpha_src = alpha.draw(&mut rng);
    let s_own = libm::sqrt(1.0 - cfg.shared_fraction) * cfg.background_std_uv;
    let s_shared = libm::sqrt(cfg.shared_fraction) * cfg.background_std_uv;
    let pathological = entry.label.is_pathological();

    let mut data = Vec::with_capacity(CANONICAL_CHANNELS.len());
    for ch in CANONICAL_CHANNELS {
        let own = pink.draw(&mut rng);
        let jitter: f64 = StandardNormal.sample(&mut rng);
        let g_ch = gain * libm::exp(0.5 * cfg.gain_jitter * jitter);
        let w_alpha = alpha_weight(ch) * cfg.alpha_std_uv;
        let mut spec: Vec<Complex64> = (0..own.len())
            .map(|k| (own[k] * s_own + shared[k] * s_shared + alpha_src[k] * w_alpha) * g_ch)
            .collect();
        if pathological {
            for (k, v) in spec.iter_mut().enumerate() {
                let f = k as f64 * df;
                if matches!(ch, "T3" | "T4") && f < 8.0 {
                    *v *= cfg.temporal_boost;
                }
                if matches!(ch, "O1" | "O2") && (8.0..13.0).contains(&f) {
                    *v *= cfg.occipital_alpha_atten;
                }
            }
        }
        data.push(to_time(&spec, n, &plan));
    }

    // artifacts: half-sine bursts of 0.1 s on one channel
    let mut art_rng = ChaCha8Rng::seed_from_u64(derive_seed(entry.seed, 3));
    let len = ((0.1 * fs) as usize).max(1);
    let mut k = 0;
    while art_rng.random::<f64>() < cfg.artifact_rate / (1.0 + cfg.artifact_rate) && k < 16 {
        k += 1;
        let ch = art_rng.random_range(0..data.len());
        let start = art_rng.random_range(0..n.saturating_sub(len).max(1));
        let sign = if art_rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for i in 0..len.min(n - start) {
            data[ch][start + i] += sign * cfg.artifact_uv * libm::sin(PI * (i as f64 + 0.5) / len as f64);
        }
    }
    for c in &mut data {
        for v in c.iter_mut() {
            *v = v.clamp(-999.0, 999.0);
        }
    }
    Recording {
        id: entry.id.clone(),
        sampling_rate_hz: fs,
        channels: CANONICAL_CHANNELS.iter().map(|c| c.to_string()).collect(),
        data,
        meta: entry.meta,
        label: Some(entry.label),
        split: Some(entry.split),
    }
}

/// EDF patient field that carries the synthetic demographics.
pub fn patient_field(meta: &PatientMeta) -> String {
    let g = match meta.gender {
        Gender::Male => "M",
        Gender::Female => "F",
        Gender::Unknown => "X",
    };
    match meta.age_years {
        Some(a) => format!("X {g} X Age:{a}"),
        None => format!("X {g} X X"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::spectral::periodogram;
    use crate::fft::FftPlan;

    fn channel_index(label: &str) -> usize {
        crate::recording::canonical_index(label).unwrap()
    }

    fn short() -> SynthConfig {
        SynthConfig {
            n_recordings: 40,
            duration_s: 120.0,
            ..SynthConfig::default()
        }
    }

    fn band_power(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
        let w = vec![1.0; x.len()];
        let s = periodogram(x, fs, &w, &FftPlan::new(x.len()));
        s.freqs_hz
            .iter()
            .zip(&s.power)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p)
            .sum()
    }

    #[test]
    fn plan_examples() {
        let plan = plan_dataset(&SynthConfig::default(), 0).unwrap();
        assert_eq!(plan.len(), 100);
        let path = plan.iter().filter(|e| e.label.is_pathological()).count();
        assert!((49..=51).contains(&path));
        let dev = plan.iter().filter(|e| e.split == Split::Development).count();
        assert_eq!(dev, 80);
        assert!(plan[..80].iter().all(|e| e.split == Split::Development));
        assert_eq!(plan, plan_dataset(&SynthConfig::default(), 0).unwrap());
        let mean_age = |p: bool| {
            let a: Vec<f64> = plan
                .iter()
                .filter(|e| e.label.is_pathological() == p)
                .map(|e| e.meta.age_years.unwrap() as f64)
                .collect();
            a.iter().sum::<f64>() / a.len() as f64
        };
        assert!(mean_age(true) > mean_age(false) + 10.0);
        assert!(SynthConfig {
            temporal_boost: 1.0,
            ..SynthConfig::default()
        }
        .validate()
        .is_err());
        assert_eq!(patient_field(&plan[0].meta).split(' ').count(), 4);
    }

    #[test]
    fn planted_signatures() {
        let cfg = SynthConfig {
            artifact_rate: 0.0,
            ..short()
        };
        let (t4, o1) = (channel_index("T4"), channel_index("O1"));
        let (mut delta, mut alpha) = (0.0, 0.0);
        let seeds = 6;
        for s in 0..seeds {
            let mut e = plan_dataset(&cfg, 0).unwrap()[0].clone();
            e.seed = s;
            e.label = ClassLabel::Pathological;
            let p = generate_recording(&e, &cfg);
            e.label = ClassLabel::NonPathological;
            let q = generate_recording(&e, &cfg);
            delta += band_power(&p.data[t4], cfg.fs_hz, 0.0, 8.0) / band_power(&q.data[t4], cfg.fs_hz, 0.0, 8.0);
            alpha += band_power(&p.data[o1], cfg.fs_hz, 8.0, 13.0) / band_power(&q.data[o1], cfg.fs_hz, 8.0, 13.0);
            assert_eq!(p.data[channel_index("CZ")], q.data[channel_index("CZ")]);
        }
        let g2 = cfg.temporal_boost * cfg.temporal_boost;
        let a2 = cfg.occipital_alpha_atten * cfg.occipital_alpha_atten;
        assert!((delta / seeds as f64 / g2 - 1.0).abs() < 0.2);
        assert!((alpha / seeds as f64 / a2 - 1.0).abs() < 0.2);
    }

    #[test]
    fn class_ratio_across_recordings_and_separability() {
        let cfg = short();
        let plan = plan_dataset(&cfg, 0).unwrap();
        let t4 = channel_index("T4");
        let mut feats: Vec<(f64, bool)> = plan
            .iter()
            .map(|e| {
                let r = generate_recording(e, &cfg);
                (band_power(&r.data[t4], cfg.fs_hz, 0.0, 4.0), e.label.is_pathological())
            })
            .collect();
        let mean = |p: bool| {
            let v: Vec<f64> = feats.iter().filter(|f| f.1 == p).map(|f| f.0).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let ratio = mean(true) / mean(false) / 4.0;
        assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
        feats.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = feats.len();
        let best = (0..=n)
            .map(|k| {
                let below = feats[..k].iter().filter(|f| !f.1).count();
                let above = feats[k..].iter().filter(|f| f.1).count();
                below + above
            })
            .max()
            .unwrap();
        assert!(best as f64 / n as f64 >= 0.85);
    }

    #[test]
    fn deterministic_and_scaled() {
        let cfg = SynthConfig {
            duration_s: 60.0,
            artifact_rate: 5.0,
            ..SynthConfig::default()
        };
        let e = plan_dataset(&cfg, 0).unwrap()[3].clone();
        let a = generate_recording(&e, &cfg);
        assert_eq!(a, generate_recording(&e, &cfg));
        assert_eq!(a.n_samples(), 15000);
        let cz = &a.data[channel_index("CZ")];
        let rms = libm::sqrt(cz.iter().map(|v| v * v).sum::<f64>() / cz.len() as f64);
        assert!(rms > 10.0 && rms < 100.0, "{rms}");
        let peak = a.data.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak > 800.0 && peak <= 999.0);
    }
}
