//! Fourier and wavelet features over overlapped frequency bands.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{flagged, Band, FeatureError};
use crate::fft::FftPlan;
use crate::signal::blackman_harris;

pub const FT_FEATURE_NAMES: [&str; 9] = [
    "maximum",
    "mean",
    "minimum",
    "peak_frequency",
    "power",
    "power_ratio",
    "spectral_entropy",
    "value_range",
    "variance",
];

pub const WAVELET_FEATURE_NAMES: [&str; 8] = [
    "bounded_variation",
    "maximum",
    "mean",
    "minimum",
    "power",
    "power_ratio",
    "spectral_entropy",
    "variance",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandSpec {
    pub edges_hz: Vec<f64>,
    /// Fraction of a band's width shared with an equal-width neighbour.
    pub overlap: f64,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            edges_hz: vec![0.0, 2.0, 4.0, 8.0, 13.0, 18.0, 24.0, 30.0, 50.0],
            overlap: 0.5,
        }
    }
}

impl BandSpec {
    pub fn validate(&self, fs: f64) -> Result<(), FeatureError> {
        if self.edges_hz.len() < 2 || self.edges_hz.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FeatureError::Config("band edges must be strictly ascending"));
        }
        if self.edges_hz[0] < 0.0 || *self.edges_hz.last().unwrap() > fs / 2.0 {
            return Err(FeatureError::Config("band edges must lie in [0, fs/2]"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(FeatureError::Config("band overlap must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn base_bands(&self) -> Vec<Band> {
        self.edges_hz.windows(2).map(|w| Band::new(w[0], w[1])).collect()
    }

    /// Each band widened by `overlap·width/2` per side, clamped to `[0, fs/2]`.
    pub fn overlapped_bands(&self, fs: f64) -> Vec<Band> {
        let nyq = fs / 2.0;
        self.base_bands()
            .into_iter()
            .map(|b| {
                let pad = self.overlap * b.width() / 2.0;
                Band::new((b.lo - pad).max(0.0), (b.hi + pad).min(nyq))
            })
            .collect()
    }
}

/// One-sided power spectral density of a windowed crop.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    pub fn nyquist(&self) -> f64 {
        *self.freqs_hz.last().unwrap_or(&0.0)
    }

    /// Bins with `lo <= f < hi`; the Nyquist bin is included when `hi` reaches it.
    pub fn band_bins(&self, band: Band) -> Range<usize> {
        let nyq = self.nyquist();
        let start = self.freqs_hz.partition_point(|&f| f < band.lo);
        let end = if band.hi >= nyq {
            self.freqs_hz.len()
        } else {
            self.freqs_hz.partition_point(|&f| f < band.hi)
        };
        start..end.max(start)
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// `|FFT(x·w)|² / (fs·Σw²)` with non-DC, non-Nyquist bins doubled.
pub fn periodogram(x: &[f64], fs: f64, window: &[f64], plan: &FftPlan) -> Spectrum {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().zip(window).map(|(v, w)| Complex64::new(v * w, 0.0)).collect();
    plan.forward(&mut buf);
    let norm = fs * window.iter().map(|w| w * w).sum::<f64>();
    let n_bins = n / 2 + 1;
    let power = (0..n_bins)
        .map(|k| {
            let p = buf[k].norm_sqr() / norm;
            if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let freqs_hz = (0..n_bins).map(|k| k as f64 * fs / n as f64).collect();
    Spectrum { freqs_hz, power }
}

/// Normalized Shannon entropy of a nonnegative distribution, in `[0, 1]`.
fn normalized_entropy(p: &[f64]) -> Result<f64, FeatureError> {
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(FeatureError::ConstantSignal);
    }
    if p.len() < 2 {
        return Ok(0.0);
    }
    let h: f64 = p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let q = v / total;
            -q * libm::log(q)
        })
        .sum();
    Ok(h / libm::log(p.len() as f64))
}

fn max_min_mean_var(v: &[f64]) -> (f64, f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    (max, min, mean, var)
}

/// FT statistics of one band, in [`FT_FEATURE_NAMES`] order, with validity flags.
pub fn ft_band_features(spec: &Spectrum, band: Band, total_power: f64) -> Result<[(f64, bool); 9], FeatureError> {
    let bins = spec.band_bins(band);
    if bins.is_empty() {
        return Err(FeatureError::EmptyBand {
            lo: band.lo,
            hi: band.hi,
        });
    }
    let p = &spec.power[bins.clone()];
    let (max, min, mean, var) = max_min_mean_var(p);
    let peak = bins.start
        + p.iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > p[best] { i } else { best });
    let power: f64 = p.iter().sum();
    let ratio = if total_power > 0.0 {
        Ok(power / total_power)
    } else {
        Err(FeatureError::ConstantSignal)
    };
    Ok([
        (max, true),
        (mean, true),
        (min, true),
        (spec.freqs_hz[peak], true),
        (power, true),
        flagged(ratio),
        flagged(normalized_entropy(p)),
        (max - min, true),
        (var, true),
    ])
}

/// Statistics of one wavelet band, in [`WAVELET_FEATURE_NAMES`] order.
///
/// `power_ratio` is left at zero; [`fill_power_ratios`] sets it once every
/// band is known.
pub fn wavelet_stats(magnitude: &[f64]) -> [(f64, bool); 8] {
    let (max, min, mean, var) = max_min_mean_var(magnitude);
    let bv: f64 = magnitude.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let sq: Vec<f64> = magnitude.iter().map(|m| m * m).collect();
    let power = sq.iter().sum::<f64>() / sq.len() as f64;
    [
        (bv, true),
        (max, true),
        (mean, true),
        (min, true),
        (power, true),
        (0.0, true),
        flagged(normalized_entropy(&sq)),
        (var, true),
    ]
}

const POWER: usize = 4;
const POWER_RATIO: usize = 5;

/// Sets each band's power ratio to its share of the summed band power.
pub fn fill_power_ratios(stats: &mut [[(f64, bool); 8]]) {
    let total: f64 = stats.iter().map(|s| s[POWER].0).sum();
    for s in stats.iter_mut() {
        s[POWER_RATIO] = flagged(if total > 0.0 {
            Ok(s[POWER].0 / total)
        } else {
            Err(FeatureError::ConstantSignal)
        });
    }
}

/// Complex Morlet filter bank evaluated in the frequency domain.
///
/// At scale `s` the wavelet passes `exp(-π²B(sν - C)²)` of each frequency
/// `ν` (cycles per sample), so a sinusoid at the centre frequency `C/s` is
/// returned with unit gain on its positive-frequency half.
#[derive(Debug, Clone)]
pub struct MorletBank {
    pub scales: Vec<f64>,
    gains: Vec<Vec<f64>>,
    plan: FftPlan,
}

impl MorletBank {
    pub fn new(n: usize, scales: &[f64], center: f64, bandwidth: f64) -> Self {
        let gains = scales
            .iter()
            .map(|&s| {
                (0..n)
                    .map(|k| {
                        let nu = if k <= n / 2 {
                            k as f64 / n as f64
                        } else {
                            k as f64 / n as f64 - 1.0
                        };
                        let d = s * nu - center;
                        libm::exp(-PI * PI * bandwidth * d * d)
                    })
                    .collect()
            })
            .collect();
        Self {
            scales: scales.to_vec(),
            gains,
            plan: FftPlan::new(n),
        }
    }

    /// Scales whose centre frequencies equal `freqs_hz`: `s = C·fs/f`.
    pub fn for_frequencies(n: usize, freqs_hz: &[f64], fs: f64, center: f64, bandwidth: f64) -> Self {
        let scales: Vec<f64> = freqs_hz.iter().map(|f| center * fs / f).collect();
        Self::new(n, &scales, center, bandwidth)
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// `|c(s, t)|` for every scale (circular convolution over the crop).
    pub fn magnitudes(&self, x: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(x.len(), self.plan.len(), "signal length must match the bank");
        let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plan.forward(&mut spec);
        self.gains
            .iter()
            .map(|g| {
                let mut buf: Vec<Complex64> = spec.iter().zip(g).map(|(c, &w)| c * w).collect();
                self.plan.inverse(&mut buf);
                buf.iter().map(|c| c.norm()).collect()
            })
            .collect()
    }
}

/// CWT statistics per scale.
pub fn cwt_features(x: &[f64], bank: &MorletBank) -> Vec<[(f64, bool); 8]> {
    let mut stats: Vec<_> = bank.magnitudes(x).iter().map(|m| wavelet_stats(m)).collect();
    fill_power_ratios(&mut stats);
    stats
}

/// Daubechies-4 (8-tap) decomposition low-pass filter.
pub const DB4_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
];

fn db4_hi() -> [f64; 8] {
    let mut h = [0.0; 8];
    for (k, slot) in h.iter_mut().enumerate() {
        let v = DB4_LO[7 - k];
        *slot = if k % 2 == 0 { -v } else { v };
    }
    h
}

/// Periodized multilevel db4 transform.
///
/// Returns `[d1, d2, …, dL, aL]`. The input length must be divisible by
/// `2^levels`; see [`dwt_padded_len`].
pub fn dwt(x: &[f64], levels: usize) -> Result<Vec<Vec<f64>>, FeatureError> {
    let block = 1usize << levels;
    if levels == 0 || x.len() < block || !x.len().is_multiple_of(block) {
        return Err(FeatureError::SignalTooShort {
            needed: dwt_padded_len(x.len().max(block), levels),
            got: x.len(),
        });
    }
    let hi = db4_hi();
    let mut approx = x.to_vec();
    let mut out = Vec::with_capacity(levels + 1);
    for _ in 0..levels {
        let n = approx.len();
        let half = n / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for k in 0..half {
            let mut sa = 0.0;
            let mut sd = 0.0;
            for j in 0..8 {
                let v = approx[(2 * k + j) % n];
                sa += DB4_LO[7 - j] * v;
                sd += hi[7 - j] * v;
            }
            a[k] = sa;
            d[k] = sd;
        }
        out.push(d);
        approx = a;
    }
    out.push(approx);
    Ok(out)
}

/// Smallest multiple of `2^levels` that is at least `n`.
pub fn dwt_padded_len(n: usize, levels: usize) -> usize {
    let block = 1usize << levels;
    n.div_ceil(block) * block
}

/// Frequency range of each DWT output `[d1, …, dL, aL]` at sampling rate `fs`.
pub fn dwt_bands(fs: f64, levels: usize) -> Vec<Band> {
    let mut bands: Vec<Band> = (1..=levels)
        .map(|j| {
            let hi = fs / libm::pow(2.0, j as f64);
            Band::new(hi / 2.0, hi)
        })
        .collect();
    bands.push(Band::new(0.0, fs / libm::pow(2.0, (levels + 1) as f64)));
    bands
}

/// DWT statistics per output band, zero-padding `x` to a whole number of blocks.
pub fn dwt_features(x: &[f64], levels: usize) -> Result<Vec<[(f64, bool); 8]>, FeatureError> {
    let mut padded = x.to_vec();
    padded.resize(dwt_padded_len(x.len(), levels), 0.0);
    let coeffs = dwt(&padded, levels)?;
    let mut stats: Vec<_> = coeffs
        .iter()
        .map(|c| {
            let m: Vec<f64> = c.iter().map(|v| v.abs()).collect();
            wavelet_stats(&m)
        })
        .collect();
    fill_power_ratios(&mut stats);
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub bands: BandSpec,
    pub morlet_center: f64,
    pub morlet_bandwidth: f64,
    pub dwt_levels: usize,
    /// Apply the Blackman-Harris window before the wavelet transforms too.
    pub window_wavelets: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            bands: BandSpec::default(),
            morlet_center: 1.0,
            morlet_bandwidth: 1.5,
            dwt_levels: 6,
            window_wavelets: true,
        }
    }
}

/// Reusable state for one crop length and sampling rate.
#[derive(Debug, Clone)]
pub struct SpectralExtractor {
    pub fs: f64,
    pub crop_len: usize,
    pub ft_bands: Vec<Band>,
    pub cwt_bands: Vec<Band>,
    pub dwt_bands: Vec<Band>,
    window: Vec<f64>,
    plan: FftPlan,
    bank: MorletBank,
    cfg: SpectralConfig,
}

impl SpectralExtractor {
    pub fn new(cfg: &SpectralConfig, fs: f64, crop_len: usize) -> Result<Self, FeatureError> {
        cfg.bands.validate(fs)?;
        if !(cfg.morlet_center > 0.0 && cfg.morlet_bandwidth > 0.0) {
            return Err(FeatureError::Config("Morlet parameters must be positive"));
        }
        if cfg.dwt_levels == 0 || cfg.dwt_levels > 16 {
            return Err(FeatureError::Config("DWT depth does not fit the crop"));
        }
        let cwt_bands = cfg.bands.base_bands();
        let centers: Vec<f64> = cwt_bands.iter().map(Band::center).collect();
        Ok(Self {
            fs,
            crop_len,
            ft_bands: cfg.bands.overlapped_bands(fs),
            dwt_bands: dwt_bands(fs, cfg.dwt_levels),
            cwt_bands,
            window: blackman_harris(crop_len),
            plan: FftPlan::new(crop_len),
            bank: MorletBank::for_frequencies(crop_len, &centers, fs, cfg.morlet_center, cfg.morlet_bandwidth),
            cfg: cfg.clone(),
        })
    }

    pub fn spectrum(&self, x: &[f64]) -> Spectrum {
        periodogram(x, self.fs, &self.window, &self.plan)
    }

    /// FT features per overlapped band.
    pub fn ft(&self, x: &[f64]) -> Vec<[(f64, bool); 9]> {
        let spec = self.spectrum(x);
        let total = spec.total_power();
        self.ft_bands
            .iter()
            .map(|&b| ft_band_features(&spec, b, total).unwrap_or([(0.0, false); 9]))
            .collect()
    }

    fn wavelet_input(&self, x: &[f64]) -> Vec<f64> {
        if self.cfg.window_wavelets {
            x.iter().zip(&self.window).map(|(v, w)| v * w).collect()
        } else {
            x.to_vec()
        }
    }

    pub fn cwt(&self, x: &[f64]) -> Vec<[(f64, bool); 8]> {
        cwt_features(&self.wavelet_input(x), &self.bank)
    }

    pub fn dwt(&self, x: &[f64]) -> Vec<[(f64, bool); 8]> {
        dwt_features(&self.wavelet_input(x), self.cfg.dwt_levels)
            .unwrap_or_else(|_| vec![[(0.0, false); 8]; self.dwt_bands.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| libm::sin(2.0 * PI * f * i as f64 / fs)).collect()
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn overlapped_band_examples() {
        let bands = BandSpec::default().overlapped_bands(100.0);
        assert_eq!(bands[0], Band::new(0.0, 2.5));
        assert_eq!(bands[2], Band::new(3.0, 9.0));
        assert_eq!(bands[7], Band::new(25.0, 50.0));
        assert_eq!(bands.len(), 8);
    }

    #[test]
    fn periodogram_matches_direct_dft() {
        let x = noise(1, 60);
        let w = blackman_harris(60);
        let fs = 100.0;
        let spec = periodogram(&x, fs, &w, &FftPlan::new(60));
        let norm = fs * w.iter().map(|v| v * v).sum::<f64>();
        for k in 0..=30 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, (v, wv)) in x.iter().zip(&w).enumerate() {
                let a = -2.0 * PI * (k * i) as f64 / 60.0;
                re += v * wv * libm::cos(a);
                im += v * wv * libm::sin(a);
            }
            let mult = if k == 0 || k == 30 { 1.0 } else { 2.0 };
            let expect = mult * (re * re + im * im) / norm;
            assert!((spec.power[k] - expect).abs() < 1e-12 * (1.0 + expect));
        }
        assert!(spec.power.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn ft_examples() {
        let ex = SpectralExtractor::new(&SpectralConfig::default(), 100.0, 600).unwrap();
        let spec = ex.spectrum(&sine(10.0, 100.0, 600));
        let f = ft_band_features(&spec, Band::new(8.0, 13.0), spec.total_power()).unwrap();
        assert!((f[3].0 - 10.0).abs() <= 1.0 / 6.0 + 1e-12);
        assert!(f[5].0 > 0.95);

        let flat = Spectrum {
            freqs_hz: (0..10).map(|k| k as f64).collect(),
            power: vec![2.0; 10],
        };
        let f = ft_band_features(&flat, Band::new(0.0, 9.0), 20.0).unwrap();
        assert!((f[6].0 - 1.0).abs() < 1e-6);
        let f = ft_band_features(&flat, Band::new(3.0, 4.0), 20.0).unwrap();
        assert_eq!(f[6], (0.0, true));
        assert!(matches!(
            ft_band_features(&flat, Band::new(3.2, 3.8), 20.0),
            Err(FeatureError::EmptyBand { .. })
        ));
    }

    #[test]
    fn base_band_ratios_partition_power() {
        let spec_cfg = BandSpec {
            overlap: 0.0,
            ..BandSpec::default()
        };
        let bands = spec_cfg.overlapped_bands(100.0);
        let x = noise(4, 600);
        let ex = SpectralExtractor::new(&SpectralConfig::default(), 100.0, 600).unwrap();
        let spec = ex.spectrum(&x);
        let total = spec.total_power();
        let sum: f64 = bands
            .iter()
            .map(|&b| ft_band_features(&spec, b, total).unwrap()[5].0)
            .sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cwt_examples() {
        let cfg = SpectralConfig::default();
        let ex = SpectralExtractor::new(&cfg, 100.0, 600).unwrap();
        let stats = ex.cwt(&sine(10.0, 100.0, 600));
        let powers: Vec<f64> = stats.iter().map(|s| s[4].0).collect();
        let best = powers
            .iter()
            .enumerate()
            .fold(0, |b, (i, &p)| if p > powers[b] { i } else { b });
        assert_eq!(ex.cwt_bands[best], Band::new(8.0, 13.0));
        let ratio_sum: f64 = stats.iter().map(|s| s[5].0).sum();
        assert!((ratio_sum - 1.0).abs() < 1e-9);

        let bank = MorletBank::for_frequencies(600, &[1.0, 3.0, 10.5, 40.0], 100.0, 1.0, 1.5);
        for s in cwt_features(&[5.0; 600], &bank) {
            assert!(s[0].0.abs() < 1e-9, "{}", s[0].0);
        }
    }

    #[test]
    fn dwt_examples() {
        for c in dwt(&[3.0; 640], 6).unwrap().iter().take(6) {
            assert!(c.iter().all(|v| v.abs() < 1e-9));
        }
        let x = sine(10.0, 100.0, 640);
        let coeffs = dwt(&x, 6).unwrap();
        let pw: Vec<f64> = coeffs
            .iter()
            .take(6)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .collect();
        let best = pw
            .iter()
            .enumerate()
            .fold(0, |b, (i, &p)| if p > pw[b] { i } else { b });
        assert_eq!(best, 2, "{pw:?}");

        for seed in 0..10 {
            let x = noise(seed, 600);
            let energy: f64 = x.iter().map(|v| v * v).sum();
            let stats = dwt_features(&x, 6).unwrap();
            let lens = [320.0, 160.0, 80.0, 40.0, 20.0, 10.0, 10.0];
            let parseval: f64 = stats.iter().zip(lens).map(|(s, l)| s[4].0 * l).sum();
            assert!((parseval - energy).abs() < 1e-6 * energy);
        }
        assert!(dwt(&[0.0; 600], 6).is_err());
        let b = dwt_bands(100.0, 6);
        assert_eq!(b[2], Band::new(6.25, 12.5));
        assert_eq!(b[6], Band::new(0.0, 0.78125));
    }

    #[test]
    fn scale_invariance() {
        let ex = SpectralExtractor::new(&SpectralConfig::default(), 100.0, 600).unwrap();
        let x = noise(7, 600);
        let y: Vec<f64> = x.iter().map(|v| 3.5 * v).collect();
        for (a, b) in ex.ft(&x).iter().zip(ex.ft(&y)) {
            assert!((b[4].0 - 12.25 * a[4].0).abs() < 1e-9 * b[4].0);
            for i in [3, 5, 6] {
                assert!((a[i].0 - b[i].0).abs() < 1e-9);
            }
        }
    }
}
