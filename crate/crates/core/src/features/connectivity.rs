//! Phase-locking value between electrode pairs.
//!
//! Band filtering and the Hilbert transform run on the whole recording; the
//! phase series are then cut at the same crop boundaries as every other
//! feature domain.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Band, FeatureError, FeatureRow};
use crate::fft::FftPlan;
use crate::preprocess::CropLayout;
use crate::recording::Recording;
use crate::signal::{analytic_signal, analytic_signal_with, Sos};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConnectivityConfig {
    pub butterworth_order: usize,
    /// Samples dropped at the recording edges from crops that touch them.
    pub edge_guard: usize,
}

impl Default for ConnectivityConfig {
    fn default() -> Self {
        Self {
            butterworth_order: 4,
            edge_guard: 50,
        }
    }
}

/// Zero-phase Butterworth filtering of every channel.
pub fn bandpass_full_signal(rec: &Recording, band: Band, order: usize) -> Result<Recording, FeatureError> {
    let sos = Sos::butterworth(order, band.lo, band.hi, rec.sampling_rate_hz)?;
    let data = rec.data.iter().map(|c| sos.filtfilt(c)).collect();
    Ok(rec.with_data(rec.sampling_rate_hz, data))
}

/// Instantaneous phase in `(-π, π]`.
///
/// Returns `None` for an all-zero signal, whose phase is undefined.
pub fn hilbert_phase(x: &[f64]) -> Option<Vec<f64>> {
    if x.iter().all(|v| *v == 0.0) {
        return None;
    }
    Some(analytic_signal(x).iter().map(|z| z.arg()).collect())
}

/// `|mean(exp(i(φa − φb)))|`.
pub fn plv(phase_a: &[f64], phase_b: &[f64]) -> Result<f64, FeatureError> {
    if phase_a.len() != phase_b.len() {
        return Err(FeatureError::LengthMismatch(phase_a.len(), phase_b.len()));
    }
    if phase_a.is_empty() {
        return Err(FeatureError::SignalTooShort { needed: 1, got: 0 });
    }
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in phase_a.iter().zip(phase_b) {
        let d = a - b;
        re += libm::cos(d);
        im += libm::sin(d);
    }
    let n = phase_a.len() as f64;
    Ok(libm::sqrt(re * re + im * im) / n)
}

/// Unit phasors of one channel, split into real and imaginary parts.
struct Phasors {
    re: Vec<f64>,
    im: Vec<f64>,
    valid: bool,
}

/// `exp(i·arg z)` computed as `z / |z|`; a zero sample has phase 0.
fn phasors(x: &[f64], plan: &FftPlan) -> Phasors {
    if x.iter().all(|v| *v == 0.0) {
        return Phasors {
            re: alloc::vec![0.0; x.len()],
            im: alloc::vec![0.0; x.len()],
            valid: false,
        };
    }
    let z = analytic_signal_with(plan, x);
    let mut re = Vec::with_capacity(z.len());
    let mut im = Vec::with_capacity(z.len());
    for v in &z {
        let r = libm::hypot(v.re, v.im);
        if r > 0.0 {
            re.push(v.re / r);
            im.push(v.im / r);
        } else {
            re.push(1.0);
            im.push(0.0);
        }
    }
    Phasors { re, im, valid: true }
}

fn pair_plv(a: &Phasors, b: &Phasors, range: core::ops::Range<usize>) -> f64 {
    let (ar, ai) = (&a.re[range.clone()], &a.im[range.clone()]);
    let (br, bi) = (&b.re[range.clone()], &b.im[range.clone()]);
    let mut re = 0.0;
    let mut im = 0.0;
    for k in 0..ar.len() {
        re += ar[k] * br[k] + ai[k] * bi[k];
        im += ai[k] * br[k] - ar[k] * bi[k];
    }
    libm::sqrt(re * re + im * im) / ar.len() as f64
}

/// Unordered channel pairs `(i, j)`, `i < j`, in row-major order.
pub fn channel_pairs(n_channels: usize) -> Vec<(usize, usize)> {
    (0..n_channels)
        .flat_map(|i| (i + 1..n_channels).map(move |j| (i, j)))
        .collect()
}

/// Sample range of a crop after the edge guard is applied.
pub fn guarded_range(start: usize, layout: &CropLayout, guard: usize) -> core::ops::Range<usize> {
    let end = start + layout.crop_len;
    let lo = if start == 0 {
        guard.min(layout.crop_len - 1)
    } else {
        start
    };
    let hi = if end == layout.n_samples {
        end - guard.min(end - lo - 1)
    } else {
        end
    };
    lo..hi
}

/// PLV rows for every kept crop: bands outer, pairs inner.
pub fn plv_features(
    rec: &Recording,
    layout: &CropLayout,
    bands: &[Band],
    cfg: &ConnectivityConfig,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let pairs = channel_pairs(rec.n_channels());
    let starts: Vec<usize> = layout.kept_starts().collect();
    let mut rows: Vec<FeatureRow> = starts
        .iter()
        .map(|_| FeatureRow::with_capacity(bands.len() * pairs.len()))
        .collect();
    let plan = FftPlan::new(rec.n_samples());
    for &band in bands {
        let filtered = bandpass_full_signal(rec, band, cfg.butterworth_order)?;
        let ph: Vec<Phasors> = filtered.data.iter().map(|c| phasors(c, &plan)).collect();
        for (row, &start) in rows.iter_mut().zip(&starts) {
            let range = guarded_range(start, layout, cfg.edge_guard);
            for &(i, j) in &pairs {
                let ok = ph[i].valid && ph[j].valid;
                let v = if ok {
                    pair_plv(&ph[i], &ph[j], range.clone())
                } else {
                    0.0
                };
                row.push((v, ok && v.is_finite()));
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::PatientMeta;
    use alloc::string::ToString;
    use alloc::vec;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rec(data: Vec<Vec<f64>>, fs: f64) -> Recording {
        Recording {
            id: "r".into(),
            sampling_rate_hz: fs,
            channels: (0..data.len()).map(|i| i.to_string()).collect(),
            data,
            meta: PatientMeta::default(),
            label: None,
            split: None,
        }
    }

    fn sine(f: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| libm::sin(2.0 * PI * f * i as f64 / fs + phase))
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
    }

    #[test]
    fn bandpass_examples() {
        let x = sine(10.0, 100.0, 6000, 0.0);
        let r = rec(vec![x.clone()], 100.0);
        let pass = bandpass_full_signal(&r, Band::new(8.0, 13.0), 4).unwrap();
        let mid = &pass.data[0][1000..5000];
        assert!((rms(mid) / rms(&x[1000..5000]) - 1.0).abs() < 0.02);
        let stop = bandpass_full_signal(&r, Band::new(0.5, 4.0), 4).unwrap();
        assert!(rms(&stop.data[0][1000..5000]) / rms(&x[1000..5000]) < 0.05);

        // zero-phase: cross-correlation peaks at lag 0
        let xc = |lag: i64| -> f64 {
            (1000..5000)
                .map(|i| x[i] * pass.data[0][(i as i64 + lag) as usize])
                .sum()
        };
        let best = (-5..=5).max_by(|a, b| xc(*a).total_cmp(&xc(*b))).unwrap();
        assert_eq!(best, 0);

        assert!(bandpass_full_signal(&r, Band::new(0.0, 50.0), 4).is_err());
    }

    #[test]
    fn hilbert_examples() {
        let fs = 100.0;
        let n = 1000;
        let c: Vec<f64> = (0..n).map(|i| libm::cos(2.0 * PI * 5.0 * i as f64 / fs)).collect();
        let ph = hilbert_phase(&c).unwrap();
        let step = 2.0 * PI * 5.0 / fs;
        for i in 100..900 {
            let mut d = ph[i + 1] - ph[i];
            if d < -PI {
                d += 2.0 * PI;
            }
            assert!((d - step).abs() < 1e-3);
        }
        let s = sine(5.0, fs, n, 0.0);
        let ps = hilbert_phase(&s).unwrap();
        for i in 100..900 {
            let mut d = ph[i] - ps[i];
            while d <= -PI {
                d += 2.0 * PI;
            }
            while d > PI {
                d -= 2.0 * PI;
            }
            assert!((d - PI / 2.0).abs() < 0.01);
        }
        assert!(ph.iter().all(|p| p.abs() <= PI));
        assert!(hilbert_phase(&[0.0; 64]).is_none());
    }

    #[test]
    fn plv_examples() {
        let a: Vec<f64> = (0..600).map(|i| (i as f64 * 0.37) % 6.0 - 3.0).collect();
        assert_eq!(plv(&a, &a).unwrap(), 1.0);
        let b: Vec<f64> = a.iter().map(|v| v + PI / 2.0).collect();
        assert!((plv(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(plv(&a, &b[..10]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut below = 0;
        for _ in 0..1000 {
            let pa: Vec<f64> = (0..600).map(|_| rng.random_range(-PI..PI)).collect();
            let pb: Vec<f64> = (0..600).map(|_| rng.random_range(-PI..PI)).collect();
            let v = plv(&pa, &pb).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, plv(&pb, &pa).unwrap());
            if v < 0.15 {
                below += 1;
            }
        }
        assert!(below >= 990, "{below}");
    }

    #[test]
    fn block_layout_and_noise_trend() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 3000;
        let source: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut prev = f64::INFINITY;
        for level in [0.05, 0.2, 0.5, 1.0, 2.0] {
            let noisy = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                source
                    .iter()
                    .map(|s| {
                        let e: f64 = StandardNormal.sample(&mut *rng);
                        s + level * e
                    })
                    .collect()
            };
            let r = rec(vec![noisy(&mut rng), noisy(&mut rng), noisy(&mut rng)], 100.0);
            let layout = CropLayout {
                crop_len: 600,
                n_samples: n,
                kept_mask: vec![true; 5],
            };
            let rows = plv_features(&r, &layout, &[Band::new(8.0, 13.0)], &ConnectivityConfig::default()).unwrap();
            assert_eq!(rows.len(), 5);
            assert_eq!(rows[0].len(), 3);
            let mean: f64 = rows.iter().flat_map(|r| r.values.iter()).sum::<f64>() / 15.0;
            assert!(mean < prev, "{level}: {mean} !< {prev}");
            prev = mean;
            for row in &rows {
                assert!(row.values.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
            }
        }
        assert_eq!(channel_pairs(21).len(), 210);
    }

    #[test]
    fn edge_guard_only_on_touching_crops() {
        let layout = CropLayout {
            crop_len: 600,
            n_samples: 1800,
            kept_mask: vec![true; 3],
        };
        assert_eq!(guarded_range(0, &layout, 50), 50..600);
        assert_eq!(guarded_range(600, &layout, 50), 600..1200);
        assert_eq!(guarded_range(1200, &layout, 50), 1200..1750);
        let open = CropLayout {
            n_samples: 1850,
            ..layout
        };
        assert_eq!(guarded_range(1200, &open, 50), 1200..1800);
    }
}
