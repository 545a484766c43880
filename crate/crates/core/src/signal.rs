//! Filters, windows, resampling and the analytic signal.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft::FftPlan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("band [{lo}, {hi}] Hz is not inside (0, {nyquist}) Hz")]
    BandOutOfRange { lo: f64, hi: f64, nyquist: f64 },
    #[error("upsampling from {from} Hz to {to} Hz is not supported")]
    Upsampling { from: f64, to: f64 },
    #[error("filter order must be even and positive, got {0}")]
    BadOrder(usize),
}

const BH_COEFFS: [f64; 4] = [0.35875, 0.48829, 0.14128, 0.01168];

/// Symmetric 4-term Blackman-Harris window.
pub fn blackman_harris(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let [a0, a1, a2, a3] = BH_COEFFS;
    let denom = (n - 1) as f64;
    let mut w: Vec<f64> = (0..n)
        .map(|k| {
            let x = 2.0 * PI * k as f64 / denom;
            a0 - a1 * libm::cos(x) + a2 * libm::cos(2.0 * x) - a3 * libm::cos(3.0 * x)
        })
        .collect();
    // mirror so the window is exactly symmetric
    for k in 0..n / 2 {
        w[n - 1 - k] = w[k];
    }
    w
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser(x: f64, beta: f64) -> f64 {
    if x.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * libm::sqrt(1.0 - x * x)) / bessel_i0(beta)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        libm::sin(px) / px
    }
}

/// Kaiser-windowed sinc interpolation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResamplerConfig {
    pub zero_crossings: usize,
    pub kaiser_beta: f64,
    /// Cutoff as a fraction of the output Nyquist frequency.
    pub rolloff: f64,
}

impl Default for ResamplerConfig {
    fn default() -> Self {
        Self {
            zero_crossings: 64,
            kaiser_beta: 14.0,
            rolloff: 0.945,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Band-limited downsampling of one channel.
///
/// Output sample `j` sits at input time `j · from/to`. When both rates are
/// integers the filter is cached per polyphase branch; otherwise it is
/// evaluated per output sample. Samples outside the input count as zero and
/// each branch is normalized to unit DC gain.
pub fn resample(x: &[f64], from_hz: f64, to_hz: f64, cfg: &ResamplerConfig) -> Result<Vec<f64>, SignalError> {
    if to_hz > from_hz {
        return Err(SignalError::Upsampling {
            from: from_hz,
            to: to_hz,
        });
    }
    if to_hz == from_hz {
        return Ok(x.to_vec());
    }
    let n_out = libm::round(x.len() as f64 * to_hz / from_hz) as usize;
    let ratio = to_hz / from_hz;
    let cutoff = cfg.rolloff * ratio;
    let half_width = cfg.zero_crossings as f64 / cutoff;
    let reach = libm::ceil(half_width) as i64;
    let taps_for = |frac: f64| -> Vec<f64> {
        // tap k sits at input index floor(t) + k, i.e. distance (k - frac) from t
        let mut taps: Vec<f64> = (-reach..=reach + 1)
            .map(|k| {
                let d = k as f64 - frac;
                cutoff * sinc(cutoff * d) * kaiser(d / half_width, cfg.kaiser_beta)
            })
            .collect();
        let s: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= s);
        taps
    };
    let apply = |base: i64, taps: &[f64]| -> f64 {
        let start = base - reach;
        let k0 = (-start).max(0) as usize;
        let k1 = ((x.len() as i64 - start).max(0) as usize).min(taps.len());
        if k0 >= k1 {
            return 0.0;
        }
        let xs = &x[(start + k0 as i64) as usize..(start + k1 as i64) as usize];
        taps[k0..k1].iter().zip(xs).fold(0.0, |acc, (t, v)| acc + t * v)
    };

    let is_int = |v: f64| v == libm::round(v) && v > 0.0;
    let mut out = Vec::with_capacity(n_out);
    if is_int(from_hz) && is_int(to_hz) {
        let (src, dst) = (from_hz as u64, to_hz as u64);
        let g = gcd(src, dst);
        let (up, down) = (dst / g, src / g);
        let branches: Vec<Vec<f64>> = (0..up).map(|phase| taps_for(phase as f64 / up as f64)).collect();
        for j in 0..n_out as u64 {
            let num = j * down;
            let base = (num / up) as i64;
            let phase = (num % up) as usize;
            out.push(apply(base, &branches[phase]));
        }
    } else {
        for j in 0..n_out {
            let t = j as f64 * from_hz / to_hz;
            let base = libm::floor(t);
            out.push(apply(base as i64, &taps_for(t - base)));
        }
    }
    Ok(out)
}

/// One second-order section, `b0 b1 b2 / 1 a1 a2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + zi * (self.b[1] + zi * self.b[2]);
        let den = 1.0 + zi * (self.a[0] + zi * self.a[1]);
        num / den
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BandKind {
    Lowpass(f64),
    Highpass(f64),
    Bandpass(f64, f64),
}

impl Sos {
    /// Butterworth design through the bilinear transform with prewarping.
    ///
    /// `lo == 0` gives a lowpass at `hi`, `hi == fs/2` a highpass at `lo`,
    /// otherwise a bandpass whose order doubles as usual.
    pub fn butterworth(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<Self, SignalError> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(SignalError::BadOrder(order));
        }
        let nyq = fs / 2.0;
        let out_of_range = || SignalError::BandOutOfRange {
            lo: lo_hz,
            hi: hi_hz,
            nyquist: nyq,
        };
        if !(lo_hz >= 0.0 && hi_hz <= nyq && lo_hz < hi_hz) || (lo_hz <= 0.0 && hi_hz >= nyq) {
            return Err(out_of_range());
        }
        let kind = if lo_hz <= 0.0 {
            BandKind::Lowpass(hi_hz)
        } else if hi_hz >= nyq {
            BandKind::Highpass(lo_hz)
        } else {
            BandKind::Bandpass(lo_hz, hi_hz)
        };
        let warp = |f: f64| 2.0 * fs * libm::tan(PI * f / fs);

        // analog lowpass prototype poles, upper half plane only
        let proto: Vec<Complex64> = (0..order / 2)
            .map(|k| {
                let theta = PI * (2 * k + 1 + order) as f64 / (2 * order) as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();

        let mut analog_poles: Vec<Complex64> = Vec::new();
        match kind {
            BandKind::Lowpass(f) => {
                let w = warp(f);
                analog_poles.extend(proto.iter().map(|p| p * w));
            }
            BandKind::Highpass(f) => {
                let w = warp(f);
                analog_poles.extend(
                    proto
                        .iter()
                        .map(|p| w / p)
                        .map(|p| if p.im < 0.0 { p.conj() } else { p }),
                );
            }
            BandKind::Bandpass(f1, f2) => {
                let (w1, w2) = (warp(f1), warp(f2));
                let bw = w2 - w1;
                let w0sq = w1 * w2;
                for p in &proto {
                    let half = p * bw / 2.0;
                    let disc = (half * half - w0sq).sqrt();
                    for q in [half + disc, half - disc] {
                        // keep one of each conjugate pair
                        analog_poles.push(if q.im < 0.0 { q.conj() } else { q });
                    }
                }
            }
        }

        let two_fs = 2.0 * fs;
        let mut sections = Vec::with_capacity(analog_poles.len());
        for p in analog_poles {
            let z = (two_fs + p) / (two_fs - p);
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            let b = match kind {
                BandKind::Lowpass(_) => [1.0, 2.0, 1.0],
                BandKind::Highpass(_) => [1.0, -2.0, 1.0],
                BandKind::Bandpass(..) => [1.0, 0.0, -1.0],
            };
            sections.push(Biquad { b, a: [a1, a2] });
        }

        // normalize to unit gain where the passband response is exactly 1
        let ref_z = match kind {
            BandKind::Lowpass(_) => Complex64::new(1.0, 0.0),
            BandKind::Highpass(_) => Complex64::new(-1.0, 0.0),
            BandKind::Bandpass(f1, f2) => {
                let w0 = libm::sqrt(warp(f1) * warp(f2));
                let omega = 2.0 * libm::atan(w0 / two_fs);
                Complex64::from_polar(1.0, omega)
            }
        };
        let mut sos = Sos { sections };
        let gain = sos.response(ref_z).norm();
        let per = libm::pow(gain, 1.0 / sos.sections.len() as f64);
        for s in &mut sos.sections {
            for b in &mut s.b {
                *b /= per;
            }
        }
        Ok(sos)
    }

    pub fn response(&self, z: Complex64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z))
    }

    /// |H| at frequency `f_hz`.
    pub fn magnitude_at(&self, f_hz: f64, fs: f64) -> f64 {
        self.response(Complex64::from_polar(1.0, 2.0 * PI * f_hz / fs)).norm()
    }

    /// Direct-form-II-transposed filtering with per-section initial state.
    fn run(&self, x: &mut [f64], zi: &[[f64; 2]]) {
        for (s, z0) in self.sections.iter().zip(zi) {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let (mut z1, mut z2) = (z0[0], z0[1]);
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z1;
                z1 = b1 * xin - a1 * y + z2;
                z2 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Steady-state section states for a unit step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut input = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let dc = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
                let y = dc * input;
                let z2 = s.b[2] * input - s.a[1] * y;
                let z1 = s.b[1] * input - s.a[0] * y + z2;
                input = y;
                [z1, z2]
            })
            .collect()
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let unit = self.step_state();
        let scaled = |v: f64| unit.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let zi = scaled(ext[0]);
        self.run(&mut ext, &zi);
        ext.reverse();
        let zi = scaled(ext[0]);
        self.run(&mut ext, &zi);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Analytic signal by the frequency-domain method: negative frequencies are
/// zeroed and positive ones doubled.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    if x.is_empty() {
        return Vec::new();
    }
    analytic_signal_with(&FftPlan::new(x.len()), x)
}

/// [`analytic_signal`] with a caller-owned plan of length `x.len()`.
pub fn analytic_signal_with(plan: &FftPlan, x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *v *= h;
    }
    plan.inverse(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| libm::sin(2.0 * PI * f * i as f64 / fs + phase))
            .collect()
    }

    /// Amplitude and frequency of the strongest DFT bin, computed directly.
    fn dft_peak(x: &[f64], fs: f64) -> (f64, f64) {
        let spec = crate::fft::real_forward(x);
        let n = x.len();
        let (k, mag) = spec[..n / 2]
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, v)| (k, v.norm()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        (k as f64 * fs / n as f64, 2.0 * mag / n as f64)
    }

    #[test]
    fn blackman_harris_shape() {
        let w = blackman_harris(600);
        assert!((w[0] - 6.0e-5).abs() < 1e-9);
        for k in 0..600 {
            assert_eq!(w[k], w[599 - k]);
        }
        let w = blackman_harris(601);
        assert!((w[300] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resample_length_and_identity() {
        let x: Vec<f64> = (0..2500).map(|i| (i % 17) as f64).collect();
        let cfg = ResamplerConfig::default();
        assert_eq!(resample(&x, 250.0, 100.0, &cfg).unwrap().len(), 1000);
        let same = resample(&x, 100.0, 100.0, &cfg).unwrap();
        assert_eq!(same, x);
        assert!(matches!(
            resample(&x, 100.0, 250.0, &cfg),
            Err(SignalError::Upsampling { .. })
        ));
    }

    #[test]
    fn resample_keeps_sine_frequency_and_amplitude() {
        let fs_in = 250.0;
        // 60 s so that 10 Hz sits exactly on a bin of the 100 Hz output
        let x = sine(10.0, fs_in, 15000, 0.3);
        {
            let y = resample(&x, fs_in, 100.0, &ResamplerConfig::default()).unwrap();
            assert_eq!(y.len(), 6000);
            // ignore the zero-padded edges
            let core = &y[1000..5000];
            let (f, amp) = dft_peak(core, 100.0);
            assert!((f - 10.0).abs() < 1e-9, "{f}");
            assert!((amp - 1.0).abs() < 0.01, "{amp}");
        }
        // non-integer ratio goes through the direct path
        let x = sine(7.0, 256.5, 12825, 0.0);
        let y = resample(&x, 256.5, 100.0, &ResamplerConfig::default()).unwrap();
        assert_eq!(y.len(), 5000);
        let (f, amp) = dft_peak(&y[1000..4000], 100.0);
        assert!((f - 7.0).abs() < 1e-9);
        assert!((amp - 1.0).abs() < 0.01, "{amp}");
    }

    #[test]
    fn butterworth_bandpass_response() {
        let sos = Sos::butterworth(4, 8.0, 13.0, 100.0).unwrap();
        assert_eq!(sos.sections.len(), 4);
        assert!((sos.magnitude_at(10.2, 100.0) - 1.0).abs() < 0.02);
        assert!((sos.magnitude_at(8.0, 100.0) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((sos.magnitude_at(13.0, 100.0) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(sos.magnitude_at(2.0, 100.0) < 1e-3);

        let lp = Sos::butterworth(4, 0.0, 2.5, 100.0).unwrap();
        assert!((lp.magnitude_at(0.0, 100.0) - 1.0).abs() < 1e-12);
        assert!((lp.magnitude_at(2.5, 100.0) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        let hp = Sos::butterworth(4, 25.0, 50.0, 100.0).unwrap();
        assert!((hp.magnitude_at(50.0, 100.0) - 1.0).abs() < 1e-12);
        assert!((hp.magnitude_at(25.0, 100.0) - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);

        assert!(Sos::butterworth(4, 0.0, 50.0, 100.0).is_err());
        assert!(Sos::butterworth(4, 10.0, 60.0, 100.0).is_err());
        assert!(Sos::butterworth(3, 10.0, 20.0, 100.0).is_err());
    }

    #[test]
    fn filtfilt_passes_and_rejects() {
        let fs = 100.0;
        let x = sine(10.0, fs, 6000, 0.0);
        let pass = Sos::butterworth(4, 8.0, 13.0, fs).unwrap().filtfilt(&x);
        let stop = Sos::butterworth(4, 0.5, 4.0, fs).unwrap().filtfilt(&x);
        let amp = |v: &[f64]| {
            let ms = v[500..5500].iter().map(|s| s * s).sum::<f64>() / 5000.0;
            libm::sqrt(2.0 * ms)
        };
        // the double pass squares the magnitude response
        assert!((amp(&pass) - 1.0).abs() < 0.02, "{}", amp(&pass));
        assert!(amp(&stop) < 0.05, "{}", amp(&stop));

        // zero phase: cross-correlation peaks at lag 0
        let xc = |lag: i64| -> f64 { (1000..5000).map(|i| x[i] * pass[(i as i64 + lag) as usize]).sum() };
        let best = (-5..=5).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn analytic_signal_of_cosine() {
        let fs = 100.0;
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|i| libm::cos(2.0 * PI * 5.0 * i as f64 / fs)).collect();
        let z = analytic_signal(&x);
        for (i, v) in z.iter().enumerate() {
            let t = 2.0 * PI * 5.0 * i as f64 / fs;
            assert!((v.re - libm::cos(t)).abs() < 1e-9);
            assert!((v.im - libm::sin(t)).abs() < 1e-9);
        }
    }
}
