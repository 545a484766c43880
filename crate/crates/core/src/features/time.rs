//! Time-domain features of a single crop channel.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{flagged, log_spaced, ls_slope, mean, median, variance, FeatureError, FeatureRow};
use crate::linalg::{Matrix, SymmetricEigen};

/// Names in column order (alphabetical).
pub const TIME_FEATURE_NAMES: [&str; 22] = [
    "dfa",
    "energy",
    "fisher_information",
    "fractal_dimension",
    "higuchi_fd",
    "hjorth_activity",
    "hjorth_complexity",
    "hjorth_mobility",
    "hurst_exponent",
    "kurtosis",
    "line_length",
    "lyapunov_exponent",
    "maximum",
    "mean",
    "median",
    "minimum",
    "nonlinear_energy",
    "petrosian_fd",
    "skewness",
    "svd_entropy",
    "zero_crossings",
    "zero_crossings_derivative",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeFeatureConfig {
    pub higuchi_kmax: usize,
    pub dfa_min_window: usize,
    pub dfa_n_windows: usize,
    pub embed_tau: usize,
    pub embed_dim: usize,
    pub lle_tau: usize,
    pub lle_dim: usize,
    /// Neighbours closer than this in time are not considered.
    pub lle_theiler: usize,
    /// Number of divergence steps used in the slope fit.
    pub lle_fit_steps: usize,
    pub hurst_min_block: usize,
    pub hurst_n_blocks: usize,
    /// Subtract the small-sample expectation of R/S (Anis-Lloyd).
    pub hurst_correction: bool,
}

impl Default for TimeFeatureConfig {
    fn default() -> Self {
        Self {
            higuchi_kmax: 10,
            dfa_min_window: 4,
            dfa_n_windows: 10,
            embed_tau: 2,
            embed_dim: 10,
            lle_tau: 4,
            lle_dim: 10,
            lle_theiler: 10,
            lle_fit_steps: 10,
            hurst_min_block: 8,
            hurst_n_blocks: 10,
            hurst_correction: true,
        }
    }
}

impl TimeFeatureConfig {
    pub fn validate(&self, crop_len: usize) -> Result<(), FeatureError> {
        let positive = [
            self.higuchi_kmax,
            self.dfa_min_window,
            self.dfa_n_windows,
            self.embed_tau,
            self.embed_dim,
            self.lle_tau,
            self.lle_dim,
            self.lle_fit_steps,
            self.hurst_min_block,
            self.hurst_n_blocks,
        ];
        if positive.contains(&0) {
            return Err(FeatureError::Config("time feature parameters must be positive"));
        }
        if (self.embed_dim - 1) * self.embed_tau + 1 > crop_len
            || (self.lle_dim - 1) * self.lle_tau + self.lle_fit_steps + self.lle_theiler + 2 > crop_len
            || 2 * self.higuchi_kmax > crop_len
        {
            return Err(FeatureError::Config("embedding does not fit in a crop"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleStats {
    pub maximum: f64,
    pub mean: f64,
    pub median: f64,
    pub minimum: f64,
    pub energy: f64,
    pub line_length: f64,
    pub nonlinear_energy: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub zero_crossings: f64,
    pub zero_crossings_derivative: f64,
}

/// Strict sign changes; zeros are skipped rather than counted.
pub fn zero_crossings(x: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in x {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

pub fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn simple_stats(x: &[f64]) -> SimpleStats {
    let n = x.len() as f64;
    let m = mean(x);
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(m3 / libm::pow(m2, 1.5)), Some(m4 / (m2 * m2)))
    } else {
        (None, None)
    };
    let nonlinear_energy = if x.len() >= 3 {
        x.windows(3).map(|w| w[1] * w[1] - w[0] * w[2]).sum::<f64>() / (x.len() - 2) as f64
    } else {
        0.0
    };
    let dx = diff(x);
    SimpleStats {
        maximum: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: m,
        median: median(x),
        minimum: x.iter().copied().fold(f64::INFINITY, f64::min),
        energy: x.iter().map(|v| v * v).sum::<f64>() / n,
        line_length: dx.iter().map(|d| d.abs()).sum(),
        nonlinear_energy,
        skewness,
        kurtosis,
        zero_crossings: zero_crossings(x) as f64,
        zero_crossings_derivative: zero_crossings(&dx) as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hjorth {
    pub activity: f64,
    pub mobility: f64,
    pub complexity: f64,
}

pub fn hjorth(x: &[f64]) -> Result<Hjorth, FeatureError> {
    let activity = variance(x);
    if !(activity > 0.0) {
        return Err(FeatureError::ConstantSignal);
    }
    let dx = diff(x);
    let v1 = variance(&dx);
    if !(v1 > 0.0) {
        return Ok(Hjorth {
            activity,
            mobility: 0.0,
            complexity: 0.0,
        });
    }
    let v2 = variance(&diff(&dx));
    let mobility = libm::sqrt(v1 / activity);
    let complexity = libm::sqrt(v2 / v1) / mobility;
    Ok(Hjorth {
        activity,
        mobility,
        complexity,
    })
}

/// Higuchi fractal dimension; degenerate curves give 1.0.
pub fn higuchi_fd(x: &[f64], kmax: usize) -> f64 {
    let n = x.len();
    let mut lx = Vec::with_capacity(kmax);
    let mut ly = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut lk = 0.0;
        let mut used = 0;
        for m in 0..k {
            let steps = (n - 1 - m) / k;
            if steps == 0 {
                continue;
            }
            let mut len = 0.0;
            for i in 1..=steps {
                len += (x[m + i * k] - x[m + (i - 1) * k]).abs();
            }
            lk += len * (n - 1) as f64 / (steps * k) as f64 / k as f64;
            used += 1;
        }
        if used == 0 {
            continue;
        }
        let lk = lk / used as f64;
        if !(lk > 0.0) {
            return 1.0;
        }
        lx.push(libm::log(1.0 / k as f64));
        ly.push(libm::log(lk));
    }
    if lx.len() < 2 {
        return 1.0;
    }
    ls_slope(&lx, &ly)
}

pub fn petrosian_fd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let dx = diff(x);
    let n_delta = dx.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64;
    let ln = libm::log10(n);
    ln / (ln + libm::log10(n / (n + 0.4 * n_delta)))
}

/// Katz fractal dimension with amplitude-only distances; degenerate → 1.0.
pub fn katz_fd(x: &[f64]) -> f64 {
    let dx = diff(x);
    let total: f64 = dx.iter().map(|d| d.abs()).sum();
    if dx.is_empty() || !(total > 0.0) {
        return 1.0;
    }
    let a = total / dx.len() as f64;
    let d = x.iter().map(|v| (v - x[0]).abs()).fold(0.0, f64::max);
    let num = libm::log10(total / a);
    let den = libm::log10(d / a);
    if den == 0.0 || !(num / den).is_finite() {
        return 1.0;
    }
    num / den
}

/// Detrended fluctuation analysis exponent.
pub fn dfa(x: &[f64], cfg: &TimeFeatureConfig) -> Result<f64, FeatureError> {
    let n = x.len();
    if n < 16 {
        return Err(FeatureError::SignalTooShort { needed: 16, got: n });
    }
    if !(variance(x) > 0.0) {
        return Err(FeatureError::ConstantSignal);
    }
    let m = mean(x);
    let mut y = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &v in x {
        acc += v - m;
        y.push(acc);
    }
    let sizes = log_spaced(cfg.dfa_min_window.max(3), n / 4, cfg.dfa_n_windows);
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &w in &sizes {
        let n_win = n / w;
        let tm = (w - 1) as f64 / 2.0;
        let stt = (w * (w * w - 1)) as f64 / 12.0;
        let mut ss = 0.0;
        for seg in y.chunks_exact(w).take(n_win) {
            let ym = mean(seg);
            let sty: f64 = seg.iter().enumerate().map(|(t, v)| (t as f64 - tm) * (v - ym)).sum();
            let slope = sty / stt;
            ss += seg
                .iter()
                .enumerate()
                .map(|(t, v)| {
                    let r = v - ym - slope * (t as f64 - tm);
                    r * r
                })
                .sum::<f64>();
        }
        let f = libm::sqrt(ss / (n_win * w) as f64);
        if f > 0.0 {
            lx.push(libm::log(w as f64));
            ly.push(libm::log(f));
        }
    }
    if lx.len() < 2 {
        return Err(FeatureError::ConstantSignal);
    }
    Ok(ls_slope(&lx, &ly))
}

/// Expected R/S of white noise at block size `n` (Anis-Lloyd, Peters).
fn expected_rs(n: usize) -> f64 {
    let nf = n as f64;
    let sum: f64 = (1..n).map(|i| libm::sqrt((nf - i as f64) / i as f64)).sum();
    let front = if n <= 340 {
        libm::exp(libm::lgamma((nf - 1.0) / 2.0) - libm::lgamma(nf / 2.0)) / libm::sqrt(core::f64::consts::PI)
    } else {
        1.0 / libm::sqrt(nf * core::f64::consts::FRAC_PI_2)
    };
    (nf - 0.5) / nf * front * sum
}

fn rescaled_range(block: &[f64]) -> Option<f64> {
    let m = mean(block);
    let mut acc = 0.0;
    let mut hi = 0.0f64;
    let mut lo = 0.0f64;
    let mut ss = 0.0;
    for &v in block {
        let d = v - m;
        acc += d;
        hi = hi.max(acc);
        lo = lo.min(acc);
        ss += d * d;
    }
    let s = libm::sqrt(ss / block.len() as f64);
    (s > 0.0).then(|| (hi - lo) / s)
}

/// Hurst exponent from the rescaled range over log-spaced block sizes.
pub fn hurst(x: &[f64], cfg: &TimeFeatureConfig) -> Result<f64, FeatureError> {
    let n = x.len();
    if n < 20 {
        return Err(FeatureError::SignalTooShort { needed: 20, got: n });
    }
    if !(variance(x) > 0.0) {
        return Err(FeatureError::ConstantSignal);
    }
    let sizes = log_spaced(cfg.hurst_min_block.max(4).min(n / 2), n / 2, cfg.hurst_n_blocks);
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut le = Vec::new();
    for &w in &sizes {
        let vals: Vec<f64> = x.chunks_exact(w).filter_map(rescaled_range).collect();
        if vals.is_empty() {
            continue;
        }
        let rs = mean(&vals);
        if rs > 0.0 {
            lx.push(libm::log(w as f64));
            ly.push(libm::log(rs));
            le.push(libm::log(expected_rs(w)));
        }
    }
    if lx.len() < 2 {
        return Err(FeatureError::ConstantSignal);
    }
    let h = ls_slope(&lx, &ly);
    Ok(if cfg.hurst_correction {
        0.5 + h - ls_slope(&lx, &le)
    } else {
        h
    })
}

/// Largest Lyapunov exponent (Rosenstein), in nats per sample.
pub fn lyapunov(x: &[f64], cfg: &TimeFeatureConfig) -> Result<f64, FeatureError> {
    let (tau, dim, k_fit) = (cfg.lle_tau, cfg.lle_dim, cfg.lle_fit_steps);
    let n = x.len();
    let span = (dim - 1) * tau;
    if n < span + 20 || n <= span + k_fit + cfg.lle_theiler + 1 {
        return Err(FeatureError::SignalTooShort {
            needed: (span + 20).max(span + k_fit + cfg.lle_theiler + 2),
            got: n,
        });
    }
    let m_pts = n - span;
    let m_search = m_pts - k_fit;

    // Squared distances along each diagonal via a strided sliding sum over
    // the pointwise squared differences.
    let mut best = vec![f64::INFINITY; m_search];
    let mut nn = vec![usize::MAX; m_search];
    let mut e = vec![0.0; n];
    let mut diag = vec![0.0; m_search];
    for lag in (cfg.lle_theiler + 1)..m_search {
        let len_e = n - lag;
        for (i, ei) in e[..len_e].iter_mut().enumerate() {
            let d = x[i] - x[i + lag];
            *ei = d * d;
        }
        let count = m_search - lag;
        for (i, di) in diag[..tau.min(count)].iter_mut().enumerate() {
            *di = (0..dim).map(|mm| e[i + mm * tau]).sum();
        }
        for i in tau..count {
            diag[i] = diag[i - tau] + (e[i + span] - e[i - tau]);
        }
        // exact zeros never win
        for (i, &d) in diag[..count].iter().enumerate() {
            if d > 0.0 {
                let j = i + lag;
                if d < best[i] {
                    best[i] = d;
                    nn[i] = j;
                }
                if d < best[j] {
                    best[j] = d;
                    nn[j] = i;
                }
            }
        }
    }

    let dist = |a: usize, b: usize| -> f64 {
        let mut s = 0.0;
        for mm in 0..dim {
            let d = x[a + mm * tau] - x[b + mm * tau];
            s += d * d;
        }
        libm::sqrt(s)
    };
    let mut sum = vec![0.0; k_fit + 1];
    let mut cnt = vec![0usize; k_fit + 1];
    for (j, &i) in nn.iter().enumerate() {
        if i == usize::MAX {
            continue;
        }
        for k in 0..=k_fit {
            let d = dist(j + k, i + k);
            if d > 0.0 {
                sum[k] += libm::log(d);
                cnt[k] += 1;
            }
        }
    }
    let mut ks = Vec::new();
    let mut ys = Vec::new();
    for k in 0..=k_fit {
        if cnt[k] > 0 {
            ks.push(k as f64);
            ys.push(sum[k] / cnt[k] as f64);
        }
    }
    if ks.len() < 2 {
        return Err(FeatureError::NoValidNeighbors);
    }
    Ok(ls_slope(&ks, &ys))
}

/// Singular values of the delay-embedding matrix, descending.
fn embedding_singular_values(x: &[f64], tau: usize, dim: usize) -> Vec<f64> {
    let rows = x.len() - (dim - 1) * tau;
    let mut g = Matrix::zeros(dim);
    for a in 0..dim {
        for b in a..dim {
            let xa = &x[a * tau..a * tau + rows];
            let xb = &x[b * tau..b * tau + rows];
            let s: f64 = xa.iter().zip(xb).map(|(p, q)| p * q).sum();
            g[(a, b)] = s;
            g[(b, a)] = s;
        }
    }
    let mut sv: Vec<f64> = SymmetricEigen::new(&g)
        .values
        .iter()
        .map(|&l| libm::sqrt(l.max(0.0)))
        .collect();
    sv.reverse();
    sv
}

/// `(svd_entropy, fisher_information)` of the delay embedding.
pub fn embed_entropies(x: &[f64], tau: usize, dim: usize) -> Result<(f64, f64), FeatureError> {
    let needed = (dim - 1) * tau + 1;
    if x.len() < needed {
        return Err(FeatureError::SignalTooShort { needed, got: x.len() });
    }
    if !(variance(x) > 0.0) {
        return Err(FeatureError::ConstantSignal);
    }
    let sv = embedding_singular_values(x, tau, dim);
    let total: f64 = sv.iter().sum();
    let p: Vec<f64> = sv.iter().map(|s| s / total).collect();
    let entropy = -p.iter().filter(|&&v| v > 0.0).map(|&v| v * libm::log(v)).sum::<f64>();
    let fisher = p
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]) / w[0])
        .sum();
    Ok((entropy, fisher))
}

/// All 22 time features of one crop channel, in [`TIME_FEATURE_NAMES`] order.
pub fn time_features(x: &[f64], cfg: &TimeFeatureConfig) -> FeatureRow {
    let st = simple_stats(x);
    let hj = hjorth(x);
    let ent = embed_entropies(x, cfg.embed_tau, cfg.embed_dim);
    let mut row = FeatureRow::with_capacity(TIME_FEATURE_NAMES.len());
    let opt = |v: Option<f64>| flagged(v.ok_or(FeatureError::ConstantSignal));
    row.push(flagged(dfa(x, cfg)));
    row.push_ok(st.energy);
    row.push(flagged(ent.clone().map(|e| e.1)));
    row.push_ok(katz_fd(x));
    row.push_ok(higuchi_fd(x, cfg.higuchi_kmax));
    row.push(flagged(hj.clone().map(|h| h.activity)));
    row.push(flagged(hj.clone().map(|h| h.complexity)));
    row.push(flagged(hj.map(|h| h.mobility)));
    row.push(flagged(hurst(x, cfg)));
    row.push(opt(st.kurtosis));
    row.push_ok(st.line_length);
    row.push(flagged(lyapunov(x, cfg)));
    row.push_ok(st.maximum);
    row.push_ok(st.mean);
    row.push_ok(st.median);
    row.push_ok(st.minimum);
    row.push_ok(st.nonlinear_energy);
    row.push_ok(petrosian_fd(x));
    row.push(opt(st.skewness));
    row.push(flagged(ent.map(|e| e.0)));
    row.push_ok(st.zero_crossings);
    row.push_ok(st.zero_crossings_derivative);
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn cumsum(x: &[f64]) -> Vec<f64> {
        x.iter()
            .scan(0.0, |a, v| {
                *a += v;
                Some(*a)
            })
            .collect()
    }

    #[test]
    fn simple_stat_examples() {
        let s = simple_stats(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(s.line_length, 3.0);
        assert_eq!(s.zero_crossings, 0.0);
        assert_eq!(s.mean, 0.5);

        let c = simple_stats(&[5.0; 600]);
        assert_eq!(c.energy, 25.0);
        assert_eq!(c.line_length, 0.0);
        assert_eq!(c.nonlinear_energy, 0.0);
        assert!(c.skewness.is_none() && c.kurtosis.is_none());
        let row = time_features(&[5.0; 600], &TimeFeatureConfig::default());
        for name in ["skewness", "kurtosis"] {
            let i = TIME_FEATURE_NAMES.iter().position(|n| *n == name).unwrap();
            assert_eq!((row.values[i], row.valid[i]), (0.0, false));
        }

        let sine: Vec<f64> = (0..200).map(|i| libm::sin(2.0 * PI * i as f64 / 100.0)).collect();
        let zc = simple_stats(&sine).zero_crossings;
        assert!((3.0..=5.0).contains(&zc), "{zc}");
        assert_eq!(zero_crossings(&[1.0, 0.0, -1.0]), 1);
    }

    #[test]
    fn hjorth_examples() {
        assert_eq!(hjorth(&[3.0; 100]), Err(FeatureError::ConstantSignal));
        let (f, fs) = (7.0, 100.0);
        let sine: Vec<f64> = (0..6000).map(|i| libm::sin(2.0 * PI * f * i as f64 / fs)).collect();
        let h = hjorth(&sine).unwrap();
        let expected = 2.0 * libm::sin(PI * f / fs);
        assert!(
            (h.mobility - expected).abs() < 1e-3 * expected,
            "{} vs {expected}",
            h.mobility
        );
        let above = (0..100)
            .filter(|&s| hjorth(&noise(s, 600)).unwrap().complexity > 1.0)
            .count();
        assert_eq!(above, 100);
    }

    #[test]
    fn fractal_examples() {
        let ramp: Vec<f64> = (0..600).map(|i| i as f64 * 0.3).collect();
        assert!((higuchi_fd(&ramp, 10) - 1.0).abs() < 0.05);
        let m: f64 = (0..100).map(|s| higuchi_fd(&noise(s, 600), 10)).sum::<f64>() / 100.0;
        assert!((m - 2.0).abs() < 0.1, "{m}");
        assert_eq!(petrosian_fd(&[2.0; 600]), 1.0);
        assert_eq!(katz_fd(&[2.0; 600]), 1.0);
        assert_eq!(higuchi_fd(&[2.0; 600], 10), 1.0);
    }

    #[test]
    fn dfa_examples() {
        let cfg = TimeFeatureConfig::default();
        let white: f64 = (0..100).map(|s| dfa(&noise(s, 600), &cfg).unwrap()).sum::<f64>() / 100.0;
        assert!((white - 0.5).abs() < 0.1, "{white}");
        let walk: f64 = (0..100)
            .map(|s| dfa(&cumsum(&noise(s, 600)), &cfg).unwrap())
            .sum::<f64>()
            / 100.0;
        assert!((walk - 1.5).abs() < 0.15, "{walk}");
        assert_eq!(dfa(&[1.0; 600], &cfg), Err(FeatureError::ConstantSignal));
    }

    #[test]
    fn hurst_examples() {
        let cfg = TimeFeatureConfig::default();
        let white: f64 = (0..100).map(|s| hurst(&noise(s, 600), &cfg).unwrap()).sum::<f64>() / 100.0;
        assert!((white - 0.5).abs() < 0.1, "{white}");
        let walk: f64 = (0..100)
            .map(|s| hurst(&cumsum(&noise(s, 600)), &cfg).unwrap())
            .sum::<f64>()
            / 100.0;
        assert!((walk - 1.0).abs() < 0.15, "{walk}");
        assert_eq!(hurst(&[1.0; 600], &cfg), Err(FeatureError::ConstantSignal));
    }

    #[test]
    fn lyapunov_examples() {
        let cfg = TimeFeatureConfig {
            lle_tau: 1,
            lle_dim: 2,
            lle_theiler: 1,
            lle_fit_steps: 4,
            ..TimeFeatureConfig::default()
        };
        // Jacobian average over a long trajectory gives the reference value.
        let mut v: f64 = 0.3141;
        let mut jac = 0.0;
        for _ in 0..100_000 {
            jac += libm::log((4.0 - 8.0 * v).abs());
            v = 4.0 * v * (1.0 - v);
        }
        let oracle = jac / 100_000.0;
        assert!((oracle - core::f64::consts::LN_2).abs() < 0.02);
        let mut traj = Vec::with_capacity(2000);
        let mut v = 0.2718;
        for _ in 0..2000 {
            traj.push(v);
            v = 4.0 * v * (1.0 - v);
        }
        let l = lyapunov(&traj, &cfg).unwrap();
        assert!((l - oracle).abs() < 0.1, "{l} vs {oracle}");

        let damped: Vec<f64> = (0..600)
            .map(|i| libm::exp(-0.01 * i as f64) * libm::sin(2.0 * PI * i as f64 / 37.0))
            .collect();
        assert!(lyapunov(&damped, &TimeFeatureConfig::default()).unwrap() <= 0.0);
        assert_eq!(
            lyapunov(&[1.0; 600], &TimeFeatureConfig::default()),
            Err(FeatureError::NoValidNeighbors)
        );
    }

    #[test]
    fn lyapunov_matches_brute_force_neighbours() {
        let cfg = TimeFeatureConfig::default();
        let x = noise(3, 300);
        let (tau, dim, k_fit) = (cfg.lle_tau, cfg.lle_dim, cfg.lle_fit_steps);
        let m_search = x.len() - (dim - 1) * tau - k_fit;
        let d = |a: usize, b: usize| {
            libm::sqrt(
                (0..dim)
                    .map(|m| libm::pow(x[a + m * tau] - x[b + m * tau], 2.0))
                    .sum::<f64>(),
            )
        };
        let mut sum = vec![0.0; k_fit + 1];
        for j in 0..m_search {
            let i = (0..m_search)
                .filter(|&i| i.abs_diff(j) > cfg.lle_theiler)
                .min_by(|&a, &b| d(j, a).total_cmp(&d(j, b)))
                .unwrap();
            for (k, s) in sum.iter_mut().enumerate() {
                *s += libm::log(d(j + k, i + k));
            }
        }
        let ks: Vec<f64> = (0..=k_fit).map(|k| k as f64).collect();
        let oracle = ls_slope(&ks, &sum.iter().map(|s| s / m_search as f64).collect::<Vec<_>>());
        assert!((lyapunov(&x, &cfg).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn embedding_examples() {
        let sine: Vec<f64> = (0..600).map(|i| libm::sin(2.0 * PI * i as f64 / 23.0)).collect();
        let (h, _) = embed_entropies(&sine, 2, 10).unwrap();
        assert!(h < libm::log(3.0), "{h}");
        for s in 0..20 {
            let (h, fi) = embed_entropies(&noise(s, 600), 2, 10).unwrap();
            assert!((h - libm::log(10.0)).abs() < 0.05 * libm::log(10.0));
            assert!(fi >= 0.0);
        }
        assert_eq!(embed_entropies(&[1.0; 600], 2, 10), Err(FeatureError::ConstantSignal));
    }

    #[test]
    fn all_outputs_finite_and_valid_on_noise() {
        let cfg = TimeFeatureConfig::default();
        cfg.validate(600).unwrap();
        let row = time_features(&noise(9, 600), &cfg);
        assert_eq!(row.len(), 22);
        assert!(row.values.iter().all(|v| v.is_finite()));
        assert!(row.valid.iter().all(|v| *v));
    }
}
