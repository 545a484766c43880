//! Per-crop feature computation.
//!
//! Every feature function is pure. Degenerate inputs surface as a
//! [`FeatureError`], which extractors turn into a flagged zero so that
//! aggregation never sees a non-finite value.

pub mod connectivity;
pub mod extract;
pub mod label;
pub mod spectral;
pub mod time;

use thiserror::Error;

pub use label::{Band, ChannelRef, Domain, FeatureLabel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("signal has zero variance")]
    ConstantSignal,
    #[error("no valid nearest neighbours in the embedding")]
    NoValidNeighbors,
    #[error("no frequency bins fall inside band {lo}-{hi} Hz")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("signal of length {got} too short, need {needed}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid feature configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
}

/// `(value, valid)`: invalid results are reported as `0.0`.
pub fn flagged(r: Result<f64, FeatureError>) -> (f64, bool) {
    match r {
        Ok(v) if v.is_finite() => (v, true),
        _ => (0.0, false),
    }
}

/// Feature values of one crop, with a validity flag per value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureRow {
    pub values: alloc::vec::Vec<f64>,
    pub valid: alloc::vec::Vec<bool>,
}

impl FeatureRow {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            values: alloc::vec::Vec::with_capacity(n),
            valid: alloc::vec::Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, (v, ok): (f64, bool)) {
        self.values.push(v);
        self.valid.push(ok);
    }

    pub fn push_ok(&mut self, v: f64) {
        self.push(flagged(Ok(v)));
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub(crate) fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Least-squares slope of `y` on `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Median of a copy of `x`; the mean of the central pair for even lengths.
pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// `n` roughly log-spaced distinct integers in `[lo, hi]`.
pub(crate) fn log_spaced(lo: usize, hi: usize, n: usize) -> alloc::vec::Vec<usize> {
    let mut out = alloc::vec::Vec::with_capacity(n);
    if hi < lo || n == 0 {
        return out;
    }
    let (a, b) = (libm::log(lo as f64), libm::log(hi as f64));
    for i in 0..n {
        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        let v = libm::round(libm::exp(a + t * (b - a))) as usize;
        let v = v.clamp(lo, hi);
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}
