//! Mixed-radix FFT for arbitrary lengths.
//!
//! Lengths whose prime factors are all small are transformed with a recursive
//! decimation-in-time scheme; anything with a large prime factor goes through
//! Bluestein's chirp-z algorithm on a power-of-two inner transform.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Largest prime handled by the generic butterfly before switching to Bluestein.
const MAX_DIRECT_RADIX: usize = 31;

/// A precomputed transform of one fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    strategy: Strategy,
}

#[derive(Debug, Clone)]
enum Strategy {
    Trivial,
    MixedRadix {
        factors: Vec<(usize, usize)>,
        twiddles: Vec<Complex64>,
    },
    Bluestein(Box<Bluestein>),
}

#[derive(Debug, Clone)]
struct Bluestein {
    inner: FftPlan,
    chirp: Vec<Complex64>,
    kernel_fft: Vec<Complex64>,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        if len <= 1 {
            return Self {
                len,
                strategy: Strategy::Trivial,
            };
        }
        let primes = prime_factors(len);
        let largest = primes.iter().copied().max().unwrap_or(1);
        let strategy = if largest <= MAX_DIRECT_RADIX {
            let mut factors = Vec::with_capacity(primes.len());
            let mut remaining = len;
            for p in radices(&primes) {
                remaining /= p;
                factors.push((p, remaining));
            }
            let twiddles = (0..len)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
                .collect();
            Strategy::MixedRadix { factors, twiddles }
        } else {
            Strategy::Bluestein(Box::new(Bluestein::new(len)))
        };
        Self { len, strategy }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X[k] = Σ x[n] e^{-2πikn/N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.strategy {
            Strategy::Trivial => {}
            Strategy::MixedRadix { factors, twiddles } => {
                let input = buf.to_vec();
                let mut scratch = Vec::with_capacity(MAX_DIRECT_RADIX);
                mixed_radix(buf, &input, 1, factors, twiddles, &mut scratch);
            }
            Strategy::Bluestein(b) => b.transform(buf),
        }
    }

    /// In-place inverse transform, normalized by `1/N`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.len.max(1) as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

fn mixed_radix(
    out: &mut [Complex64],
    input: &[Complex64],
    fstride: usize,
    factors: &[(usize, usize)],
    twiddles: &[Complex64],
    scratch: &mut Vec<Complex64>,
) {
    let (p, m) = factors[0];
    if m == 1 {
        for q in 0..p {
            out[q] = input[q * fstride];
        }
    } else {
        for q in 0..p {
            mixed_radix(
                &mut out[q * m..(q + 1) * m],
                &input[q * fstride..],
                fstride * p,
                &factors[1..],
                twiddles,
                scratch,
            );
        }
    }
    butterfly(out, fstride, p, m, twiddles, scratch);
}

fn butterfly(
    out: &mut [Complex64],
    fstride: usize,
    p: usize,
    m: usize,
    twiddles: &[Complex64],
    scratch: &mut Vec<Complex64>,
) {
    let n = twiddles.len();
    match p {
        2 => {
            for u in 0..m {
                let t = out[u + m] * twiddles[u * fstride];
                out[u + m] = out[u] - t;
                out[u] += t;
            }
            return;
        }
        3 => {
            let h = twiddles[fstride * m].im;
            for u in 0..m {
                let a0 = out[u];
                let a1 = out[u + m] * twiddles[u * fstride];
                let a2 = out[u + 2 * m] * twiddles[2 * u * fstride];
                let s = a1 + a2;
                let d = (a1 - a2) * Complex64::new(0.0, h);
                let c = a0 - s * 0.5;
                out[u] = a0 + s;
                out[u + m] = c + d;
                out[u + 2 * m] = c - d;
            }
            return;
        }
        4 => {
            for u in 0..m {
                let a0 = out[u];
                let a1 = out[u + m] * twiddles[u * fstride];
                let a2 = out[u + 2 * m] * twiddles[2 * u * fstride];
                let a3 = out[u + 3 * m] * twiddles[3 * u * fstride];
                let (s02, d02) = (a0 + a2, a0 - a2);
                let (s13, d13) = (a1 + a3, a1 - a3);
                // -i * d13
                let r = Complex64::new(d13.im, -d13.re);
                out[u] = s02 + s13;
                out[u + m] = d02 + r;
                out[u + 2 * m] = s02 - s13;
                out[u + 3 * m] = d02 - r;
            }
            return;
        }
        5 => {
            let w1 = twiddles[fstride * m];
            let w2 = twiddles[2 * fstride * m];
            for u in 0..m {
                let a0 = out[u];
                let a1 = out[u + m] * twiddles[u * fstride];
                let a2 = out[u + 2 * m] * twiddles[2 * u * fstride];
                let a3 = out[u + 3 * m] * twiddles[3 * u * fstride];
                let a4 = out[u + 4 * m] * twiddles[4 * u * fstride];
                let (s1, d1) = (a1 + a4, a1 - a4);
                let (s2, d2) = (a2 + a3, a2 - a3);
                let c1 = a0 + s1 * w1.re + s2 * w2.re;
                let c2 = a0 + s1 * w2.re + s2 * w1.re;
                // w.im is -sin, so these are -i·(sin·d) terms
                let e1 = d1 * w1.im + d2 * w2.im;
                let e2 = d1 * w2.im - d2 * w1.im;
                let j1 = Complex64::new(-e1.im, e1.re);
                let j2 = Complex64::new(-e2.im, e2.re);
                out[u] = a0 + s1 + s2;
                out[u + m] = c1 + j1;
                out[u + 4 * m] = c1 - j1;
                out[u + 2 * m] = c2 + j2;
                out[u + 3 * m] = c2 - j2;
            }
            return;
        }
        _ => {}
    }
    scratch.clear();
    scratch.resize(p, Complex64::new(0.0, 0.0));
    for u in 0..m {
        for (q1, s) in scratch.iter_mut().enumerate() {
            *s = out[u + q1 * m];
        }
        for q1 in 0..p {
            let k = u + q1 * m;
            let step = (fstride * k) % n;
            let mut idx = 0usize;
            let mut acc = scratch[0];
            for s in &scratch[1..] {
                idx += step;
                if idx >= n {
                    idx -= n;
                }
                acc += s * twiddles[idx];
            }
            out[k] = acc;
        }
    }
}

impl Bluestein {
    fn new(len: usize) -> Self {
        let inner_len = (2 * len - 1).next_power_of_two();
        let inner = FftPlan::new(inner_len);
        // chirp[k] = exp(-iπk²/N); k² taken mod 2N to keep the angle small
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let k2 = (k as u128 * k as u128 % (2 * len as u128)) as f64;
                Complex64::from_polar(1.0, -PI * k2 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); inner_len];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            kernel[k] = chirp[k].conj();
            kernel[inner_len - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            inner,
            chirp,
            kernel_fft: kernel,
        }
    }

    fn transform(&self, buf: &mut [Complex64]) {
        let n = buf.len();
        let m = self.inner.len();
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..n {
            work[k] = buf[k] * self.chirp[k];
        }
        self.inner.forward(&mut work);
        for (w, k) in work.iter_mut().zip(&self.kernel_fft) {
            *w *= k;
        }
        self.inner.inverse(&mut work);
        for k in 0..n {
            buf[k] = work[k] * self.chirp[k];
        }
    }
}

/// Radices in transform order: pairs of 2 merge into 4.
fn radices(primes: &[usize]) -> Vec<usize> {
    let twos = primes.iter().filter(|&&p| p == 2).count();
    let mut out = vec![4; twos / 2];
    if twos % 2 == 1 {
        out.push(2);
    }
    out.extend(primes.iter().copied().filter(|&p| p != 2));
    out
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Forward FFT of a real sequence; returns the full complex spectrum.
pub fn real_forward(x: &[f64]) -> Vec<Complex64> {
    let plan = FftPlan::new(x.len());
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    buf
}
