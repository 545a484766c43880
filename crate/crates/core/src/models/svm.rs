//! RBF-kernel C-SVC trained by SMO with second-order working-set selection.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ModelError;

const TAU: f64 = 1e-12;

/// How γ is chosen from the input dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / √d`
    InvSqrtDim,
    /// `1 / d`
    InvDim,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, dim: usize) -> f64 {
        match self {
            Self::InvSqrtDim => 1.0 / libm::sqrt(dim.max(1) as f64),
            Self::InvDim => 1.0 / dim.max(1) as f64,
            Self::Value(g) => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: Gamma,
    pub smo_tol: f64,
    pub max_iter: usize,
    /// Kernel rows kept in memory, in megabytes.
    pub cache_mb: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 100.0,
            gamma: Gamma::InvSqrtDim,
            smo_tol: 1e-3,
            max_iter: 10_000_000,
            cache_mb: 256,
        }
    }
}

impl SvmConfig {
    pub fn tangent() -> Self {
        Self {
            c: 10.0,
            gamma: Gamma::InvDim,
            ..Self::default()
        }
    }

    pub fn raw_covariance() -> Self {
        Self {
            c: 1000.0,
            gamma: Gamma::InvDim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let g_ok = match self.gamma {
            Gamma::Value(g) => g > 0.0 && g.is_finite(),
            _ => true,
        };
        if !(self.c > 0.0 && self.c.is_finite() && self.smo_tol > 0.0 && self.max_iter > 0 && g_ok) {
            return Err(ModelError::Config("svm needs C > 0, gamma > 0, tol > 0"));
        }
        Ok(())
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    libm::exp(-gamma * d2)
}

struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64, cache_mb: usize) -> Self {
        let n = x.len();
        let per_row = 8 * n.max(1);
        let capacity = (cache_mb * 1024 * 1024 / per_row).clamp(2, n.max(2));
        Self {
            x,
            gamma,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() == self.capacity {
                let old = self.order.pop_front().unwrap();
                self.rows[old] = None;
            }
            let xi = &self.x[i];
            self.rows[i] = Some(self.x.iter().map(|xj| rbf(xi, xj, self.gamma)).collect());
            self.order.push_back(i);
        }
        self.rows[i].as_deref().unwrap()
    }
}

/// Dual solution of `min ½αᵀQα − Σα`, `0 ≤ α ≤ C`, `yᵀα = 0`, `Q = yyᵀ∘K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision offset: `f(x) = Σ αᵢyᵢk(xᵢ,x) + b`.
    pub b: f64,
    /// Dual objective in maximization form `Σα − ½αᵀQα`.
    pub objective: f64,
    pub iterations: usize,
}

/// Solves the C-SVC dual (Fan, Chen and Lin working-set selection).
pub fn smo(x: &[Vec<f64>], y: &[bool], gamma: f64, cfg: &SvmConfig) -> Result<SmoSolution, ModelError> {
    let n = x.len();
    let c = cfg.c;
    let ys: Vec<f64> = y.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut k = KernelRows::new(x, gamma, cfg.cache_mb);
    let qd = 1.0;
    let up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iter = 0;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], ys[t]) && -ys[t] * grad[t] > gmax {
                gmax = -ys[t] * grad[t];
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i != usize::MAX {
            let ki = k.row(i);
            for t in 0..n {
                if !low(alpha[t], ys[t]) {
                    continue;
                }
                let yg = ys[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let diff = gmax + yg;
                if diff > 0.0 {
                    let mut quad = qd + qd - 2.0 * ki[t];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(diff * diff) / quad;
                    if obj < obj_min {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < cfg.smo_tol {
            break;
        }
        iter += 1;
        if iter > cfg.max_iter {
            return Err(ModelError::NoConvergence(cfg.max_iter));
        }

        let kij = k.row(i)[j];
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let mut quad = 2.0 * qd - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        if ys[i] != ys[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = (alpha[i] - ai_old) * ys[i];
        let dj = (alpha[j] - aj_old) * ys[j];
        {
            let ki = k.row(i).to_vec();
            let kj = k.row(j);
            for t in 0..n {
                grad[t] += ys[t] * (ki[t] * di + kj[t] * dj);
            }
        }
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = -0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    Ok(SmoSolution {
        alpha,
        b: -rho,
        objective,
        iterations: iter,
    })
}

/// Sigmoid `P(+1 | f) = 1 / (1 + exp(A·f + B))` fitted by Newton's method
/// with regularized targets (Lin, Lin and Weng).
pub fn platt_fit(scores: &[f64], y: &[bool]) -> (f64, f64) {
    let prior1 = y.iter().filter(|t| **t).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&p| if p { hi } else { lo }).collect();
    let (min_step, sigma, eps) = (1e-10, 1e-12, 1e-5);
    let mut a = 0.0;
    let mut b = libm::log((prior0 + 1.0) / (prior1 + 1.0));
    let loss = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(f, ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + libm::log1p(libm::exp(-z))
                } else {
                    (ti - 1.0) * z + libm::log1p(libm::exp(z))
                }
            })
            .sum()
    };
    let mut fval = loss(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (f, ti) in scores.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = libm::exp(-z);
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = libm::exp(z);
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if libm::fabs(g1) < eps && libm::fabs(g2) < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = loss(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < min_step {
            break;
        }
    }
    (a, b)
}

pub fn sigmoid_prob(score: f64, a: f64, b: f64) -> f64 {
    let z = score * a + b;
    if z >= 0.0 {
        let e = libm::exp(-z);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub gamma: f64,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢyᵢ` per support vector.
    pub coef: Vec<f64>,
    pub b: f64,
    pub platt_a: f64,
    pub platt_b: f64,
}

impl Svm {
    pub fn fit(x: &[Vec<f64>], y: &[bool], cfg: &SvmConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        super::check_targets(x, y)?;
        let gamma = cfg.gamma.resolve(x[0].len());
        let sol = smo(x, y, gamma, cfg)?;
        let mut support_vectors = Vec::new();
        let mut coef = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support_vectors.push(x[i].clone());
                coef.push(if y[i] { a } else { -a });
            }
        }
        let mut svm = Self {
            gamma,
            c: cfg.c,
            support_vectors,
            coef,
            b: sol.b,
            platt_a: 0.0,
            platt_b: 0.0,
        };
        let scores: Vec<f64> = x.iter().map(|r| svm.decision(r)).collect();
        let (a, b) = platt_fit(&scores, y);
        svm.platt_a = a;
        svm.platt_b = b;
        Ok(svm)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.b
    }

    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        sigmoid_prob(self.decision(x), self.platt_a, self.platt_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gram(x: &[Vec<f64>], y: &[bool], gamma: f64) -> Vec<Vec<f64>> {
        let s = |t: bool| if t { 1.0 } else { -1.0 };
        (0..x.len())
            .map(|i| {
                (0..x.len())
                    .map(|j| s(y[i]) * s(y[j]) * rbf(&x[i], &x[j], gamma))
                    .collect()
            })
            .collect()
    }

    fn dual(q: &[Vec<f64>], a: &[f64]) -> f64 {
        let n = a.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q[i][j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    }

    /// Projection onto `{0 ≤ a ≤ C, yᵀa = 0}` by bisection on the multiplier.
    fn project(v: &[f64], s: &[f64], c: f64) -> Vec<f64> {
        let at = |mu: f64| -> Vec<f64> { v.iter().zip(s).map(|(vi, si)| (vi - mu * si).clamp(0.0, c)).collect() };
        let h = |mu: f64| -> f64 { at(mu).iter().zip(s).map(|(a, si)| a * si).sum() };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    }

    /// Dense projected-gradient ascent on the dual.
    fn qp_oracle(q: &[Vec<f64>], y: &[bool], c: f64) -> f64 {
        let n = q.len();
        let s: Vec<f64> = y.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
        let lmax: f64 = (0..n)
            .map(|i| q[i].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let step = 1.0 / lmax;
        let mut a = vec![0.0; n];
        for _ in 0..200_000 {
            let g: Vec<f64> = (0..n)
                .map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>())
                .collect();
            let v: Vec<f64> = a.iter().zip(&g).map(|(ai, gi)| ai + step * gi).collect();
            a = project(&v, &s, c);
        }
        dual(q, &a)
    }

    fn blobs(n: usize, sep: f64, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let t = i % 2 == 0;
            let c = if t { sep } else { -sep };
            let p: f64 = StandardNormal.sample(&mut *rng);
            let q: f64 = StandardNormal.sample(&mut *rng);
            x.push(vec![c + p, c + q]);
            y.push(t);
        }
        (x, y)
    }

    #[test]
    fn dual_objective_matches_qp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, y) = blobs(20, 0.6, &mut rng);
        for c in [0.5, 10.0] {
            let cfg = SvmConfig {
                c,
                smo_tol: 1e-6,
                ..SvmConfig::default()
            };
            let sol = smo(&x, &y, 0.5, &cfg).unwrap();
            let q = gram(&x, &y, 0.5);
            assert!((dual(&q, &sol.alpha) - sol.objective).abs() < 1e-9);
            let oracle = qp_oracle(&q, &y, c);
            assert!(
                (sol.objective - oracle).abs() < 1e-4,
                "C={c}: {} vs {oracle}",
                sol.objective
            );
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (x, y) = blobs(80, 0.5, &mut rng);
        let cfg = SvmConfig {
            c: 5.0,
            ..SvmConfig::default()
        };
        let sol = smo(&x, &y, 0.7, &cfg).unwrap();
        let tol = 2.0 * cfg.smo_tol;
        let s = |t: bool| if t { 1.0 } else { -1.0 };
        let mut sum = 0.0;
        for i in 0..x.len() {
            let a = sol.alpha[i];
            assert!((0.0..=cfg.c).contains(&a));
            sum += a * s(y[i]);
            let f: f64 = (0..x.len())
                .map(|j| sol.alpha[j] * s(y[j]) * rbf(&x[j], &x[i], 0.7))
                .sum::<f64>()
                + sol.b;
            let m = s(y[i]) * f;
            if a == 0.0 {
                assert!(m >= 1.0 - tol, "{i}: {m}");
            } else if a == cfg.c {
                assert!(m <= 1.0 + tol, "{i}: {m}");
            } else {
                assert!((m - 1.0).abs() <= tol, "{i}: {m}");
            }
        }
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn separable_blobs_and_xor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, y) = blobs(60, 4.0, &mut rng);
        let (xt, yt) = blobs(60, 4.0, &mut rng);
        let svm = Svm::fit(&x, &y, &SvmConfig::default()).unwrap();
        for (r, &t) in xt.iter().zip(&yt) {
            assert_eq!(svm.predict_proba_row(r) > 0.5, t);
            assert_eq!(svm.decision(r) > 0.0, t);
        }

        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![false, false, true, true];
        let cfg = SvmConfig {
            gamma: Gamma::Value(1.0),
            ..SvmConfig::default()
        };
        let svm = Svm::fit(&x, &y, &cfg).unwrap();
        for (r, &t) in x.iter().zip(&y) {
            assert_eq!(svm.decision(r) > 0.0, t);
        }
    }

    #[test]
    fn small_cache_gives_same_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (x, y) = blobs(50, 0.3, &mut rng);
        let full = smo(&x, &y, 0.3, &SvmConfig::default()).unwrap();
        let tiny = smo(
            &x,
            &y,
            0.3,
            &SvmConfig {
                cache_mb: 0,
                ..SvmConfig::default()
            },
        )
        .unwrap();
        assert_eq!(full, tiny);
    }

    #[test]
    fn platt_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scores: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<bool> = scores.iter().map(|s| *s + rng.random_range(-1.0..1.0) > 0.0).collect();
        let (a, b) = platt_fit(&scores, &y);
        assert!(a < 0.0);
        assert!(sigmoid_prob(2.0, a, b) > 0.8 && sigmoid_prob(-2.0, a, b) < 0.2);
        assert!((Gamma::InvSqrtDim.resolve(100) - 0.1).abs() < 1e-15);
        assert_eq!(Gamma::InvDim.resolve(231), 1.0 / 231.0);
    }
}
