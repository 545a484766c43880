//! Covariance matrices on the SPD manifold.
//!
//! Matrix functions go through [`SymmetricEigen`]; eigenvalues are floored at
//! `1e-12` before taking logarithms or inverse roots.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, SymmetricEigen};

pub const EIGEN_FLOOR: f64 = 1e-12;
pub const DEFAULT_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiemannError {
    #[error("cannot average an empty set")]
    EmptySet,
    #[error("geometric mean did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("matrix dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanKind {
    Euclidean,
    Geometric,
}

/// Sample covariance over time of an `E × n` crop, plus `ε·trace/E·I`.
///
/// A zero-trace crop gets `ε·I` so the result stays positive definite.
pub fn crop_covariance<S: AsRef<[f64]>>(crop: &[S], ridge: f64) -> Matrix {
    let e = crop.len();
    let n = crop.first().map_or(0, |c| c.as_ref().len());
    let centered: Vec<Vec<f64>> = crop
        .iter()
        .map(|c| {
            let c = c.as_ref();
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let denom = (n.max(2) - 1) as f64;
    let mut cov = Matrix::zeros(e);
    for i in 0..e {
        for j in i..e {
            let s: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / denom;
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    let tr = cov.trace();
    let lift = if tr > 0.0 { ridge * tr / e as f64 } else { ridge };
    for i in 0..e {
        cov[(i, i)] += lift;
    }
    cov
}

fn check_dims(set: &[Matrix]) -> Result<usize, RiemannError> {
    let first = set.first().ok_or(RiemannError::EmptySet)?.dim();
    for m in set {
        if m.dim() != first {
            return Err(RiemannError::DimensionMismatch(first, m.dim()));
        }
    }
    Ok(first)
}

/// Input order that depends only on matrix contents, so results do not
/// depend on how the set was permuted.
fn canonical_order(set: &[Matrix]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.sort_by(|&a, &b| {
        set[a]
            .as_slice()
            .iter()
            .zip(set[b].as_slice())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    idx
}

pub fn euclidean_mean(set: &[Matrix]) -> Result<Matrix, RiemannError> {
    let n = check_dims(set)?;
    let mut acc = Matrix::zeros(n);
    for i in canonical_order(set) {
        acc = acc.add(&set[i]);
    }
    Ok(acc.scale(1.0 / set.len() as f64))
}

fn floored(l: f64) -> f64 {
    l.max(EIGEN_FLOOR)
}

pub fn sqrtm(a: &Matrix) -> Matrix {
    SymmetricEigen::new(a).map(|l| libm::sqrt(floored(l)))
}

pub fn invsqrtm(a: &Matrix) -> Matrix {
    SymmetricEigen::new(a).map(|l| 1.0 / libm::sqrt(floored(l)))
}

pub fn logm(a: &Matrix) -> Matrix {
    SymmetricEigen::new(a).map(|l| libm::log(floored(l)))
}

pub fn expm(a: &Matrix) -> Matrix {
    SymmetricEigen::new(a).map(libm::exp)
}

/// `(A^{1/2}, A^{-1/2})` from one decomposition.
fn sqrt_pair(a: &Matrix) -> (Matrix, Matrix) {
    let eig = SymmetricEigen::new(a);
    (
        eig.map(|l| libm::sqrt(floored(l))),
        eig.map(|l| 1.0 / libm::sqrt(floored(l))),
    )
}

pub fn is_spd(a: &Matrix) -> bool {
    a.max_asymmetry() <= 1e-10 * a.frobenius_norm().max(1.0)
        && SymmetricEigen::new(a).values.first().is_some_and(|&l| l > 0.0)
}

/// Affine-invariant distance `‖log(A^{-1/2} B A^{-1/2})‖_F`.
pub fn geodesic_distance(a: &Matrix, b: &Matrix) -> f64 {
    let isq = invsqrtm(a);
    logm(&isq.congruence(b)).frobenius_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KarcherConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KarcherConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

/// Karcher mean by fixed-point iteration from the Euclidean mean.
///
/// Stops once the Frobenius norm of the mean tangent vector drops below
/// `tol`; that last step is still applied.
pub fn geometric_mean(set: &[Matrix], cfg: &KarcherConfig) -> Result<Matrix, RiemannError> {
    check_dims(set)?;
    if set.len() == 1 {
        return Ok(set[0].clone());
    }
    let order = canonical_order(set);
    let mut g = euclidean_mean(set)?;
    for _ in 0..cfg.max_iter {
        let (sq, isq) = sqrt_pair(&g);
        let mut t = Matrix::zeros(g.dim());
        for &i in &order {
            t = t.add(&logm(&isq.congruence(&set[i])));
        }
        let t = t.scale(1.0 / set.len() as f64);
        let step = t.frobenius_norm();
        g = sq.congruence(&expm(&t));
        g.symmetrize();
        if step < cfg.tol {
            return Ok(g);
        }
    }
    Err(RiemannError::NoConvergence(cfg.max_iter))
}

pub fn mean(set: &[Matrix], kind: MeanKind, cfg: &KarcherConfig) -> Result<Matrix, RiemannError> {
    match kind {
        MeanKind::Euclidean => euclidean_mean(set),
        MeanKind::Geometric => geometric_mean(set, cfg),
    }
}

/// Upper triangle, row by row, with off-diagonal entries scaled by √2.
pub fn vectorize(s: &Matrix) -> Vec<f64> {
    let n = s.dim();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(if i == j {
                s[(i, i)]
            } else {
                core::f64::consts::SQRT_2 * s[(i, j)]
            });
        }
    }
    out
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[f64]) -> Matrix {
    let n = ((libm::sqrt((8 * v.len() + 1) as f64) - 1.0) / 2.0) as usize;
    let mut m = Matrix::zeros(n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let x = if i == j { v[k] } else { v[k] / core::f64::consts::SQRT_2 };
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Reference point with its inverse square root cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentReference {
    pub reference: Matrix,
    pub inv_sqrt: Matrix,
}

impl TangentReference {
    pub fn new(reference: Matrix) -> Result<Self, RiemannError> {
        if !is_spd(&reference) {
            return Err(RiemannError::NotSpd);
        }
        let inv_sqrt = invsqrtm(&reference);
        Ok(Self { reference, inv_sqrt })
    }

    pub fn map(&self, x: &Matrix) -> Result<Vec<f64>, RiemannError> {
        if x.dim() != self.reference.dim() {
            return Err(RiemannError::DimensionMismatch(self.reference.dim(), x.dim()));
        }
        if !is_spd(x) {
            return Err(RiemannError::NotSpd);
        }
        Ok(vectorize(&logm(&self.inv_sqrt.congruence(x))))
    }
}

/// `vec(log(ref^{-1/2} X ref^{-1/2}))`.
pub fn tangent_map(x: &Matrix, reference: &Matrix) -> Result<Vec<f64>, RiemannError> {
    TangentReference::new(reference.clone())?.map(x)
}
