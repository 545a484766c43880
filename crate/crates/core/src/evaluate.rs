//! Chronological cross-validation, repeated final evaluation, confusion
//! metrics and the paired sign test.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::derive_seed;
use crate::models::{targets, ModelConfig, ModelError, ModelKind, TrainedModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{n} rows cannot be split into {k} folds")]
    TooFewRows { n: usize, k: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Contiguous folds over rows in their given order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Range<usize>>,
}

impl FoldPlan {
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let test = &self.folds[fold];
        let n = self.folds.last().map_or(0, |r| r.end);
        (0..n).filter(|i| !test.contains(i)).collect()
    }
}

/// The first `n mod k` folds get one extra row.
pub fn chronological_kfold(n: usize, k: usize) -> Result<FoldPlan, EvalError> {
    if k == 0 || n < k {
        return Err(EvalError::TooFewRows { n, k });
    }
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    let folds = (0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(FoldPlan { folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    /// `None` when the denominator is zero.
    pub specificity: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub false_omission_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Pathological is the positive class.
pub fn confusion_metrics(pred: &[bool], truth: &[bool]) -> Result<ConfusionMetrics, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch(pred.len(), truth.len()));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionMetrics::from_counts(tp, tn, fp, fn_))
}

impl ConfusionMetrics {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let n = tp + tn + fp + fn_;
        Self {
            tp,
            tn,
            fp,
            fn_,
            accuracy: ratio(tp + tn, n).unwrap_or(0.0),
            specificity: ratio(tn, tn + fp),
            sensitivity: ratio(tp, tp + fn_),
            precision: ratio(tp, tp + fp),
            false_omission_rate: ratio(fn_, fn_ + tn),
        }
    }
}

pub fn accuracy(pred: &[bool], truth: &[bool]) -> f64 {
    let n = pred.len().min(truth.len());
    if n == 0 {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / n as f64
}

/// `P(X ≤ k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_cdf_half(k: usize, n: usize) -> f64 {
    if k >= n {
        return 1.0;
    }
    let ln_n1 = libm::lgamma(n as f64 + 1.0);
    let ln2n = n as f64 * core::f64::consts::LN_2;
    let s: f64 = (0..=k)
        .map(|i| libm::exp(ln_n1 - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0) - ln2n))
        .sum();
    s.min(1.0)
}

/// Win counts `(n⁺, n⁻)` with ties split evenly; an odd tie goes to the
/// side with fewer wins.
pub fn sign_test_counts(pred_a: &[bool], pred_b: &[bool], truth: &[bool]) -> Result<(usize, usize), EvalError> {
    if pred_a.len() != truth.len() {
        return Err(EvalError::LengthMismatch(pred_a.len(), truth.len()));
    }
    if pred_b.len() != truth.len() {
        return Err(EvalError::LengthMismatch(pred_b.len(), truth.len()));
    }
    let (mut a, mut b, mut ties) = (0, 0, 0);
    for ((&pa, &pb), &t) in pred_a.iter().zip(pred_b).zip(truth) {
        match (pa == t, pb == t) {
            (true, false) => a += 1,
            (false, true) => b += 1,
            _ => ties += 1,
        }
    }
    let (mut np, mut nm) = (a + ties / 2, b + ties / 2);
    if ties % 2 == 1 {
        if np <= nm {
            np += 1;
        } else {
            nm += 1;
        }
    }
    Ok((np, nm))
}

/// Two-sided exact sign test: `p = min(1, 2·P(X ≤ min(n⁺, n⁻)))`.
pub fn sign_test(pred_a: &[bool], pred_b: &[bool], truth: &[bool]) -> Result<f64, EvalError> {
    let (np, nm) = sign_test_counts(pred_a, pred_b, truth)?;
    let n = np + nm;
    if n == 0 {
        return Ok(1.0);
    }
    Ok((2.0 * binomial_cdf_half(np.min(nm), n)).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model: String,
    pub folds: FoldPlan,
    pub proba: Vec<f64>,
    pub predictions: Vec<bool>,
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Each row is predicted once by the model trained on the other folds.
pub fn cross_validate(
    kind: ModelKind,
    cfg: &ModelConfig,
    dev: &FeatureMatrix,
    k: usize,
    seed: u64,
) -> Result<CvResult, EvalError> {
    let truth = targets(dev)?;
    let folds = chronological_kfold(dev.n_rows(), k)?;
    let mut proba = vec![0.0; dev.n_rows()];
    let mut fold_accuracies = Vec::with_capacity(k);
    for (f, range) in folds.folds.iter().enumerate() {
        let train = dev.subset(&folds.train_indices(f));
        let test_idx: Vec<usize> = range.clone().collect();
        let test = dev.subset(&test_idx);
        let model = TrainedModel::fit(kind, cfg, &train, derive_seed(seed, f as u64))?;
        let p = model.predict_proba(&test)?;
        let pred: Vec<bool> = p.iter().map(|v| *v > 0.5).collect();
        fold_accuracies.push(accuracy(&pred, &truth[range.clone()]));
        proba[range.clone()].copy_from_slice(&p);
    }
    let predictions: Vec<bool> = proba.iter().map(|v| *v > 0.5).collect();
    Ok(CvResult {
        model: kind.name(),
        folds,
        accuracy: accuracy(&predictions, &truth),
        proba,
        predictions,
        fold_accuracies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEval {
    pub model: String,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Per repeat, probability of pathological for every evaluation row.
    pub proba: Vec<Vec<f64>>,
    pub confusion: ConfusionMetrics,
}

/// Fits on all of `dev` and scores `eval`, `repeats` times with distinct
/// seeds. Confusion counts refer to the first repeat.
pub fn final_eval(
    kind: ModelKind,
    cfg: &ModelConfig,
    dev: &FeatureMatrix,
    eval: &FeatureMatrix,
    repeats: usize,
    seed: u64,
) -> Result<FinalEval, EvalError> {
    let truth = targets(eval)?;
    let seeds: Vec<u64> = (0..repeats.max(1) as u64).map(|r| derive_seed(seed, r)).collect();
    let mut accuracies = Vec::with_capacity(seeds.len());
    let mut proba = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let model = TrainedModel::fit(kind, cfg, dev, s)?;
        let p = model.predict_proba(eval)?;
        let pred: Vec<bool> = p.iter().map(|v| *v > 0.5).collect();
        accuracies.push(accuracy(&pred, &truth));
        proba.push(p);
    }
    let first: Vec<bool> = proba[0].iter().map(|v| *v > 0.5).collect();
    Ok(FinalEval {
        model: kind.name(),
        mean_accuracy: accuracies.iter().sum::<f64>() / accuracies.len() as f64,
        confusion: confusion_metrics(&first, &truth)?,
        seeds,
        accuracies,
        proba,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact_cdf(k: usize, n: usize) -> f64 {
        let mut c: u128 = 1;
        let mut s: u128 = 0;
        for i in 0..=k.min(n) {
            if i > 0 {
                c = c * (n - i + 1) as u128 / i as u128;
            }
            s += c;
        }
        s as f64 / (1u128 << n) as f64
    }

    #[test]
    fn fold_examples() {
        let sizes = |n, k| -> Vec<usize> {
            chronological_kfold(n, k)
                .unwrap()
                .folds
                .iter()
                .map(|r| r.len())
                .collect()
        };
        assert_eq!(sizes(10, 5), vec![2; 5]);
        assert_eq!(sizes(11, 5), vec![3, 2, 2, 2, 2]);
        let plan = chronological_kfold(23, 5).unwrap();
        let all: Vec<usize> = plan.folds.iter().flat_map(|r| r.clone()).collect();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(plan.train_indices(0).len(), 23 - plan.folds[0].len());
        assert!(chronological_kfold(4, 5).is_err());
    }

    #[test]
    fn confusion_examples() {
        let t = [true, false, true, false];
        let m = confusion_metrics(&t, &t).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(
            (m.specificity, m.sensitivity, m.precision),
            (Some(1.0), Some(1.0), Some(1.0))
        );
        assert_eq!(m.false_omission_rate, Some(0.0));
        let m = confusion_metrics(&[false; 4], &t).unwrap();
        assert_eq!(
            (m.sensitivity, m.specificity, m.false_omission_rate),
            (Some(0.0), Some(1.0), Some(0.5))
        );
        assert_eq!(m.precision, None);
        let m = ConfusionMetrics::from_counts(100, 120, 30, 26);
        assert!((m.accuracy - 220.0 / 276.0).abs() < 1e-15);
        assert!((m.accuracy - 0.797).abs() < 5e-4);
        assert!(confusion_metrics(&[true], &t).is_err());
    }

    fn make(a_only: usize, b_only: usize, both: usize, neither: usize) -> (Vec<bool>, Vec<bool>, Vec<bool>) {
        let mut pa = Vec::new();
        let mut pb = Vec::new();
        for (n, ca, cb) in [
            (a_only, true, false),
            (b_only, false, true),
            (both, true, true),
            (neither, false, false),
        ] {
            for _ in 0..n {
                pa.push(ca);
                pb.push(cb);
            }
        }
        let truth = vec![true; pa.len()];
        (pa, pb, truth)
    }

    #[test]
    fn sign_test_examples() {
        let (a, _, t) = make(3, 0, 5, 2);
        assert_eq!(sign_test(&a, &a, &t).unwrap(), 1.0);
        let (a, b, t) = make(8, 2, 0, 0);
        assert!((sign_test(&a, &b, &t).unwrap() - 112.0 / 1024.0).abs() < 1e-12);
        let (a, b, t) = make(5, 1, 3, 1);
        assert_eq!(sign_test_counts(&a, &b, &t).unwrap(), (7, 3));
        assert!((sign_test(&a, &b, &t).unwrap() - 0.34375).abs() < 1e-12);
        let (a, b, t) = make(5, 1, 3, 0);
        assert_eq!(sign_test_counts(&a, &b, &t).unwrap(), (6, 3));
        assert!(sign_test(&a, &b[..2], &t).is_err());
    }

    #[test]
    fn sign_test_matches_enumeration() {
        for n in 1..=20 {
            for a_only in 0..=n {
                for b_only in 0..=n - a_only {
                    let ties = n - a_only - b_only;
                    let (a, b, t) = make(a_only, b_only, ties, 0);
                    let (np, nm) = sign_test_counts(&a, &b, &t).unwrap();
                    let expected = (2.0 * exact_cdf(np.min(nm), n)).min(1.0);
                    let p = sign_test(&a, &b, &t).unwrap();
                    assert!((p - expected).abs() < 1e-12);
                    assert_eq!(p, sign_test(&b, &a, &t).unwrap());
                    assert!(p > 0.0 && p <= 1.0);
                }
            }
        }
    }

    #[test]
    fn p_decreases_with_one_sided_wins() {
        let mut prev = 2.0;
        for wins in 0..=30 {
            let (a, b, t) = make(wins, 0, 30 - wins, 0);
            let p = sign_test(&a, &b, &t).unwrap();
            assert!(p <= prev);
            prev = p;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let big = |rng: &mut ChaCha8Rng| (0..2000).map(|_| rng.random_bool(0.5)).collect::<Vec<bool>>();
        let (a, b, t) = (big(&mut rng), big(&mut rng), big(&mut rng));
        let p = sign_test(&a, &b, &t).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
}
