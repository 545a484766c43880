//! Post-hoc analyses: rank correlation, importance topomaps, error overlap
//! and ensembling.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Band, ChannelRef, FeatureLabel};
use crate::recording::CANONICAL_CHANNELS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("input is constant")]
    ConstantInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("no feature matches the selection")]
    EmptySelection,
}

/// Average (mid) ranks starting at 1.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mid;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooShort {
            needed: 3,
            got: x.len(),
        });
    }
    pearson(&ranks(x), &ranks(y)).ok_or(AnalysisError::ConstantInput)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// Column indices into the source matrix.
    pub columns: Vec<usize>,
    /// Spearman ρ; pairs involving a constant column are 0.
    pub rho: Vec<Vec<f64>>,
    /// Per row, the other column with the largest |ρ|.
    pub partner: Vec<Option<usize>>,
}

/// Spearman correlations between the selected columns of row-major `values`.
pub fn feature_correlation_matrix(values: &[Vec<f64>], columns: &[usize]) -> Result<CorrelationMatrix, AnalysisError> {
    if values.len() < 3 {
        return Err(AnalysisError::TooShort {
            needed: 3,
            got: values.len(),
        });
    }
    let ranked: Vec<Vec<f64>> = columns
        .iter()
        .map(|&j| ranks(&values.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let k = columns.len();
    let row = |i: usize| -> Vec<f64> {
        (0..k)
            .map(|j| {
                if i == j {
                    1.0
                } else {
                    pearson(&ranked[i], &ranked[j]).unwrap_or(0.0)
                }
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let rho: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..k).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rho: Vec<Vec<f64>> = (0..k).map(row).collect();
    let partner = rho
        .iter()
        .enumerate()
        .map(|(i, r)| {
            (0..k)
                .filter(|&j| j != i)
                .fold(None, |best: Option<usize>, j| match best {
                    Some(b) if libm::fabs(r[b]) >= libm::fabs(r[j]) => Some(b),
                    _ => Some(j),
                })
                .map(|j| columns[j])
        })
        .collect();
    Ok(CorrelationMatrix {
        columns: columns.to_vec(),
        rho,
        partner,
    })
}

/// Scalp position of a canonical electrode on a unit head circle, nose up.
pub fn electrode_position(label: &str) -> Option<(f64, f64)> {
    let polar = |deg: f64, r: f64| {
        let t = deg.to_radians();
        (r * libm::sin(t), r * libm::cos(t))
    };
    Some(match label {
        "FP1" => polar(-18.0, 1.0),
        "FP2" => polar(18.0, 1.0),
        "F7" => polar(-54.0, 1.0),
        "F8" => polar(54.0, 1.0),
        "T3" => polar(-90.0, 1.0),
        "T4" => polar(90.0, 1.0),
        "T5" => polar(-126.0, 1.0),
        "T6" => polar(126.0, 1.0),
        "O1" => polar(-162.0, 1.0),
        "O2" => polar(162.0, 1.0),
        "F3" => polar(-39.0, 0.64),
        "F4" => polar(39.0, 0.64),
        "P3" => polar(-141.0, 0.64),
        "P4" => polar(141.0, 0.64),
        "FZ" => (0.0, 0.5),
        "CZ" => (0.0, 0.0),
        "PZ" => (0.0, -0.5),
        "C3" => (-0.5, 0.0),
        "C4" => (0.5, 0.0),
        "A1" => (-1.18, 0.0),
        "A2" => (1.18, 0.0),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopomapEntry {
    pub electrode: String,
    pub x: f64,
    pub y: f64,
    /// Summed importance; pair features count half for each electrode.
    pub mass: f64,
    /// `mass` divided by the (half-weighted) number of matching features.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopomapData {
    pub band: Band,
    pub entries: Vec<TopomapEntry>,
}

impl TopomapData {
    /// Electrodes sorted by decreasing value; ties keep canonical order.
    pub fn ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| self.entries[b].value.total_cmp(&self.entries[a].value));
        idx.into_iter().map(|i| self.entries[i].electrode.as_str()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }
}

/// Whether a feature band falls in `band`: its center lies in `[lo, hi)`.
pub fn band_matches(feature: Option<Band>, band: Band) -> bool {
    feature.is_some_and(|b| band.contains(b.center()))
}

/// Per-electrode importance of the features whose band matches `band`.
pub fn importance_topomap(
    importance: &[f64],
    labels: &[FeatureLabel],
    band: Band,
) -> Result<TopomapData, AnalysisError> {
    if importance.len() != labels.len() {
        return Err(AnalysisError::LengthMismatch(importance.len(), labels.len()));
    }
    let n = CANONICAL_CHANNELS.len();
    let mut mass = vec![0.0; n];
    let mut count = vec![0.0; n];
    let mut any = false;
    for (imp, l) in importance.iter().zip(labels) {
        if !band_matches(l.band, band) {
            continue;
        }
        let (chans, w): (Vec<&str>, f64) = match &l.channel {
            Some(ChannelRef::Single(c)) => (vec![c.as_str()], 1.0),
            Some(ChannelRef::Pair(a, b)) => (vec![a.as_str(), b.as_str()], 0.5),
            None => continue,
        };
        for c in chans {
            if let Some(k) = CANONICAL_CHANNELS.iter().position(|e| *e == c) {
                any = true;
                mass[k] += w * imp;
                count[k] += w;
            }
        }
    }
    if !any {
        return Err(AnalysisError::EmptySelection);
    }
    let entries = CANONICAL_CHANNELS
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let (x, y) = electrode_position(e).unwrap_or((0.0, 0.0));
            TopomapEntry {
                electrode: e.to_string(),
                x,
                y,
                mass: mass[k],
                value: if count[k] > 0.0 { mass[k] / count[k] } else { 0.0 },
            }
        })
        .collect();
    Ok(TopomapData { band, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorOverlap {
    /// `counts[k]`: examples misclassified by exactly `k` models.
    pub counts: Vec<usize>,
    /// `E1 / (E1 + … + Ek)`; `None` without errors.
    pub e1_ratio: Option<f64>,
}

impl ErrorOverlap {
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let wrong: usize = counts.iter().skip(1).sum();
        let e1 = counts.get(1).copied().unwrap_or(0);
        Self {
            e1_ratio: (wrong > 0).then(|| e1 as f64 / wrong as f64),
            counts,
        }
    }
}

pub fn error_overlap(preds: &[&[bool]], truth: &[bool]) -> Result<ErrorOverlap, AnalysisError> {
    for p in preds {
        if p.len() != truth.len() {
            return Err(AnalysisError::LengthMismatch(p.len(), truth.len()));
        }
    }
    let mut counts = vec![0; preds.len() + 1];
    for (i, &t) in truth.iter().enumerate() {
        counts[preds.iter().filter(|p| p[i] != t).count()] += 1;
    }
    Ok(ErrorOverlap::from_counts(counts))
}

/// Weighted vote; a tie yields `tie_label`.
pub fn majority_vote(labels: &[&[bool]], weights: &[f64], tie_label: bool) -> Vec<bool> {
    let n = labels.first().map_or(0, |l| l.len());
    (0..n)
        .map(|i| {
            let mut score = 0.0;
            for (m, l) in labels.iter().enumerate() {
                let w = weights.get(m).copied().unwrap_or(1.0);
                score += if l[i] { w } else { -w };
            }
            if score == 0.0 {
                tie_label
            } else {
                score > 0.0
            }
        })
        .collect()
}

fn ensemble_scores(sum: &[f64], add: &[f64], k: f64, truth: &[bool]) -> (usize, f64) {
    let mut correct = 0;
    let mut brier = 0.0;
    for ((s, a), &t) in sum.iter().zip(add).zip(truth) {
        let p = (s + a) / k;
        if (p > 0.5) == t {
            correct += 1;
        }
        let d = p - if t { 1.0 } else { 0.0 };
        brier += d * d;
    }
    (correct, brier)
}

/// Forward selection with replacement over model probabilities.
///
/// Each round adds the model that maximizes the accuracy of the averaged
/// ensemble; ties go to the lower Brier score, then the lower index.
/// Returns selection counts divided by `rounds`.
pub fn greedy_ensemble_selection(probs: &[Vec<f64>], truth: &[bool], rounds: usize) -> Result<Vec<f64>, AnalysisError> {
    for p in probs {
        if p.len() != truth.len() {
            return Err(AnalysisError::LengthMismatch(p.len(), truth.len()));
        }
    }
    if probs.is_empty() || rounds == 0 {
        return Err(AnalysisError::EmptySelection);
    }
    let mut counts = vec![0usize; probs.len()];
    let mut sum = vec![0.0; truth.len()];
    for r in 0..rounds {
        let k = (r + 1) as f64;
        let mut best: Option<(usize, usize, f64)> = None;
        for (m, p) in probs.iter().enumerate() {
            let (c, b) = ensemble_scores(&sum, p, k, truth);
            let better = match best {
                None => true,
                Some((_, bc, bb)) => c > bc || (c == bc && b < bb),
            };
            if better {
                best = Some((m, c, b));
            }
        }
        let (m, _, _) = best.unwrap();
        counts[m] += 1;
        for (s, v) in sum.iter_mut().zip(&probs[m]) {
            *s += v;
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / rounds as f64).collect())
}

/// Weighted mean of model probabilities.
pub fn ensemble_proba(probs: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = probs.first().map_or(0, |p| p.len());
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|i| probs.iter().zip(weights).map(|(p, w)| w * p[i]).sum::<f64>() / total)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Domain;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn spearman_examples() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 - 20.0).collect();
        let cube: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &cube).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&x, &[1.0; 50]), Err(AnalysisError::ConstantInput));
        assert!(spearman(&x[..2], &x[..2]).is_err());
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut small = 0;
        for _ in 0..100 {
            let mut a: Vec<f64> = (0..1000).map(|i| i as f64).collect();
            let mut b = a.clone();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            if spearman(&a, &b).unwrap().abs() < 0.1 {
                small += 1;
            }
        }
        assert!(small >= 99);
    }

    #[test]
    fn correlation_matrix_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                vec![a, b, a, 7.0]
            })
            .collect();
        let m = feature_correlation_matrix(&rows, &[0, 1, 2, 3]).unwrap();
        for i in 0..4 {
            assert_eq!(m.rho[i][i], 1.0);
            for j in 0..4 {
                assert!((m.rho[i][j] - m.rho[j][i]).abs() < 1e-12);
            }
        }
        assert!((m.rho[0][2] - 1.0).abs() < 1e-12);
        assert!(m.rho[0][1].abs() < 0.15);
        assert_eq!(m.rho[0][3], 0.0);
        assert_eq!(m.partner[0], Some(2));
        assert_eq!(m.partner[2], Some(0));
    }

    fn labels() -> Vec<FeatureLabel> {
        let mut out = Vec::new();
        for ch in CANONICAL_CHANNELS {
            for (lo, hi) in [(0.0, 2.0), (2.0, 4.0), (8.0, 13.0)] {
                out.push(FeatureLabel::single(Domain::Cwt, "power", Some(Band::new(lo, hi)), ch));
            }
            out.push(FeatureLabel::single(Domain::Time, "mean", None, ch));
        }
        out.push(FeatureLabel::pair(
            Domain::Conn,
            "plv",
            Some(Band::new(0.0, 2.5)),
            "O1",
            "T4",
        ));
        out
    }

    #[test]
    fn topomap_examples() {
        let l = labels();
        let delta = Band::new(0.0, 4.0);
        let mut imp = vec![0.0; l.len()];
        let t4 = l.iter().position(|x| x.to_string() == "CWT__power__2-4__T4").unwrap();
        imp[t4] = 1.0;
        let map = importance_topomap(&imp, &l, delta).unwrap();
        assert_eq!(map.entries.len(), 21);
        assert_eq!(map.ranking()[0], "T4");
        assert_eq!(map.total_mass(), 1.0);
        assert!(map.entries.iter().all(|e| e.electrode == "T4" || e.mass == 0.0));

        let uniform = vec![0.25; l.len()];
        let map = importance_topomap(&uniform, &l, delta).unwrap();
        assert!(map.entries.iter().all(|e| (e.value - 0.25).abs() < 1e-15));
        let selected: f64 = l
            .iter()
            .zip(&uniform)
            .filter(|(x, _)| band_matches(x.band, delta))
            .map(|(_, v)| v)
            .sum();
        assert!((map.total_mass() - selected).abs() < 1e-12);

        assert_eq!(
            importance_topomap(&uniform, &l, Band::new(30.0, 40.0)),
            Err(AnalysisError::EmptySelection)
        );
        assert!(CANONICAL_CHANNELS.iter().all(|c| electrode_position(c).is_some()));
    }

    #[test]
    fn error_overlap_examples() {
        let r = ErrorOverlap::from_counts(vec![1962, 336, 207, 211]);
        assert!((r.e1_ratio.unwrap() * 100.0 - 44.56).abs() < 0.005);
        let truth = [true, false, true, false];
        let perfect = error_overlap(&[&truth, &truth, &truth], &truth).unwrap();
        assert_eq!(perfect.counts, vec![4, 0, 0, 0]);
        assert_eq!(perfect.e1_ratio, None);

        let wrong_at = |k: &[usize]| -> Vec<bool> { (0..4).map(|i| truth[i] ^ k.contains(&i)).collect() };
        let (a, b, c) = (wrong_at(&[1]), wrong_at(&[2]), wrong_at(&[1]));
        let o = error_overlap(&[&a, &b, &c], &truth).unwrap();
        assert_eq!(o.counts, vec![2, 1, 1, 0]);
        assert_eq!(o.e1_ratio, Some(0.5));
        assert_eq!(error_overlap(&[&c, &a, &b], &truth).unwrap(), o);
        assert!(error_overlap(&[&a[..2]], &truth).is_err());
    }

    #[test]
    fn voting_examples() {
        assert_eq!(majority_vote(&[&[true], &[false], &[true]], &[], false), vec![true]);
        assert_eq!(
            majority_vote(&[&[false], &[true], &[true]], &[2.0, 1.0, 1.0], false),
            vec![false]
        );
        assert_eq!(
            majority_vote(&[&[false], &[true], &[true]], &[2.0, 1.0, 1.0], true),
            vec![true]
        );
        assert_eq!(
            majority_vote(&[&[false, true], &[false, true]], &[], true),
            vec![false, true]
        );

        // complementary triple: every example is misclassified by one model only
        let truth = [true, false, true, false, true, false];
        let a: Vec<bool> = (0..6).map(|i| truth[i] ^ (i % 3 == 0)).collect();
        let b: Vec<bool> = (0..6).map(|i| truth[i] ^ (i % 3 == 1)).collect();
        let c: Vec<bool> = (0..6).map(|i| truth[i] ^ (i % 3 == 2)).collect();
        let o = error_overlap(&[&a, &b, &c], &truth).unwrap();
        assert_eq!(o.counts, vec![0, 6, 0, 0]);
        assert_eq!(majority_vote(&[&a, &b, &c], &[], false), truth.to_vec());
    }

    #[test]
    fn greedy_selection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth: Vec<bool> = (0..100).map(|_| rng.random_bool(0.5)).collect();
        let good: Vec<f64> = truth.iter().map(|&t| if t { 0.8 } else { 0.2 }).collect();
        let bad: Vec<f64> = truth.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        let w = greedy_ensemble_selection(&[bad.clone(), good.clone()], &truth, 26).unwrap();
        assert_eq!(w, vec![0.0, 1.0]);

        let half = truth.len() / 2;
        let comp = |first: bool| -> Vec<f64> {
            truth
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let strong = (i < half) == first;
                    match (strong, t) {
                        (true, true) => 0.9,
                        (true, false) => 0.1,
                        (false, true) => 0.45,
                        (false, false) => 0.55,
                    }
                })
                .collect()
        };
        let (a, b) = (comp(true), comp(false));
        let w = greedy_ensemble_selection(&[a.clone(), b.clone()], &truth, 26).unwrap();
        assert!(w[0] > 0.0 && w[1] > 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let acc = |p: &[f64]| p.iter().zip(&truth).filter(|(v, t)| (**v > 0.5) == **t).count() as f64 / 100.0;
        let ens = ensemble_proba(&[a.clone(), b.clone()], &w);
        assert!(acc(&ens) > acc(&a) && acc(&ens) > acc(&b));
    }
}
