//! CART random forest for binary targets.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Entropy,
    Gini,
}

/// Number of candidate features drawn at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let n = match self {
            Self::Sqrt => libm::floor(libm::sqrt(n_features as f64)) as usize,
            Self::Log2 => libm::floor(libm::log2(n_features as f64)) as usize,
            Self::All => n_features,
            Self::Count(k) => k,
        };
        n.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub criterion: Criterion,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_estimators: 1600,
            max_depth: 90,
            min_samples_split: 2,
            min_samples_leaf: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: false,
            criterion: Criterion::Entropy,
        }
    }
}

impl RfConfig {
    pub fn desk() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 20,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_estimators == 0
            || self.max_depth == 0
            || self.min_samples_split < 2
            || self.min_samples_leaf == 0
            || self.max_features == MaxFeatures::Count(0)
        {
            return Err(ModelError::Config("random forest parameters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        p: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { p } => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Normalized impurity decrease per feature.
    pub importance: Vec<f64>,
}

fn impurity(criterion: Criterion, pos: usize, n: usize) -> f64 {
    if n == 0 || pos == 0 || pos == n {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    let q = 1.0 - p;
    match criterion {
        Criterion::Entropy => -(p * libm::log2(p) + q * libm::log2(q)),
        Criterion::Gini => 1.0 - p * p - q * q,
    }
}

struct Builder<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [bool],
    cfg: &'a RfConfig,
    mtry: usize,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    pairs: Vec<(f64, bool)>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<BestSplit> {
        let n = idx.len();
        let leaf = self.cfg.min_samples_leaf;
        let parent = impurity(self.cfg.criterion, pos, n);
        let f_total = self.perm.len();
        let mut best: Option<BestSplit> = None;
        let mut visited = 0;
        for k in 0..f_total {
            if visited == self.mtry {
                break;
            }
            let r = self.rng.random_range(k..f_total);
            self.perm.swap(k, r);
            let f = self.perm[k];
            let col = &self.cols[f];
            self.pairs.clear();
            self.pairs.extend(idx.iter().map(|&i| (col[i], self.y[i])));
            self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[n - 1].0 {
                continue;
            }
            let mut any = false;
            let mut left_pos = 0;
            for i in 0..n - 1 {
                left_pos += self.pairs[i].1 as usize;
                let nl = i + 1;
                if self.pairs[i].0 == self.pairs[i + 1].0 || nl < leaf || n - nl < leaf {
                    continue;
                }
                any = true;
                let nr = n - nl;
                let child = (nl as f64 * impurity(self.cfg.criterion, left_pos, nl)
                    + nr as f64 * impurity(self.cfg.criterion, pos - left_pos, nr))
                    / n as f64;
                let gain = parent - child;
                let threshold = self.pairs[i].0;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        gain > b.gain
                            || (gain == b.gain && (f < b.feature || (f == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
            if any {
                visited += 1;
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        self.nodes.push(Node::Leaf {
            p: pos as f64 / n as f64,
        });
        if depth >= self.cfg.max_depth
            || n < self.cfg.min_samples_split
            || n < 2 * self.cfg.min_samples_leaf
            || pos == 0
            || pos == n
        {
            return id;
        }
        let Some(split) = self.best_split(idx, pos) else {
            return id;
        };
        let col = &self.cols[split.feature];
        let mut nl = 0;
        for k in 0..n {
            if col[idx[k]] <= split.threshold {
                idx.swap(k, nl);
                nl += 1;
            }
        }
        // keep the left block in its original relative order for determinism
        idx[..nl].sort_unstable();
        idx[nl..].sort_unstable();
        let (l_idx, r_idx) = idx.split_at_mut(nl);
        let l_pos = l_idx.iter().filter(|&&i| self.y[i]).count();
        let c = self.cfg.criterion;
        self.importance[split.feature] += n as f64 * impurity(c, pos, n)
            - nl as f64 * impurity(c, l_pos, nl)
            - (n - nl) as f64 * impurity(c, pos - l_pos, n - nl);
        let left = self.grow(l_idx, depth + 1);
        let right = self.grow(r_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn fit_tree(cols: &[Vec<f64>], y: &[bool], cfg: &RfConfig, seed: u64) -> (Tree, Vec<f64>) {
    let f = cols.len();
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = if cfg.bootstrap {
        let mut v: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let mut b = Builder {
        cols,
        y,
        cfg,
        mtry: cfg.max_features.resolve(f),
        rng,
        perm: (0..f).collect(),
        nodes: Vec::new(),
        importance: vec![0.0; f],
        pairs: Vec::with_capacity(n),
    };
    b.grow(&mut idx, 0);
    let total: f64 = b.importance.iter().sum();
    if total > 0.0 {
        b.importance.iter_mut().for_each(|v| *v /= total);
    }
    (Tree { nodes: b.nodes }, b.importance)
}

impl RandomForest {
    /// Fits on rows `x` with targets `y` (`true` = positive class).
    ///
    /// Tree `t` draws from its own stream seeded with `seed + t`.
    pub fn fit(x: &[Vec<f64>], y: &[bool], cfg: &RfConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        super::check_targets(x, y)?;
        let f = x[0].len();
        let cols: Vec<Vec<f64>> = (0..f).map(|j| x.iter().map(|r| r[j]).collect()).collect();
        let seeds: Vec<u64> = (0..cfg.n_estimators as u64).map(|t| seed.wrapping_add(t)).collect();
        #[cfg(feature = "parallel")]
        let fitted: Vec<(Tree, Vec<f64>)> = {
            use rayon::prelude::*;
            seeds.par_iter().map(|&s| fit_tree(&cols, y, cfg, s)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let fitted: Vec<(Tree, Vec<f64>)> = seeds.iter().map(|&s| fit_tree(&cols, y, cfg, s)).collect();

        let mut importance = vec![0.0; f];
        let mut trees = Vec::with_capacity(fitted.len());
        for (tree, imp) in fitted {
            for (a, b) in importance.iter_mut().zip(&imp) {
                *a += b;
            }
            trees.push(tree);
        }
        let total: f64 = importance.iter().sum();
        if total > 0.0 {
            importance.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self {
            n_features: f,
            trees,
            importance,
        })
    }

    /// Mean leaf probability of the positive class.
    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn noise_rows(n: usize, f: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..f)
                    .map(|_| Distribution::<f64>::sample(&StandardNormal, rng))
                    .collect()
            })
            .collect()
    }

    fn small() -> RfConfig {
        RfConfig {
            n_estimators: 25,
            ..RfConfig::desk()
        }
    }

    #[test]
    fn separating_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = noise_rows(60, 5, &mut rng);
        let y: Vec<bool> = (0..60).map(|i| i % 2 == 0).collect();
        for (r, &t) in x.iter_mut().zip(&y) {
            r[2] = if t { 3.0 } else { -3.0 } + 0.1 * r[2];
        }
        let cfg = RfConfig {
            max_features: MaxFeatures::All,
            ..small()
        };
        let rf = RandomForest::fit(&x, &y, &cfg, 7).unwrap();
        for (r, &t) in x.iter().zip(&y) {
            assert_eq!(rf.predict_proba_row(r) > 0.5, t);
        }
        assert!((rf.importance[2] - 1.0).abs() < 1e-12);
        assert!(rf.importance.iter().enumerate().all(|(j, v)| j == 2 || *v == 0.0));
    }

    #[test]
    fn duplicated_feature_shares_importance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200;
        let mut x = noise_rows(n, 6, &mut rng);
        let y: Vec<bool> = x.iter().map(|r| r[0] + 0.7 * r[1] > 0.0).collect();
        let single = RandomForest::fit(&x, &y, &small(), 3).unwrap();
        for r in x.iter_mut() {
            let v = r[0];
            r.push(v);
        }
        let dup = RandomForest::fit(&x, &y, &small(), 3).unwrap();
        let shared = dup.importance[0] + dup.importance[6];
        assert!(dup.importance[0] > 0.1 && dup.importance[6] > 0.1);
        assert!(
            (shared - single.importance[0]).abs() < 0.15,
            "{shared} vs {}",
            single.importance[0]
        );
        assert!((dup.importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_monotone_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = noise_rows(120, 8, &mut rng);
        let y: Vec<bool> = x.iter().map(|r| r[3] * r[4] > 0.0).collect();
        let test = noise_rows(50, 8, &mut rng);
        let a = RandomForest::fit(&x, &y, &small(), 11).unwrap();
        let b = RandomForest::fit(&x, &y, &small(), 11).unwrap();
        assert_eq!(a, b);
        let warp = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| {
                    let mut r = r.clone();
                    r[3] = libm::exp(r[3]) * 5.0 - 1.0;
                    r
                })
                .collect()
        };
        let c = RandomForest::fit(&warp(&x), &y, &small(), 11).unwrap();
        let pa: Vec<bool> = test.iter().map(|r| a.predict_proba_row(r) > 0.5).collect();
        let pc: Vec<bool> = warp(&test).iter().map(|r| c.predict_proba_row(r) > 0.5).collect();
        assert_eq!(pa, pc);
        assert_eq!(a.importance, c.importance);
    }

    #[test]
    fn random_labels_are_not_learnable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = noise_rows(200, 10, &mut rng);
        let y: Vec<bool> = (0..200).map(|_| rng.random_bool(0.5)).collect();
        let mut correct = 0;
        for fold in 0..5 {
            let test: Vec<usize> = (fold * 40..fold * 40 + 40).collect();
            let train: Vec<usize> = (0..200).filter(|i| !test.contains(i)).collect();
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let rf = RandomForest::fit(&xt, &yt, &small(), fold as u64).unwrap();
            correct += test
                .iter()
                .filter(|&&i| (rf.predict_proba_row(&x[i]) > 0.5) == y[i])
                .count();
        }
        let acc = correct as f64 / 200.0;
        assert!((acc - 0.5).abs() <= 0.1, "{acc}");
    }

    #[test]
    fn config_limits() {
        assert_eq!(MaxFeatures::Sqrt.resolve(6174), 78);
        assert_eq!(MaxFeatures::Count(50).resolve(10), 10);
        assert!(RfConfig {
            min_samples_leaf: 0,
            ..RfConfig::default()
        }
        .validate()
        .is_err());
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            RandomForest::fit(&x, &[true, true], &small(), 0),
            Err(ModelError::SingleClass)
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = noise_rows(40, 3, &mut rng);
        let y: Vec<bool> = x.iter().map(|r| r[0] > 0.0).collect();
        let shallow = RandomForest::fit(
            &x,
            &y,
            &RfConfig {
                max_depth: 2,
                ..small()
            },
            0,
        )
        .unwrap();
        assert!(shallow.trees.iter().all(|t| t.depth() <= 2));
    }
}
