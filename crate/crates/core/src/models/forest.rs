//! Random forest of Gini CART trees over feature vectors.
//!
//! Splits have the form `x[feature] <= t` where `t` is a training value (the
//! largest value sent left), so predictions depend only on the ordering of
//! each feature.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_leaf: 1,
            max_depth: None,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { vote: u8 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { vote } => return vote,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub max_features: usize,
    pub config: ForestConfig,
}

fn gini_sum(n0: usize, n1: usize) -> f64 {
    // n * gini = n - (n0^2 + n1^2) / n
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    n - ((n0 * n0 + n1 * n1) as f64) / n
}

struct TreeBuilder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    max_features: usize,
    min_leaf: usize,
    max_depth: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let n1 = idx.iter().filter(|&&i| self.y[i] == 1).count();
        Node::Leaf {
            vote: u8::from(2 * n1 >= idx.len()),
        }
    }

    /// Best split of `idx` on `feature`: (impurity, threshold, n_left).
    fn best_on_feature(&self, idx: &mut [usize], feature: usize) -> Option<(f64, f64, usize)> {
        let x = self.x;
        idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let total1 = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let total0 = idx.len() - total1;
        let (mut l0, mut l1) = (0usize, 0usize);
        let mut best: Option<(f64, f64, usize)> = None;
        for pos in 0..idx.len() - 1 {
            if self.y[idx[pos]] == 1 {
                l1 += 1;
            } else {
                l0 += 1;
            }
            let v = x[idx[pos]][feature];
            if v == x[idx[pos + 1]][feature] {
                continue;
            }
            let n_left = pos + 1;
            if n_left < self.min_leaf || idx.len() - n_left < self.min_leaf {
                continue;
            }
            let imp = gini_sum(l0, l1) + gini_sum(total0 - l0, total1 - l1);
            if best.is_none_or(|(b, _, _)| imp < b) {
                best = Some((imp, v, n_left));
            }
        }
        best
    }

    fn build(mut self, mut idx: Vec<usize>) -> DecisionTree {
        let d = self.x[0].len();
        // (slot to fill, indices, depth)
        let mut stack = vec![(0usize, std::mem::take(&mut idx), 0usize)];
        self.nodes.push(Node::Leaf { vote: 0 });
        while let Some((slot, mut idx, depth)) = stack.pop() {
            let n1 = idx.iter().filter(|&&i| self.y[i] == 1).count();
            if n1 == 0 || n1 == idx.len() || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
                self.nodes[slot] = self.leaf(&idx);
                continue;
            }
            let mut features: Vec<usize> = (0..d).collect();
            features.shuffle(&mut self.rng);
            let mut best: Option<(f64, usize, f64)> = None;
            for (tried, &f) in features.iter().enumerate() {
                if tried >= self.max_features && best.is_some() {
                    break;
                }
                if let Some((imp, thr, _)) = self.best_on_feature(&mut idx, f) {
                    if best.is_none_or(|(b, _, _)| imp < b) {
                        best = Some((imp, f, thr));
                    }
                }
            }
            let Some((_, feature, threshold)) = best else {
                self.nodes[slot] = self.leaf(&idx);
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
            let li = self.nodes.len();
            self.nodes.push(Node::Leaf { vote: 0 });
            let ri = self.nodes.len();
            self.nodes.push(Node::Leaf { vote: 0 });
            self.nodes[slot] = Node::Split {
                feature,
                threshold,
                left: li,
                right: ri,
            };
            stack.push((ri, right, depth + 1));
            stack.push((li, left, depth + 1));
        }
        DecisionTree { nodes: self.nodes }
    }
}

fn check_inputs(features: &[Vec<f64>], labels: &[u8]) -> Result<usize> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch(features.len(), labels.len()));
    }
    let d = features.first().map(Vec::len).unwrap_or(0);
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    if features.len() < 2 || n1 == 0 || n1 == labels.len() {
        return Err(Error::SingleClassTraining);
    }
    if d == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    Ok(d)
}

/// Fit a forest; each tree sees a bootstrap sample drawn from its own seed stream.
pub fn train_forest(features: &[Vec<f64>], labels: &[u8], cfg: &ForestConfig) -> Result<ForestModel> {
    let d = check_inputs(features, labels)?;
    if cfg.n_trees == 0 || cfg.min_samples_leaf == 0 {
        return Err(Error::Config("n_trees and min_samples_leaf must be positive".into()));
    }
    let max_features = cfg
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let n = features.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(cfg.rng_seed, &[t as u64]);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            TreeBuilder {
                x: features,
                y: labels,
                max_features,
                min_leaf: cfg.min_samples_leaf,
                max_depth: cfg.max_depth.unwrap_or(usize::MAX),
                rng,
                nodes: Vec::new(),
            }
            .build(sample)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: d,
        max_features,
        config: cfg.clone(),
    })
}

impl ForestModel {
    /// Fraction of trees voting FOG.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let votes: usize = self.trees.iter().map(|t| usize::from(t.predict(x))).sum();
        Ok(votes as f64 / self.trees.len() as f64)
    }

    pub fn predict_scores(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict_score(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y = x.iter().map(|v| u8::from(v[0] > 0.0)).collect();
        (x, y)
    }

    #[test]
    fn separable_toy_set() {
        let (x, y) = toy(100, 1);
        let cfg = ForestConfig { n_trees: 25, rng_seed: 5, ..Default::default() };
        let model = train_forest(&x, &y, &cfg).unwrap();
        let train_acc = x.iter().zip(&y).filter(|(v, &l)| u8::from(model.predict_score(v).unwrap() >= 0.5) == l).count();
        assert_eq!(train_acc, 100);
        let (xt, yt) = toy(400, 2);
        let held = xt.iter().zip(&yt).filter(|(v, &l)| u8::from(model.predict_score(v).unwrap() >= 0.5) == l).count();
        assert!(held as f64 / 400.0 >= 0.95, "{held}");
    }

    #[test]
    fn other_seed_same_majority_on_training_points() {
        let (x, y) = toy(100, 1);
        let a = train_forest(&x, &y, &ForestConfig { n_trees: 25, rng_seed: 1, ..Default::default() }).unwrap();
        let b = train_forest(&x, &y, &ForestConfig { n_trees: 25, rng_seed: 2, ..Default::default() }).unwrap();
        assert_ne!(a.trees, b.trees);
        for v in &x {
            assert_eq!(a.predict_score(v).unwrap() >= 0.5, b.predict_score(v).unwrap() >= 0.5);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train_forest(&x, &[1, 1], &ForestConfig::default()), Err(Error::SingleClassTraining)));
    }

    #[test]
    fn score_is_vote_fraction() {
        let leaf = |v| DecisionTree { nodes: vec![Node::Leaf { vote: v }] };
        let model = ForestModel {
            trees: (0..10).map(|i| leaf(u8::from(i < 7))).collect(),
            n_features: 1,
            max_features: 1,
            config: ForestConfig::default(),
        };
        assert_eq!(model.predict_score(&[0.0]).unwrap(), 0.7);
        assert!(matches!(model.predict_score(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn deterministic_and_order_invariant_to_monotone_transform() {
        let (x, y) = toy(120, 9);
        let (xt, _) = toy(50, 10);
        let cfg = ForestConfig { n_trees: 15, rng_seed: 3, ..Default::default() };
        let a = train_forest(&x, &y, &cfg).unwrap();
        assert_eq!(a, train_forest(&x, &y, &cfg).unwrap());
        let f = |v: &Vec<f64>| {
            let mut v = v.clone();
            v[0] = v[0].powi(3) * 7.0 + 2.0;
            v
        };
        let xm: Vec<_> = x.iter().map(f).collect();
        let b = train_forest(&xm, &y, &cfg).unwrap();
        for v in &xt {
            assert_eq!(a.predict_score(v).unwrap(), b.predict_score(&f(v)).unwrap());
        }
    }
}
