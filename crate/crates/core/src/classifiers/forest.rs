//! Bagged, fully grown CART trees with out-of-bag bookkeeping.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, Grow, SplitCriterion};
use super::{plurality, NCLASS};

/// Permutation streams start here so they never collide with bootstrap streams.
const PERMUTATION_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per node; `None` means ceil(sqrt(F)).
    pub features_per_node: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 30,
            features_per_node: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    /// Training rows left out of each tree's bootstrap sample.
    pub oob: Vec<Vec<usize>>,
    pub n_train: usize,
    pub seed: u64,
}

fn tree_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl RandomForest {
    pub(super) fn fit(p: &ForestParams, x: &[Vec<f64>], y: &[usize]) -> Self {
        let n = x.len();
        let f = x[0].len();
        let m = p
            .features_per_node
            .unwrap_or_else(|| (f as f64).sqrt().ceil() as usize)
            .clamp(1, f);
        let grown: Vec<(DecisionTree, Vec<usize>)> = (0..p.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(p.seed, t as u64);
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut in_bag = vec![false; n];
                sample.iter().for_each(|&i| in_bag[i] = true);
                let oob = (0..n).filter(|&i| !in_bag[i]).collect();
                let tree = Grow {
                    x,
                    y,
                    criterion: SplitCriterion::Gini,
                    max_splits: None,
                    features_per_node: Some(m),
                    rng: Some(&mut rng),
                }
                .run(&sample);
                (tree, oob)
            })
            .collect();
        let (trees, oob) = grown.into_iter().unzip();
        RandomForest {
            trees,
            oob,
            n_train: n,
            seed: p.seed,
        }
    }

    pub fn predict(&self, q: &[f64]) -> usize {
        let mut votes = [0usize; NCLASS];
        for t in &self.trees {
            votes[t.predict(q)] += 1;
        }
        plurality(&votes)
    }

    /// Permutation importance per feature: the mean over trees of the OOB
    /// error increase after shuffling that feature among the tree's OOB rows,
    /// divided by its standard deviation over trees.
    pub fn oob_importance(&self, x: &[Vec<f64>], y: &[usize]) -> Vec<f64> {
        let f = x.first().map_or(0, |r| r.len());
        let deltas: Vec<Vec<f64>> = self
            .trees
            .par_iter()
            .zip(&self.oob)
            .enumerate()
            .filter(|(_, (_, oob))| !oob.is_empty())
            .map(|(t, (tree, oob))| {
                let mut rng = tree_rng(self.seed, PERMUTATION_STREAM + t as u64);
                let n = oob.len() as f64;
                let base = oob.iter().filter(|&&i| tree.predict(&x[i]) != y[i]).count() as f64 / n;
                (0..f)
                    .map(|feat| {
                        let mut vals: Vec<f64> = oob.iter().map(|&i| x[i][feat]).collect();
                        vals.shuffle(&mut rng);
                        let wrong = oob
                            .iter()
                            .zip(&vals)
                            .filter(|&(&i, &v)| {
                                tree.predict_with(|g| if g == feat { v } else { x[i][g] }) != y[i]
                            })
                            .count();
                        wrong as f64 / n - base
                    })
                    .collect()
            })
            .collect();
        (0..f)
            .map(|feat| {
                let d: Vec<f64> = deltas.iter().map(|r| r[feat]).collect();
                if d.len() < 2 {
                    return 0.0;
                }
                let k = d.len() as f64;
                let mean = d.iter().sum::<f64>() / k;
                let sd = (d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt();
                if sd < 1e-12 {
                    0.0
                } else {
                    mean / sd
                }
            })
            .collect()
    }
}
