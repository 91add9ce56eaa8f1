use serde::{Deserialize, Serialize};

use super::{plurality, NCLASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Manhattan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
    pub metric: DistanceMetric,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 3,
            metric: DistanceMetric::Euclidean,
        }
    }
}

/// Stores the standardized training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: DistanceMetric,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl KnnModel {
    pub(super) fn fit(p: &KnnParams, x: Vec<Vec<f64>>, y: Vec<usize>) -> Self {
        KnnModel {
            k: p.k,
            metric: p.metric,
            x,
            y,
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.metric {
            // squared distance orders neighbors identically
            DistanceMetric::Euclidean => a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum(),
            DistanceMetric::Manhattan => a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum(),
        }
    }

    /// Majority among the k nearest; equal distances keep the lower training index.
    pub fn predict(&self, q: &[f64]) -> usize {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (self.distance(r, q), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = [0usize; NCLASS];
        for &(_, i) in &d[..k] {
            votes[self.y[i]] += 1;
        }
        plurality(&votes)
    }
}
