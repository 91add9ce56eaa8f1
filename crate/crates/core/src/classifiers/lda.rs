use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{argmax_worst_first, NCLASS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaParams {
    /// Weight of the scaled identity in the shrunk pooled covariance.
    pub shrinkage: f64,
}

impl Default for DaParams {
    fn default() -> Self {
        DaParams { shrinkage: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminant {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Linear discriminants `w_k . x + c_k`; absent classes carry none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub classes: Vec<Option<Discriminant>>,
}

impl LdaModel {
    pub(super) fn fit(p: &DaParams, x: &[Vec<f64>], y: &[usize]) -> Self {
        let n = x.len();
        let f = x[0].len();
        let mut counts = [0usize; NCLASS];
        let mut means = vec![vec![0.0; f]; NCLASS];
        for (r, &c) in x.iter().zip(y) {
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(r) {
                *m += v;
            }
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            if c > 0 {
                m.iter_mut().for_each(|v| *v /= c as f64);
            }
        }
        let present = counts.iter().filter(|&&c| c > 0).count();

        let mut cov = DMatrix::<f64>::zeros(f, f);
        for (r, &c) in x.iter().zip(y) {
            let d = DVector::from_iterator(f, r.iter().zip(&means[c]).map(|(v, m)| v - m));
            cov.ger(1.0, &d, &d, 1.0);
        }
        let dof = if n > present { n - present } else { n };
        cov /= dof as f64;

        let target = (cov.trace() / f as f64).max(1e-12);
        let mut shrunk = cov.clone() * (1.0 - p.shrinkage);
        for i in 0..f {
            shrunk[(i, i)] += p.shrinkage * target;
        }
        let mut jitter = 1e-10 * target;
        let chol = loop {
            if let Some(c) = shrunk.clone().cholesky() {
                break c;
            }
            for i in 0..f {
                shrunk[(i, i)] += jitter;
            }
            jitter *= 10.0;
        };

        let classes = (0..NCLASS)
            .map(|c| {
                (counts[c] > 0).then(|| {
                    let mu = DVector::from_column_slice(&means[c]);
                    let w = chol.solve(&mu);
                    Discriminant {
                        intercept: -0.5 * mu.dot(&w) + (counts[c] as f64 / n as f64).ln(),
                        weights: w.as_slice().to_vec(),
                    }
                })
            })
            .collect();
        LdaModel { classes }
    }

    pub fn discriminants(&self, q: &[f64]) -> [f64; NCLASS] {
        let mut s = [f64::NEG_INFINITY; NCLASS];
        for (score, d) in s.iter_mut().zip(&self.classes) {
            if let Some(d) = d {
                *score = d.weights.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() + d.intercept;
            }
        }
        s
    }

    pub fn predict(&self, q: &[f64]) -> usize {
        argmax_worst_first(&self.discriminants(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_midpoint() {
        // equal priors and variances: the boundary sits halfway between the means
        let x: Vec<Vec<f64>> = [-1.1, -0.9, -1.0, 0.9, 1.1, 1.0].iter().map(|&v| vec![v]).collect();
        let y = vec![0, 0, 0, 2, 2, 2];
        let m = LdaModel::fit(&DaParams { shrinkage: 0.0 }, &x, &y);
        assert_eq!(m.predict(&[-0.01]), 0);
        assert_eq!(m.predict(&[0.01]), 2);
        let d = m.discriminants(&[0.0]);
        assert!((d[0] - d[2]).abs() < 1e-9);
        assert_eq!(d[1], f64::NEG_INFINITY);
    }

    #[test]
    fn singular_covariance_is_regularized() {
        // the second column duplicates the first, so the raw covariance is singular
        let x: Vec<Vec<f64>> = [0.0, 0.2, 0.1, 2.0, 2.1, 1.9, 4.0, 4.2, 3.9]
            .iter()
            .map(|&v| vec![v, v, 0.0])
            .collect();
        let y = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let m = LdaModel::fit(&DaParams::default(), &x, &y);
        for (r, &c) in x.iter().zip(&y) {
            assert_eq!(m.predict(r), c);
        }
    }
}
