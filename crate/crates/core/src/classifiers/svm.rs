//! One-vs-rest RBF support vector machines trained with simplified SMO.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_worst_first, NCLASS};

/// Above this many rows the kernel is evaluated on demand instead of cached.
const KERNEL_CACHE_ROWS: usize = 3000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` means 1 / n_features.
    pub gamma: Option<f64>,
    pub tol: f64,
    /// Consecutive sweeps without an update before stopping.
    pub max_passes: usize,
    /// Hard cap on sweeps over the training set.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_passes: 10,
            max_iter: 1000,
            seed: 0,
        }
    }
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d).exp()
}

enum Kernel<'a> {
    Cached { n: usize, k: Vec<f64> },
    OnDemand { gamma: f64, x: &'a [Vec<f64>] },
}

impl<'a> Kernel<'a> {
    fn new(gamma: f64, x: &'a [Vec<f64>]) -> Self {
        let n = x.len();
        if n > KERNEL_CACHE_ROWS {
            return Kernel::OnDemand { gamma, x };
        }
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let v = rbf(gamma, &x[i], &x[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        Kernel::Cached { n, k }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        match self {
            Kernel::Cached { n, k } => k[i * n + j],
            Kernel::OnDemand { gamma, x } => rbf(*gamma, &x[i], &x[j]),
        }
    }
}

/// A two-class machine: `sum(coef_s * K(sv_s, q)) + bias`, positive for the target class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub gamma: f64,
    pub support: Vec<Vec<f64>>,
    /// alpha_s * y_s per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    /// Train on labels in {-1, +1}.
    pub fn fit(p: &SvmParams, gamma: f64, x: &[Vec<f64>], y: &[f64], rng: &mut impl Rng) -> Self {
        Self::fit_with_kernel(p, gamma, x, y, &Kernel::new(gamma, x), rng)
    }

    fn fit_with_kernel(
        p: &SvmParams,
        gamma: f64,
        x: &[Vec<f64>],
        y: &[f64],
        k: &Kernel,
        rng: &mut impl Rng,
    ) -> Self {
        let n = x.len();
        let c = p.c;
        let mut alpha = vec![0.0; n];
        let mut b = 0.0;
        // error cache: f(x_i) - y_i
        let mut err: Vec<f64> = y.iter().map(|v| -v).collect();
        let mut passes = 0;
        let mut sweeps = 0;
        while passes < p.max_passes && sweeps < p.max_iter && n > 1 {
            sweeps += 1;
            let mut changed = 0;
            for i in 0..n {
                let ei = err[i];
                let r = y[i] * ei;
                if !((r < -p.tol && alpha[i] < c) || (r > p.tol && alpha[i] > 0.0)) {
                    continue;
                }
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let ej = err[j];
                let (ai, aj) = (alpha[i], alpha[j]);
                let (lo, hi) = if y[i] != y[j] {
                    ((aj - ai).max(0.0), (c + aj - ai).min(c))
                } else {
                    ((ai + aj - c).max(0.0), (ai + aj).min(c))
                };
                if lo >= hi {
                    continue;
                }
                let (kii, kjj, kij) = (k.at(i, i), k.at(j, j), k.at(i, j));
                let eta = 2.0 * kij - kii - kjj;
                if eta >= 0.0 {
                    continue;
                }
                let new_aj = (aj - y[j] * (ei - ej) / eta).clamp(lo, hi);
                if (new_aj - aj).abs() < 1e-5 {
                    continue;
                }
                let new_ai = (ai + y[i] * y[j] * (aj - new_aj)).clamp(0.0, c);
                let di = y[i] * (new_ai - ai);
                let dj = y[j] * (new_aj - aj);
                let b1 = b - ei - di * kii - dj * kij;
                let b2 = b - ej - di * kij - dj * kjj;
                let new_b = if new_ai > 0.0 && new_ai < c {
                    b1
                } else if new_aj > 0.0 && new_aj < c {
                    b2
                } else {
                    0.5 * (b1 + b2)
                };
                let db = new_b - b;
                for (t, e) in err.iter_mut().enumerate() {
                    *e += di * k.at(i, t) + dj * k.at(j, t) + db;
                }
                alpha[i] = new_ai;
                alpha[j] = new_aj;
                b = new_b;
                changed += 1;
            }
            passes = if changed == 0 { passes + 1 } else { 0 };
        }
        let (mut support, mut coef) = (Vec::new(), Vec::new());
        for t in 0..n {
            if alpha[t] > 0.0 {
                support.push(x[t].clone());
                coef.push(alpha[t] * y[t]);
            }
        }
        BinarySvm {
            gamma,
            support,
            coef,
            bias: b,
        }
    }

    pub fn decision(&self, q: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, a)| a * rbf(self.gamma, s, q))
            .sum::<f64>()
            + self.bias
    }
}

/// One machine per class; classes absent from training have none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub machines: Vec<Option<BinarySvm>>,
}

impl SvmModel {
    pub(super) fn fit(p: &SvmParams, x: &[Vec<f64>], y: &[usize]) -> Self {
        let gamma = p.gamma.unwrap_or(1.0 / x[0].len() as f64);
        let kernel = Kernel::new(gamma, x);
        let machines = (0..NCLASS)
            .map(|c| {
                y.contains(&c).then(|| {
                    let target: Vec<f64> = y.iter().map(|&v| if v == c { 1.0 } else { -1.0 }).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
                    rng.set_stream(c as u64);
                    BinarySvm::fit_with_kernel(p, gamma, x, &target, &kernel, &mut rng)
                })
            })
            .collect();
        SvmModel { machines }
    }

    pub fn decisions(&self, q: &[f64]) -> [f64; NCLASS] {
        let mut s = [f64::NEG_INFINITY; NCLASS];
        for (v, m) in s.iter_mut().zip(&self.machines) {
            if let Some(m) = m {
                *v = m.decision(q);
            }
        }
        s
    }

    pub fn predict(&self, q: &[f64]) -> usize {
        argmax_worst_first(&self.decisions(q))
    }
}
