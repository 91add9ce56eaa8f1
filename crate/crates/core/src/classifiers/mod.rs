//! The five survival classifiers behind one fit/predict interface.
//!
//! Every model standardizes features with the training mean and population
//! standard deviation before fitting. Class ties always resolve to the worst
//! prognosis, i.e. the lowest [`SurvivalClass`].

mod forest;
mod knn;
mod lda;
mod svm;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, SurvivalClass};

pub use forest::{ForestParams, RandomForest};
pub use knn::{DistanceMetric, KnnModel, KnnParams};
pub use lda::{DaParams, LdaModel};
pub use svm::{BinarySvm, SvmModel, SvmParams};
pub use tree::{DecisionTree, SplitCriterion, TreeParams};

/// Bumped whenever the serialized model layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

const NCLASS: usize = SurvivalClass::COUNT;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data holds a single class")]
    SingleClass,
    #[error("training data is empty")]
    EmptyData,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model is not a random forest")]
    NotAForest,
    #[error("importance data has {got} rows but the forest was trained on {expected}")]
    DataMismatch { expected: usize, got: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Da,
    Dt,
    Svm,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Knn, ModelKind::Da, ModelKind::Dt, ModelKind::Svm, ModelKind::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Da => "da",
            ModelKind::Dt => "dt",
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "knn" | "k-nn" => Ok(ModelKind::Knn),
            "da" | "lda" => Ok(ModelKind::Da),
            "dt" | "tree" => Ok(ModelKind::Dt),
            "svm" => Ok(ModelKind::Svm),
            "rf" | "forest" => Ok(ModelKind::Rf),
            other => Err(format!("unknown model kind '{other}'")),
        }
    }
}

/// Model family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Knn(KnnParams),
    Da(DaParams),
    Dt(TreeParams),
    Svm(SvmParams),
    Rf(ForestParams),
}

impl ModelSpec {
    /// Spec with default hyperparameters for `kind`.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => ModelSpec::Knn(KnnParams::default()),
            ModelKind::Da => ModelSpec::Da(DaParams::default()),
            ModelKind::Dt => ModelSpec::Dt(TreeParams::default()),
            ModelKind::Svm => ModelSpec::Svm(SvmParams::default()),
            ModelKind::Rf => ModelSpec::Rf(ForestParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Knn(_) => ModelKind::Knn,
            ModelSpec::Da(_) => ModelKind::Da,
            ModelSpec::Dt(_) => ModelKind::Dt,
            ModelSpec::Svm(_) => ModelKind::Svm,
            ModelSpec::Rf(_) => ModelKind::Rf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ClassifierError::InvalidSpec(m));
        match self {
            ModelSpec::Knn(p) if p.k == 0 => bad("k must be at least 1".into()),
            ModelSpec::Da(p) if !(0.0..1.0).contains(&p.shrinkage) => {
                bad(format!("shrinkage must be in [0, 1), got {}", p.shrinkage))
            }
            ModelSpec::Dt(p) if p.max_splits == 0 => bad("max_splits must be at least 1".into()),
            ModelSpec::Svm(p) if !(p.c > 0.0) => bad(format!("C must be positive, got {}", p.c)),
            ModelSpec::Svm(p) if p.gamma.is_some_and(|g| !(g > 0.0)) => {
                bad("gamma must be positive".into())
            }
            ModelSpec::Svm(p) if !(p.tol > 0.0) || p.max_passes == 0 => {
                bad("tol must be positive and max_passes at least 1".into())
            }
            ModelSpec::Rf(p) if p.n_trees == 0 => bad("n_trees must be at least 1".into()),
            ModelSpec::Rf(p) if p.features_per_node == Some(0) => {
                bad("features_per_node must be at least 1".into())
            }
            _ => Ok(()),
        }
    }
}

/// Per-feature centering and scaling captured at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population std; columns with std below 1e-12 keep scale 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Self {
        let f = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; f];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; f];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Argmax over class scores; ties go to the lowest class index.
pub(crate) fn argmax_worst_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn plurality(counts: &[usize; NCLASS]) -> usize {
    let mut best = 0;
    for c in 1..NCLASS {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelBody {
    Knn(KnnModel),
    Da(LdaModel),
    Dt(DecisionTree),
    Svm(SvmModel),
    Rf(RandomForest),
}

/// A fitted classifier. Immutable; `predict` is deterministic and reentrant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub spec: ModelSpec,
    pub body: ModelBody,
}

fn check_training(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyData);
    }
    for (row, r) in data.rows.iter().enumerate() {
        if r.features.len() != data.n_features() {
            return Err(ClassifierError::DimensionMismatch {
                expected: data.n_features(),
                got: r.features.len(),
            });
        }
        if let Some(col) = r.features.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteFeature { row, col });
        }
    }
    let first = data.rows[0].label;
    if data.rows.iter().all(|r| r.label == first) {
        return Err(ClassifierError::SingleClass);
    }
    Ok(())
}

/// Fit `spec` on every row of `data`.
pub fn fit(spec: &ModelSpec, data: &Dataset) -> Result<TrainedModel> {
    spec.validate()?;
    check_training(data)?;
    let raw = data.features();
    let standardizer = Standardizer::fit(&raw);
    let x: Vec<Vec<f64>> = raw.iter().map(|r| standardizer.transform(r)).collect();
    let y: Vec<usize> = data.rows.iter().map(|r| r.label.index()).collect();
    let body = match spec {
        ModelSpec::Knn(p) => ModelBody::Knn(KnnModel::fit(p, x, y)),
        ModelSpec::Da(p) => ModelBody::Da(LdaModel::fit(p, &x, &y)),
        ModelSpec::Dt(p) => ModelBody::Dt(DecisionTree::fit(p, &x, &y)),
        ModelSpec::Svm(p) => ModelBody::Svm(SvmModel::fit(p, &x, &y)),
        ModelSpec::Rf(p) => ModelBody::Rf(RandomForest::fit(p, &x, &y)),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        n_features: data.n_features(),
        feature_names: data.feature_names.clone(),
        standardizer,
        spec: spec.clone(),
        body,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    fn standardized(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.standardizer.transform(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<SurvivalClass> {
        let z = self.standardized(x)?;
        let c = match &self.body {
            ModelBody::Knn(m) => m.predict(&z),
            ModelBody::Da(m) => m.predict(&z),
            ModelBody::Dt(m) => m.predict(&z),
            ModelBody::Svm(m) => m.predict(&z),
            ModelBody::Rf(m) => m.predict(&z),
        };
        Ok(SurvivalClass::from_index(c).expect("class index in range"))
    }

    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<SurvivalClass>> {
        data.rows.iter().map(|r| self.predict(&r.features)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel =
            serde_json::from_str(text).map_err(|e| ClassifierError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn predict(m: &TrainedModel, x: &[f64]) -> Result<SurvivalClass> {
    m.predict(x)
}

/// Out-of-bag permutation importance of every feature of a fitted forest.
///
/// `data` must be the dataset the forest was trained on.
pub fn rf_oob_importance(m: &TrainedModel, data: &Dataset) -> Result<Vec<f64>> {
    let ModelBody::Rf(forest) = &m.body else {
        return Err(ClassifierError::NotAForest);
    };
    if data.len() != forest.n_train {
        return Err(ClassifierError::DataMismatch {
            expected: forest.n_train,
            got: data.len(),
        });
    }
    let x = data
        .rows
        .iter()
        .map(|r| m.standardized(&r.features))
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<usize> = data.rows.iter().map(|r| r.label.index()).collect();
    Ok(forest.oob_importance(&x, &y))
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::*;
    use crate::dataset::DatasetRow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Three Gaussian blobs: `informative` columns carry class-dependent
    /// centers at `separation` apart, the rest is unit noise.
    pub fn blobs(
        n_per_class: usize,
        n_features: usize,
        informative: usize,
        sigma: f64,
        separation: f64,
        seed: u64,
    ) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let spread = Normal::new(0.0, sigma).unwrap();
        let mut rows = Vec::new();
        for (c, class) in SurvivalClass::ALL.iter().enumerate() {
            for i in 0..n_per_class {
                let features = (0..n_features)
                    .map(|f| {
                        if f < informative {
                            // each informative column separates one class from the others
                            let center = if f % 3 == c { separation } else { 0.0 };
                            center + spread.sample(&mut rng)
                        } else {
                            noise.sample(&mut rng)
                        }
                    })
                    .collect();
                rows.push(DatasetRow {
                    subject_id: format!("c{c}s{:03}", i / 10),
                    z_index: i,
                    features,
                    label: *class,
                });
            }
        }
        let names = (0..n_features).map(|i| format!("f{i:02}")).collect();
        Dataset::new(names, rows).unwrap()
    }

    pub fn accuracy(m: &TrainedModel, d: &Dataset) -> f64 {
        let pred = m.predict_all(d).unwrap();
        pred.iter().zip(&d.rows).filter(|(p, r)| **p == r.label).count() as f64 / d.len() as f64
    }
}
