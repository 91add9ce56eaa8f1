//! Stratified k-fold cross-validation, metrics, confusion matrices and
//! subject-level majority voting.
//!
//! Confusion matrices are indexed `[predicted][actual]`. Precision and recall
//! are macro-averaged over the three classes with 0/0 taken as 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, ClassifierError, ModelKind, ModelSpec, TrainedModel};
use crate::dataset::{Dataset, SurvivalClass};
use crate::features::FeatureGroup;

const NCLASS: usize = SurvivalClass::COUNT;

pub type Confusion = [[u64; NCLASS]; NCLASS];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("class {class} has {have} {unit}, fewer than the {need} folds")]
    TooFewPerClass {
        class: SurvivalClass,
        have: usize,
        need: usize,
        unit: &'static str,
    },
    #[error("fold plan covers {plan} rows but the dataset has {data}")]
    PlanMismatch { plan: usize, data: usize },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ClassifierError,
    },
    #[error("fold {fold}: subject {subject} appears in both training and test rows")]
    Leakage { fold: usize, subject: String },
    #[error("subject {0} has no predicted slices")]
    EmptySubject(String),
    #[error("confusion row {0} is empty")]
    EmptyRow(usize),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldMode {
    /// Rows are stratified individually; slices of one subject may straddle folds.
    #[default]
    SliceLevel,
    /// Whole subjects are assigned to folds.
    SubjectGrouped,
}

impl FoldMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FoldMode::SliceLevel => "slice-level",
            FoldMode::SubjectGrouped => "subject-grouped",
        }
    }
}

impl fmt::Display for FoldMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FoldMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "slice-level" | "slice" => Ok(FoldMode::SliceLevel),
            "subject-grouped" | "subject" => Ok(FoldMode::SubjectGrouped),
            other => Err(format!("unknown fold mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub mode: FoldMode,
    /// Fold id of every dataset row.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_folds];
        self.assignment.iter().for_each(|&f| s[f] += 1);
        s
    }
}

/// Stratified round-robin fold assignment after a seeded shuffle.
///
/// Units (rows, or subjects in grouped mode) are shuffled once, then each
/// class's units are dealt to folds in turn. The dealing position carries
/// over between classes so total fold sizes stay balanced too. A subject's
/// class is the label of its first row.
pub fn make_folds(data: &Dataset, n: usize, mode: FoldMode, seed: u64) -> Result<FoldPlan> {
    if n < 2 {
        return Err(EvalError::InvalidFolds(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (units, unit_label, unit_name): (Vec<Vec<usize>>, Vec<SurvivalClass>, _) = match mode {
        FoldMode::SliceLevel => (
            (0..data.len()).map(|i| vec![i]).collect(),
            data.labels(),
            "rows",
        ),
        FoldMode::SubjectGrouped => {
            let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in data.rows.iter().enumerate() {
                by_subject.entry(&r.subject_id).or_default().push(i);
            }
            let labels = by_subject.values().map(|rows| data.rows[rows[0]].label).collect();
            (by_subject.into_values().collect(), labels, "subjects")
        }
    };
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.shuffle(&mut rng);

    let mut assignment = vec![0; data.len()];
    let mut next = 0;
    for class in SurvivalClass::ALL {
        let members: Vec<usize> = order.iter().copied().filter(|&u| unit_label[u] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < n {
            return Err(EvalError::TooFewPerClass {
                class,
                have: members.len(),
                need: n,
                unit: unit_name,
            });
        }
        for u in members {
            for &row in &units[u] {
                assignment[row] = next % n;
            }
            next += 1;
        }
    }
    Ok(FoldPlan {
        n_folds: n,
        mode,
        assignment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus macro precision/recall of a `[predicted][actual]` matrix.
pub fn metrics(c: &Confusion) -> Metrics {
    let total: u64 = c.iter().flatten().sum();
    let trace: u64 = (0..NCLASS).map(|k| c[k][k]).sum();
    let mut precision = 0.0;
    let mut recall = 0.0;
    for k in 0..NCLASS {
        let predicted: u64 = c[k].iter().sum();
        let actual: u64 = (0..NCLASS).map(|p| c[p][k]).sum();
        precision += ratio(c[k][k], predicted);
        recall += ratio(c[k][k], actual);
    }
    Metrics {
        accuracy: ratio(trace, total),
        precision: precision / NCLASS as f64,
        recall: recall / NCLASS as f64,
    }
}

/// Rows normalized to percentages.
pub fn confusion_pct(c: &Confusion) -> Result<[[f64; NCLASS]; NCLASS]> {
    let mut out = [[0.0; NCLASS]; NCLASS];
    for (k, row) in c.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(EvalError::EmptyRow(k));
        }
        for (o, &v) in out[k].iter_mut().zip(row) {
            *o = 100.0 * v as f64 / total as f64;
        }
    }
    Ok(out)
}

/// Plurality class of a slice list; ties go to the worst prognosis.
pub fn vote(preds: &[SurvivalClass]) -> Option<SurvivalClass> {
    if preds.is_empty() {
        return None;
    }
    let mut counts = [0usize; NCLASS];
    preds.iter().for_each(|p| counts[p.index()] += 1);
    let mut best = 0;
    for k in 1..NCLASS {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    SurvivalClass::from_index(best)
}

pub fn majority_vote(
    slice_predictions: &BTreeMap<String, Vec<SurvivalClass>>,
) -> Result<BTreeMap<String, SurvivalClass>> {
    slice_predictions
        .iter()
        .map(|(s, p)| {
            vote(p)
                .map(|c| (s.clone(), c))
                .ok_or_else(|| EvalError::EmptySubject(s.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectVote {
    pub subject_id: String,
    pub n_slices: usize,
    pub predicted: SurvivalClass,
    pub actual: SurvivalClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub spec: ModelSpec,
    pub mode: FoldMode,
    pub n_folds: usize,
    pub seed: u64,
    pub averaging: String,
    pub n_rows: usize,
    pub n_subjects: usize,
    pub n_features: usize,
    /// Rows per class, in short/mid/long order.
    pub class_counts: [usize; NCLASS],
    /// `[predicted][actual]` counts pooled over folds.
    pub confusion: Confusion,
    /// Row percentages; `None` for a class that was never predicted.
    pub confusion_pct: [Option<[f64; NCLASS]>; NCLASS],
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub per_fold: Vec<FoldMetrics>,
    pub subject_votes: Vec<SubjectVote>,
    pub subject_accuracy: f64,
}

struct FoldOutcome {
    test: Vec<usize>,
    predicted: Vec<SurvivalClass>,
    n_train: usize,
}

fn check_leakage(data: &Dataset, fold: usize, train: &[usize], test: &[usize]) -> Result<()> {
    let train_subjects: BTreeSet<&str> = train.iter().map(|&i| data.rows[i].subject_id.as_str()).collect();
    match test.iter().find(|&&i| train_subjects.contains(data.rows[i].subject_id.as_str())) {
        Some(&i) => Err(EvalError::Leakage {
            fold,
            subject: data.rows[i].subject_id.clone(),
        }),
        None => Ok(()),
    }
}

/// Fit on out-of-fold rows and predict in-fold rows for every fold.
pub fn cross_validate(spec: &ModelSpec, data: &Dataset, plan: &FoldPlan) -> Result<EvalReport> {
    cross_validate_seeded(spec, data, plan, 0)
}

/// As [`cross_validate`], recording `seed` (the fold seed) in the report.
pub fn cross_validate_seeded(
    spec: &ModelSpec,
    data: &Dataset,
    plan: &FoldPlan,
    seed: u64,
) -> Result<EvalReport> {
    if plan.assignment.len() != data.len() {
        return Err(EvalError::PlanMismatch {
            plan: plan.assignment.len(),
            data: data.len(),
        });
    }
    spec.validate()?;
    let outcomes: Vec<FoldOutcome> = (0..plan.n_folds)
        .into_par_iter()
        .map(|fold| {
            let train = plan.train_rows(fold);
            let test = plan.test_rows(fold);
            if plan.mode == FoldMode::SubjectGrouped {
                check_leakage(data, fold, &train, &test)?;
            }
            let wrap = |source| EvalError::Fold { fold, source };
            let model = classifiers::fit(spec, &data.subset(&train)).map_err(wrap)?;
            let predicted = test
                .iter()
                .map(|&i| model.predict(&data.rows[i].features))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(wrap)?;
            Ok(FoldOutcome {
                test,
                predicted,
                n_train: train.len(),
            })
        })
        .collect::<Result<_>>()?;

    let mut confusion = [[0u64; NCLASS]; NCLASS];
    let mut row_pred = vec![SurvivalClass::Short; data.len()];
    let mut per_fold = Vec::with_capacity(outcomes.len());
    for (fold, o) in outcomes.iter().enumerate() {
        let mut fc = [[0u64; NCLASS]; NCLASS];
        for (&i, &p) in o.test.iter().zip(&o.predicted) {
            fc[p.index()][data.rows[i].label.index()] += 1;
            row_pred[i] = p;
        }
        for (a, b) in confusion.iter_mut().flatten().zip(fc.iter().flatten()) {
            *a += b;
        }
        let m = metrics(&fc);
        per_fold.push(FoldMetrics {
            fold,
            n_train: o.n_train,
            n_test: o.test.len(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
        });
    }

    let mut by_subject: BTreeMap<String, Vec<SurvivalClass>> = BTreeMap::new();
    let mut actual: BTreeMap<&str, SurvivalClass> = BTreeMap::new();
    for (r, &p) in data.rows.iter().zip(&row_pred) {
        by_subject.entry(r.subject_id.clone()).or_default().push(p);
        actual.entry(&r.subject_id).or_insert(r.label);
    }
    let votes = majority_vote(&by_subject)?;
    let subject_votes: Vec<SubjectVote> = votes
        .iter()
        .map(|(s, &predicted)| SubjectVote {
            subject_id: s.clone(),
            n_slices: by_subject[s].len(),
            predicted,
            actual: actual[s.as_str()],
        })
        .collect();
    let correct = subject_votes.iter().filter(|v| v.predicted == v.actual).count();

    let m = metrics(&confusion);
    let mut pct = [None; NCLASS];
    for (k, p) in pct.iter_mut().enumerate() {
        let total: u64 = confusion[k].iter().sum();
        if total > 0 {
            *p = Some(confusion[k].map(|v| 100.0 * v as f64 / total as f64));
        }
    }
    Ok(EvalReport {
        model: spec.kind(),
        spec: spec.clone(),
        mode: plan.mode,
        n_folds: plan.n_folds,
        seed,
        averaging: "macro".into(),
        n_rows: data.len(),
        n_subjects: subject_votes.len(),
        n_features: data.n_features(),
        class_counts: data.class_counts(),
        confusion,
        confusion_pct: pct,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        per_fold,
        subject_accuracy: ratio(correct as u64, subject_votes.len() as u64),
        subject_votes,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable summary with the percentage confusion table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {}  cv: {}-fold {}  seed: {}", self.model.as_str(), self.n_folds, self.mode, self.seed);
        let _ = writeln!(
            s,
            "rows: {}  subjects: {}  features: {}  classes (short/mid/long): {}/{}/{}",
            self.n_rows, self.n_subjects, self.n_features, self.class_counts[0], self.class_counts[1], self.class_counts[2]
        );
        let _ = writeln!(s, "accuracy  {:.4}", self.accuracy);
        let _ = writeln!(s, "precision {:.4} (macro)", self.precision);
        let _ = writeln!(s, "recall    {:.4} (macro)", self.recall);
        let _ = writeln!(s, "subject-level accuracy (majority vote) {:.4}", self.subject_accuracy);
        let _ = writeln!(s);
        let _ = writeln!(s, "confusion, % of each predicted row (rows predicted, columns actual)");
        let _ = writeln!(s, "{:>10} {:>8} {:>8} {:>8}", "", "short", "mid", "long");
        for (k, row) in self.confusion_pct.iter().enumerate() {
            let name = SurvivalClass::ALL[k].as_str();
            match row {
                Some(r) => {
                    let _ = writeln!(s, "{name:>10} {:>8.2} {:>8.2} {:>8.2}", r[0], r[1], r[2]);
                }
                None => {
                    let _ = writeln!(s, "{name:>10} {:>8} {:>8} {:>8}", "-", "-", "-");
                }
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>5} {:>7} {:>6} {:>9} {:>9} {:>9}", "fold", "train", "test", "accuracy", "precision", "recall");
        for f in &self.per_fold {
            let _ = writeln!(
                s,
                "{:>5} {:>7} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                f.fold, f.n_train, f.n_test, f.accuracy, f.precision, f.recall
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRow {
    pub feature_name: String,
    /// Feature family, or `None` for names outside the standard layout.
    pub group: Option<FeatureGroup>,
    pub score: f64,
}

/// Fit a forest on all of `data` and score every feature by OOB permutation.
pub fn importance_table(spec: &ModelSpec, data: &Dataset) -> Result<(TrainedModel, Vec<ImportanceRow>)> {
    let model = classifiers::fit(spec, data)?;
    let scores = classifiers::rf_oob_importance(&model, data)?;
    let rows = data
        .feature_names
        .iter()
        .zip(scores)
        .map(|(n, score)| ImportanceRow {
            feature_name: n.clone(),
            group: FeatureGroup::of(n),
            score,
        })
        .collect();
    Ok((model, rows))
}

/// CSV with header `feature_name,group,score`; unknown groups are written as `other`.
pub fn write_importance_csv<W: Write>(rows: &[ImportanceRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["feature_name", "group", "score"])
        .map_err(std::io::Error::from)?;
    for r in rows {
        let group = r.group.map_or("other", FeatureGroup::as_str);
        wtr.write_record([r.feature_name.as_str(), group, &r.score.to_string()])
            .map_err(std::io::Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}
