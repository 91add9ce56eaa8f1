//! Batch commands behind the `radisurv` binary.
//!
//! Each command writes its outputs plus a `manifest-<command>.json` holding
//! the config hash, seed, tool version and SHA-256 of every input and output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifiers::{self, ClassifierError, ModelKind, ModelSpec, TrainedModel};
use crate::config::RunConfig;
use crate::dataset::{assemble, read_clinical_csv, Dataset, DatasetError, SliceFeatures};
use crate::eval::{self, EvalError, EvalReport};
use crate::features::{feature_names, slice_features, ModalityInput};
use crate::phantom::{self, PhantomSpec, PhantomSubject};
use crate::roi::{extract_roi, zscore_slice, NormalizationScope, RoiError, VolumeStats};
use crate::volume::{load_mask, load_volume, Volume3D, VolumeError};

pub const FEATURES_FILE: &str = "features.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const MODEL_FILE: &str = "model.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

/// Command failure; each variant maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("empty output: {0}")]
    Empty(String),
    #[error("{0}")]
    TooFewPerClass(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Empty(_) => 4,
            CliError::TooFewPerClass(_) => 5,
            CliError::Failed(_) => 1,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::TooFewPerClass { .. } | EvalError::InvalidFolds(_) => {
                CliError::TooFewPerClass(e.to_string())
            }
            EvalError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::Io(_) => CliError::Io(e.to_string()),
            ClassifierError::InvalidSpec(_) => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

/// Run `f` on a rayon pool capped at `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn digest(path: &Path, shown: String) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(FileDigest {
        path: shown,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Write `manifest-<command>.json` into the output directory.
fn write_manifest(cfg: &RunConfig, command: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<PathBuf, CliError> {
    let out = cfg.output_dir();
    let shown = |p: &Path| {
        p.strip_prefix(&out)
            .unwrap_or(p)
            .display()
            .to_string()
    };
    let manifest = Manifest {
        command: command.into(),
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: cfg.sha256(),
        seed: cfg.seed,
        config: cfg.clone(),
        inputs: inputs.iter().map(|p| digest(p, shown(p))).collect::<Result<_, _>>()?,
        outputs: outputs.iter().map(|p| digest(p, shown(p))).collect::<Result<_, _>>()?,
    };
    let path = out.join(format!("manifest-{command}.json"));
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    Ok(out)
}

#[derive(Debug)]
pub struct ExtractSummary {
    pub csv: PathBuf,
    pub dataset: Dataset,
    /// Slices kept per subject; subjects with none are listed with 0.
    pub per_subject: BTreeMap<String, usize>,
    /// Slices skipped for a degenerate ROI or texture, as `subject z=<index>: reason`.
    pub skipped: Vec<String>,
}

struct SubjectResult {
    slices: Vec<SliceFeatures>,
    skipped: Vec<String>,
}

fn subject_error(subject: &str, e: VolumeError) -> CliError {
    match e {
        VolumeError::Io { .. } => CliError::Io(format!("subject {subject}: {e}")),
        other => CliError::Failed(format!("subject {subject}: {other}")),
    }
}

fn extract_subject(cfg: &RunConfig, subject: &str) -> Result<SubjectResult, CliError> {
    let fc = &cfg.features;
    let mask_path = cfg.subject_file(subject, &cfg.mask_suffix);
    let mask = load_mask(&mask_path).map_err(|e| subject_error(subject, e))?;
    let volumes: Vec<Volume3D> = cfg
        .modalities
        .iter()
        .map(|&m| load_volume(cfg.subject_file(subject, m.suffix()), m))
        .collect::<Result<_, _>>()
        .map_err(|e| subject_error(subject, e))?;
    for v in &volumes {
        if v.dims() != mask.dims() {
            return Err(CliError::Failed(format!(
                "subject {subject}: {} volume is {:?} but the mask is {:?}",
                v.modality(),
                v.dims(),
                mask.dims()
            )));
        }
    }
    let stats = match fc.normalization {
        NormalizationScope::Slice => None,
        NormalizationScope::Volume => Some(
            volumes
                .iter()
                .map(VolumeStats::of)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Failed(format!("subject {subject}: {e}")))?,
        ),
    };

    let mut out = SubjectResult {
        slices: Vec::new(),
        skipped: Vec::new(),
    };
    for z in 0..mask.dims().nz {
        if mask.tumor_count(z) < fc.min_roi_pixels.max(1) {
            continue;
        }
        let labels = mask.axial_labels(z).map_err(|e| subject_error(subject, e))?;
        let mut slices = Vec::with_capacity(volumes.len());
        let mut rois = Vec::with_capacity(volumes.len());
        let mut skip = None;
        for (k, v) in volumes.iter().enumerate() {
            let raw = v.axial_slice(z).map_err(|e| subject_error(subject, e))?;
            let norm = match &stats {
                Some(s) => Ok(s[k].apply(&raw)),
                None => zscore_slice(&raw),
            };
            let norm = match norm {
                Ok(s) => s,
                Err(RoiError::DegenerateSlice) => {
                    skip = Some(format!("{} slice is constant", v.modality()));
                    break;
                }
                Err(e) => return Err(CliError::Failed(format!("subject {subject} z={z}: {e}"))),
            };
            match extract_roi(&norm, &labels, subject, v.modality(), fc.min_roi_pixels) {
                Ok(Some(roi)) => {
                    slices.push(norm);
                    rois.push(roi);
                }
                Ok(None) => {
                    skip = Some("ROI below min_roi_pixels".into());
                    break;
                }
                Err(e) => return Err(CliError::Failed(format!("subject {subject} z={z}: {e}"))),
            }
        }
        if let Some(reason) = skip {
            out.skipped.push(format!("{subject} z={z}: {reason}"));
            continue;
        }
        let inputs: Vec<ModalityInput> = slices
            .iter()
            .zip(&rois)
            .map(|(slice, roi)| ModalityInput { slice, roi })
            .collect();
        match slice_features(&inputs, fc) {
            Ok(features) => out.slices.push(SliceFeatures {
                subject_id: subject.to_string(),
                z_index: z,
                features,
            }),
            Err(e) => out.skipped.push(format!("{subject} z={z}: {e}")),
        }
    }
    Ok(out)
}

/// Extract slice features for every subject of the clinical CSV and write `features.csv`.
pub fn run_extract(cfg: &RunConfig) -> Result<ExtractSummary, CliError> {
    let root = cfg.data_root();
    if !root.is_dir() {
        return Err(CliError::Config(format!("data_root {} is not a directory", root.display())));
    }
    let clinical_path = cfg.clinical_csv();
    if !clinical_path.is_file() {
        return Err(CliError::Config(format!("clinical CSV {} not found", clinical_path.display())));
    }
    let clinical = read_clinical_csv(&clinical_path)
        .map_err(|e| CliError::Failed(format!("{}: {e}", clinical_path.display())))?;

    let results: Vec<(String, SubjectResult)> = clinical
        .par_iter()
        .map(|r| extract_subject(cfg, &r.subject_id).map(|s| (r.subject_id.clone(), s)))
        .collect::<Result<_, _>>()?;

    let mut per_subject = BTreeMap::new();
    let mut slices = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in results {
        per_subject.insert(id, r.slices.len());
        slices.extend(r.slices);
        skipped.extend(r.skipped);
    }
    if slices.is_empty() {
        return Err(CliError::Empty(format!(
            "no slice of {} subjects reaches {} tumor pixels",
            per_subject.len(),
            cfg.features.min_roi_pixels
        )));
    }
    let names = feature_names(&cfg.features);
    let dataset = assemble(&slices, &names, &clinical, &cfg.thresholds)?;

    let out = ensure_output_dir(cfg)?;
    let csv = out.join(FEATURES_FILE);
    dataset
        .write_csv_file(&csv)
        .map_err(|e| io_error(&csv, e))?;
    write_manifest(cfg, "extract", &[clinical_path], std::slice::from_ref(&csv))?;
    Ok(ExtractSummary {
        csv,
        dataset,
        per_subject,
        skipped,
    })
}

fn read_features(path: &Path) -> Result<Dataset, CliError> {
    if !path.is_file() {
        return Err(CliError::Io(format!("{}: feature CSV not found", path.display())));
    }
    let d = Dataset::read_csv_file(path).map_err(|e| match e {
        DatasetError::Io(_) => io_error(path, e),
        other => CliError::Failed(format!("{}: {other}", path.display())),
    })?;
    if d.is_empty() {
        return Err(CliError::Empty(format!("{} holds no rows", path.display())));
    }
    Ok(d)
}

/// Default location of the feature CSV for a config.
pub fn default_features_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir().join(FEATURES_FILE)
}

#[derive(Debug)]
pub struct EvaluateSummary {
    pub report: EvalReport,
    pub outputs: Vec<PathBuf>,
}

fn write_importance(out: &Path, rows: &[eval::ImportanceRow]) -> Result<PathBuf, CliError> {
    let path = out.join(IMPORTANCE_FILE);
    let file = std::fs::File::create(&path).map_err(|e| io_error(&path, e))?;
    eval::write_importance_csv(rows, std::io::BufWriter::new(file))?;
    Ok(path)
}

/// Cross-validate the configured model; RF runs also write OOB importance.
pub fn run_evaluate(cfg: &RunConfig, features: &Path) -> Result<EvaluateSummary, CliError> {
    let data = read_features(features)?;
    let plan = eval::make_folds(&data, cfg.cv.n_folds, cfg.cv.mode, cfg.seed)?;
    let report = eval::cross_validate_seeded(&cfg.model, &data, &plan, cfg.seed)?;

    let out = ensure_output_dir(cfg)?;
    let json = out.join(REPORT_JSON);
    std::fs::write(&json, report.to_json()).map_err(|e| io_error(&json, e))?;
    let txt = out.join(REPORT_TXT);
    std::fs::write(&txt, report.to_table()).map_err(|e| io_error(&txt, e))?;
    let mut outputs = vec![json, txt];
    if cfg.model.kind() == ModelKind::Rf {
        let (_, rows) = eval::importance_table(&cfg.model, &data)?;
        outputs.push(write_importance(&out, &rows)?);
    }
    write_manifest(cfg, "evaluate", &[features.to_path_buf()], &outputs)?;
    Ok(EvaluateSummary { report, outputs })
}

/// Fit the configured forest on all rows and write OOB permutation importance.
pub fn run_importance(cfg: &RunConfig, features: &Path) -> Result<Vec<eval::ImportanceRow>, CliError> {
    let spec = match &cfg.model {
        s @ ModelSpec::Rf(_) => s.clone(),
        other => {
            return Err(CliError::Config(format!(
                "importance needs an rf model, config has '{}'",
                other.kind().as_str()
            )))
        }
    };
    let data = read_features(features)?;
    let (_, rows) = eval::importance_table(&spec, &data)?;
    let out = ensure_output_dir(cfg)?;
    let path = write_importance(&out, &rows)?;
    write_manifest(cfg, "importance", &[features.to_path_buf()], &[path])?;
    Ok(rows)
}

/// Fit the configured model on all rows and save it as JSON.
pub fn run_train(cfg: &RunConfig, features: &Path, model_out: Option<&Path>) -> Result<PathBuf, CliError> {
    let data = read_features(features)?;
    let model = classifiers::fit(&cfg.model, &data)?;
    let out = ensure_output_dir(cfg)?;
    let path = model_out.map_or_else(|| out.join(MODEL_FILE), Path::to_path_buf);
    model.save(&path).map_err(|e| io_error(&path, e))?;
    write_manifest(cfg, "train", &[features.to_path_buf()], std::slice::from_ref(&path))?;
    Ok(path)
}

/// Predict every row of a feature CSV with a saved model.
///
/// Writes `subject_id,z_index,label,predicted`; `label` is the CSV's own label.
pub fn run_predict(model_path: &Path, features: &Path, out_path: &Path) -> Result<usize, CliError> {
    let model = TrainedModel::load(model_path).map_err(|e| match e {
        ClassifierError::Io(_) => io_error(model_path, e),
        other => CliError::Failed(format!("{}: {other}", model_path.display())),
    })?;
    let data = read_features(features)?;
    if data.feature_names != model.feature_names {
        return Err(CliError::Failed(format!(
            "{} columns do not match the model's {} training features",
            features.display(),
            model.n_features
        )));
    }
    let preds = model.predict_all(&data)?;
    let mut w = csv::Writer::from_path(out_path).map_err(|e| io_error(out_path, e))?;
    let write = |w: &mut csv::Writer<std::fs::File>, rec: [&str; 4]| {
        w.write_record(rec).map_err(|e| io_error(out_path, e))
    };
    write(&mut w, ["subject_id", "z_index", "label", "predicted"])?;
    for (r, p) in data.rows.iter().zip(&preds) {
        write(&mut w, [&r.subject_id, &r.z_index.to_string(), r.label.as_str(), p.as_str()])?;
    }
    w.flush().map_err(|e| io_error(out_path, e))?;
    Ok(preds.len())
}

pub fn run_phantom_gen(dir: &Path, spec: &PhantomSpec) -> Result<Vec<PhantomSubject>, CliError> {
    if spec.n_subjects == 0 {
        return Err(CliError::Config("--subjects must be at least 1".into()));
    }
    phantom::generate(dir, spec).map_err(|e| match e {
        VolumeError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Failed(other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    fn small_cohort(n: usize) -> (tempfile::TempDir, RunConfig) {
        let dir = tempfile::tempdir().unwrap();
        let spec = PhantomSpec {
            n_subjects: n,
            dims: Dims::new(40, 40, 16),
            seed: 5,
        };
        run_phantom_gen(dir.path(), &spec).unwrap();
        let cfg = RunConfig::load(&dir.path().join("config.toml")).unwrap();
        (dir, cfg)
    }

    #[test]
    fn extract_writes_ninety_one_features() {
        let (_dir, cfg) = small_cohort(2);
        let s = run_extract(&cfg).unwrap();
        assert_eq!(s.dataset.n_features(), 91);
        assert_eq!(s.dataset.feature_names.last().unwrap(), "age");
        assert!(s.per_subject.values().all(|&n| n > 0));
        let header = std::fs::read_to_string(&s.csv).unwrap();
        assert_eq!(header.lines().next().unwrap().split(',').count(), 94);
        assert!(cfg.output_dir().join("manifest-extract.json").exists());
    }

    #[test]
    fn missing_mask_names_subject() {
        let (dir, cfg) = small_cohort(2);
        let id = phantom::subject_id(1);
        std::fs::remove_file(dir.path().join(&id).join(format!("{id}_seg.nii.gz"))).unwrap();
        let e = run_extract(&cfg).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains(&id), "{e}");
    }

    #[test]
    fn tiny_rois_give_empty_output() {
        let (_dir, mut cfg) = small_cohort(1);
        cfg.features.min_roi_pixels = 100_000;
        assert_eq!(run_extract(&cfg).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn missing_data_root_is_config_error() {
        let mut cfg = RunConfig::default();
        cfg.data_root = PathBuf::from("/nonexistent/radisurv");
        assert_eq!(run_extract(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn volume_normalization_also_extracts() {
        let (_dir, mut cfg) = small_cohort(1);
        cfg.features.normalization = NormalizationScope::Volume;
        assert!(!run_extract(&cfg).unwrap().dataset.is_empty());
    }

    #[test]
    fn two_rows_ten_folds_exit_five() {
        let (dir, cfg) = small_cohort(2);
        let s = run_extract(&cfg).unwrap();
        let two = s.dataset.subset(&[0, s.dataset.len() - 1]);
        let path = dir.path().join("two.csv");
        two.write_csv_file(&path).unwrap();
        assert_eq!(run_evaluate(&cfg, &path).unwrap_err().exit_code(), 5);
    }

    #[test]
    fn train_then_predict() {
        let (dir, cfg) = small_cohort(2);
        let s = run_extract(&cfg).unwrap();
        let model = run_train(&cfg, &s.csv, None).unwrap();
        let out = dir.path().join("pred.csv");
        assert_eq!(run_predict(&model, &s.csv, &out).unwrap(), s.dataset.len());
        let text = std::fs::read_to_string(out).unwrap();
        assert!(text.starts_with("subject_id,z_index,label,predicted\n"));
    }

    #[test]
    fn importance_rejects_non_forest() {
        let (_dir, mut cfg) = small_cohort(2);
        let s = run_extract(&cfg).unwrap();
        cfg.model = ModelSpec::default_for(ModelKind::Knn);
        assert_eq!(run_importance(&cfg, &s.csv).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn thread_cap_zero_rejected() {
        assert_eq!(with_threads(Some(0), || ()).unwrap_err().exit_code(), 2);
        assert_eq!(with_threads(Some(2), rayon::current_num_threads).unwrap(), 2);
    }
}
