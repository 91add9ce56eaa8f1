//! Run configuration, read from a TOML file.
//!
//! ```toml
//! data_root = "brats/HGG"
//! clinical_csv = "brats/survival_data.csv"
//! output_dir = "out"
//! modalities = ["t1", "t1ce", "t2", "flair"]
//! seed = 42
//!
//! [features]
//! gray_levels = 32
//! lbp_bins = 55
//! min_roi_pixels = 50
//!
//! [thresholds]
//! mid_days = 600
//! long_days = 1300
//!
//! [model]
//! kind = "rf"
//! n_trees = 30
//!
//! [cv]
//! n_folds = 10
//! mode = "slice-level"
//! ```
//!
//! Every key is optional. Relative paths resolve against the directory of
//! the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{ModelKind, ModelSpec};
use crate::dataset::SurvivalThresholds;
use crate::eval::FoldMode;
use crate::features::FeatureConfig;
use crate::volume::Modality;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub n_folds: usize,
    pub mode: FoldMode,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            n_folds: 10,
            mode: FoldMode::SliceLevel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Holds one directory per subject: `<id>/<id>_<modality>.<ext>`.
    pub data_root: PathBuf,
    /// Defaults to `<data_root>/survival_data.csv`.
    pub clinical_csv: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub modalities: Vec<Modality>,
    pub mask_suffix: String,
    /// `nii.gz`, `nii` or `rvol`.
    pub volume_extension: String,
    /// Fold assignment seed.
    pub seed: u64,
    pub features: FeatureConfig,
    pub thresholds: SurvivalThresholds,
    pub model: ModelSpec,
    pub cv: CvConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_root: PathBuf::from("."),
            clinical_csv: None,
            output_dir: PathBuf::from("out"),
            modalities: Modality::ALL.to_vec(),
            mask_suffix: "seg".into(),
            volume_extension: "nii.gz".into(),
            seed: 42,
            features: FeatureConfig::default(),
            thresholds: SurvivalThresholds::default(),
            model: ModelSpec::default_for(ModelKind::Rf),
            cv: CvConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and validate a config file; its directory becomes the base for relative paths.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.modalities.is_empty() {
            return Err("modalities must not be empty".into());
        }
        let mut seen = self.modalities.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modalities.len() {
            return Err("modalities must not repeat".into());
        }
        if !["nii.gz", "nii", "rvol"].contains(&self.volume_extension.as_str()) {
            return Err(format!(
                "volume_extension must be nii.gz, nii or rvol, got '{}'",
                self.volume_extension
            ));
        }
        if self.mask_suffix.is_empty() {
            return Err("mask_suffix must not be empty".into());
        }
        self.features.validate()?;
        self.thresholds.validate()?;
        self.model.validate().map_err(|e| e.to_string())?;
        if self.cv.n_folds < 2 {
            return Err(format!("cv.n_folds must be at least 2, got {}", self.cv.n_folds));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_root(&self) -> PathBuf {
        self.resolve(&self.data_root)
    }

    pub fn clinical_csv(&self) -> PathBuf {
        match &self.clinical_csv {
            Some(p) => self.resolve(p),
            None => self.data_root().join("survival_data.csv"),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Path of one subject's volume, `suffix` being a modality or the mask suffix.
    pub fn subject_file(&self, subject: &str, suffix: &str) -> PathBuf {
        self.data_root()
            .join(subject)
            .join(format!("{subject}_{suffix}.{}", self.volume_extension))
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ForestParams, KnnParams};

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_tables() {
        let cfg = RunConfig::from_toml(
            "data_root = \"d\"\nmodalities = [\"flair\", \"t1ce\"]\n\
             [features]\ngray_levels = 8\nglcm_offsets = [[1, 0], [0, 1]]\n\
             [model]\nkind = \"knn\"\nk = 5\n[cv]\nn_folds = 5\nmode = \"subject-grouped\"\n",
        )
        .unwrap();
        assert_eq!(cfg.modalities, vec![Modality::Flair, Modality::T1ce]);
        assert_eq!(cfg.features.gray_levels, 8);
        assert_eq!(cfg.features.glcm_offsets, vec![(1, 0), (0, 1)]);
        assert_eq!(cfg.model, ModelSpec::Knn(KnnParams { k: 5, ..KnnParams::default() }));
        assert_eq!(cfg.cv.mode, FoldMode::SubjectGrouped);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "bogus = 1",
            "[thresholds]\nmid_days = 900\nlong_days = 600",
            "[model]\nkind = \"rf\"\nn_trees = 0",
            "[cv]\nn_folds = 1",
            "modalities = []",
            "modalities = [\"t1\", \"t1\"]",
            "volume_extension = \"mha\"",
            "[features]\ngray_levels = 1",
        ] {
            assert!(RunConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut cfg = RunConfig::from_toml("data_root = \"data\"").unwrap();
        cfg.base_dir = PathBuf::from("/cfg");
        assert_eq!(cfg.clinical_csv(), PathBuf::from("/cfg/data/survival_data.csv"));
        assert_eq!(cfg.subject_file("S1", "seg"), PathBuf::from("/cfg/data/S1/S1_seg.nii.gz"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.model = ModelSpec::Rf(ForestParams { seed: 1, ..ForestParams::default() });
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }
}
