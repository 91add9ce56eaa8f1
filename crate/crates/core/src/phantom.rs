//! Synthetic multi-modal subjects with class-dependent tumors.
//!
//! Each phantom is a noisy background volume with one ellipsoidal tumor.
//! Tumor size, elongation, contrast and texture depend on the survival
//! class, so the extracted features carry signal. Files follow the layout
//! the extractor expects: `<dir>/<id>/<id>_<suffix>.nii.gz` plus a clinical
//! CSV and a ready-to-use `config.toml`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::SurvivalClass;
use crate::volume::{write_nifti, DataType, Dims, Modality, Spacing, VolumeError};

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub n_subjects: usize,
    pub dims: Dims,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            n_subjects: 4,
            dims: Dims::new(48, 48, 24),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSubject {
    pub subject_id: String,
    pub class: SurvivalClass,
    pub age: f64,
    pub survival_days: u32,
}

const BASE_INTENSITY: [f64; 4] = [100.0, 120.0, 90.0, 110.0];

pub fn subject_id(i: usize) -> String {
    format!("PHANTOM_{:03}", i + 1)
}

/// Write `spec.n_subjects` phantoms under `dir`. Subject `i` gets class `i % 3`.
pub fn generate(dir: &Path, spec: &PhantomSpec) -> Result<Vec<PhantomSubject>, VolumeError> {
    let io = |path: PathBuf| move |source| VolumeError::Io { path, source };
    std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let mut subjects = Vec::with_capacity(spec.n_subjects);
    for i in 0..spec.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let class = SurvivalClass::ALL[i % 3];
        let id = subject_id(i);
        let sdir = dir.join(&id);
        std::fs::create_dir_all(&sdir).map_err(io(sdir.clone()))?;
        let (labels, images) = render(spec.dims, class, &mut rng);
        let spacing = Spacing::default();
        let labels_f: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        write_nifti(sdir.join(format!("{id}_seg.nii.gz")), spec.dims, spacing, &labels_f, DataType::U8)?;
        for (m, img) in Modality::ALL.iter().zip(&images) {
            let path = sdir.join(format!("{id}_{}.nii.gz", m.suffix()));
            write_nifti(path, spec.dims, spacing, img, DataType::F32)?;
        }
        let c = class.index() as f64;
        subjects.push(PhantomSubject {
            subject_id: id,
            class,
            age: ((45.0 + 8.0 * (2.0 - c) + rng.random_range(-4.0..4.0)) * 10.0).round() / 10.0,
            survival_days: [300, 900, 1600][class.index()] + rng.random_range(0..200),
        });
    }

    let mut csv = String::from("BraTS19ID,Age,Survival,ResectionStatus\n");
    for s in &subjects {
        let _ = writeln!(csv, "{},{},{},GTR", s.subject_id, s.age, s.survival_days);
    }
    let csv_path = dir.join("survival_data.csv");
    std::fs::write(&csv_path, csv).map_err(io(csv_path.clone()))?;

    let config = "# phantom cohort; paths are relative to this file\n\
                  data_root = \".\"\n\
                  clinical_csv = \"survival_data.csv\"\n\
                  output_dir = \"out\"\n\
                  seed = 42\n\n\
                  [model]\nkind = \"rf\"\nn_trees = 30\nseed = 42\n\n\
                  [cv]\nn_folds = 10\nmode = \"slice-level\"\n";
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, config).map_err(io(cfg_path.clone()))?;
    Ok(subjects)
}

/// Mask labels and the four modality images of one phantom.
fn render(dims: Dims, class: SurvivalClass, rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<Vec<f64>>) {
    let c = class.index() as f64;
    let cx = dims.nx as f64 / 2.0 + rng.random_range(-2.0..2.0);
    let cy = dims.ny as f64 / 2.0 + rng.random_range(-2.0..2.0);
    let cz = dims.nz as f64 / 2.0;
    let scale = dims.nx.min(dims.ny) as f64 / 48.0;
    // worse prognosis: larger, more elongated, brighter and coarser tumors
    let rx = (14.0 - 2.5 * c + rng.random_range(-1.0..1.0)) * scale;
    let ry = rx * (0.6 + 0.15 * c);
    let rz = (dims.nz as f64 * 0.35).max(2.0);
    let contrast = 45.0 - 15.0 * c;
    let period = 3.0 + 2.0 * c;
    let noise = Normal::new(0.0, 6.0 + 3.0 * (2.0 - c)).unwrap();
    let background = Normal::new(0.0, 5.0).unwrap();

    let n = dims.len();
    let mut labels = vec![0u8; n];
    let mut images = vec![vec![0.0; n]; 4];
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                let i = x + dims.nx * (y + dims.ny * z);
                let (dx, dy, dz) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry, (z as f64 - cz) / rz);
                let r2 = dx * dx + dy * dy + dz * dz;
                let inside = r2 <= 1.0;
                if inside {
                    labels[i] = if r2 < 0.2 {
                        1
                    } else if r2 < 0.6 {
                        4
                    } else {
                        2
                    };
                }
                let pattern = ((x as f64) * std::f64::consts::TAU / period).sin()
                    * ((y as f64) * std::f64::consts::TAU / period).cos();
                for (m, img) in images.iter_mut().enumerate() {
                    let mut v = BASE_INTENSITY[m] + background.sample(rng);
                    if inside {
                        let gain = 1.0 - 0.2 * m as f64;
                        v += gain * contrast * (1.0 - 0.5 * r2) + 12.0 * pattern + noise.sample(rng);
                    }
                    img[i] = v;
                }
            }
        }
    }
    (labels, images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{load_mask, load_volume};

    #[test]
    fn files_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let spec = PhantomSpec {
            n_subjects: 3,
            dims: Dims::new(32, 32, 12),
            seed: 1,
        };
        let subjects = generate(dir.path(), &spec).unwrap();
        assert_eq!(subjects.len(), 3);
        assert_eq!(subjects[2].class, SurvivalClass::Long);
        let id = &subjects[0].subject_id;
        let mask = load_mask(dir.path().join(id).join(format!("{id}_seg.nii.gz"))).unwrap();
        assert_eq!(mask.dims(), spec.dims);
        assert!(mask.tumor_count(6) > 50);
        assert_eq!(mask.tumor_count(0), 0);
        let v = load_volume(dir.path().join(id).join(format!("{id}_flair.nii.gz")), Modality::Flair).unwrap();
        assert_eq!(v.dims(), spec.dims);
        let text = std::fs::read_to_string(dir.path().join("survival_data.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(dir.path().join("config.toml").exists());
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = PhantomSpec {
            n_subjects: 2,
            dims: Dims::new(20, 20, 6),
            seed: 3,
        };
        generate(a.path(), &spec).unwrap();
        generate(b.path(), &spec).unwrap();
        let f = format!("{0}/{0}_t2.nii.gz", subject_id(1));
        assert_eq!(std::fs::read(a.path().join(&f)).unwrap(), std::fs::read(b.path().join(&f)).unwrap());
    }
}
