//! Intensity normalization and per-slice tumor ROI extraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{LabelSlice, Modality, Slice2D, Volume3D};

/// Population std below this marks a slice as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

pub const DEFAULT_MIN_ROI_PIXELS: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum RoiError {
    #[error("slice has (near-)zero intensity variance")]
    DegenerateSlice,
    #[error("slice is {slice:?} but mask is {mask:?}")]
    DimMismatch {
        slice: (usize, usize),
        mask: (usize, usize),
    },
}

/// Which pixels supply the z-score statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScope {
    /// Mean and std of each axial slice on its own.
    #[default]
    Slice,
    /// Mean and std of the whole volume, applied to every slice.
    Volume,
}

/// Binary grid, row-major, `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask2D {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Mask2D {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), width * height, "cell count must equal width*height");
        Mask2D {
            width,
            height,
            cells,
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask2D::new(width, height, vec![false; width * height])
    }

    /// Union of all nonzero labels (the complete tumor).
    pub fn from_labels(labels: &LabelSlice) -> Self {
        Mask2D::new(
            labels.width,
            labels.height,
            labels.labels.iter().map(|&l| l != 0).collect(),
        )
    }

    /// Parse an ASCII picture: `#` is foreground, anything else background.
    /// Rows must all have the same length.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(width * height);
        for r in rows {
            assert_eq!(r.len(), width, "ragged ascii mask");
            cells.extend(r.bytes().map(|b| b == b'#'));
        }
        Mask2D::new(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    /// Bounds-checked lookup on signed coordinates; outside is background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.cells[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.cells[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Foreground coordinates `(x, y)` in scan order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Rotate by 90 degrees clockwise (on screen).
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = Mask2D::empty(h, w);
        for (x, y) in self.points() {
            out.set(h - 1 - y, x, true);
        }
        out
    }
}

/// Masked tumor pixels of one modality on one axial slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRoi {
    /// Intensities where the mask is set, in scan order.
    pub pixels: Vec<f64>,
    pub mask2d: Mask2D,
    pub modality: Modality,
    pub subject_id: String,
    pub z_index: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardize a slice by its own mean and population standard deviation.
pub fn zscore_slice(s: &Slice2D) -> Result<Slice2D, RoiError> {
    if s.pixels.is_empty() {
        return Err(RoiError::DegenerateSlice);
    }
    let (mean, std) = mean_std(&s.pixels);
    if std < DEGENERATE_STD {
        return Err(RoiError::DegenerateSlice);
    }
    Ok(apply_zscore(s, mean, std))
}

fn apply_zscore(s: &Slice2D, mean: f64, std: f64) -> Slice2D {
    Slice2D {
        width: s.width,
        height: s.height,
        pixels: s.pixels.iter().map(|v| (v - mean) / std).collect(),
        z_index: s.z_index,
    }
}

/// Volume-wide z-score statistics, for [`NormalizationScope::Volume`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeStats {
    pub mean: f64,
    pub std: f64,
}

impl VolumeStats {
    pub fn of(vol: &Volume3D) -> Result<Self, RoiError> {
        let (mean, std) = mean_std(vol.data());
        if std < DEGENERATE_STD {
            return Err(RoiError::DegenerateSlice);
        }
        Ok(VolumeStats { mean, std })
    }

    pub fn apply(&self, s: &Slice2D) -> Slice2D {
        apply_zscore(s, self.mean, self.std)
    }
}

/// Apply the tumor mask to a (normalized) slice.
///
/// Returns `Ok(None)` when the slice holds fewer than `min_roi_pixels` tumor pixels.
pub fn extract_roi(
    s: &Slice2D,
    labels: &LabelSlice,
    subject: &str,
    modality: Modality,
    min_roi_pixels: usize,
) -> Result<Option<SliceRoi>, RoiError> {
    if (s.width, s.height) != (labels.width, labels.height) {
        return Err(RoiError::DimMismatch {
            slice: (s.width, s.height),
            mask: (labels.width, labels.height),
        });
    }
    let mask2d = Mask2D::from_labels(labels);
    let pixels: Vec<f64> = s
        .pixels
        .iter()
        .zip(mask2d.cells())
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if pixels.is_empty() || pixels.len() < min_roi_pixels {
        return Ok(None);
    }
    Ok(Some(SliceRoi {
        pixels,
        mask2d,
        modality,
        subject_id: subject.to_string(),
        z_index: s.z_index,
    }))
}
