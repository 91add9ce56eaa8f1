//! Per-slice radiomic vector: 10 first-order, 11 shape, 14 Haralick and
//! 55 LBP values, in that order, optionally followed by Fourier descriptors.
//!
//! When several modalities are configured their ROIs are pooled: first-order
//! statistics run over the concatenated normalized pixels, GLCM counts and
//! LBP code counts are summed before normalization. Each modality is
//! quantized over its own ROI range. Shape depends only on the mask.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::firstorder::{first_order_pixels, FirstOrderError, FirstOrderFeatures};
use crate::roi::{NormalizationScope, SliceRoi, DEFAULT_MIN_ROI_PIXELS};
use crate::shape::{
    fourier_descriptor, largest_component, shape_features_with_cap, trace_boundary, ShapeError,
    ShapeFeatures, DEFAULT_ELONGATION_CAP, DEFAULT_FOURIER_TERMS,
};
use crate::texture::{
    haralick, lbp_code_counts, quantize, GlcmAccumulator, HaralickFeatures, LbpHistogram,
    TextureError, DEFAULT_GRAY_LEVELS, DEFAULT_LBP_BINS, DEFAULT_OFFSETS,
};
use crate::volume::Slice2D;

pub const AGE_FEATURE: &str = "age";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("no modality ROI supplied")]
    NoInput,
    #[error("modality ROIs do not share one mask")]
    MaskMismatch,
    #[error(transparent)]
    FirstOrder(#[from] FirstOrderError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Texture(#[from] TextureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub gray_levels: usize,
    pub glcm_offsets: Vec<(isize, isize)>,
    pub lbp_bins: usize,
    pub min_roi_pixels: usize,
    pub normalization: NormalizationScope,
    /// Append Fourier descriptor magnitudes after the LBP block.
    pub fourier: bool,
    pub fourier_terms: usize,
    pub elongation_cap: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            gray_levels: DEFAULT_GRAY_LEVELS,
            glcm_offsets: DEFAULT_OFFSETS.to_vec(),
            lbp_bins: DEFAULT_LBP_BINS,
            min_roi_pixels: DEFAULT_MIN_ROI_PIXELS,
            normalization: NormalizationScope::Slice,
            fourier: false,
            fourier_terms: DEFAULT_FOURIER_TERMS,
            elongation_cap: DEFAULT_ELONGATION_CAP,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.gray_levels < 2 || self.gray_levels > u16::MAX as usize {
            return Err(format!("gray_levels must be in 2..=65535, got {}", self.gray_levels));
        }
        if self.glcm_offsets.is_empty() || self.glcm_offsets.contains(&(0, 0)) {
            return Err("glcm_offsets must be non-empty and exclude (0, 0)".into());
        }
        if !(1..=256).contains(&self.lbp_bins) {
            return Err(format!("lbp_bins must be in 1..=256, got {}", self.lbp_bins));
        }
        if self.fourier && self.fourier_terms == 0 {
            return Err("fourier_terms must be positive".into());
        }
        if !(self.elongation_cap > 0.0) {
            return Err("elongation_cap must be positive".into());
        }
        Ok(())
    }

    /// Radiomic feature count, excluding age.
    pub fn radiomic_len(&self) -> usize {
        10 + 11 + 14 + self.lbp_bins + if self.fourier { self.fourier_terms } else { 0 }
    }
}

/// Column names of the radiomic vector (without age).
pub fn feature_names(cfg: &FeatureConfig) -> Vec<String> {
    let mut names = Vec::with_capacity(cfg.radiomic_len());
    names.extend(FirstOrderFeatures::NAMES.iter().map(|n| format!("fo_{n}")));
    names.extend(ShapeFeatures::NAMES.iter().map(|n| format!("shape_{n}")));
    names.extend(HaralickFeatures::NAMES.iter().map(|n| format!("glcm_{n}")));
    names.extend((0..cfg.lbp_bins).map(|i| format!("lbp_{i:02}")));
    if cfg.fourier {
        names.extend((1..=cfg.fourier_terms).map(|i| format!("fd_{i:02}")));
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Haralick,
    FirstOrder,
    Shape,
    Lbp,
    Clinical,
}

impl FeatureGroup {
    pub fn of(name: &str) -> Option<FeatureGroup> {
        if name == AGE_FEATURE {
            return Some(FeatureGroup::Clinical);
        }
        let prefix = name.split('_').next()?;
        Some(match prefix {
            "fo" => FeatureGroup::FirstOrder,
            "shape" | "fd" => FeatureGroup::Shape,
            "glcm" => FeatureGroup::Haralick,
            "lbp" => FeatureGroup::Lbp,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Haralick => "haralick",
            FeatureGroup::FirstOrder => "firstorder",
            FeatureGroup::Shape => "shape",
            FeatureGroup::Lbp => "lbp",
            FeatureGroup::Clinical => "clinical",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One modality's contribution to a slice: its normalized slice and ROI.
#[derive(Debug, Clone, Copy)]
pub struct ModalityInput<'a> {
    pub slice: &'a Slice2D,
    pub roi: &'a SliceRoi,
}

/// Radiomic vector of one axial slice, pooled over the given modalities.
pub fn slice_features(
    inputs: &[ModalityInput<'_>],
    cfg: &FeatureConfig,
) -> Result<Vec<f64>, FeatureError> {
    let first = inputs.first().ok_or(FeatureError::NoInput)?;
    let mask = &first.roi.mask2d;
    if inputs.iter().any(|m| &m.roi.mask2d != mask) {
        return Err(FeatureError::MaskMismatch);
    }

    let pooled: Vec<f64> = inputs
        .iter()
        .flat_map(|m| m.roi.pixels.iter().copied())
        .collect();
    let fo = first_order_pixels(&pooled)?;

    let shape = shape_features_with_cap(mask, cfg.elongation_cap)?;

    let mut acc = GlcmAccumulator::new(cfg.gray_levels);
    let mut lbp = [0u64; 256];
    for m in inputs {
        acc.add(&quantize(m.roi, cfg.gray_levels), mask, &cfg.glcm_offsets)?;
        for (total, c) in lbp.iter_mut().zip(lbp_code_counts(m.slice, mask)) {
            *total += c;
        }
    }
    let har = haralick(&acc.finish()?);
    let lbp = LbpHistogram::from_counts(&lbp, cfg.lbp_bins)?;

    let mut out = Vec::with_capacity(cfg.radiomic_len());
    out.extend(fo.to_array());
    out.extend(shape.to_array());
    out.extend(har.to_array());
    out.extend(lbp.bins);
    if cfg.fourier {
        let contour = trace_boundary(&largest_component(mask)?)?;
        out.extend(fourier_descriptor(&contour, cfg.fourier_terms)?.magnitudes);
    }
    Ok(out)
}
