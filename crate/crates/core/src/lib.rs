//! Radiomic feature extraction and survival-class prediction for
//! multi-modal brain MR with tumor segmentations.
//!
//! The crate follows the pipeline order: [`volume`] loads MR volumes and
//! masks, [`roi`] normalizes slices and cuts out the tumor, [`firstorder`],
//! [`shape`] and [`texture`] compute per-slice radiomics which [`features`]
//! assembles into one vector, [`dataset`] attaches clinical labels,
//! [`classifiers`] fits the five models and [`eval`] cross-validates them.

pub mod firstorder;
pub mod roi;
pub mod shape;
pub mod texture;
pub mod volume;
pub mod classifiers;
pub mod dataset;
pub mod features;
pub mod eval;
pub mod config;
pub mod phantom;
pub mod pipeline;
