//! Gray-level quantization, co-occurrence matrices, Haralick statistics and
//! local binary pattern histograms.
//!
//! The Haralick set holds fourteen values in a fixed order (see
//! [`HaralickFeatures::NAMES`]). Two of them are numerically redundant by
//! construction: `homogeneity` is computed as the sum of squared
//! probabilities and therefore equals `energy`, and `inertia` equals
//! `contrast`. `variance` uses the squared deviation `(i - mu)^2`.

use thiserror::Error;

use crate::roi::{Mask2D, SliceRoi};
use crate::volume::Slice2D;

pub const DEFAULT_GRAY_LEVELS: usize = 32;
pub const DEFAULT_LBP_BINS: usize = 55;

/// Distance-1 offsets at 0, 45, 90 and 135 degrees (`y` grows downwards).
pub const DEFAULT_OFFSETS: [(isize, isize); 4] = [(1, 0), (1, -1), (0, -1), (-1, -1)];

const FLAT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextureError {
    #[error("no pixel pair inside the ROI for any offset")]
    NoValidPairs,
    #[error("no ROI pixel has a full 8-neighborhood inside the image")]
    NoInteriorPixels,
    #[error("GLCM accumulators disagree on gray levels ({0} vs {1})")]
    LevelMismatch(usize, usize),
    #[error("at least one offset is required")]
    NoOffsets,
}

/// ROI intensities binned to integer gray levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedRoi {
    pub levels: usize,
    /// One code per ROI pixel, in scan order.
    pub codes: Vec<u16>,
}

/// Linear min-max binning over the values' own range.
pub fn quantize_values(values: &[f64], levels: usize) -> QuantizedRoi {
    assert!(levels >= 2, "need at least two gray levels");
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    let codes = values
        .iter()
        .map(|&v| {
            if range > 0.0 {
                let c = (levels as f64 * (v - min) / range).floor() as usize;
                c.min(levels - 1) as u16
            } else {
                0
            }
        })
        .collect();
    QuantizedRoi { levels, codes }
}

pub fn quantize(roi: &SliceRoi, levels: usize) -> QuantizedRoi {
    quantize_values(&roi.pixels, levels)
}

/// Symmetric co-occurrence counts, accumulated over offsets and (optionally) images.
#[derive(Debug, Clone, PartialEq)]
pub struct GlcmAccumulator {
    levels: usize,
    counts: Vec<u64>,
}

impl GlcmAccumulator {
    pub fn new(levels: usize) -> Self {
        GlcmAccumulator {
            levels,
            counts: vec![0; levels * levels],
        }
    }

    /// Add every pair `(p, p + offset)` with both pixels in `mask`, and its mirror.
    ///
    /// `q.codes` must be in the scan order of `mask`'s foreground.
    pub fn add(
        &mut self,
        q: &QuantizedRoi,
        mask: &Mask2D,
        offsets: &[(isize, isize)],
    ) -> Result<(), TextureError> {
        if q.levels != self.levels {
            return Err(TextureError::LevelMismatch(self.levels, q.levels));
        }
        if offsets.is_empty() {
            return Err(TextureError::NoOffsets);
        }
        let (w, h) = (mask.width(), mask.height());
        // code grid with u16::MAX marking background
        let mut grid = vec![u16::MAX; w * h];
        let mut codes = q.codes.iter();
        for (x, y) in mask.points() {
            grid[y * w + x] = *codes.next().expect("one code per mask pixel");
        }
        assert!(codes.next().is_none(), "more codes than mask pixels");

        let g = self.levels;
        for &(dx, dy) in offsets {
            for (x, y) in mask.points() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let b = grid[ny as usize * w + nx as usize];
                if b == u16::MAX {
                    continue;
                }
                let a = grid[y * w + x] as usize;
                let b = b as usize;
                self.counts[a * g + b] += 1;
                self.counts[b * g + a] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &GlcmAccumulator) -> Result<(), TextureError> {
        if other.levels != self.levels {
            return Err(TextureError::LevelMismatch(self.levels, other.levels));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn finish(&self) -> Result<Glcm, TextureError> {
        let total = self.total();
        if total == 0 {
            return Err(TextureError::NoValidPairs);
        }
        let p = self
            .counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect();
        Ok(Glcm::from_probabilities(self.levels, p))
    }
}

/// Normalized co-occurrence matrix with its marginal statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    /// Row-major `levels x levels` probabilities.
    pub p: Vec<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub mean_x: f64,
    pub mean_y: f64,
    pub std_x: f64,
    pub std_y: f64,
}

impl Glcm {
    pub fn from_probabilities(levels: usize, p: Vec<f64>) -> Self {
        assert_eq!(p.len(), levels * levels);
        let mut px = vec![0.0; levels];
        let mut py = vec![0.0; levels];
        for i in 0..levels {
            for j in 0..levels {
                px[i] += p[i * levels + j];
                py[j] += p[i * levels + j];
            }
        }
        let moments = |m: &[f64]| {
            let mean: f64 = m.iter().enumerate().map(|(i, v)| i as f64 * v).sum();
            let var: f64 = m
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64 - mean).powi(2) * v)
                .sum();
            (mean, var.max(0.0).sqrt())
        };
        let (mean_x, std_x) = moments(&px);
        let (mean_y, std_y) = moments(&py);
        Glcm {
            levels,
            p,
            px,
            py,
            mean_x,
            mean_y,
            std_x,
            std_y,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

/// Single-image co-occurrence matrix.
pub fn glcm(q: &QuantizedRoi, mask: &Mask2D, offsets: &[(isize, isize)]) -> Result<Glcm, TextureError> {
    let mut acc = GlcmAccumulator::new(q.levels);
    acc.add(q, mask, offsets)?;
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaralickFeatures {
    pub variance: f64,
    pub std_dev_x: f64,
    pub std_dev_y: f64,
    pub homogeneity: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub inverse_difference_moment: f64,
    pub entropy: f64,
    pub sum_average: f64,
    pub difference_entropy: f64,
    pub sum_entropy: f64,
    pub inertia: f64,
    pub energy: f64,
    pub max_probability: f64,
}

impl HaralickFeatures {
    pub const NAMES: [&'static str; 14] = [
        "variance",
        "std_dev_x",
        "std_dev_y",
        "homogeneity",
        "contrast",
        "correlation",
        "inverse_difference_moment",
        "entropy",
        "sum_average",
        "difference_entropy",
        "sum_entropy",
        "inertia",
        "energy",
        "max_probability",
    ];

    pub fn to_array(&self) -> [f64; 14] {
        [
            self.variance,
            self.std_dev_x,
            self.std_dev_y,
            self.homogeneity,
            self.contrast,
            self.correlation,
            self.inverse_difference_moment,
            self.entropy,
            self.sum_average,
            self.difference_entropy,
            self.sum_entropy,
            self.inertia,
            self.energy,
            self.max_probability,
        ]
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

pub fn haralick(g: &Glcm) -> HaralickFeatures {
    let n = g.levels;
    let mut sum_marg = vec![0.0; 2 * n - 1];
    let mut diff_marg = vec![0.0; n];
    let (mut variance, mut asm, mut contrast, mut idm, mut entropy, mut joint, mut max_p) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let p = g.at(i, j);
            if p == 0.0 {
                continue;
            }
            let d = i.abs_diff(j);
            sum_marg[i + j] += p;
            diff_marg[d] += p;
            variance += (i as f64 - g.mean_x).powi(2) * p;
            asm += p * p;
            let d2 = (d * d) as f64;
            contrast += d2 * p;
            idm += p / (1.0 + d2);
            entropy -= plogp(p);
            joint += (i * j) as f64 * p;
            max_p = max_p.max(p);
        }
    }
    let sigma = g.std_x * g.std_y;
    let correlation = if sigma < FLAT {
        0.0
    } else {
        ((joint - g.mean_x * g.mean_y) / sigma).clamp(-1.0, 1.0)
    };
    let sum_average = sum_marg.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let sum_entropy = -sum_marg.iter().map(|&p| plogp(p)).sum::<f64>();
    let difference_entropy = -diff_marg.iter().map(|&p| plogp(p)).sum::<f64>();
    HaralickFeatures {
        variance,
        std_dev_x: g.std_x,
        std_dev_y: g.std_y,
        homogeneity: asm,
        contrast,
        correlation,
        inverse_difference_moment: idm,
        entropy: entropy.max(0.0),
        sum_average,
        difference_entropy: difference_entropy.max(0.0),
        sum_entropy: sum_entropy.max(0.0),
        inertia: contrast,
        energy: asm,
        max_probability: max_p,
    }
}

// Neighbors from top-left, clockwise. Neighbor k contributes bit 7 - k.
const LBP_NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// 8-bit LBP code of the pixel at `(x, y)`; the caller guarantees an interior pixel.
pub fn lbp_code(s: &Slice2D, x: usize, y: usize) -> u8 {
    let c = s.get(x, y);
    let mut code = 0u8;
    for (k, (dx, dy)) in LBP_NEIGHBORS.iter().enumerate() {
        let v = s.get((x as isize + dx) as usize, (y as isize + dy) as usize);
        if v >= c {
            code |= 1 << (7 - k);
        }
    }
    code
}

/// Counts of all 256 LBP codes over ROI pixels that are not on the image border.
pub fn lbp_code_counts(s: &Slice2D, mask: &Mask2D) -> [u64; 256] {
    assert_eq!((s.width, s.height), (mask.width(), mask.height()));
    let mut counts = [0u64; 256];
    for (x, y) in mask.points() {
        if x == 0 || y == 0 || x + 1 >= s.width || y + 1 >= s.height {
            continue;
        }
        counts[lbp_code(s, x, y) as usize] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbpHistogram {
    pub bins: Vec<f64>,
}

impl LbpHistogram {
    /// Pool 256 code counts into `bins` equal-width bins and normalize.
    pub fn from_counts(counts: &[u64; 256], bins: usize) -> Result<Self, TextureError> {
        assert!((1..=256).contains(&bins), "bins must be in 1..=256");
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(TextureError::NoInteriorPixels);
        }
        let mut pooled = vec![0u64; bins];
        for (code, &c) in counts.iter().enumerate() {
            pooled[code * bins / 256] += c;
        }
        Ok(LbpHistogram {
            bins: pooled.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }
}

pub fn lbp_histogram(s: &Slice2D, mask: &Mask2D, bins: usize) -> Result<LbpHistogram, TextureError> {
    LbpHistogram::from_counts(&lbp_code_counts(s, mask), bins)
}
