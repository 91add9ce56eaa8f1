//! First-order intensity statistics of a tumor ROI.

use thiserror::Error;

use crate::roi::SliceRoi;

/// Histogram resolution for the entropy feature.
pub const ENTROPY_BINS: usize = 32;

const FLAT_STD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FirstOrderError {
    #[error("ROI holds no pixels")]
    EmptyRoi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderFeatures {
    pub mean: f64,
    pub median: f64,
    /// Population (1/N) variance.
    pub variance: f64,
    pub std_dev: f64,
    pub skewness: f64,
    /// Pearson (non-excess) kurtosis.
    pub kurtosis: f64,
    /// Shannon entropy in bits of a 32-bin histogram over [min, max].
    pub entropy: f64,
    /// Sum of squared intensities.
    pub energy: f64,
    pub minimum: f64,
    pub maximum: f64,
}

impl FirstOrderFeatures {
    pub const NAMES: [&'static str; 10] = [
        "mean", "median", "variance", "std_dev", "skewness", "kurtosis", "entropy", "energy",
        "minimum", "maximum",
    ];

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.mean,
            self.median,
            self.variance,
            self.std_dev,
            self.skewness,
            self.kurtosis,
            self.entropy,
            self.energy,
            self.minimum,
            self.maximum,
        ]
    }
}

/// Running central moments up to order four (Terriberry's update).
#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }
}

/// Shannon entropy (bits) of `values` binned into `bins` equal-width bins over their range.
pub fn histogram_entropy(values: &[f64], bins: usize, min: f64, max: f64) -> f64 {
    let range = max - min;
    if values.is_empty() || range <= 0.0 {
        return 0.0;
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((bins as f64) * (v - min) / range).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = values.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Compute the ten first-order features over arbitrary intensities.
pub fn first_order_pixels(pixels: &[f64]) -> Result<FirstOrderFeatures, FirstOrderError> {
    if pixels.is_empty() {
        return Err(FirstOrderError::EmptyRoi);
    }
    let mut m = Moments::default();
    let mut energy = 0.0;
    for &x in pixels {
        m.push(x);
        energy += x * x;
    }
    let mut sorted = pixels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let (minimum, maximum) = (sorted[0], sorted[n - 1]);

    let variance = (m.m2 / m.n).max(0.0);
    let std_dev = variance.sqrt();
    let (skewness, kurtosis) = if std_dev < FLAT_STD {
        (0.0, 0.0)
    } else {
        (
            (m.m3 / m.n) / (variance * std_dev),
            (m.m4 / m.n) / (variance * variance),
        )
    };
    Ok(FirstOrderFeatures {
        mean: m.mean,
        median,
        variance,
        std_dev,
        skewness,
        kurtosis,
        entropy: histogram_entropy(pixels, ENTROPY_BINS, minimum, maximum),
        energy,
        minimum,
        maximum,
    })
}

pub fn first_order(roi: &SliceRoi) -> Result<FirstOrderFeatures, FirstOrderError> {
    first_order_pixels(&roi.pixels)
}
