//! 2-D shape features and Fourier contour descriptors of a binary ROI mask.
//!
//! Geometry is measured on pixel centers: a pixel at column `x`, row `y`
//! is the point `(x, y)` with `y` growing downwards. Consequently the convex
//! hull of a full `n x n` square spans `(n-1) x (n-1)`, and its `convex_area`
//! is smaller than the pixel-count `area`. `concavity` is clamped to `[0, 1]`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use thiserror::Error;

use crate::roi::Mask2D;

/// Elongation reported when the minor axis collapses (collinear pixels).
pub const DEFAULT_ELONGATION_CAP: f64 = 1e6;

/// Default number of Fourier descriptor magnitudes.
pub const DEFAULT_FOURIER_TERMS: usize = 10;

const DEGENERATE_AXIS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShapeError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("contour has {len} points, need at least {needed}")]
    ContourTooShort { len: usize, needed: usize },
    #[error("contour has no first harmonic to normalize by")]
    DegenerateContour,
}

// Moore neighborhood, clockwise on screen starting at west.
const DIRS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

/// Keep only the largest 8-connected component.
///
/// Ties go to the component whose first pixel comes first in scan order.
pub fn largest_component(mask: &Mask2D) -> Result<Mask2D, ShapeError> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut best: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.cells()[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    if best.is_empty() {
        return Err(ShapeError::EmptyMask);
    }
    let mut out = Mask2D::empty(w, h);
    for i in best {
        out.set(i % w, i / w, true);
    }
    Ok(out)
}

/// Closed boundary of one region, as pixel coordinates in clockwise (screen) order.
///
/// The first point is not repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<(isize, isize)>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The region was one isolated pixel.
    pub fn is_single_pixel(&self) -> bool {
        self.points.len() == 1
    }

    /// Closed length with unit axial and `sqrt(2)` diagonal steps.
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                if a.0 != b.0 && a.1 != b.1 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                }
            })
            .sum()
    }

    pub fn translated(&self, dx: isize, dy: isize) -> Contour {
        Contour {
            points: self.points.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
        }
    }
}

/// Moore-neighborhood boundary trace of the region containing the first
/// foreground pixel in scan order (topmost, then leftmost).
///
/// Tracing stops when the start pixel is about to be left by the same move
/// that began the trace.
pub fn trace_boundary(mask: &Mask2D) -> Result<Contour, ShapeError> {
    let start = mask.points().next().ok_or(ShapeError::EmptyMask)?;
    let start = (start.0 as isize, start.1 as isize);

    let next_move = |p: (isize, isize), from: usize| -> Option<usize> {
        (0..8)
            .map(|k| (from + k) % 8)
            .find(|&d| mask.get_signed(p.0 + DIRS[d].0, p.1 + DIRS[d].1))
    };

    let mut points = vec![start];
    let Some(first) = next_move(start, 0) else {
        return Ok(Contour { points });
    };
    let limit = 4 * mask.count() + 8;
    let (mut cur, mut d) = (start, first);
    loop {
        cur = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
        // Resume the clockwise sweep just past the background cell we came from.
        let from = (d + 6) % 8;
        d = next_move(cur, from).expect("a traced pixel always has its predecessor as neighbor");
        if cur == start && d == first {
            break;
        }
        points.push(cur);
        if points.len() > limit {
            // Unreachable for a valid Moore trace; guards against an endless loop.
            break;
        }
    }
    Ok(Contour { points })
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Returns hull vertices counter-clockwise in
/// (x, y) coordinates with collinear points removed.
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Absolute shoelace area of a closed polygon.
pub fn polygon_area(poly: &[(i64, i64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: i64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() as f64 / 2.0
}

fn dist(a: (i64, i64), b: (i64, i64)) -> f64 {
    (((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64).sqrt()
}

/// Closed polygon perimeter (a two-point hull counts both directions).
pub fn polygon_perimeter(poly: &[(i64, i64)]) -> f64 {
    let n = poly.len();
    if n < 2 {
        return 0.0;
    }
    (0..n).map(|i| dist(poly[i], poly[(i + 1) % n])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatures {
    pub area: f64,
    pub perimeter: f64,
    pub convex_area: f64,
    pub convex_perimeter: f64,
    pub concavity: f64,
    /// Maximum Feret diameter between pixel centers.
    pub diameter: f64,
    pub major_axis: f64,
    pub minor_axis: f64,
    pub circularity: f64,
    pub elongation: f64,
    pub sphericity: f64,
    /// Minor axis collapsed; `elongation` holds the cap.
    pub degenerate: bool,
}

impl ShapeFeatures {
    pub const NAMES: [&'static str; 11] = [
        "area",
        "perimeter",
        "convex_area",
        "convex_perimeter",
        "concavity",
        "diameter",
        "major_axis",
        "minor_axis",
        "circularity",
        "elongation",
        "sphericity",
    ];

    pub fn to_array(&self) -> [f64; 11] {
        [
            self.area,
            self.perimeter,
            self.convex_area,
            self.convex_perimeter,
            self.concavity,
            self.diameter,
            self.major_axis,
            self.minor_axis,
            self.circularity,
            self.elongation,
            self.sphericity,
        ]
    }
}

/// Axes of the ellipse with the same second central moments as the pixel set.
fn moment_axes(points: &[(i64, i64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (cx, cy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    let (cx, cy) = (cx / n, cy / n);
    let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        mu20 += dx * dx;
        mu02 += dy * dy;
        mu11 += dx * dy;
    }
    let (mu20, mu02, mu11) = (mu20 / n, mu02 / n, mu11 / n);
    let half_trace = 0.5 * (mu20 + mu02);
    let root = (0.25 * (mu20 - mu02).powi(2) + mu11 * mu11).sqrt();
    let l1 = (half_trace + root).max(0.0);
    let l2 = (half_trace - root).max(0.0);
    (4.0 * l1.sqrt(), 4.0 * l2.sqrt())
}

/// Shape features of the largest 8-connected component of `mask`.
pub fn shape_features(mask: &Mask2D) -> Result<ShapeFeatures, ShapeError> {
    shape_features_with_cap(mask, DEFAULT_ELONGATION_CAP)
}

pub fn shape_features_with_cap(
    mask: &Mask2D,
    elongation_cap: f64,
) -> Result<ShapeFeatures, ShapeError> {
    let region = largest_component(mask)?;
    let contour = trace_boundary(&region)?;
    let pixels: Vec<(i64, i64)> = region.points().map(|(x, y)| (x as i64, y as i64)).collect();
    let boundary: Vec<(i64, i64)> = contour
        .points
        .iter()
        .map(|&(x, y)| (x as i64, y as i64))
        .collect();

    let area = pixels.len() as f64;
    let perimeter = contour.perimeter();
    let hull = convex_hull(&boundary);
    let convex_area = polygon_area(&hull);
    let convex_perimeter = polygon_perimeter(&hull);
    let concavity = if convex_area > 0.0 {
        ((convex_area - area) / convex_area).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut diameter: f64 = 0.0;
    for (i, &a) in hull.iter().enumerate() {
        for &b in &hull[i + 1..] {
            diameter = diameter.max(dist(a, b));
        }
    }
    let (major_axis, minor_axis) = moment_axes(&pixels);
    let degenerate = minor_axis < DEGENERATE_AXIS;
    let elongation = if degenerate {
        elongation_cap
    } else {
        major_axis / minor_axis
    };
    let (circularity, sphericity) = if perimeter > 0.0 {
        (
            4.0 * PI * area / (perimeter * perimeter),
            2.0 * (PI * area).sqrt() / perimeter,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(ShapeFeatures {
        area,
        perimeter,
        convex_area,
        convex_perimeter,
        concavity,
        diameter,
        major_axis,
        minor_axis,
        circularity,
        elongation,
        sphericity,
        degenerate,
    })
}

/// Normalized Fourier magnitudes of a closed contour.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierDescriptor {
    /// `|F_1| .. |F_K|`, each divided by `|F_1|`.
    pub magnitudes: Vec<f64>,
}

/// Fourier descriptor of a contour given as real coordinates.
pub fn fourier_descriptor_points(
    points: &[(f64, f64)],
    terms: usize,
) -> Result<FourierDescriptor, ShapeError> {
    let n = points.len();
    let needed = 2 * terms + 1;
    if n < needed {
        return Err(ShapeError::ContourTooShort { len: n, needed });
    }
    // Only frequencies 1..=terms are needed, so a direct sum is cheaper than an FFT.
    let coeff = |u: usize| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, &(x, y)) in points.iter().enumerate() {
            // reduce the phase index exactly before converting to an angle
            let phase = ((u * k) % n) as f64;
            let (s, c) = (-2.0 * PI * phase / n as f64).sin_cos();
            re += x * c - y * s;
            im += x * s + y * c;
        }
        re.hypot(im)
    };
    let mags: Vec<f64> = (1..=terms).map(coeff).collect();
    let first = mags[0];
    if !(first > 1e-12) {
        return Err(ShapeError::DegenerateContour);
    }
    Ok(FourierDescriptor {
        magnitudes: mags.into_iter().map(|m| m / first).collect(),
    })
}

/// Translation, scale, rotation and start-point invariant descriptor of `contour`.
pub fn fourier_descriptor(contour: &Contour, terms: usize) -> Result<FourierDescriptor, ShapeError> {
    // Coordinates relative to the first point: only the DC term changes, and
    // integer subtraction makes translated contours produce identical input.
    let (ox, oy) = contour.points.first().copied().unwrap_or((0, 0));
    let pts: Vec<(f64, f64)> = contour
        .points
        .iter()
        .map(|&(x, y)| ((x - ox) as f64, (y - oy) as f64))
        .collect();
    fourier_descriptor_points(&pts, terms)
}
