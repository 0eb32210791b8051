//! Placement-structure segmentation: logistic-regression mask, contour
//! corner extraction with the top-pair selector, and the DBSCAN
//! self-supervised retraining loop.

use super::dbscan::dbscan_labels;
use super::hsv::rgb_to_hsv;
use super::logreg::{logreg_train, SegModel};
use super::rect::largest_component;
use crate::raster::{GrayImage, RasterImage};
use crate::sensing::PixelPoint;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("no structure component in mask")]
    NoStructure,
    #[error("fewer than two usable corners")]
    Degenerate,
    #[error("no cluster is majority-positive under the prior model")]
    RetrainFailed,
}

/// Per-pixel classification into a 0/255 mask.
pub fn segment_structure(img: &RasterImage, model: &SegModel) -> GrayImage {
    let mut mask = GrayImage::filled(img.width, img.height, 0);
    for v in 0..img.height {
        for u in 0..img.width {
            if model.classify(rgb_to_hsv(img.get(u, v))) {
                mask.set(u, v, 255);
            }
        }
    }
    mask
}

#[derive(Debug, Clone)]
pub struct CornerParams {
    /// Direction change along the contour counting as a corner, degrees.
    pub angle_threshold_deg: f64,
    /// Contour arm length for the angle estimate, pixels.
    pub arm: usize,
    /// Minimum horizontal separation of the returned pair, pixels.
    pub min_separation: f64,
    /// Fault injection: shift the returned pair by this pixel offset
    /// (the incorrect-desired-corners failure mode).
    pub corner_shift: (f64, f64),
}

impl Default for CornerParams {
    fn default() -> Self {
        CornerParams { angle_threshold_deg: 30.0, arm: 7, min_separation: 10.0, corner_shift: (0.0, 0.0) }
    }
}

/// Trace the outer boundary of the largest component (Moore neighborhood,
/// clockwise in image coordinates).
fn trace_contour(mask: &GrayImage) -> Vec<(i64, i64)> {
    let component = largest_component(mask);
    if component.is_empty() {
        return Vec::new();
    }
    let inside = |u: i64, v: i64| -> bool {
        u >= 0 && v >= 0 && (u as usize) < mask.width && (v as usize) < mask.height
            && mask.get(u as usize, v as usize) != 0
    };
    // start at the component's top-left-most pixel
    let start = *component.iter().min_by_key(|&&(u, v)| (v, u)).unwrap();
    if !inside(start.0, start.1) {
        return Vec::new();
    }
    // Moore-neighbor tracing
    const DIRS: [(i64, i64); 8] =
        [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let mut contour = vec![start];
    let mut current = start;
    let mut backtrack = 6usize; // came from above
    loop {
        let mut found = None;
        for step in 0..8 {
            let dir = (backtrack + 1 + step) % 8;
            let cand = (current.0 + DIRS[dir].0, current.1 + DIRS[dir].1);
            if inside(cand.0, cand.1) {
                found = Some((cand, dir));
                break;
            }
        }
        match found {
            None => break, // single-pixel component
            Some((next, dir)) => {
                if next == start && contour.len() > 1 {
                    break;
                }
                contour.push(next);
                current = next;
                backtrack = (dir + 4) % 8;
                if contour.len() > 4 * (mask.width + mask.height) * 2 {
                    break; // safety bound
                }
            }
        }
    }
    contour
}

/// Contour points where the local direction turns by more than the angle
/// threshold, non-max suppressed over the arm window.
pub fn contour_corners(mask: &GrayImage, params: &CornerParams) -> Vec<PixelPoint> {
    let contour = trace_contour(mask);
    let n = contour.len();
    if n < 3 * params.arm {
        return Vec::new();
    }
    let arm = params.arm as i64;
    let turn_angle = |i: usize| -> f64 {
        let p = contour[i];
        let prev = contour[((i as i64 - arm).rem_euclid(n as i64)) as usize];
        let next = contour[((i as i64 + arm) % n as i64) as usize];
        let a = ((p.0 - prev.0) as f64, (p.1 - prev.1) as f64);
        let b = ((next.0 - p.0) as f64, (next.1 - p.1) as f64);
        let dot = a.0 * b.0 + a.1 * b.1;
        let na = (a.0 * a.0 + a.1 * a.1).sqrt();
        let nb = (b.0 * b.0 + b.1 * b.1).sqrt();
        if na < 1e-9 || nb < 1e-9 {
            return 0.0;
        }
        (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
    };
    let angles: Vec<f64> = (0..n).map(turn_angle).collect();
    let mut corners = Vec::new();
    for i in 0..n {
        if angles[i] < params.angle_threshold_deg {
            continue;
        }
        // non-max suppression within one arm length
        let window_max = (1..=params.arm).fold(angles[i], |m, k| {
            let before = angles[((i as i64 - k as i64).rem_euclid(n as i64)) as usize];
            let after = angles[(i + k) % n];
            m.max(before).max(after)
        });
        if angles[i] >= window_max {
            corners.push(PixelPoint::new(contour[i].0 as f64, contour[i].1 as f64));
        }
    }
    corners
}

/// The two top-most (smallest v) corners horizontally separated by more
/// than `min_separation`, returned left-then-right.
pub fn extract_top_pair(
    mask: &GrayImage,
    params: &CornerParams,
) -> Result<(PixelPoint, PixelPoint), StructureError> {
    if largest_component(mask).is_empty() {
        return Err(StructureError::NoStructure);
    }
    let mut corners = contour_corners(mask, params);
    if corners.len() < 2 {
        return Err(StructureError::Degenerate);
    }
    corners.sort_by(|a, b| (a.v, a.u).partial_cmp(&(b.v, b.u)).unwrap());
    let first = corners[0];
    let second = corners[1..]
        .iter()
        .find(|c| (c.u - first.u).abs() > params.min_separation)
        .copied()
        .ok_or(StructureError::Degenerate)?;
    let (mut left, mut right) = if first.u <= second.u { (first, second) } else { (second, first) };
    left.u += params.corner_shift.0;
    left.v += params.corner_shift.1;
    right.u += params.corner_shift.0;
    right.v += params.corner_shift.1;
    Ok((left, right))
}

#[derive(Debug, Clone)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
    /// Pixel sampling stride for the clustering pass.
    pub stride: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams { eps: 0.08, min_pts: 8, stride: 3 }
    }
}

/// Self-supervised retraining: DBSCAN the sampled pixels, pick the
/// cluster the prior model most frequently classifies positive (must be
/// a majority), relabel, and retrain the logistic regression.
pub fn adaptive_retrain(
    img: &RasterImage,
    params: &DbscanParams,
    prior: &SegModel,
    seed: u64,
) -> Result<SegModel, StructureError> {
    let mut pixels = Vec::new();
    for v in (0..img.height).step_by(params.stride) {
        for u in (0..img.width).step_by(params.stride) {
            pixels.push(rgb_to_hsv(img.get(u, v)));
        }
    }
    let points: Vec<[f64; 3]> = pixels.iter().map(|p| super::hsv::cone_embedding(*p)).collect();
    let labels = dbscan_labels(&points, params.eps, params.min_pts);
    let cluster_count = labels.iter().cloned().max().unwrap_or(-1) + 1;
    if cluster_count < 1 {
        return Err(StructureError::RetrainFailed);
    }

    let mut best_cluster = None;
    let mut best_fraction = 0.5; // must be majority-positive
    for c in 0..cluster_count {
        let members: Vec<usize> =
            (0..pixels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let positive = members.iter().filter(|&&i| prior.classify(pixels[i])).count();
        let fraction = positive as f64 / members.len() as f64;
        if fraction > best_fraction {
            best_fraction = fraction;
            best_cluster = Some(c);
        }
    }
    let structure_cluster = best_cluster.ok_or(StructureError::RetrainFailed)?;

    let samples: Vec<(super::hsv::HsvPixel, bool)> = pixels
        .iter()
        .zip(&labels)
        .map(|(p, &l)| (*p, l == structure_cluster))
        .collect();
    logreg_train(&samples, 200, 0.8, seed).map_err(|_| StructureError::RetrainFailed)
}

/// Intersection-over-union of two masks (nonzero = foreground).
pub fn mask_iou(a: &GrayImage, b: &GrayImage) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height));
    let mut inter = 0usize;
    let mut union = 0usize;
    for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
        let fa = *pa != 0;
        let fb = *pb != 0;
        if fa && fb {
            inter += 1;
        }
        if fa || fb {
            union += 1;
        }
    }
    if union == 0 {
        return 1.0;
    }
    inter as f64 / union as f64
}
