//! Raster-image vision algorithms: HSV k-means patch segmentation,
//! rectangle fitting with sorted corners and the ratio check, logistic
//! regression structure segmentation with DBSCAN self-supervised
//! retraining, and NCC template tracking with forward-backward failure
//! detection.

mod dbscan;
mod hsv;
mod kmeans;
mod logreg;
mod rect;
mod structure;
mod track;

pub use dbscan::dbscan_labels;
pub use hsv::{cone_embedding, hsv_distance, hsv_to_rgb, hue_distance, rgb_to_hsv, HsvPixel};
pub use kmeans::{kmeans_segment, select_patch_cluster, KmeansError, KmeansResult, Roi};
pub use logreg::{cross_entropy, logreg_train, LogRegError, SegModel};
pub use rect::{fit_rectangle_corners, largest_component, ratio_check, sort_corners, RectError};
pub use structure::{
    adaptive_retrain, contour_corners, extract_top_pair, mask_iou, segment_structure,
    CornerParams, DbscanParams, StructureError,
};
pub use track::{fb_track, luma, Bbox, TrackError, TrackParams, TrackResult};

use crate::raster::{GrayImage, RasterImage, ThermalImage};
use crate::sensing::PixelPoint;
use thiserror::Error;

/// Connected hot region in a thermal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalBlob {
    pub centroid: PixelPoint,
    pub area: usize,
    /// (u_min, v_min, u_max, v_max)
    pub bbox: (f64, f64, f64, f64),
}

/// Threshold the thermal frame and return the connected components with
/// at least `min_area` pixels, largest first.
pub fn thermal_candidates(img: &ThermalImage, threshold: u16, min_area: usize) -> Vec<ThermalBlob> {
    let (w, h) = (img.width, img.height);
    let mut visited = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if visited[start] || img.values[start] < threshold {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut area = 0usize;
        let mut sum_u = 0.0;
        let mut sum_v = 0.0;
        let mut min_u = f64::INFINITY;
        let mut min_v = f64::INFINITY;
        let mut max_u = f64::NEG_INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        while let Some(idx) = stack.pop() {
            let (u, v) = ((idx % w) as f64, (idx / w) as f64);
            area += 1;
            sum_u += u;
            sum_v += v;
            min_u = min_u.min(u);
            min_v = min_v.min(v);
            max_u = max_u.max(u);
            max_v = max_v.max(v);
            let (iu, iv) = (idx % w, idx / w);
            let mut push = |uu: usize, vv: usize| {
                let j = vv * w + uu;
                if !visited[j] && img.values[j] >= threshold {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if iu > 0 {
                push(iu - 1, iv);
            }
            if iu + 1 < w {
                push(iu + 1, iv);
            }
            if iv > 0 {
                push(iu, iv - 1);
            }
            if iv + 1 < h {
                push(iu, iv + 1);
            }
        }
        if area >= min_area {
            blobs.push(ThermalBlob {
                centroid: PixelPoint::new(sum_u / area as f64, sum_v / area as f64),
                area,
                bbox: (min_u, min_v, max_u, max_v),
            });
        }
    }
    blobs.sort_by(|a, b| b.area.cmp(&a.area));
    blobs
}

#[derive(Debug, Error, PartialEq)]
pub enum PatchPipelineError {
    #[error(transparent)]
    Kmeans(#[from] KmeansError),
    #[error(transparent)]
    Rect(#[from] RectError),
    #[error("fitted rectangle failed the patch ratio check")]
    RatioCheckFailed,
}

#[derive(Debug, Clone)]
pub struct PatchPipelineParams {
    pub k: usize,
    pub calibrated_patch_color: HsvPixel,
    pub physical_ratio: f64,
    pub ratio_tolerance: f64,
    pub seed: u64,
}

impl Default for PatchPipelineParams {
    fn default() -> Self {
        PatchPipelineParams {
            k: 3,
            calibrated_patch_color: HsvPixel { h: 0.0, s: 0.03, v: 0.92 },
            physical_ratio: 1.5,
            ratio_tolerance: 0.25,
            seed: 0,
        }
    }
}

/// The block-pickup corner pipeline: k-means the detection ROI in HSV
/// space, take the cluster nearest the calibrated patch color, fit the
/// minimum-area rectangle to that cluster's mask, check the physical
/// ratio, and return the four sorted corners in full-image coordinates.
pub fn block_patch_corners(
    img: &RasterImage,
    roi: Roi,
    params: &PatchPipelineParams,
) -> Result<[PixelPoint; 4], PatchPipelineError> {
    let result = kmeans_segment(img, roi, params.k, params.seed)?;
    let patch_cluster = select_patch_cluster(&result.centers, params.calibrated_patch_color);
    let mut mask = GrayImage::filled(roi.width, roi.height, 0);
    for (i, &label) in result.labels.iter().enumerate() {
        if label == patch_cluster {
            mask.pixels[i] = 255;
        }
    }
    let corners = fit_rectangle_corners(&mask)?;
    if !ratio_check(&corners, params.physical_ratio, params.ratio_tolerance) {
        return Err(PatchPipelineError::RatioCheckFailed);
    }
    Ok(corners.map(|c| PixelPoint::new(c.u + roi.u0 as f64, c.v + roi.v0 as f64)))
}
