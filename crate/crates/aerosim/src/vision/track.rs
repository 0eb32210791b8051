//! Template tracking with forward-backward failure detection:
//! normalized cross-correlation search forward (prev -> next) and
//! backward (next -> prev); disagreement or a weak peak marks FAILED.
//! Callers re-seed the template from detection every 50 frames during
//! descent.

use crate::raster::{GrayImage, RasterImage};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("template does not fit inside the frame")]
    OutOfBounds,
}

#[derive(Debug, Clone)]
pub struct TrackParams {
    pub search_radius: usize,
    /// Forward-backward displacement disagreement tolerance, px.
    pub fb_tolerance: f64,
    /// Minimum acceptable NCC peak.
    pub min_correlation: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams { search_radius: 20, fb_tolerance: 3.0, min_correlation: 0.6 }
    }
}

/// Bounding box with sub-pixel origin: (u0, v0, width, height). The
/// origin is kept fractional so per-frame sub-pixel motion is not lost
/// across template updates; cropping rounds internally.
pub type Bbox = (f64, f64, usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub bbox: Bbox,
    pub failed: bool,
    pub correlation: f64,
    pub fb_error: f64,
}

pub fn luma(img: &RasterImage) -> GrayImage {
    let mut out = GrayImage::filled(img.width, img.height, 0);
    for v in 0..img.height {
        for u in 0..img.width {
            let [r, g, b] = img.get(u, v);
            let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            out.set(u, v, y.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Best NCC match of the template at integer (u0, v0) in `target` within
/// the search radius. Returns (du, dv, correlation) with the
/// displacement refined to sub-pixel accuracy by a parabolic fit around
/// the integer peak.
fn ncc_search(
    frame: &GrayImage,
    target: &GrayImage,
    u0: usize,
    v0: usize,
    w: usize,
    h: usize,
    radius: usize,
) -> (f64, f64, f64) {
    let template: Vec<f64> = (0..h)
        .flat_map(|dv| (0..w).map(move |du| (du, dv)))
        .map(|(du, dv)| frame.get(u0 + du, v0 + dv) as f64)
        .collect();
    let t_mean = template.iter().sum::<f64>() / template.len() as f64;
    let t_var: f64 = template.iter().map(|p| (p - t_mean).powi(2)).sum();

    let corr_at = |du: i64, dv: i64| -> Option<f64> {
        let cu = u0 as i64 + du;
        let cv = v0 as i64 + dv;
        if cu < 0 || cv < 0 || cu as usize + w > target.width || cv as usize + h > target.height {
            return None;
        }
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut cross = 0.0;
        for tv in 0..h {
            for tu in 0..w {
                let p = target.get(cu as usize + tu, cv as usize + tv) as f64;
                let t = template[tv * w + tu];
                sum += p;
                sum_sq += p * p;
                cross += p * (t - t_mean);
            }
        }
        let n = (w * h) as f64;
        let mean = sum / n;
        let var = sum_sq - n * mean * mean;
        let denom = (t_var * var).sqrt();
        // cross already equals sum((I - mean_I)(T - mean_T)) since
        // sum(T - mean_T) = 0
        Some(if denom < 1e-9 {
            // flat regions match only a flat template with equal mean
            if t_var < 1e-9 && (mean - t_mean).abs() < 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            cross / denom
        })
    };

    let r = radius as i64;
    let mut best = (0i64, 0i64, -2.0f64);
    for dv in -r..=r {
        for du in -r..=r {
            if let Some(corr) = corr_at(du, dv) {
                if corr > best.2 {
                    best = (du, dv, corr);
                }
            }
        }
    }
    let (pu, pv, peak) = best;

    // parabolic sub-pixel refinement, one axis at a time
    let refine = |cm: Option<f64>, c0: f64, cp: Option<f64>| -> f64 {
        match (cm, cp) {
            (Some(a), Some(b)) => {
                let denom = a - 2.0 * c0 + b;
                if denom.abs() < 1e-12 {
                    0.0
                } else {
                    (0.5 * (a - b) / denom).clamp(-0.5, 0.5)
                }
            }
            _ => 0.0,
        }
    };
    let du_sub = refine(corr_at(pu - 1, pv), peak, corr_at(pu + 1, pv));
    let dv_sub = refine(corr_at(pu, pv - 1), peak, corr_at(pu, pv + 1));
    (pu as f64 + du_sub, pv as f64 + dv_sub, peak)
}

/// Forward-backward NCC tracking of `bbox` from `prev` into `next`.
pub fn fb_track(
    prev: &GrayImage,
    next: &GrayImage,
    bbox: Bbox,
    params: &TrackParams,
) -> Result<TrackResult, TrackError> {
    let (u0, v0, w, h) = bbox;
    if w == 0 || h == 0 || !u0.is_finite() || !v0.is_finite() {
        return Err(TrackError::OutOfBounds);
    }
    let iu0 = u0.round();
    let iv0 = v0.round();
    if iu0 < 0.0 || iv0 < 0.0 || iu0 as usize + w > prev.width || iv0 as usize + h > prev.height {
        return Err(TrackError::OutOfBounds);
    }
    let (iu0, iv0) = (iu0 as usize, iv0 as usize);
    let (fdu, fdv, fcorr) = ncc_search(prev, next, iu0, iv0, w, h, params.search_radius);

    // integer re-crop position in next for the backward pass
    let bu = (iu0 as i64 + fdu.round() as i64).clamp(0, (next.width - w) as i64) as usize;
    let bv = (iv0 as i64 + fdv.round() as i64).clamp(0, (next.height - h) as i64) as usize;
    let (bdu, bdv, _) = ncc_search(next, prev, bu, bv, w, h, params.search_radius);
    let fb_error = ((fdu + bdu).powi(2) + (fdv + bdv).powi(2)).sqrt();
    let failed = fb_error > params.fb_tolerance || fcorr < params.min_correlation;

    let new_u = (u0 + fdu).clamp(0.0, (next.width - w) as f64);
    let new_v = (v0 + fdv).clamp(0.0, (next.height - h) as f64);
    Ok(TrackResult { bbox: (new_u, new_v, w, h), failed, correlation: fcorr, fb_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Textured frame rendered in "world" coordinates under a similarity
    /// transform (scale then translate): the whole scene moves together,
    /// with a bright blob at world (60, 50).
    fn world_frame(w: usize, h: usize, scale: f64, du: f64, dv: f64) -> GrayImage {
        let mut img = GrayImage::filled(w, h, 0);
        for v in 0..h {
            for u in 0..w {
                let wu = (u as f64 - du) / scale;
                let wv = (v as f64 - dv) / scale;
                let base = 60.0
                    + 30.0 * ((wu * 0.37).sin() + (wv * 0.23).cos())
                    + 15.0 * ((wu * 0.11 + wv * 0.19).sin());
                let d2 = (wu - 60.0).powi(2) + (wv - 50.0).powi(2);
                let blob = if d2 < 144.0 { 120.0 * (1.0 - d2 / 144.0) } else { 0.0 };
                img.set(u, v, (base + blob).clamp(0.0, 255.0) as u8);
            }
        }
        img
    }

    #[test]
    fn pure_translation_recovered_exactly() {
        let prev = world_frame(120, 100, 1.0, 0.0, 0.0);
        let next = world_frame(120, 100, 1.0, 7.0, -5.0);
        let bbox = (48.0, 38.0, 24, 24); // centered on the blob
        let r = fb_track(&prev, &next, bbox, &TrackParams::default()).unwrap();
        assert!(!r.failed, "corr {} fb {}", r.correlation, r.fb_error);
        assert!((r.bbox.0 - bbox.0 - 7.0).abs() < 0.3, "du {}", r.bbox.0 - bbox.0);
        assert!((r.bbox.1 - bbox.1 + 5.0).abs() < 0.3, "dv {}", r.bbox.1 - bbox.1);
    }

    #[test]
    fn noise_frame_fails() {
        let prev = world_frame(120, 100, 1.0, 0.0, 0.0);
        let mut rng = crate::rng::stream(9, "track-noise");
        let mut noise = GrayImage::filled(120, 100, 0);
        for p in noise.pixels.iter_mut() {
            *p = rng.gen();
        }
        let r = fb_track(&prev, &noise, (48.0, 38.0, 24, 24), &TrackParams::default()).unwrap();
        assert!(r.failed);
    }

    #[test]
    fn out_of_bounds_template_rejected() {
        let prev = world_frame(60, 60, 1.0, 0.0, 0.0);
        let next = prev.clone();
        assert_eq!(
            fb_track(&prev, &next, (50.0, 50.0, 20, 20), &TrackParams::default()).unwrap_err(),
            TrackError::OutOfBounds
        );
    }

    /// 20-frame descent: the camera zooms 1%/frame with a slow drift; the
    /// tracked bbox center must stay within 3 px of the blob's true
    /// screen position throughout (template re-cropped each frame).
    #[test]
    fn synthetic_descent_sequence_stays_locked() {
        let params = TrackParams::default();
        let transform = |k: usize| -> (f64, f64, f64) {
            (1.0 + 0.01 * k as f64, 0.7 * k as f64, 0.9 * k as f64)
        };
        let truth = |k: usize| -> (f64, f64) {
            let (scale, du, dv) = transform(k);
            (60.0 * scale + du, 50.0 * scale + dv)
        };
        let frame = |k: usize| {
            let (scale, du, dv) = transform(k);
            world_frame(140, 120, scale, du, dv)
        };
        let mut bbox = (46.0, 36.0, 28, 28); // centered on the blob at k=0
        let mut prev = frame(0);
        for k in 1..20 {
            let next = frame(k);
            let r = fb_track(&prev, &next, bbox, &params).unwrap();
            assert!(!r.failed, "failed at frame {k}");
            bbox = r.bbox;
            let (cu, cv) = truth(k);
            let bc_u = bbox.0 + bbox.2 as f64 / 2.0;
            let bc_v = bbox.1 + bbox.3 as f64 / 2.0;
            assert!(
                (bc_u - cu).abs() <= 3.0 && (bc_v - cv).abs() <= 3.0,
                "frame {k}: center ({bc_u},{bc_v}) vs truth ({cu},{cv})"
            );
            prev = next;
        }
    }
}
