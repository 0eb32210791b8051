//! Seeded k-means over HSV pixels of an image region, plus the
//! calibrated-color cluster selector.

use super::hsv::{cone_embedding, from_cone, hsv_distance, rgb_to_hsv, HsvPixel};
use crate::raster::RasterImage;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KmeansError {
    #[error("region of interest has {0} pixels, need at least k = {1}")]
    RoiTooSmall(usize, usize),
    #[error("k must be at least 2")]
    BadK,
}

/// Rectangular region of interest, clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roi {
    pub u0: usize,
    pub v0: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn full(img: &RasterImage) -> Self {
        Roi { u0: 0, v0: 0, width: img.width, height: img.height }
    }

    pub fn clipped(u0: i64, v0: i64, width: i64, height: i64, img: &RasterImage) -> Self {
        let u0c = u0.clamp(0, img.width as i64);
        let v0c = v0.clamp(0, img.height as i64);
        let u1 = (u0 + width).clamp(0, img.width as i64);
        let v1 = (v0 + height).clamp(0, img.height as i64);
        Roi {
            u0: u0c as usize,
            v0: v0c as usize,
            width: (u1 - u0c).max(0) as usize,
            height: (v1 - v0c).max(0) as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// Cluster index per ROI pixel, row-major over the ROI.
    pub labels: Vec<usize>,
    pub centers: Vec<HsvPixel>,
    /// Within-cluster SSE after each Lloyd iteration.
    pub sse_history: Vec<f64>,
    pub roi: Roi,
}

const MAX_ITERATIONS: usize = 50;
const CONVERGENCE_EPS: f64 = 1e-4;

/// Seeded k-means++ over the cone embedding of the ROI's HSV pixels.
/// Deterministic given (image bytes, roi, k, seed).
pub fn kmeans_segment(
    img: &RasterImage,
    roi: Roi,
    k: usize,
    seed: u64,
) -> Result<KmeansResult, KmeansError> {
    if k < 2 {
        return Err(KmeansError::BadK);
    }
    let n = roi.width * roi.height;
    if n < k {
        return Err(KmeansError::RoiTooSmall(n, k));
    }
    let mut points = Vec::with_capacity(n);
    for v in roi.v0..roi.v0 + roi.height {
        for u in roi.u0..roi.u0 + roi.width {
            points.push(cone_embedding(rgb_to_hsv(img.get(u, v))));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeanspp_init(&points, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut sse_history = Vec::new();
    let mut prev_sse = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        // assignment
        let mut sse = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (best, d2) = nearest_center(p, &centers);
            labels[i] = best;
            sse += d2;
        }
        sse_history.push(sse);
        // update
        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            let l = labels[i];
            counts[l] += 1;
            for c in 0..3 {
                sums[l][c] += p[c];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for c in 0..3 {
                    centers[j][c] = sums[j][c] / counts[j] as f64;
                }
            }
            // empty clusters keep their center
        }
        if prev_sse - sse < CONVERGENCE_EPS {
            break;
        }
        prev_sse = sse;
    }

    Ok(KmeansResult {
        labels,
        centers: centers.into_iter().map(from_cone).collect(),
        sse_history,
        roi,
    })
}

fn nearest_center(p: &[f64; 3], centers: &[[f64; 3]]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d2 = dist2(p, c);
        if d2 < best_d2 {
            best_d2 = d2;
            best = j;
        }
    }
    (best, best_d2)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]).powi(2)).sum()
}

/// k-means++ seeding: D^2-weighted center choices.
fn kmeanspp_init(points: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all points coincide with existing centers
            points[rng.gen_range(0..points.len())]
        } else {
            let mut pick = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                pick -= w;
                if pick <= 0.0 {
                    idx = i;
                    break;
                }
            }
            points[idx]
        };
        centers.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &next));
        }
    }
    centers
}

/// Index of the cluster center closest to the calibrated patch color;
/// ties break to the lowest index.
pub fn select_patch_cluster(centers: &[HsvPixel], calibrated: HsvPixel) -> usize {
    assert!(!centers.is_empty(), "no cluster centers");
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = hsv_distance(*c, calibrated);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone_image() -> RasterImage {
        let mut img = RasterImage::filled(20, 10, [200, 30, 30]);
        img.fill_rect(10, 0, 20, 10, [30, 30, 200]);
        img
    }

    #[test]
    fn two_tone_centers_recovered() {
        let img = two_tone_image();
        let result = kmeans_segment(&img, Roi::full(&img), 2, 7).unwrap();
        let red = rgb_to_hsv([200, 30, 30]);
        let blue = rgb_to_hsv([30, 30, 200]);
        let mut found_red = false;
        let mut found_blue = false;
        for c in &result.centers {
            if hsv_distance(*c, red) < 1.0 / 255.0 {
                found_red = true;
            }
            if hsv_distance(*c, blue) < 1.0 / 255.0 {
                found_blue = true;
            }
        }
        assert!(found_red && found_blue, "centers {:?}", result.centers);
    }

    #[test]
    fn sse_monotone_non_increasing() {
        let mut img = RasterImage::filled(30, 30, [10, 10, 10]);
        // speckled three-tone image
        for v in 0..30 {
            for u in 0..30 {
                let c = match (u * 7 + v * 13) % 3 {
                    0 => [220, 40, 40],
                    1 => [40, 220, 40],
                    _ => [240, 240, 240],
                };
                if (u + v) % 2 == 0 {
                    img.set(u, v, c);
                }
            }
        }
        let result = kmeans_segment(&img, Roi::full(&img), 3, 3).unwrap();
        for w in result.sse_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "SSE grew: {:?}", result.sse_history);
        }
    }

    #[test]
    fn roi_too_small_rejected() {
        let img = RasterImage::filled(4, 4, [0, 0, 0]);
        let tiny = Roi { u0: 0, v0: 0, width: 1, height: 1 };
        assert_eq!(kmeans_segment(&img, tiny, 3, 1).unwrap_err(), KmeansError::RoiTooSmall(1, 3));
        assert_eq!(kmeans_segment(&img, Roi::full(&img), 1, 1).unwrap_err(), KmeansError::BadK);
    }

    #[test]
    fn determinism_under_seed() {
        let img = two_tone_image();
        let a = kmeans_segment(&img, Roi::full(&img), 2, 42).unwrap();
        let b = kmeans_segment(&img, Roi::full(&img), 2, 42).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn patch_cluster_selection() {
        let white = HsvPixel { h: 0.0, s: 0.02, v: 0.95 };
        let red = HsvPixel { h: 2.0, s: 0.9, v: 0.8 };
        assert_eq!(select_patch_cluster(&[white, red], HsvPixel { h: 0.0, s: 0.0, v: 1.0 }), 0);

        // hue wraparound: calibrated h=1 is closer to 359 than to 180
        let a = HsvPixel { h: 359.0, s: 0.8, v: 0.8 };
        let b = HsvPixel { h: 180.0, s: 0.8, v: 0.8 };
        assert_eq!(select_patch_cluster(&[b, a], HsvPixel { h: 1.0, s: 0.8, v: 0.8 }), 1);

        // exhaustive-distance oracle on a 3-cluster case
        let centers = [
            HsvPixel { h: 30.0, s: 0.5, v: 0.5 },
            HsvPixel { h: 200.0, s: 0.7, v: 0.9 },
            HsvPixel { h: 110.0, s: 0.2, v: 0.3 },
        ];
        let probe = HsvPixel { h: 190.0, s: 0.65, v: 0.85 };
        let oracle = centers
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                hsv_distance(**a, probe).partial_cmp(&hsv_distance(**b, probe)).unwrap()
            })
            .unwrap()
            .0;
        assert_eq!(select_patch_cluster(&centers, probe), oracle);
        assert_eq!(oracle, 1);
    }
}
