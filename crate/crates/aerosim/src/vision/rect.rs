//! Rectangle fitting over a binary mask: largest connected component,
//! minimum-area rotated rectangle via rotating calipers, corner sorting,
//! and the physical-ratio failure check.

use crate::raster::GrayImage;
use crate::sensing::PixelPoint;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RectError {
    #[error("mask has no foreground pixels")]
    NoPatch,
}

/// Pixels of the largest 4-connected foreground component (nonzero mask
/// values), as integer (u, v) points.
pub fn largest_component(mask: &GrayImage) -> Vec<(i64, i64)> {
    let (w, h) = (mask.width, mask.height);
    let mut visited = vec![false; w * h];
    let mut best: Vec<(i64, i64)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if visited[start] || mask.pixels[start] == 0 {
            continue;
        }
        let mut component = Vec::new();
        stack.push(start);
        visited[start] = true;
        while let Some(idx) = stack.pop() {
            let (u, v) = (idx % w, idx / w);
            component.push((u as i64, v as i64));
            let mut push = |uu: usize, vv: usize| {
                let j = vv * w + uu;
                if !visited[j] && mask.pixels[j] != 0 {
                    visited[j] = true;
                    stack.push(j);
                }
            };
            if u > 0 {
                push(u - 1, v);
            }
            if u + 1 < w {
                push(u + 1, v);
            }
            if v > 0 {
                push(u, v - 1);
            }
            if v + 1 < h {
                push(u, v + 1);
            }
        }
        if component.len() > best.len() {
            best = component;
        }
    }
    best
}

/// Andrew monotone-chain convex hull; returns counterclockwise order in
/// (u, v) coordinates.
fn convex_hull(points: &mut Vec<(i64, i64)>) -> Vec<(f64, f64)> {
    points.sort();
    points.dedup();
    let n = points.len();
    if n <= 2 {
        return points.iter().map(|&(u, v)| (u as f64, v as f64)).collect();
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| -> i64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * n);
    for &p in points.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull.into_iter().map(|(u, v)| (u as f64, v as f64)).collect()
}

/// Minimum-area rotated rectangle of the largest component, corners
/// sorted clockwise from top-left (top-left = min u+v, ties by min v).
pub fn fit_rectangle_corners(mask: &GrayImage) -> Result<[PixelPoint; 4], RectError> {
    let mut component = largest_component(mask);
    if component.is_empty() {
        return Err(RectError::NoPatch);
    }
    let hull = convex_hull(&mut component);
    let corners = min_area_rect(&hull);
    Ok(sort_corners(corners))
}

/// Rotating calipers: the minimal-area box has a side collinear with
/// some hull edge.
fn min_area_rect(hull: &[(f64, f64)]) -> [(f64, f64); 4] {
    if hull.len() == 1 {
        let p = hull[0];
        return [p, p, p, p];
    }
    if hull.len() == 2 {
        return [hull[0], hull[1], hull[1], hull[0]];
    }
    let mut best_area = f64::INFINITY;
    let mut best: [(f64, f64); 4] = [hull[0]; 4];
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        if len < 1e-12 {
            continue;
        }
        let ux = (b.0 - a.0) / len;
        let uy = (b.1 - a.1) / len;
        // perpendicular
        let (px, py) = (-uy, ux);
        let mut min_t = f64::INFINITY;
        let mut max_t = f64::NEG_INFINITY;
        let mut min_s = f64::INFINITY;
        let mut max_s = f64::NEG_INFINITY;
        for &(qu, qv) in hull {
            let t = (qu - a.0) * ux + (qv - a.1) * uy;
            let s = (qu - a.0) * px + (qv - a.1) * py;
            min_t = min_t.min(t);
            max_t = max_t.max(t);
            min_s = min_s.min(s);
            max_s = max_s.max(s);
        }
        let area = (max_t - min_t) * (max_s - min_s);
        if area < best_area {
            best_area = area;
            let corner = |t: f64, s: f64| (a.0 + t * ux + s * px, a.1 + t * uy + s * py);
            best = [
                corner(min_t, min_s),
                corner(max_t, min_s),
                corner(max_t, max_s),
                corner(min_t, max_s),
            ];
        }
    }
    best
}

/// Clockwise order in image coordinates starting from the top-left
/// corner (minimum u+v, ties broken by minimum v).
pub fn sort_corners(corners: [(f64, f64); 4]) -> [PixelPoint; 4] {
    let cu = corners.iter().map(|c| c.0).sum::<f64>() / 4.0;
    let cv = corners.iter().map(|c| c.1).sum::<f64>() / 4.0;
    let mut ordered = corners;
    // increasing atan2(dv, du) is visually clockwise when v points down
    ordered.sort_by(|a, b| {
        let aa = (a.1 - cv).atan2(a.0 - cu);
        let bb = (b.1 - cv).atan2(b.0 - cu);
        aa.partial_cmp(&bb).unwrap()
    });
    let start = ordered
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let ka = (a.0 + a.1, a.1);
            let kb = (b.0 + b.1, b.1);
            ka.partial_cmp(&kb).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let mut out = [PixelPoint::new(0.0, 0.0); 4];
    for i in 0..4 {
        let c = ordered[(start + i) % 4];
        out[i] = PixelPoint::new(c.0, c.1);
    }
    out
}

/// Compare the fitted rectangle's pixel length-to-width ratio against
/// the known physical ratio (both normalized long/short). True only when
/// strictly inside the relative tolerance; degenerate rectangles fail.
pub fn ratio_check(corners: &[PixelPoint; 4], physical_ratio: f64, tolerance: f64) -> bool {
    assert!(physical_ratio > 0.0);
    let side = |a: PixelPoint, b: PixelPoint| ((a.u - b.u).powi(2) + (a.v - b.v).powi(2)).sqrt();
    let s1 = side(corners[0], corners[1]);
    let s2 = side(corners[1], corners[2]);
    let short = s1.min(s2);
    let long = s1.max(s2);
    if short <= 1e-9 {
        return false;
    }
    let ratio = long / short;
    let physical = if physical_ratio >= 1.0 { physical_ratio } else { 1.0 / physical_ratio };
    (ratio - physical).abs() / physical < tolerance
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn mask_with_rect(u0: i64, v0: i64, u1: i64, v1: i64) -> GrayImage {
        let mut mask = GrayImage::filled(256, 256, 0);
        for v in v0..=v1 {
            for u in u0..=u1 {
                mask.set(u as usize, v as usize, 255);
            }
        }
        mask
    }

    #[test]
    fn axis_aligned_rect_exact_corners() {
        let mask = mask_with_rect(100, 100, 140, 120);
        let corners = fit_rectangle_corners(&mask).unwrap();
        let expected = [(100.0, 100.0), (140.0, 100.0), (140.0, 120.0), (100.0, 120.0)];
        for (c, e) in corners.iter().zip(expected) {
            assert!((c.u - e.0).abs() < 1e-9 && (c.v - e.1).abs() < 1e-9, "{corners:?}");
        }
    }

    #[test]
    fn empty_mask_is_no_patch() {
        let mask = GrayImage::filled(32, 32, 0);
        assert_eq!(fit_rectangle_corners(&mask).unwrap_err(), RectError::NoPatch);
    }

    /// Analytic rotation oracle: fill a rotated rectangle, fit, and
    /// compare each fitted corner to the nearest analytic corner.
    #[test]
    fn rotated_rect_within_one_pixel() {
        let mut rng = crate::rng::stream(13, "rect-rot");
        for trial in 0..100 {
            let cu = rng.gen_range(90.0..170.0);
            let cv = rng.gen_range(90.0..170.0);
            let half_l = rng.gen_range(15.0..45.0);
            let half_w = rng.gen_range(8.0..half_l);
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let (sin, cos) = angle.sin_cos();
            let analytic: Vec<(f64, f64)> = [
                (-half_l, -half_w),
                (half_l, -half_w),
                (half_l, half_w),
                (-half_l, half_w),
            ]
            .iter()
            .map(|(x, y)| (cu + x * cos - y * sin, cv + x * sin + y * cos))
            .collect();

            // rasterize by point-in-rect test on the analytic rectangle
            let mut mask = GrayImage::filled(256, 256, 0);
            for v in 0..256usize {
                for u in 0..256usize {
                    let du = u as f64 - cu;
                    let dv = v as f64 - cv;
                    let x = du * cos + dv * sin;
                    let y = -du * sin + dv * cos;
                    if x.abs() <= half_l && y.abs() <= half_w {
                        mask.set(u, v, 255);
                    }
                }
            }
            let corners = fit_rectangle_corners(&mask).unwrap();
            for c in &corners {
                let nearest = analytic
                    .iter()
                    .map(|a| ((c.u - a.0).powi(2) + (c.v - a.1).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest <= 1.0 + 1e-6, "trial {trial}: corner {c:?} off by {nearest}");
            }
        }
    }

    #[test]
    fn salt_noise_outside_component_ignored() {
        let mut mask = mask_with_rect(100, 100, 140, 120);
        // 5% salt: isolated pixels away from the rectangle
        let mut rng = crate::rng::stream(14, "rect-salt");
        let mut added = 0;
        while added < (256 * 256) / 20 {
            let u = rng.gen_range(0..256usize);
            let v = rng.gen_range(0..256usize);
            // keep noise clear of the rectangle so it stays disconnected
            if (90..=150).contains(&u) && (90..=130).contains(&v) {
                continue;
            }
            // and isolated from other salt (skip if any 4-neighbor set)
            let isolated = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().all(|(du, dv)| {
                let uu = u as i64 + du;
                let vv = v as i64 + dv;
                uu < 0 || vv < 0 || uu >= 256 || vv >= 256 || mask.get(uu as usize, vv as usize) == 0
            });
            if isolated {
                mask.set(u, v, 255);
                added += 1;
            }
        }
        let corners = fit_rectangle_corners(&mask).unwrap();
        let expected = [(100.0, 100.0), (140.0, 100.0), (140.0, 120.0), (100.0, 120.0)];
        for (c, e) in corners.iter().zip(expected) {
            assert!((c.u - e.0).abs() < 1e-9 && (c.v - e.1).abs() < 1e-9);
        }
    }

    #[test]
    fn corner_sort_clockwise_from_top_left() {
        let shuffled = [(140.0, 120.0), (100.0, 100.0), (100.0, 120.0), (140.0, 100.0)];
        let sorted = sort_corners(shuffled);
        assert_eq!((sorted[0].u, sorted[0].v), (100.0, 100.0));
        assert_eq!((sorted[1].u, sorted[1].v), (140.0, 100.0));
        assert_eq!((sorted[2].u, sorted[2].v), (140.0, 120.0));
        assert_eq!((sorted[3].u, sorted[3].v), (100.0, 120.0));
    }

    #[test]
    fn ratio_check_contract() {
        let rect = sort_corners([(0.0, 0.0), (30.0, 0.0), (30.0, 20.0), (0.0, 20.0)]);
        assert!(ratio_check(&rect, 1.5, 0.25));
        assert!(!ratio_check(&rect, 3.0, 0.25));
        // boundary at exactly the tolerance is false (strict)
        // rect ratio 1.5 vs physical 1.2: |1.5-1.2|/1.2 = 0.25 exactly
        assert!(!ratio_check(&rect, 1.2, 0.25));
        // degenerate zero-width rectangle
        let degenerate = sort_corners([(0.0, 0.0), (30.0, 0.0), (30.0, 0.0), (0.0, 0.0)]);
        assert!(!ratio_check(&degenerate, 1.5, 0.25));
    }

    /// Scale invariance: uniformly scaling pixel coordinates never
    /// changes the verdict.
    #[test]
    fn ratio_check_scale_invariant() {
        let mut rng = crate::rng::stream(15, "rect-scale");
        for _ in 0..200 {
            let w = rng.gen_range(5.0..50.0);
            let h = rng.gen_range(5.0..50.0);
            let physical = rng.gen_range(1.0..4.0);
            let base = sort_corners([(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)]);
            let verdict = ratio_check(&base, physical, 0.25);
            for scale in [0.25, 3.0, 17.5] {
                let scaled = sort_corners([
                    (0.0, 0.0),
                    (w * scale, 0.0),
                    (w * scale, h * scale),
                    (0.0, h * scale),
                ]);
                assert_eq!(ratio_check(&scaled, physical, 0.25), verdict);
            }
        }
    }
}
