//! RGB <-> HSV conversion and the circular-hue distance used for
//! cluster selection.

use serde::{Deserialize, Serialize};

/// h in [0, 360), s and v in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Standard hexcone conversion.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> HsvPixel {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    HsvPixel { h: h.rem_euclid(360.0), s, v: max }
}

pub fn hsv_to_rgb(p: HsvPixel) -> [u8; 3] {
    let c = p.v * p.s;
    let hp = p.h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = p.v - c;
    let to_byte = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

/// Shortest angular hue distance in degrees, in [0, 180].
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// HSV distance with circular hue and unit weights on normalized axes:
/// hue scaled by its 180-degree maximum, s and v raw.
pub fn hsv_distance(a: HsvPixel, b: HsvPixel) -> f64 {
    let dh = hue_distance(a.h, b.h) / 180.0;
    let ds = a.s - b.s;
    let dv = a.v - b.v;
    (dh * dh + ds * ds + dv * dv).sqrt()
}

/// Embed into the HSV cone so that hue circularity and the undefined
/// hue of gray pixels are handled by plain Euclidean arithmetic:
/// (s cos h, s sin h, v).
pub fn cone_embedding(p: HsvPixel) -> [f64; 3] {
    let rad = p.h.to_radians();
    [p.s * rad.cos(), p.s * rad.sin(), p.v]
}

/// Invert the cone embedding back to HSV.
pub fn from_cone(e: [f64; 3]) -> HsvPixel {
    let s = (e[0] * e[0] + e[1] * e[1]).sqrt();
    let h = if s < 1e-12 { 0.0 } else { e[1].atan2(e[0]).to_degrees().rem_euclid(360.0) };
    HsvPixel { h, s, v: e[2] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn primary_colors() {
        let red = rgb_to_hsv([255, 0, 0]);
        assert_eq!((red.h, red.s, red.v), (0.0, 1.0, 1.0));
        let gray = rgb_to_hsv([128, 128, 128]);
        assert_eq!(gray.s, 0.0);
        assert_relative_eq!(gray.v, 128.0 / 255.0, epsilon = 1e-9);
        let green = rgb_to_hsv([0, 255, 0]);
        assert_eq!(green.h, 120.0);
        let blue = rgb_to_hsv([0, 0, 255]);
        assert_eq!(blue.h, 240.0);
    }

    #[test]
    fn round_trip_within_one_count() {
        let mut rng = crate::rng::stream(31, "hsv-roundtrip");
        for _ in 0..2000 {
            let rgb = [rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()];
            let back = hsv_to_rgb(rgb_to_hsv(rgb));
            for c in 0..3 {
                assert!(
                    (back[c] as i16 - rgb[c] as i16).abs() <= 1,
                    "{rgb:?} -> {back:?}"
                );
            }
        }
    }

    #[test]
    fn hue_wraparound_distance() {
        assert_relative_eq!(hue_distance(359.0, 1.0), 2.0);
        assert_relative_eq!(hue_distance(0.0, 180.0), 180.0);
        assert_relative_eq!(hue_distance(90.0, 90.0), 0.0);
    }

    #[test]
    fn cone_embedding_round_trip() {
        let mut rng = crate::rng::stream(32, "hsv-cone");
        for _ in 0..500 {
            let p = HsvPixel {
                h: rng.gen_range(0.0..360.0),
                s: rng.gen_range(0.01..1.0),
                v: rng.gen_range(0.0..1.0),
            };
            let q = from_cone(cone_embedding(p));
            assert_relative_eq!(p.h, q.h, epsilon = 1e-9);
            assert_relative_eq!(p.s, q.s, epsilon = 1e-9);
            assert_relative_eq!(p.v, q.v, epsilon = 1e-9);
        }
    }
}
