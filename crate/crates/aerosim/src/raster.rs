//! Raster image buffers and binary PPM/PGM serialization.
//!
//! Synthetic RGB frames are written as P6, 8-bit masks as P5 with maxval
//! 255, and 16-bit thermal frames as P5 with maxval 65535 (big-endian
//! sample bytes, per the netpbm format).

use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed {0} header")]
    Header(&'static str),
    #[error("pixel payload truncated")]
    Truncated,
}

/// Row-major RGB byte image.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>, // 3 bytes per pixel
}

impl RasterImage {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(3 * width * height);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        RasterImage { width, height, pixels }
    }

    pub fn get(&self, u: usize, v: usize) -> [u8; 3] {
        let i = 3 * (v * self.width + u);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, u: usize, v: usize, rgb: [u8; 3]) {
        let i = 3 * (v * self.width + u);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn fill_rect(&mut self, u0: i64, v0: i64, u1: i64, v1: i64, rgb: [u8; 3]) {
        let u0 = u0.max(0) as usize;
        let v0 = v0.max(0) as usize;
        let u1 = (u1.min(self.width as i64)).max(0) as usize;
        let v1 = (v1.min(self.height as i64)).max(0) as usize;
        for v in v0..v1 {
            for u in u0..u1 {
                self.set(u, v, rgb);
            }
        }
    }

    /// Fill a convex quadrilateral given in pixel coordinates.
    pub fn fill_quad(&mut self, corners: [(f64, f64); 4], rgb: [u8; 3]) {
        let min_v = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_v = (corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64)
            .clamp(0, self.height as i64) as usize;
        for v in min_v..max_v {
            let py = v as f64 + 0.5;
            for u in 0..self.width {
                let px = u as f64 + 0.5;
                if point_in_convex_quad(px, py, &corners) {
                    self.set(u, v, rgb);
                }
            }
        }
    }

    pub fn write_ppm<W: Write>(&self, w: &mut W) -> Result<(), ImageError> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn read_ppm<R: Read>(r: &mut R) -> Result<Self, ImageError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let (magic, w, h, maxval, payload) = parse_pnm_header(&buf).ok_or(ImageError::Header("PPM"))?;
        if magic != b"P6" || maxval != 255 {
            return Err(ImageError::Header("PPM"));
        }
        let need = 3 * w * h;
        if payload.len() < need {
            return Err(ImageError::Truncated);
        }
        Ok(RasterImage { width: w, height: h, pixels: payload[..need].to_vec() })
    }
}

fn point_in_convex_quad(px: f64, py: f64, c: &[(f64, f64); 4]) -> bool {
    let mut sign = 0i8;
    for i in 0..4 {
        let (ax, ay) = c[i];
        let (bx, by) = c[(i + 1) % 4];
        let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        let s = if cross > 0.0 { 1 } else if cross < 0.0 { -1 } else { 0 };
        if s != 0 {
            if sign == 0 {
                sign = s;
            } else if s != sign {
                return false;
            }
        }
    }
    true
}

/// Row-major single-channel byte image (masks use 0/255).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage { width, height, pixels: vec![value; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.pixels[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: u8) {
        self.pixels[v * self.width + u] = value;
    }

    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<(), ImageError> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn read_pgm<R: Read>(r: &mut R) -> Result<Self, ImageError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let (magic, w, h, maxval, payload) = parse_pnm_header(&buf).ok_or(ImageError::Header("PGM"))?;
        if magic != b"P5" || maxval != 255 {
            return Err(ImageError::Header("PGM"));
        }
        if payload.len() < w * h {
            return Err(ImageError::Truncated);
        }
        Ok(GrayImage { width: w, height: h, pixels: payload[..w * h].to_vec() })
    }
}

/// Row-major 16-bit intensity grid, monotone in temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u16>,
}

impl ThermalImage {
    pub fn filled(width: usize, height: usize, value: u16) -> Self {
        ThermalImage { width, height, values: vec![value; width * height] }
    }

    pub fn get(&self, u: usize, v: usize) -> u16 {
        self.values[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: u16) {
        self.values[v * self.width + u] = value;
    }

    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<(), ImageError> {
        write!(w, "P5\n{} {}\n65535\n", self.width, self.height)?;
        for &v in &self.values {
            w.write_all(&v.to_be_bytes())?;
        }
        Ok(())
    }

    pub fn read_pgm<R: Read>(r: &mut R) -> Result<Self, ImageError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let (magic, w, h, maxval, payload) = parse_pnm_header(&buf).ok_or(ImageError::Header("PGM16"))?;
        if magic != b"P5" || maxval != 65535 {
            return Err(ImageError::Header("PGM16"));
        }
        if payload.len() < 2 * w * h {
            return Err(ImageError::Truncated);
        }
        let values = payload[..2 * w * h]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        Ok(ThermalImage { width: w, height: h, values })
    }
}

/// Parse "<magic>\n<w> <h>\n<maxval>\n" allowing arbitrary whitespace and
/// `#` comments between tokens. Returns (magic, w, h, maxval, payload).
fn parse_pnm_header(buf: &[u8]) -> Option<(&[u8], usize, usize, usize, &[u8])> {
    if buf.len() < 2 {
        return None;
    }
    let magic = &buf[..2];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < buf.len() && buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < buf.len() && buf[pos] == b'#' {
                while pos < buf.len() && buf[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < buf.len() && buf[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return None;
        }
        *field = std::str::from_utf8(&buf[start..pos]).ok()?.parse().ok()?;
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= buf.len() || !buf[pos].is_ascii_whitespace() {
        return None;
    }
    pos += 1;
    Some((magic, fields[0], fields[1], fields[2], &buf[pos..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let mut img = RasterImage::filled(4, 3, [10, 20, 30]);
        img.set(2, 1, [200, 100, 50]);
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        let back = RasterImage::read_ppm(&mut buf.as_slice()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm16_round_trip() {
        let mut img = ThermalImage::filled(3, 2, 300);
        img.set(0, 0, 60000);
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        let back = ThermalImage::read_pgm(&mut buf.as_slice()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn quad_fill_covers_axis_aligned_rect() {
        let mut rgb = RasterImage::filled(10, 10, [0, 0, 0]);
        rgb.fill_quad([(2.0, 2.0), (7.0, 2.0), (7.0, 5.0), (2.0, 5.0)], [255, 255, 255]);
        for v in 0..10 {
            for u in 0..10 {
                let inside = (2..7).contains(&u) && (2..5).contains(&v);
                assert_eq!(rgb.get(u, v)[0] == 255, inside, "pixel ({u},{v})");
            }
        }
    }
}
