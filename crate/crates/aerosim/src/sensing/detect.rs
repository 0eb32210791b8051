//! Parametric detection channel standing in for a learned detector.
//!
//! Channel knobs (per class): false-negative rate, Poisson false
//! positives, centroid pixel noise, minimum bounding-box side, and the
//! bottom-of-frame mask for the ball class. Monte Carlo sweeps drive
//! these to emulate perception-quality failure causes.

use super::{project, CameraIntrinsics, CameraPose, PixelPoint};
use crate::world::{BlockColor, TargetKind, WorldState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionClass {
    Balloon,
    Ball,
    BlockRed,
    BlockGreen,
    BlockBlue,
    BlockOrange,
    Structure,
}

impl DetectionClass {
    pub fn for_block(color: BlockColor) -> Self {
        match color {
            BlockColor::Red => DetectionClass::BlockRed,
            BlockColor::Green => DetectionClass::BlockGreen,
            BlockColor::Blue => DetectionClass::BlockBlue,
            BlockColor::Orange => DetectionClass::BlockOrange,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassChannel {
    pub fn_rate: f64,
    /// Poisson mean of false positives per frame.
    pub fp_per_frame: f64,
    pub pixel_sigma: f64,
    /// Detections with min(bbox side) below this are discarded
    /// (0 disables). The balloon default encodes the ~4 m range limit.
    pub min_bbox_side: f64,
}

impl Default for ClassChannel {
    fn default() -> Self {
        ClassChannel { fn_rate: 0.0, fp_per_frame: 0.0, pixel_sigma: 0.0, min_bbox_side: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorChannel {
    pub classes: BTreeMap<DetectionClass, ClassChannel>,
    /// Ball detections whose centroid falls in this bottom fraction of
    /// the frame are removed (balloon false-positive suppression).
    pub ball_bottom_fraction: f64,
}

impl Default for DetectorChannel {
    fn default() -> Self {
        let mut classes = BTreeMap::new();
        classes.insert(
            DetectionClass::Balloon,
            ClassChannel { min_bbox_side: 90.0, ..ClassChannel::default() },
        );
        DetectorChannel { classes, ball_bottom_fraction: 0.40 }
    }
}

impl DetectorChannel {
    pub fn class(&self, class: DetectionClass) -> ClassChannel {
        self.classes.get(&class).cloned().unwrap_or_default()
    }

    /// An exact channel: no noise, no misses, no false positives, no
    /// size gate. Used by noiseless oracles.
    pub fn exact() -> Self {
        DetectorChannel { classes: BTreeMap::new(), ball_bottom_fraction: 0.40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class: DetectionClass,
    /// (u_min, v_min, u_max, v_max) in pixels.
    pub bbox: (f64, f64, f64, f64),
    pub centroid: PixelPoint,
    pub confidence: f64,
}

impl Detection {
    pub fn bbox_min_side(&self) -> f64 {
        (self.bbox.2 - self.bbox.0).min(self.bbox.3 - self.bbox.1)
    }
}

/// Largest-bbox detection of a class; the consumer contract when several
/// targets of the same class are visible.
pub fn largest_of_class(detections: &[Detection], class: DetectionClass) -> Option<&Detection> {
    detections
        .iter()
        .filter(|d| d.class == class)
        .max_by(|a, b| {
            let area = |d: &Detection| (d.bbox.2 - d.bbox.0) * (d.bbox.3 - d.bbox.1);
            area(a).partial_cmp(&area(b)).unwrap()
        })
}

/// Run the detection channel over all visible, alive targets.
pub fn detect(
    intr: &CameraIntrinsics,
    cam: &CameraPose,
    world: &WorldState,
    channel: &DetectorChannel,
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for target in &world.targets {
        if !target.alive {
            continue;
        }
        let class = match &target.spec.kind {
            TargetKind::Balloon(_) => DetectionClass::Balloon,
            TargetKind::Ball(_) => DetectionClass::Ball,
            TargetKind::Block(b) => DetectionClass::for_block(b.color),
            TargetKind::Structure(_) => DetectionClass::Structure,
            TargetKind::Fire(_) => continue, // thermal-only target
        };
        let cam_point = cam.world_to_camera(target.position);
        if cam_point.z <= 0.0 {
            continue;
        }
        let centroid = match project(intr, cam, target.position) {
            super::Projection::Pixel(p) => p,
            super::Projection::Behind => continue,
        };
        if !intr.contains(centroid) {
            continue;
        }
        let params = channel.class(class);
        // draw the miss test before the noise so per-target stream usage
        // is fixed
        let missed = params.fn_rate > 0.0 && rng.gen::<f64>() < params.fn_rate;
        let (nu, nv) = if params.pixel_sigma > 0.0 {
            let n = Normal::new(0.0, params.pixel_sigma).expect("pixel sigma");
            (n.sample(rng), n.sample(rng))
        } else {
            (0.0, 0.0)
        };
        if missed {
            continue;
        }
        let radius = target.spec.bounding_radius();
        let half_u = intr.fx * radius / cam_point.z;
        let half_v = intr.fy * radius / cam_point.z;
        let centroid = PixelPoint::new(centroid.u + nu, centroid.v + nv);
        let det = Detection {
            class,
            bbox: (centroid.u - half_u, centroid.v - half_v, centroid.u + half_u, centroid.v + half_v),
            centroid,
            confidence: 0.9,
        };
        if params.min_bbox_side > 0.0 && det.bbox_min_side() < params.min_bbox_side {
            continue;
        }
        if class == DetectionClass::Ball
            && centroid.v > (1.0 - channel.ball_bottom_fraction) * intr.height as f64
        {
            continue;
        }
        out.push(det);
    }

    // false positives, per configured class, deterministic order
    for (class, params) in &channel.classes {
        if params.fp_per_frame <= 0.0 {
            continue;
        }
        let count = Poisson::new(params.fp_per_frame).expect("fp rate").sample(rng) as usize;
        for _ in 0..count {
            let u = rng.gen::<f64>() * intr.width as f64;
            let v = rng.gen::<f64>() * intr.height as f64;
            let half = 10.0 + rng.gen::<f64>() * 30.0;
            let det = Detection {
                class: *class,
                bbox: (u - half, v - half, u + half, v + half),
                centroid: PixelPoint::new(u, v),
                confidence: 0.4,
            };
            if params.min_bbox_side > 0.0 && det.bbox_min_side() < params.min_bbox_side {
                continue;
            }
            if *class == DetectionClass::Ball
                && v > (1.0 - channel.ball_bottom_fraction) * intr.height as f64
            {
                continue;
            }
            out.push(det);
        }
    }
    out
}
