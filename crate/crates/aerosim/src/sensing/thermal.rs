//! Thermal imager model: ambient background, hot discs for active fires,
//! warm discs for residually hot targets, building occlusion with
//! see-through windows, and Gaussian pixel noise.

use super::{project, CameraIntrinsics, CameraPose, Projection};
use crate::raster::ThermalImage;
use crate::world::{TargetKind, WorldState};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    pub ambient: u16,
    pub fire_intensity: u16,
    pub warm_intensity: u16,
    /// Radius of the heated plate around the opening, meters.
    pub hot_radius: f64,
    pub noise_sigma: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams {
            ambient: 2000,
            fire_intensity: 60000,
            warm_intensity: 30000,
            hot_radius: 0.15,
            noise_sigma: 60.0,
        }
    }
}

/// Render the thermal frame. Fires seen through window apertures are
/// rendered (the through-window false-positive scenario); opaque wall
/// material occludes.
pub fn render_thermal(
    intr: &CameraIntrinsics,
    cam: &CameraPose,
    world: &WorldState,
    params: &ThermalParams,
    rng: &mut ChaCha8Rng,
) -> ThermalImage {
    let mut img = ThermalImage::filled(intr.width as usize, intr.height as usize, params.ambient);

    for target in &world.targets {
        let fire = match &target.spec.kind {
            TargetKind::Fire(f) => f,
            _ => continue,
        };
        let hot = if target.alive && fire.active {
            params.fire_intensity
        } else if fire.residual_hot {
            params.warm_intensity
        } else {
            continue;
        };
        let cam_point = cam.world_to_camera(target.position);
        if cam_point.z <= 0.0 {
            continue;
        }
        if let Some(building) = &world.building {
            if building.occludes_segment(cam.position, target.position, 1e-3) {
                continue;
            }
        }
        let center = match project(intr, cam, target.position) {
            Projection::Pixel(p) => p,
            Projection::Behind => continue,
        };
        let radius = intr.fx * params.hot_radius / cam_point.z;
        fill_disc(&mut img, center.u, center.v, radius, hot);
    }

    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma).expect("thermal sigma");
        for value in img.values.iter_mut() {
            let noisy = *value as f64 + normal.sample(rng);
            *value = noisy.clamp(0.0, u16::MAX as f64) as u16;
        }
    }
    img
}

fn fill_disc(img: &mut ThermalImage, cu: f64, cv: f64, radius: f64, value: u16) {
    let r2 = radius * radius;
    let u0 = ((cu - radius).floor().max(0.0)) as usize;
    let v0 = ((cv - radius).floor().max(0.0)) as usize;
    let u1 = ((cu + radius).ceil() as i64).clamp(0, img.width as i64) as usize;
    let v1 = ((cv + radius).ceil() as i64).clamp(0, img.height as i64) as usize;
    for v in v0..v1 {
        for u in u0..u1 {
            let du = u as f64 + 0.5 - cu;
            let dv = v as f64 + 0.5 - cv;
            if du * du + dv * dv <= r2 {
                // overlapping sources keep the hotter value
                if img.get(u, v) < value {
                    img.set(u, v, value);
                }
            }
        }
    }
}
