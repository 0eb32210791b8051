//! Synthetic RGB scene renderer. Painter's-algorithm quads and discs,
//! enough to feed the raster vision pipeline and golden-image tests.

use super::{project, CameraIntrinsics, CameraPose, Projection};
use crate::math::Vec3;
use crate::raster::RasterImage;
use crate::world::{BlockColor, TargetKind, WorldState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    pub ground_rgb: [u8; 3],
    pub patch_rgb: [u8; 3],
    pub structure_rgb: [u8; 3],
    pub building_rgb: [u8; 3],
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams {
            ground_rgb: [120, 126, 110],
            patch_rgb: [235, 235, 235],
            structure_rgb: [210, 190, 40],
            building_rgb: [140, 140, 145],
        }
    }
}

fn block_rgb(color: BlockColor) -> [u8; 3] {
    match color {
        BlockColor::Red => [190, 40, 35],
        BlockColor::Green => [40, 160, 60],
        BlockColor::Blue => [40, 70, 180],
        BlockColor::Orange => [220, 130, 30],
    }
}

fn project_quad(
    intr: &CameraIntrinsics,
    cam: &CameraPose,
    corners: [Vec3; 4],
) -> Option<[(f64, f64); 4]> {
    let mut out = [(0.0, 0.0); 4];
    for (i, c) in corners.iter().enumerate() {
        match project(intr, cam, *c) {
            Projection::Pixel(p) => out[i] = (p.u, p.v),
            Projection::Behind => return None,
        }
    }
    Some(out)
}

/// Render blocks (top face + white patch), the placement structure's
/// zig-zag wall band, balloons, and the ball over a flat ground color.
pub fn render_rgb(
    intr: &CameraIntrinsics,
    cam: &CameraPose,
    world: &WorldState,
    params: &RenderParams,
) -> RasterImage {
    let mut img = RasterImage::filled(intr.width as usize, intr.height as usize, params.ground_rgb);

    for target in &world.targets {
        if !target.alive {
            continue;
        }
        match &target.spec.kind {
            TargetKind::Structure(s) => {
                let v = s.footprint_vertices();
                let top = s.center.z + s.height;
                for seg in 0..4 {
                    let (a, b) = (v[seg], v[seg + 1]);
                    let quad = [a.with_z(top), b.with_z(top), b.with_z(s.center.z), a.with_z(s.center.z)];
                    if let Some(px) = project_quad(intr, cam, quad) {
                        img.fill_quad(px, params.structure_rgb);
                    }
                }
            }
            TargetKind::Block(b) => {
                let center = target.position;
                let (hl, hw) = (b.dims.0 / 2.0, b.dims.1 / 2.0);
                let top_z = center.z + b.dims.2 / 2.0;
                let local = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)];
                let face = local.map(|(x, y)| {
                    let r = Vec3::new(x, y, 0.0).rotated_z(b.yaw);
                    Vec3::new(center.x + r.x, center.y + r.y, top_z)
                });
                if let Some(px) = project_quad(intr, cam, face) {
                    img.fill_quad(px, block_rgb(b.color));
                }
                let patch = b.patch_corners(center);
                if let Some(px) = project_quad(intr, cam, patch) {
                    img.fill_quad(px, params.patch_rgb);
                }
            }
            TargetKind::Balloon(b) => {
                draw_sphere(&mut img, intr, cam, target.position, b.diameter / 2.0, [60, 170, 70]);
            }
            TargetKind::Ball(b) => {
                draw_sphere(&mut img, intr, cam, target.position, b.diameter / 2.0, [225, 210, 40]);
            }
            TargetKind::Fire(_) => {}
        }
    }

    if let Some(b) = &world.building {
        // building walls as flat quads (drawn last; missions never mix
        // building and block scenes in one camera view)
        let (x0, y0) = b.min;
        let (x1, y1) = b.max;
        let corners = [
            Vec3::new(x0, y0, 0.0),
            Vec3::new(x1, y0, 0.0),
            Vec3::new(x1, y1, 0.0),
            Vec3::new(x0, y1, 0.0),
        ];
        for i in 0..4 {
            let (a, c) = (corners[i], corners[(i + 1) % 4]);
            let quad = [a.with_z(b.height), c.with_z(b.height), c, a];
            if let Some(px) = project_quad(intr, cam, quad) {
                img.fill_quad(px, params.building_rgb);
            }
        }
    }
    img
}

fn draw_sphere(
    img: &mut RasterImage,
    intr: &CameraIntrinsics,
    cam: &CameraPose,
    center: Vec3,
    radius: f64,
    rgb: [u8; 3],
) {
    let cam_point = cam.world_to_camera(center);
    if cam_point.z <= 0.0 {
        return;
    }
    let px = match project(intr, cam, center) {
        Projection::Pixel(p) => p,
        Projection::Behind => return,
    };
    let r = intr.fx * radius / cam_point.z;
    let u0 = (px.u - r).floor().max(0.0) as usize;
    let v0 = (px.v - r).floor().max(0.0) as usize;
    let u1 = ((px.u + r).ceil() as i64).clamp(0, img.width as i64) as usize;
    let v1 = ((px.v + r).ceil() as i64).clamp(0, img.height as i64) as usize;
    for v in v0..v1 {
        for u in u0..u1 {
            let du = u as f64 + 0.5 - px.u;
            let dv = v as f64 + 0.5 - px.v;
            if du * du + dv * dv <= r * r {
                img.set(u, v, rgb);
            }
        }
    }
}
