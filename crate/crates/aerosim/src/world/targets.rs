//! Target specifications and motion models.

use super::building::WallFace;
use crate::math::Vec3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockColor {
    Red,
    Green,
    Blue,
    Orange,
}

/// Swaying tethered balloon on a pole.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalloonSpec {
    /// Pole base on the ground.
    pub anchor: Vec3,
    #[serde(default = "default_pole_height")]
    pub pole_height: f64,
    #[serde(default = "default_balloon_diameter")]
    pub diameter: f64,
    #[serde(default = "default_tether_length")]
    pub tether_length: f64,
    /// Sway amplitude per m/s of wind, meters.
    #[serde(default = "default_sway_gain")]
    pub sway_gain: f64,
    #[serde(default = "default_sway_period")]
    pub sway_period: f64,
}

fn default_pole_height() -> f64 {
    2.5
}
fn default_balloon_diameter() -> f64 {
    0.6
}
fn default_tether_length() -> f64 {
    0.5
}
fn default_sway_gain() -> f64 {
    0.1
}
fn default_sway_period() -> f64 {
    3.0
}

impl Default for BalloonSpec {
    fn default() -> Self {
        BalloonSpec {
            anchor: Vec3::ZERO,
            pole_height: default_pole_height(),
            diameter: default_balloon_diameter(),
            tether_length: default_tether_length(),
            sway_gain: default_sway_gain(),
            sway_period: default_sway_period(),
        }
    }
}

/// Ball carried along a figure-8 path at constant speed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    /// Crossing point of the figure-8, including altitude.
    pub center: Vec3,
    /// Orientation of the long axis in the world xy plane.
    #[serde(default)]
    pub yaw: f64,
    /// Full bounding extents of the curve: (along long axis, across).
    #[serde(default = "default_ball_extents")]
    pub extents: (f64, f64),
    #[serde(default = "default_ball_speed")]
    pub speed: f64,
    #[serde(default = "default_ball_diameter")]
    pub diameter: f64,
}

fn default_ball_extents() -> (f64, f64) {
    (40.0, 20.0)
}
fn default_ball_speed() -> f64 {
    8.0
}
fn default_ball_diameter() -> f64 {
    0.15
}

/// Colored foam block with a ferromagnetic patch on top.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    /// Center of the block base on the ground.
    pub position: Vec3,
    pub color: BlockColor,
    #[serde(default)]
    pub yaw: f64,
    /// Length, width, height in meters.
    #[serde(default = "default_block_dims")]
    pub dims: (f64, f64, f64),
    #[serde(default = "default_block_mass")]
    pub mass: f64,
    /// Patch length and width, centered on the top face.
    #[serde(default = "default_patch_dims")]
    pub patch: (f64, f64),
}

fn default_block_dims() -> (f64, f64, f64) {
    (0.30, 0.20, 0.20)
}
fn default_block_mass() -> f64 {
    1.0
}
fn default_patch_dims() -> (f64, f64) {
    (0.18, 0.12)
}

impl BlockSpec {
    /// Physical patch length-to-width ratio, for the vision ratio check.
    pub fn patch_ratio(&self) -> f64 {
        self.patch.0.max(self.patch.1) / self.patch.0.min(self.patch.1)
    }

    /// World positions of the four patch corners, clockwise from the
    /// corner that is top-left when viewed from above with the block
    /// unrotated.
    pub fn patch_corners(&self, center: Vec3) -> [Vec3; 4] {
        let (hl, hw) = (self.patch.0 / 2.0, self.patch.1 / 2.0);
        let top_z = center.z + self.dims.2 / 2.0;
        let local = [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)];
        local.map(|(x, y)| {
            let r = Vec3::new(x, y, 0.0).rotated_z(self.yaw);
            Vec3::new(center.x + r.x, center.y + r.y, top_z)
        })
    }
}

/// Elevated placement structure with a block channel on top.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub center: Vec3,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "default_structure_height")]
    pub height: f64,
    #[serde(default = "default_channel_width")]
    pub channel_width: f64,
    /// Length of each of the four zig-zag segments.
    #[serde(default = "default_side_length")]
    pub side_length: f64,
}

fn default_structure_height() -> f64 {
    1.7
}
fn default_channel_width() -> f64 {
    0.25
}
fn default_side_length() -> f64 {
    4.0
}

impl StructureSpec {
    /// The five zig-zag vertices of the footprint in world coordinates
    /// (plan view; z is the ground).
    pub fn footprint_vertices(&self) -> [Vec3; 5] {
        let s = self.side_length;
        let b = 0.35 * s;
        let local = [
            (-1.5 * s, b),
            (-0.75 * s, -b),
            (0.0, b),
            (0.75 * s, -b),
            (1.5 * s, b),
        ];
        local.map(|(x, y)| {
            let r = Vec3::new(x, y, 0.0).rotated_z(self.yaw);
            Vec3::new(self.center.x + r.x, self.center.y + r.y, self.center.z)
        })
    }

    /// End corners of the targeted side (first zig-zag segment), at the
    /// structure top, ordered (left, right) as approached by the mission.
    pub fn target_side_top(&self) -> (Vec3, Vec3) {
        let v = self.footprint_vertices();
        let top = self.center.z + self.height;
        (v[0].with_z(top), v[1].with_z(top))
    }
}

/// Fire target: a heated opening on a building wall face.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FireSpec {
    pub wall: WallFace,
    /// Meters along the wall from its minimum corner.
    pub along: f64,
    /// Height of the opening center above the ground.
    pub height: f64,
    #[serde(default = "default_opening_diameter")]
    pub opening_diameter: f64,
    #[serde(default = "default_true")]
    pub active: bool,
    /// Recently deactivated target that is still hot (fault scenario).
    #[serde(default)]
    pub residual_hot: bool,
}

fn default_opening_diameter() -> f64 {
    0.12
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Balloon(BalloonSpec),
    Ball(BallSpec),
    Block(BlockSpec),
    Structure(StructureSpec),
    Fire(FireSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetSpec {
    pub kind: TargetKind,
}

impl TargetSpec {
    pub fn balloon(spec: BalloonSpec) -> Self {
        TargetSpec { kind: TargetKind::Balloon(spec) }
    }
    pub fn ball(spec: BallSpec) -> Self {
        TargetSpec { kind: TargetKind::Ball(spec) }
    }
    pub fn block(spec: BlockSpec) -> Self {
        TargetSpec { kind: TargetKind::Block(spec) }
    }
    pub fn structure(spec: StructureSpec) -> Self {
        TargetSpec { kind: TargetKind::Structure(spec) }
    }
    pub fn fire(spec: FireSpec) -> Self {
        TargetSpec { kind: TargetKind::Fire(spec) }
    }

    /// Radius of the bounding sphere used by the synthetic detector.
    pub fn bounding_radius(&self) -> f64 {
        match &self.kind {
            TargetKind::Balloon(b) => b.diameter / 2.0,
            TargetKind::Ball(b) => b.diameter / 2.0,
            TargetKind::Block(b) => 0.5 * (b.dims.0.powi(2) + b.dims.1.powi(2) + b.dims.2.powi(2)).sqrt(),
            TargetKind::Structure(s) => 1.5 * s.side_length,
            TargetKind::Fire(f) => f.opening_diameter / 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TargetInstance {
    pub spec: TargetSpec,
    pub position: Vec3,
    pub alive: bool,
}

/// Balloon center at time t: pole-top rest position displaced by a
/// horizontal sinusoid along the wind direction. Amplitude is
/// `sway_gain * |wind|`, capped at the tether length.
pub fn balloon_center(spec: &BalloonSpec, t: f64, wind: Vec3) -> Vec3 {
    let rest = spec.anchor + Vec3::new(0.0, 0.0, spec.pole_height + spec.diameter / 2.0);
    let wind_xy = wind.with_z(0.0);
    let speed = wind_xy.norm();
    if speed <= 0.0 || spec.sway_gain <= 0.0 {
        return rest;
    }
    let amplitude = (spec.sway_gain * speed).min(spec.tether_length);
    let phase = (std::f64::consts::TAU / spec.sway_period) * t;
    rest + wind_xy.normalized() * (amplitude * phase.sin())
}

/// Balloon position op over a target spec (swaying about the pole top).
pub fn balloon_position(spec: &BalloonSpec, t: f64, wind: Vec3) -> Vec3 {
    balloon_center(spec, t, wind)
}

const LEMNISCATE_TABLE_LEN: usize = 4096;

/// Figure-8 path: Gerono lemniscate x = A sin(th), y = B sin(th)cos(th),
/// arc-length reparameterized numerically so the carrier moves at
/// constant speed. A = extents.0 / 2 and B = extents.1 give a curve whose
/// bounding box matches `extents`.
#[derive(Debug, Clone)]
pub struct BallPath {
    center: Vec3,
    yaw: f64,
    a: f64,
    b: f64,
    speed: f64,
    /// cumulative arc length at theta = i * 2pi / N
    cumulative: Vec<f64>,
}

impl BallPath {
    pub fn new(spec: &BallSpec) -> Self {
        let a = spec.extents.0 / 2.0;
        let b = spec.extents.1;
        let n = LEMNISCATE_TABLE_LEN;
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        let mut prev = lemniscate_local(a, b, 0.0);
        let mut acc = 0.0;
        for i in 1..=n {
            let theta = std::f64::consts::TAU * i as f64 / n as f64;
            let p = lemniscate_local(a, b, theta);
            acc += ((p.0 - prev.0).powi(2) + (p.1 - prev.1).powi(2)).sqrt();
            cumulative.push(acc);
            prev = p;
        }
        BallPath { center: spec.center, yaw: spec.yaw, a, b, speed: spec.speed, cumulative }
    }

    pub fn arc_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn period(&self) -> f64 {
        self.arc_length() / self.speed
    }

    pub fn position(&self, t: f64) -> Vec3 {
        let total = self.arc_length();
        let s = (self.speed * t).rem_euclid(total);
        let theta = self.theta_at_arc(s);
        let (x, y) = lemniscate_local(self.a, self.b, theta);
        let r = Vec3::new(x, y, 0.0).rotated_z(self.yaw);
        self.center + r
    }

    /// Invert the cumulative arc-length table with linear interpolation.
    fn theta_at_arc(&self, s: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let idx = match self.cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let idx = idx.min(n - 1);
        let s0 = self.cumulative[idx];
        let s1 = self.cumulative[idx + 1];
        let frac = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        std::f64::consts::TAU * (idx as f64 + frac) / n as f64
    }
}

fn lemniscate_local(a: f64, b: f64, theta: f64) -> (f64, f64) {
    let (sin, cos) = theta.sin_cos();
    (a * sin, b * sin * cos)
}

/// Figure-8 carrier position op (builds the arc-length table internally;
/// hold a [`BallPath`] to amortize it over a run).
pub fn ball_position(spec: &BallSpec, t: f64) -> Vec3 {
    BallPath::new(spec).position(t)
}
