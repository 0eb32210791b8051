//! Deterministic kinematic world: UAV rigid-body motion under velocity
//! commands with a first-order lag, target motion models, wind, and
//! noisy GPS. `step_world` is a pure function of (state, command, dt);
//! all randomness (wind perturbation, sensor noise) is injected by the
//! caller from seeded streams.

mod building;
mod targets;

pub use building::{BuildingSpec, WallFace, WallHit, WindowSpec};
pub use targets::{
    ball_position, balloon_position, BallPath, BallSpec, BalloonSpec, BlockColor, BlockSpec,
    FireSpec, StructureSpec, TargetInstance, TargetKind, TargetSpec,
};

use crate::math::{wrap_angle, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("non-finite velocity command")]
    NonFiniteCommand,
    #[error("dt out of range (0, 0.1]: {0}")]
    BadDt(f64),
}

/// UAV pose. `gimbal_offset_yaw` is a fault-injection parameter: the
/// camera is physically rotated by this yaw while the control software
/// assumes body/gimbal alignment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
    pub gimbal_offset_yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Pose { position, yaw: wrap_angle(yaw), gimbal_offset_yaw: 0.0 }
    }

    /// Unit body-frame forward direction (+x) in the world frame.
    pub fn forward(&self) -> Vec3 {
        Vec3::new(self.yaw.cos(), self.yaw.sin(), 0.0)
    }

    /// Unit body-frame left direction (+y) in the world frame.
    pub fn left(&self) -> Vec3 {
        Vec3::new(-self.yaw.sin(), self.yaw.cos(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UavState {
    pub pose: Pose,
    pub velocity: Vec3,
    pub commanded_velocity: Vec3,
    pub yaw_rate: f64,
}

impl UavState {
    pub fn at(position: Vec3, yaw: f64) -> Self {
        UavState {
            pose: Pose::new(position, yaw),
            velocity: Vec3::ZERO,
            commanded_velocity: Vec3::ZERO,
            yaw_rate: 0.0,
        }
    }
}

/// Physical UAV parameters used by kinematics and contact checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavParams {
    pub v_max: f64,
    /// First-order velocity lag time constant, seconds.
    pub tau: f64,
    pub yaw_rate_max: f64,
    /// Propeller disc annulus, body frame, at `prop_z_offset` above origin.
    pub prop_inner_radius: f64,
    pub prop_outer_radius: f64,
    pub prop_z_offset: f64,
    pub body_radius: f64,
    /// Ball-catch net box: half extent (xy) and z span above the body.
    pub net_half_extent: f64,
    pub net_z_min: f64,
    pub net_z_max: f64,
    /// Block manipulator hangs below the body origin.
    pub manipulator_length: f64,
}

impl Default for UavParams {
    fn default() -> Self {
        UavParams {
            v_max: 8.0,
            tau: 0.3,
            yaw_rate_max: 1.5,
            prop_inner_radius: 0.15,
            prop_outer_radius: 0.35,
            prop_z_offset: 0.05,
            body_radius: 0.30,
            net_half_extent: 0.30,
            net_z_min: 0.10,
            net_z_max: 0.60,
            manipulator_length: 0.35,
        }
    }
}

/// Constant wind plus an Ornstein-Uhlenbeck perturbation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindParams {
    pub constant: Vec3,
    pub ou_sigma: f64,
    pub ou_tau: f64,
}

impl Default for WindParams {
    fn default() -> Self {
        WindParams { constant: Vec3::ZERO, ou_sigma: 0.0, ou_tau: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpsHealth {
    Good,
    Low,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpsParams {
    pub sigma_good: f64,
    pub sigma_low: f64,
    pub drop_prob_low: f64,
}

impl Default for GpsParams {
    fn default() -> Self {
        GpsParams { sigma_good: 0.5, sigma_low: 5.0, drop_prob_low: 0.3 }
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub time: f64,
    pub uav: UavState,
    pub targets: Vec<TargetInstance>,
    pub wind: Vec3,
    pub wind_perturbation: Vec3,
    pub rng_seed: u64,
    pub params: UavParams,
    pub building: Option<BuildingSpec>,
    /// Index into `targets` of a block currently attached to the manipulator.
    pub carried_block: Option<usize>,
    ball_path: Option<BallPath>,
}

impl WorldState {
    pub fn new(
        uav: UavState,
        specs: Vec<TargetSpec>,
        building: Option<BuildingSpec>,
        params: UavParams,
        wind_constant: Vec3,
        rng_seed: u64,
    ) -> Self {
        let ball_path = specs.iter().find_map(|s| match &s.kind {
            TargetKind::Ball(b) => Some(BallPath::new(b)),
            _ => None,
        });
        let targets = specs
            .into_iter()
            .map(|spec| {
                let position = initial_position(&spec, ball_path.as_ref(), building.as_ref());
                TargetInstance { spec, position, alive: true }
            })
            .collect();
        WorldState {
            time: 0.0,
            uav,
            targets,
            wind: wind_constant,
            wind_perturbation: Vec3::ZERO,
            rng_seed,
            params,
            building,
            carried_block: None,
            ball_path,
        }
    }

    /// World position of the manipulator tip (EPM gripper face).
    pub fn manipulator_tip(&self) -> Vec3 {
        self.uav.pose.position - Vec3::new(0.0, 0.0, self.params.manipulator_length)
    }

    pub fn ball_path(&self) -> Option<&BallPath> {
        self.ball_path.as_ref()
    }
}

fn initial_position(
    spec: &TargetSpec,
    ball_path: Option<&BallPath>,
    building: Option<&BuildingSpec>,
) -> Vec3 {
    match &spec.kind {
        TargetKind::Balloon(b) => targets::balloon_center(b, 0.0, Vec3::ZERO),
        TargetKind::Ball(_) => ball_path.map(|p| p.position(0.0)).unwrap_or(Vec3::ZERO),
        TargetKind::Block(b) => b.position.with_z(b.position.z + b.dims.2 / 2.0),
        TargetKind::Structure(s) => s.center,
        TargetKind::Fire(f) => building
            .map(|b| b.wall_point(f.wall, f.along, f.height))
            .unwrap_or(Vec3::ZERO),
    }
}

/// Advance the UAV and all target motion models by one fixed step.
///
/// The UAV velocity relaxes toward `command + wind` with time constant
/// `tau`; position uses the exact integral of that exponential response,
/// so results are invariant to internal sub-stepping. Commands above
/// `v_max` are saturated, non-finite commands are rejected.
pub fn step_world(
    state: &WorldState,
    command: (Vec3, f64),
    dt: f64,
) -> Result<WorldState, WorldError> {
    let (vel_cmd, yaw_rate_cmd) = command;
    if !vel_cmd.is_finite() || !yaw_rate_cmd.is_finite() {
        return Err(WorldError::NonFiniteCommand);
    }
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(WorldError::BadDt(dt));
    }
    let mut next = state.clone();
    let p = &state.params;

    let vel_cmd = vel_cmd.saturated(p.v_max);
    let yaw_rate_cmd = yaw_rate_cmd.clamp(-p.yaw_rate_max, p.yaw_rate_max);
    next.uav.commanded_velocity = vel_cmd;

    let target_vel = vel_cmd + state.wind;
    let (new_vel, displacement) = first_order_step(state.uav.velocity, target_vel, p.tau, dt);
    next.uav.velocity = new_vel;
    next.uav.pose.position += displacement;

    let (new_rate, yaw_delta) = first_order_step_scalar(state.uav.yaw_rate, yaw_rate_cmd, p.tau, dt);
    next.uav.yaw_rate = new_rate;
    next.uav.pose.yaw = wrap_angle(state.uav.pose.yaw + yaw_delta);

    if next.uav.pose.position.z < 0.0 {
        next.uav.pose.position.z = 0.0;
        if next.uav.velocity.z < 0.0 {
            next.uav.velocity.z = 0.0;
        }
    }

    next.time = state.time + dt;
    advance_targets(&mut next);
    Ok(next)
}

/// Exact solution of v' = (target - v)/tau over dt: returns the new value
/// and the integrated displacement.
fn first_order_step(v: Vec3, target: Vec3, tau: f64, dt: f64) -> (Vec3, Vec3) {
    if tau <= 0.0 {
        return (target, target * dt);
    }
    let alpha = (-dt / tau).exp();
    let new_v = target + (v - target) * alpha;
    let displacement = target * dt + (v - target) * (tau * (1.0 - alpha));
    (new_v, displacement)
}

fn first_order_step_scalar(v: f64, target: f64, tau: f64, dt: f64) -> (f64, f64) {
    if tau <= 0.0 {
        return (target, target * dt);
    }
    let alpha = (-dt / tau).exp();
    let new_v = target + (v - target) * alpha;
    let delta = target * dt + (v - target) * (tau * (1.0 - alpha));
    (new_v, delta)
}

fn advance_targets(state: &mut WorldState) {
    let t = state.time;
    let wind = state.wind;
    let carried = state.carried_block;
    let uav_pos = state.uav.pose.position;
    let manip_len = state.params.manipulator_length;
    let ball_pos = state.ball_path.as_ref().map(|p| p.position(t));
    for (i, target) in state.targets.iter_mut().enumerate() {
        match &target.spec.kind {
            TargetKind::Balloon(b) => {
                if target.alive {
                    target.position = targets::balloon_center(b, t, wind);
                }
            }
            TargetKind::Ball(_) => {
                if target.alive {
                    if let Some(pos) = ball_pos {
                        target.position = pos;
                    }
                }
            }
            TargetKind::Block(b) => {
                if carried == Some(i) {
                    // carried block hangs under the manipulator
                    target.position = uav_pos - Vec3::new(0.0, 0.0, manip_len + b.dims.2 / 2.0);
                }
            }
            TargetKind::Structure(_) | TargetKind::Fire(_) => {}
        }
    }
}

/// Advance the wind Ornstein-Uhlenbeck perturbation by dt using the exact
/// discretization. Call once per tick before `step_world`.
pub fn advance_wind(state: &mut WorldState, cfg: &WindParams, dt: f64, rng: &mut ChaCha8Rng) {
    if cfg.ou_sigma > 0.0 {
        let decay = (-dt / cfg.ou_tau).exp();
        let diffusion = cfg.ou_sigma * (1.0 - decay * decay).sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut ou = state.wind_perturbation;
        ou.x = ou.x * decay + diffusion * normal.sample(rng);
        ou.y = ou.y * decay + diffusion * normal.sample(rng);
        ou.z = ou.z * decay + diffusion * normal.sample(rng);
        state.wind_perturbation = ou;
    }
    state.wind = cfg.constant + state.wind_perturbation;
}

/// Noisy GPS position reading. Returns `None` when a low-health reading
/// is dropped.
pub fn noisy_gps(
    state: &WorldState,
    health: GpsHealth,
    cfg: &GpsParams,
    rng: &mut ChaCha8Rng,
) -> Option<Vec3> {
    let sigma = match health {
        GpsHealth::Good => cfg.sigma_good,
        GpsHealth::Low => cfg.sigma_low,
    };
    // Draw noise before the drop test so the stream consumption per call
    // is constant regardless of outcome.
    let noise = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("gps sigma");
        Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
    } else {
        Vec3::ZERO
    };
    if health == GpsHealth::Low && rng.gen::<f64>() < cfg.drop_prob_low {
        return None;
    }
    Some(state.uav.pose.position + noise)
}

/// Outcome of a balloon contact test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BalloonContact {
    pub popped: bool,
    /// Bodily/pole contact below the propeller disc: a safety violation,
    /// not a pop.
    pub pole_strike: bool,
}

/// Test the propeller-disc annulus against a balloon sphere, and the body
/// cylinder against the pole.
pub fn balloon_contact(state: &WorldState, balloon_idx: usize) -> BalloonContact {
    let target = &state.targets[balloon_idx];
    let spec = match &target.spec.kind {
        TargetKind::Balloon(b) => b,
        _ => return BalloonContact { popped: false, pole_strike: false },
    };
    let p = &state.params;
    let uav = state.uav.pose.position;
    let balloon = target.position;
    let r = spec.diameter / 2.0;

    let disc_z = uav.z + p.prop_z_offset;
    let dz = (balloon.z - disc_z).abs();
    let mut popped = false;
    if target.alive && dz < r {
        let rc = (r * r - dz * dz).sqrt();
        let h = (balloon - uav).norm_xy();
        popped = h - rc <= p.prop_outer_radius && h + rc >= p.prop_inner_radius;
    }

    // Pole is the vertical segment under the balloon anchor.
    let pole_xy = Vec3::new(spec.anchor.x, spec.anchor.y, 0.0);
    let horiz = (uav.with_z(0.0) - pole_xy).norm_xy();
    let pole_top = spec.anchor.z + spec.pole_height;
    let pole_strike = horiz < p.body_radius && uav.z < pole_top;

    BalloonContact { popped, pole_strike }
}

/// True when the ball center is inside the catch-net box above the body.
pub fn ball_in_net(state: &WorldState, ball_idx: usize) -> bool {
    let target = &state.targets[ball_idx];
    if !target.alive || !matches!(target.spec.kind, TargetKind::Ball(_)) {
        return false;
    }
    let p = &state.params;
    let rel = target.position - state.uav.pose.position;
    rel.x.abs() <= p.net_half_extent
        && rel.y.abs() <= p.net_half_extent
        && rel.z >= p.net_z_min
        && rel.z <= p.net_z_max
}

/// Manipulator-to-block contact classification for pickup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockContact {
    None,
    /// Tip touches the block top but outside the ferromagnetic patch.
    TopOutsidePatch,
    /// Tip touches the block top inside the patch: the magnet attaches.
    OnPatch,
}

pub fn block_contact(state: &WorldState, block_idx: usize, contact_eps: f64) -> BlockContact {
    let target = &state.targets[block_idx];
    let spec = match &target.spec.kind {
        TargetKind::Block(b) => b,
        _ => return BlockContact::None,
    };
    let tip = state.manipulator_tip();
    let top_z = target.position.z + spec.dims.2 / 2.0;
    if (tip.z - top_z).abs() > contact_eps && tip.z > top_z {
        return BlockContact::None;
    }
    // Local top-face coordinates (block yaw).
    let rel = (tip - target.position).rotated_z(-spec.yaw);
    let (hl, hw) = (spec.dims.0 / 2.0, spec.dims.1 / 2.0);
    if rel.x.abs() > hl || rel.y.abs() > hw {
        return BlockContact::None;
    }
    let (pl, pw) = (spec.patch.0 / 2.0, spec.patch.1 / 2.0);
    if rel.x.abs() <= pl && rel.y.abs() <= pw {
        BlockContact::OnPatch
    } else {
        BlockContact::TopOutsidePatch
    }
}
