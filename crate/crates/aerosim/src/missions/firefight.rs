//! Firefighting mission: GPS pre-alignment with a clockwise 90-degree
//! turn, median-filtered wall following at 1.2 m standoff, thermal
//! detection, proportional pixel centering with 3-D position refinement
//! from the forward range, the x-pattern spray action, refill landings,
//! and the low-GPS-health hold. The target distance limit is absent by
//! default -- the through-window false positive is reproducible -- and
//! can be enabled per scenario.

use super::spray::{PumpParams, PumpState};
use super::{vertical_to, MissionCommand, Observations};
use crate::fsm::{Event, Machine, Transition};
use crate::guidance::{follow_waypoints, FollowParams, HeadingPolicy, WaypointFollower};
use crate::math::{angle_diff, wrap_angle, Vec3};
use crate::scenario::Scenario;
use crate::search::{
    corner_turn_plan, cross_pattern, wall_follow_step, WallEvent, WallFollowParams,
    WallFollowState,
};
use crate::sensing::{CameraIntrinsics, CameraPose, PixelPoint};
use crate::vision::ThermalBlob;
use crate::world::{GpsHealth, Pose};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirefightState {
    TakeOff,
    PreAlign,
    WallFollow,
    CornerTurn,
    CenterTarget,
    Approach,
    Spray,
    RefillLand,
    HoldGps,
    Land,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SprayPattern {
    /// The x-pattern robust action over a 0.25 m square.
    Cross,
    /// Baseline: hover at the believed target for the same duration.
    Hover,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirefightParams {
    pub wall: WallFollowParams,
    pub follow: FollowParams,
    pub pump: PumpParams,
    pub pattern: SprayPattern,
    /// Altitude schedule for the wall-following spiral.
    pub altitudes: Vec<f64>,
    /// Thermal threshold (counts) and minimum blob area (px).
    pub thermal_threshold: u16,
    pub min_blob_area: usize,
    /// Pixel-centering gains, (m/s)/px.
    pub center_gain: f64,
    pub center_tolerance_px: f64,
    /// Half side of the x-pattern square (0.25 m square).
    pub pattern_half_side: f64,
    pub pattern_speed: f64,
    /// Volume to deliver per target before moving on, mL.
    pub extinguish_volume_ml: f64,
    /// Systematic fire-localization error sigma (per attempt), meters.
    pub aim_sigma: f64,
    /// Optional upper limit on the believed target distance; None
    /// reproduces the window false positive.
    pub max_target_distance: Option<f64>,
    pub stuck_stopper_prob_per_attempt: f64,
    pub takeoff_rate: f64,
    pub landing_rate: f64,
}

impl Default for FirefightParams {
    fn default() -> Self {
        FirefightParams {
            wall: WallFollowParams::default(),
            follow: FollowParams { cruise_speed: 1.0, ..FollowParams::default() },
            pump: PumpParams::default(),
            pattern: SprayPattern::Cross,
            altitudes: vec![1.5, 2.5],
            thermal_threshold: 20000,
            min_blob_area: 4,
            center_gain: 0.004,
            center_tolerance_px: 4.0,
            pattern_half_side: 0.125,
            pattern_speed: 0.15,
            extinguish_volume_ml: 30.0,
            aim_sigma: 0.08,
            max_target_distance: None,
            stuck_stopper_prob_per_attempt: 0.0,
            takeoff_rate: 0.8,
            landing_rate: 0.8,
        }
    }
}

fn transitions() -> Vec<Transition<FirefightState>> {
    use FirefightState::*;
    vec![
        Transition::new(TakeOff, Land, "clock_expired", 0),
        Transition::new(PreAlign, Land, "clock_expired", 0),
        Transition::new(WallFollow, Land, "clock_expired", 0),
        Transition::new(CornerTurn, Land, "clock_expired", 0),
        Transition::new(CenterTarget, Land, "clock_expired", 0),
        Transition::new(Approach, Land, "clock_expired", 0),
        Transition::new(Spray, Land, "clock_expired", 0),
        Transition::new(RefillLand, Land, "clock_expired", 0),
        Transition::new(HoldGps, Land, "clock_expired", 0),
        Transition::new(TakeOff, PreAlign, "takeoff_complete", 10),
        Transition::new(PreAlign, WallFollow, "prealigned", 10),
        Transition::new(WallFollow, HoldGps, "low_gps_health", 2),
        Transition::new(WallFollow, CenterTarget, "fire_detected", 5),
        Transition::new(WallFollow, CornerTurn, "wall_edge", 10),
        Transition::new(WallFollow, Land, "search_exhausted", 15),
        Transition::new(CornerTurn, WallFollow, "turn_complete", 10),
        Transition::new(HoldGps, WallFollow, "gps_restored", 10),
        Transition::new(CenterTarget, Spray, "target_refined", 10),
        Transition::new(CenterTarget, Approach, "target_beyond_range", 15),
        Transition::new(CenterTarget, WallFollow, "target_rejected", 5),
        Transition::new(CenterTarget, WallFollow, "target_lost", 20),
        Transition::new(Approach, CenterTarget, "target_in_range", 10),
        Transition::new(Approach, WallFollow, "target_lost", 20),
        Transition::new(Spray, RefillLand, "tank_empty", 10),
        Transition::new(Spray, WallFollow, "spray_complete", 20),
        Transition::new(RefillLand, WallFollow, "refilled", 10),
        Transition::new(Land, Done, "landed", 10),
    ]
}

#[derive(Debug, Clone)]
pub struct FirefightMission {
    machine: Machine<FirefightState>,
    params: FirefightParams,
    thermal_intrinsics: CameraIntrinsics,
    wall_state: WallFollowState,
    wall_event: WallEvent,
    turn_plan: Vec<Vec3>,
    turn_heading: f64,
    turn_follower: WaypointFollower,
    prealign_point: Vec3,
    prealign_yaw: f64,
    home: Vec3,
    pump: PumpState,
    /// Believed fire position (with injected aim error) for the spray.
    aim_point: Option<Vec3>,
    spray_plan: Vec<Vec3>,
    spray_follower: WaypointFollower,
    spray_hold_until: f64,
    last_thermal_t: f64,
    latest_blob: Option<ThermalBlob>,
    refill_site: Vec3,
    first_pass_fire_found: bool,
}

impl FirefightMission {
    pub fn new(scenario: &Scenario) -> Self {
        let params = scenario.firefight_mission.clone();
        let start = scenario.uav_start.position;
        let yaw0 = scenario.uav_start.yaw;
        // GPS waypoint 2 m forward and to the left, then clockwise 90
        let fwd = Vec3::new(yaw0.cos(), yaw0.sin(), 0.0);
        let left = Vec3::new(-yaw0.sin(), yaw0.cos(), 0.0);
        let prealign_point = (start + fwd * 2.0 + left * 2.0).with_z(params.altitudes[0]);
        let prealign_yaw = wrap_angle(yaw0 - std::f64::consts::FRAC_PI_2);
        let pump = PumpState::full(&params.pump);
        let wall_state = WallFollowState::new(&params.wall);
        FirefightMission {
            machine: Machine::new(
                "firefight",
                FirefightState::TakeOff,
                transitions(),
                &[FirefightState::Done],
            ),
            thermal_intrinsics: scenario.thermal_camera.clone(),
            wall_state,
            wall_event: WallEvent::None,
            turn_plan: Vec::new(),
            turn_heading: prealign_yaw,
            turn_follower: WaypointFollower::default(),
            prealign_point,
            prealign_yaw,
            home: start,
            pump,
            aim_point: None,
            spray_plan: Vec::new(),
            spray_follower: WaypointFollower::default(),
            spray_hold_until: 0.0,
            last_thermal_t: 0.0,
            latest_blob: None,
            refill_site: start,
            first_pass_fire_found: false,
            params,
        }
    }

    pub fn state(&self) -> FirefightState {
        self.machine.state()
    }

    pub fn done(&self) -> bool {
        self.machine.state() == FirefightState::Done
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        self.machine.drain_events()
    }

    pub fn note(&mut self, now: f64, kind: &str, details: String) {
        self.machine.note(now, kind, details);
    }

    pub fn abort(&mut self, now: f64, reason: &'static str, details: String) {
        self.machine.force(now, FirefightState::Done, reason, details);
    }

    pub fn to_dot(&self) -> String {
        self.machine.to_dot()
    }

    pub fn pump(&self) -> &PumpState {
        &self.pump
    }

    pub fn pump_mut(&mut self) -> &mut PumpState {
        &mut self.pump
    }

    pub fn pump_params(&self) -> &PumpParams {
        &self.params.pump
    }

    pub fn first_pass_fire_found(&self) -> bool {
        self.first_pass_fire_found
    }

    fn current_altitude_target(&self) -> f64 {
        let idx = self.wall_state.altitude_index.min(self.params.altitudes.len() - 1);
        self.params.altitudes[idx]
    }

    pub fn tick(&mut self, obs: &Observations, rng: &mut ChaCha8Rng, dt: f64) -> MissionCommand {
        use FirefightState::*;
        let t = obs.t;
        let out_of_time = obs.clock_remaining <= 0.0 || obs.battery_remaining <= 0.0;

        if let Some(blobs) = obs.thermal {
            if let Some(best) = blobs.iter().find(|b| b.area >= self.params.min_blob_area) {
                self.latest_blob = Some(best.clone());
                self.last_thermal_t = t;
            }
        }
        let blob_fresh = t - self.last_thermal_t < 1.0 && self.latest_blob.is_some();
        let state = self.machine.state();

        // centering error in pixels, when a blob is tracked
        let center_err = self.latest_blob.as_ref().map(|b| {
            (
                b.centroid.u - self.thermal_intrinsics.cx,
                b.centroid.v - self.thermal_intrinsics.cy,
            )
        });
        let centered = center_err
            .map(|(eu, ev)| {
                eu.abs() < self.params.center_tolerance_px
                    && ev.abs() < self.params.center_tolerance_px
            })
            .unwrap_or(false);
        let range_value = obs.forward_range.distance;
        let believed_distance = range_value.unwrap_or(obs.forward_range.max_range);
        let target_rejected = centered
            && self
                .params
                .max_target_distance
                .map(|limit| believed_distance > limit)
                .unwrap_or(false);
        let beyond_spray_range = centered && believed_distance > self.params.pump.range;
        let spray_done = match self.params.pattern {
            SprayPattern::Cross => self.spray_follower.index >= self.spray_plan.len(),
            SprayPattern::Hover => t >= self.spray_hold_until,
        };
        let turn_done = self.turn_follower.index >= self.turn_plan.len()
            && angle_diff(self.turn_heading, obs.yaw).abs() < 0.12;
        let low_gps = obs.gps_health == GpsHealth::Low;
        let on_ground = obs.altitude <= 0.08;
        let search_exhausted = self.wall_event == WallEvent::Edge
            && self.wall_state.altitude_index + 1 >= self.params.altitudes.len()
            && (self.wall_state.wall_index + 1) % 4 == 0;

        let fired = self.machine.tick(t, |guard| match guard {
            "clock_expired" => out_of_time,
            "takeoff_complete" => obs.altitude >= self.params.altitudes[0] - 0.15,
            "prealigned" => {
                obs.nav.with_z(0.0).distance(self.prealign_point.with_z(0.0)) < 0.5
                    && angle_diff(self.prealign_yaw, obs.yaw).abs() < 0.1
            }
            "low_gps_health" => low_gps,
            "gps_restored" => !low_gps,
            "fire_detected" => blob_fresh && state == WallFollow,
            "wall_edge" => self.wall_event == WallEvent::Edge && !search_exhausted,
            "search_exhausted" => search_exhausted,
            "turn_complete" => turn_done,
            "target_rejected" => target_rejected,
            "target_refined" => centered && !beyond_spray_range && !target_rejected,
            "target_beyond_range" => beyond_spray_range && !target_rejected,
            "target_in_range" => believed_distance <= self.params.pump.range,
            "target_lost" => !blob_fresh,
            "tank_empty" => spray_done && self.pump.empty(),
            "spray_complete" => spray_done,
            "refilled" => on_ground,
            "landed" => on_ground,
            _ => false,
        });

        if let Some(next) = fired {
            match (state, next) {
                (WallFollow, CornerTurn) => {
                    match corner_turn_plan(
                        &mut self.wall_state,
                        &self.params.wall,
                        &self.params.altitudes,
                        &Pose::new(obs.nav, obs.yaw),
                    ) {
                        Ok(plan) => {
                            self.turn_plan = plan.waypoints;
                            self.turn_heading = plan.new_heading;
                            self.turn_follower = WaypointFollower::default();
                        }
                        Err(_) => {
                            // schedule exhausted mid-turn; land
                            self.machine.force(t, Land, "search_exhausted", String::new());
                        }
                    }
                    self.wall_event = WallEvent::None;
                }
                (WallFollow, CenterTarget) => {
                    if self.wall_state.wall_index == 0 {
                        self.first_pass_fire_found = true;
                    }
                }
                (CenterTarget, Spray) => {
                    // 3-D refinement: centered LOS at the measured range,
                    // with the per-attempt systematic aim error
                    let z = believed_distance.min(self.params.pump.range);
                    let forward = Vec3::new(obs.yaw.cos(), obs.yaw.sin(), 0.0);
                    let mut aim = obs.nav + forward * z;
                    if self.params.aim_sigma > 0.0 {
                        let n = Normal::new(0.0, self.params.aim_sigma).expect("aim sigma");
                        let lateral = forward.cross(Vec3::new(0.0, 0.0, 1.0));
                        aim = aim + lateral * n.sample(rng) + Vec3::new(0.0, 0.0, n.sample(rng));
                    }
                    self.aim_point = Some(aim);
                    if self.params.stuck_stopper_prob_per_attempt > 0.0
                        && rng.gen_bool(self.params.stuck_stopper_prob_per_attempt)
                    {
                        self.pump.stopper_stuck = true;
                        self.machine.note(t, "stuck_stopper", String::new());
                    }
                    // pattern centered on the UAV position that aims the
                    // nozzle at the believed target
                    let hover_center = (aim - forward * self.params.wall.standoff)
                        .with_z(aim.z);
                    self.spray_plan = match self.params.pattern {
                        SprayPattern::Cross => cross_pattern(
                            hover_center,
                            self.params.pattern_half_side,
                            forward.cross(Vec3::new(0.0, 0.0, 1.0)),
                        ),
                        SprayPattern::Hover => vec![hover_center],
                    };
                    self.spray_follower = WaypointFollower::default();
                    let pattern_len: f64 = self
                        .spray_plan
                        .windows(2)
                        .map(|w| (w[1] - w[0]).norm())
                        .sum();
                    let duration = (pattern_len / self.params.pattern_speed).max(4.0);
                    self.spray_hold_until = t + duration;
                }
                (Spray, WallFollow) | (Spray, RefillLand) => {
                    self.aim_point = None;
                    self.latest_blob = None;
                    self.last_thermal_t = 0.0;
                }
                (HoldGps, WallFollow) => {}
                (WallFollow, HoldGps) => {
                    self.machine.note(t, "re_request_autonomous_control", String::new());
                }
                _ => {}
            }
        }
        self.wall_event = WallEvent::None;

        match self.machine.state() {
            TakeOff => {
                let target = self.home.with_z(self.params.altitudes[0]);
                MissionCommand::flight(
                    (target - obs.nav).saturated(self.params.takeoff_rate),
                    0.0,
                    0.0,
                )
            }
            PreAlign => {
                let v = (self.prealign_point - obs.nav).saturated(self.params.follow.cruise_speed);
                let yaw_rate = if obs.nav.with_z(0.0).distance(self.prealign_point.with_z(0.0)) < 0.8
                {
                    1.2 * angle_diff(self.prealign_yaw, obs.yaw)
                } else {
                    0.0
                };
                MissionCommand::flight(v, yaw_rate, 0.0)
            }
            WallFollow => {
                let pose = Pose::new(obs.nav, obs.yaw);
                let altitude_target = self.current_altitude_target();
                let (cmd, event) = wall_follow_step(
                    &mut self.wall_state,
                    &self.params.wall,
                    obs.forward_range,
                    &pose,
                    altitude_target,
                    dt,
                );
                if event == WallEvent::WindowSkipped {
                    self.machine.note(t, "window_skipped", format!(
                        "wall={};traveled={:.1}", self.wall_state.wall_index, self.wall_state.traveled
                    ));
                }
                self.wall_event = event;
                MissionCommand::flight(cmd.velocity, cmd.yaw_rate, 0.0)
            }
            CornerTurn => {
                let pose = Pose::new(obs.nav, obs.yaw);
                let out = follow_waypoints(
                    &pose,
                    &self.turn_plan,
                    &mut self.turn_follower,
                    &self.params.follow,
                    HeadingPolicy::Fixed(self.turn_heading),
                );
                MissionCommand::flight(out.velocity, out.yaw_rate, 0.0)
            }
            CenterTarget => {
                // proportional gains on pixel error: lateral along the
                // wall and vertical; forward holds the standoff
                let (eu, ev) = center_err.unwrap_or((0.0, 0.0));
                let pose = Pose::new(obs.nav, obs.yaw);
                let lateral = -pose.left() * (self.params.center_gain * eu);
                let vertical = Vec3::new(0.0, 0.0, -self.params.center_gain * ev);
                let fwd_err = obs
                    .forward_range
                    .distance
                    .map(|d| d - self.params.wall.standoff)
                    .unwrap_or(0.0);
                let forward = pose.forward() * (0.5 * fwd_err).clamp(-0.3, 0.3);
                MissionCommand::flight(lateral + vertical + forward, 0.0, 0.0)
            }
            Approach => {
                // advance toward the believed (distant) target while
                // holding the centering -- the window-entry trajectory
                let (eu, ev) = center_err.unwrap_or((0.0, 0.0));
                let pose = Pose::new(obs.nav, obs.yaw);
                let lateral = -pose.left() * (self.params.center_gain * eu);
                let vertical = Vec3::new(0.0, 0.0, -self.params.center_gain * ev);
                let forward = pose.forward() * 0.4;
                MissionCommand::flight(lateral + vertical + forward, 0.0, 0.0)
            }
            Spray => {
                let pose = Pose::new(obs.nav, obs.yaw);
                let velocity = match self.params.pattern {
                    SprayPattern::Cross => {
                        let out = follow_waypoints(
                            &pose,
                            &self.spray_plan,
                            &mut self.spray_follower,
                            &FollowParams {
                                cruise_speed: self.params.pattern_speed,
                                capture_radius: 0.05,
                                ..self.params.follow.clone()
                            },
                            HeadingPolicy::Fixed(obs.yaw),
                        );
                        out.velocity
                    }
                    SprayPattern::Hover => self
                        .spray_plan
                        .first()
                        .map(|p| (*p - obs.nav).saturated(self.params.pattern_speed))
                        .unwrap_or(Vec3::ZERO),
                };
                let mut c = MissionCommand::flight(velocity, 0.0, 0.0);
                c.pump_on = !self.pump.empty() && !self.pump.stopper_stuck;
                c
            }
            RefillLand => {
                let over_site = obs.nav.with_z(0.0).distance(self.refill_site.with_z(0.0)) < 0.5;
                let cmd = if over_site {
                    vertical_to(-obs.altitude, self.params.landing_rate)
                } else {
                    (self.refill_site.with_z(obs.nav.z) - obs.nav)
                        .saturated(self.params.follow.cruise_speed)
                };
                if on_ground && self.pump.remaining_ml < self.params.pump.capacity_ml {
                    self.pump.refill(&self.params.pump);
                    self.machine.note(t, "water_refilled", String::new());
                }
                MissionCommand::flight(cmd, 0.0, 0.0)
            }
            HoldGps => MissionCommand::hover(),
            Land => MissionCommand::flight(
                vertical_to(-obs.altitude, self.params.landing_rate),
                0.0,
                0.0,
            ),
            Done => MissionCommand::hover(),
        }
    }

    /// Nozzle pose for the harness spray integration.
    pub fn nozzle(&self, pose: &Pose, params: &PumpParams) -> (Vec3, Vec3) {
        let dir = pose.forward();
        (pose.position + dir * params.nozzle_forward, dir)
    }

    /// Pixel centroid of the tracked blob, for trace export.
    pub fn tracked_centroid(&self) -> Option<PixelPoint> {
        self.latest_blob.as_ref().map(|b| b.centroid)
    }

    pub fn thermal_threshold(&self) -> u16 {
        self.params.thermal_threshold
    }

    pub fn min_blob_area(&self) -> usize {
        self.params.min_blob_area
    }

    /// Camera pose used for thermal sensing: level, forward-facing.
    pub fn thermal_camera(&self, pose: &Pose) -> CameraPose {
        CameraPose::actual(pose, 0.0)
    }
}
