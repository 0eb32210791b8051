//! Block pick-and-place mission: Gaussian-resampled search over the
//! pickup site, IBVS descent over the patch corners, the open-loop
//! final descent with its pickup checks (short-range attach check,
//! altimeter descent-overrun check), recovery to 2.5 m for re-attempts,
//! and corner-pair placement servoing with the goal shifted one block
//! width after each placed block.

use super::{vertical_to, MissionCommand, Observations};
use crate::fsm::{Event, Machine, Transition};
use crate::math::{angle_diff, Vec3};
use crate::scenario::Scenario;
use crate::search::{gaussian_resample, ArenaSpec};
use crate::sensing::{largest_of_class, CameraIntrinsics, CameraPose, DetectionClass, PixelPoint, Projection};
use crate::servo::{feature_error, ibvs_velocity, servo_converged, NormalizedFeature, ServoError};
use crate::world::{BlockColor, Pose, StructureSpec};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickPlaceState {
    TakeOff,
    SearchBlocks,
    ServoDescend,
    OpenLoopDescend,
    AscendCheck,
    Recover,
    TransitToStructure,
    SearchStructure,
    ServoPlace,
    DescendPlace,
    Release,
    TransitToBlocks,
    Land,
    Done,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PickPlaceParams {
    pub desired_color: BlockColor,
    /// Search altitudes over the pickup and placement sites.
    pub pickup_search_altitude: f64,
    pub placement_search_altitude: f64,
    /// IBVS gain and convergence tolerance.
    pub lambda: f64,
    pub tol_px: f64,
    /// Weight on the solved yaw rate.
    pub yaw_weight: f64,
    /// Camera depth at which the open-loop descent begins (manipulator
    /// base 0.7 m above the block top).
    pub open_loop_start_depth: f64,
    pub open_loop_rate: f64,
    /// Short-range reading below this counts as block contact.
    pub attach_threshold: f64,
    /// Altimeter reading at expected contact minus this margin trips the
    /// descent-overrun monitor.
    pub overrun_margin: f64,
    /// Recovery height above the last-seen block.
    pub recovery_height: f64,
    /// Gaussian search re-sample sigma.
    pub resample_sigma: f64,
    /// Seconds without corners before the track is declared lost.
    pub track_loss_timeout: f64,
    /// Seconds to wait at a search point before re-sampling.
    pub search_wait: f64,
    pub cruise_speed: f64,
    pub descend_rate: f64,
    pub takeoff_rate: f64,
    pub landing_rate: f64,
    /// Height of the release point above the structure top.
    pub release_height: f64,
    /// Maximum pickup attempts before giving up on the mission.
    pub max_attempts: u32,
}

impl Default for PickPlaceParams {
    fn default() -> Self {
        PickPlaceParams {
            desired_color: BlockColor::Red,
            pickup_search_altitude: 3.5,
            placement_search_altitude: 6.0,
            lambda: 0.8,
            tol_px: 8.0,
            yaw_weight: 1.0,
            open_loop_start_depth: 1.05,
            open_loop_rate: 0.4,
            attach_threshold: 0.02,
            overrun_margin: 0.15,
            recovery_height: 2.5,
            resample_sigma: 2.0,
            track_loss_timeout: 1.0,
            search_wait: 2.0,
            cruise_speed: 2.0,
            descend_rate: 0.5,
            takeoff_rate: 1.0,
            landing_rate: 1.0,
            release_height: 0.15,
            max_attempts: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PickPlaceMission {
    machine: Machine<PickPlaceState>,
    params: PickPlaceParams,
    intrinsics: CameraIntrinsics,
    arena: ArenaSpec,
    structure: StructureSpec,
    block_height: f64,
    block_length: f64,
    patch_dims: (f64, f64),
    manipulator_length: f64,
    pickup_site: Vec3,
    placement_site: Vec3,
    search_target: Vec3,
    home: Vec3,
    last_corner_t: f64,
    last_block_estimate: Option<Vec3>,
    attempt: u32,
    placed_count: u32,
    carrying: bool,
    /// Fresh IBVS solution computed this tick.
    servo_cmd: Option<(Vec3, f64, bool)>,
    place_cmd: Option<(Vec3, f64, bool)>,
    approach_yaw: f64,
}

fn transitions() -> Vec<Transition<PickPlaceState>> {
    use PickPlaceState::*;
    vec![
        Transition::new(TakeOff, Land, "clock_expired", 0),
        Transition::new(SearchBlocks, Land, "clock_expired", 0),
        Transition::new(ServoDescend, Land, "clock_expired", 0),
        Transition::new(OpenLoopDescend, Land, "clock_expired", 0),
        Transition::new(AscendCheck, Land, "clock_expired", 0),
        Transition::new(Recover, Land, "clock_expired", 0),
        Transition::new(TransitToStructure, Land, "clock_expired", 0),
        Transition::new(SearchStructure, Land, "clock_expired", 0),
        Transition::new(ServoPlace, Land, "clock_expired", 0),
        Transition::new(DescendPlace, Land, "clock_expired", 0),
        Transition::new(Release, Land, "clock_expired", 0),
        Transition::new(TransitToBlocks, Land, "clock_expired", 0),
        Transition::new(TakeOff, SearchBlocks, "takeoff_complete", 10),
        Transition::new(SearchBlocks, ServoDescend, "block_acquired", 10),
        Transition::new(ServoDescend, OpenLoopDescend, "servo_converged", 10),
        Transition::new(ServoDescend, Recover, "corner_track_lost", 20),
        Transition::new(OpenLoopDescend, AscendCheck, "block_contact", 10),
        Transition::new(OpenLoopDescend, Recover, "descent_overrun", 20),
        Transition::new(AscendCheck, TransitToStructure, "pickup_verified", 10),
        Transition::new(AscendCheck, Recover, "attach_check_failed", 20),
        Transition::new(Recover, ServoDescend, "vision_reacquired", 10),
        Transition::new(Recover, SearchBlocks, "block_lost_restart", 20),
        Transition::new(Recover, Land, "attempts_exhausted", 5),
        Transition::new(TransitToStructure, SearchStructure, "transit_complete", 10),
        Transition::new(SearchStructure, ServoPlace, "structure_acquired", 10),
        Transition::new(ServoPlace, DescendPlace, "place_servo_converged", 10),
        Transition::new(ServoPlace, Recover, "structure_track_lost", 20),
        Transition::new(DescendPlace, Release, "release_height_reached", 10),
        Transition::new(Release, TransitToBlocks, "block_released", 10),
        Transition::new(TransitToBlocks, SearchBlocks, "transit_complete", 10),
        Transition::new(Land, Done, "landed", 10),
    ]
}

impl PickPlaceMission {
    pub fn new(scenario: &Scenario) -> Self {
        let params = scenario.pickplace_mission.clone();
        let structure = scenario.targets.structure.clone().expect("pick_place needs a structure");
        let block = scenario.targets.blocks.first().expect("pick_place needs blocks");
        let blocks_center = scenario
            .targets
            .blocks
            .iter()
            .fold(Vec3::ZERO, |acc, b| acc + b.position)
            / scenario.targets.blocks.len() as f64;
        let pickup_site = blocks_center.with_z(params.pickup_search_altitude);
        let (side_a, side_b) = structure.target_side_top();
        let side_mid = (side_a + side_b) / 2.0;
        let placement_site = side_mid.with_z(params.placement_search_altitude);
        let approach_yaw = {
            let dir = side_b - side_a;
            dir.y.atan2(dir.x)
        };
        PickPlaceMission {
            machine: Machine::new(
                "pick_place",
                PickPlaceState::TakeOff,
                transitions(),
                &[PickPlaceState::Done],
            ),
            params,
            intrinsics: scenario.camera.clone(),
            arena: scenario.arena.clone(),
            structure,
            block_height: block.dims.2,
            block_length: block.dims.0,
            patch_dims: block.patch,
            manipulator_length: scenario.uav.manipulator_length,
            pickup_site,
            placement_site,
            search_target: pickup_site,
            home: scenario.uav_start.position,
            last_corner_t: 0.0,
            last_block_estimate: None,
            attempt: 1,
            placed_count: 0,
            carrying: false,
            servo_cmd: None,
            place_cmd: None,
            approach_yaw,
        }
    }

    pub fn state(&self) -> PickPlaceState {
        self.machine.state()
    }

    pub fn done(&self) -> bool {
        self.machine.state() == PickPlaceState::Done
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        self.machine.drain_events()
    }

    pub fn note(&mut self, now: f64, kind: &str, details: String) {
        self.machine.note(now, kind, details);
    }

    pub fn abort(&mut self, now: f64, reason: &'static str, details: String) {
        self.machine.force(now, PickPlaceState::Done, reason, details);
    }

    pub fn to_dot(&self) -> String {
        self.machine.to_dot()
    }

    pub fn attempt(&self) -> u32 {
        self.attempt
    }

    pub fn placed_count(&self) -> u32 {
        self.placed_count
    }

    /// Camera depth estimate to the block patch plane.
    fn patch_depth(&self, obs: &Observations) -> f64 {
        (obs.altitude - self.block_height).max(0.3)
    }

    /// IBVS over the four observed patch corners. Goals are the observed
    /// rectangle recentered on the principal point and rescaled to the
    /// open-loop start depth, so the solution translates, descends, and
    /// keeps yaw free.
    fn solve_block_servo(&self, obs: &Observations) -> Option<(Vec3, f64, bool)> {
        let corners = obs.corners?.block_patch?;
        let depth = self.patch_depth(obs);
        let features: Vec<NormalizedFeature> = corners
            .iter()
            .map(|p| NormalizedFeature::from_pixel(&self.intrinsics, *p, depth))
            .collect();
        let centroid_x = features.iter().map(|f| f.x).sum::<f64>() / 4.0;
        let centroid_y = features.iter().map(|f| f.y).sum::<f64>() / 4.0;
        // observed size vs the size expected at the handoff depth
        let observed_diag = ((features[0].x - features[2].x).powi(2)
            + (features[0].y - features[2].y).powi(2))
        .sqrt();
        let desired_diag = (self.patch_dims.0.powi(2) + self.patch_dims.1.powi(2)).sqrt()
            / self.params.open_loop_start_depth;
        let scale = if observed_diag > 1e-9 { desired_diag / observed_diag } else { 1.0 };
        let goals: Vec<(f64, f64)> = features
            .iter()
            .map(|f| ((f.x - centroid_x) * scale, (f.y - centroid_y) * scale))
            .collect();
        match ibvs_velocity(&features, &goals, self.params.lambda) {
            Ok(twist) => {
                let e = feature_error(&features, &goals).ok()?;
                let converged = servo_converged(&e, self.params.tol_px, &self.intrinsics);
                let cam = CameraPose::nominal(
                    &Pose::new(obs.nav, obs.yaw),
                    std::f64::consts::FRAC_PI_2,
                );
                let (v, yaw_rate) = twist.to_world(&cam);
                Some((v, yaw_rate * self.params.yaw_weight, converged))
            }
            Err(ServoError::Degenerate) => None,
            Err(_) => None,
        }
    }

    /// Placement goal on the structure top: one block width further
    /// along the side per placed block.
    fn placement_goal(&self) -> Vec3 {
        let (a, b) = self.structure.target_side_top();
        let dir = (b - a).normalized();
        a + dir * (self.block_length * (self.placed_count as f64 + 0.5))
    }

    /// Two-corner IBVS toward the pose that puts the hanging block over
    /// the placement goal. Goal pixels are computed by projecting the
    /// side corners from that desired camera pose.
    fn solve_place_servo(&self, obs: &Observations) -> Option<(Vec3, f64, bool)> {
        let (left, right) = obs.corners?.structure_pair?;
        let top_z = self.structure.center.z + self.structure.height;
        let depth = (obs.altitude - self.structure.height).max(0.5);
        let features = vec![
            NormalizedFeature::from_pixel(&self.intrinsics, left, depth),
            NormalizedFeature::from_pixel(&self.intrinsics, right, depth),
        ];
        // desired camera: straight down over the goal at the current
        // altitude, aligned with the side
        let goal = self.placement_goal();
        let desired_pose = Pose::new(goal.with_z(top_z + depth), self.approach_yaw);
        let cam_des = CameraPose::nominal(&desired_pose, std::f64::consts::FRAC_PI_2);
        let (a, b) = self.structure.target_side_top();
        let goals: Vec<(f64, f64)> = [a, b]
            .iter()
            .map(|p| match crate::sensing::project(&self.intrinsics, &cam_des, *p) {
                Projection::Pixel(px) => {
                    ((px.u - self.intrinsics.cx) / self.intrinsics.fx,
                     (px.v - self.intrinsics.cy) / self.intrinsics.fy)
                }
                Projection::Behind => (0.0, 0.0),
            })
            .collect();
        match ibvs_velocity(&features, &goals, self.params.lambda) {
            Ok(twist) => {
                let e = feature_error(&features, &goals).ok()?;
                let converged = servo_converged(&e, self.params.tol_px, &self.intrinsics);
                let cam = CameraPose::nominal(
                    &Pose::new(obs.nav, obs.yaw),
                    std::f64::consts::FRAC_PI_2,
                );
                let (v, yaw_rate) = twist.to_world(&cam);
                Some((v, yaw_rate * self.params.yaw_weight, converged))
            }
            Err(_) => None,
        }
    }

    /// World estimate of the observed block from the corner centroid.
    fn estimate_block_position(&self, obs: &Observations, corners: &[PixelPoint; 4]) -> Vec3 {
        let cu = corners.iter().map(|c| c.u).sum::<f64>() / 4.0;
        let cv = corners.iter().map(|c| c.v).sum::<f64>() / 4.0;
        let depth = self.patch_depth(obs);
        let cam = CameraPose::nominal(&Pose::new(obs.nav, obs.yaw), std::f64::consts::FRAC_PI_2);
        let ray = crate::guidance::los_vector(&self.intrinsics, PixelPoint::new(cu, cv));
        obs.nav + cam.camera_to_world_dir(ray.r) * depth
    }

    pub fn tick(&mut self, obs: &Observations, rng: &mut ChaCha8Rng, _dt: f64) -> MissionCommand {
        use PickPlaceState::*;
        let t = obs.t;
        let out_of_time = obs.clock_remaining <= 0.0 || obs.battery_remaining <= 0.0;

        if let Some(c) = obs.corners {
            if let Some(corners) = &c.block_patch {
                self.last_corner_t = t;
                self.last_block_estimate = Some(self.estimate_block_position(obs, corners));
            }
            if c.structure_pair.is_some() {
                self.last_corner_t = t;
            }
        }
        let state = self.machine.state();
        // recompute on fresh corners, hold the last solution between
        // vision frames, drop it when the track goes stale
        let fresh_block = obs.corners.map(|c| c.block_patch.is_some()).unwrap_or(false);
        let fresh_structure = obs.corners.map(|c| c.structure_pair.is_some()).unwrap_or(false);
        match state {
            ServoDescend | Recover | SearchBlocks => {
                if fresh_block {
                    self.servo_cmd = self.solve_block_servo(obs);
                } else if t - self.last_corner_t > self.params.track_loss_timeout {
                    self.servo_cmd = None;
                }
            }
            _ => self.servo_cmd = None,
        }
        match state {
            ServoPlace | SearchStructure | DescendPlace => {
                if fresh_structure {
                    self.place_cmd = self.solve_place_servo(obs);
                } else if t - self.last_corner_t > self.params.track_loss_timeout {
                    self.place_cmd = None;
                }
            }
            _ => self.place_cmd = None,
        }

        let desired_class = DetectionClass::for_block(self.params.desired_color);
        let block_visible = largest_of_class(obs.detections, desired_class).is_some()
            && self.servo_cmd.is_some();
        let structure_visible = self.place_cmd.is_some();
        let expected_contact_alt = self.manipulator_length;
        let corners_stale = t - self.last_corner_t > self.params.track_loss_timeout;
        let at_search_point = obs.nav.with_z(0.0).distance(self.search_target.with_z(0.0)) < 1.0
            && (obs.altitude - self.search_target.z).abs() < 0.4;
        let time_in_state = self.machine.time_in_state(t);
        let servo_converged_now = self.servo_cmd.map(|s| s.2).unwrap_or(false);
        let place_converged_now = self.place_cmd.map(|s| s.2).unwrap_or(false);
        let short = obs.short_range;
        let attempts_left = self.attempt < self.params.max_attempts;
        // altitude (over ground) that leaves the hanging block's bottom
        // release_height above the structure top
        let release_alt = self.structure.center.z
            + self.structure.height
            + self.params.release_height
            + self.manipulator_length
            + self.block_height;
        let at_transit_target = match state {
            TransitToStructure => obs.nav.with_z(0.0).distance(self.placement_site.with_z(0.0)) < 1.0
                && (obs.altitude - self.placement_site.z).abs() < 0.4,
            TransitToBlocks => obs.nav.with_z(0.0).distance(self.pickup_site.with_z(0.0)) < 1.0
                && (obs.altitude - self.pickup_site.z).abs() < 0.4,
            _ => false,
        };

        let fired = self.machine.tick(t, |guard| match guard {
            "clock_expired" => out_of_time,
            "takeoff_complete" => obs.altitude >= self.params.pickup_search_altitude - 0.2,
            "block_acquired" => block_visible,
            "servo_converged" => servo_converged_now,
            "corner_track_lost" => corners_stale,
            "block_contact" => short.distance.map(|d| d < self.params.attach_threshold).unwrap_or(false),
            "descent_overrun" => obs.altitude < expected_contact_alt - self.params.overrun_margin,
            "pickup_verified" => {
                obs.altitude >= self.params.recovery_height - 0.2
                    && short.distance.map(|d| d < self.params.attach_threshold).unwrap_or(false)
            }
            "attach_check_failed" => {
                obs.altitude >= self.params.recovery_height - 0.2
                    && !short.distance.map(|d| d < self.params.attach_threshold).unwrap_or(false)
            }
            "vision_reacquired" => {
                obs.altitude >= self.params.recovery_height - 0.3 && self.servo_cmd.is_some()
            }
            "block_lost_restart" => {
                obs.altitude >= self.params.recovery_height - 0.3
                    && time_in_state > self.params.search_wait
            }
            "attempts_exhausted" => !attempts_left,
            "transit_complete" => at_transit_target,
            "structure_acquired" => structure_visible,
            "place_servo_converged" => place_converged_now,
            "structure_track_lost" => corners_stale,
            "release_height_reached" => obs.altitude <= release_alt + 0.05,
            "released" | "block_released" => true,
            "landed" => obs.altitude <= 0.08,
            _ => false,
        });

        if let Some(next) = fired {
            match (state, next) {
                (AscendCheck, Recover) | (OpenLoopDescend, Recover) | (ServoDescend, Recover) => {
                    self.attempt += 1;
                }
                (AscendCheck, TransitToStructure) => {
                    self.carrying = true;
                }
                (Release, TransitToBlocks) => {
                    self.carrying = false;
                    self.placed_count += 1;
                    self.attempt = 1;
                    self.search_target = self.pickup_site;
                }
                (SearchBlocks, ServoDescend) => {
                    self.last_corner_t = t;
                }
                _ => {}
            }
        }

        let pitch = std::f64::consts::FRAC_PI_2;
        let mut cmd = match self.machine.state() {
            TakeOff => {
                let target = self.home.with_z(self.params.pickup_search_altitude);
                MissionCommand::flight(
                    (target - obs.nav).saturated(self.params.takeoff_rate),
                    0.0,
                    pitch,
                )
            }
            SearchBlocks => {
                if at_search_point && time_in_state > self.params.search_wait {
                    self.search_target =
                        gaussian_resample(self.pickup_site, self.params.resample_sigma, &self.arena, rng)
                            .with_z(self.params.pickup_search_altitude);
                    self.machine.note(t, "search_resample", format!(
                        "x={:.2};y={:.2}", self.search_target.x, self.search_target.y
                    ));
                }
                let v = (self.search_target - obs.nav).saturated(self.params.cruise_speed);
                MissionCommand::flight(v, 0.0, pitch)
            }
            ServoDescend => {
                let (v, yaw_rate, _) = self.servo_cmd.unwrap_or((Vec3::ZERO, 0.0, false));
                MissionCommand::flight(v.saturated(1.5), yaw_rate, pitch)
            }
            OpenLoopDescend => {
                let mut c = MissionCommand::flight(
                    Vec3::new(0.0, 0.0, -self.params.open_loop_rate),
                    0.0,
                    pitch,
                );
                c.open_loop = true;
                c.magnet_on = true;
                c
            }
            AscendCheck => {
                let mut c = MissionCommand::flight(
                    vertical_to(self.params.recovery_height - obs.altitude, 0.8),
                    0.0,
                    pitch,
                );
                c.magnet_on = true;
                c
            }
            Recover => {
                let target = self
                    .last_block_estimate
                    .unwrap_or(self.pickup_site)
                    .with_z(self.params.recovery_height);
                let v = (target - obs.nav).saturated(self.params.cruise_speed);
                MissionCommand::flight(v, 0.0, pitch)
            }
            TransitToStructure => {
                let mut c = MissionCommand::flight(
                    (self.placement_site - obs.nav).saturated(self.params.cruise_speed),
                    0.5 * angle_diff(self.approach_yaw, obs.yaw),
                    pitch,
                );
                c.magnet_on = true;
                c
            }
            SearchStructure => {
                let mut c = MissionCommand::flight(
                    (self.placement_site - obs.nav).saturated(self.params.cruise_speed),
                    0.5 * angle_diff(self.approach_yaw, obs.yaw),
                    pitch,
                );
                c.magnet_on = true;
                c
            }
            ServoPlace => {
                let (v, yaw_rate, _) = self.place_cmd.unwrap_or((Vec3::ZERO, 0.0, false));
                let mut c = MissionCommand::flight(v.saturated(1.2), yaw_rate, pitch);
                c.magnet_on = true;
                c
            }
            DescendPlace => {
                let (v, yaw_rate, _) = self.place_cmd.unwrap_or((Vec3::ZERO, 0.0, false));
                let lateral = v.with_z(0.0).saturated(0.6);
                let mut c = MissionCommand::flight(
                    lateral + Vec3::new(0.0, 0.0, -self.params.descend_rate),
                    yaw_rate,
                    pitch,
                );
                c.magnet_on = true;
                c
            }
            Release => {
                let mut c = MissionCommand::hover();
                c.gimbal_pitch = pitch;
                c.release_block = true;
                c
            }
            TransitToBlocks => {
                let v = (self.pickup_site - obs.nav).saturated(self.params.cruise_speed);
                MissionCommand::flight(v, 0.0, pitch)
            }
            Land => MissionCommand::flight(
                vertical_to(-obs.altitude, self.params.landing_rate),
                0.0,
                pitch,
            ),
            Done => MissionCommand::hover(),
        };
        if self.carrying {
            cmd.magnet_on = true;
        }
        cmd
    }
}
