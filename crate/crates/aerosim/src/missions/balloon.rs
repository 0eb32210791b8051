//! Balloon-popping mission: lawnmower global search, LOS positioning
//! and pursuit, and the detect-attempt-recover-re-detect cycle that
//! flies up, back, and down to the original search point after a
//! pursuit times out.

use super::{vertical_to, MissionCommand, Observations};
use crate::fsm::{Event, Machine, Transition};
use crate::guidance::{
    follow_waypoints, los_vector, position_target_in_image, pursue_along_los, FollowParams,
    HeadingPolicy, LosVector, PursuitParams, WaypointFollower,
};
use crate::math::Vec3;
use crate::scenario::Scenario;
use crate::search::lawnmower_plan;
use crate::sensing::{largest_of_class, CameraIntrinsics, CameraPose, DetectionClass};
use crate::world::Pose;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalloonState {
    TakeOff,
    GlobalSearch,
    PositionTarget,
    PursueTarget,
    Recover,
    Land,
    Done,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalloonParams {
    pub pursuit: PursuitParams,
    pub follow: FollowParams,
    pub takeoff_rate: f64,
    pub landing_rate: f64,
    /// Climb used by the up-back-down recovery flight.
    pub recovery_climb: f64,
}

impl Default for BalloonParams {
    fn default() -> Self {
        BalloonParams {
            pursuit: PursuitParams::default(),
            follow: FollowParams::default(),
            takeoff_rate: 1.0,
            landing_rate: 1.0,
            recovery_climb: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BalloonMission {
    machine: Machine<BalloonState>,
    params: BalloonParams,
    intrinsics: CameraIntrinsics,
    recovery_enabled: bool,
    plan: Vec<Vec3>,
    follower: WaypointFollower,
    search_altitude: f64,
    home: Vec3,
    /// Search point (position, waypoint index) saved at target detection.
    resume: Option<(Vec3, usize)>,
    recovery_plan: Vec<Vec3>,
    recovery_follower: WaypointFollower,
    /// World-frame pursuit command locked at pursuit entry.
    locked_pursuit: Option<Vec3>,
    last_detection_t: f64,
}

fn transitions(recovery_enabled: bool) -> Vec<Transition<BalloonState>> {
    use BalloonState::*;
    let mut t = vec![
        // the mission clock dominates every other guard
        Transition::new(TakeOff, Land, "clock_expired", 0),
        Transition::new(GlobalSearch, Land, "clock_expired", 0),
        Transition::new(PositionTarget, Land, "clock_expired", 0),
        Transition::new(PursueTarget, Land, "clock_expired", 0),
        Transition::new(Recover, Land, "clock_expired", 0),
        Transition::new(TakeOff, GlobalSearch, "takeoff_complete", 10),
        Transition::new(GlobalSearch, PositionTarget, "valid_target_detected", 10),
        Transition::new(PositionTarget, GlobalSearch, "detection_timeout", 5),
        Transition::new(PositionTarget, PursueTarget, "los_converged", 10),
        Transition::new(PursueTarget, PositionTarget, "los_timeout_retarget", 5),
        Transition::new(Land, Done, "landed", 10),
    ];
    if recovery_enabled {
        t.push(Transition::new(PursueTarget, Recover, "target_detection_timeout", 10));
        t.push(Transition::new(Recover, GlobalSearch, "recovered", 10));
    } else {
        // baseline machine: the pursuit timeout resumes the plan in
        // place, with no return flight
        t.push(Transition::new(PursueTarget, GlobalSearch, "target_detection_timeout", 10));
        t.push(Transition::new(Recover, GlobalSearch, "recovered", 10));
    }
    t
}

impl BalloonMission {
    pub fn new(scenario: &Scenario) -> Self {
        let params = scenario.balloon_mission.clone();
        let recovery_enabled = scenario.faults.recovery_enabled;
        let plan = lawnmower_plan(&scenario.arena).waypoints;
        let mut follow = params.follow.clone();
        follow.cruise_speed = scenario.arena.speed;
        BalloonMission {
            machine: Machine::new(
                "balloon",
                BalloonState::TakeOff,
                transitions(recovery_enabled),
                &[BalloonState::Done],
            ),
            params: BalloonParams { follow, ..params },
            intrinsics: scenario.camera.clone(),
            recovery_enabled,
            plan,
            follower: WaypointFollower::default(),
            search_altitude: scenario.arena.altitude,
            home: scenario.uav_start.position,
            resume: None,
            recovery_plan: Vec::new(),
            recovery_follower: WaypointFollower::default(),
            locked_pursuit: None,
            last_detection_t: 0.0,
        }
    }

    pub fn state(&self) -> BalloonState {
        self.machine.state()
    }

    pub fn done(&self) -> bool {
        self.machine.state() == BalloonState::Done
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        self.machine.drain_events()
    }

    pub fn note(&mut self, now: f64, kind: &str, details: String) {
        self.machine.note(now, kind, details);
    }

    pub fn abort(&mut self, now: f64, reason: &'static str, details: String) {
        self.machine.force(now, BalloonState::Done, reason, details);
    }

    pub fn to_dot(&self) -> String {
        self.machine.to_dot()
    }

    pub fn tick(&mut self, obs: &Observations, _dt: f64) -> MissionCommand {
        use BalloonState::*;
        let detection = largest_of_class(obs.detections, DetectionClass::Balloon);
        if detection.is_some() {
            self.last_detection_t = obs.t;
        }
        let los: Option<LosVector> =
            detection.map(|d| los_vector(&self.intrinsics, d.centroid));
        let converged = los
            .map(|l| position_target_in_image(&l, &self.intrinsics, &self.params.pursuit).1)
            .unwrap_or(false);
        let t = obs.t;
        let state = self.machine.state();
        let pursuit = &self.params.pursuit;
        let out_of_time = obs.clock_remaining <= 0.0 || obs.battery_remaining <= 0.0;
        let since_detection = t - self.last_detection_t;
        let time_in_state = self.machine.time_in_state(t);
        let recovery_done = self.recovery_follower.index >= self.recovery_plan.len();

        let fired = self.machine.tick(t, |guard| match guard {
            "clock_expired" => out_of_time,
            "takeoff_complete" => obs.altitude >= self.search_altitude - 0.15,
            "valid_target_detected" => detection.is_some(),
            "detection_timeout" => since_detection > pursuit.detection_timeout,
            "los_converged" => converged,
            "los_timeout_retarget" => {
                time_in_state > pursuit.los_timeout && detection.is_some()
            }
            "target_detection_timeout" => since_detection > pursuit.detection_timeout,
            "recovered" => recovery_done,
            "landed" => obs.altitude <= 0.08,
            _ => false,
        });

        // entry actions
        if let Some(next) = fired {
            match (state, next) {
                (GlobalSearch, PositionTarget) => {
                    self.resume = Some((obs.nav.with_z(self.search_altitude), self.follower.index));
                    self.last_detection_t = t;
                }
                (PositionTarget, PursueTarget) => {
                    let cam = CameraPose::nominal(&self.nav_pose(obs), 0.0);
                    if let Some(l) = los {
                        self.locked_pursuit = Some(pursue_along_los(&l, &cam, pursuit));
                    }
                }
                (PursueTarget, Recover) => {
                    let (point, index) = self
                        .resume
                        .unwrap_or((obs.nav.with_z(self.search_altitude), self.follower.index));
                    let here = obs.nav;
                    let up = here.with_z(here.z + self.params.recovery_climb);
                    let back = point.with_z(here.z + self.params.recovery_climb);
                    self.recovery_plan = vec![up, back, point];
                    self.recovery_follower = WaypointFollower::default();
                    self.follower.index = index;
                }
                (Recover, GlobalSearch) | (PursueTarget, GlobalSearch) => {
                    // resume the plan; the follower index was preserved
                }
                _ => {}
            }
        }

        match self.machine.state() {
            TakeOff => {
                let target = self.home.with_z(self.search_altitude);
                MissionCommand::flight(
                    (target - obs.nav).saturated(self.params.takeoff_rate),
                    0.0,
                    0.0,
                )
            }
            GlobalSearch => {
                if self.follower.index >= self.plan.len() {
                    // repeat the scan until the clock runs out
                    self.follower = WaypointFollower::default();
                    self.machine.note(t, "search_wrapped", String::new());
                }
                let pose = self.nav_pose(obs);
                let out = follow_waypoints(
                    &pose,
                    &self.plan,
                    &mut self.follower,
                    &self.params.follow,
                    HeadingPolicy::PathTangent,
                );
                MissionCommand::flight(out.velocity, out.yaw_rate, 0.0)
            }
            PositionTarget => {
                let cmd = match los {
                    Some(l) => {
                        let (cam_cmd, _) =
                            position_target_in_image(&l, &self.intrinsics, pursuit);
                        let cam = CameraPose::nominal(&self.nav_pose(obs), 0.0);
                        cam.camera_to_world_dir(cam_cmd)
                    }
                    None => Vec3::ZERO,
                };
                MissionCommand::flight(cmd, 0.0, 0.0)
            }
            PursueTarget => {
                let cmd = self.locked_pursuit.unwrap_or(Vec3::ZERO);
                MissionCommand::flight(cmd, 0.0, 0.0)
            }
            Recover => {
                let pose = self.nav_pose(obs);
                let out = follow_waypoints(
                    &pose,
                    &self.recovery_plan,
                    &mut self.recovery_follower,
                    &self.params.follow,
                    HeadingPolicy::PathTangent,
                );
                MissionCommand::flight(out.velocity, out.yaw_rate, 0.0)
            }
            Land => MissionCommand::flight(vertical_to(-obs.altitude, self.params.landing_rate), 0.0, 0.0),
            Done => MissionCommand::hover(),
        }
    }

    fn nav_pose(&self, obs: &Observations) -> Pose {
        Pose::new(obs.nav, obs.yaw)
    }

    pub fn recovery_enabled(&self) -> bool {
        self.recovery_enabled
    }
}
