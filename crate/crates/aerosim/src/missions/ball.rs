//! Ball-catching mission: square-loiter global search facing the
//! figure-8, then the position-refinement loop -- LOS servoing on each
//! pass, waiting in place between passes, reverting to the global plan
//! after roughly two path periods without a detection. The UAV lands
//! only on mission timeout; a catch is recorded but does not change the
//! flow.

use super::{vertical_to, MissionCommand, Observations};
use crate::fsm::{Event, Machine, Transition};
use crate::guidance::{
    ball_refine, follow_waypoints, los_vector, FollowParams, HeadingPolicy, PursuitParams,
    WaypointFollower,
};
use crate::math::Vec3;
use crate::scenario::Scenario;
use crate::search::{loiter_heading, square_loiter_plan};
use crate::sensing::{largest_of_class, CameraIntrinsics, CameraPose, DetectionClass};
use crate::world::{BallPath, Pose};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallState {
    TakeOff,
    GlobalSearch,
    LosServo,
    WaitInPlace,
    Land,
    Done,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallParams {
    pub pursuit: PursuitParams,
    pub follow: FollowParams,
    /// Loiter altitudes; both higher than the balloons.
    pub altitudes: Vec<f64>,
    /// Grace period without a detection before the pass is considered
    /// over and the UAV waits in place.
    pub out_of_view_grace: f64,
    /// Wait timeout in ball-path periods (approximately two periods).
    pub wait_timeout_periods: f64,
    pub takeoff_rate: f64,
    pub landing_rate: f64,
}

impl Default for BallParams {
    fn default() -> Self {
        BallParams {
            pursuit: PursuitParams { k_u: 3.0, k_v: 3.0, ..PursuitParams::default() },
            follow: FollowParams::default(),
            altitudes: vec![10.0, 12.0],
            out_of_view_grace: 0.4,
            wait_timeout_periods: 2.0,
            takeoff_rate: 1.5,
            landing_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BallMission {
    machine: Machine<BallState>,
    params: BallParams,
    intrinsics: CameraIntrinsics,
    plan: Vec<Vec3>,
    follower: WaypointFollower,
    heading: f64,
    wait_timeout: f64,
    home: Vec3,
    last_detection_t: f64,
    pass_index: u32,
}

fn transitions() -> Vec<Transition<BallState>> {
    use BallState::*;
    vec![
        Transition::new(TakeOff, Land, "clock_expired", 0),
        Transition::new(GlobalSearch, Land, "clock_expired", 0),
        Transition::new(LosServo, Land, "clock_expired", 0),
        Transition::new(WaitInPlace, Land, "clock_expired", 0),
        Transition::new(TakeOff, GlobalSearch, "takeoff_complete", 10),
        Transition::new(GlobalSearch, LosServo, "ball_detected", 10),
        Transition::new(LosServo, WaitInPlace, "ball_out_of_view", 10),
        Transition::new(WaitInPlace, LosServo, "ball_redetected", 5),
        Transition::new(WaitInPlace, GlobalSearch, "wait_timeout", 10),
        Transition::new(Land, Done, "landed", 10),
    ]
}

impl BallMission {
    pub fn new(scenario: &Scenario) -> Self {
        let params = scenario.ball_mission.clone();
        let plan = square_loiter_plan(&scenario.arena, &params.altitudes);
        let heading = loiter_heading(&scenario.arena);
        let period = scenario
            .targets
            .ball
            .as_ref()
            .map(|b| BallPath::new(b).period())
            .unwrap_or(15.0);
        let wait_timeout = params.wait_timeout_periods * period;
        BallMission {
            machine: Machine::new("ball", BallState::TakeOff, transitions(), &[BallState::Done]),
            params,
            intrinsics: scenario.camera.clone(),
            plan,
            follower: WaypointFollower::default(),
            heading,
            wait_timeout,
            home: scenario.uav_start.position,
            last_detection_t: 0.0,
            pass_index: 0,
        }
    }

    pub fn state(&self) -> BallState {
        self.machine.state()
    }

    pub fn done(&self) -> bool {
        self.machine.state() == BallState::Done
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        self.machine.drain_events()
    }

    pub fn note(&mut self, now: f64, kind: &str, details: String) {
        self.machine.note(now, kind, details);
    }

    pub fn abort(&mut self, now: f64, reason: &'static str, details: String) {
        self.machine.force(now, BallState::Done, reason, details);
    }

    pub fn to_dot(&self) -> String {
        self.machine.to_dot()
    }

    pub fn pass_index(&self) -> u32 {
        self.pass_index
    }

    pub fn tick(&mut self, obs: &Observations, _dt: f64) -> MissionCommand {
        use BallState::*;
        let detection = largest_of_class(obs.detections, DetectionClass::Ball);
        if detection.is_some() {
            self.last_detection_t = obs.t;
            if let Some(d) = detection {
                self.machine.note(
                    obs.t,
                    "ball_trace",
                    format!("u={:.1};v={:.1};pass={}", d.centroid.u, d.centroid.v, self.pass_index),
                );
            }
        }
        let t = obs.t;
        let out_of_time = obs.clock_remaining <= 0.0 || obs.battery_remaining <= 0.0;
        let since_detection = t - self.last_detection_t;
        let first_altitude = self.params.altitudes[0];
        let state_before = self.machine.state();
        let time_in_state = self.machine.time_in_state(t);
        let out_of_view_grace = self.params.out_of_view_grace;
        let wait_timeout = self.wait_timeout;

        let fired = self.machine.tick(t, |guard| match guard {
            "clock_expired" => out_of_time,
            "takeoff_complete" => obs.altitude >= first_altitude - 0.3,
            "ball_detected" => detection.is_some(),
            "ball_out_of_view" => since_detection > out_of_view_grace,
            "ball_redetected" => detection.is_some(),
            "wait_timeout" => time_in_state > wait_timeout,
            "landed" => obs.altitude <= 0.08,
            _ => false,
        });

        if let Some(next) = fired {
            match (state_before, next) {
                (GlobalSearch, LosServo) | (WaitInPlace, LosServo) => {
                    self.pass_index += 1;
                }
                _ => {}
            }
        }

        match self.machine.state() {
            TakeOff => {
                let target = self.home.with_z(first_altitude);
                MissionCommand::flight(
                    (target - obs.nav).saturated(self.params.takeoff_rate),
                    0.0,
                    0.0,
                )
            }
            GlobalSearch => {
                if self.follower.index >= self.plan.len() {
                    self.follower = WaypointFollower::default();
                }
                let pose = Pose::new(obs.nav, obs.yaw);
                let out = follow_waypoints(
                    &pose,
                    &self.plan,
                    &mut self.follower,
                    &self.params.follow,
                    HeadingPolicy::Fixed(self.heading),
                );
                MissionCommand::flight(out.velocity, out.yaw_rate, 0.0)
            }
            LosServo => {
                // halt forward motion; lateral/vertical along the LOS
                let cmd = match detection {
                    Some(d) => {
                        let los = los_vector(&self.intrinsics, d.centroid);
                        let cam = CameraPose::nominal(&Pose::new(obs.nav, obs.yaw), 0.0);
                        ball_refine(&los, &cam, &self.params.pursuit)
                    }
                    None => Vec3::ZERO,
                };
                MissionCommand::flight(cmd, 0.0, 0.0)
            }
            WaitInPlace => MissionCommand::hover(),
            Land => MissionCommand::flight(
                vertical_to(-obs.altitude, self.params.landing_rate),
                0.0,
                0.0,
            ),
            Done => MissionCommand::hover(),
        }
    }
}
