//! Mission executives: the four concrete state machines (balloon
//! popping, ball catching, block pick-and-place, firefighting), each
//! encoding its recovery strategy, plus the observation/command
//! interface the harness drives them through.

mod ball;
mod balloon;
mod firefight;
mod pickplace;
mod spray;

pub use ball::{BallMission, BallParams, BallState};
pub use balloon::{BalloonMission, BalloonParams, BalloonState};
pub use firefight::{FirefightMission, FirefightParams, FirefightState, SprayPattern};
pub use pickplace::{PickPlaceMission, PickPlaceParams, PickPlaceState};
pub use spray::{spray_water, PumpParams, PumpState, SprayDelivery};

use crate::fsm::Event;
use crate::math::Vec3;
use crate::scenario::{MissionKind, Scenario};
use crate::sensing::{Detection, PixelPoint, RangeReading};
use crate::vision::ThermalBlob;
use crate::world::GpsHealth;
use rand_chacha::ChaCha8Rng;

/// Per-tick sensor bundle assembled by the harness. Positions are
/// estimates (GPS xy with the last fix held across dropouts, laser
/// altitude), never ground truth.
#[derive(Debug, Clone)]
pub struct Observations<'a> {
    pub t: f64,
    /// Estimated position: held GPS xy, laser altitude.
    pub nav: Vec3,
    pub yaw: f64,
    pub gps_health: GpsHealth,
    pub altitude: f64,
    pub short_range: RangeReading,
    pub forward_range: RangeReading,
    pub detections: &'a [Detection],
    /// Fresh thermal candidates this tick (vision rate), largest first.
    pub thermal: Option<&'a [ThermalBlob]>,
    /// Fresh corner observations this tick (vision rate).
    pub corners: Option<&'a CornerObservation>,
    pub clock_remaining: f64,
    pub battery_remaining: f64,
}

/// Corner channel output: projected feature points of the current
/// servo target, already sorted per the corner-sort contract.
#[derive(Debug, Clone, Default)]
pub struct CornerObservation {
    /// Four block-patch corners, clockwise from top-left.
    pub block_patch: Option<[PixelPoint; 4]>,
    /// Structure side top corners, left then right.
    pub structure_pair: Option<(PixelPoint, PixelPoint)>,
}

/// What the mission asks of the vehicle this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionCommand {
    pub velocity: Vec3,
    pub yaw_rate: f64,
    /// Commanded gimbal pitch, radians down from level.
    pub gimbal_pitch: f64,
    pub magnet_on: bool,
    pub release_block: bool,
    pub pump_on: bool,
    /// True during the open-loop final descent; the harness injects the
    /// per-attempt drift velocity while this is set.
    pub open_loop: bool,
}

impl MissionCommand {
    pub fn hover() -> Self {
        MissionCommand {
            velocity: Vec3::ZERO,
            yaw_rate: 0.0,
            gimbal_pitch: 0.0,
            magnet_on: false,
            release_block: false,
            pump_on: false,
            open_loop: false,
        }
    }

    pub fn flight(velocity: Vec3, yaw_rate: f64, gimbal_pitch: f64) -> Self {
        MissionCommand { velocity, yaw_rate, gimbal_pitch, ..MissionCommand::hover() }
    }
}

/// One of the four mission machines.
#[derive(Debug, Clone)]
pub enum MissionMachine {
    Balloon(BalloonMission),
    Ball(BallMission),
    PickPlace(PickPlaceMission),
    Firefight(FirefightMission),
}

impl MissionMachine {
    pub fn build(scenario: &Scenario) -> MissionMachine {
        match scenario.mission {
            MissionKind::Balloon => MissionMachine::Balloon(BalloonMission::new(scenario)),
            MissionKind::Ball => MissionMachine::Ball(BallMission::new(scenario)),
            MissionKind::PickPlace => MissionMachine::PickPlace(PickPlaceMission::new(scenario)),
            MissionKind::Firefight => MissionMachine::Firefight(FirefightMission::new(scenario)),
        }
    }

    pub fn tick(&mut self, obs: &Observations, rng: &mut ChaCha8Rng, dt: f64) -> MissionCommand {
        match self {
            MissionMachine::Balloon(m) => m.tick(obs, dt),
            MissionMachine::Ball(m) => m.tick(obs, dt),
            MissionMachine::PickPlace(m) => m.tick(obs, rng, dt),
            MissionMachine::Firefight(m) => m.tick(obs, rng, dt),
        }
    }

    pub fn drain_events(&mut self) -> Vec<Event> {
        match self {
            MissionMachine::Balloon(m) => m.drain_events(),
            MissionMachine::Ball(m) => m.drain_events(),
            MissionMachine::PickPlace(m) => m.drain_events(),
            MissionMachine::Firefight(m) => m.drain_events(),
        }
    }

    /// Terminal: landed and done, nothing further will happen.
    pub fn done(&self) -> bool {
        match self {
            MissionMachine::Balloon(m) => m.done(),
            MissionMachine::Ball(m) => m.done(),
            MissionMachine::PickPlace(m) => m.done(),
            MissionMachine::Firefight(m) => m.done(),
        }
    }

    /// Force the machine into its terminal state (safety stop).
    pub fn abort(&mut self, now: f64, reason: &'static str, details: String) {
        match self {
            MissionMachine::Balloon(m) => m.abort(now, reason, details),
            MissionMachine::Ball(m) => m.abort(now, reason, details),
            MissionMachine::PickPlace(m) => m.abort(now, reason, details),
            MissionMachine::Firefight(m) => m.abort(now, reason, details),
        }
    }

    pub fn note(&mut self, now: f64, kind: &str, details: String) {
        match self {
            MissionMachine::Balloon(m) => m.note(now, kind, details),
            MissionMachine::Ball(m) => m.note(now, kind, details),
            MissionMachine::PickPlace(m) => m.note(now, kind, details),
            MissionMachine::Firefight(m) => m.note(now, kind, details),
        }
    }

    pub fn to_dot(&self) -> String {
        match self {
            MissionMachine::Balloon(m) => m.to_dot(),
            MissionMachine::Ball(m) => m.to_dot(),
            MissionMachine::PickPlace(m) => m.to_dot(),
            MissionMachine::Firefight(m) => m.to_dot(),
        }
    }

    pub fn state_name(&self) -> String {
        match self {
            MissionMachine::Balloon(m) => format!("{:?}", m.state()),
            MissionMachine::Ball(m) => format!("{:?}", m.state()),
            MissionMachine::PickPlace(m) => format!("{:?}", m.state()),
            MissionMachine::Firefight(m) => format!("{:?}", m.state()),
        }
    }

    /// The pump state, when this mission carries water.
    pub fn pump(&self) -> Option<&PumpState> {
        match self {
            MissionMachine::Firefight(m) => Some(m.pump()),
            _ => None,
        }
    }
}

/// Shared helper: climb/descend straight to a target altitude over the
/// current position at the given rate, P-controlled near the target.
pub(crate) fn vertical_to(altitude_err: f64, rate: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, (1.5 * altitude_err).clamp(-rate, rate))
}
