//! Scenario configuration: one JSON document fully specifies a run
//! (arena, targets, module parameters, fault injection, seed). Unknown
//! keys are rejected; every block has documented defaults so minimal
//! scenarios stay short. See docs/scenario_schema.md.

use crate::math::Vec3;
use crate::search::ArenaSpec;
use crate::sensing::{CameraIntrinsics, DetectorChannel, RangeParams, RenderParams, ThermalParams};
use crate::world::{
    BallSpec, BalloonSpec, BlockColor, BlockSpec, BuildingSpec, FireSpec, GpsParams,
    StructureSpec, TargetSpec, UavParams, WindParams,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected 1)")]
    SchemaVersion(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionKind {
    Balloon,
    Ball,
    PickPlace,
    Firefight,
}

impl MissionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MissionKind::Balloon => "balloon",
            MissionKind::Ball => "ball",
            MissionKind::PickPlace => "pick_place",
            MissionKind::Firefight => "firefight",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartPose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Default for StartPose {
    fn default() -> Self {
        StartPose { position: Vec3::new(1.0, 1.0, 0.0), yaw: 0.0 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSet {
    pub balloons: Vec<BalloonSpec>,
    pub ball: Option<BallSpec>,
    pub blocks: Vec<BlockSpec>,
    pub structure: Option<StructureSpec>,
    pub fires: Vec<FireSpec>,
}

impl TargetSet {
    pub fn to_specs(&self) -> Vec<TargetSpec> {
        let mut out = Vec::new();
        out.extend(self.balloons.iter().cloned().map(TargetSpec::balloon));
        if let Some(b) = &self.ball {
            out.push(TargetSpec::ball(b.clone()));
        }
        out.extend(self.blocks.iter().cloned().map(TargetSpec::block));
        if let Some(s) = &self.structure {
            out.push(TargetSpec::structure(s.clone()));
        }
        out.extend(self.fires.iter().cloned().map(TargetSpec::fire));
        out
    }
}

/// Fault-injection block: every knob maps to a competition failure
/// cause. All default off.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultConfig {
    /// Constant gimbal camera yaw offset, degrees (servoing in the wrong
    /// direction).
    pub gimbal_offset_yaw_deg: f64,
    /// Lateral drift velocity sigma during the open-loop final descent,
    /// m/s per axis.
    pub descent_drift_sigma: f64,
    /// Forward range sensor spurious-reading probability.
    pub range_fault_prob: f64,
    /// Probability that a spray attempt starts with a stuck stopper.
    pub stuck_stopper_prob: f64,
    /// Intervals [start, end) of degraded GPS health, seconds.
    pub low_gps_intervals: Vec<(f64, f64)>,
    /// Probability that a propeller-balloon contact fails to pop
    /// (downdraft pushing the balloon away).
    pub downdraft_pop_fail_prob: f64,
    /// Per-vision-frame probability of losing the corner track.
    pub corner_loss_prob: f64,
    /// Structure corner-pair offset, px (incorrect desired corners).
    pub corner_shift_px: (f64, f64),
    /// Disable recovery transitions (paired Monte Carlo baseline).
    pub recovery_enabled: bool,
}

impl Default for FaultConfig {
    fn default() -> Self {
        FaultConfig {
            gimbal_offset_yaw_deg: 0.0,
            descent_drift_sigma: 0.0,
            range_fault_prob: 0.0,
            stuck_stopper_prob: 0.0,
            low_gps_intervals: Vec::new(),
            downdraft_pop_fail_prob: 0.0,
            corner_loss_prob: 0.0,
            corner_shift_px: (0.0, 0.0),
            recovery_enabled: true,
        }
    }
}

fn default_schema_version() -> u32 {
    1
}
fn default_dt() -> f64 {
    0.05
}
fn default_clock_limit() -> f64 {
    900.0
}
fn default_vision_divisor() -> u32 {
    4
}

fn default_thermal_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 80.0, fy: 80.0, cx: 40.0, cy: 30.0, width: 80, height: 60 }
}

impl Default for ArenaSpec {
    fn default() -> Self {
        ArenaSpec::axis_aligned(100.0, 40.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub name: String,
    pub mission: MissionKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_clock_limit")]
    pub clock_limit: f64,
    /// Battery proxy: flight-time budget in seconds.
    #[serde(default = "default_clock_limit")]
    pub battery_budget: f64,
    /// Run vision-rate sensors every Nth tick.
    #[serde(default = "default_vision_divisor")]
    pub vision_divisor: u32,
    #[serde(default)]
    pub arena: ArenaSpec,
    #[serde(default)]
    pub uav: UavParams,
    #[serde(default)]
    pub uav_start: StartPose,
    #[serde(default)]
    pub wind: WindParams,
    #[serde(default)]
    pub gps: GpsParams,
    #[serde(default)]
    pub camera: CameraIntrinsics,
    #[serde(default = "default_thermal_intrinsics")]
    pub thermal_camera: CameraIntrinsics,
    #[serde(default)]
    pub thermal: ThermalParams,
    #[serde(default)]
    pub detector: DetectorChannel,
    #[serde(default)]
    pub range: RangeParams,
    #[serde(default)]
    pub render: RenderParams,
    #[serde(default)]
    pub targets: TargetSet,
    #[serde(default)]
    pub building: Option<BuildingSpec>,
    #[serde(default)]
    pub balloon_mission: crate::missions::BalloonParams,
    #[serde(default)]
    pub ball_mission: crate::missions::BallParams,
    #[serde(default)]
    pub pickplace_mission: crate::missions::PickPlaceParams,
    #[serde(default)]
    pub firefight_mission: crate::missions::FirefightParams,
    #[serde(default)]
    pub faults: FaultConfig,
    #[serde(default)]
    pub deployment: crate::deploy::DeploymentConfig,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(json)?;
        if scenario.schema_version != 1 {
            return Err(ScenarioError::SchemaVersion(scenario.schema_version));
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// FNV-1a hash of the canonical JSON; identifies the configuration in
    /// run records.
    pub fn hash(&self) -> u64 {
        crate::rng::fnv1a64(self.to_canonical_json().as_bytes())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Invalid(msg));
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return fail(format!("dt must be in (0, 0.1], got {}", self.dt));
        }
        if !self.camera.validate() {
            return fail("camera intrinsics invalid".into());
        }
        if !self.thermal_camera.validate() {
            return fail("thermal camera intrinsics invalid".into());
        }
        if self.clock_limit <= 0.0 {
            return fail("clock_limit must be positive".into());
        }
        let (_, _, l_long, _, l_short) = self.arena.frame();
        if l_long <= 0.0 || l_short <= 0.0 {
            return fail("arena has a zero-length side".into());
        }
        match self.mission {
            MissionKind::Balloon => {
                if self.targets.balloons.is_empty() {
                    return fail("balloon mission requires at least one balloon".into());
                }
            }
            MissionKind::Ball => {
                if self.targets.ball.is_none() {
                    return fail("ball mission requires a ball target".into());
                }
            }
            MissionKind::PickPlace => {
                if self.targets.blocks.is_empty() || self.targets.structure.is_none() {
                    return fail("pick_place mission requires blocks and a structure".into());
                }
            }
            MissionKind::Firefight => {
                if self.building.is_none() {
                    return fail("firefight mission requires a building".into());
                }
                if self.targets.fires.is_empty() {
                    return fail("firefight mission requires at least one fire".into());
                }
            }
        }
        for b in &self.targets.balloons {
            if b.diameter <= 0.0 || b.pole_height <= 0.0 {
                return fail("balloon dimensions must be positive".into());
            }
        }
        if let Some(b) = &self.targets.ball {
            if b.speed <= 0.0 || b.extents.0 <= 0.0 || b.extents.1 <= 0.0 {
                return fail("ball path parameters must be positive".into());
            }
        }
        Ok(())
    }

    /// The color this run picks up and places.
    pub fn desired_color(&self) -> BlockColor {
        self.pickplace_mission.desired_color
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let json = r#"{
            "name": "minimal",
            "mission": "balloon",
            "targets": { "balloons": [ { "anchor": {"x": 10.0, "y": 5.0, "z": 0.0} } ] }
        }"#;
        let s = Scenario::from_json(json).unwrap();
        assert_eq!(s.dt, 0.05);
        assert_eq!(s.clock_limit, 900.0);
        assert_eq!(s.targets.balloons[0].pole_height, 2.5);
        assert_eq!(s.targets.balloons[0].diameter, 0.6);
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{
            "name": "bad",
            "mission": "balloon",
            "not_a_field": 3,
            "targets": { "balloons": [ { "anchor": {"x": 1.0, "y": 1.0, "z": 0.0} } ] }
        }"#;
        let err = Scenario::from_json(json).unwrap_err();
        assert!(err.to_string().contains("not_a_field"), "{err}");
    }

    #[test]
    fn mission_target_consistency_enforced() {
        let json = r#"{ "name": "empty", "mission": "ball", "targets": {} }"#;
        let err = Scenario::from_json(json).unwrap_err();
        assert!(err.to_string().contains("ball"), "{err}");
    }

    #[test]
    fn hash_is_stable_and_config_sensitive() {
        let json = r#"{
            "name": "h",
            "mission": "balloon",
            "targets": { "balloons": [ { "anchor": {"x": 10.0, "y": 5.0, "z": 0.0} } ] }
        }"#;
        let a = Scenario::from_json(json).unwrap();
        let b = Scenario::from_json(json).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = Scenario::from_json(json).unwrap();
        c.seed = 99;
        assert_ne!(a.hash(), c.hash());
    }
}
