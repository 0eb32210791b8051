//! Automated startup sequencer: dependency-ordered steps with blocking
//! waits, a stream-liveness watchdog gate with a status indicator, and
//! arm-gated logging -- exercised against scripted simulated devices.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    WaitForDevice,
    EnableFlags,
    StartService,
    FixedSleep,
    LaunchSensors,
    WatchdogGate,
    StartDetector,
    StartLogger,
    StartMission,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartupStep {
    pub name: String,
    pub kind: StepKind,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default)]
    pub dependencies: Vec<String>,
    /// FixedSleep duration.
    #[serde(default)]
    pub sleep: f64,
    /// WaitForDevice target.
    #[serde(default)]
    pub device: Option<String>,
    /// WatchdogGate required streams.
    #[serde(default)]
    pub streams: Vec<String>,
}

fn default_timeout() -> f64 {
    30.0
}

impl StartupStep {
    fn simple(name: &str, kind: StepKind, deps: &[&str]) -> StartupStep {
        StartupStep {
            name: name.to_string(),
            kind,
            timeout: default_timeout(),
            dependencies: deps.iter().map(|d| d.to_string()).collect(),
            sleep: 0.0,
            device: None,
            streams: Vec::new(),
        }
    }
}

/// The default plan: wait for the autopilot serial device, enable flight
/// flags, start the core service, a blocking two-second sleep, bring up
/// the bridge and core stack, pause, launch sensors, gate on stream
/// health, start the detector, then the logger and mission node
/// (non-blocking with respect to each other).
pub fn default_plan() -> Vec<StartupStep> {
    let mut steps = Vec::new();
    let mut wait = StartupStep::simple("wait_autopilot_serial", StepKind::WaitForDevice, &[]);
    wait.device = Some("autopilot_serial".to_string());
    steps.push(wait);
    steps.push(StartupStep::simple(
        "enable_flight_flags",
        StepKind::EnableFlags,
        &["wait_autopilot_serial"],
    ));
    steps.push(StartupStep::simple(
        "start_core_service",
        StepKind::StartService,
        &["enable_flight_flags"],
    ));
    let mut sleep = StartupStep::simple("core_service_sleep", StepKind::FixedSleep, &["start_core_service"]);
    sleep.sleep = 2.0;
    steps.push(sleep);
    steps.push(StartupStep::simple(
        "launch_bridge_and_stack",
        StepKind::StartService,
        &["core_service_sleep"],
    ));
    let mut pause = StartupStep::simple("stack_pause", StepKind::FixedSleep, &["launch_bridge_and_stack"]);
    pause.sleep = 2.0;
    steps.push(pause);
    steps.push(StartupStep::simple("launch_sensors", StepKind::LaunchSensors, &["stack_pause"]));
    let mut gate = StartupStep::simple("watchdog_gate", StepKind::WatchdogGate, &["launch_sensors"]);
    gate.streams = vec![
        "odometry".to_string(),
        "gimbal_camera".to_string(),
        "downward_laser".to_string(),
    ];
    steps.push(gate);
    steps.push(StartupStep::simple("start_detector", StepKind::StartDetector, &["watchdog_gate"]));
    steps.push(StartupStep::simple("start_logger", StepKind::StartLogger, &["start_detector"]));
    steps.push(StartupStep::simple("start_mission", StepKind::StartMission, &["start_detector"]));
    steps
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamScript {
    pub name: String,
    /// First message time; absent streams never start.
    pub start: Option<f64>,
    pub rate: f64,
    /// Publishing gaps [from, to).
    pub gaps: Vec<(f64, f64)>,
}

impl Default for StreamScript {
    fn default() -> Self {
        StreamScript { name: String::new(), start: Some(3.0), rate: 10.0, gaps: Vec::new() }
    }
}

impl StreamScript {
    /// Time of the most recent message at or before `now`.
    pub fn last_message(&self, now: f64) -> Option<f64> {
        let start = self.start?;
        if now < start {
            return None;
        }
        let mut t = start + ((now - start) * self.rate).floor() / self.rate;
        for &(g0, g1) in &self.gaps {
            if t >= g0 && t < g1 {
                // last message before the gap opened
                if g0 <= start {
                    return None;
                }
                t = start + ((g0 - start) * self.rate).floor() / self.rate;
                if t >= g0 {
                    t -= 1.0 / self.rate;
                }
            }
        }
        (t >= start).then_some(t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceScript {
    /// Device registration times.
    pub devices: BTreeMap<String, f64>,
    pub streams: Vec<StreamScript>,
    pub arm_time: Option<f64>,
    pub autonomous_mode_time: Option<f64>,
}

impl Default for DeviceScript {
    fn default() -> Self {
        let mut devices = BTreeMap::new();
        devices.insert("autopilot_serial".to_string(), 0.5);
        let streams = ["odometry", "gimbal_camera", "downward_laser"]
            .iter()
            .map(|n| StreamScript { name: n.to_string(), ..StreamScript::default() })
            .collect();
        DeviceScript {
            devices,
            streams,
            arm_time: Some(6.0),
            autonomous_mode_time: Some(6.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentConfig {
    pub enabled: bool,
    pub steps: Vec<StartupStep>,
    pub script: DeviceScript,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        DeploymentConfig { enabled: true, steps: default_plan(), script: DeviceScript::default() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("dependency cycle involving step '{0}'")]
    Cycle(String),
    #[error("step '{0}' depends on unknown step '{1}'")]
    UnknownDependency(String, String),
    #[error("duplicate step name '{0}'")]
    Duplicate(String),
}

/// Topological order, stable with respect to input order.
pub fn sequence_plan(steps: &[StartupStep]) -> Result<Vec<usize>, PlanError> {
    let index: BTreeMap<&str, usize> =
        steps.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
    if index.len() != steps.len() {
        let mut seen = std::collections::BTreeSet::new();
        for s in steps {
            if !seen.insert(&s.name) {
                return Err(PlanError::Duplicate(s.name.clone()));
            }
        }
    }
    for s in steps {
        for d in &s.dependencies {
            if !index.contains_key(d.as_str()) {
                return Err(PlanError::UnknownDependency(s.name.clone(), d.clone()));
            }
        }
    }
    let n = steps.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut progressed = false;
        for i in 0..n {
            if placed[i] {
                continue;
            }
            let ready = steps[i]
                .dependencies
                .iter()
                .all(|d| placed[index[d.as_str()]]);
            if ready {
                placed[i] = true;
                order.push(i);
                progressed = true;
            }
        }
        if order.len() == n {
            break;
        }
        if !progressed {
            let stuck = (0..n).find(|&i| !placed[i]).unwrap();
            return Err(PlanError::Cycle(steps[stuck].name.clone()));
        }
    }
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorState {
    Booting,
    WaitingStreams,
    StreamsOk,
    Failed,
    MissionRunning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Ok,
    Timeout,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub step: String,
    pub start: f64,
    pub end: f64,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub entries: Vec<TimelineEntry>,
    pub indicator_history: Vec<(f64, IndicatorState)>,
    pub logger_active_at: Option<f64>,
    pub mission_started_at: Option<f64>,
    /// True when every step that ran succeeded and the mission started.
    pub success: bool,
}

impl Timeline {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,start,end,outcome\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:.3},{:.3},{:?}\n",
                e.step,
                e.start,
                e.end,
                e.outcome
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamStatus {
    Alive,
    Stale,
    Absent,
}

#[derive(Debug, Clone)]
pub struct StreamHealth {
    pub name: String,
    pub last_message_age: Option<f64>,
    pub required_rate: f64,
    pub status: StreamStatus,
}

/// Health snapshot at `now`: alive iff the last message is younger than
/// two periods.
pub fn stream_health(script: &StreamScript, now: f64) -> StreamHealth {
    let last = script.last_message(now);
    let age = last.map(|t| now - t);
    let status = match age {
        None => StreamStatus::Absent,
        Some(a) if a < 2.0 / script.rate => StreamStatus::Alive,
        Some(_) => StreamStatus::Stale,
    };
    StreamHealth { name: script.name.clone(), last_message_age: age, required_rate: script.rate, status }
}

/// Watchdog with failure debounce: a stream must stay stale for at least
/// `debounce` seconds before the aggregate flips to failed.
#[derive(Debug, Clone)]
pub struct Watchdog {
    pub debounce: f64,
    unhealthy_since: Option<f64>,
}

impl Watchdog {
    pub fn new(debounce: f64) -> Self {
        Watchdog { debounce, unhealthy_since: None }
    }

    /// Aggregate liveness plus the indicator to display.
    pub fn tick(&mut self, streams: &[StreamHealth], now: f64) -> (bool, IndicatorState) {
        let all_alive = streams.iter().all(|s| s.status == StreamStatus::Alive);
        if all_alive {
            self.unhealthy_since = None;
            return (true, IndicatorState::StreamsOk);
        }
        let since = *self.unhealthy_since.get_or_insert(now);
        if now - since >= self.debounce {
            (false, IndicatorState::Failed)
        } else {
            (true, IndicatorState::StreamsOk)
        }
    }
}

const POLL: f64 = 0.05;

/// Execute the plan against the scripted devices on a simulated clock.
/// Blocking steps serialize; the logger and mission start are
/// non-blocking relative to each other. A timeout marks the step failed,
/// flips the indicator, and prevents dependents from running.
pub fn run_sequence(config: &DeploymentConfig) -> Result<Timeline, PlanError> {
    let order = sequence_plan(&config.steps)?;
    let script = &config.script;
    let mut now = 0.0f64;
    let mut entries = Vec::new();
    let mut indicator_history = vec![(0.0, IndicatorState::Booting)];
    let mut indicator = IndicatorState::Booting;
    let set_indicator = |state: IndicatorState,
                             t: f64,
                             indicator: &mut IndicatorState,
                             history: &mut Vec<(f64, IndicatorState)>| {
        if *indicator != state {
            *indicator = state;
            history.push((t, state));
        }
    };
    let mut succeeded: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    let mut logger_active_at = None;
    let mut mission_started_at = None;
    let mut any_failed = false;

    for &i in &order {
        let step = &config.steps[i];
        if !step.dependencies.iter().all(|d| succeeded.contains(d.as_str())) {
            continue; // dependency failed: not run
        }
        let start = now;
        let outcome = match step.kind {
            StepKind::WaitForDevice => {
                let target = step.device.as_deref().unwrap_or("");
                match script.devices.get(target) {
                    Some(&t_reg) if t_reg <= start + step.timeout => {
                        now = now.max(t_reg);
                        StepOutcome::Ok
                    }
                    _ => {
                        now = start + step.timeout;
                        StepOutcome::Timeout
                    }
                }
            }
            StepKind::EnableFlags | StepKind::StartService | StepKind::StartDetector => {
                StepOutcome::Ok
            }
            StepKind::FixedSleep => {
                now += step.sleep;
                StepOutcome::Ok
            }
            StepKind::LaunchSensors => StepOutcome::Ok,
            StepKind::WatchdogGate => {
                set_indicator(IndicatorState::WaitingStreams, now, &mut indicator, &mut indicator_history);
                let deadline = start + step.timeout;
                let mut ok = false;
                while now <= deadline {
                    let all_alive = step.streams.iter().all(|name| {
                        script
                            .streams
                            .iter()
                            .find(|s| &s.name == name)
                            .map(|s| stream_health(s, now).status == StreamStatus::Alive)
                            .unwrap_or(false)
                    });
                    if all_alive {
                        ok = true;
                        break;
                    }
                    now += POLL;
                }
                if ok {
                    set_indicator(IndicatorState::StreamsOk, now, &mut indicator, &mut indicator_history);
                    StepOutcome::Ok
                } else {
                    now = deadline;
                    StepOutcome::Timeout
                }
            }
            StepKind::StartLogger => {
                // logs only once the RC is in autonomous mode and the
                // vehicle is armed; non-blocking
                logger_active_at = match (script.arm_time, script.autonomous_mode_time) {
                    (Some(a), Some(m)) => Some(now.max(a).max(m)),
                    _ => None,
                };
                StepOutcome::Ok
            }
            StepKind::StartMission => {
                // launches immediately; takeoff commands wait for arming
                mission_started_at = script.arm_time.map(|a| now.max(a));
                if let Some(t) = mission_started_at {
                    set_indicator(IndicatorState::MissionRunning, t, &mut indicator, &mut indicator_history);
                }
                StepOutcome::Ok
            }
        };
        if outcome != StepOutcome::Ok {
            any_failed = true;
            set_indicator(IndicatorState::Failed, now, &mut indicator, &mut indicator_history);
        } else {
            succeeded.insert(step.name.as_str());
        }
        entries.push(TimelineEntry { step: step.name.clone(), start, end: now, outcome });
    }

    let success = !any_failed && mission_started_at.is_some();
    Ok(Timeline { entries, indicator_history, logger_active_at, mission_started_at, success })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_order_is_the_startup_narrative() {
        let steps = default_plan();
        let order = sequence_plan(&steps).unwrap();
        let names: Vec<&str> = order.iter().map(|&i| steps[i].name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "wait_autopilot_serial",
                "enable_flight_flags",
                "start_core_service",
                "core_service_sleep",
                "launch_bridge_and_stack",
                "stack_pause",
                "launch_sensors",
                "watchdog_gate",
                "start_detector",
                "start_logger",
                "start_mission",
            ]
        );
    }

    #[test]
    fn independent_steps_keep_input_order() {
        let steps = vec![
            StartupStep::simple("b", StepKind::StartService, &[]),
            StartupStep::simple("a", StepKind::StartService, &[]),
        ];
        let order = sequence_plan(&steps).unwrap();
        assert_eq!(order, vec![0, 1]);
    }

    #[test]
    fn self_dependency_is_a_cycle() {
        let steps = vec![StartupStep::simple("a", StepKind::StartService, &["a"])];
        assert_eq!(sequence_plan(&steps).unwrap_err(), PlanError::Cycle("a".to_string()));
    }

    #[test]
    fn healthy_script_reaches_mission_running() {
        let config = DeploymentConfig::default();
        let timeline = run_sequence(&config).unwrap();
        assert!(timeline.success);
        assert!(timeline.mission_started_at.is_some());
        let states: Vec<IndicatorState> =
            timeline.indicator_history.iter().map(|(_, s)| *s).collect();
        assert_eq!(
            states,
            vec![
                IndicatorState::Booting,
                IndicatorState::WaitingStreams,
                IndicatorState::StreamsOk,
                IndicatorState::MissionRunning,
            ]
        );
        // the blocking two-second sleep is visible in the timeline
        let sleep = timeline.entries.iter().find(|e| e.step == "core_service_sleep").unwrap();
        assert!((sleep.end - sleep.start - 2.0).abs() < 1e-9);
    }

    #[test]
    fn missing_gimbal_stream_times_out_and_blocks_mission() {
        let mut config = DeploymentConfig::default();
        config.script.streams.retain(|s| s.name != "gimbal_camera");
        let timeline = run_sequence(&config).unwrap();
        assert!(!timeline.success);
        assert!(timeline.mission_started_at.is_none());
        let gate = timeline.entries.iter().find(|e| e.step == "watchdog_gate").unwrap();
        assert_eq!(gate.outcome, StepOutcome::Timeout);
        assert_eq!(timeline.indicator_history.last().unwrap().1, IndicatorState::Failed);
        // dependents were not run
        assert!(!timeline.entries.iter().any(|e| e.step == "start_mission"));
    }

    #[test]
    fn late_odometry_delays_but_succeeds() {
        let mut config = DeploymentConfig::default();
        for s in config.script.streams.iter_mut() {
            if s.name == "odometry" {
                s.start = Some(15.0);
            }
        }
        let timeline = run_sequence(&config).unwrap();
        assert!(timeline.success);
        let gate = timeline.entries.iter().find(|e| e.step == "watchdog_gate").unwrap();
        assert!(gate.end >= 15.0, "gate closed at {}", gate.end);
    }

    #[test]
    fn arm_gated_logger() {
        let mut config = DeploymentConfig::default();
        config.script.arm_time = Some(20.0);
        config.script.autonomous_mode_time = Some(25.0);
        let timeline = run_sequence(&config).unwrap();
        // both the arm and mode switches must be set before logging
        assert_eq!(timeline.logger_active_at, Some(25.0));
        assert_eq!(timeline.mission_started_at, Some(20.0));
    }

    #[test]
    fn watchdog_debounce_ignores_flapping() {
        let script = StreamScript {
            name: "odometry".to_string(),
            start: Some(0.0),
            rate: 10.0,
            // brief stale windows of 0.4 s, shorter than the 1 s debounce
            gaps: vec![(2.0, 2.4), (4.0, 4.4), (6.0, 6.4)],
        };
        let mut watchdog = Watchdog::new(1.0);
        let mut t = 0.5;
        while t < 8.0 {
            let health = [stream_health(&script, t)];
            let (ok, indicator) = watchdog.tick(&health, t);
            assert!(ok, "flipped to failed at t={t}");
            assert_ne!(indicator, IndicatorState::Failed);
            t += 0.05;
        }

        // a persistent outage does flip after the debounce
        let dead = StreamScript { name: "odometry".into(), start: Some(0.0), rate: 10.0, gaps: vec![(2.0, 60.0)] };
        let mut watchdog = Watchdog::new(1.0);
        let mut flipped_at = None;
        let mut t = 0.5;
        while t < 8.0 {
            let health = [stream_health(&dead, t)];
            let (ok, _) = watchdog.tick(&health, t);
            if !ok {
                flipped_at = Some(t);
                break;
            }
            t += 0.05;
        }
        let flipped = flipped_at.expect("never flipped");
        // stale begins at 2.2 (two periods past the last message), so the
        // flip lands one debounce later
        assert!((flipped - 3.2).abs() < 0.15, "flipped at {flipped}");
    }

    #[test]
    fn replay_determinism() {
        let config = DeploymentConfig::default();
        let a = run_sequence(&config).unwrap();
        let b = run_sequence(&config).unwrap();
        assert_eq!(a, b);
    }
}
