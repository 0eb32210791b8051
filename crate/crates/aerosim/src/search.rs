//! Global search plan generators and the wall-following algorithm:
//! boustrophedon lawnmower with a half-width-shifted reverse pass,
//! square loiter at preset altitudes, Gaussian re-sampling, median-filter
//! wall following with spiral altitude increments, and the x-pattern
//! robust action.

use crate::math::Vec3;
use crate::sensing::RangeReading;
use crate::world::Pose;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArenaSpec {
    /// Rectangle corners in order (plan projection; z ignored).
    pub corners: [Vec3; 4],
    #[serde(default = "default_sweep_width")]
    pub sweep_width: f64,
    #[serde(default = "default_search_altitude")]
    pub altitude: f64,
    #[serde(default = "default_search_speed")]
    pub speed: f64,
}

fn default_sweep_width() -> f64 {
    6.0
}
fn default_search_altitude() -> f64 {
    2.7
}
fn default_search_speed() -> f64 {
    2.0
}

impl ArenaSpec {
    pub fn axis_aligned(width: f64, depth: f64) -> Self {
        ArenaSpec {
            corners: [
                Vec3::ZERO,
                Vec3::new(width, 0.0, 0.0),
                Vec3::new(width, depth, 0.0),
                Vec3::new(0.0, depth, 0.0),
            ],
            sweep_width: default_sweep_width(),
            altitude: default_search_altitude(),
            speed: default_search_speed(),
        }
    }

    /// (origin, long axis unit, long length, short axis unit, short length)
    pub fn frame(&self) -> (Vec3, Vec3, f64, Vec3, f64) {
        let origin = self.corners[0].with_z(0.0);
        let e1 = self.corners[1].with_z(0.0) - origin;
        let e2 = self.corners[3].with_z(0.0) - origin;
        let (l1, l2) = (e1.norm(), e2.norm());
        if l1 >= l2 {
            (origin, e1 / l1, l1, e2 / l2, l2)
        } else {
            (origin, e2 / l2, l2, e1 / l1, l1)
        }
    }

    pub fn center(&self) -> Vec3 {
        let (origin, u_long, l_long, u_short, l_short) = self.frame();
        origin + u_long * (l_long / 2.0) + u_short * (l_short / 2.0)
    }

    /// Clamp a point into the rectangle (plan projection), keeping z.
    pub fn clip(&self, p: Vec3) -> Vec3 {
        let (origin, u_long, l_long, u_short, l_short) = self.frame();
        let rel = p.with_z(0.0) - origin;
        let a = rel.dot(u_long).clamp(0.0, l_long);
        let b = rel.dot(u_short).clamp(0.0, l_short);
        (origin + u_long * a + u_short * b).with_z(p.z)
    }
}

/// Centered row offsets covering `length` with `n = ceil(length/width)`
/// evenly spaced rows.
pub fn forward_row_offsets(length: f64, width: f64) -> Vec<f64> {
    let n = (length / width).ceil().max(1.0) as usize;
    let spacing = length / n as f64;
    (0..n).map(|i| spacing * (i as f64 + 0.5)).collect()
}

/// Reverse-pass rows interleave the forward rows at half-width shifts:
/// the cell-boundary grid {0, s, 2s, ..., length}.
pub fn reverse_row_offsets(length: f64, width: f64) -> Vec<f64> {
    let n = (length / width).ceil().max(1.0) as usize;
    let spacing = length / n as f64;
    (0..=n).map(|i| (spacing * i as f64).min(length)).collect()
}

#[derive(Debug, Clone)]
pub struct LawnmowerPlan {
    pub waypoints: Vec<Vec3>,
    /// Sweep width >= short side collapses the scan to one long row per
    /// pass.
    pub degenerate: bool,
}

/// Boustrophedon scan: forward pass rows offset across the long side,
/// then a reverse pass shifted by half the sweep width, all at the
/// configured altitude.
pub fn lawnmower_plan(arena: &ArenaSpec) -> LawnmowerPlan {
    let (origin, u_long, l_long, u_short, l_short) = arena.frame();
    let z = arena.altitude;
    let mut waypoints = Vec::new();

    if arena.sweep_width >= l_short {
        // one row per pass along the long axis, centered on the short axis
        let mid = origin + u_short * (l_short / 2.0);
        waypoints.push((mid).with_z(z));
        waypoints.push((mid + u_long * l_long).with_z(z));
        waypoints.push((mid + u_long * l_long).with_z(z));
        waypoints.push(mid.with_z(z));
        return LawnmowerPlan { waypoints, degenerate: true };
    }

    let mut serpentine = |offsets: &[f64], flip: &mut bool| {
        for &offset in offsets {
            let a = origin + u_long * offset;
            let b = a + u_short * l_short;
            let (start, end) = if *flip { (b, a) } else { (a, b) };
            waypoints.push(start.with_z(z));
            waypoints.push(end.with_z(z));
            *flip = !*flip;
        }
    };

    let mut flip = false;
    serpentine(&forward_row_offsets(l_long, arena.sweep_width), &mut flip);
    let mut reverse = reverse_row_offsets(l_long, arena.sweep_width);
    reverse.reverse(); // sweep back toward the start
    serpentine(&reverse, &mut flip);
    LawnmowerPlan { waypoints, degenerate: false }
}

/// Square circuit at the arena center, one lap per altitude, cycling.
/// Side defaults to half the short arena side. The follower holds a
/// fixed heading along the long side so the figure-8 stays in view.
pub fn square_loiter_plan(arena: &ArenaSpec, altitudes: &[f64]) -> Vec<Vec3> {
    assert!(!altitudes.is_empty(), "altitudes must be nonempty");
    let (_, u_long, _, u_short, l_short) = arena.frame();
    let center = arena.center();
    let half = l_short / 4.0;
    let corners = [
        center + u_long * half + u_short * half,
        center - u_long * half + u_short * half,
        center - u_long * half - u_short * half,
        center + u_long * half - u_short * half,
    ];
    let mut plan = Vec::new();
    for &z in altitudes {
        for c in &corners {
            plan.push(c.with_z(z));
        }
        plan.push(corners[0].with_z(z)); // close the lap
    }
    plan
}

/// Fixed heading for the loiter: face across the long axis toward the
/// arena center line (where the figure-8 runs).
pub fn loiter_heading(arena: &ArenaSpec) -> f64 {
    let (_, u_long, _, _, _) = arena.frame();
    u_long.y.atan2(u_long.x)
}

/// Nearby point sampled from an isotropic horizontal Gaussian, clipped
/// to the arena; altitude preserved.
pub fn gaussian_resample(
    center: Vec3,
    sigma: f64,
    arena: &ArenaSpec,
    rng: &mut ChaCha8Rng,
) -> Vec3 {
    if sigma <= 0.0 {
        return center;
    }
    let normal = Normal::new(0.0, sigma).expect("resample sigma");
    let p = center + Vec3::new(normal.sample(rng), normal.sample(rng), 0.0);
    arena.clip(p)
}

/// Exact median of an odd-length window.
pub fn median_filter(window: &[f64]) -> f64 {
    debug_assert!(window.len() % 2 == 1, "median window must be odd");
    let mut sorted = window.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[sorted.len() / 2]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallFollowParams {
    pub standoff: f64,
    pub lateral_speed: f64,
    pub forward_gain: f64,
    /// EDGE when the filtered range exceeds standoff + this margin.
    pub edge_margin: f64,
    pub median_window: usize,
    /// Seconds between samples pushed into the median window. Apertures
    /// narrower than (window/2) * lateral_speed * sample_interval are
    /// swallowed by the filter.
    pub sample_interval: f64,
    /// Minimum distance traveled per wall before an EDGE may fire.
    pub min_wall_length: f64,
    pub altitude_gain: f64,
}

impl Default for WallFollowParams {
    fn default() -> Self {
        WallFollowParams {
            standoff: 1.2,
            lateral_speed: 0.5,
            forward_gain: 0.8,
            edge_margin: 2.0,
            median_window: 5,
            sample_interval: 0.75,
            min_wall_length: 4.0,
            altitude_gain: 0.8,
        }
    }
}

/// Per-run wall-following state: current wall, distance traveled on it,
/// the median window, and the altitude schedule cursor.
#[derive(Debug, Clone)]
pub struct WallFollowState {
    pub wall_index: usize,
    pub traveled: f64,
    pub altitude_index: usize,
    window: Vec<f64>,
    sample_clock: f64,
    last_sample_was_return: bool,
    filtered: f64,
}

impl WallFollowState {
    pub fn new(params: &WallFollowParams) -> Self {
        assert!(params.median_window % 2 == 1, "median window must be odd");
        WallFollowState {
            wall_index: 0,
            traveled: 0.0,
            altitude_index: 0,
            window: vec![params.standoff; params.median_window],
            sample_clock: 0.0,
            last_sample_was_return: true,
            filtered: params.standoff,
        }
    }

    /// Reset per-wall progress after a corner turn.
    pub fn next_wall(&mut self, params: &WallFollowParams) {
        self.wall_index += 1;
        self.traveled = 0.0;
        self.window = vec![params.standoff; params.median_window];
        self.sample_clock = 0.0;
        self.last_sample_was_return = true;
        self.filtered = params.standoff;
    }

    pub fn filtered_range(&self) -> f64 {
        self.filtered
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallEvent {
    None,
    /// Filtered range opened up past the edge threshold after the
    /// minimum wall length: a true wall end.
    Edge,
    /// An isolated NO_RETURN (window aperture) swallowed by the filter.
    WindowSkipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallCommand {
    pub velocity: Vec3,
    pub yaw_rate: f64,
}

/// One wall-following tick: regulate the filtered forward range to the
/// standoff while translating left along the wall at the scheduled
/// altitude.
pub fn wall_follow_step(
    state: &mut WallFollowState,
    params: &WallFollowParams,
    reading: RangeReading,
    pose: &Pose,
    target_altitude: f64,
    dt: f64,
) -> (WallCommand, WallEvent) {
    let mut event = WallEvent::None;

    state.sample_clock += dt;
    if state.sample_clock >= params.sample_interval {
        state.sample_clock -= params.sample_interval;
        state.window.remove(0);
        state.window.push(reading.value_or_max());
        state.filtered = median_filter(&state.window);

        let edge_threshold = params.standoff + params.edge_margin;
        if !reading.is_return() && state.filtered <= edge_threshold {
            if state.last_sample_was_return {
                event = WallEvent::WindowSkipped;
            }
        } else if state.filtered > edge_threshold && state.traveled >= params.min_wall_length {
            event = WallEvent::Edge;
        }
        state.last_sample_was_return = reading.is_return();
    }

    let forward_error = state.filtered - params.standoff;
    let forward = (params.forward_gain * forward_error).clamp(-0.6, 0.6);
    let climb = (params.altitude_gain * (target_altitude - pose.position.z)).clamp(-0.5, 0.5);
    let velocity = pose.forward() * forward + pose.left() * params.lateral_speed
        + Vec3::new(0.0, 0.0, climb);
    state.traveled += params.lateral_speed * dt;

    (WallCommand { velocity, yaw_rate: 0.0 }, event)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerTurn {
    pub waypoints: Vec<Vec3>,
    pub new_heading: f64,
    /// Altitude for the next circuit leg.
    pub altitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("wall-following altitude schedule exhausted")]
pub struct SearchExhausted;

/// Plan the clockwise corner turn after an EDGE: clear the corner along
/// the travel direction, then wrap forward past the old wall plane; the
/// follower re-acquires the new wall by range control. Every four edges
/// the altitude advances to the next schedule entry.
pub fn corner_turn_plan(
    state: &mut WallFollowState,
    params: &WallFollowParams,
    altitudes: &[f64],
    pose: &Pose,
) -> Result<CornerTurn, SearchExhausted> {
    state.next_wall(params);
    if state.wall_index % 4 == 0 {
        state.altitude_index += 1;
    }
    if state.altitude_index >= altitudes.len() {
        return Err(SearchExhausted);
    }
    let altitude = altitudes[state.altitude_index];
    let travel = pose.left();
    let facing = pose.forward();
    let p1 = pose.position + travel * params.standoff;
    let p2 = p1 + facing * (2.0 * params.standoff);
    let new_heading = crate::math::wrap_angle(pose.yaw - std::f64::consts::FRAC_PI_2);
    Ok(CornerTurn {
        waypoints: vec![p1.with_z(altitude), p2.with_z(altitude)],
        new_heading,
        altitude,
    })
}

/// The x-pattern robust action: both diagonals of a square in the plane
/// spanned by `lateral` (horizontal, wall-parallel) and world z, visiting
/// A -> C -> B -> D -> center.
pub fn cross_pattern(center: Vec3, half_side: f64, lateral: Vec3) -> Vec<Vec3> {
    let lat = lateral.with_z(0.0).normalized();
    let up = Vec3::new(0.0, 0.0, 1.0);
    let a = center - lat * half_side + up * half_side;
    let b = center + lat * half_side + up * half_side;
    let c = center + lat * half_side - up * half_side;
    let d = center - lat * half_side - up * half_side;
    vec![a, c, b, d, center]
}
