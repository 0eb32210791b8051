//! Line-of-sight guidance and the local-interaction control laws:
//! pixel centering with an upward LOS goal, pursuit along the LOS,
//! lateral/vertical ball refinement, and waypoint following.
//!
//! Control signs are fixed by the closed-loop decrease property: a
//! positive gain on the LOS error moves the camera toward the target's
//! bearing, which drives the pixel error to zero (verified by the
//! closed-loop tests below).

use crate::math::{angle_diff, Vec3};
use crate::sensing::{CameraIntrinsics, CameraPose, PixelPoint};
use crate::world::Pose;
use serde::{Deserialize, Serialize};

/// Camera-frame line-of-sight vector through a pixel: components
/// ((u - cx)/fx, (v - cy)/fy, 1). The third component is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosVector {
    pub r: Vec3,
}

impl LosVector {
    pub fn new(x: f64, y: f64) -> Self {
        LosVector { r: Vec3::new(x, y, 1.0) }
    }
}

/// LOS vector from the camera center through the target centroid.
pub fn los_vector(intr: &CameraIntrinsics, target: PixelPoint) -> LosVector {
    LosVector::new((target.u - intr.cx) / intr.fx, (target.v - intr.cy) / intr.fy)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitParams {
    pub pursuit_speed: f64,
    /// Centering gains, (m/s) per unit LOS error.
    pub k_u: f64,
    pub k_v: f64,
    /// Extra climb angle applied to the pursuit direction, radians.
    pub upward_bias: f64,
    /// Give up on a pursuit after this long even with the target in view.
    pub los_timeout: f64,
    /// Declare the target lost after this long without a detection.
    pub detection_timeout: f64,
    /// Half-width of the pixel convergence box.
    pub convergence_box_px: f64,
    /// Vertical LOS goal (normalized): negative places the centroid
    /// above the image center so the propellers strike the balloon
    /// bottom. Default is 15% of image height above center at the
    /// default intrinsics.
    pub r_y_goal: f64,
}

impl Default for PursuitParams {
    fn default() -> Self {
        PursuitParams {
            pursuit_speed: 1.5,
            k_u: 2.0,
            k_v: 2.0,
            upward_bias: 0.05,
            los_timeout: 5.0,
            detection_timeout: 2.0,
            convergence_box_px: 25.0,
            r_y_goal: -0.12,
        }
    }
}

/// Lateral/vertical centering command in the camera frame; zero forward
/// motion. Returns the command and whether the pixel error is inside the
/// convergence box.
pub fn position_target_in_image(
    los: &LosVector,
    intr: &CameraIntrinsics,
    params: &PursuitParams,
) -> (Vec3, bool) {
    let e_x = los.r.x;
    let e_y = los.r.y - params.r_y_goal;
    let command = Vec3::new(params.k_u * e_x, params.k_v * e_y, 0.0);
    let converged = (e_x * intr.fx).abs() < params.convergence_box_px
        && (e_y * intr.fy).abs() < params.convergence_box_px;
    (command, converged)
}

/// Constant-speed dash along the LOS direction, rotated into the world
/// frame through the commanded camera orientation, with the upward bias
/// applied. |command| equals `pursuit_speed` exactly.
pub fn pursue_along_los(los: &LosVector, cam: &CameraPose, params: &PursuitParams) -> Vec3 {
    let dir = cam.camera_to_world_dir(los.r.normalized()).normalized();
    let dir = pitch_up(dir, params.upward_bias);
    dir * params.pursuit_speed
}

/// Raise a direction's elevation angle by `bias`, preserving azimuth.
fn pitch_up(dir: Vec3, bias: f64) -> Vec3 {
    if bias == 0.0 {
        return dir;
    }
    let h = dir.norm_xy();
    if h < 1e-12 {
        return dir;
    }
    let elevation = dir.z.atan2(h) + bias;
    let azimuth = Vec3::new(dir.x / h, dir.y / h, 0.0);
    azimuth * elevation.cos() + Vec3::new(0.0, 0.0, elevation.sin())
}

/// Ball intercept refinement: halt forward motion, move laterally and
/// vertically along the LOS direction. A centered ball therefore
/// commands nothing -- the vanishing-LOS geometry.
pub fn ball_refine(los: &LosVector, cam: &CameraPose, params: &PursuitParams) -> Vec3 {
    let cmd_cam = Vec3::new(params.k_u * los.r.x, params.k_v * los.r.y, 0.0);
    cam.camera_to_world_dir(cmd_cam)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeadingPolicy {
    /// Face the direction of travel (lawnmower rows).
    PathTangent,
    /// Hold a fixed heading (ball search faces the figure-8 center).
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowParams {
    pub cruise_speed: f64,
    pub capture_radius: f64,
    pub position_gain: f64,
    pub yaw_gain: f64,
}

impl Default for FollowParams {
    fn default() -> Self {
        FollowParams { cruise_speed: 2.0, capture_radius: 1.0, position_gain: 1.2, yaw_gain: 1.5 }
    }
}

/// Waypoint progress owned by one mission run.
#[derive(Debug, Clone, Default)]
pub struct WaypointFollower {
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowOutput {
    pub velocity: Vec3,
    pub yaw_rate: f64,
    pub done: bool,
}

/// Proportional flight toward the active waypoint, saturated at cruise
/// speed; the waypoint advances inside the capture radius. `done` is
/// reported past the final waypoint.
pub fn follow_waypoints(
    pose: &Pose,
    plan: &[Vec3],
    follower: &mut WaypointFollower,
    params: &FollowParams,
    heading: HeadingPolicy,
) -> FollowOutput {
    while follower.index < plan.len()
        && pose.position.distance(plan[follower.index]) < params.capture_radius
    {
        follower.index += 1;
    }
    if follower.index >= plan.len() {
        return FollowOutput { velocity: Vec3::ZERO, yaw_rate: 0.0, done: true };
    }
    let target = plan[follower.index];
    let to_target = target - pose.position;
    let velocity = (to_target * params.position_gain).saturated(params.cruise_speed);
    let yaw_des = match heading {
        HeadingPolicy::PathTangent => {
            if to_target.norm_xy() > 1e-6 {
                to_target.y.atan2(to_target.x)
            } else {
                pose.yaw
            }
        }
        HeadingPolicy::Fixed(yaw) => yaw,
    };
    let yaw_rate = params.yaw_gain * angle_diff(yaw_des, pose.yaw);
    FollowOutput { velocity, yaw_rate, done: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::project;
    use crate::world::{
        balloon_contact, step_world, BalloonSpec, TargetSpec, UavParams, UavState, WorldState,
    };
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn los_vector_matches_formula() {
        let intr = CameraIntrinsics::default();
        // centered pixel
        let c = los_vector(&intr, PixelPoint::new(intr.cx, intr.cy));
        assert_eq!(c.r, Vec3::new(0.0, 0.0, 1.0));
        // one focal length to the right
        let r = los_vector(&intr, PixelPoint::new(intr.cx + intr.fx, intr.cy));
        assert_eq!(r.r, Vec3::new(1.0, 0.0, 1.0));
        // worked example: f=(600,600), c=(320,240), target (470,390)
        let e = los_vector(&intr, PixelPoint::new(470.0, 390.0));
        assert_relative_eq!(e.r.x, 0.25, epsilon = 1e-15);
        assert_relative_eq!(e.r.y, 0.25, epsilon = 1e-15);
        assert_eq!(e.r.z, 1.0);

        let mut rng = crate::rng::stream(2, "guidance-los");
        for _ in 0..1000 {
            let u = rng.gen_range(-100.0..800.0);
            let v = rng.gen_range(-100.0..600.0);
            let los = los_vector(&intr, PixelPoint::new(u, v));
            assert_eq!(los.r.x, (u - intr.cx) / intr.fx);
            assert_eq!(los.r.y, (v - intr.cy) / intr.fy);
            assert_eq!(los.r.z, 1.0);
        }
    }

    #[test]
    fn centering_zero_at_goal() {
        let intr = CameraIntrinsics::default();
        let params = PursuitParams { r_y_goal: 0.0, ..PursuitParams::default() };
        let (cmd, converged) = position_target_in_image(&LosVector::new(0.0, 0.0), &intr, &params);
        assert_eq!(cmd, Vec3::ZERO);
        assert!(converged);
    }

    #[test]
    fn pursuit_speed_is_exact_and_biased_upward() {
        let intr = CameraIntrinsics::default();
        let params = PursuitParams::default();
        let pose = Pose::new(Vec3::new(0.0, 0.0, 2.0), 0.3);
        let cam = CameraPose::nominal(&pose, 0.0);
        let mut rng = crate::rng::stream(4, "guidance-pursue");
        for _ in 0..200 {
            let los = los_vector(
                &intr,
                PixelPoint::new(rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)),
            );
            let cmd = pursue_along_los(&los, &cam, &params);
            assert_relative_eq!(cmd.norm(), params.pursuit_speed, epsilon = 1e-9);
        }
        // centered target, zero bias: pure forward
        let no_bias = PursuitParams { upward_bias: 0.0, ..params };
        let cmd = pursue_along_los(&LosVector::new(0.0, 0.0), &cam, &no_bias);
        let forward = cam.forward() * no_bias.pursuit_speed;
        assert_relative_eq!(cmd.x, forward.x, epsilon = 1e-9);
        assert_relative_eq!(cmd.y, forward.y, epsilon = 1e-9);
        assert_relative_eq!(cmd.z, forward.z, epsilon = 1e-9);
    }

    #[test]
    fn ball_refine_signs_and_vanishing_los() {
        let intr = CameraIntrinsics::default();
        let params = PursuitParams::default();
        let pose = Pose::new(Vec3::new(0.0, 0.0, 10.0), 0.0);
        let cam = CameraPose::nominal(&pose, 0.0);
        // centered ball: zero command (the vanishing-LOS pathology)
        let cmd = ball_refine(&los_vector(&intr, PixelPoint::new(intr.cx, intr.cy)), &cam, &params);
        assert_eq!(cmd, Vec3::ZERO);
        // ball at the left edge: dominant lateral component toward it
        let cmd = ball_refine(&los_vector(&intr, PixelPoint::new(0.0, intr.cy)), &cam, &params);
        // facing +x, image left is +y in the world
        assert!(cmd.y > 0.0, "lateral command {cmd:?}");
        assert!(cmd.y.abs() > 10.0 * cmd.z.abs());
        assert_relative_eq!(cmd.x, 0.0, epsilon = 1e-12); // no forward motion
    }

    /// Closed-loop centering: noiseless sim, level camera, static balloon
    /// offset 100 px from the goal. Must enter the convergence box within
    /// 4 s and keep the pixel error non-increasing after the lag
    /// transient.
    #[test]
    fn closed_loop_centering_converges() {
        let intr = CameraIntrinsics::default();
        let params = PursuitParams::default();
        let balloon_z = 2.5 + 0.3;
        // place the balloon 4 m ahead, offset laterally so the initial
        // pixel error is ~100 px horizontally
        let offset = 100.0 / intr.fx * 4.0;
        let spec = BalloonSpec { anchor: Vec3::new(4.0, -offset, 0.0), ..BalloonSpec::default() };
        let uav = UavState::at(Vec3::new(0.0, 0.0, balloon_z + params.r_y_goal * 4.0), 0.0);
        let mut world = WorldState::new(
            uav,
            vec![TargetSpec::balloon(spec)],
            None,
            UavParams::default(),
            Vec3::ZERO,
            1,
        );
        let dt = 0.05;
        let mut converged_at = None;
        let mut last_err = f64::INFINITY;
        for tick in 0..(8.0 / dt) as usize {
            let cam = CameraPose::actual(&world.uav.pose, 0.0);
            let px = project(&intr, &cam, world.targets[0].position).pixel().unwrap();
            let los = los_vector(&intr, px);
            let (cmd_cam, converged) = position_target_in_image(&los, &intr, &params);
            let err_px = ((los.r.x * intr.fx).powi(2)
                + ((los.r.y - params.r_y_goal) * intr.fy).powi(2))
            .sqrt();
            let t = tick as f64 * dt;
            if t > 1.0 {
                assert!(err_px <= last_err + 1e-6, "pixel error grew at t={t}: {err_px} > {last_err}");
            }
            last_err = err_px;
            if converged && converged_at.is_none() {
                converged_at = Some(t);
            }
            let cmd_world = CameraPose::nominal(&world.uav.pose, 0.0).camera_to_world_dir(cmd_cam);
            world = step_world(&world, (cmd_world, 0.0), dt).unwrap();
        }
        let t = converged_at.expect("never converged");
        assert!(t <= 4.0, "converged at {t}");
    }

    /// Pursuit oracle: from 3 m, a locked LOS dash pops a static balloon.
    #[test]
    fn pursuit_pops_static_balloon() {
        let intr = CameraIntrinsics::default();
        let params = PursuitParams::default();
        let balloon_z = 2.5 + 0.3;
        let spec = BalloonSpec { anchor: Vec3::new(3.0, 0.0, 0.0), ..BalloonSpec::default() };
        // start centered on the upward-LOS goal
        let uav = UavState::at(Vec3::new(0.0, 0.0, balloon_z + params.r_y_goal * 3.0), 0.0);
        let mut world = WorldState::new(
            uav,
            vec![TargetSpec::balloon(spec)],
            None,
            UavParams::default(),
            Vec3::ZERO,
            1,
        );
        let cam = CameraPose::actual(&world.uav.pose, 0.0);
        let px = project(&intr, &cam, world.targets[0].position).pixel().unwrap();
        let los = los_vector(&intr, px);
        let locked = pursue_along_los(&los, &CameraPose::nominal(&world.uav.pose, 0.0), &params);
        let mut popped = false;
        for _ in 0..(5.0 / 0.05) as usize {
            world = step_world(&world, (locked, 0.0), 0.05).unwrap();
            if balloon_contact(&world, 0).popped {
                popped = true;
                break;
            }
        }
        assert!(popped);
    }

    #[test]
    fn waypoints_advance_and_complete() {
        let plan = vec![Vec3::new(5.0, 0.0, 2.0), Vec3::new(5.0, 5.0, 2.0)];
        let params = FollowParams::default();
        let mut follower = WaypointFollower::default();
        // within capture radius of the first waypoint: index advances
        let pose = Pose::new(Vec3::new(4.5, 0.0, 2.0), 0.0);
        let out = follow_waypoints(&pose, &plan, &mut follower, &params, HeadingPolicy::PathTangent);
        assert_eq!(follower.index, 1);
        assert!(!out.done);
        // command points at the new waypoint
        assert!(out.velocity.y > 0.0);
        assert!(out.velocity.norm() <= params.cruise_speed + 1e-12);
        // past the final waypoint: done
        let pose = Pose::new(Vec3::new(5.0, 5.0, 2.0), 0.0);
        let out = follow_waypoints(&pose, &plan, &mut follower, &params, HeadingPolicy::PathTangent);
        assert!(out.done);
        assert_eq!(out.velocity, Vec3::ZERO);
    }

    #[test]
    fn colinear_waypoints_fly_straight() {
        let plan: Vec<Vec3> = (1..=6).map(|i| Vec3::new(2.0 * i as f64, 0.0, 2.0)).collect();
        let params = FollowParams::default();
        let mut follower = WaypointFollower::default();
        let mut world = WorldState::new(
            UavState::at(Vec3::new(0.0, 0.0, 2.0), 0.0),
            vec![],
            None,
            UavParams::default(),
            Vec3::ZERO,
            1,
        );
        let mut max_cross_track: f64 = 0.0;
        for _ in 0..(12.0 / 0.05) as usize {
            let out = follow_waypoints(
                &world.uav.pose,
                &plan,
                &mut follower,
                &params,
                HeadingPolicy::PathTangent,
            );
            if out.done {
                break;
            }
            world = step_world(&world, (out.velocity, out.yaw_rate), 0.05).unwrap();
            max_cross_track = max_cross_track.max(world.uav.pose.position.y.abs());
        }
        assert!(follower.index >= 5);
        assert!(max_cross_track < 0.05, "cross-track {max_cross_track}");
    }

    /// A gimbal yaw offset rotates the realized world command by exactly
    /// minus the offset: the sensing frame includes the fault, the
    /// command mapping does not.
    #[test]
    fn gimbal_offset_rotates_commands() {
        let intr = CameraIntrinsics::default();
        let params = PursuitParams { upward_bias: 0.0, ..PursuitParams::default() };
        let target = Vec3::new(4.0, 1.0, 2.6);
        let mut pose = Pose::new(Vec3::new(0.0, 0.0, 2.6), 0.0);

        let cmd = |pose: &Pose| -> Vec3 {
            let cam_true = CameraPose::actual(pose, 0.0);
            let px = project(&intr, &cam_true, target).pixel().unwrap();
            let los = los_vector(&intr, px);
            pursue_along_los(&los, &CameraPose::nominal(pose, 0.0), &params)
        };

        let clean = cmd(&pose);
        let delta = 10.0_f64.to_radians();
        pose.gimbal_offset_yaw = delta;
        let faulted = cmd(&pose);
        // for a level camera the faulted command is the clean one rotated
        // by -delta about z
        let expected = clean.rotated_z(-delta);
        assert_relative_eq!(faulted.x, expected.x, epsilon = 1e-9);
        assert_relative_eq!(faulted.y, expected.y, epsilon = 1e-9);
        assert_relative_eq!(faulted.z, expected.z, epsilon = 1e-9);
    }
}
