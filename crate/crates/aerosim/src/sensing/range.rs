//! 1-D range sensors: forward (wall following), downward (altimeter),
//! and short-range (block contact at the manipulator base).

use crate::math::Vec3;
use crate::world::{Pose, TargetKind, WorldState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeReading {
    /// `None` encodes NO_RETURN.
    pub distance: Option<f64>,
    pub max_range: f64,
}

impl RangeReading {
    pub fn no_return(max_range: f64) -> Self {
        RangeReading { distance: None, max_range }
    }

    fn ret(distance: f64, max_range: f64) -> Self {
        // clamp into the sensor's valid interval
        RangeReading { distance: Some(distance.clamp(1e-3, max_range)), max_range }
    }

    /// NO_RETURN encoded as max_range, the median-filter convention.
    pub fn value_or_max(&self) -> f64 {
        self.distance.unwrap_or(self.max_range)
    }

    pub fn is_return(&self) -> bool {
        self.distance.is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeParams {
    pub forward_max: f64,
    pub down_max: f64,
    pub short_max: f64,
    pub noise_sigma: f64,
    /// Short reading produced while a block is attached.
    pub attached_reading: f64,
}

impl Default for RangeParams {
    fn default() -> Self {
        RangeParams {
            forward_max: 60.0,
            down_max: 60.0,
            short_max: 3.0,
            noise_sigma: 0.02,
            attached_reading: 0.005,
        }
    }
}

/// Forward-sensor fault mode: substitutes spurious readings with
/// probability `fault_prob` (uniform over the range interval).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeFaults {
    pub fault_prob: f64,
}

impl Default for RangeFaults {
    fn default() -> Self {
        RangeFaults { fault_prob: 0.0 }
    }
}

fn noisy(value: f64, sigma: f64, max: f64, rng: &mut ChaCha8Rng) -> RangeReading {
    let noise = if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("range sigma").sample(rng)
    } else {
        0.0
    };
    RangeReading::ret(value + noise, max)
}

/// Ray along body +x at the current altitude against the building walls.
pub fn range_forward(
    pose: &Pose,
    world: &WorldState,
    params: &RangeParams,
    faults: &RangeFaults,
    rng: &mut ChaCha8Rng,
) -> RangeReading {
    if faults.fault_prob > 0.0 && rng.gen::<f64>() < faults.fault_prob {
        let spurious = 0.1 + rng.gen::<f64>() * (params.forward_max - 0.1);
        return RangeReading::ret(spurious, params.forward_max);
    }
    let building = match &world.building {
        Some(b) => b,
        None => return RangeReading::no_return(params.forward_max),
    };
    match building.raycast(pose.position, pose.forward(), params.forward_max) {
        Some(hit) if !hit.through_window => {
            noisy(hit.distance, params.noise_sigma, params.forward_max, rng)
        }
        // open window or no wall: nothing comes back
        _ => RangeReading::no_return(params.forward_max),
    }
}

/// Height of the support surface directly below a world xy position.
fn surface_below(world: &WorldState, at: Vec3) -> f64 {
    let mut surface: f64 = 0.0;
    if let Some(b) = &world.building {
        if at.x >= b.min.0 && at.x <= b.max.0 && at.y >= b.min.1 && at.y <= b.max.1 {
            surface = surface.max(b.height);
        }
    }
    for (i, target) in world.targets.iter().enumerate() {
        if world.carried_block == Some(i) {
            continue;
        }
        if let TargetKind::Block(spec) = &target.spec.kind {
            let rel = (at - target.position).rotated_z(-spec.yaw);
            if rel.x.abs() <= spec.dims.0 / 2.0 && rel.y.abs() <= spec.dims.1 / 2.0 {
                let top = target.position.z + spec.dims.2 / 2.0;
                if top <= at.z {
                    surface = surface.max(top);
                }
            }
        }
    }
    surface
}

/// Laser altimeter: altitude above ground, roof, or block top.
pub fn range_down(
    pose: &Pose,
    world: &WorldState,
    params: &RangeParams,
    rng: &mut ChaCha8Rng,
) -> RangeReading {
    let surface = surface_below(world, pose.position);
    let distance = pose.position.z - surface;
    if distance > params.down_max {
        return RangeReading::no_return(params.down_max);
    }
    noisy(distance, params.noise_sigma, params.down_max, rng)
}

/// Short-range contact sensor at the manipulator base. Reads near zero
/// while a block is attached.
pub fn range_short(
    pose: &Pose,
    world: &WorldState,
    params: &RangeParams,
    rng: &mut ChaCha8Rng,
) -> RangeReading {
    if world.carried_block.is_some() {
        return RangeReading::ret(params.attached_reading, params.short_max);
    }
    let tip = pose.position - Vec3::new(0.0, 0.0, world.params.manipulator_length);
    let surface = surface_below(world, tip);
    let distance = tip.z - surface;
    if distance > params.short_max || distance < 0.0 {
        return RangeReading::no_return(params.short_max);
    }
    noisy(distance, params.noise_sigma, params.short_max, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{
        BlockColor, BlockSpec, BuildingSpec, TargetSpec, UavParams, UavState, WallFace,
        WindowSpec, WorldState,
    };
    use approx::assert_relative_eq;

    fn quiet() -> RangeParams {
        RangeParams { noise_sigma: 0.0, ..RangeParams::default() }
    }

    fn rng() -> ChaCha8Rng {
        crate::rng::stream(5, crate::rng::keys::RANGE)
    }

    fn wall_world(uav: UavState) -> WorldState {
        let building = BuildingSpec {
            min: (0.0, 0.0),
            max: (10.0, 8.0),
            height: 4.0,
            windows: vec![WindowSpec {
                wall: WallFace::South,
                along: 4.0,
                bottom: 1.0,
                width: 0.6,
                height: 1.0,
            }],
        };
        WorldState::new(uav, vec![], Some(building), UavParams::default(), Vec3::ZERO, 1)
    }

    #[test]
    fn facing_wall_reads_standoff() {
        // facing the south wall from 1.2 m out
        let uav = UavState::at(Vec3::new(2.0, -1.2, 1.5), std::f64::consts::FRAC_PI_2);
        let world = wall_world(uav);
        let r = range_forward(&world.uav.pose, &world, &quiet(), &RangeFaults::default(), &mut rng());
        assert_relative_eq!(r.distance.unwrap(), 1.2, epsilon = 1e-9);
    }

    #[test]
    fn window_and_past_end_give_no_return() {
        let through_window = UavState::at(Vec3::new(4.3, -1.2, 1.5), std::f64::consts::FRAC_PI_2);
        let world = wall_world(through_window);
        let r = range_forward(&world.uav.pose, &world, &quiet(), &RangeFaults::default(), &mut rng());
        assert!(!r.is_return());

        let past_end = UavState::at(Vec3::new(-1.0, -1.2, 1.5), std::f64::consts::FRAC_PI_2);
        let world = wall_world(past_end);
        let r = range_forward(&world.uav.pose, &world, &quiet(), &RangeFaults::default(), &mut rng());
        assert!(!r.is_return());
    }

    #[test]
    fn down_reads_altitude_and_block_top() {
        let uav = UavState::at(Vec3::new(0.0, 0.0, 2.5), 0.0);
        let block = BlockSpec {
            position: Vec3::new(5.0, 5.0, 0.0),
            color: BlockColor::Red,
            yaw: 0.0,
            dims: (0.3, 0.2, 0.2),
            mass: 1.0,
            patch: (0.18, 0.12),
        };
        let world = WorldState::new(
            uav,
            vec![TargetSpec::block(block)],
            None,
            UavParams::default(),
            Vec3::ZERO,
            1,
        );
        let r = range_down(&world.uav.pose, &world, &quiet(), &mut rng());
        assert_relative_eq!(r.distance.unwrap(), 2.5, epsilon = 1e-9);

        let mut over_block = world.clone();
        over_block.uav.pose.position = Vec3::new(5.0, 5.0, 2.5);
        let r = range_down(&over_block.uav.pose, &over_block, &quiet(), &mut rng());
        assert_relative_eq!(r.distance.unwrap(), 2.3, epsilon = 1e-9);
    }

    #[test]
    fn short_sensor_contact_and_attach() {
        let block = BlockSpec {
            position: Vec3::new(0.0, 0.0, 0.0),
            color: BlockColor::Red,
            yaw: 0.0,
            dims: (0.3, 0.2, 0.2),
            mass: 1.0,
            patch: (0.18, 0.12),
        };
        // manipulator tip 0.05 above the 0.2 m block top: uav z = 0.2 + 0.35 + 0.05
        let uav = UavState::at(Vec3::new(0.0, 0.0, 0.60), 0.0);
        let mut world = WorldState::new(
            uav,
            vec![TargetSpec::block(block)],
            None,
            UavParams::default(),
            Vec3::ZERO,
            1,
        );
        let r = range_short(&world.uav.pose, &world, &quiet(), &mut rng());
        assert_relative_eq!(r.distance.unwrap(), 0.05, epsilon = 1e-9);

        world.carried_block = Some(0);
        let r = range_short(&world.uav.pose, &world, &quiet(), &mut rng());
        assert!(r.distance.unwrap() < 0.02);
    }

    #[test]
    fn readings_stay_in_valid_interval() {
        let uav = UavState::at(Vec3::new(2.0, -0.01, 1.5), std::f64::consts::FRAC_PI_2);
        let world = wall_world(uav);
        let params = RangeParams { noise_sigma: 0.5, ..RangeParams::default() };
        let mut rng = rng();
        for _ in 0..500 {
            let r = range_forward(&world.uav.pose, &world, &params, &RangeFaults::default(), &mut rng);
            if let Some(d) = r.distance {
                assert!(d > 0.0 && d <= r.max_range);
            }
        }
    }

    #[test]
    fn fault_mode_substitutes_spurious_readings() {
        let uav = UavState::at(Vec3::new(2.0, -1.2, 1.5), std::f64::consts::FRAC_PI_2);
        let world = wall_world(uav);
        let faults = RangeFaults { fault_prob: 1.0 };
        let mut rng = rng();
        let r1 = range_forward(&world.uav.pose, &world, &quiet(), &faults, &mut rng);
        let r2 = range_forward(&world.uav.pose, &world, &quiet(), &faults, &mut rng);
        // spurious draws differ from the true 1.2 m with overwhelming odds
        assert!(r1.is_return() && r2.is_return());
        assert!((r1.distance.unwrap() - 1.2).abs() > 1e-6 || (r2.distance.unwrap() - 1.2).abs() > 1e-6);
    }
}
