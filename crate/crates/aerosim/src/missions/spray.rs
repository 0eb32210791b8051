//! Stochastic spray-cone pump model: droplets sampled in a cone from
//! the nozzle; the volume whose rays pass through the fire opening
//! accumulates. A stuck leakage stopper blocks flow entirely for the
//! attempt.

use crate::math::Vec3;
use crate::world::{BuildingSpec, FireSpec};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpParams {
    /// Tank capacity, milliliters.
    pub capacity_ml: f64,
    /// Flow rate while pumping, mL/s.
    pub flow_ml_per_s: f64,
    /// Volume carried per simulated droplet, mL.
    pub droplet_ml: f64,
    /// Angular spread of the cone (Gaussian sigma), degrees.
    pub cone_sigma_deg: f64,
    /// Maximum droplet reach, meters.
    pub range: f64,
    /// Nozzle offset along body +x from the vehicle origin.
    pub nozzle_forward: f64,
}

impl Default for PumpParams {
    fn default() -> Self {
        PumpParams {
            capacity_ml: 1500.0,
            flow_ml_per_s: 25.0,
            droplet_ml: 0.5,
            cone_sigma_deg: 3.0,
            range: 2.5,
            nozzle_forward: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PumpState {
    pub remaining_ml: f64,
    /// Stuck leakage stopper: no flow until the next refill.
    pub stopper_stuck: bool,
    /// Fractional droplet accumulator.
    carry: f64,
}

impl PumpState {
    pub fn full(params: &PumpParams) -> Self {
        PumpState { remaining_ml: params.capacity_ml, stopper_stuck: false, carry: 0.0 }
    }

    pub fn refill(&mut self, params: &PumpParams) {
        self.remaining_ml = params.capacity_ml;
        self.stopper_stuck = false;
        self.carry = 0.0;
    }

    pub fn empty(&self) -> bool {
        self.remaining_ml <= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SprayDelivery {
    /// Volume that passed through the opening this call, mL.
    pub into_opening_ml: f64,
    /// Volume expelled this call, mL.
    pub expelled_ml: f64,
}

/// Pump for `duration` seconds from the given nozzle pose toward the
/// fire's wall. Droplet directions scatter around the nozzle axis with
/// the configured Gaussian cone; a droplet scores when its ray crosses
/// the wall plane inside the opening disc within range.
pub fn spray_water(
    nozzle_pos: Vec3,
    nozzle_dir: Vec3,
    fire: &FireSpec,
    building: &BuildingSpec,
    pump: &mut PumpState,
    params: &PumpParams,
    duration: f64,
    rng: &mut ChaCha8Rng,
) -> SprayDelivery {
    if pump.stopper_stuck || pump.empty() || duration <= 0.0 {
        return SprayDelivery::default();
    }
    let volume = (params.flow_ml_per_s * duration).min(pump.remaining_ml);
    let exact = volume / params.droplet_ml + pump.carry;
    let droplets = exact.floor() as usize;
    pump.carry = exact - droplets as f64;
    pump.remaining_ml -= volume;

    let opening_center = building.wall_point(fire.wall, fire.along, fire.height);
    let normal = fire.wall.outward_normal();
    let axis = nozzle_dir.normalized();
    // orthonormal basis around the nozzle axis
    let ref_up = if axis.z.abs() < 0.9 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(1.0, 0.0, 0.0) };
    let side = axis.cross(ref_up).normalized();
    let up = side.cross(axis);
    let sigma = params.cone_sigma_deg.to_radians();
    let normal_dist = Normal::new(0.0, sigma).expect("cone sigma");

    let mut hits = 0usize;
    for _ in 0..droplets {
        let a = normal_dist.sample(rng);
        let b = normal_dist.sample(rng);
        let dir = (axis + side * a.tan() + up * b.tan()).normalized();
        // intersect the fire's wall plane
        let denom = dir.dot(normal);
        if denom.abs() < 1e-9 {
            continue;
        }
        let t = (opening_center - nozzle_pos).dot(normal) / denom;
        if t <= 0.0 || t > params.range {
            continue;
        }
        let impact = nozzle_pos + dir * t;
        if impact.distance(opening_center) <= fire.opening_diameter / 2.0 {
            hits += 1;
        }
    }
    SprayDelivery {
        into_opening_ml: hits as f64 * params.droplet_ml,
        expelled_ml: volume,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WallFace;

    fn test_fire() -> FireSpec {
        FireSpec {
            wall: WallFace::South,
            along: 5.0,
            height: 1.5,
            opening_diameter: 0.12,
            active: true,
            residual_hot: false,
        }
    }

    fn test_building() -> BuildingSpec {
        BuildingSpec { min: (0.0, 0.0), max: (10.0, 8.0), height: 4.0, windows: vec![] }
    }

    fn rng() -> ChaCha8Rng {
        crate::rng::stream(21, crate::rng::keys::SPRAY)
    }

    #[test]
    fn empty_tank_delivers_nothing() {
        let params = PumpParams::default();
        let mut pump = PumpState::full(&params);
        pump.remaining_ml = 0.0;
        let d = spray_water(
            Vec3::new(5.0, -1.2, 1.5),
            Vec3::new(0.0, 1.0, 0.0),
            &test_fire(),
            &test_building(),
            &mut pump,
            &params,
            1.0,
            &mut rng(),
        );
        assert_eq!(d, SprayDelivery::default());
    }

    #[test]
    fn on_axis_zero_spread_full_flow() {
        let params = PumpParams { cone_sigma_deg: 0.0, ..PumpParams::default() };
        let mut pump = PumpState::full(&params);
        let d = spray_water(
            Vec3::new(5.0, -1.2, 1.5),
            Vec3::new(0.0, 1.0, 0.0),
            &test_fire(),
            &test_building(),
            &mut pump,
            &params,
            2.0,
            &mut rng(),
        );
        assert!((d.expelled_ml - 50.0).abs() < params.droplet_ml);
        assert!((d.into_opening_ml - d.expelled_ml).abs() < params.droplet_ml);
    }

    #[test]
    fn stuck_stopper_blocks_flow() {
        let params = PumpParams::default();
        let mut pump = PumpState::full(&params);
        pump.stopper_stuck = true;
        let d = spray_water(
            Vec3::new(5.0, -1.2, 1.5),
            Vec3::new(0.0, 1.0, 0.0),
            &test_fire(),
            &test_building(),
            &mut pump,
            &params,
            2.0,
            &mut rng(),
        );
        assert_eq!(d, SprayDelivery::default());
        assert_eq!(pump.remaining_ml, params.capacity_ml);
        pump.refill(&params);
        assert!(!pump.stopper_stuck);
    }

    #[test]
    fn off_axis_aim_delivers_less() {
        let params = PumpParams::default();
        let fire = test_fire();
        let building = test_building();
        let mut rng = rng();

        let mut delivered_centered = 0.0;
        let mut delivered_offset = 0.0;
        for _ in 0..20 {
            let mut pump = PumpState::full(&params);
            delivered_centered += spray_water(
                Vec3::new(5.0, -1.2, 1.5),
                Vec3::new(0.0, 1.0, 0.0),
                &fire,
                &building,
                &mut pump,
                &params,
                1.0,
                &mut rng,
            )
            .into_opening_ml;
            let mut pump = PumpState::full(&params);
            delivered_offset += spray_water(
                Vec3::new(5.3, -1.2, 1.5), // 0.3 m lateral aim error
                Vec3::new(0.0, 1.0, 0.0),
                &fire,
                &building,
                &mut pump,
                &params,
                1.0,
                &mut rng,
            )
            .into_opening_ml;
        }
        assert!(delivered_centered > 0.0);
        assert!(delivered_offset < delivered_centered * 0.25, "{delivered_offset} vs {delivered_centered}");
    }

    #[test]
    fn tank_depletes_across_calls() {
        let params = PumpParams::default();
        let mut pump = PumpState::full(&params);
        let mut rng = rng();
        let mut total = 0.0;
        while !pump.empty() {
            let d = spray_water(
                Vec3::new(5.0, -1.2, 1.5),
                Vec3::new(0.0, 1.0, 0.0),
                &test_fire(),
                &test_building(),
                &mut pump,
                &params,
                1.0,
                &mut rng,
            );
            total += d.expelled_ml;
            assert!(d.expelled_ml > 0.0);
        }
        assert!((total - params.capacity_ml).abs() < 1.0);
    }
}
