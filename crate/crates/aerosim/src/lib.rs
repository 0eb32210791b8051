//! Deterministic, seedable simulator and control library for aerial
//! interaction missions: balloon popping, ball catching, block pick-and-place,
//! and building firefighting.
//!
//! The crate is organised around a fixed-step kinematic world
//! ([`world`]), synthetic sensors ([`sensing`]), line-of-sight guidance
//! ([`guidance`]), image-based visual servoing ([`servo`]), coverage and
//! wall-following planners ([`search`]), raster vision algorithms
//! ([`vision`]), mission state machines with recovery behaviors
//! ([`missions`]), a startup sequencer ([`deploy`]), and a scenario/Monte
//! Carlo harness ([`harness`]).
//!
//! Everything is deterministic given a scenario and a seed: independent
//! RNG streams are derived per concern (see [`rng`]) so that toggling one
//! fault source never perturbs the noise draws of another.

pub mod deploy;
pub mod fsm;
pub mod guidance;
pub mod harness;
pub mod math;
pub mod missions;
pub mod raster;
pub mod rng;
pub mod scenario;
pub mod search;
pub mod sensing;
pub mod servo;
pub mod vision;
pub mod world;

pub use math::Vec3;
