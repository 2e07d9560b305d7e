//! Day-scale charging-profile simulation and optimization for solar-powered
//! UAV communication fleets.
//!
//! A fleet of solar-chargeable UAVs serves ground users from a fixed serving
//! altitude, recharges above the clouds at a fixed charging altitude, or
//! parks on the ground. Each hour the fleet picks a joint altitude action;
//! the goal is to trade off served users against net energy loss while every
//! UAV keeps enough battery to reach the charging altitude and the hourly
//! service-rate floor is met.
//!
//! The crate is organized around that pipeline:
//!
//! - [`scenario`] — world description (area, hourly demand, fleet, physics,
//!   radio, solar and reward parameters) plus seeded user-field generation.
//! - [`energy`] — rotorcraft power, solar intensity, harvest power,
//!   altitude-dependent battery thresholds, and slot-level battery ledgers.
//! - [`radio`] — path loss, resource-block admission, two-stage user
//!   association, serving-UAV placement search, and the per-hour coverage
//!   map (serving-UAV count → max served users) the decision process uses.
//! - [`env`] — the episodic decision process: joint altitude actions, slot
//!   dynamics, constraint checks, and the three-part reward.
//! - [`solvers`] — a DDPG agent over a continuous relaxation of the joint
//!   action space, an exact finite-horizon DP oracle, full enumeration for
//!   tiny instances, a greedy baseline, and an evaluation harness.

extern crate blas_src;

pub mod energy;
pub mod env;
pub mod radio;
pub mod scenario;
pub mod seeding;
pub mod solvers;

pub use energy::{Altitude, PhysicsParams, SlotEnergyResult, SolarParams};
pub use env::{
    BeneficialMode, EnvState, Environment, EpisodeTrace, JointAction, RewardParams, StepOutcome,
};
pub use radio::{Association, CoverageMap, Placement, RadioParams};
pub use scenario::{Area, HourlyDemand, Scenario, UserField};
