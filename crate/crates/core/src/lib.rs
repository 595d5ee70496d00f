//! Global trajectory-tracking control for tailsitter flying wings.
//!
//! The crate bundles everything needed to fly a two-rotor, two-flap tailsitter
//! through its whole envelope in simulation:
//!
//! - [`frames`]: NED/body/zero-lift frame conventions, quaternions, ZXY Euler angles
//! - [`aero`]: φ-theory force and moment model
//! - [`flatness`]: flat output → attitude, thrust, rates, moments, actuator inputs
//! - [`filters`]: Butterworth biquads and the filtered derivative used by INDI
//! - [`controller`]: the cascaded PD + INDI trajectory-tracking controller
//! - [`baseline`]: non-incremental / no-feedforward ablation variants
//! - [`sim`]: rigid-body plant, actuator lags and sensor emulation
//! - [`trajectory`]: analytic reference generators and feasibility checks
//! - [`sysid`]: analytical and least-squares aerodynamic coefficient estimation
//! - [`scenario`]: closed-loop scenario runner, logs, metrics and comparisons
//! - [`config`]: human-readable parameter, gain and scenario files

pub mod aero;
pub mod baseline;
pub mod config;
pub mod controller;
pub mod filters;
pub mod flatness;
pub mod frames;
pub mod jet;
pub mod scenario;
pub mod sim;
pub mod sysid;
pub mod trajectory;

/// 3-vector of f64.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix of f64.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Gravitational acceleration, m/s². Acts along +i_z in the NED world frame.
pub const GRAVITY: f64 = 9.81;

pub use aero::{ActuatorState, AeroCoeffs, Provenance, VehicleParams};
pub use controller::{ControlCommand, Controller, ControllerGains, SensorFrame};
pub use flatness::FlatOutput;
pub use frames::{EulerZxy, Frame, Rotation, UnitQuat};
pub use sim::{PlantConfig, SimState};
