//! Energy models and trajectory optimization for multirotor drones.
//!
//! - [`params`]: vehicle parameters and TOML loading
//! - [`downwash`]: rotor induced velocity in forward flight
//! - [`epm`]: energy per meter in steady cruise and its optimal airspeed
//! - [`regulator`]: extremum-seeking PID airspeed regulator
//! - [`dynamics`]: quadrotor equations of motion and RK4 integration
//! - [`motor_energy`]: per-motor electrical power and trajectory energy
//! - [`trajopt`]: minimum-energy trajectory optimization by collocation

pub mod ad;
pub mod downwash;
pub mod dynamics;
pub mod epm;
pub mod motor_energy;
pub mod params;
pub mod regulator;
pub mod trajopt;

pub use downwash::DownwashMethod;
pub use dynamics::{ControlInput, GravityMode, QuadState, Trajectory};
pub use epm::{AirspeedGrid, EpmBreakdown};
pub use params::{default_drone, Drone, DroneParams};
pub use trajopt::{BoundaryConditions, InitStrategy, IpmOptions, OptResult, OptStatus};
