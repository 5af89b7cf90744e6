//! Takeoff and landing boundary conditions of the reference mission.
//!
//! Takeoff climbs from rest on the ground to 200 m altitude and 200 m
//! downrange, ending in forward flight at 11 m/s with 0.3 rad pitch. Landing
//! starts from that cruise state 200 m short of the pad and ends at rest on
//! it with the motors stopped.

use crate::dynamics::{GravityMode, QuadState};
use crate::params::Drone;

use super::BoundaryConditions;

/// Motor speed at the takeoff start, rad/s.
pub const TAKEOFF_OMEGA: f64 = 912.32;
/// Motor speed in the cruise state joining takeoff and landing, rad/s.
pub const CRUISE_OMEGA: f64 = 1172.3;
pub const CRUISE_SPEED: f64 = 11.0;
pub const CRUISE_PITCH: f64 = 0.3;
pub const CRUISE_ALTITUDE: f64 = 200.0;
pub const LANDING_START_X: f64 = 5870.21;
pub const LANDING_PAD_X: f64 = 6070.21;
/// Horizon used for both reference maneuvers, s.
pub const REFERENCE_HORIZON: f64 = 22.0;

fn cruise_state(x: f64) -> QuadState {
    QuadState {
        x,
        z: CRUISE_ALTITUDE,
        vx: CRUISE_SPEED,
        theta: CRUISE_PITCH,
        omega: [CRUISE_OMEGA; 4],
        ..QuadState::default()
    }
}

pub fn takeoff_bc(tf: f64) -> BoundaryConditions {
    let x0 = QuadState::resting([0.0; 3], TAKEOFF_OMEGA);
    BoundaryConditions::fixed(x0, cruise_state(200.0), 0.0, tf)
}

pub fn landing_bc(tf: f64) -> BoundaryConditions {
    let xf = QuadState::resting([LANDING_PAD_X, 0.0, 0.0], 0.0);
    BoundaryConditions::fixed(cruise_state(LANDING_START_X), xf, 0.0, tf)
}

/// Landing incentive centred on the pad.
pub fn landing_mode(drone: &Drone) -> GravityMode {
    GravityMode::Incentivized {
        target: [LANDING_PAD_X, 0.0, 0.0],
        k_decay: drone.params.k_decay,
    }
}

/// Horizons of the landing incentive comparison, s.
pub const SWEEP_HORIZONS: [f64; 5] = [17.0, 19.0, 22.0, 26.0, 30.0];
