//! Cruise thrust and energy per meter (EPM) as functions of airspeed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::downwash::{self, DownwashError, DownwashMethod};
use crate::params::Drone;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpmError {
    #[error("EPM requires a positive airspeed, got {0} m/s")]
    NonPositiveAirspeed(f64),
    #[error("cruise thrust undefined at v = {v_a} m/s, path angle {theta_path} rad (negative radicand)")]
    InvalidCondition { v_a: f64, theta_path: f64 },
    #[error("invalid airspeed grid: {0}")]
    BadGrid(String),
    #[error("battery energy must be positive, got {0} J")]
    NonPositiveEnergy(f64),
    #[error(transparent)]
    Downwash(#[from] DownwashError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CruiseCondition {
    /// Airspeed, m/s.
    pub v_a: f64,
    /// Flight path angle, rad. Level cruise is 0.
    pub theta_path: f64,
    pub method: DownwashMethod,
}

impl CruiseCondition {
    pub fn level(v_a: f64, method: DownwashMethod) -> Self {
        Self {
            v_a,
            theta_path: 0.0,
            method,
        }
    }
}

/// EPM and its additive decomposition. The four aerodynamic terms are stored
/// before division by the transfer efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpmBreakdown {
    /// J/m.
    pub total: f64,
    /// κ·T·w/v.
    pub induced: f64,
    /// ½ρ·ΣC_D·A·v².
    pub parasitic: f64,
    /// κ₂·(mg)^1.5/v.
    pub profile: f64,
    /// κ₃·(mg)^0.5·v.
    pub rotor: f64,
    /// P_avio/(η_c·v).
    pub avionics: f64,
    /// Cruise thrust, N.
    pub thrust: f64,
    /// Downwash used in the induced term, m/s.
    pub downwash: f64,
}

pub fn cruise_thrust(c: &CruiseCondition, drone: &Drone) -> Result<f64, EpmError> {
    let p = &drone.params;
    let weight = drone.weight();
    let drag = 0.5 * p.rho * drone.derived.cda_sum * c.v_a * c.v_a;
    let radicand = weight * weight + drag * drag + 2.0 * drag * weight * c.theta_path.sin();
    if !(radicand >= 0.0) {
        return Err(EpmError::InvalidCondition {
            v_a: c.v_a,
            theta_path: c.theta_path,
        });
    }
    Ok(radicand.sqrt())
}

pub fn epm(c: &CruiseCondition, drone: &Drone) -> Result<EpmBreakdown, EpmError> {
    if !(c.v_a > 0.0) {
        return Err(EpmError::NonPositiveAirspeed(c.v_a));
    }
    let p = &drone.params;
    let v = c.v_a;
    let weight = drone.weight();
    let thrust = cruise_thrust(c, drone)?;
    let w = downwash::downwash(c.method, thrust, v, drone)?;

    let induced = p.kappa * thrust * w / v;
    let parasitic = 0.5 * p.rho * drone.derived.cda_sum * v * v;
    let profile = p.kappa2 * weight.powf(1.5) / v;
    let rotor = p.kappa3 * weight.sqrt() * v;
    let avionics = p.p_avio / (p.eta_c * v);
    let total = (induced + parasitic + profile + rotor) / p.eta + avionics;
    Ok(EpmBreakdown {
        total,
        induced,
        parasitic,
        profile,
        rotor,
        avionics,
        thrust,
        downwash: w,
    })
}

/// Level-flight EPM total, J/m.
pub fn epm_total(v_a: f64, method: DownwashMethod, drone: &Drone) -> Result<f64, EpmError> {
    epm(&CruiseCondition::level(v_a, method), drone).map(|b| b.total)
}

/// Inclusive, evenly spaced airspeed grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirspeedGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AirspeedGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn validate(&self) -> Result<(), EpmError> {
        if !(self.start > 0.0) {
            return Err(EpmError::BadGrid(format!("start {} must be positive", self.start)));
        }
        if !(self.step > 0.0) {
            return Err(EpmError::BadGrid(format!("step {} must be positive", self.step)));
        }
        if !(self.stop >= self.start) {
            return Err(EpmError::BadGrid(format!(
                "empty grid: stop {} < start {}",
                self.stop, self.start
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        if !(self.step > 0.0 && self.stop >= self.start) {
            return 0;
        }
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.start + i as f64 * self.step)
    }
}

/// EPM breakdown at every grid point, in grid order.
pub fn epm_curve(
    drone: &Drone,
    method: DownwashMethod,
    grid: &AirspeedGrid,
) -> Result<Vec<(f64, EpmBreakdown)>, EpmError> {
    grid.validate()?;
    let points: Vec<f64> = grid.points().collect();
    points
        .par_iter()
        .map(|&v| epm(&CruiseCondition::level(v, method), drone).map(|b| (v, b)))
        .collect()
}

/// Grid-search minimizer of level-flight EPM; ties go to the smaller airspeed.
pub fn optimal_airspeed(
    drone: &Drone,
    method: DownwashMethod,
    grid: &AirspeedGrid,
) -> Result<(f64, f64), EpmError> {
    let curve = epm_curve(drone, method, grid)?;
    let mut best: Option<(f64, f64)> = None;
    for (v, b) in curve {
        match best {
            Some((_, e)) if b.total >= e => {}
            _ => best = Some((v, b.total)),
        }
    }
    best.ok_or_else(|| EpmError::BadGrid("empty grid".into()))
}

/// Still-air range `battery_energy / EPM(v)` at every grid point, m.
pub fn range_curve(
    drone: &Drone,
    method: DownwashMethod,
    battery_energy: f64,
    grid: &AirspeedGrid,
) -> Result<Vec<(f64, f64)>, EpmError> {
    if !(battery_energy > 0.0) {
        return Err(EpmError::NonPositiveEnergy(battery_energy));
    }
    Ok(epm_curve(drone, method, grid)?
        .into_iter()
        .map(|(v, b)| (v, battery_energy / b.total))
        .collect())
}
