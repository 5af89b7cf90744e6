//! TOML configuration for each subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use flight_energy::dynamics::{StateVector, STATE_DIM, STATE_NAMES};
use flight_energy::params::{default_drone, load_params};
use flight_energy::regulator::RegulatorConfig;
use flight_energy::trajopt::{scenarios, DEFAULT_NODES};
use flight_energy::{
    AirspeedGrid, BoundaryConditions, DownwashMethod, Drone, DroneParams, GravityMode, InitStrategy, IpmOptions,
    QuadState,
};

use crate::CliError;

/// Reads and parses a config file, or returns the default when `path` is absent.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("config types serialize to TOML")
}

/// Drone parameters from an inline `[drone]` table, a separate parameter
/// file resolved against `base`, or the built-in defaults.
pub fn resolve_drone(drone: &Option<DroneParams>, drone_file: &Option<PathBuf>, base: &Path) -> Result<Drone, CliError> {
    let params = match (drone, drone_file) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either `drone` or `drone_file`, not both".into())),
        (Some(p), None) => *p,
        (None, Some(f)) => load_params(base.join(f)).map_err(|e| CliError::Config(e.to_string()))?,
        (None, None) => default_drone(),
    };
    Drone::new(params).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpmCurveConfig {
    pub drone: Option<DroneParams>,
    pub drone_file: Option<PathBuf>,
    pub method: DownwashMethod,
    pub grid: AirspeedGrid,
    /// Adds a still-air range column when set, J.
    pub battery_energy_j: Option<f64>,
}

impl Default for EpmCurveConfig {
    fn default() -> Self {
        Self {
            drone: None,
            drone_file: None,
            method: DownwashMethod::Root,
            grid: AirspeedGrid::new(0.5, 25.0, 0.01),
            battery_energy_j: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownwashCompareConfig {
    pub drone: Option<DroneParams>,
    pub drone_file: Option<PathBuf>,
    pub grid: AirspeedGrid,
    /// Glauert cells are left blank below this airspeed, m/s.
    pub glauert_v_min: f64,
}

impl Default for DownwashCompareConfig {
    fn default() -> Self {
        Self {
            drone: None,
            drone_file: None,
            grid: AirspeedGrid::new(0.5, 25.0, 0.5),
            glauert_v_min: 1.0,
        }
    }
}

/// A parameter change applied to the EPM model mid-run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamChange {
    pub t: f64,
    /// Complete parameter set after the change; omitted keys take the
    /// built-in defaults.
    pub drone: DroneParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegulateConfig {
    pub drone: Option<DroneParams>,
    pub drone_file: Option<PathBuf>,
    pub method: DownwashMethod,
    pub regulator: RegulatorConfig,
    /// Initial airspeed, m/s.
    pub v0: f64,
    /// Airspeed lag time constant, s.
    pub plant_tau: f64,
    pub plant_rate_limit: Option<f64>,
    pub t_end: f64,
    pub events: Vec<ParamChange>,
}

impl Default for RegulateConfig {
    fn default() -> Self {
        Self {
            drone: None,
            drone_file: None,
            method: DownwashMethod::Root,
            regulator: RegulatorConfig::default(),
            v0: 4.0,
            plant_tau: 0.5,
            plant_rate_limit: None,
            t_end: 60.0,
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Takeoff,
    Landing,
}

/// A boundary-value problem. A preset supplies the reference boundary
/// states, horizon and gravity mode; explicit keys override it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Option<Preset>,
    /// Initial state by component name; omitted components are zero.
    pub x0: Option<BTreeMap<String, f64>>,
    /// Final state by component name; omitted components are free.
    pub xf: Option<BTreeMap<String, f64>>,
    pub t0: f64,
    pub t_f: Option<f64>,
    pub mode: Option<GravityMode>,
    pub nodes: usize,
    pub init: InitStrategy,
    pub solver: IpmOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            preset: None,
            x0: None,
            xf: None,
            t0: 0.0,
            t_f: None,
            mode: None,
            nodes: DEFAULT_NODES,
            init: InitStrategy::default(),
            solver: IpmOptions::default(),
        }
    }
}

fn state_index(name: &str) -> Result<usize, CliError> {
    STATE_NAMES.iter().position(|n| *n == name).ok_or_else(|| {
        CliError::Config(format!("unknown state component `{name}` (expected one of {})", STATE_NAMES.join(", ")))
    })
}

fn state_from_map(map: &BTreeMap<String, f64>) -> Result<QuadState, CliError> {
    let mut a: StateVector = [0.0; STATE_DIM];
    for (k, v) in map {
        a[state_index(k)?] = *v;
    }
    Ok(QuadState::from_array(&a))
}

fn final_from_map(map: &BTreeMap<String, f64>) -> Result<[Option<f64>; STATE_DIM], CliError> {
    let mut a = [None; STATE_DIM];
    for (k, v) in map {
        a[state_index(k)?] = Some(*v);
    }
    Ok(a)
}

impl ScenarioConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            ..Self::default()
        }
    }

    /// Applies `preset` when no boundary states are given at all.
    pub fn or_preset(mut self, preset: Preset) -> Self {
        if self.preset.is_none() && self.x0.is_none() && self.xf.is_none() {
            self.preset = Some(preset);
        }
        self
    }

    pub fn resolve(&self, drone: &Drone) -> Result<(BoundaryConditions, GravityMode), CliError> {
        let base = self.preset.map(|p| match p {
            Preset::Takeoff => (scenarios::takeoff_bc(scenarios::REFERENCE_HORIZON), GravityMode::Standard),
            Preset::Landing => (scenarios::landing_bc(scenarios::REFERENCE_HORIZON), scenarios::landing_mode(drone)),
        });
        let x0 = match (&self.x0, &base) {
            (Some(m), _) => state_from_map(m)?,
            (None, Some((bc, _))) => bc.x0,
            (None, None) => return Err(CliError::Config("scenario needs `x0` or a `preset`".into())),
        };
        let xf = match (&self.xf, &base) {
            (Some(m), _) => final_from_map(m)?,
            (None, Some((bc, _))) => bc.xf,
            (None, None) => return Err(CliError::Config("scenario needs `xf` or a `preset`".into())),
        };
        let tf = match (self.t_f, &base) {
            (Some(t), _) => t,
            (None, Some((bc, _))) => self.t0 + (bc.tf - bc.t0),
            (None, None) => return Err(CliError::Config("scenario needs `t_f` or a `preset`".into())),
        };
        let mode = self.mode.or(base.map(|b| b.1)).unwrap_or(GravityMode::Standard);
        let bc = BoundaryConditions {
            x0,
            xf,
            t0: self.t0,
            tf,
        };
        bc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.nodes < 10 {
            return Err(CliError::Config(format!("need at least 10 nodes, got {}", self.nodes)));
        }
        Ok((bc, mode))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub drone: Option<DroneParams>,
    pub drone_file: Option<PathBuf>,
    pub scenario: ScenarioConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            drone: None,
            drone_file: None,
            scenario: ScenarioConfig::preset(Preset::Landing),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub drone: Option<DroneParams>,
    pub drone_file: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    pub t_f_values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            drone: None,
            drone_file: None,
            scenario: ScenarioConfig::preset(Preset::Landing),
            t_f_values: scenarios::SWEEP_HORIZONS.to_vec(),
        }
    }
}
