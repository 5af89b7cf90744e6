//! Physical and electrical parameters of the drone.
//!
//! [`DroneParams`] holds the raw constants; [`DerivedParams`] holds the values
//! computed from them (total mass, thrust/drag factors, disk area, rotor
//! inertia). [`Drone`] bundles both and is what the rest of the crate consumes.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("cannot read parameter file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed parameter file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("parameter `{field}` = {value} violates invariant: {constraint}")]
    Invariant {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },
}

/// Raw drone and environment constants, SI units throughout.
///
/// Deserialization is strict: unknown keys are rejected and missing keys
/// fall back to [`default_drone`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneParams {
    /// Air density, kg/m³.
    pub rho: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
    /// Battery-to-propeller power transfer efficiency.
    pub eta: f64,
    /// Battery charging efficiency.
    pub eta_c: f64,
    /// Induced-power up-scaling factor.
    pub kappa: f64,
    /// Profile power factor, (m/kg)^½.
    pub kappa2: f64,
    /// Thrust–rotor-speed scaling factor, (m/kg)^(−½).
    pub kappa3: f64,
    /// Avionics power, W.
    pub p_avio: f64,

    pub n_rotors: u32,
    pub n_blades: u32,
    /// Offset between blade root and motor hub, m.
    pub eps_blade_offset: f64,
    /// Mass of one blade (included in `m1`), kg.
    pub m_blade: f64,
    /// Propeller radius, m.
    pub r_prop: f64,
    /// Spinning area of one rotor, m².
    pub sigma_disk: f64,
    /// Rotor-to-CoM distance, m.
    pub l_arm: f64,

    /// Body, battery and payload masses, kg.
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// Drag coefficients of body, battery and payload.
    pub cd1: f64,
    pub cd2: f64,
    pub cd3: f64,
    /// Projected areas of body, battery and payload, m².
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,

    /// Propeller thrust and torque coefficients.
    pub c_t: f64,
    pub c_q: f64,

    /// Motor moment of inertia, kg·m².
    pub j_m: f64,
    /// Body inertia, kg·m².
    pub i_x: f64,
    pub i_y: f64,
    pub i_z: f64,

    /// Landing-incentive decay rate, 1/m².
    pub k_decay: f64,

    /// Motor torque constant, V·s/rad.
    pub k_t_motor: f64,
    /// Motor friction torque, N·m.
    pub t_f_friction: f64,
    /// Phase-winding resistance, Ω.
    pub r_winding: f64,
    /// Viscous damping coefficient, N·m·s/rad.
    pub d_f: f64,
    /// Maximum motor angular velocity, rad/s.
    pub omega_max: f64,

    // Battery sizing constants. Not used by any model in this crate.
    /// Specific energy of the battery, J/kg.
    pub s_batt: f64,
    pub batt_safety_factor: f64,
    pub depth_of_discharge: f64,
}

impl Default for DroneParams {
    fn default() -> Self {
        default_drone()
    }
}

/// The reference small delivery quadrotor.
pub fn default_drone() -> DroneParams {
    DroneParams {
        rho: 1.225,
        g: 9.807,
        eta: 0.7,
        eta_c: 1.0,
        kappa: 1.15,
        kappa2: 0.790,
        kappa3: 0.0042,
        p_avio: 0.0,
        n_rotors: 4,
        n_blades: 4,
        eps_blade_offset: 0.004,
        m_blade: 0.0055,
        r_prop: 0.127,
        sigma_disk: 0.0507,
        l_arm: 0.175,
        m1: 1.07,
        m2: 1.0,
        m3: 0.5,
        cd1: 1.49,
        cd2: 1.0,
        cd3: 2.2,
        a1: 0.0599,
        a2: 0.0037,
        a3: 0.0135,
        c_t: 0.0048,
        c_q: 0.00023515,
        j_m: 4.9e-6,
        i_x: 0.081,
        i_y: 0.081,
        i_z: 0.142,
        k_decay: 3.0,
        k_t_motor: 0.01038,
        t_f_friction: 4e-2,
        r_winding: 0.2,
        d_f: 2e-4,
        omega_max: 1200.0,
        s_batt: 540_000.0,
        batt_safety_factor: 1.2,
        depth_of_discharge: 0.5,
    }
}

impl DroneParams {
    /// Checks every field invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ParamsError> {
        let positive: [(&'static str, f64); 23] = [
            ("rho", self.rho),
            ("g", self.g),
            ("m1", self.m1),
            ("m2", self.m2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("r_prop", self.r_prop),
            ("sigma_disk", self.sigma_disk),
            ("l_arm", self.l_arm),
            ("m_blade", self.m_blade),
            ("j_m", self.j_m),
            ("i_x", self.i_x),
            ("i_y", self.i_y),
            ("i_z", self.i_z),
            ("omega_max", self.omega_max),
            ("c_t", self.c_t),
            ("c_q", self.c_q),
            ("k_t_motor", self.k_t_motor),
            ("r_winding", self.r_winding),
            ("k_decay", self.k_decay),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamsError::Invariant {
                    field,
                    value,
                    constraint: "must be finite and strictly positive",
                });
            }
        }
        // Payload may be absent.
        let non_negative: [(&'static str, f64); 8] = [
            ("m3", self.m3),
            ("cd1", self.cd1),
            ("cd2", self.cd2),
            ("cd3", self.cd3),
            ("p_avio", self.p_avio),
            ("eps_blade_offset", self.eps_blade_offset),
            ("t_f_friction", self.t_f_friction),
            ("d_f", self.d_f),
        ];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ParamsError::Invariant {
                    field,
                    value,
                    constraint: "must be finite and non-negative",
                });
            }
        }
        for (field, value) in [("eta", self.eta), ("eta_c", self.eta_c)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ParamsError::Invariant {
                    field,
                    value,
                    constraint: "must lie in (0, 1]",
                });
            }
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(ParamsError::Invariant {
                field: "kappa",
                value: self.kappa,
                constraint: "must be >= 1",
            });
        }
        if self.n_rotors == 0 {
            return Err(ParamsError::Invariant {
                field: "n_rotors",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
        if self.n_blades == 0 {
            return Err(ParamsError::Invariant {
                field: "n_blades",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
        if self.eps_blade_offset >= self.r_prop {
            return Err(ParamsError::Invariant {
                field: "eps_blade_offset",
                value: self.eps_blade_offset,
                constraint: "must be smaller than r_prop",
            });
        }
        Ok(())
    }
}

/// Quantities computed from [`DroneParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// m1 + m2 + m3, kg.
    pub m_total: f64,
    /// Thrust factor c_t·ρ·A·r², N·s²/rad².
    pub k_b: f64,
    /// Drag factor c_q·ρ·A·r³, N·m·s²/rad².
    pub k_tau: f64,
    /// Propeller disk area π·r², m².
    pub a_disk: f64,
    /// Load (blade) moment of inertia ¼·N·m_b·(r−ε)², kg·m².
    pub j_l: f64,
    /// j_m + j_l, kg·m².
    pub j_total: f64,
    /// Σ C_Dk·A_k over body, battery and payload, m².
    pub cda_sum: f64,
}

pub fn derive(p: &DroneParams) -> DerivedParams {
    let m_total = p.m1 + p.m2 + p.m3;
    let a_disk = PI * p.r_prop * p.r_prop;
    let k_b = p.c_t * p.rho * a_disk * p.r_prop.powi(2);
    let k_tau = p.c_q * p.rho * a_disk * p.r_prop.powi(3);
    let j_l = 0.25 * f64::from(p.n_blades) * p.m_blade * (p.r_prop - p.eps_blade_offset).powi(2);
    DerivedParams {
        m_total,
        k_b,
        k_tau,
        a_disk,
        j_l,
        j_total: p.j_m + j_l,
        cda_sum: p.cd1 * p.a1 + p.cd2 * p.a2 + p.cd3 * p.a3,
    }
}

/// Profile power factor from the momentum-theory formula √(2ρA).
///
/// The tabulated `kappa2` (0.790) does not agree with this formula (≈0.352
/// for the default drone); EPM evaluation uses the tabulated field.
pub fn kappa2_from_disk(p: &DroneParams) -> f64 {
    (2.0 * p.rho * PI * p.r_prop * p.r_prop).sqrt()
}

/// Validated raw parameters together with their derived values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drone {
    pub params: DroneParams,
    pub derived: DerivedParams,
}

impl Drone {
    pub fn new(params: DroneParams) -> Result<Self, ParamsError> {
        params.validate()?;
        Ok(Self {
            params,
            derived: derive(&params),
        })
    }

    /// Total weight m·g, N.
    pub fn weight(&self) -> f64 {
        self.derived.m_total * self.params.g
    }

    /// Motor speed at which all rotors together balance the weight, rad/s.
    pub fn hover_omega(&self) -> f64 {
        (self.weight() / (f64::from(self.params.n_rotors) * self.derived.k_b)).sqrt()
    }
}

impl Default for Drone {
    fn default() -> Self {
        let params = default_drone();
        Self {
            params,
            derived: derive(&params),
        }
    }
}

/// Parses a flat TOML parameter table, filling unspecified keys with defaults.
pub fn parse_params(text: &str) -> Result<DroneParams, ParamsError> {
    let params: DroneParams = toml::from_str(text)?;
    params.validate()?;
    Ok(params)
}

pub fn load_params(path: impl AsRef<Path>) -> Result<DroneParams, ParamsError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ParamsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_params(&text)
}

/// Serializes every field as a flat TOML table readable by [`load_params`].
pub fn params_to_toml(p: &DroneParams) -> String {
    toml::to_string(p).expect("flat table of numbers always serializes")
}

pub fn save_params(p: &DroneParams, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, params_to_toml(p))
}
