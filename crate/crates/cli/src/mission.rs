//! Takeoff, cruise and landing composed into one mission.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flight_energy::epm::epm_total;
use flight_energy::params::DroneParams;
use flight_energy::regulator::{simulate, FirstOrderLag, RegulatorConfig, RegulatorTrace};
use flight_energy::trajopt::{self, scenarios, TrajoptError};
use flight_energy::{DownwashMethod, Drone, OptStatus};

use crate::config::{resolve_drone, Preset, ScenarioConfig};
use crate::output::{self, header, num};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CruisePhase {
    /// Ground distance flown at the regulated airspeed, m.
    pub distance_m: f64,
    /// Airspeed when the regulator takes over, m/s. Defaults to the final
    /// speed of a preceding takeoff.
    pub entry_speed: Option<f64>,
    pub method: DownwashMethod,
    pub regulator: RegulatorConfig,
    /// Airspeed lag time constant, s.
    pub plant_tau: f64,
    /// Length of the regulator run used to find the steady state, s.
    pub t_end: f64,
}

impl Default for CruisePhase {
    fn default() -> Self {
        Self {
            distance_m: 0.0,
            entry_speed: None,
            method: DownwashMethod::Root,
            regulator: RegulatorConfig::default(),
            plant_tau: 0.5,
            t_end: 60.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Phase {
    /// Without boundary states the reference takeoff is used.
    Takeoff(ScenarioConfig),
    Cruise(CruisePhase),
    /// Without boundary states the reference landing is used.
    Landing(ScenarioConfig),
}

impl Phase {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Takeoff(_) => "takeoff",
            Self::Cruise(_) => "cruise",
            Self::Landing(_) => "landing",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionSpec {
    #[serde(default)]
    pub drone: Option<DroneParams>,
    #[serde(default)]
    pub drone_file: Option<PathBuf>,
    /// Used when no output directory is given on the command line.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub phases: Vec<Phase>,
}

impl Default for MissionSpec {
    /// Reference takeoff, cruise over the corridor between the two
    /// maneuvers, reference landing.
    fn default() -> Self {
        Self {
            drone: None,
            drone_file: None,
            output_dir: None,
            phases: vec![
                Phase::Takeoff(ScenarioConfig::preset(Preset::Takeoff)),
                Phase::Cruise(CruisePhase {
                    distance_m: scenarios::LANDING_START_X - 200.0,
                    ..CruisePhase::default()
                }),
                Phase::Landing(ScenarioConfig::preset(Preset::Landing)),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub phase: usize,
    pub kind: &'static str,
    pub energy_j: f64,
    pub duration_s: f64,
    pub distance_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<OptStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Steady-state regulated airspeed, m/s.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub airspeed_m_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epm_j_per_m: Option<f64>,
    /// Energy of the regulator run itself; not part of `energy_j`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transient_energy_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionReport {
    pub phases: Vec<PhaseReport>,
    pub total_energy_j: f64,
    pub total_duration_s: f64,
    pub total_distance_m: f64,
    pub effective_j_per_m: f64,
    pub seed: u64,
}

fn tagged(i: usize, kind: &str, e: CliError) -> CliError {
    let tag = |m: String| format!("phase {i} ({kind}): {m}");
    match e {
        CliError::Config(m) => CliError::Config(tag(m)),
        CliError::Infeasible(m) => CliError::Infeasible(tag(m)),
        CliError::Numerical(m) => CliError::Numerical(tag(m)),
        other => other,
    }
}

/// Speed at the end of a takeoff whose final velocity is fully fixed.
fn final_speed(s: &ScenarioConfig, drone: &Drone) -> Result<Option<f64>, CliError> {
    let (bc, _) = s.clone().or_preset(Preset::Takeoff).resolve(drone)?;
    Ok(match (bc.xf[3], bc.xf[4], bc.xf[5]) {
        (Some(a), Some(b), Some(c)) => Some((a * a + b * b + c * c).sqrt()),
        _ => None,
    })
}

/// Entry airspeed of every cruise phase, in phase order.
pub fn validate(spec: &MissionSpec, drone: &Drone) -> Result<Vec<f64>, CliError> {
    if spec.phases.is_empty() {
        return Err(CliError::Config("mission has no phases".into()));
    }
    let mut entries = Vec::new();
    for (i, phase) in spec.phases.iter().enumerate() {
        let fail = |m: String| tagged(i, phase.kind(), CliError::Config(m));
        match phase {
            Phase::Takeoff(s) => {
                s.clone().or_preset(Preset::Takeoff).resolve(drone).map_err(|e| tagged(i, "takeoff", e))?;
            }
            Phase::Landing(s) => {
                s.clone().or_preset(Preset::Landing).resolve(drone).map_err(|e| tagged(i, "landing", e))?;
            }
            Phase::Cruise(c) => {
                if !(c.distance_m > 0.0 && c.distance_m.is_finite()) {
                    return Err(fail(format!("distance must be positive, got {}", c.distance_m)));
                }
                c.regulator.validate().map_err(|e| fail(e.to_string()))?;
                if !(c.plant_tau > 0.0 && c.t_end > 0.0) {
                    return Err(fail("plant_tau and t_end must be positive".into()));
                }
                let upstream = match i.checked_sub(1).map(|j| &spec.phases[j]) {
                    Some(Phase::Takeoff(s)) => final_speed(s, drone)?,
                    _ => None,
                };
                let v = match (c.entry_speed, upstream) {
                    (Some(v), Some(u)) if (v - u).abs() > 1e-6 => {
                        return Err(fail(format!("entry speed {v} m/s does not match takeoff final speed {u} m/s")));
                    }
                    (Some(v), _) | (None, Some(v)) => v,
                    (None, None) => return Err(fail("entry_speed is required without a preceding takeoff".into())),
                };
                if !(v > 0.0) {
                    return Err(fail(format!("entry speed must be positive, got {v}")));
                }
                entries.push(v);
            }
        }
    }
    Ok(entries)
}

fn write_trace(path: &Path, trace: &RegulatorTrace) -> Result<(), CliError> {
    let rows = trace
        .samples
        .iter()
        .map(|s| vec![num(s.t), num(s.v_a), num(s.v_cmd), num(s.epm), num(s.grad_epm)]);
    output::write_csv(path, &header(&["t", "v_a", "v_cmd", "epm", "grad_epm"]), rows)
}

fn maneuver(i: usize, kind: &'static str, s: &ScenarioConfig, drone: &Drone, out: &Path) -> Result<PhaseReport, CliError> {
    let (bc, mode) = s.resolve(drone)?;
    let res = trajopt::optimize(&bc, mode, drone, s.nodes, s.init, &s.solver).map_err(|e| match e {
        TrajoptError::Numerical(e) => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    output::write_trajectory(&out.join(format!("phase{i}_{kind}.csv")), &res.trajectory, drone)?;
    match res.status {
        OptStatus::Optimal => {}
        OptStatus::Infeasible => return Err(CliError::Infeasible(res.message)),
        OptStatus::MaxIter => return Err(CliError::Numerical(res.message)),
    }
    Ok(PhaseReport {
        phase: i,
        kind,
        energy_j: res.energy.unwrap_or(0.0),
        duration_s: bc.tf - bc.t0,
        distance_m: output::path_length(&res.trajectory),
        status: Some(res.status),
        iterations: Some(res.iterations),
        airspeed_m_s: None,
        epm_j_per_m: None,
        transient_energy_j: None,
    })
}

fn cruise(i: usize, c: &CruisePhase, v0: f64, drone: &Drone, out: &Path) -> Result<PhaseReport, CliError> {
    let mut plant = FirstOrderLag::new(v0, c.plant_tau);
    let trace = simulate(&c.regulator, &mut plant, c.t_end, drone, c.method)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_trace(&out.join(format!("phase{i}_cruise.csv")), &trace)?;
    let v = trace.tail_mean(0.1, |s| s.v_a);
    let epm = epm_total(v, c.method, drone).map_err(|e| CliError::Numerical(e.to_string()))?;
    let transient = trace
        .samples
        .windows(2)
        .map(|w| w[0].epm * w[0].v_a * (w[1].t - w[0].t))
        .sum();
    Ok(PhaseReport {
        phase: i,
        kind: "cruise",
        energy_j: epm * c.distance_m,
        duration_s: c.distance_m / v,
        distance_m: c.distance_m,
        status: None,
        iterations: None,
        airspeed_m_s: Some(v),
        epm_j_per_m: Some(epm),
        transient_energy_j: Some(transient),
    })
}

/// Runs every phase in order, writing per-phase series and `mission.json`
/// into `out`. The first failing phase aborts the mission.
pub fn run_mission(spec: &MissionSpec, base: &Path, out: &Path, seed: u64) -> Result<MissionReport, CliError> {
    let drone = resolve_drone(&spec.drone, &spec.drone_file, base)?;
    let entries = validate(spec, &drone)?;
    output::ensure_dir(out)?;
    let mut entries = entries.into_iter();
    let mut phases = Vec::new();
    for (i, phase) in spec.phases.iter().enumerate() {
        log::info!("phase {i}: {}", phase.kind());
        let report = match phase {
            Phase::Takeoff(s) => maneuver(i, "takeoff", &s.clone().or_preset(Preset::Takeoff), &drone, out),
            Phase::Landing(s) => maneuver(i, "landing", &s.clone().or_preset(Preset::Landing), &drone, out),
            Phase::Cruise(c) => cruise(i, c, entries.next().expect("validated entry speed"), &drone, out),
        }
        .map_err(|e| tagged(i, phase.kind(), e))?;
        phases.push(report);
    }
    let total_energy_j: f64 = phases.iter().map(|p| p.energy_j).sum();
    let total_distance_m: f64 = phases.iter().map(|p| p.distance_m).sum();
    let report = MissionReport {
        total_duration_s: phases.iter().map(|p| p.duration_s).sum(),
        effective_j_per_m: total_energy_j / total_distance_m,
        total_energy_j,
        total_distance_m,
        phases,
        seed,
    };
    output::write_json(&out.join("mission.json"), &report)?;
    Ok(report)
}
