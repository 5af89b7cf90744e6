//! CSV and JSON artifact writers.

use std::fs::File;
use std::path::Path;

use serde::Serialize;

use flight_energy::dynamics::STATE_NAMES;
use flight_energy::motor_energy::trajectory_energy;
use flight_energy::{Drone, Trajectory};

use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Blank cell for a missing value.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize to JSON");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Node states with per-motor and total electrical power.
pub fn write_trajectory(path: &Path, traj: &Trajectory, drone: &Drone) -> Result<(), CliError> {
    let energy = trajectory_energy(traj, drone);
    let mut cols = vec!["t".to_string()];
    cols.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    cols.push("power_total".into());
    cols.extend((1..=4).map(|i| format!("power_m{i}")));
    let rows = traj.samples.iter().enumerate().map(|(k, s)| {
        let mut row = vec![num(s.t)];
        row.extend(s.state.to_array().iter().map(|v| num(*v)));
        row.push(num(energy.total_power(k)));
        row.extend(energy.series[k].iter().map(|v| num(*v)));
        row
    });
    write_csv(path, &cols, rows)
}

/// Length of the polyline through the sample positions, m.
pub fn path_length(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].state.position(), w[1].state.position());
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
        })
        .sum()
}
