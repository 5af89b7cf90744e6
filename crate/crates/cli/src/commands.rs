//! One function per subcommand.

use serde::Serialize;

use flight_energy::epm::{epm, epm_curve, optimal_airspeed, CruiseCondition};
use flight_energy::regulator::{simulate_with_events, FirstOrderLag, ParamEvent};
use flight_energy::trajopt::{self, analysis, OptResult, TrajoptError};
use flight_energy::{AirspeedGrid, DownwashMethod, Drone, GravityMode, OptStatus};

use crate::config::{self, resolve_drone, DownwashCompareConfig, EpmCurveConfig, OptimizeConfig, RegulateConfig, SweepConfig};
use crate::mission::{self, MissionSpec};
use crate::output::{self, header, num, opt};
use crate::{CliError, RunContext};

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn grid_checked(grid: &AirspeedGrid) -> Result<(), CliError> {
    grid.validate().map_err(|e| CliError::Config(e.to_string()))
}

/// Search grid for the optimal airspeed reported in summaries.
fn reference_grid() -> AirspeedGrid {
    AirspeedGrid::new(0.5, 25.0, 0.01)
}

#[derive(Serialize)]
struct EpmSummary {
    method: DownwashMethod,
    v_star_m_s: f64,
    epm_star_j_per_m: f64,
    points: usize,
    seed: u64,
}

pub fn epm_curve_cmd(ctx: &RunContext) -> Result<(), CliError> {
    let cfg: EpmCurveConfig = config::load(ctx.config.as_deref())?;
    let drone = resolve_drone(&cfg.drone, &cfg.drone_file, &ctx.base_dir())?;
    grid_checked(&cfg.grid)?;
    if cfg.battery_energy_j.is_some_and(|e| !(e > 0.0)) {
        return Err(CliError::Config("battery_energy_j must be positive".into()));
    }
    let curve = epm_curve(&drone, cfg.method, &cfg.grid).map_err(numerical)?;
    let (v_star, e_star) = optimal_airspeed(&drone, cfg.method, &cfg.grid).map_err(numerical)?;

    output::ensure_dir(&ctx.out_dir())?;
    let cols = header(&[
        "v_a", "epm_total", "induced", "parasitic", "profile", "rotor", "avionics", "thrust", "downwash", "range_m",
    ]);
    let rows = curve.iter().map(|(v, b)| {
        vec![
            num(*v),
            num(b.total),
            num(b.induced),
            num(b.parasitic),
            num(b.profile),
            num(b.rotor),
            num(b.avionics),
            num(b.thrust),
            num(b.downwash),
            opt(cfg.battery_energy_j.map(|e| e / b.total)),
        ]
    });
    output::write_csv(&ctx.out_dir().join("epm_curve.csv"), &cols, rows)?;
    output::write_json(
        &ctx.out_dir().join("epm_summary.json"),
        &EpmSummary {
            method: cfg.method,
            v_star_m_s: v_star,
            epm_star_j_per_m: e_star,
            points: curve.len(),
            seed: ctx.seed,
        },
    )?;
    println!("v* = {v_star} m/s, EPM* = {e_star:.3} J/m ({} downwash)", cfg.method);
    Ok(())
}

pub fn downwash_compare_cmd(ctx: &RunContext) -> Result<(), CliError> {
    let cfg: DownwashCompareConfig = config::load(ctx.config.as_deref())?;
    let drone = resolve_drone(&cfg.drone, &cfg.drone_file, &ctx.base_dir())?;
    grid_checked(&cfg.grid)?;
    output::ensure_dir(&ctx.out_dir())?;
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for v in cfg.grid.points() {
        let eval = |m: DownwashMethod| epm(&CruiseCondition::level(v, m), &drone);
        let root = eval(DownwashMethod::Root).map_err(numerical)?;
        let hover = eval(DownwashMethod::Hover).map_err(numerical)?;
        let glauert = if v >= cfg.glauert_v_min { eval(DownwashMethod::Glauert).ok() } else { None };
        rows.push(vec![
            num(v),
            num(root.downwash),
            num(hover.downwash),
            opt(glauert.map(|b| b.downwash)),
            num(root.total),
            num(hover.total),
            opt(glauert.map(|b| b.total)),
        ]);
    }
    let cols = header(&["v", "w_R", "w_H", "w_G", "EPM_R", "EPM_H", "EPM_G"]);
    output::write_csv(&ctx.out_dir().join("downwash_compare.csv"), &cols, rows)
}

#[derive(Serialize)]
struct RegulatorSummary {
    steady_state_v_m_s: f64,
    steady_state_epm_j_per_m: f64,
    final_v_m_s: f64,
    v_star_m_s: f64,
    epm_star_j_per_m: f64,
    samples: usize,
    seed: u64,
}

pub fn regulate_cmd(ctx: &RunContext) -> Result<(), CliError> {
    let cfg: RegulateConfig = config::load(ctx.config.as_deref())?;
    let drone = resolve_drone(&cfg.drone, &cfg.drone_file, &ctx.base_dir())?;
    cfg.regulator.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if !(cfg.v0 > 0.0 && cfg.plant_tau > 0.0 && cfg.t_end > 0.0) {
        return Err(CliError::Config("v0, plant_tau and t_end must be positive".into()));
    }
    let mut events = Vec::with_capacity(cfg.events.len());
    for e in &cfg.events {
        let d = Drone::new(e.drone).map_err(|err| CliError::Config(format!("event at t = {}: {err}", e.t)))?;
        events.push(ParamEvent { t: e.t, drone: d });
    }
    if events.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(CliError::Config("events must be sorted by time".into()));
    }
    let mut plant = FirstOrderLag {
        rate_limit: cfg.plant_rate_limit,
        ..FirstOrderLag::new(cfg.v0, cfg.plant_tau)
    };
    let trace = simulate_with_events(&cfg.regulator, &mut plant, cfg.t_end, &drone, cfg.method, &events)
        .map_err(numerical)?;
    let final_drone = events.last().map_or(drone, |e| e.drone);
    let (v_star, e_star) = optimal_airspeed(&final_drone, cfg.method, &reference_grid()).map_err(numerical)?;

    output::ensure_dir(&ctx.out_dir())?;
    let rows = trace
        .samples
        .iter()
        .map(|s| vec![num(s.t), num(s.v_a), num(s.v_cmd), num(s.epm), num(s.grad_epm)]);
    output::write_csv(
        &ctx.out_dir().join("regulator_trace.csv"),
        &header(&["t", "v_a", "v_cmd", "epm", "grad_epm"]),
        rows,
    )?;
    let summary = RegulatorSummary {
        steady_state_v_m_s: trace.tail_mean(0.1, |s| s.v_a),
        steady_state_epm_j_per_m: trace.tail_mean(0.1, |s| s.epm),
        final_v_m_s: trace.last().map_or(cfg.v0, |s| s.v_a),
        v_star_m_s: v_star,
        epm_star_j_per_m: e_star,
        samples: trace.samples.len(),
        seed: ctx.seed,
    };
    output::write_json(&ctx.out_dir().join("regulator_summary.json"), &summary)?;
    println!(
        "steady state {:.3} m/s at {:.3} J/m (grid optimum {v_star} m/s)",
        summary.steady_state_v_m_s, summary.steady_state_epm_j_per_m
    );
    Ok(())
}

#[derive(Serialize)]
struct OptimizeSummary {
    status: OptStatus,
    #[serde(rename = "energy_J")]
    energy_j: Option<f64>,
    iterations: usize,
    touchdown_time_s: Option<f64>,
    restoration_calls: usize,
    kkt_error: f64,
    max_defect: f64,
    max_bound_violation: f64,
    message: String,
    mode: &'static str,
    t_f: f64,
    nodes: usize,
    seed: u64,
}

fn trajopt_error(e: TrajoptError) -> CliError {
    match e {
        TrajoptError::Numerical(e) => CliError::Numerical(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn status_result(res: &OptResult) -> Result<(), CliError> {
    match res.status {
        OptStatus::Optimal => Ok(()),
        OptStatus::Infeasible => Err(CliError::Infeasible(res.message.clone())),
        OptStatus::MaxIter => Err(CliError::Numerical(res.message.clone())),
    }
}

pub fn optimize_cmd(ctx: &RunContext) -> Result<(), CliError> {
    let cfg: OptimizeConfig = config::load(ctx.config.as_deref())?;
    let drone = resolve_drone(&cfg.drone, &cfg.drone_file, &ctx.base_dir())?;
    let s = &cfg.scenario;
    let (bc, mode) = s.resolve(&drone)?;
    let res = trajopt::optimize(&bc, mode, &drone, s.nodes, s.init, &s.solver).map_err(trajopt_error)?;

    output::ensure_dir(&ctx.out_dir())?;
    output::write_trajectory(&ctx.out_dir().join("trajectory.csv"), &res.trajectory, &drone)?;
    let summary = OptimizeSummary {
        status: res.status,
        energy_j: res.energy,
        iterations: res.iterations,
        touchdown_time_s: analysis::touchdown_time(&res.trajectory),
        restoration_calls: res.restoration_calls,
        kkt_error: res.kkt_error,
        max_defect: res.max_defect,
        max_bound_violation: res.max_bound_violation,
        message: res.message.clone(),
        mode: mode.name(),
        t_f: bc.tf,
        nodes: s.nodes,
        seed: ctx.seed,
    };
    output::write_json(&ctx.out_dir().join("summary.json"), &summary)?;
    println!(
        "{}: energy {} after {} iterations",
        res.status.name(),
        res.energy.map_or("n/a".into(), |e| format!("{e:.1} J")),
        res.iterations
    );
    status_result(&res)
}

pub fn tf_sweep_cmd(ctx: &RunContext) -> Result<(), CliError> {
    let cfg: SweepConfig = config::load(ctx.config.as_deref())?;
    let drone = resolve_drone(&cfg.drone, &cfg.drone_file, &ctx.base_dir())?;
    let s = &cfg.scenario;
    let (bc, mode) = s.resolve(&drone)?;
    if cfg.t_f_values.is_empty() || cfg.t_f_values.iter().any(|t| !(*t > bc.t0)) {
        return Err(CliError::Config("t_f_values must be non-empty and exceed t0".into()));
    }
    let incentive = match mode {
        GravityMode::Incentivized { .. } => mode,
        GravityMode::Standard => GravityMode::Incentivized {
            target: bc
                .final_position()
                .ok_or_else(|| CliError::Config("incentive needs a fixed final position".into()))?,
            k_decay: drone.params.k_decay,
        },
    };
    let rows = trajopt::tf_sweep(&bc, incentive, &drone, &cfg.t_f_values, s.nodes, s.init, &s.solver);

    output::ensure_dir(&ctx.out_dir())?;
    let csv_rows = rows
        .iter()
        .map(|r| vec![num(r.tf), r.mode.to_string(), opt(r.energy_j), r.status.name().to_string()]);
    output::write_csv(&ctx.out_dir().join("sweep.csv"), &header(&["t_f", "mode", "energy_J", "status"]), csv_rows)?;
    for r in &rows {
        println!(
            "t_f = {:>6} s  {:<12} {:<10} {}",
            r.tf,
            r.mode,
            r.status.name(),
            r.energy_j.map_or(String::new(), |e| format!("{e:.1} J"))
        );
    }
    Ok(())
}

pub fn mission_cmd(ctx: &RunContext) -> Result<(), CliError> {
    let spec: MissionSpec = config::load(ctx.config.as_deref())?;
    let out = match (&ctx.out, &spec.output_dir) {
        (None, Some(dir)) => ctx.base_dir().join(dir),
        _ => ctx.out_dir(),
    };
    let report = mission::run_mission(&spec, &ctx.base_dir(), &out, ctx.seed)?;
    for p in &report.phases {
        println!("phase {} {:<8} {:>12.1} J {:>10.1} m {:>8.2} s", p.phase, p.kind, p.energy_j, p.distance_m, p.duration_s);
    }
    println!(
        "total {:.1} J over {:.1} m ({:.3} J/m)",
        report.total_energy_j, report.total_distance_m, report.effective_j_per_m
    );
    Ok(())
}
