//! Acceptance report. Prints one PASS/FAIL line per criterion.
//!
//! The process exits successfully regardless of the outcome unless
//! `ACCEPTANCE_STRICT` is set, in which case any FAIL exits with status 1.

use std::time::Instant;

use flight_energy::downwash::{angle_of_attack, solve_root_downwash};
use flight_energy::dynamics::{derivative, integrate, ControlInput, ControlProfile, StateVector};
use flight_energy::epm::{epm_total, optimal_airspeed};
use flight_energy::motor_energy::motor_power;
use flight_energy::regulator::{simulate, FirstOrderLag, RegulatorConfig};
use flight_energy::trajopt::{self, analysis, scenarios, NlpProblem, OptResult, NODE_DIM, VARIABLE_SCALE};
use flight_energy::*;

const NODES: usize = 500;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("criterion {id:<3} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1(r: &mut Report, d: &Drone) {
    let t = Instant::now();
    let (v, e) = optimal_airspeed(d, DownwashMethod::Root, &AirspeedGrid::new(0.5, 25.0, 0.01)).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = (v - 12.0).abs() <= 0.5 && rel(e, 42.17) <= 0.05 && secs < 1.0;
    r.line("1", "optimal cruise speed", pass, format!("v* = {v:.2} m/s, EPM* = {e:.3} J/m, {secs:.3} s"));
}

fn criterion_2(r: &mut Report, d: &Drone) {
    let t = Instant::now();
    let cfg = RegulatorConfig::default();
    let mut plant = FirstOrderLag::new(4.0, 0.5);
    let trace = simulate(&cfg, &mut plant, 60.0, d, DownwashMethod::Root).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let v = trace.tail_mean(0.1, |s| s.v_a);
    let e = trace.tail_mean(0.1, |s| s.epm);
    let pass = cfg.trigger_time == 4.0 && (v - 11.9).abs() < 0.5 && (e - 42.17).abs() < 0.5 && secs < 1.0;
    r.line("2", "regulator convergence", pass, format!("v = {v:.3} m/s, EPM = {e:.3} J/m, {secs:.3} s"));
}

fn criterion_3(r: &mut Report, d: &Drone) {
    let gap = |v: f64, m: DownwashMethod| {
        let root = epm_total(v, DownwashMethod::Root, d).unwrap();
        rel(epm_total(v, m, d).unwrap(), root)
    };
    let hover = gap(3.0, DownwashMethod::Hover);
    let glauert = gap(20.0, DownwashMethod::Glauert);
    let mut worst: f64 = 0.0;
    for ti in 0..=33 {
        let thrust = 1.0 + 3.0 * ti as f64;
        for vi in 0..=50 {
            let v = 0.5 * vi as f64;
            let s = solve_root_downwash(thrust, v, angle_of_attack(v, d), d).unwrap();
            worst = worst.max(s.residual.abs());
        }
    }
    r.line(
        "3",
        "downwash regimes",
        hover < 0.02 && glauert < 0.05 && worst < 1e-9,
        format!(
            "Root-Hover gap at 3 m/s {:.2}%, Root-Glauert gap at 20 m/s {:.2}%, max quartic residual {worst:.1e}",
            100.0 * hover,
            100.0 * glauert
        ),
    );
}

fn summary(res: &OptResult) -> String {
    format!(
        "status {}, energy {}, {} iterations, max defect {:.1e}",
        res.status.name(),
        res.energy.map_or("n/a".into(), |e| format!("{:.2} kJ", e / 1e3)),
        res.iterations,
        res.max_defect
    )
}

fn criterion_4(r: &mut Report, d: &Drone) {
    let t = Instant::now();
    let res = trajopt::optimize(
        &scenarios::takeoff_bc(scenarios::REFERENCE_HORIZON),
        GravityMode::Standard,
        d,
        NODES,
        InitStrategy::LinearInterp,
        &IpmOptions::default(),
    )
    .unwrap();
    let sat = analysis::saturation_fraction(&res.trajectory, d);
    let pass = res.status == OptStatus::Optimal
        && res.energy.is_some_and(|e| rel(e, 45_120.0) <= 0.10)
        && sat > 0.5
        && res.max_defect < 1e-4
        && res.max_bound_violation < 1e-4;
    r.line(
        "4",
        "takeoff optimization",
        pass,
        format!(
            "{}, saturated {:.0}% of horizon, {:.1} s",
            summary(&res),
            100.0 * sat,
            t.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_5(r: &mut Report, d: &Drone) -> OptResult {
    let t = Instant::now();
    let res = trajopt::optimize(
        &scenarios::landing_bc(scenarios::REFERENCE_HORIZON),
        scenarios::landing_mode(d),
        d,
        NODES,
        InitStrategy::LinearInterp,
        &IpmOptions::default(),
    )
    .unwrap();
    let tr = &res.trajectory;
    let touchdown = analysis::touchdown_time(tr);
    let drift = analysis::post_touchdown_drift(tr);
    let idle = touchdown.and_then(|t| analysis::idle_window(tr, d, t));
    let pass = res.status == OptStatus::Optimal
        && res.energy.is_some_and(|e| rel(e, 36_470.0) <= 0.10)
        && touchdown.is_some_and(|t| (t - 16.0).abs() <= 1.5)
        && drift.is_some_and(|x| x < 0.5)
        && idle.is_some_and(|w| w.duration >= 1.5);
    r.line(
        "5",
        "landing optimization",
        pass,
        format!(
            "{}, touchdown {}, drift {}, idle window {}, {:.1} s",
            summary(&res),
            touchdown.map_or("none".into(), |t| format!("{t:.2} s")),
            drift.map_or("n/a".into(), |x| format!("{x:.3} m")),
            idle.map_or("none".into(), |w| format!("{:.2} s at {:.2} s", w.duration, w.start)),
            t.elapsed().as_secs_f64()
        ),
    );
    res
}

/// Slope and R² of the least-squares line through `pts`.
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 })
}

fn criterion_6(r: &mut Report, d: &Drone) {
    let t = Instant::now();
    let bc = scenarios::landing_bc(scenarios::REFERENCE_HORIZON);
    let rows = trajopt::tf_sweep(
        &bc,
        scenarios::landing_mode(d),
        d,
        &scenarios::SWEEP_HORIZONS,
        NODES,
        InitStrategy::LinearInterp,
        &IpmOptions::default(),
    );
    let energies = |mode: &str| -> Vec<(f64, Option<f64>)> {
        rows.iter().filter(|row| row.mode == mode).map(|row| (row.tf, row.energy_j)).collect()
    };
    let fmt = |v: &[(f64, Option<f64>)]| {
        v.iter()
            .map(|(tf, e)| format!("{tf}:{}", e.map_or("infeasible".into(), |e| format!("{:.2}", e / 1e3))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let inc = energies("incentivized");
    let std = energies("standard");

    let inc_ok: Vec<f64> = inc.iter().filter_map(|p| p.1).collect();
    let spread = if inc_ok.len() == inc.len() && !inc_ok.is_empty() {
        let mean = inc_ok.iter().sum::<f64>() / inc_ok.len() as f64;
        let hi = inc_ok.iter().cloned().fold(f64::MIN, f64::max);
        let lo = inc_ok.iter().cloned().fold(f64::MAX, f64::min);
        Some((hi - lo) / mean)
    } else {
        None
    };
    let std_ok: Vec<(f64, f64)> = std.iter().filter_map(|(tf, e)| e.map(|e| (*tf, e))).collect();
    let fit = (std_ok.len() == std.len() && std_ok.len() >= 3).then(|| linear_fit(&std_ok));

    let short = trajopt::optimize(
        &bc.with_horizon(15.0),
        scenarios::landing_mode(d),
        d,
        NODES,
        InitStrategy::LinearInterp,
        &IpmOptions::default(),
    )
    .unwrap();
    let short_ok = short.status == OptStatus::Infeasible && short.energy.is_none();

    let pass = spread.is_some_and(|s| s < 0.05) && fit.is_some_and(|(slope, r2)| slope > 0.0 && r2 > 0.95) && short_ok;
    r.line(
        "6",
        "incentive benefit",
        pass,
        format!(
            "incentivized [{}] spread {}; standard [{}] fit {}; t_f = 15 s {}; {:.1} s",
            fmt(&inc),
            spread.map_or("n/a".into(), |s| format!("{:.2}%", 100.0 * s)),
            fmt(&std),
            fit.map_or("n/a".into(), |(s, r2)| format!("slope {s:.1} J/s R² {r2:.3}")),
            short.status.name(),
            t.elapsed().as_secs_f64()
        ),
    );
}

fn rk4_ratio(d: &Drone) -> f64 {
    let s0 = QuadState {
        z: 50.0,
        vx: 8.0,
        vy: 6.0,
        vz: 10.0,
        phi: 0.05,
        q_rate: 0.1,
        omega: [1150.0, 1146.0, 1148.0, 1144.0],
        ..QuadState::default()
    };
    let prof = ControlProfile::constant(ControlInput {
        alpha: [2.0, -1.0, 1.5, -0.5],
    });
    let run = |dt: f64| -> StateVector {
        integrate(&s0, &prof, 0.0, 2.0, dt, &GravityMode::Standard, d)
            .unwrap()
            .final_state()
            .unwrap()
            .to_array()
    };
    let h = 0.1;
    let reference = run(h / 64.0);
    let err = |s: StateVector| s.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    err(run(h)) / err(run(h / 2.0))
}

/// Deterministic bounded perturbation of the linear initial guess.
fn test_point(nlp: &NlpProblem) -> Vec<f64> {
    let mut z = nlp.initial_guess(InitStrategy::LinearInterp);
    for (i, v) in z.iter_mut().enumerate() {
        *v += 0.02 * VARIABLE_SCALE[i % NODE_DIM] * (1.7 * i as f64).sin();
        *v = v.clamp(nlp.lower[i], nlp.upper[i]);
    }
    z
}

fn gradient_errors(d: &Drone) -> (f64, f64) {
    let nlp = trajopt::transcribe(&scenarios::landing_bc(20.0), scenarios::landing_mode(d), d, 40).unwrap();
    let z = test_point(&nlp);
    let (n, m) = (nlp.n_vars(), nlp.n_constraints());

    let mut g = vec![0.0; n];
    nlp.objective_gradient(&z, &mut g);
    let mut obj_err: f64 = 0.0;
    for i in 0..n {
        let h = 1e-4 * VARIABLE_SCALE[i % NODE_DIM];
        let (mut zp, mut zm) = (z.clone(), z.clone());
        zp[i] += h;
        zm[i] -= h;
        let fd = (nlp.objective(&zp) - nlp.objective(&zm)) / (2.0 * h);
        obj_err = obj_err.max((g[i] - fd).abs() / fd.abs().max(1e-3));
    }

    let mut jac = vec![0.0; n * m];
    for (row, col, v) in nlp.jacobian_triplets(&z) {
        jac[row * n + col] += v;
    }
    let (mut cp, mut cm) = (vec![0.0; m], vec![0.0; m]);
    let mut con_err: f64 = 0.0;
    for col in 0..n {
        let h = 1e-6 * VARIABLE_SCALE[col % NODE_DIM];
        let (mut zp, mut zm) = (z.clone(), z.clone());
        zp[col] += h;
        zm[col] -= h;
        nlp.defects(&zp, &mut cp);
        nlp.defects(&zm, &mut cm);
        for row in 0..m {
            let fd = (cp[row] - cm[row]) / (2.0 * h);
            con_err = con_err.max((jac[row * n + col] - fd).abs() / fd.abs().max(1.0));
        }
    }
    (obj_err, con_err)
}

fn criterion_7(r: &mut Report, d: &Drone, landing: &OptResult) {
    let hover = QuadState::resting([0.0, 0.0, 10.0], d.hover_omega());
    let residual = derivative(&hover, &ControlInput::default(), &GravityMode::Standard, d)
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));

    let ratio = rk4_ratio(d);

    let mut breakdown_ok = true;
    for wi in 0..=24 {
        for alpha in [-500.0, 0.0, 37.5, 800.0] {
            let b = motor_power(50.0 * wi as f64, alpha, d);
            let sum = b.friction_const + b.linear + b.quadratic + b.cubic + b.quartic + b.accel;
            breakdown_ok &= (sum - b.total).abs() <= 1e-12 * b.total.abs().max(1.0);
        }
    }

    let (obj_err, con_err) = gradient_errors(d);

    let gap = if landing.status == OptStatus::Optimal {
        let h = landing.trajectory.duration() / (landing.trajectory.samples.len() - 1) as f64;
        let mode = scenarios::landing_mode(d);
        analysis::resimulate(&landing.trajectory, &mode, d, h / 10.0)
            .ok()
            .and_then(|sim| analysis::endpoint_gap(&sim, &landing.trajectory))
    } else {
        None
    };

    let pass = residual < 1e-10
        && (ratio - 16.0).abs() <= 2.0
        && breakdown_ok
        && obj_err <= 1e-5
        && con_err <= 1e-5
        && gap.is_some_and(|g| g < 2.0);
    r.line(
        "7",
        "property suites",
        pass,
        format!(
            "hover residual {residual:.1e}, RK4 ratio {ratio:.2}, power breakdown {}, gradient rel err {obj_err:.1e}, \
             Jacobian rel err {con_err:.1e}, RK4 replay gap {}",
            if breakdown_ok { "exact" } else { "mismatch" },
            gap.map_or("n/a".into(), |g| format!("{g:.3} m"))
        ),
    );
}

fn main() {
    // `cargo test -- --list` and filters from the harness are not applicable here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let d = Drone::default();
    let mut report = Report { failed: 0 };
    criterion_1(&mut report, &d);
    criterion_2(&mut report, &d);
    criterion_3(&mut report, &d);
    criterion_4(&mut report, &d);
    let landing = criterion_5(&mut report, &d);
    criterion_6(&mut report, &d);
    criterion_7(&mut report, &d, &landing);
    println!("acceptance: {} of 7 criteria failed", report.failed);
    if report.failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
