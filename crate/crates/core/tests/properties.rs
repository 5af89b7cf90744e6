use flight_energy::downwash::{angle_of_attack, glauert_downwash, hover_downwash, solve_root_downwash};
use flight_energy::dynamics::{derivative, gravity_multiplier, integrate, ControlProfile};
use flight_energy::epm::{epm, epm_total, optimal_airspeed, CruiseCondition};
use flight_energy::motor_energy::{motor_power, trajectory_energy};
use flight_energy::params::{params_to_toml, parse_params};
use flight_energy::{default_drone, AirspeedGrid, ControlInput, DownwashMethod, Drone, GravityMode, QuadState};
use proptest::prelude::*;

fn drone() -> Drone {
    Drone::new(default_drone()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn params_survive_toml(rho in 0.9f64..1.4, g in 9.7f64..9.9, eta in 0.5f64..1.0, p_avio in 0.0f64..50.0) {
        let p = flight_energy::DroneParams { rho, g, eta, p_avio, ..default_drone() };
        prop_assert_eq!(parse_params(&params_to_toml(&p)).unwrap(), p);
    }

    #[test]
    fn root_downwash_solves_quartic(scale in 0.3f64..3.0, v in 0.0f64..30.0) {
        let d = drone();
        let t = scale * d.weight();
        let s = solve_root_downwash(t, v, angle_of_attack(v, &d), &d).unwrap();
        prop_assert!(s.root > 0.0);
        prop_assert!(s.residual.abs() < 1e-9, "residual {}", s.residual);
    }

    #[test]
    fn root_downwash_not_above_hover(scale in 0.3f64..3.0, v in 0.0f64..30.0) {
        let d = drone();
        let t = scale * d.weight();
        let w_r = solve_root_downwash(t, v, angle_of_attack(v, &d), &d).unwrap().root;
        let w_h = hover_downwash(t, &d).unwrap();
        prop_assert!(w_r <= w_h * (1.0 + 1e-12), "{w_r} > {w_h}");
    }

    #[test]
    fn glauert_inverse_in_airspeed(v in 1.0f64..30.0, k in 1.1f64..4.0) {
        let d = drone();
        let t = d.weight();
        let a = glauert_downwash(t, v, &d).unwrap();
        let b = glauert_downwash(t, k * v, &d).unwrap();
        prop_assert!((a - k * b).abs() <= 1e-12 * a);
    }

    #[test]
    fn epm_terms_recombine(v in 0.5f64..25.0) {
        let d = drone();
        let b = epm(&CruiseCondition::level(v, DownwashMethod::Root), &d).unwrap();
        let sum = (b.induced + b.parasitic + b.profile + b.rotor) / d.params.eta + b.avionics;
        prop_assert!((b.total - sum).abs() <= 1e-12 * b.total);
        prop_assert!(b.induced > 0.0 && b.parasitic > 0.0 && b.profile > 0.0 && b.rotor > 0.0);
    }

    #[test]
    fn grid_optimum_is_grid_minimum(i in 0usize..2451) {
        let d = drone();
        let grid = AirspeedGrid::new(0.5, 25.0, 0.01);
        let (_, e_star) = optimal_airspeed(&d, DownwashMethod::Root, &grid).unwrap();
        let v = grid.points().nth(i).unwrap();
        prop_assert!(e_star <= epm_total(v, DownwashMethod::Root, &d).unwrap());
    }

    #[test]
    fn motor_power_even_in_acceleration(w in 0.0f64..1200.0, a in -500.0f64..500.0) {
        let d = drone();
        let p = motor_power(w, a, &d);
        let q = motor_power(w, -a, &d);
        prop_assert_eq!(p.total, q.total);
        prop_assert!(p.total >= motor_power(w, 0.0, &d).total);
    }

    #[test]
    fn motor_power_increases_with_speed(w in 0.0f64..1199.0, dw in 0.1f64..1.0) {
        let d = drone();
        prop_assert!(motor_power(w + dw, 0.0, &d).total > motor_power(w, 0.0, &d).total);
    }

    #[test]
    fn hover_is_equilibrium_anywhere(x in -1e3f64..1e3, y in -1e3f64..1e3, z in 0.0f64..500.0, psi in -3.0f64..3.0) {
        let d = drone();
        let mut s = QuadState::resting([x, y, z], d.hover_omega());
        s.psi = psi;
        let f = derivative(&s, &ControlInput { alpha: [0.0; 4] }, &GravityMode::Standard, &d);
        prop_assert!(f.iter().all(|v| v.abs() < 1e-10), "{f:?}");
    }

    #[test]
    fn incentive_multiplier_bounded(dist2 in 0.0f64..1e6, k in 1e-4f64..1.0) {
        let m = gravity_multiplier(dist2, k);
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!(gravity_multiplier(dist2 + 1.0, k) >= m);
    }
}

#[test]
fn incentive_vanishes_on_target() {
    assert_eq!(gravity_multiplier(0.0, 0.01), 0.0);
}

#[test]
fn simulated_energy_splits_by_motor() {
    let d = drone();
    let s0 = QuadState::resting([0.0, 0.0, 50.0], d.hover_omega());
    let u = ControlInput { alpha: [2.0, -1.0, 2.0, -1.0] };
    let traj = integrate(&s0, &ControlProfile::constant(u), 0.0, 3.0, 0.01, &GravityMode::Standard, &d).unwrap();
    assert_eq!(traj.samples.first().unwrap().t, 0.0);
    assert!((traj.samples.last().unwrap().t - 3.0).abs() < 1e-12);
    let e = trajectory_energy(&traj, &d);
    let sum: f64 = e.per_motor.iter().sum();
    assert!((e.total - sum).abs() <= 1e-9 * e.total);
    assert!(e.per_motor[0] > e.per_motor[1]);
}
