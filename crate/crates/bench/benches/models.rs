use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flight_energy::downwash::{angle_of_attack, solve_root_downwash};
use flight_energy::dynamics::{derivative, integrate, ControlProfile};
use flight_energy::epm::{epm_curve, optimal_airspeed};
use flight_energy::{default_drone, AirspeedGrid, ControlInput, DownwashMethod, Drone, GravityMode, QuadState};

fn drone() -> Drone {
    Drone::new(default_drone()).unwrap()
}

fn bench_quartic(c: &mut Criterion) {
    let d = drone();
    let mut g = c.benchmark_group("quartic");
    for v in [0.5, 12.0, 25.0] {
        let alpha = angle_of_attack(v, &d);
        g.bench_with_input(BenchmarkId::from_parameter(v), &v, |b, &v| {
            b.iter(|| solve_root_downwash(black_box(d.weight()), v, alpha, &d).unwrap())
        });
    }
    g.finish();
}

fn bench_epm(c: &mut Criterion) {
    let d = drone();
    let grid = AirspeedGrid::new(0.5, 25.0, 0.01);
    for method in [DownwashMethod::Root, DownwashMethod::Glauert] {
        c.bench_function(&format!("epm_curve {method}"), |b| b.iter(|| epm_curve(&d, method, black_box(&grid)).unwrap()));
    }
    c.bench_function("optimal_airspeed", |b| {
        b.iter(|| optimal_airspeed(&d, DownwashMethod::Root, black_box(&grid)).unwrap())
    });
}

fn bench_dynamics(c: &mut Criterion) {
    let d = drone();
    let w = d.hover_omega();
    let s = QuadState {
        omega: [w; 4],
        ..QuadState::default()
    };
    let u = ControlInput { alpha: [10.0, -10.0, 10.0, -10.0] };
    let mode = GravityMode::Standard;
    c.bench_function("dynamics rhs", |b| b.iter(|| derivative(black_box(&s), &u, &mode, &d)));
    let profile = ControlProfile::constant(u);
    c.bench_function("rk4 10 s at 1 ms", |b| {
        b.iter(|| integrate(black_box(&s), &profile, 0.0, 10.0, 1e-3, &mode, &d).unwrap())
    });
}

criterion_group!(benches, bench_quartic, bench_epm, bench_dynamics);
criterion_main!(benches);
