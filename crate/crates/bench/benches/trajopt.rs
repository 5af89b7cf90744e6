use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flight_energy::dynamics::StateVector;
use flight_energy::trajopt::{optimize, scenarios, transcribe};
use flight_energy::{default_drone, BoundaryConditions, Drone, GravityMode, InitStrategy, IpmOptions, QuadState};

fn climb(drone: &Drone) -> BoundaryConditions {
    let w = drone.hover_omega();
    let x0 = QuadState {
        omega: [w; 4],
        ..QuadState::default()
    };
    let mut xf = [None; 16];
    for (i, v) in [(0, 5.0), (2, 10.0), (3, 0.0), (4, 0.0), (5, 0.0)] {
        xf[i] = Some(v);
    }
    BoundaryConditions { x0, xf, t0: 0.0, tf: 8.0 }
}

fn bench_nlp_eval(c: &mut Criterion) {
    let d = Drone::new(default_drone()).unwrap();
    let nlp = transcribe(&scenarios::landing_bc(22.0), scenarios::landing_mode(&d), &d, 500).unwrap();
    let z: Vec<f64> = (0..nlp.n_vars()).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut g = vec![0.0; nlp.n_vars()];
    c.bench_function("objective 500 nodes", |b| b.iter(|| nlp.objective(black_box(&z))));
    c.bench_function("objective gradient 500 nodes", |b| b.iter(|| nlp.objective_gradient(black_box(&z), &mut g)));
    let w: StateVector = [1.0; 16];
    c.bench_function("node derivatives", |b| b.iter(|| nlp.node_derivatives(black_box(&z), 250, &w)));
}

fn bench_solve(c: &mut Criterion) {
    let d = Drone::new(default_drone()).unwrap();
    let bc = climb(&d);
    let opts = IpmOptions::default();
    let mut g = c.benchmark_group("climb solve");
    g.sample_size(10);
    for nodes in [40, 100] {
        g.bench_with_input(BenchmarkId::from_parameter(nodes), &nodes, |b, &n| {
            b.iter(|| optimize(&bc, GravityMode::Standard, &d, n, InitStrategy::default(), &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_nlp_eval, bench_solve);
criterion_main!(benches);
