//! Electrical power drawn by each brushed-DC motor and the energy of a
//! trajectory.
//!
//! Per motor, P(ω, α) = c₀ + c₁ω + c₂ω² + c₃ω³ + c₄ω⁴ + c_α·α².

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::params::Drone;

/// Polynomial coefficients of the per-motor power model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_accel: f64,
}

impl PowerCoefficients {
    pub fn new(drone: &Drone) -> Self {
        let p = &drone.params;
        let d = &drone.derived;
        let (r, kt, tf, df, ktau, j) = (p.r_winding, p.k_t_motor, p.t_f_friction, p.d_f, d.k_tau, d.j_total);
        let kt2 = kt * kt;
        Self {
            c0: r * tf * tf / kt2,
            c1: tf / kt * (2.0 * r * df / kt + kt),
            c2: df / kt * (r * df / kt + kt) + 2.0 * r * tf * ktau / kt2,
            c3: ktau / kt * (2.0 * r * df / kt + kt),
            c4: r * ktau * ktau / kt2,
            c_accel: r * j * j / kt2,
        }
    }

    /// True when every polynomial coefficient is strictly positive, which makes
    /// power strictly increasing in ω ≥ 0.
    pub fn all_positive(&self) -> bool {
        [self.c0, self.c1, self.c2, self.c3, self.c4, self.c_accel]
            .iter()
            .all(|c| *c > 0.0)
    }

    pub fn power(&self, omega: f64, alpha: f64) -> f64 {
        self.c0 + omega * (self.c1 + omega * (self.c2 + omega * (self.c3 + omega * self.c4))) + self.c_accel * alpha * alpha
    }

    /// ∂P/∂ω.
    pub fn d_power(&self, omega: f64) -> f64 {
        self.c1 + omega * (2.0 * self.c2 + omega * (3.0 * self.c3 + omega * 4.0 * self.c4))
    }

    /// ∂²P/∂ω².
    pub fn d2_power(&self, omega: f64) -> f64 {
        2.0 * self.c2 + omega * (6.0 * self.c3 + omega * 12.0 * self.c4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerBreakdown {
    pub friction_const: f64,
    pub linear: f64,
    pub quadratic: f64,
    pub cubic: f64,
    pub quartic: f64,
    pub accel: f64,
    pub total: f64,
}

/// Instantaneous power of one motor at speed `omega` (rad/s) and angular
/// acceleration `alpha` (rad/s²), W.
pub fn motor_power(omega: f64, alpha: f64, drone: &Drone) -> PowerBreakdown {
    debug_assert!(omega >= 0.0, "negative motor speed {omega}");
    let c = PowerCoefficients::new(drone);
    let w2 = omega * omega;
    let mut b = PowerBreakdown {
        friction_const: c.c0,
        linear: c.c1 * omega,
        quadratic: c.c2 * w2,
        cubic: c.c3 * w2 * omega,
        quartic: c.c4 * w2 * w2,
        accel: c.c_accel * alpha * alpha,
        total: 0.0,
    };
    b.total = b.friction_const + b.linear + b.quadratic + b.cubic + b.quartic + b.accel;
    b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    /// Σ over motors of ∫P dt, J.
    pub total: f64,
    pub per_motor: [f64; 4],
    /// Per-sample power of each motor, W.
    pub series: Vec<[f64; 4]>,
}

impl EnergyReport {
    pub fn total_power(&self, k: usize) -> f64 {
        self.series[k].iter().sum()
    }
}

/// Integrates motor power over the trajectory's samples with the trapezoid
/// rule.
pub fn trajectory_energy(traj: &Trajectory, drone: &Drone) -> EnergyReport {
    let c = PowerCoefficients::new(drone);
    let series: Vec<[f64; 4]> = traj
        .samples
        .iter()
        .map(|s| std::array::from_fn(|i| c.power(s.state.omega[i], s.control.alpha[i])))
        .collect();
    let mut per_motor = [0.0; 4];
    for k in 1..series.len() {
        let h = traj.samples[k].t - traj.samples[k - 1].t;
        for i in 0..4 {
            per_motor[i] += 0.5 * h * (series[k - 1][i] + series[k][i]);
        }
    }
    EnergyReport {
        total: per_motor.iter().sum(),
        per_motor,
        series,
    }
}
