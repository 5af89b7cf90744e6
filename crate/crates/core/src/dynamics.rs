//! Quadrotor rigid-body equations of motion and a fixed-step RK4 integrator.
//!
//! State layout (16): position, velocity, Euler angles (roll, pitch, yaw),
//! Euler-angle rates, and the four motor speeds. Controls are the four motor
//! angular accelerations. Translational drag uses the body's C_D·A only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::Real;
use crate::params::Drone;

pub const STATE_DIM: usize = 16;
pub const CONTROL_DIM: usize = 4;

pub type StateVector = [f64; STATE_DIM];

/// Indices into [`StateVector`].
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const VX: usize = 3;
    pub const VY: usize = 4;
    pub const VZ: usize = 5;
    pub const PHI: usize = 6;
    pub const THETA: usize = 7;
    pub const PSI: usize = 8;
    pub const PHI_DOT: usize = 9;
    pub const THETA_DOT: usize = 10;
    pub const PSI_DOT: usize = 11;
    pub const OMEGA: usize = 12;
}

/// Column names of the state, in layout order.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "phidot", "thetadot", "psidot", "omega1",
    "omega2", "omega3", "omega4",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub p_rate: f64,
    pub q_rate: f64,
    pub r_rate: f64,
    pub omega: [f64; 4],
}

impl QuadState {
    pub fn to_array(&self) -> StateVector {
        [
            self.x,
            self.y,
            self.z,
            self.vx,
            self.vy,
            self.vz,
            self.phi,
            self.theta,
            self.psi,
            self.p_rate,
            self.q_rate,
            self.r_rate,
            self.omega[0],
            self.omega[1],
            self.omega[2],
            self.omega[3],
        ]
    }

    pub fn from_array(a: &StateVector) -> Self {
        Self {
            x: a[0],
            y: a[1],
            z: a[2],
            vx: a[3],
            vy: a[4],
            vz: a[5],
            phi: a[6],
            theta: a[7],
            psi: a[8],
            p_rate: a[9],
            q_rate: a[10],
            r_rate: a[11],
            omega: [a[12], a[13], a[14], a[15]],
        }
    }

    /// At rest at `position` with every motor at `omega`.
    pub fn resting(position: [f64; 3], omega: f64) -> Self {
        Self {
            x: position[0],
            y: position[1],
            z: position[2],
            omega: [omega; 4],
            ..Default::default()
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Motor angular accelerations, rad/s².
    pub alpha: [f64; 4],
}

/// How gravity enters the vertical equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GravityMode {
    /// Plain −g.
    Standard,
    /// −g scaled by 2/(1+exp(−k·d²)) − 1, with d the distance to `target`.
    /// The multiplier vanishes at the target, letting the vehicle rest there.
    Incentivized { target: [f64; 3], k_decay: f64 },
}

impl GravityMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Incentivized { .. } => "incentivized",
        }
    }
}

/// Gravity multiplier for a squared distance `dist2` to the landing target.
pub fn gravity_multiplier(dist2: f64, k_decay: f64) -> f64 {
    2.0 / (1.0 + (-k_decay * dist2).exp()) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorForces {
    /// Per-motor thrust k_b·ω², N.
    pub thrust: [f64; 4],
    /// Per-motor reaction torque k_τ·ω², N·m.
    pub torque: [f64; 4],
    pub total_thrust: f64,
    /// ω₁ − ω₂ + ω₃ − ω₄, rad/s.
    pub omega_bar: f64,
}

pub fn motor_forces(s: &QuadState, drone: &Drone) -> MotorForces {
    let d = &drone.derived;
    let thrust = s.omega.map(|w| d.k_b * w * w);
    let torque = s.omega.map(|w| d.k_tau * w * w);
    MotorForces {
        thrust,
        torque,
        total_thrust: thrust.iter().sum(),
        omega_bar: s.omega[0] - s.omega[1] + s.omega[2] - s.omega[3],
    }
}

/// Time derivative of the state, generic over the scalar type.
pub fn rhs<T: Real>(s: &[T; STATE_DIM], alpha: &[T; 4], mode: &GravityMode, drone: &Drone) -> [T; STATE_DIM] {
    use idx::*;
    let p = &drone.params;
    let d = &drone.derived;
    let m = d.m_total;

    let w = [s[OMEGA], s[OMEGA + 1], s[OMEGA + 2], s[OMEGA + 3]];
    let sq = w.map(|wi| wi * wi);
    let force = sq.map(|x| x * d.k_b);
    let thrust = force[0] + force[1] + force[2] + force[3];
    let yaw_torque = (sq[0] - sq[1] + sq[2] - sq[3]) * d.k_tau;
    let omega_bar = w[0] - w[1] + w[2] - w[3];

    let (sphi, cphi) = (s[PHI].sin(), s[PHI].cos());
    let (sth, cth) = (s[THETA].sin(), s[THETA].cos());
    let (spsi, cpsi) = (s[PSI].sin(), s[PSI].cos());
    let t_over_m = thrust * (1.0 / m);
    let drag = -0.5 * p.cd1 * p.rho * p.a1 / m;

    let gravity = match *mode {
        GravityMode::Standard => T::cst(p.g),
        GravityMode::Incentivized { target, k_decay } => {
            let dx = s[X] * -1.0 + target[0];
            let dy = s[Y] * -1.0 + target[1];
            let dz = s[Z] * -1.0 + target[2];
            let dist2 = dx * dx + dy * dy + dz * dz;
            let e = (dist2 * -k_decay).exp();
            ((e + 1.0).recip_real() * 2.0 + -1.0) * p.g
        }
    };

    let (pr, qr, rr) = (s[PHI_DOT], s[THETA_DOT], s[PSI_DOT]);
    let j = d.j_total;

    let mut out = [T::cst(0.0); STATE_DIM];
    out[X] = s[VX];
    out[Y] = s[VY];
    out[Z] = s[VZ];
    out[VX] = t_over_m * (cphi * sth * cpsi + sphi * spsi) + s[VX].signed_square() * drag;
    out[VY] = t_over_m * (cphi * sth * spsi - sphi * cpsi) + s[VY].signed_square() * drag;
    out[VZ] = t_over_m * (cphi * cth) - gravity + s[VZ].signed_square() * drag;
    out[PHI] = pr;
    out[THETA] = qr;
    out[PSI] = rr;
    out[PHI_DOT] = qr * rr * ((p.i_y - p.i_z) / p.i_x) + (force[1] - force[3]) * (p.l_arm / p.i_x)
        - qr * omega_bar * (j / p.i_x);
    out[THETA_DOT] = pr * rr * ((p.i_z - p.i_x) / p.i_y)
        + (force[2] - force[0]) * (p.l_arm / p.i_y)
        + pr * omega_bar * (j / p.i_y);
    out[PSI_DOT] = pr * qr * ((p.i_x - p.i_y) / p.i_z) + yaw_torque * (1.0 / p.i_z);
    for i in 0..4 {
        out[OMEGA + i] = alpha[i];
    }
    out
}

trait RecipReal: Real {
    fn recip_real(self) -> Self {
        Self::cst(1.0) / self
    }
}

impl<T: Real> RecipReal for T {}

pub fn derivative(s: &QuadState, u: &ControlInput, mode: &GravityMode, drone: &Drone) -> StateVector {
    rhs(&s.to_array(), &u.alpha, mode, drone)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("control profile is empty or does not cover [{t0}, {t_end}]")]
    ControlsDoNotCover { t0: f64, t_end: f64 },
    #[error("state component `{component}` became non-finite at t = {t} s")]
    Diverged { t: f64, component: &'static str },
}

/// Controls sampled at strictly increasing times, linearly interpolated
/// between samples and held beyond the ends.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlProfile {
    pub times: Vec<f64>,
    pub inputs: Vec<ControlInput>,
}

impl ControlProfile {
    pub fn new(times: Vec<f64>, inputs: Vec<ControlInput>) -> Self {
        assert_eq!(times.len(), inputs.len(), "one input per sample time");
        Self { times, inputs }
    }

    /// A single input held forever.
    pub fn constant(u: ControlInput) -> Self {
        Self::new(vec![0.0], vec![u])
    }

    pub fn at(&self, t: f64) -> ControlInput {
        let n = self.times.len();
        if n == 0 {
            return ControlInput::default();
        }
        if t <= self.times[0] {
            return self.inputs[0];
        }
        if t >= self.times[n - 1] {
            return self.inputs[n - 1];
        }
        let k = self.times.partition_point(|&tk| tk <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.inputs[k].alpha, self.inputs[k + 1].alpha);
        ControlInput {
            alpha: std::array::from_fn(|i| a[i] + w * (b[i] - a[i])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: QuadState,
    pub control: ControlInput,
}

/// A motor speed pushed back into `[0, omega_max]` after an integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampEvent {
    pub t: f64,
    pub motor: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub clamp_events: Vec<ClampEvent>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn final_state(&self) -> Option<QuadState> {
        self.samples.last().map(|s| s.state)
    }
}

fn rk4_step(s: &StateVector, t: f64, dt: f64, controls: &ControlProfile, mode: &GravityMode, drone: &Drone) -> StateVector {
    let add = |a: &StateVector, b: &StateVector, h: f64| -> StateVector { std::array::from_fn(|i| a[i] + h * b[i]) };
    let u0 = controls.at(t).alpha;
    let uh = controls.at(t + 0.5 * dt).alpha;
    let u1 = controls.at(t + dt).alpha;
    let k1 = rhs(s, &u0, mode, drone);
    let k2 = rhs(&add(s, &k1, 0.5 * dt), &uh, mode, drone);
    let k3 = rhs(&add(s, &k2, 0.5 * dt), &uh, mode, drone);
    let k4 = rhs(&add(s, &k3, dt), &u1, mode, drone);
    std::array::from_fn(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Fixed-step RK4 simulation over `[t0, t_end]`.
///
/// The step count is `round((t_end − t0)/dt)`; the step is shrunk slightly so
/// the run ends exactly at `t_end`. Motor speeds leaving `[0, omega_max]` are
/// clamped and the event recorded.
pub fn integrate(
    s0: &QuadState,
    controls: &ControlProfile,
    t0: f64,
    t_end: f64,
    dt: f64,
    mode: &GravityMode,
    drone: &Drone,
) -> Result<Trajectory, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::BadStep(dt));
    }
    if controls.times.is_empty() || !(t_end >= t0) {
        return Err(DynamicsError::ControlsDoNotCover { t0, t_end });
    }
    let steps = ((t_end - t0) / dt).round().max(1.0) as usize;
    let h = (t_end - t0) / steps as f64;
    let omega_max = drone.params.omega_max;

    let mut traj = Trajectory::default();
    let mut s = s0.to_array();
    traj.samples.push(TrajectorySample {
        t: t0,
        state: *s0,
        control: controls.at(t0),
    });
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        s = rk4_step(&s, t, h, controls, mode, drone);
        let t_next = t0 + (k + 1) as f64 * h;
        for motor in 0..4 {
            let w = &mut s[idx::OMEGA + motor];
            if *w < 0.0 || *w > omega_max {
                traj.clamp_events.push(ClampEvent {
                    t: t_next,
                    motor,
                    value: *w,
                });
                *w = w.clamp(0.0, omega_max);
            }
        }
        if let Some(i) = s.iter().position(|v| !v.is_finite()) {
            return Err(DynamicsError::Diverged {
                t: t_next,
                component: STATE_NAMES[i],
            });
        }
        traj.samples.push(TrajectorySample {
            t: t_next,
            state: QuadState::from_array(&s),
            control: controls.at(t_next),
        });
    }
    Ok(traj)
}
