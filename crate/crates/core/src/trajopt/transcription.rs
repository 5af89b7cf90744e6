//! Trapezoidal collocation of the minimum-energy problem.
//!
//! Decision vector is node-major: node `k` owns `[state(16), control(4)]`
//! at offset `20·k`. Defect `k` couples nodes `k` and `k+1` and occupies
//! constraint rows `16·k .. 16·k+16`.

use std::f64::consts::PI;

use crate::ad::Jet;
use crate::dynamics::{idx, rhs, GravityMode, QuadState, StateVector, CONTROL_DIM, STATE_DIM};
use crate::motor_energy::PowerCoefficients;
use crate::params::Drone;

use super::{BoundaryConditions, TrajoptError};

/// Values per node.
pub const NODE_DIM: usize = STATE_DIM + CONTROL_DIM;

/// Attitude bound on roll and pitch, rad.
pub const ATTITUDE_LIMIT: f64 = PI / 10.0;

/// Per-component typical magnitudes used to condition the NLP.
pub const VARIABLE_SCALE: [f64; NODE_DIM] = [
    100.0, 100.0, 100.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1000.0, 1000.0, 1000.0, 1000.0, 1000.0,
    1000.0, 1000.0, 1000.0,
];

/// Objective multiplier applied inside the solver (J → O(1)).
pub const OBJECTIVE_SCALE: f64 = 1e-4;

/// How the starting point is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Linear interpolation of components fixed at both ends, hover motor
    /// speed at interior nodes, zero controls.
    #[default]
    LinearInterp,
    /// The initial state at every node, zero controls.
    HoverHold,
}

/// Per-node derivative data of the dynamics.
#[derive(Debug, Clone)]
pub struct NodeDerivatives {
    pub f: StateVector,
    /// ∂f/∂state; the control Jacobian is `[0; I]`.
    pub a: [[f64; STATE_DIM]; STATE_DIM],
    /// Σᵢ wᵢ ∇²fᵢ with respect to the state.
    pub weighted_hessian: [[f64; STATE_DIM]; STATE_DIM],
}

#[derive(Debug, Clone)]
pub struct NlpProblem {
    pub drone: Drone,
    pub mode: GravityMode,
    pub bc: BoundaryConditions,
    pub nodes: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Variables pinned by boundary conditions.
    pub fixed: Vec<bool>,
    power: PowerCoefficients,
}

/// Builds the collocation NLP.
pub fn transcribe(
    bc: &BoundaryConditions,
    mode: GravityMode,
    drone: &Drone,
    nodes: usize,
) -> Result<NlpProblem, TrajoptError> {
    bc.validate()?;
    if nodes < 10 {
        return Err(TrajoptError::TooFewNodes(nodes));
    }
    if let GravityMode::Incentivized { .. } = mode {
        let moving = [idx::VX, idx::VY, idx::VZ]
            .iter()
            .any(|&i| bc.xf[i].is_some_and(|v| v != 0.0));
        if moving {
            log::warn!("landing incentive with a nonzero final velocity; the multiplier cannot vanish at a moving endpoint");
        }
    }
    let power = PowerCoefficients::new(drone);
    if !power.all_positive() {
        log::warn!("motor power coefficients are not all positive: {power:?}");
    }

    let n = nodes * NODE_DIM;
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    let mut fixed = vec![false; n];
    let x0 = bc.x0.to_array();
    for k in 0..nodes {
        let o = k * NODE_DIM;
        lower[o + idx::Z] = 0.0;
        for a in [idx::PHI, idx::THETA] {
            lower[o + a] = -ATTITUDE_LIMIT;
            upper[o + a] = ATTITUDE_LIMIT;
        }
        for m in 0..4 {
            lower[o + idx::OMEGA + m] = 0.0;
            upper[o + idx::OMEGA + m] = drone.params.omega_max;
        }
    }
    for i in 0..STATE_DIM {
        lower[i] = x0[i];
        upper[i] = x0[i];
        fixed[i] = true;
        if let Some(v) = bc.xf[i] {
            let j = (nodes - 1) * NODE_DIM + i;
            lower[j] = v;
            upper[j] = v;
            fixed[j] = true;
        }
    }
    Ok(NlpProblem {
        drone: *drone,
        mode,
        bc: bc.clone(),
        nodes,
        lower,
        upper,
        fixed,
        power,
    })
}

impl NlpProblem {
    pub fn n_vars(&self) -> usize {
        self.nodes * NODE_DIM
    }

    pub fn n_constraints(&self) -> usize {
        (self.nodes - 1) * STATE_DIM
    }

    /// Node spacing, s.
    pub fn step(&self) -> f64 {
        (self.bc.tf - self.bc.t0) / (self.nodes - 1) as f64
    }

    pub fn node_time(&self, k: usize) -> f64 {
        self.bc.t0 + k as f64 * self.step()
    }

    fn quad_weight(&self, k: usize) -> f64 {
        let h = self.step();
        if k == 0 || k + 1 == self.nodes {
            0.5 * h
        } else {
            h
        }
    }

    fn node<'a>(&self, z: &'a [f64], k: usize) -> &'a [f64] {
        &z[k * NODE_DIM..(k + 1) * NODE_DIM]
    }

    fn split(node: &[f64]) -> (StateVector, [f64; 4]) {
        let s: StateVector = std::array::from_fn(|i| node[i]);
        let u = [node[16], node[17], node[18], node[19]];
        (s, u)
    }

    /// Dynamics right-hand side at node `k`.
    pub fn node_rhs(&self, z: &[f64], k: usize) -> StateVector {
        let (s, u) = Self::split(self.node(z, k));
        rhs(&s, &u, &self.mode, &self.drone)
    }

    /// Dynamics value, state Jacobian and `w`-weighted state Hessian at node `k`.
    pub fn node_derivatives(&self, z: &[f64], k: usize, w: &[f64; STATE_DIM]) -> NodeDerivatives {
        let (s, u) = Self::split(self.node(z, k));
        let sj: [Jet<STATE_DIM>; STATE_DIM] = std::array::from_fn(|i| Jet::variable(s[i], i));
        let uj = u.map(Jet::constant);
        let fj = rhs(&sj, &uj, &self.mode, &self.drone);
        let mut out = NodeDerivatives {
            f: [0.0; STATE_DIM],
            a: [[0.0; STATE_DIM]; STATE_DIM],
            weighted_hessian: [[0.0; STATE_DIM]; STATE_DIM],
        };
        for (i, fi) in fj.iter().enumerate() {
            out.f[i] = fi.v;
            out.a[i] = fi.g;
            if w[i] != 0.0 {
                for r in 0..STATE_DIM {
                    for c in 0..STATE_DIM {
                        out.weighted_hessian[r][c] += w[i] * fi.h[r][c];
                    }
                }
            }
        }
        out
    }

    /// Trapezoidal motor energy, J.
    pub fn objective(&self, z: &[f64]) -> f64 {
        (0..self.nodes)
            .map(|k| {
                let n = self.node(z, k);
                let p: f64 = (0..4).map(|m| self.power.power(n[idx::OMEGA + m], n[16 + m])).sum();
                self.quad_weight(k) * p
            })
            .sum()
    }

    pub fn objective_gradient(&self, z: &[f64], g: &mut [f64]) {
        g.fill(0.0);
        for k in 0..self.nodes {
            let w = self.quad_weight(k);
            let o = k * NODE_DIM;
            for m in 0..4 {
                g[o + idx::OMEGA + m] = w * self.power.d_power(z[o + idx::OMEGA + m]);
                g[o + 16 + m] = w * 2.0 * self.power.c_accel * z[o + 16 + m];
            }
        }
    }

    /// Diagonal of the objective Hessian at node `k` (ω then α entries).
    pub fn objective_hessian_node(&self, z: &[f64], k: usize) -> ([f64; 4], [f64; 4]) {
        let w = self.quad_weight(k);
        let n = self.node(z, k);
        (
            std::array::from_fn(|m| w * self.power.d2_power(n[idx::OMEGA + m])),
            [w * 2.0 * self.power.c_accel; 4],
        )
    }

    /// Collocation defects `s_{k+1} − s_k − h/2·(f_k + f_{k+1})`.
    pub fn defects(&self, z: &[f64], c: &mut [f64]) {
        let h = self.step();
        let mut f_prev = self.node_rhs(z, 0);
        for k in 0..self.nodes - 1 {
            let f_next = self.node_rhs(z, k + 1);
            let (a, b) = (self.node(z, k), self.node(z, k + 1));
            for i in 0..STATE_DIM {
                c[k * STATE_DIM + i] = b[i] - a[i] - 0.5 * h * (f_prev[i] + f_next[i]);
            }
            f_prev = f_next;
        }
    }

    pub fn max_defect(&self, z: &[f64]) -> f64 {
        let mut c = vec![0.0; self.n_constraints()];
        self.defects(z, &mut c);
        c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest bound violation over all variables.
    pub fn max_bound_violation(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Constraint Jacobian as (row, column, value) triplets.
    pub fn jacobian_triplets(&self, z: &[f64]) -> Vec<(usize, usize, f64)> {
        let h = self.step();
        let zero = [0.0; STATE_DIM];
        let a: Vec<_> = (0..self.nodes).map(|k| self.node_derivatives(z, k, &zero).a).collect();
        let mut out = Vec::with_capacity((self.nodes - 1) * STATE_DIM * 2 * (STATE_DIM + 1));
        for k in 0..self.nodes - 1 {
            for i in 0..STATE_DIM {
                let row = k * STATE_DIM + i;
                for (node, sign) in [(k, -1.0), (k + 1, 1.0)] {
                    let o = node * NODE_DIM;
                    for j in 0..STATE_DIM {
                        let mut v = -0.5 * h * a[node][i][j];
                        if i == j {
                            v += sign;
                        }
                        if v != 0.0 {
                            out.push((row, o + j, v));
                        }
                    }
                    if i >= idx::OMEGA {
                        out.push((row, o + 16 + (i - idx::OMEGA), -0.5 * h));
                    }
                }
            }
        }
        out
    }

    /// Lower triangle of ∇²(σ·f + λᵀc) as triplets.
    pub fn hessian_triplets(&self, z: &[f64], lambda: &[f64], obj_factor: f64) -> Vec<(usize, usize, f64)> {
        let h = self.step();
        let mut out = Vec::new();
        for k in 0..self.nodes {
            let w: [f64; STATE_DIM] = std::array::from_fn(|i| {
                let prev = if k > 0 { lambda[(k - 1) * STATE_DIM + i] } else { 0.0 };
                let next = if k + 1 < self.nodes { lambda[k * STATE_DIM + i] } else { 0.0 };
                -0.5 * h * (prev + next)
            });
            let d = self.node_derivatives(z, k, &w);
            let o = k * NODE_DIM;
            for r in 0..STATE_DIM {
                for c in 0..=r {
                    let v = d.weighted_hessian[r][c];
                    if v != 0.0 {
                        out.push((o + r, o + c, v));
                    }
                }
            }
            let (hw, ha) = self.objective_hessian_node(z, k);
            for m in 0..4 {
                out.push((o + idx::OMEGA + m, o + idx::OMEGA + m, obj_factor * hw[m]));
                out.push((o + 16 + m, o + 16 + m, obj_factor * ha[m]));
            }
        }
        out
    }

    /// Starting point for the solver, clamped into the variable bounds.
    pub fn initial_guess(&self, strategy: InitStrategy) -> Vec<f64> {
        let x0 = self.bc.x0.to_array();
        let hover = self.drone.hover_omega();
        let last = (self.nodes - 1) as f64;
        let mut z = vec![0.0; self.n_vars()];
        for k in 0..self.nodes {
            let o = k * NODE_DIM;
            let s = k as f64 / last;
            for i in 0..STATE_DIM {
                z[o + i] = match strategy {
                    InitStrategy::HoverHold => x0[i],
                    InitStrategy::LinearInterp => match self.bc.xf[i] {
                        _ if i >= idx::OMEGA && k > 0 && k + 1 < self.nodes => hover,
                        Some(v) => x0[i] + s * (v - x0[i]),
                        None => x0[i],
                    },
                };
            }
        }
        for (i, v) in z.iter_mut().enumerate() {
            if self.fixed[i] {
                *v = self.lower[i];
            } else {
                *v = v.clamp(self.lower[i], self.upper[i]);
            }
        }
        z
    }

    /// State at node `k` of a decision vector.
    pub fn state_at(&self, z: &[f64], k: usize) -> QuadState {
        QuadState::from_array(&Self::split(self.node(z, k)).0)
    }

    pub fn control_at(&self, z: &[f64], k: usize) -> [f64; 4] {
        Self::split(self.node(z, k)).1
    }
}
