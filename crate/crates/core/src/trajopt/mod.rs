//! Minimum-energy takeoff and landing trajectories.
//!
//! A boundary-value problem is transcribed by trapezoidal collocation into an
//! NLP ([`transcribe`]) and solved by the bundled interior-point method
//! ([`solve`]). Any other solver can be plugged in through [`NlpSolver`].

pub mod analysis;
mod band;
pub mod ipm;
pub mod scenarios;
mod transcription;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ControlInput, GravityMode, QuadState, Trajectory, TrajectorySample, STATE_DIM, STATE_NAMES};
use crate::motor_energy::trajectory_energy;
use crate::params::Drone;

pub use band::{BandMatrix, SingularPivot};
pub use ipm::{solve_nlp, IpmError, IpmOptions, IpmOutcome, IpmStatus};
pub use transcription::{
    transcribe, InitStrategy, NlpProblem, NodeDerivatives, ATTITUDE_LIMIT, NODE_DIM, OBJECTIVE_SCALE, VARIABLE_SCALE,
};

/// Default collocation node count.
pub const DEFAULT_NODES: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajoptError {
    #[error("final time {tf} must exceed initial time {t0}")]
    BadHorizon { t0: f64, tf: f64 },
    #[error("boundary value for `{0}` is not finite")]
    NonFiniteBoundary(&'static str),
    #[error("need at least 10 collocation nodes, got {0}")]
    TooFewNodes(usize),
    #[error("numerical failure: {0}")]
    Numerical(#[from] IpmError),
}

/// Initial state (fully fixed) and final state (per-component fixed or free).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub x0: QuadState,
    /// `None` leaves the component free at the final node.
    pub xf: [Option<f64>; STATE_DIM],
    pub t0: f64,
    pub tf: f64,
}

impl BoundaryConditions {
    /// Both end states fully fixed.
    pub fn fixed(x0: QuadState, xf: QuadState, t0: f64, tf: f64) -> Self {
        Self {
            x0,
            xf: xf.to_array().map(Some),
            t0,
            tf,
        }
    }

    pub fn with_horizon(&self, tf: f64) -> Self {
        Self { tf, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), TrajoptError> {
        if !(self.tf > self.t0) || !self.t0.is_finite() || !self.tf.is_finite() {
            return Err(TrajoptError::BadHorizon { t0: self.t0, tf: self.tf });
        }
        for (i, v) in self.x0.to_array().iter().enumerate() {
            if !v.is_finite() {
                return Err(TrajoptError::NonFiniteBoundary(STATE_NAMES[i]));
            }
        }
        for (i, v) in self.xf.iter().enumerate() {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(TrajoptError::NonFiniteBoundary(STATE_NAMES[i]));
            }
        }
        Ok(())
    }

    /// Fixed final position, when all three components are fixed.
    pub fn final_position(&self) -> Option<[f64; 3]> {
        Some([self.xf[0]?, self.xf[1]?, self.xf[2]?])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

impl OptStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::MaxIter => "max_iter",
            Self::Infeasible => "infeasible",
        }
    }
}

impl From<IpmStatus> for OptStatus {
    fn from(s: IpmStatus) -> Self {
        match s {
            IpmStatus::Optimal => Self::Optimal,
            IpmStatus::MaxIter => Self::MaxIter,
            IpmStatus::Infeasible => Self::Infeasible,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptResult {
    pub status: OptStatus,
    /// Node states and controls of the returned point.
    pub trajectory: Trajectory,
    /// Trapezoidal motor energy, J; absent when infeasible.
    pub energy: Option<f64>,
    pub iterations: usize,
    pub restoration_calls: usize,
    pub kkt_error: f64,
    /// Largest unscaled collocation defect.
    pub max_defect: f64,
    pub max_bound_violation: f64,
    pub message: String,
}

/// Hook for alternative NLP solvers.
pub trait NlpSolver {
    fn solve_nlp(&self, nlp: &NlpProblem, z0: &[f64]) -> Result<IpmOutcome, IpmError>;
}

/// The bundled interior-point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint(pub IpmOptions);

impl NlpSolver for InteriorPoint {
    fn solve_nlp(&self, nlp: &NlpProblem, z0: &[f64]) -> Result<IpmOutcome, IpmError> {
        solve_nlp(nlp, z0, &self.0)
    }
}

/// Converts a decision vector into a node trajectory.
pub fn decision_to_trajectory(nlp: &NlpProblem, z: &[f64]) -> Trajectory {
    Trajectory {
        samples: (0..nlp.nodes)
            .map(|k| TrajectorySample {
                t: nlp.node_time(k),
                state: nlp.state_at(z, k),
                control: ControlInput {
                    alpha: nlp.control_at(z, k),
                },
            })
            .collect(),
        clamp_events: Vec::new(),
    }
}

pub fn solve_with<S: NlpSolver>(solver: &S, nlp: &NlpProblem, init: InitStrategy) -> Result<OptResult, TrajoptError> {
    let z0 = nlp.initial_guess(init);
    let out = solver.solve_nlp(nlp, &z0)?;
    let status = OptStatus::from(out.status);
    let trajectory = decision_to_trajectory(nlp, &out.z);
    let energy = (status != OptStatus::Infeasible).then(|| trajectory_energy(&trajectory, &nlp.drone).total);
    log::info!(
        "{} after {} iterations: energy {:?} J, max defect {:.2e}",
        status.name(),
        out.iterations,
        energy,
        out.max_defect
    );
    Ok(OptResult {
        status,
        energy,
        iterations: out.iterations,
        restoration_calls: out.restoration_calls,
        kkt_error: out.kkt_error,
        max_defect: out.max_defect,
        max_bound_violation: nlp.max_bound_violation(&out.z),
        message: out.message,
        trajectory,
    })
}

/// Solves with the bundled interior-point method.
pub fn solve(nlp: &NlpProblem, init: InitStrategy, opts: &IpmOptions) -> Result<OptResult, TrajoptError> {
    solve_with(&InteriorPoint(*opts), nlp, init)
}

/// Transcribes and solves in one call.
pub fn optimize(
    bc: &BoundaryConditions,
    mode: GravityMode,
    drone: &Drone,
    nodes: usize,
    init: InitStrategy,
    opts: &IpmOptions,
) -> Result<OptResult, TrajoptError> {
    let nlp = transcribe(bc, mode, drone, nodes)?;
    solve(&nlp, init, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub tf: f64,
    pub mode: &'static str,
    pub energy_j: Option<f64>,
    pub status: OptStatus,
    pub iterations: usize,
}

/// Solves `bc` over several horizons in both gravity modes. Solves run in
/// parallel; rows come back ordered by horizon, incentivized first.
pub fn tf_sweep(
    bc: &BoundaryConditions,
    incentive: GravityMode,
    drone: &Drone,
    tf_values: &[f64],
    nodes: usize,
    init: InitStrategy,
    opts: &IpmOptions,
) -> Vec<SweepRow> {
    let jobs: Vec<(usize, f64, GravityMode)> = tf_values
        .iter()
        .enumerate()
        .flat_map(|(i, &tf)| [(2 * i, tf, incentive), (2 * i + 1, tf, GravityMode::Standard)])
        .collect();
    let mut rows: Vec<(usize, SweepRow)> = jobs
        .par_iter()
        .map(|&(order, tf, mode)| {
            let row = match optimize(&bc.with_horizon(tf), mode, drone, nodes, init, opts) {
                Ok(r) => SweepRow {
                    tf,
                    mode: mode.name(),
                    energy_j: r.energy.filter(|_| r.status == OptStatus::Optimal),
                    status: r.status,
                    iterations: r.iterations,
                },
                Err(e) => {
                    log::warn!("t_f = {tf} ({}): {e}", mode.name());
                    SweepRow {
                        tf,
                        mode: mode.name(),
                        energy_j: None,
                        status: OptStatus::Infeasible,
                        iterations: 0,
                    }
                }
            };
            (order, row)
        })
        .collect();
    rows.sort_by(|a, b| a.1.tf.total_cmp(&b.1.tf).then(a.0.cmp(&b.0)));
    rows.into_iter().map(|(_, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_validation() {
        let s = QuadState::default();
        assert!(BoundaryConditions::fixed(s, s, 0.0, 0.0).validate().is_err());
        assert!(BoundaryConditions::fixed(s, s, 1.0, 0.5).validate().is_err());
        let mut bc = BoundaryConditions::fixed(s, s, 0.0, 1.0);
        bc.validate().unwrap();
        bc.xf[3] = Some(f64::NAN);
        assert_eq!(bc.validate(), Err(TrajoptError::NonFiniteBoundary("vx")));
    }

    #[test]
    fn hover_to_hover_solves_at_hover() {
        let d = Drone::default();
        let s = QuadState::resting([0.0, 0.0, 20.0], d.hover_omega());
        let bc = BoundaryConditions::fixed(s, s, 0.0, 4.0);
        let r = optimize(&bc, GravityMode::Standard, &d, 20, InitStrategy::HoverHold, &IpmOptions::default()).unwrap();
        assert_eq!(r.status, OptStatus::Optimal, "{}", r.message);
        assert!(r.max_defect < 1e-4);
        let hover_energy = 4.0 * crate::motor_energy::motor_power(d.hover_omega(), 0.0, &d).total * 4.0;
        // hovering is optimal up to the motor-speed dips the horizon allows
        assert!(r.energy.unwrap() <= hover_energy * 1.0001);
        assert!(r.energy.unwrap() > 0.9 * hover_energy);
    }

    #[test]
    fn short_climb_is_optimal_and_consistent() {
        let d = Drone::default();
        let a = QuadState::resting([0.0, 0.0, 0.0], d.hover_omega());
        let b = QuadState::resting([5.0, 0.0, 10.0], d.hover_omega());
        let bc = BoundaryConditions::fixed(a, b, 0.0, 8.0);
        let r = optimize(&bc, GravityMode::Standard, &d, 60, InitStrategy::LinearInterp, &IpmOptions::default()).unwrap();
        assert_eq!(r.status, OptStatus::Optimal, "{}", r.message);
        assert!(r.max_bound_violation < 1e-4);
        let end = r.trajectory.final_state().unwrap();
        assert!((end.x - 5.0).abs() < 1e-9 && (end.z - 10.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_rows_ordered() {
        let d = Drone::default();
        let s = QuadState::resting([0.0, 0.0, 5.0], d.hover_omega());
        let bc = BoundaryConditions::fixed(s, s, 0.0, 3.0);
        let mode = GravityMode::Incentivized {
            target: [0.0, 0.0, 5.0],
            k_decay: 3.0,
        };
        let rows = tf_sweep(&bc, mode, &d, &[4.0, 2.0, 3.0], 12, InitStrategy::HoverHold, &IpmOptions::default());
        let tfs: Vec<f64> = rows.iter().map(|r| r.tf).collect();
        assert_eq!(tfs, [2.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
        assert_eq!(rows[0].mode, "incentivized");
        assert_eq!(rows[1].mode, "standard");
    }
}
