//! Metrics on optimized trajectories.

use serde::Serialize;

use crate::dynamics::{integrate, ControlInput, ControlProfile, DynamicsError, GravityMode, Trajectory};
use crate::params::Drone;

/// Altitude counted as ground contact, m.
pub const TOUCHDOWN_ALTITUDE: f64 = 0.1;
/// Motor speed counted as stopped, as a fraction of the speed limit.
pub const IDLE_FRACTION: f64 = 0.05;
/// Mean motor speed counted as saturated, as a fraction of the speed limit.
pub const SATURATION_FRACTION: f64 = 0.99;

/// First sample time at or below [`TOUCHDOWN_ALTITUDE`].
pub fn touchdown_time(traj: &Trajectory) -> Option<f64> {
    traj.samples.iter().find(|s| s.state.z <= TOUCHDOWN_ALTITUDE).map(|s| s.t)
}

/// Largest distance travelled from the touchdown position afterwards, m.
pub fn post_touchdown_drift(traj: &Trajectory) -> Option<f64> {
    let k = traj.samples.iter().position(|s| s.state.z <= TOUCHDOWN_ALTITUDE)?;
    let p0 = traj.samples[k].state.position();
    Some(
        traj.samples[k..]
            .iter()
            .map(|s| {
                let p = s.state.position();
                ((p[0] - p0[0]).powi(2) + (p[1] - p0[1]).powi(2) + (p[2] - p0[2]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub start: f64,
    pub duration: f64,
}

/// Longest contiguous span, before `until`, with every motor below
/// [`IDLE_FRACTION`]·ω_max.
pub fn idle_window(traj: &Trajectory, drone: &Drone, until: f64) -> Option<Window> {
    let limit = IDLE_FRACTION * drone.params.omega_max;
    let mut best: Option<Window> = None;
    let mut start: Option<f64> = None;
    let mut prev_t = 0.0;
    let close = |start: f64, end: f64, best: &mut Option<Window>| {
        let w = Window {
            start,
            duration: end - start,
        };
        if best.is_none_or(|b| w.duration > b.duration) {
            *best = Some(w);
        }
    };
    for s in traj.samples.iter().filter(|s| s.t <= until) {
        let idle = s.state.omega.iter().all(|w| *w <= limit);
        match (idle, start) {
            (true, None) => start = Some(s.t),
            (false, Some(t0)) => {
                close(t0, prev_t, &mut best);
                start = None;
            }
            _ => {}
        }
        prev_t = s.t;
    }
    if let Some(t0) = start {
        close(t0, prev_t, &mut best);
    }
    best
}

/// Fraction of samples whose mean motor speed is at least
/// [`SATURATION_FRACTION`]·ω_max.
pub fn saturation_fraction(traj: &Trajectory, drone: &Drone) -> f64 {
    if traj.samples.is_empty() {
        return 0.0;
    }
    let limit = SATURATION_FRACTION * drone.params.omega_max;
    let n = traj
        .samples
        .iter()
        .filter(|s| s.state.omega.iter().sum::<f64>() / 4.0 >= limit)
        .count();
    n as f64 / traj.samples.len() as f64
}

/// Replays the node controls (linearly interpolated) through the RK4
/// integrator from the first node state.
pub fn resimulate(traj: &Trajectory, mode: &GravityMode, drone: &Drone, dt: f64) -> Result<Trajectory, DynamicsError> {
    let first = traj.samples.first().ok_or(DynamicsError::ControlsDoNotCover { t0: 0.0, t_end: 0.0 })?;
    let last = traj.samples.last().unwrap_or(first);
    let profile = ControlProfile::new(
        traj.samples.iter().map(|s| s.t).collect(),
        traj.samples.iter().map(|s| ControlInput { alpha: s.control.alpha }).collect(),
    );
    integrate(&first.state, &profile, first.t, last.t, dt, mode, drone)
}

/// Distance between the final positions of two trajectories, m.
pub fn endpoint_gap(a: &Trajectory, b: &Trajectory) -> Option<f64> {
    let pa = a.final_state()?.position();
    let pb = b.final_state()?.position();
    Some(((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{QuadState, TrajectorySample};

    fn traj(points: &[(f64, f64, f64)]) -> Trajectory {
        Trajectory {
            samples: points
                .iter()
                .map(|&(t, z, w)| TrajectorySample {
                    t,
                    state: QuadState::resting([t, 0.0, z], w),
                    control: Default::default(),
                })
                .collect(),
            clamp_events: vec![],
        }
    }

    #[test]
    fn touchdown_and_drift() {
        let tr = traj(&[(0.0, 5.0, 900.0), (1.0, 0.05, 10.0), (2.0, 0.0, 0.0), (3.0, 0.0, 0.0)]);
        assert_eq!(touchdown_time(&tr), Some(1.0));
        // x advances 1 m per sample in this fixture
        assert!((post_touchdown_drift(&tr).unwrap() - (4.0f64 + 0.05f64.powi(2)).sqrt()).abs() < 1e-12);
        assert_eq!(touchdown_time(&traj(&[(0.0, 5.0, 0.0)])), None);
    }

    #[test]
    fn idle_window_longest_span() {
        let d = Drone::default();
        let tr = traj(&[
            (0.0, 9.0, 900.0),
            (1.0, 8.0, 10.0),
            (2.0, 7.0, 10.0),
            (3.0, 6.0, 900.0),
            (4.0, 5.0, 0.0),
            (5.0, 4.0, 0.0),
            (6.0, 3.0, 0.0),
            (7.0, 2.0, 900.0),
        ]);
        assert_eq!(idle_window(&tr, &d, 10.0), Some(Window { start: 4.0, duration: 2.0 }));
        assert_eq!(idle_window(&tr, &d, 4.5), Some(Window { start: 1.0, duration: 1.0 }));
        assert_eq!(idle_window(&traj(&[(0.0, 1.0, 900.0)]), &d, 1.0), None);
    }

    #[test]
    fn saturation_counts_samples() {
        let d = Drone::default();
        let tr = traj(&[(0.0, 1.0, 1200.0), (1.0, 1.0, 1190.0), (2.0, 1.0, 1000.0), (3.0, 1.0, 1200.0)]);
        assert_eq!(saturation_fraction(&tr, &d), 0.75);
    }
}
