//! Extremum-seeking airspeed regulation.
//!
//! Each control period the regulator evaluates a forward-difference EPM slope
//! at the current airspeed and feeds it through a PID law that pushes the
//! airspeed command downhill. The plant is only observed through its airspeed,
//! never modelled by the regulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::downwash::DownwashMethod;
use crate::epm::{epm_total, EpmError};
use crate::params::Drone;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegulatorError {
    #[error("invalid regulator configuration: {0}")]
    Config(String),
    #[error("EPM evaluation failed at t = {t} s: {source}")]
    Epm {
        t: f64,
        #[source]
        source: EpmError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegulatorConfig {
    /// Proportional gain, (m/s)/(J/m per m/s).
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Forward perturbation for the slope estimate, m/s.
    pub delta_v: f64,
    /// Control period, s.
    pub dt: f64,
    /// The command is held at the measured airspeed before this time, s.
    pub trigger_time: f64,
    /// Clamp on the accumulated slope integral. `None` selects ten times the
    /// integral that alone would shift the command by 5 m/s.
    pub anti_windup_limit: Option<f64>,
    /// Airspeed command saturation, m/s.
    pub v_cmd_min: f64,
    pub v_cmd_max: f64,
}

impl Default for RegulatorConfig {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 5e-4,
            kd: 0.005,
            delta_v: 1e-3,
            dt: 0.01,
            trigger_time: 4.0,
            anti_windup_limit: None,
            v_cmd_min: 0.5,
            v_cmd_max: 25.0,
        }
    }
}

impl RegulatorConfig {
    pub fn validate(&self) -> Result<(), RegulatorError> {
        let bad = |msg: &str| Err(RegulatorError::Config(msg.to_string()));
        if !(self.kp > 0.0) {
            return bad("kp must be positive");
        }
        if !(self.ki >= 0.0 && self.kd >= 0.0) {
            return bad("ki and kd must be non-negative");
        }
        if !(self.delta_v > 0.0) {
            return bad("delta_v must be positive");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.trigger_time >= 0.0) {
            return bad("trigger_time must be non-negative");
        }
        if let Some(limit) = self.anti_windup_limit {
            if !(limit > 0.0) {
                return bad("anti_windup_limit must be positive");
            }
        }
        if !(self.v_cmd_min > 0.0 && self.v_cmd_max > self.v_cmd_min) {
            return bad("need 0 < v_cmd_min < v_cmd_max");
        }
        Ok(())
    }

    pub fn integral_limit(&self) -> f64 {
        match self.anti_windup_limit {
            Some(limit) => limit,
            None if self.ki > 0.0 => 10.0 * 5.0 / self.ki,
            None => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulatorState {
    /// Measured airspeed, m/s.
    pub v_a: f64,
    /// Rectangle-rule integral of the slope since trigger.
    pub grad_integral: f64,
    /// Slope of the previous post-trigger sample.
    pub prev_grad: Option<f64>,
    /// Time, s.
    pub t: f64,
}

impl RegulatorState {
    pub fn new(v_a: f64) -> Self {
        Self {
            v_a,
            grad_integral: 0.0,
            prev_grad: None,
            t: 0.0,
        }
    }
}

/// One sample of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub v_a: f64,
    pub epm: f64,
    pub grad_epm: f64,
    pub v_cmd: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RegulatorTrace {
    pub samples: Vec<TraceSample>,
}

impl RegulatorTrace {
    pub fn last(&self) -> Option<&TraceSample> {
        self.samples.last()
    }

    /// Mean of `f` over the trailing `fraction` of the samples.
    pub fn tail_mean(&self, fraction: f64, f: impl Fn(&TraceSample) -> f64) -> f64 {
        let n = self.samples.len();
        let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let tail = &self.samples[n - k..];
        tail.iter().map(f).sum::<f64>() / tail.len() as f64
    }
}

/// Forward-difference EPM slope (EPM(v+Δ) − EPM(v))/Δ, J/m per m/s.
pub fn epm_gradient(
    v_a: f64,
    delta_v: f64,
    drone: &Drone,
    method: DownwashMethod,
) -> Result<f64, EpmError> {
    let here = epm_total(v_a, method, drone)?;
    let ahead = epm_total(v_a + delta_v, method, drone)?;
    Ok((ahead - here) / delta_v)
}

/// Advances the controller by one period given the current measured state.
pub fn step(
    state: &RegulatorState,
    cfg: &RegulatorConfig,
    drone: &Drone,
    method: DownwashMethod,
) -> Result<(RegulatorState, f64), RegulatorError> {
    let grad = epm_gradient(state.v_a, cfg.delta_v, drone, method)
        .map_err(|source| RegulatorError::Epm { t: state.t, source })?;
    Ok(step_with_gradient(state, cfg, grad))
}

fn step_with_gradient(state: &RegulatorState, cfg: &RegulatorConfig, grad: f64) -> (RegulatorState, f64) {
    let mut next = *state;
    next.t = state.t + cfg.dt;
    if state.t < cfg.trigger_time {
        return (next, state.v_a);
    }
    let limit = cfg.integral_limit();
    next.grad_integral = (state.grad_integral + grad * cfg.dt).clamp(-limit, limit);
    let derivative = state.prev_grad.map_or(0.0, |prev| (grad - prev) / cfg.dt);
    next.prev_grad = Some(grad);
    let correction = cfg.kp * grad + cfg.kd * derivative + cfg.ki * next.grad_integral;
    let v_cmd = (state.v_a - correction).clamp(cfg.v_cmd_min, cfg.v_cmd_max);
    (next, v_cmd)
}

/// Airspeed response to a command.
pub trait AirspeedPlant {
    fn airspeed(&self) -> f64;
    /// Advances the plant by `dt` while holding `v_cmd`, returning the new airspeed.
    fn advance(&mut self, v_cmd: f64, dt: f64) -> f64;
}

/// First-order lag v̇ = (v_cmd − v)/τ with optional acceleration limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderLag {
    pub v: f64,
    /// Time constant, s.
    pub tau: f64,
    /// Bound on |v̇|, m/s².
    pub rate_limit: Option<f64>,
}

impl FirstOrderLag {
    pub fn new(v0: f64, tau: f64) -> Self {
        Self {
            v: v0,
            tau,
            rate_limit: None,
        }
    }
}

impl AirspeedPlant for FirstOrderLag {
    fn airspeed(&self) -> f64 {
        self.v
    }

    fn advance(&mut self, v_cmd: f64, dt: f64) -> f64 {
        // exact discretisation of the lag
        let mut dv = (v_cmd - self.v) * (1.0 - (-dt / self.tau).exp());
        if let Some(limit) = self.rate_limit {
            dv = dv.clamp(-limit * dt, limit * dt);
        }
        self.v += dv;
        self.v
    }
}

/// Parameter change applied to the EPM model at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamEvent {
    pub t: f64,
    pub drone: Drone,
}

/// Closed-loop run from `t = 0` to `t_end`.
pub fn simulate<P: AirspeedPlant>(
    cfg: &RegulatorConfig,
    plant: &mut P,
    t_end: f64,
    drone: &Drone,
    method: DownwashMethod,
) -> Result<RegulatorTrace, RegulatorError> {
    simulate_with_events(cfg, plant, t_end, drone, method, &[])
}

/// Like [`simulate`], but the EPM model switches to `event.drone` once
/// `t >= event.t`. Events must be sorted by time.
pub fn simulate_with_events<P: AirspeedPlant>(
    cfg: &RegulatorConfig,
    plant: &mut P,
    t_end: f64,
    drone: &Drone,
    method: DownwashMethod,
    events: &[ParamEvent],
) -> Result<RegulatorTrace, RegulatorError> {
    cfg.validate()?;
    if !(plant.airspeed() > 0.0) {
        return Err(RegulatorError::Config("initial airspeed must be positive".into()));
    }
    if !(t_end > cfg.trigger_time) {
        return Err(RegulatorError::Config("t_end must exceed trigger_time".into()));
    }
    let steps = (t_end / cfg.dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut state = RegulatorState::new(plant.airspeed());
    let mut model = *drone;
    let mut next_event = 0;

    for k in 0..=steps {
        // Index-based time keeps the spacing exact.
        state.t = k as f64 * cfg.dt;
        state.v_a = plant.airspeed();
        while next_event < events.len() && events[next_event].t <= state.t {
            model = events[next_event].drone;
            next_event += 1;
        }
        let err = |source| RegulatorError::Epm { t: state.t, source };
        let epm_here = epm_total(state.v_a, method, &model).map_err(err)?;
        let ahead = epm_total(state.v_a + cfg.delta_v, method, &model).map_err(err)?;
        let grad = (ahead - epm_here) / cfg.delta_v;
        let (next, v_cmd) = step_with_gradient(&state, cfg, grad);
        samples.push(TraceSample {
            t: state.t,
            v_a: state.v_a,
            epm: epm_here,
            grad_epm: grad,
            v_cmd,
        });
        if k < steps {
            plant.advance(v_cmd, cfg.dt);
        }
        state = next;
    }
    Ok(RegulatorTrace { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epm::{optimal_airspeed, AirspeedGrid};
    use crate::params::default_drone;

    fn drone() -> Drone {
        Drone::default()
    }

    fn v_star(d: &Drone) -> (f64, f64) {
        optimal_airspeed(d, DownwashMethod::Root, &AirspeedGrid::new(0.5, 25.0, 0.01)).unwrap()
    }

    fn triggered(v: f64) -> RegulatorState {
        RegulatorState {
            v_a: v,
            grad_integral: 0.0,
            prev_grad: None,
            t: 10.0,
        }
    }

    #[test]
    fn gradient_small_at_optimum() {
        let d = drone();
        let (v, _) = v_star(&d);
        let g = epm_gradient(v, 1e-3, &d, DownwashMethod::Root).unwrap();
        // grid spacing 0.01 and EPM'' ≈ 0.6 bound the slope at the grid optimum
        assert!(g.abs() < 0.6 * 0.01 + 0.6 * 1e-3, "grad = {g}");
    }

    #[test]
    fn gradient_sign_follows_curve() {
        let d = drone();
        assert!(epm_gradient(4.0, 1e-3, &d, DownwashMethod::Root).unwrap() < 0.0);
        assert!(epm_gradient(20.0, 1e-3, &d, DownwashMethod::Root).unwrap() > 0.0);
    }

    #[test]
    fn forward_difference_converges_linearly() {
        let d = drone();
        let v = 8.0;
        let central = {
            let h = 1e-5;
            (epm_total(v + h, DownwashMethod::Root, &d).unwrap()
                - epm_total(v - h, DownwashMethod::Root, &d).unwrap())
                / (2.0 * h)
        };
        let e1 = (epm_gradient(v, 1e-2, &d, DownwashMethod::Root).unwrap() - central).abs();
        let e2 = (epm_gradient(v, 5e-3, &d, DownwashMethod::Root).unwrap() - central).abs();
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.1, "ratio = {ratio}");
    }

    #[test]
    fn pid_on_zero_gradient_holds_speed() {
        let cfg = RegulatorConfig::default();
        let (_, v_cmd) = step_with_gradient(&triggered(9.0), &cfg, 0.0);
        assert_eq!(v_cmd, 9.0);
    }

    #[test]
    fn proportional_sign() {
        let cfg = RegulatorConfig {
            ki: 0.0,
            kd: 0.0,
            ..Default::default()
        };
        let (_, slower) = step_with_gradient(&triggered(9.0), &cfg, 2.0);
        assert!((slower - (9.0 - cfg.kp * 2.0)).abs() < 1e-12);
        let (_, faster) = step_with_gradient(&triggered(9.0), &cfg, -2.0);
        assert!(faster > 9.0);
    }

    #[test]
    fn held_before_trigger() {
        let cfg = RegulatorConfig::default();
        let s = RegulatorState::new(4.0);
        let (next, v_cmd) = step_with_gradient(&s, &cfg, -10.0);
        assert_eq!(v_cmd, 4.0);
        assert_eq!(next.grad_integral, 0.0);
        assert_eq!(next.prev_grad, None);
    }

    #[test]
    fn first_sample_has_no_derivative_kick() {
        let cfg = RegulatorConfig {
            kp: 1e-9,
            ki: 0.0,
            kd: 1e-3,
            ..Default::default()
        };
        let (next, v_cmd) = step_with_gradient(&triggered(9.0), &cfg, 3.0);
        assert!((v_cmd - 9.0).abs() < 1e-6);
        let (_, v_cmd2) = step_with_gradient(&next, &cfg, 3.5);
        assert!((v_cmd2 - (9.0 - 1e-3 * 0.5 / cfg.dt)).abs() < 1e-6);
    }

    #[test]
    fn integral_clamped() {
        let cfg = RegulatorConfig {
            anti_windup_limit: Some(1.0),
            ..Default::default()
        };
        let mut s = triggered(9.0);
        for _ in 0..1000 {
            s = step_with_gradient(&s, &cfg, 50.0).0;
            assert!(s.grad_integral.abs() <= 1.0);
        }
        assert_eq!(s.grad_integral, 1.0);
        assert_eq!(RegulatorConfig::default().integral_limit(), 1.0e5);
    }

    #[test]
    fn command_saturates() {
        let cfg = RegulatorConfig::default();
        let (_, v_cmd) = step_with_gradient(&triggered(2.0), &cfg, 1e4);
        assert_eq!(v_cmd, cfg.v_cmd_min);
    }

    #[test]
    fn invalid_configs() {
        let base = RegulatorConfig::default();
        for cfg in [
            RegulatorConfig { kp: 0.0, ..base },
            RegulatorConfig { ki: -1.0, ..base },
            RegulatorConfig { delta_v: 0.0, ..base },
            RegulatorConfig { dt: 0.0, ..base },
            RegulatorConfig { v_cmd_min: 0.0, ..base },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn lag_plant_tracks() {
        let mut p = FirstOrderLag::new(0.0, 0.5);
        for _ in 0..1000 {
            p.advance(10.0, 0.01);
        }
        assert!((p.airspeed() - 10.0).abs() < 1e-6);
        let mut limited = FirstOrderLag {
            rate_limit: Some(1.0),
            ..FirstOrderLag::new(0.0, 0.5)
        };
        limited.advance(10.0, 0.1);
        assert!((limited.airspeed() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn trace_timing() {
        let cfg = RegulatorConfig::default();
        let mut plant = FirstOrderLag::new(4.0, 0.5);
        let tr = simulate(&cfg, &mut plant, 10.0, &drone(), DownwashMethod::Root).unwrap();
        assert_eq!(tr.samples.len(), 1001);
        for w in tr.samples.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!((w[1].t - w[0].t - cfg.dt).abs() < 1e-9);
        }
        // held until trigger
        for s in tr.samples.iter().filter(|s| s.t < cfg.trigger_time) {
            assert_eq!(s.v_a, 4.0);
            assert_eq!(s.v_cmd, 4.0);
        }
    }

    #[test]
    fn converges_from_many_starts() {
        let d = drone();
        let (vs, _) = v_star(&d);
        let cfg = RegulatorConfig::default();
        for v0 in [2.0, 4.0, 8.0, 16.0, 22.0] {
            let mut plant = FirstOrderLag::new(v0, 0.5);
            let tr = simulate(&cfg, &mut plant, 60.0, &d, DownwashMethod::Root).unwrap();
            let last = tr.last().unwrap();
            assert!((last.v_a - vs).abs() < 0.5, "v0 = {v0}: ended at {}", last.v_a);
            let at_trigger = tr.samples.iter().find(|s| s.t >= cfg.trigger_time).unwrap().epm;
            assert!(tr.tail_mean(0.1, |s| s.epm) <= at_trigger);
            // settled: no oscillation beyond one perturbation width
            let tail: Vec<f64> = tr.samples.iter().filter(|s| s.t > 45.0).map(|s| s.v_a).collect();
            let spread = tail.iter().cloned().fold(f64::MIN, f64::max)
                - tail.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 2.0 * cfg.delta_v, "v0 = {v0}: spread {spread}");
        }
    }

    #[test]
    fn starting_at_optimum_stays_there() {
        let d = drone();
        let (vs, _) = v_star(&d);
        let cfg = RegulatorConfig::default();
        let mut plant = FirstOrderLag::new(vs, 0.5);
        let tr = simulate(&cfg, &mut plant, 40.0, &d, DownwashMethod::Root).unwrap();
        // slope bias of the forward difference is ½Δ·EPM'', far below Δ in speed
        for s in &tr.samples {
            assert!((s.v_a - vs).abs() <= 0.01 + cfg.delta_v, "t = {}: {}", s.t, s.v_a);
        }
    }

    #[test]
    fn reconverges_after_mass_change() {
        let d = drone();
        let mut heavy_params = default_drone();
        heavy_params.m3 *= 2.0;
        let heavy = Drone::new(heavy_params).unwrap();
        let (v_heavy, _) = v_star(&heavy);
        let cfg = RegulatorConfig::default();
        let mut plant = FirstOrderLag::new(4.0, 0.5);
        let events = [ParamEvent { t: 30.0, drone: heavy }];
        let tr =
            simulate_with_events(&cfg, &mut plant, 70.0, &d, DownwashMethod::Root, &events).unwrap();
        assert!((tr.last().unwrap().v_a - v_heavy).abs() < 0.5);
    }

    #[test]
    fn deterministic() {
        let d = drone();
        let cfg = RegulatorConfig::default();
        let a = simulate(&cfg, &mut FirstOrderLag::new(4.0, 0.5), 20.0, &d, DownwashMethod::Root).unwrap();
        let b = simulate(&cfg, &mut FirstOrderLag::new(4.0, 0.5), 20.0, &d, DownwashMethod::Root).unwrap();
        assert_eq!(a, b);
    }
}
