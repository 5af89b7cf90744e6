//! Induced velocity (downwash) through the rotor disk.
//!
//! Three approximations are provided: the forward-flight momentum balance
//! (`Root`, the positive root of a quartic), the hover momentum value and the
//! high-speed Glauert value. All three describe a single rotor carrying its
//! `1/n` share of the total thrust.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::Drone;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DownwashMethod {
    Root,
    Hover,
    Glauert,
}

impl DownwashMethod {
    pub const ALL: [DownwashMethod; 3] = [Self::Root, Self::Hover, Self::Glauert];

    pub fn name(self) -> &'static str {
        match self {
            Self::Root => "root",
            Self::Hover => "hover",
            Self::Glauert => "glauert",
        }
    }
}

impl std::fmt::Display for DownwashMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DownwashMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "root" => Ok(Self::Root),
            "hover" => Ok(Self::Hover),
            "glauert" => Ok(Self::Glauert),
            other => Err(format!("unknown downwash method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DownwashError {
    #[error("thrust must be positive, got {0} N")]
    NonPositiveThrust(f64),
    #[error("airspeed must be non-negative, got {0} m/s")]
    NegativeAirspeed(f64),
    #[error("Glauert downwash is singular at airspeed {0} m/s")]
    GlauertSingular(f64),
    #[error("no positive root found for thrust {thrust} N at {airspeed} m/s")]
    NoPositiveRoot { thrust: f64, airspeed: f64 },
}

/// Positive root of the forward-flight downwash quartic.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticSolution {
    /// Downwash, m/s.
    pub root: f64,
    /// Quartic value at `root` divided by its constant term.
    pub residual: f64,
    pub iterations: usize,
    /// All real roots of the quartic, ascending.
    pub all_real_roots: Vec<f64>,
}

const NEWTON_MAX_ITER: usize = 100;

/// Angle of attack in cruise, rad: drag force over weight.
pub fn angle_of_attack(v_a: f64, drone: &Drone) -> f64 {
    let p = &drone.params;
    let d = &drone.derived;
    let drag = 0.5 * p.rho * d.cda_sum * v_a * v_a;
    (drag / (p.g * d.m_total)).atan()
}

/// Quartic coefficients `[c4, c3, c2, c1, c0]` for
/// w⁴ + 2 w³ v sinα + w² v² − (T/(2nρς))² = 0.
fn quartic_coefficients(thrust: f64, v_a: f64, alpha: f64, drone: &Drone) -> [f64; 5] {
    let p = &drone.params;
    let c = thrust / (2.0 * f64::from(p.n_rotors) * p.rho * p.sigma_disk);
    [1.0, 2.0 * v_a * alpha.sin(), v_a * v_a, 0.0, -(c * c)]
}

fn eval_quartic(k: &[f64; 5], w: f64) -> (f64, f64) {
    let value = (((k[0] * w + k[1]) * w + k[2]) * w + k[3]) * w + k[4];
    let slope = ((4.0 * k[0] * w + 3.0 * k[1]) * w + 2.0 * k[2]) * w + k[3];
    (value, slope)
}

fn real_roots(k: &[f64; 5]) -> Vec<f64> {
    // companion matrix of the monic quartic
    let comp = Matrix4::new(
        -k[1], -k[2], -k[3], -k[4], //
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0,
    );
    let scale = k[4].abs().sqrt().sqrt().max(1e-12);
    let mut roots: Vec<f64> = comp
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-7 * scale.max(z.re.abs()))
        .map(|z| z.re)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots
}

/// Positive downwash root of the forward-flight momentum quartic.
///
/// Newton's method is started from the zero-airspeed closed form, which lies
/// to the right of the root; the quartic is convex for `w > 0` so the iterates
/// decrease monotonically. Bisection on `[1e-6, 10·w₀]` is the fallback.
pub fn solve_root_downwash(
    thrust: f64,
    v_a: f64,
    alpha: f64,
    drone: &Drone,
) -> Result<QuarticSolution, DownwashError> {
    if !(thrust > 0.0) {
        return Err(DownwashError::NonPositiveThrust(thrust));
    }
    if !(v_a >= 0.0) {
        return Err(DownwashError::NegativeAirspeed(v_a));
    }
    let k = quartic_coefficients(thrust, v_a, alpha, drone);
    let c2 = -k[4];
    let w0 = c2.sqrt().sqrt();

    let mut w = w0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let (value, slope) = eval_quartic(&k, w);
        if slope <= 0.0 || !value.is_finite() {
            break;
        }
        let next = w - value / slope;
        if !(next > 0.0) {
            break;
        }
        let step = (w - next).abs();
        w = next;
        if step <= 4.0 * f64::EPSILON * w {
            converged = true;
            break;
        }
    }

    if !converged {
        let (mut lo, mut hi) = (1e-6, 10.0 * w0);
        if eval_quartic(&k, lo).0 > 0.0 || eval_quartic(&k, hi).0 < 0.0 {
            return Err(DownwashError::NoPositiveRoot {
                thrust,
                airspeed: v_a,
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eval_quartic(&k, mid).0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        w = 0.5 * (lo + hi);
    }

    let mut all_real_roots = real_roots(&k);
    // Polish the companion estimates; keep the exact root for the positive one.
    for r in all_real_roots.iter_mut() {
        if *r > 0.0 {
            *r = w;
        }
    }
    let positive: Vec<f64> = all_real_roots.iter().copied().filter(|r| *r > 0.0).collect();
    if positive.len() > 1 {
        // Numerical noise can split the root; choose by the fixed-point residual.
        let best = positive
            .iter()
            .copied()
            .min_by(|a, b| {
                fixed_point_residual(thrust, v_a, alpha, *a, drone)
                    .total_cmp(&fixed_point_residual(thrust, v_a, alpha, *b, drone))
            })
            .unwrap_or(w);
        w = best;
    }
    all_real_roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

    Ok(QuarticSolution {
        root: w,
        residual: eval_quartic(&k, w).0 / c2,
        iterations,
        all_real_roots,
    })
}

/// Relative mismatch of `w` in the fixed-point form
/// w = T / (2nρς·√((v cosα)² + (v sinα + w)²)).
pub fn fixed_point_residual(thrust: f64, v_a: f64, alpha: f64, w: f64, drone: &Drone) -> f64 {
    let p = &drone.params;
    let speed = ((v_a * alpha.cos()).powi(2) + (v_a * alpha.sin() + w).powi(2)).sqrt();
    let rhs = thrust / (2.0 * f64::from(p.n_rotors) * p.rho * p.sigma_disk * speed);
    (rhs - w).abs() / w
}

/// Hover momentum downwash √((T/n)/(2ρA)), m/s.
pub fn hover_downwash(thrust: f64, drone: &Drone) -> Result<f64, DownwashError> {
    if !(thrust > 0.0) {
        return Err(DownwashError::NonPositiveThrust(thrust));
    }
    let p = &drone.params;
    let per_rotor = thrust / f64::from(p.n_rotors);
    Ok((per_rotor / (2.0 * p.rho * drone.derived.a_disk)).sqrt())
}

/// Glauert high-speed downwash (T/n)/(2ρA·v), m/s.
pub fn glauert_downwash(thrust: f64, v_a: f64, drone: &Drone) -> Result<f64, DownwashError> {
    if !(thrust > 0.0) {
        return Err(DownwashError::NonPositiveThrust(thrust));
    }
    if !(v_a > 0.0) {
        return Err(DownwashError::GlauertSingular(v_a));
    }
    let p = &drone.params;
    let per_rotor = thrust / f64::from(p.n_rotors);
    Ok(per_rotor / (2.0 * p.rho * drone.derived.a_disk * v_a))
}

pub fn downwash(
    method: DownwashMethod,
    thrust: f64,
    v_a: f64,
    drone: &Drone,
) -> Result<f64, DownwashError> {
    match method {
        DownwashMethod::Root => {
            let alpha = angle_of_attack(v_a, drone);
            solve_root_downwash(thrust, v_a, alpha, drone).map(|s| s.root)
        }
        DownwashMethod::Hover => hover_downwash(thrust, drone),
        DownwashMethod::Glauert => glauert_downwash(thrust, v_a, drone),
    }
}
