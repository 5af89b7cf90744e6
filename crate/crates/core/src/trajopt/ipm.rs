//! Primal-dual interior-point method with a filter line search.
//!
//! Works on the scaled collocation NLP. Newton systems are assembled in the
//! interleaved order `[node 0, defect 0, node 1, defect 1, …]`, which keeps
//! the KKT matrix banded with half-bandwidth 35, and are solved by banded LU.
//! Without inertia information, regularization of the Hessian block is driven
//! by a curvature test on the computed step. When the line search stalls, an
//! ℓ1 feasibility restoration phase takes over; converging there with
//! nonzero infeasibility is reported as local infeasibility.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::band::BandMatrix;
use super::transcription::{NlpProblem, NODE_DIM, OBJECTIVE_SCALE, VARIABLE_SCALE};
use crate::dynamics::{idx, STATE_DIM};

const BLOCK: usize = NODE_DIM + STATE_DIM;
const HALF_BAND: usize = BLOCK - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpmOptions {
    /// Scaled KKT error at which the solve is declared optimal.
    pub tol: f64,
    /// Largest unscaled defect accepted at a solution.
    pub constr_viol_tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// ℓ1 penalty weight in the restoration phase.
    pub restoration_penalty: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            constr_viol_tol: 1e-4,
            max_iter: 5000,
            mu_init: 0.1,
            restoration_penalty: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IpmStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct IpmOutcome {
    pub status: IpmStatus,
    /// Unscaled decision vector.
    pub z: Vec<f64>,
    pub iterations: usize,
    pub restoration_calls: usize,
    /// Scaled KKT error at the returned point.
    pub kkt_error: f64,
    /// Largest unscaled defect.
    pub max_defect: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IpmError {
    #[error("Newton system could not be regularized (δ_w = {0:e})")]
    Regularization(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

// filter line search constants
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const DELTA: f64 = 1.0;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const ETA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const KAPPA_SOC: f64 = 0.99;
const MAX_SOC: usize = 4;
// barrier parameter update
const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const KAPPA_SIGMA: f64 = 1e10;
const KAPPA_D: f64 = 1e-5;
// regularization
const CURVATURE_MIN: f64 = 1e-8;
const DELTA_W_INIT: f64 = 1e-4;
const DELTA_W_MIN: f64 = 1e-20;
const DELTA_W_MAX: f64 = 1e40;
const KAPPA_RESTO: f64 = 0.9;

#[derive(Debug, Clone)]
struct Filter {
    theta_max: f64,
    entries: Vec<(f64, f64)>,
}

impl Filter {
    fn new(theta_max: f64) -> Self {
        Self {
            theta_max,
            entries: Vec::new(),
        }
    }

    fn acceptable(&self, theta: f64, phi: f64) -> bool {
        theta <= self.theta_max && self.entries.iter().all(|&(t, p)| theta < t || phi < p)
    }

    fn add(&mut self, theta: f64, phi: f64) {
        let (t, p) = ((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta);
        self.entries.retain(|&(et, ep)| et < t || ep < p);
        self.entries.push((t, p));
    }

    fn reset(&mut self) {
        self.entries.clear();
    }
}

struct Solver<'a> {
    nlp: &'a NlpProblem,
    opts: IpmOptions,
    n: usize,
    m: usize,
    nodes: usize,
    h: f64,
    d: Vec<f64>,
    cs: [f64; STATE_DIM],
    lo: Vec<f64>,
    hi: Vec<f64>,
    has_lo: Vec<bool>,
    has_hi: Vec<bool>,
    free: Vec<bool>,
    a_blocks: Vec<[[f64; STATE_DIM]; STATE_DIM]>,
    hess: Vec<[[f64; NODE_DIM]; NODE_DIM]>,
    base: BandMatrix,
    kkt: BandMatrix,
    delta_w_last: f64,
    iter: usize,
    restorations: usize,
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn kkt_var(i: usize) -> usize {
    BLOCK * (i / NODE_DIM) + i % NODE_DIM
}

#[inline]
fn kkt_con(r: usize) -> usize {
    BLOCK * (r / STATE_DIM) + NODE_DIM + r % STATE_DIM
}

/// Largest step in (0, 1] keeping `v + α·dv ≥ (1 − τ)·v` for positive `v`.
fn ftb_positive(v: &[f64], dv: &[f64], tau: f64, alpha: f64) -> f64 {
    let mut a = alpha;
    for (x, d) in v.iter().zip(dv) {
        if *d < 0.0 && *x > 0.0 {
            a = a.min(-tau * x / d);
        }
    }
    a
}

struct Direction {
    dx: Vec<f64>,
    dlam: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(nlp: &'a NlpProblem, opts: IpmOptions) -> Self {
        let n = nlp.n_vars();
        let m = nlp.n_constraints();
        let nodes = nlp.nodes;
        let d: Vec<f64> = (0..n).map(|i| VARIABLE_SCALE[i % NODE_DIM]).collect();
        let cs: [f64; STATE_DIM] = std::array::from_fn(|i| 1.0 / VARIABLE_SCALE[i]);
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        let mut has_lo = vec![false; n];
        let mut has_hi = vec![false; n];
        let free: Vec<bool> = nlp.fixed.iter().map(|f| !f).collect();
        for i in 0..n {
            if !free[i] {
                lo[i] = nlp.lower[i] / d[i];
                hi[i] = lo[i];
                continue;
            }
            if nlp.lower[i].is_finite() {
                let l = nlp.lower[i] / d[i];
                lo[i] = l - 1e-8 * l.abs().max(1.0);
                has_lo[i] = true;
            }
            if nlp.upper[i].is_finite() {
                let u = nlp.upper[i] / d[i];
                hi[i] = u + 1e-8 * u.abs().max(1.0);
                has_hi[i] = true;
            }
        }
        let nk = BLOCK * (nodes - 1) + NODE_DIM;
        Self {
            nlp,
            opts,
            n,
            m,
            nodes,
            h: nlp.step(),
            d,
            cs,
            lo,
            hi,
            has_lo,
            has_hi,
            free,
            a_blocks: vec![[[0.0; STATE_DIM]; STATE_DIM]; nodes],
            hess: vec![[[0.0; NODE_DIM]; NODE_DIM]; nodes],
            base: BandMatrix::zeros(nk, HALF_BAND, HALF_BAND),
            kkt: BandMatrix::zeros(nk, HALF_BAND, HALF_BAND),
            delta_w_last: 0.0,
            iter: 0,
            restorations: 0,
        }
    }

    fn unscale(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.d).map(|(a, b)| a * b).collect()
    }

    /// Scales `z` and moves free variables strictly inside their bounds.
    fn initial_point(&self, z: &[f64]) -> Vec<f64> {
        let (k1, k2) = (1e-2, 1e-2);
        (0..self.n)
            .map(|i| {
                let mut x = z[i] / self.d[i];
                if !self.free[i] {
                    return self.lo[i];
                }
                let (l, u) = (self.lo[i], self.hi[i]);
                match (self.has_lo[i], self.has_hi[i]) {
                    (true, true) => {
                        let pl = (k1 * l.abs().max(1.0)).min(k2 * (u - l));
                        let pu = (k1 * u.abs().max(1.0)).min(k2 * (u - l));
                        x = x.clamp(l + pl, u - pu);
                    }
                    (true, false) => x = x.max(l + k1 * l.abs().max(1.0)),
                    (false, true) => x = x.min(u - k1 * u.abs().max(1.0)),
                    (false, false) => {}
                }
                x
            })
            .collect()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        OBJECTIVE_SCALE * self.nlp.objective(&self.unscale(x))
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        self.nlp.objective_gradient(&self.unscale(x), g);
        for (gi, di) in g.iter_mut().zip(&self.d) {
            *gi *= OBJECTIVE_SCALE * di;
        }
    }

    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        self.nlp.defects(&self.unscale(x), c);
        for (r, ci) in c.iter_mut().enumerate() {
            *ci *= self.cs[r % STATE_DIM];
        }
    }

    /// Unscaled largest defect from scaled constraint values.
    fn max_defect(&self, c: &[f64]) -> f64 {
        c.iter()
            .enumerate()
            .fold(0.0, |m, (r, v)| m.max((v / self.cs[r % STATE_DIM]).abs()))
    }

    /// Refreshes the Jacobian blocks and the Lagrangian Hessian blocks.
    fn derivatives(&mut self, x: &[f64], lam: &[f64], obj_factor: f64) {
        let z = self.unscale(x);
        let h = self.h;
        for k in 0..self.nodes {
            let w: [f64; STATE_DIM] = std::array::from_fn(|i| {
                let prev = if k > 0 { lam[(k - 1) * STATE_DIM + i] } else { 0.0 };
                let next = if k + 1 < self.nodes { lam[k * STATE_DIM + i] } else { 0.0 };
                -0.5 * h * (prev + next) * self.cs[i]
            });
            let nd = self.nlp.node_derivatives(&z, k, &w);
            self.a_blocks[k] = nd.a;
            let o = k * NODE_DIM;
            let blk = &mut self.hess[k];
            for r in 0..NODE_DIM {
                blk[r].fill(0.0);
            }
            for r in 0..STATE_DIM {
                for c in 0..STATE_DIM {
                    blk[r][c] = nd.weighted_hessian[r][c] * self.d[o + r] * self.d[o + c];
                }
            }
            if obj_factor != 0.0 {
                let (hw, ha) = self.nlp.objective_hessian_node(&z, k);
                for mtr in 0..4 {
                    let (wi, ai) = (idx::OMEGA + mtr, 16 + mtr);
                    blk[wi][wi] += obj_factor * OBJECTIVE_SCALE * hw[mtr] * self.d[o + wi].powi(2);
                    blk[ai][ai] += obj_factor * OBJECTIVE_SCALE * ha[mtr] * self.d[o + ai].powi(2);
                }
            }
        }
    }

    /// Scaled Jacobian entry coefficient of defect (k, i) with respect to
    /// state component j of `node` (k or k+1), without the variable scale.
    #[inline]
    fn jac_state(&self, k: usize, node: usize, i: usize, j: usize) -> f64 {
        let mut v = -0.5 * self.h * self.a_blocks[node][i][j];
        if i == j {
            v += if node == k { -1.0 } else { 1.0 };
        }
        v * self.cs[i]
    }

    fn jt_times(&self, lam: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for k in 0..self.nodes - 1 {
            for i in 0..STATE_DIM {
                let l = lam[k * STATE_DIM + i];
                if l == 0.0 {
                    continue;
                }
                for node in [k, k + 1] {
                    let o = node * NODE_DIM;
                    for j in 0..STATE_DIM {
                        out[o + j] += l * self.jac_state(k, node, i, j) * self.d[o + j];
                    }
                    if i >= idx::OMEGA {
                        let a = o + 16 + i - idx::OMEGA;
                        out[a] += l * (-0.5 * self.h * self.cs[i]) * self.d[a];
                    }
                }
            }
        }
    }

    fn assemble(&mut self, with_hess: bool, diag: &[f64], cdiag: &[f64]) {
        self.base.clear();
        if with_hess {
            for k in 0..self.nodes {
                let o = BLOCK * k;
                for r in 0..NODE_DIM {
                    for c in 0..NODE_DIM {
                        let v = self.hess[k][r][c];
                        if v != 0.0 {
                            self.base.add(o + r, o + c, v);
                        }
                    }
                }
            }
        }
        for i in 0..self.n {
            let p = kkt_var(i);
            self.base.add(p, p, diag[i]);
        }
        for k in 0..self.nodes - 1 {
            for i in 0..STATE_DIM {
                let row = kkt_con(k * STATE_DIM + i);
                for node in [k, k + 1] {
                    let o = node * NODE_DIM;
                    let ko = BLOCK * node;
                    for j in 0..STATE_DIM {
                        let v = self.jac_state(k, node, i, j) * self.d[o + j];
                        if v != 0.0 {
                            self.base.add(row, ko + j, v);
                            self.base.add(ko + j, row, v);
                        }
                    }
                    if i >= idx::OMEGA {
                        let a = 16 + i - idx::OMEGA;
                        let v = -0.5 * self.h * self.cs[i] * self.d[o + a];
                        self.base.add(row, ko + a, v);
                        self.base.add(ko + a, row, v);
                    }
                }
                self.base.add(row, row, cdiag[k * STATE_DIM + i]);
            }
        }
        for i in 0..self.n {
            if !self.free[i] {
                self.base.pin(kkt_var(i));
            }
        }
    }

    fn solve_factored(&self, rx: &[f64], rc: &[f64], dw: f64, dc: f64) -> Direction {
        let nk = self.base.dim();
        let mut rhs = vec![0.0; nk];
        for i in 0..self.n {
            if self.free[i] {
                rhs[kkt_var(i)] = -rx[i];
            }
        }
        for r in 0..self.m {
            rhs[kkt_con(r)] = -rc[r];
        }
        let mut sol = rhs.clone();
        self.kkt.solve(&mut sol);
        // one step of iterative refinement against the unfactored system
        let mut res = vec![0.0; nk];
        self.base.mul_vec(&sol, &mut res);
        for i in 0..self.n {
            if self.free[i] {
                let p = kkt_var(i);
                res[p] += dw * sol[p];
            }
        }
        for r in 0..self.m {
            let p = kkt_con(r);
            res[p] -= dc * sol[p];
        }
        for (a, b) in res.iter_mut().zip(&rhs) {
            *a = b - *a;
        }
        self.kkt.solve(&mut res);
        for (s, r) in sol.iter_mut().zip(&res) {
            *s += r;
        }
        Direction {
            dx: (0..self.n).map(|i| sol[kkt_var(i)]).collect(),
            dlam: (0..self.m).map(|r| sol[kkt_con(r)]).collect(),
        }
    }

    /// Solves the Newton system, increasing the Hessian shift until the
    /// step has sufficient curvature.
    fn direction(&mut self, rx: &[f64], rc: &[f64], mu: f64, check_curvature: bool) -> Result<(Direction, f64), IpmError> {
        let mut dw = 0.0;
        let mut dc = 0.0;
        let mut first_increase = true;
        loop {
            self.kkt.clone_from(&self.base);
            for i in 0..self.n {
                if self.free[i] && dw != 0.0 {
                    let p = kkt_var(i);
                    self.kkt.add(p, p, dw);
                }
            }
            if dc != 0.0 {
                for r in 0..self.m {
                    let p = kkt_con(r);
                    self.kkt.add(p, p, -dc);
                }
            }
            let ok = match self.kkt.factor() {
                Ok(()) => {
                    let dir = self.solve_factored(rx, rc, dw, dc);
                    if dir.dx.iter().chain(&dir.dlam).any(|v| !v.is_finite()) {
                        None
                    } else if !check_curvature || self.curvature_ok(&dir.dx, dw) {
                        Some(dir)
                    } else {
                        None
                    }
                }
                Err(_) => {
                    if dc == 0.0 {
                        dc = 1e-8 * mu.powf(0.25);
                    }
                    None
                }
            };
            if let Some(dir) = ok {
                if dw > 0.0 {
                    self.delta_w_last = dw;
                }
                return Ok((dir, dw));
            }
            dw = if dw == 0.0 {
                if self.delta_w_last == 0.0 {
                    DELTA_W_INIT
                } else {
                    (self.delta_w_last / 3.0).max(DELTA_W_MIN)
                }
            } else if first_increase && self.delta_w_last == 0.0 {
                100.0 * dw
            } else {
                8.0 * dw
            };
            first_increase = false;
            if dw > DELTA_W_MAX {
                return Err(IpmError::Regularization(dw));
            }
        }
    }

    fn curvature_ok(&self, dx: &[f64], dw: f64) -> bool {
        let nk = self.base.dim();
        let mut v = vec![0.0; nk];
        for i in 0..self.n {
            v[kkt_var(i)] = dx[i];
        }
        let mut w = vec![0.0; nk];
        self.base.mul_vec(&v, &mut w);
        let mut curv = 0.0;
        let mut norm = 0.0;
        for i in 0..self.n {
            if self.free[i] {
                curv += dx[i] * w[kkt_var(i)];
                norm += dx[i] * dx[i];
            }
        }
        curv + dw * norm >= CURVATURE_MIN * norm
    }

    fn slack_lo(&self, x: &[f64], i: usize) -> f64 {
        x[i] - self.lo[i]
    }

    fn slack_hi(&self, x: &[f64], i: usize) -> f64 {
        self.hi[i] - x[i]
    }

    /// Log-barrier plus one-sided damping.
    fn barrier(&self, x: &[f64], mu: f64) -> f64 {
        let mut b = 0.0;
        for i in 0..self.n {
            if !self.free[i] {
                continue;
            }
            match (self.has_lo[i], self.has_hi[i]) {
                (true, true) => b -= mu * (self.slack_lo(x, i).ln() + self.slack_hi(x, i).ln()),
                (true, false) => b += -mu * self.slack_lo(x, i).ln() + KAPPA_D * mu * self.slack_lo(x, i),
                (false, true) => b += -mu * self.slack_hi(x, i).ln() + KAPPA_D * mu * self.slack_hi(x, i),
                (false, false) => {}
            }
        }
        b
    }

    fn barrier_grad(&self, x: &[f64], mu: f64, out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = 0.0;
            if !self.free[i] {
                continue;
            }
            if self.has_lo[i] {
                out[i] -= mu / self.slack_lo(x, i);
                if !self.has_hi[i] {
                    out[i] += KAPPA_D * mu;
                }
            }
            if self.has_hi[i] {
                out[i] += mu / self.slack_hi(x, i);
                if !self.has_lo[i] {
                    out[i] -= KAPPA_D * mu;
                }
            }
        }
    }

    fn sigma(&self, x: &[f64], zl: &[f64], zu: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                if self.free[i] && self.has_lo[i] {
                    s += zl[i] / self.slack_lo(x, i);
                }
                if self.free[i] && self.has_hi[i] {
                    s += zu[i] / self.slack_hi(x, i);
                }
                s
            })
            .collect()
    }

    fn ftb_primal(&self, x: &[f64], dx: &[f64], tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..self.n {
            if !self.free[i] {
                continue;
            }
            if self.has_lo[i] && dx[i] < 0.0 {
                a = a.min(-tau * self.slack_lo(x, i) / dx[i]);
            }
            if self.has_hi[i] && dx[i] > 0.0 {
                a = a.min(tau * self.slack_hi(x, i) / dx[i]);
            }
        }
        a
    }

    fn bound_duals_step(&self, x: &[f64], dx: &[f64], zl: &[f64], zu: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
        let mut dzl = vec![0.0; self.n];
        let mut dzu = vec![0.0; self.n];
        for i in 0..self.n {
            if !self.free[i] {
                continue;
            }
            if self.has_lo[i] {
                let s = self.slack_lo(x, i);
                dzl[i] = mu / s - zl[i] - zl[i] / s * dx[i];
            }
            if self.has_hi[i] {
                let s = self.slack_hi(x, i);
                dzu[i] = mu / s - zu[i] + zu[i] / s * dx[i];
            }
        }
        (dzl, dzu)
    }

    fn safeguard_duals(&self, x: &[f64], zl: &mut [f64], zu: &mut [f64], mu: f64) {
        for i in 0..self.n {
            if !self.free[i] {
                continue;
            }
            if self.has_lo[i] {
                let s = self.slack_lo(x, i);
                zl[i] = zl[i].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
            if self.has_hi[i] {
                let s = self.slack_hi(x, i);
                zu[i] = zu[i].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
        }
    }

    /// Scaled optimality error of the barrier problem.
    #[allow(clippy::too_many_arguments)]
    fn error(&self, gjt: &[f64], c: &[f64], x: &[f64], zl: &[f64], zu: &[f64], lam: &[f64], mu: f64) -> f64 {
        let mut dual: f64 = 0.0;
        let mut compl: f64 = 0.0;
        let mut zsum = 0.0;
        for i in 0..self.n {
            if !self.free[i] {
                continue;
            }
            dual = dual.max((gjt[i] - zl[i] + zu[i]).abs());
            zsum += zl[i] + zu[i];
            if self.has_lo[i] {
                compl = compl.max((self.slack_lo(x, i) * zl[i] - mu).abs());
            }
            if self.has_hi[i] {
                compl = compl.max((self.slack_hi(x, i) * zu[i] - mu).abs());
            }
        }
        let s_max: f64 = 100.0;
        let s_d = (s_max.max((l1(lam) + zsum) / (self.n + self.m) as f64)) / s_max;
        let s_c = (s_max.max(zsum / self.n as f64)) / s_max;
        (dual / s_d).max(linf(c)).max(compl / s_c)
    }

    /// Least-squares constraint multipliers, or zero when they come out large.
    fn ls_multipliers(&mut self, x: &[f64], zl: &[f64], zu: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        self.gradient(x, &mut g);
        let rx: Vec<f64> = (0..self.n).map(|i| g[i] - zl[i] + zu[i]).collect();
        let ones = vec![1.0; self.n];
        let zeros = vec![0.0; self.m];
        self.assemble(false, &ones, &zeros);
        match self.direction(&rx, &zeros, 1.0, false) {
            Ok((dir, _)) if linf(&dir.dlam) <= 1e3 => dir.dlam,
            _ => vec![0.0; self.m],
        }
    }

    fn alpha_min(theta: f64, theta_min: f64, gphi_d: f64) -> f64 {
        let v = if gphi_d < 0.0 {
            let a = GAMMA_THETA.min(GAMMA_PHI * theta / -gphi_d);
            if theta <= theta_min {
                a.min(DELTA * theta.powf(S_THETA) / (-gphi_d).powf(S_PHI))
            } else {
                a
            }
        } else {
            GAMMA_THETA
        };
        GAMMA_ALPHA * v
    }

    fn run(&mut self, z0: &[f64]) -> Result<IpmOutcome, IpmError> {
        let (n, m) = (self.n, self.m);
        let tol = self.opts.tol;
        let mu_min = tol / 10.0;
        let mut x = self.initial_point(z0);
        let mut zl: Vec<f64> = (0..n).map(|i| if self.free[i] && self.has_lo[i] { 1.0 } else { 0.0 }).collect();
        let mut zu: Vec<f64> = (0..n).map(|i| if self.free[i] && self.has_hi[i] { 1.0 } else { 0.0 }).collect();
        let mut mu = self.opts.mu_init;
        let mut c = vec![0.0; m];
        let mut g = vec![0.0; n];
        let mut jtl = vec![0.0; n];
        let mut bg = vec![0.0; n];

        self.constraints(&x, &mut c);
        self.derivatives(&x, &vec![0.0; m], 1.0);
        let mut lam = self.ls_multipliers(&x, &zl, &zu);
        let theta0 = l1(&c);
        let theta_min = 1e-4 * theta0.max(1.0);
        let mut filter = Filter::new(1e4 * theta0.max(1.0));
        let mut last_e0;

        loop {
            self.constraints(&x, &mut c);
            self.gradient(&x, &mut g);
            if c.iter().chain(&g).any(|v| !v.is_finite()) {
                return Err(IpmError::NonFinite("objective or constraints"));
            }
            self.derivatives(&x, &lam, 1.0);
            self.jt_times(&lam, &mut jtl);
            let gjt: Vec<f64> = g.iter().zip(&jtl).map(|(a, b)| a + b).collect();
            let e0 = self.error(&gjt, &c, &x, &zl, &zu, &lam, 0.0);
            last_e0 = e0;
            let max_defect = self.max_defect(&c);
            if e0 <= tol && max_defect <= self.opts.constr_viol_tol {
                return Ok(self.outcome(IpmStatus::Optimal, &x, e0, max_defect, "converged"));
            }
            if self.iter >= self.opts.max_iter {
                return Ok(self.outcome(IpmStatus::MaxIter, &x, e0, max_defect, "iteration limit"));
            }
            loop {
                let e_mu = self.error(&gjt, &c, &x, &zl, &zu, &lam, mu);
                if e_mu <= KAPPA_EPS * mu && mu > mu_min {
                    mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
                    filter.reset();
                } else {
                    break;
                }
            }
            let tau = (1.0 - mu).max(0.99);

            let sigma = self.sigma(&x, &zl, &zu);
            self.barrier_grad(&x, mu, &mut bg);
            let rx: Vec<f64> = (0..n).map(|i| if self.free[i] { gjt[i] + bg[i] } else { 0.0 }).collect();
            self.assemble(true, &sigma, &vec![0.0; m]);
            let (dir, dw) = self.direction(&rx, &c, mu, true)?;
            let (dzl, dzu) = self.bound_duals_step(&x, &dir.dx, &zl, &zu, mu);
            let alpha_max = self.ftb_primal(&x, &dir.dx, tau);
            let alpha_z = ftb_positive(&zl, &dzl, tau, 1.0).min(ftb_positive(&zu, &dzu, tau, 1.0));

            let theta = l1(&c);
            let f = self.objective(&x);
            let phi = f + self.barrier(&x, mu);
            let gphi: Vec<f64> = (0..n).map(|i| if self.free[i] { g[i] + bg[i] } else { 0.0 }).collect();
            let gphi_d = dot(&gphi, &dir.dx);

            let tiny = (0..n).all(|i| dir.dx[i].abs() / (1.0 + x[i].abs()) < 10.0 * f64::EPSILON);
            let accepted = if tiny {
                Some((alpha_max, x.iter().zip(&dir.dx).map(|(a, b)| a + alpha_max * b).collect(), dir.dlam.clone(), true))
            } else {
                self.line_search(&x, &c, &dir, &rx, alpha_max, theta, theta_min, phi, gphi_d, mu, tau, &filter, dw)
            };
            log::debug!(
                "iter {:4} f {:.6e} θ {:.3e} E {:.3e} μ {:.2e} δw {:.1e} α {:.3e}",
                self.iter,
                f / OBJECTIVE_SCALE,
                theta,
                e0,
                mu,
                dw,
                accepted.as_ref().map_or(0.0, |a| a.0)
            );
            self.iter += 1;
            match accepted {
                Some((alpha, x_new, dlam, ftype)) => {
                    if !ftype {
                        filter.add(theta, phi);
                    }
                    x = x_new;
                    for (l, dl) in lam.iter_mut().zip(&dlam) {
                        *l += alpha * dl;
                    }
                    for i in 0..n {
                        zl[i] += alpha_z * dzl[i];
                        zu[i] += alpha_z * dzu[i];
                    }
                    self.safeguard_duals(&x, &mut zl, &mut zu, mu);
                }
                None => {
                    filter.add(theta, phi);
                    self.restorations += 1;
                    match self.restore(&x, &zl, &zu, mu, &filter)? {
                        Restored::Point(xr, zlr, zur) => {
                            x = xr;
                            zl = zlr;
                            zu = zur;
                            self.safeguard_duals(&x, &mut zl, &mut zu, mu);
                            self.derivatives(&x, &vec![0.0; m], 1.0);
                            lam = self.ls_multipliers(&x, &zl, &zu);
                        }
                        Restored::Infeasible(xr, msg) => {
                            self.constraints(&xr, &mut c);
                            let md = self.max_defect(&c);
                            return Ok(self.outcome(IpmStatus::Infeasible, &xr, last_e0, md, &msg));
                        }
                        Restored::MaxIter(xr) => {
                            self.constraints(&xr, &mut c);
                            let md = self.max_defect(&c);
                            return Ok(self.outcome(IpmStatus::MaxIter, &xr, last_e0, md, "iteration limit in restoration"));
                        }
                    }
                }
            }
        }
    }

    fn outcome(&self, status: IpmStatus, x: &[f64], e0: f64, max_defect: f64, msg: &str) -> IpmOutcome {
        IpmOutcome {
            status,
            z: self.unscale(x),
            iterations: self.iter,
            restoration_calls: self.restorations,
            kkt_error: e0,
            max_defect,
            message: msg.to_string(),
        }
    }

    #[allow(clippy::too_many_arguments, clippy::type_complexity)]
    fn line_search(
        &mut self,
        x: &[f64],
        c: &[f64],
        dir: &Direction,
        rx: &[f64],
        alpha_max: f64,
        theta: f64,
        theta_min: f64,
        phi: f64,
        gphi_d: f64,
        mu: f64,
        tau: f64,
        filter: &Filter,
        dw: f64,
    ) -> Option<(f64, Vec<f64>, Vec<f64>, bool)> {
        let alpha_min = Self::alpha_min(theta, theta_min, gphi_d);
        let mut ct = vec![0.0; self.m];
        let accept = |theta_t: f64, phi_t: f64, alpha: f64| -> Option<bool> {
            if !theta_t.is_finite() || !phi_t.is_finite() || !filter.acceptable(theta_t, phi_t) {
                return None;
            }
            let switching = gphi_d < 0.0 && alpha * (-gphi_d).powf(S_PHI) > DELTA * theta.powf(S_THETA);
            if theta <= theta_min && switching {
                (phi_t <= phi + ETA_PHI * alpha * gphi_d).then_some(true)
            } else {
                (theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta).then_some(false)
            }
        };
        let mut alpha = alpha_max;
        let mut first = true;
        loop {
            let xt: Vec<f64> = x.iter().zip(&dir.dx).map(|(a, b)| a + alpha * b).collect();
            self.constraints(&xt, &mut ct);
            let theta_t = l1(&ct);
            let phi_t = self.objective(&xt) + self.barrier(&xt, mu);
            if let Some(ftype) = accept(theta_t, phi_t, alpha) {
                return Some((alpha, xt, dir.dlam.clone(), ftype));
            }
            if first && theta_t >= theta {
                // second-order corrections reuse the factorization
                let mut c_soc: Vec<f64> = c.iter().zip(&ct).map(|(a, b)| alpha * a + b).collect();
                let mut theta_prev = theta_t;
                let mut alpha_soc_prev = alpha;
                for _ in 0..MAX_SOC {
                    let d = self.solve_factored(rx, &c_soc, dw, 0.0);
                    let a_soc = self.ftb_primal(x, &d.dx, tau);
                    let xs: Vec<f64> = x.iter().zip(&d.dx).map(|(a, b)| a + a_soc * b).collect();
                    let mut cs = vec![0.0; self.m];
                    self.constraints(&xs, &mut cs);
                    let theta_s = l1(&cs);
                    let phi_s = self.objective(&xs) + self.barrier(&xs, mu);
                    if let Some(ftype) = accept(theta_s, phi_s, alpha) {
                        return Some((a_soc, xs, d.dlam, ftype));
                    }
                    if !(theta_s <= KAPPA_SOC * theta_prev) {
                        break;
                    }
                    theta_prev = theta_s;
                    for (s, v) in c_soc.iter_mut().zip(&cs) {
                        *s = a_soc * *s + v;
                    }
                    alpha_soc_prev = a_soc;
                }
                let _ = alpha_soc_prev;
            }
            first = false;
            alpha *= 0.5;
            if alpha < alpha_min {
                return None;
            }
        }
    }

    /// Minimizes constraint violation from `x0` until the original filter
    /// accepts a point with reduced infeasibility.
    fn restore(&mut self, x0: &[f64], zl0: &[f64], zu0: &[f64], mu_main: f64, main_filter: &Filter) -> Result<Restored, IpmError> {
        let (n, m) = (self.n, self.m);
        let tol = self.opts.tol;
        let mu_min = tol / 10.0;
        let rho = self.opts.restoration_penalty;
        let mut x = x0.to_vec();
        let mut c = vec![0.0; m];
        self.constraints(&x, &mut c);
        let theta_start = l1(&c);
        let mut mu = mu_main.max(linf(&c));
        let zeta = mu.sqrt();
        let x_ref = x0.to_vec();
        let d_ref: Vec<f64> = x_ref.iter().map(|v| (1.0 / v.abs()).min(1.0)).collect();
        let (mut p, mut nn) = (vec![0.0; m], vec![0.0; m]);
        for r in 0..m {
            let a = (mu - rho * c[r]) / (2.0 * rho);
            nn[r] = a + (a * a + mu * c[r] / (2.0 * rho)).sqrt();
            p[r] = c[r] + nn[r];
        }
        let mut zp: Vec<f64> = p.iter().map(|v| mu / v).collect();
        let mut zn: Vec<f64> = nn.iter().map(|v| mu / v).collect();
        let mut zl: Vec<f64> = zl0.iter().map(|v| v.min(rho)).collect();
        let mut zu: Vec<f64> = zu0.iter().map(|v| v.min(rho)).collect();
        let mut lam = vec![0.0; m];

        let resid = |c: &[f64], p: &[f64], nn: &[f64]| -> Vec<f64> { (0..m).map(|r| c[r] - p[r] + nn[r]).collect() };
        let theta_r0 = l1(&resid(&c, &p, &nn));
        let theta_min = 1e-4 * theta_r0.max(1.0);
        let mut filter = Filter::new(1e4 * theta_r0.max(1.0));
        let mut jtl = vec![0.0; n];
        let mut bg = vec![0.0; n];
        let mut steps = 0usize;

        let phi_r = |s: &Solver, x: &[f64], p: &[f64], nn: &[f64], mu: f64| -> f64 {
            let mut v = s.barrier(x, mu);
            for i in 0..n {
                if s.free[i] {
                    let e = d_ref[i] * (x[i] - x_ref[i]);
                    v += 0.5 * zeta * e * e;
                }
            }
            for r in 0..m {
                v += rho * (p[r] + nn[r]) - mu * (p[r].ln() + nn[r].ln());
            }
            v
        };

        loop {
            self.constraints(&x, &mut c);
            if steps > 0 {
                let theta_orig = l1(&c);
                let phi_orig = self.objective(&x) + self.barrier(&x, mu_main);
                let feasible_enough = linf(&c) <= 0.1 * tol;
                if (theta_orig <= KAPPA_RESTO * theta_start && main_filter.acceptable(theta_orig, phi_orig)) || feasible_enough {
                    return Ok(Restored::Point(x, zl, zu));
                }
            }
            if self.iter >= self.opts.max_iter {
                return Ok(Restored::MaxIter(x));
            }
            self.derivatives(&x, &lam, 0.0);
            self.jt_times(&lam, &mut jtl);
            let rc_vec = resid(&c, &p, &nn);
            // restoration optimality error
            let err = |mu_t: f64, zl: &[f64], zu: &[f64], zp: &[f64], zn: &[f64], lam: &[f64]| -> f64 {
                let mut gx: Vec<f64> = jtl.clone();
                for i in 0..n {
                    gx[i] += zeta * d_ref[i] * d_ref[i] * (x[i] - x_ref[i]);
                }
                let mut e = self.error(&gx, &rc_vec, &x, zl, zu, lam, mu_t);
                for r in 0..m {
                    e = e.max((rho - lam[r] - zp[r]).abs() / rho).max((rho + lam[r] - zn[r]).abs() / rho);
                    e = e.max((p[r] * zp[r] - mu_t).abs()).max((nn[r] * zn[r] - mu_t).abs());
                }
                e
            };
            let e0 = err(0.0, &zl, &zu, &zp, &zn, &lam);
            if e0 <= tol && mu <= mu_min * 1.0001 {
                return Ok(Restored::Infeasible(
                    x,
                    format!("converged to a point of local infeasibility (max scaled defect {:.3e})", linf(&c)),
                ));
            }
            loop {
                if err(mu, &zl, &zu, &zp, &zn, &lam) <= KAPPA_EPS * mu && mu > mu_min {
                    mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
                    filter.reset();
                } else {
                    break;
                }
            }
            let tau = (1.0 - mu).max(0.99);

            let mut diag = self.sigma(&x, &zl, &zu);
            for i in 0..n {
                if self.free[i] {
                    diag[i] += zeta * d_ref[i] * d_ref[i];
                }
            }
            let sp: Vec<f64> = (0..m).map(|r| zp[r] / p[r]).collect();
            let sn: Vec<f64> = (0..m).map(|r| zn[r] / nn[r]).collect();
            let rp: Vec<f64> = (0..m).map(|r| rho - lam[r] - mu / p[r]).collect();
            let rn: Vec<f64> = (0..m).map(|r| rho + lam[r] - mu / nn[r]).collect();
            let cdiag: Vec<f64> = (0..m).map(|r| -(1.0 / sp[r] + 1.0 / sn[r])).collect();
            self.barrier_grad(&x, mu, &mut bg);
            let mut gobj = vec![0.0; n];
            for i in 0..n {
                if self.free[i] {
                    gobj[i] = zeta * d_ref[i] * d_ref[i] * (x[i] - x_ref[i]) + bg[i];
                }
            }
            let rx: Vec<f64> = (0..n).map(|i| if self.free[i] { gobj[i] + jtl[i] } else { 0.0 }).collect();
            let rc: Vec<f64> = (0..m).map(|r| rc_vec[r] + rp[r] / sp[r] - rn[r] / sn[r]).collect();
            self.assemble(true, &diag, &cdiag);
            let (dir, _) = self.direction(&rx, &rc, mu, true)?;
            let dp: Vec<f64> = (0..m).map(|r| (dir.dlam[r] - rp[r]) / sp[r]).collect();
            let dn: Vec<f64> = (0..m).map(|r| (-dir.dlam[r] - rn[r]) / sn[r]).collect();
            let dzp: Vec<f64> = (0..m).map(|r| mu / p[r] - zp[r] - sp[r] * dp[r]).collect();
            let dzn: Vec<f64> = (0..m).map(|r| mu / nn[r] - zn[r] - sn[r] * dn[r]).collect();
            let (dzl, dzu) = self.bound_duals_step(&x, &dir.dx, &zl, &zu, mu);

            let alpha_max = ftb_positive(&nn, &dn, tau, ftb_positive(&p, &dp, tau, self.ftb_primal(&x, &dir.dx, tau)));
            let alpha_z = [(&zl, &dzl), (&zu, &dzu), (&zp, &dzp), (&zn, &dzn)]
                .iter()
                .fold(1.0, |a, (v, dv)| ftb_positive(v, dv, tau, a));

            let theta = l1(&rc_vec);
            let phi = phi_r(self, &x, &p, &nn, mu);
            let gphi_d = dot(&gobj, &dir.dx) + (0..m).map(|r| (rho - mu / p[r]) * dp[r] + (rho - mu / nn[r]) * dn[r]).sum::<f64>();
            let alpha_min = Self::alpha_min(theta, theta_min, gphi_d);

            let mut alpha = alpha_max;
            let mut ct = vec![0.0; m];
            let accepted = loop {
                let xt: Vec<f64> = x.iter().zip(&dir.dx).map(|(a, b)| a + alpha * b).collect();
                let pt: Vec<f64> = p.iter().zip(&dp).map(|(a, b)| a + alpha * b).collect();
                let nt: Vec<f64> = nn.iter().zip(&dn).map(|(a, b)| a + alpha * b).collect();
                self.constraints(&xt, &mut ct);
                let theta_t = l1(&resid(&ct, &pt, &nt));
                let phi_t = phi_r(self, &xt, &pt, &nt, mu);
                let ok = if !theta_t.is_finite() || !phi_t.is_finite() || !filter.acceptable(theta_t, phi_t) {
                    None
                } else {
                    let switching = gphi_d < 0.0 && alpha * (-gphi_d).powf(S_PHI) > DELTA * theta.powf(S_THETA);
                    if theta <= theta_min && switching {
                        (phi_t <= phi + ETA_PHI * alpha * gphi_d).then_some(true)
                    } else {
                        (theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta).then_some(false)
                    }
                };
                if let Some(ftype) = ok {
                    break Some((alpha, xt, pt, nt, ftype));
                }
                alpha *= 0.5;
                if alpha < alpha_min {
                    break None;
                }
            };
            self.iter += 1;
            steps += 1;
            log::debug!(
                "resto {:4} θ_orig {:.3e} θ_R {:.3e} E {:.3e} μ {:.2e}",
                self.iter,
                l1(&c),
                theta,
                e0,
                mu
            );
            match accepted {
                Some((alpha, xt, pt, nt, ftype)) => {
                    if !ftype {
                        filter.add(theta, phi);
                    }
                    x = xt;
                    p = pt;
                    nn = nt;
                    for r in 0..m {
                        lam[r] += alpha * dir.dlam[r];
                        zp[r] += alpha_z * dzp[r];
                        zn[r] += alpha_z * dzn[r];
                        zp[r] = zp[r].clamp(mu / (KAPPA_SIGMA * p[r]), KAPPA_SIGMA * mu / p[r]);
                        zn[r] = zn[r].clamp(mu / (KAPPA_SIGMA * nn[r]), KAPPA_SIGMA * mu / nn[r]);
                    }
                    for i in 0..n {
                        zl[i] += alpha_z * dzl[i];
                        zu[i] += alpha_z * dzu[i];
                    }
                    self.safeguard_duals(&x, &mut zl, &mut zu, mu);
                }
                None => {
                    return Ok(Restored::Infeasible(
                        x,
                        format!("feasibility restoration stalled (max scaled defect {:.3e})", linf(&c)),
                    ));
                }
            }
        }
    }
}

enum Restored {
    Point(Vec<f64>, Vec<f64>, Vec<f64>),
    Infeasible(Vec<f64>, String),
    MaxIter(Vec<f64>),
}

/// Solves the NLP from the unscaled starting point `z0`.
pub fn solve_nlp(nlp: &NlpProblem, z0: &[f64], opts: &IpmOptions) -> Result<IpmOutcome, IpmError> {
    assert_eq!(z0.len(), nlp.n_vars(), "starting point has the wrong length");
    Solver::new(nlp, *opts).run(z0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_dominance() {
        let mut f = Filter::new(100.0);
        assert!(f.acceptable(1.0, 1.0));
        f.add(1.0, 1.0);
        assert!(!f.acceptable(1.0, 1.0));
        assert!(f.acceptable(0.5, 2.0));
        assert!(f.acceptable(2.0, 0.5));
        assert!(!f.acceptable(200.0, -1e9));
        f.add(0.5, 0.5);
        assert_eq!(f.entries.len(), 1);
    }

    #[test]
    fn interleaved_layout_is_banded() {
        // last state of node k+1 against first multiplier of defect k
        assert!(kkt_var(NODE_DIM + NODE_DIM - 1) - kkt_con(0) <= HALF_BAND);
        assert!(kkt_con(STATE_DIM - 1) - kkt_var(0) <= HALF_BAND);
        assert_eq!(kkt_var(NODE_DIM), BLOCK);
    }

    #[test]
    fn fraction_to_boundary() {
        assert_eq!(ftb_positive(&[1.0], &[-2.0], 0.99, 1.0), 0.495);
        assert_eq!(ftb_positive(&[1.0], &[2.0], 0.99, 1.0), 1.0);
    }
}
