//! Time evolution in rescaled time `τ = t / η`:
//! `dψ/dτ = -i (H_{ητ} + ε P_{ητ}) ψ`.

use serde::{Deserialize, Serialize};

use super::schedule::{RampedSum, Schedule};
use crate::linalg::{self, Matrix, C64};
use crate::{NeassError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Adaptive Dormand-Prince 5(4) with polar re-orthonormalization.
    #[default]
    DormandPrince,
    /// Exponential midpoint (second-order Magnus) with step doubling.
    Magnus,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IntegratorOptions {
    /// Local error tolerance per step (max-abs entry of the state error).
    pub tol: f64,
    pub backend: Backend,
    pub max_steps: usize,
    /// Smallest allowed step in rescaled time, relative to the total span.
    pub min_relative_step: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { tol: 1e-10, backend: Backend::DormandPrince, max_steps: 5_000_000, min_relative_step: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct StepLog {
    pub accepted: usize,
    pub rejected: usize,
    pub reprojections: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// The unitary `W(s, t)` mapping states at `s` to states at `t`.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub unitary: Matrix,
    pub start: f64,
    pub end: f64,
    pub eps: f64,
    pub eta: f64,
    pub log: StepLog,
}

impl Propagator {
    /// Heisenberg map `A -> W^† A W`.
    pub fn heisenberg(&self, a: &Matrix) -> Matrix {
        linalg::conjugate_adjoint(&self.unitary, a)
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.unitary)
    }
}

/// Evolves the full unitary from `s` to `t`.
pub fn propagator(
    schedule: &Schedule,
    eps: f64,
    eta: f64,
    s: f64,
    t: f64,
    opts: &IntegratorOptions,
) -> Result<Propagator> {
    let (unitary, log) = evolve_columns(schedule, eps, eta, s, t, &linalg::identity(schedule.dim()), opts)?;
    Ok(Propagator { unitary, start: s, end: t, eps, eta, log })
}

/// Evolves each column of `psi0` from physical time `s` to `t`.
pub fn evolve_columns(
    schedule: &Schedule,
    eps: f64,
    eta: f64,
    s: f64,
    t: f64,
    psi0: &Matrix,
    opts: &IntegratorOptions,
) -> Result<(Matrix, StepLog)> {
    if !(eta > 0.0) {
        return Err(NeassError::Argument(format!("adiabatic parameter must be positive, got {eta}")));
    }
    if !(opts.tol > 0.0) {
        return Err(NeassError::Argument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if psi0.nrows() != schedule.dim() {
        return Err(NeassError::Argument("state dimension does not match the schedule".into()));
    }
    let gen = Generator { sum: schedule.generator(eps), eta, constant: schedule.is_constant_on(s.min(t), s.max(t)) };
    let (tau0, tau1) = (s / eta, t / eta);
    if tau0 == tau1 {
        return Ok((psi0.clone(), StepLog::default()));
    }
    match opts.backend {
        Backend::DormandPrince => dormand_prince(&gen, tau0, tau1, psi0.clone(), opts, eta),
        Backend::Magnus => magnus(&gen, tau0, tau1, psi0.clone(), opts, eta),
    }
}

struct Generator {
    sum: RampedSum,
    eta: f64,
    constant: bool,
}

impl Generator {
    fn matrix(&self, tau: f64) -> Matrix {
        let dim = self.sum.groups[0].1.nrows();
        self.sum.derivative(dim, self.eta * tau, 0)
    }

    /// `-i G(τ) ψ`
    fn rhs(&self, tau: f64, psi: &Matrix) -> Matrix {
        let k = psi.ncols();
        let out = if k < self.sum.groups.len() * 2 {
            let coef = self.sum.coefficients(self.eta * tau);
            let mut acc = Matrix::zeros(psi.nrows(), k);
            for (c, (_, m)) in coef.iter().zip(&self.sum.groups) {
                if *c != 0.0 {
                    let mp = m * psi;
                    acc += linalg::scale_real(&mp, *c);
                }
            }
            acc
        } else {
            &self.matrix(tau) * psi
        };
        linalg::scale(&out, C64::new(0.0, -1.0))
    }
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for (x, y) in a.col_as_slice(j).iter().zip(b.col_as_slice(j)) {
            m = m.max((x - y).norm());
        }
    }
    m
}

/// Max-abs entry of `ψ^†ψ - 1`; cheaper than the operator norm and within a
/// factor `k` of it.
fn column_defect(psi: &Matrix) -> f64 {
    let g = psi.adjoint() * psi;
    let k = g.nrows();
    let mut m: f64 = 0.0;
    for c in 0..k {
        for r in 0..k {
            let d = if r == c { g[(r, c)] - C64::new(1.0, 0.0) } else { g[(r, c)] };
            m = m.max(d.norm());
        }
    }
    m
}

fn stiffness(at: f64, eta: f64, span: f64, h: f64) -> NeassError {
    // The step needed scales like η, so the requested resolution is reachable
    // once η is raised by roughly the ratio of the floor step to the failing one.
    let floor = span * 1e-12;
    let factor = (floor / h.max(f64::MIN_POSITIVE)).max(10.0);
    NeassError::Stiffness { at: at * eta, suggested_eta_floor: eta * factor }
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn dormand_prince(
    gen: &Generator,
    tau0: f64,
    tau1: f64,
    mut psi: Matrix,
    opts: &IntegratorOptions,
    eta: f64,
) -> Result<(Matrix, StepLog)> {
    let span = (tau1 - tau0).abs();
    let dir = (tau1 - tau0).signum();
    let min_step = span * opts.min_relative_step;
    let mut log = StepLog { min_step: f64::INFINITY, ..Default::default() };
    let mut tau = tau0;
    let mut h = (span / 100.0).min(0.1);
    let mut k1 = gen.rhs(tau, &psi);
    while (tau1 - tau) * dir > 0.0 {
        if log.accepted + log.rejected >= opts.max_steps {
            return Err(stiffness(tau, eta, span, h));
        }
        let last = (tau1 - tau).abs() <= h;
        let step = if last { (tau1 - tau).abs() } else { h };
        let hs = step * dir;
        let mut ks: Vec<Matrix> = Vec::with_capacity(7);
        ks.push(k1.clone());
        let mut y5 = psi.clone();
        for stage in 1..7 {
            let mut y = psi.clone();
            for (j, kj) in ks.iter().enumerate() {
                let a = DP_A[stage][j];
                if a != 0.0 {
                    y += linalg::scale_real(kj, hs * a);
                }
            }
            if stage == 6 {
                y5 = y.clone();
            }
            ks.push(gen.rhs(tau + DP_C[stage] * hs, &y));
        }
        // Error estimate: h Σ (b5 - b4) k
        let mut err = Matrix::zeros(psi.nrows(), psi.ncols());
        for (j, kj) in ks.iter().enumerate() {
            let b5 = if j < 6 { DP_A[6][j] } else { 0.0 };
            let d = b5 - DP_B4[j];
            if d != 0.0 {
                err += linalg::scale_real(kj, hs * d);
            }
        }
        let zero = Matrix::zeros(psi.nrows(), psi.ncols());
        let err_norm = max_abs_diff(&err, &zero) / opts.tol;
        if err_norm <= 1.0 {
            tau = if last { tau1 } else { tau + hs };
            psi = y5;
            k1 = ks.pop().expect("seven stages");
            log.accepted += 1;
            log.min_step = log.min_step.min(step);
            log.max_step = log.max_step.max(step);
            if column_defect(&psi) > opts.tol / 10.0 {
                psi = linalg::polar_orthonormalize(&psi);
                k1 = gen.rhs(tau, &psi);
                log.reprojections += 1;
            }
        } else {
            log.rejected += 1;
        }
        let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if h < min_step && (tau1 - tau).abs() > min_step {
            return Err(stiffness(tau, eta, span, h));
        }
    }
    if log.min_step == f64::INFINITY {
        log.min_step = 0.0;
    }
    Ok((psi, log))
}

fn magnus_step(gen: &Generator, tau: f64, h: f64, psi: &Matrix) -> Matrix {
    let g = gen.matrix(tau + h / 2.0);
    let u = linalg::expm_hermitian(&g, h);
    &u * psi
}

fn magnus(
    gen: &Generator,
    tau0: f64,
    tau1: f64,
    mut psi: Matrix,
    opts: &IntegratorOptions,
    eta: f64,
) -> Result<(Matrix, StepLog)> {
    let span = (tau1 - tau0).abs();
    let dir = (tau1 - tau0).signum();
    let mut log = StepLog { min_step: f64::INFINITY, ..Default::default() };
    if gen.constant {
        // Exact for autonomous generators.
        psi = magnus_step(gen, tau0, tau1 - tau0, &psi);
        log.accepted = 1;
        log.min_step = span;
        log.max_step = span;
        return Ok((psi, log));
    }
    let min_step = span * opts.min_relative_step;
    let mut tau = tau0;
    let mut h = (span / 100.0).min(0.1);
    while (tau1 - tau) * dir > 0.0 {
        if log.accepted + log.rejected >= opts.max_steps {
            return Err(stiffness(tau, eta, span, h));
        }
        let last = (tau1 - tau).abs() <= h;
        let step = if last { (tau1 - tau).abs() } else { h };
        let hs = step * dir;
        let full = magnus_step(gen, tau, hs, &psi);
        let half = magnus_step(gen, tau, hs / 2.0, &psi);
        let half = magnus_step(gen, tau + hs / 2.0, hs / 2.0, &half);
        let err_norm = max_abs_diff(&full, &half) / 3.0 / opts.tol;
        if err_norm <= 1.0 {
            tau = if last { tau1 } else { tau + hs };
            psi = half;
            log.accepted += 1;
            log.min_step = log.min_step.min(step);
            log.max_step = log.max_step.max(step);
        } else {
            log.rejected += 1;
        }
        let factor = if err_norm == 0.0 { 4.0 } else { (0.9 * err_norm.powf(-1.0 / 3.0)).clamp(0.2, 4.0) };
        h = step * factor;
        if h < min_step && (tau1 - tau).abs() > min_step {
            return Err(stiffness(tau, eta, span, h));
        }
    }
    if log.min_step == f64::INFINITY {
        log.min_step = 0.0;
    }
    Ok((psi, log))
}
