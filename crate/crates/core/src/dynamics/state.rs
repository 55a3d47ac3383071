//! Dressed states `ω^{ε,η}_t = ω_t ∘ β_t` with `β_t(A) = e^{iS_t} A e^{-iS_t}`,
//! and the drift functional comparing them with the true evolution.

use serde::{Deserialize, Serialize};

use super::propagate::{evolve_columns, IntegratorOptions, StepLog};
use crate::expansion::{ExpansionEngine, Mask};
use crate::linalg::{self, Matrix, C64};
use crate::spectral::GroundStateFunctional;
use crate::{NeassError, Result};

/// `A -> ω(e^{iS} A e^{-iS})`, stored as the rotated state vectors `e^{-iS} ψ_j`.
#[derive(Clone, Debug)]
pub struct SuperAdiabaticState {
    pub reference: GroundStateFunctional,
    pub dressing: Matrix,
    pub dressed: GroundStateFunctional,
}

impl SuperAdiabaticState {
    pub fn new(reference: GroundStateFunctional, dressing: Matrix) -> Self {
        let vectors = if linalg::is_zero(&dressing) {
            reference.vectors.clone()
        } else {
            &linalg::expm_hermitian(&dressing, 1.0) * &reference.vectors
        };
        let dressed = GroundStateFunctional { vectors, weights: reference.weights.clone() };
        Self { reference, dressing, dressed }
    }

    pub fn expectation(&self, a: &Matrix) -> C64 {
        self.dressed.expectation(a)
    }

    /// `β(A) = e^{iS} A e^{-iS}`
    pub fn dressing_automorphism(&self, a: &Matrix) -> Matrix {
        let u = linalg::expm_hermitian(&self.dressing, -1.0);
        linalg::conjugate(&u, a)
    }
}

/// Accuracy budget of one drift evaluation.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct ToleranceBudget {
    pub integrator_tol: f64,
    pub steps: StepLog,
    /// `‖ψ^†ψ - 1‖` of the evolved vectors.
    pub unitarity_defect: f64,
    /// Largest Richardson estimate of the time-derivative tables used.
    pub fd_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftReport {
    pub t0: f64,
    pub t: f64,
    pub eps: f64,
    pub eta: f64,
    pub order: usize,
    /// `|ω^{ε,η}_t(A) - ω^{ε,η}_{t0}(𝔘_{t0,t} A)|` per observable.
    pub drift: Vec<f64>,
    /// `ω^{ε,η}_t(A)` per observable (real part).
    pub dressed: Vec<f64>,
    pub budget: ToleranceBudget,
}

fn check_mask(engine: &ExpansionEngine, eps: f64, eta: f64, t0: f64, t1: f64) -> Result<()> {
    match engine.config().mask {
        Mask::EtaOnly if eps != 0.0 => {
            Err(NeassError::Argument("an η-only expansion cannot dress a perturbed evolution".into()))
        }
        Mask::EpsOnly if eta != 0.0 && !engine.schedule().is_constant_on(t0, t1) => {
            Err(NeassError::Argument("an ε-only expansion needs a schedule that is constant on the interval".into()))
        }
        _ => Ok(()),
    }
}

/// Dressed state at time `t` for `(ε, η)` and order `n`.
pub fn super_adiabatic_state(
    engine: &ExpansionEngine,
    t: f64,
    eps: f64,
    eta: f64,
    n: usize,
) -> Result<SuperAdiabaticState> {
    let snap = engine.snapshot(t)?;
    let s = engine.dressing(t, eps, eta, n)?;
    Ok(SuperAdiabaticState::new(snap.ground_state(), s))
}

/// Drift at each time in `times` (ascending, all `>= t0`), evolving piecewise.
pub fn drift_trajectory(
    engine: &ExpansionEngine,
    eps: f64,
    eta: f64,
    n: usize,
    t0: f64,
    times: &[f64],
    observables: &[Matrix],
    opts: &IntegratorOptions,
) -> Result<Vec<DriftReport>> {
    let t_last = times.iter().copied().fold(t0, f64::max);
    check_mask(engine, eps, eta, t0, t_last)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(NeassError::Argument("drift times must be ascending and not before t0".into()));
    }
    let start = super_adiabatic_state(engine, t0, eps, eta, n)?;
    let mut psi = start.dressed.vectors.clone();
    let weights = start.dressed.weights.clone();
    let mut fd_error = if n >= 2 { engine.table(t0, n)?.max_derivative_error() } else { 0.0 };
    let mut steps = StepLog::default();
    let mut prev = t0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > prev {
            let (next, log) = evolve_columns(engine.schedule(), eps, eta, prev, t, &psi, opts)?;
            psi = next;
            steps.accepted += log.accepted;
            steps.rejected += log.rejected;
            steps.reprojections += log.reprojections;
            steps.min_step = if steps.min_step == 0.0 { log.min_step } else { steps.min_step.min(log.min_step) };
            steps.max_step = steps.max_step.max(log.max_step);
            prev = t;
        }
        let evolved = GroundStateFunctional { vectors: psi.clone(), weights: weights.clone() };
        let target = super_adiabatic_state(engine, t, eps, eta, n)?;
        if n >= 2 {
            fd_error = fd_error.max(engine.table(t, n)?.max_derivative_error());
        }
        let mut drift = Vec::with_capacity(observables.len());
        let mut dressed = Vec::with_capacity(observables.len());
        for a in observables {
            let now = target.expectation(a);
            let ev = evolved.expectation(a);
            drift.push((now - ev).norm());
            dressed.push(now.re);
        }
        out.push(DriftReport {
            t0,
            t,
            eps,
            eta,
            order: n,
            drift,
            dressed,
            budget: ToleranceBudget {
                integrator_tol: opts.tol,
                steps,
                unitarity_defect: linalg::unitarity_defect(&psi),
                fd_error,
            },
        });
    }
    Ok(out)
}

/// `|ω^{ε,η}_t(A) - ω^{ε,η}_{t0}(𝔘_{t0,t} A)|` for a single time.
pub fn drift(
    engine: &ExpansionEngine,
    eps: f64,
    eta: f64,
    n: usize,
    t0: f64,
    t: f64,
    observables: &[Matrix],
    opts: &IntegratorOptions,
) -> Result<DriftReport> {
    Ok(drift_trajectory(engine, eps, eta, n, t0, &[t], observables, opts)?.remove(0))
}

/// Drift of the non-equilibrium almost-stationary state under `𝔘^{ε,1}`.
/// The schedule must be constant on `[t0, max(times)]`.
pub fn neass_drift(
    engine: &ExpansionEngine,
    eps: f64,
    n: usize,
    t0: f64,
    times: &[f64],
    observables: &[Matrix],
    opts: &IntegratorOptions,
) -> Result<Vec<DriftReport>> {
    let t_last = times.iter().copied().fold(t0, f64::max);
    if !engine.schedule().is_constant_on(t0, t_last) {
        return Err(NeassError::Usage("the stationary-state drift needs a schedule constant on the interval".into()));
    }
    drift_trajectory(engine, eps, 1.0, n, t0, times, observables, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caralg::{FockSpace, LatticeGeometry, OperatorKind};
    use crate::dynamics::{Ramp, Schedule, ScheduleTerm};
    use crate::expansion::ExpansionConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(ramp: Ramp, p: f64) -> Schedule {
        let space = FockSpace::new(LatticeGeometry::chain(4, 1).unwrap()).unwrap();
        let mut h = Vec::new();
        for x in 0..3 {
            let a = space.creation(x, 0) * space.annihilation(x + 1, 0);
            let r = if x == 1 { ramp.clone() } else { Ramp::constant(1.0 + 0.3 * x as f64) };
            h.push(ScheduleTerm { sites: vec![x, x + 1], matrix: -(&a + a.adjoint()), ramp: r });
        }
        // Breaks the sublattice symmetry that would pin all densities and currents.
        h.push(ScheduleTerm {
            sites: vec![0],
            matrix: linalg::scale_real(&space.number(0), 0.5),
            ramp: Ramp::constant(1.0),
        });
        let pert = vec![ScheduleTerm {
            sites: vec![1, 2],
            matrix: linalg::scale_real(&(space.number(1) * space.number(2)), 0.7),
            ramp: Ramp::constant(p),
        }];
        Schedule::new(space, h, pert, None, (0.0, 1.0), None).unwrap()
    }

    fn opts() -> IntegratorOptions {
        IntegratorOptions { tol: 1e-12, ..Default::default() }
    }

    #[test]
    fn state_axioms() {
        let s = chain(Ramp::Smoothstep { t0: 0.0, t1: 1.0, from: 0.8, to: 1.4 }, 1.0);
        let engine = ExpansionEngine::new(&s, ExpansionConfig::default()).unwrap();
        let state = super_adiabatic_state(&engine, 0.5, 0.3, 0.2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((state.expectation(&s.space().identity()) - 1.0).norm() < 1e-12);
        for _ in 0..20 {
            let a = s.space().random_local_operator(&mut rng, &[1, 2], OperatorKind::Any);
            let v = state.expectation(&a);
            assert!(v.norm() <= linalg::op_norm(&a) + 1e-12);
            let pos = state.expectation(&(&linalg::adjoint(&a) * &a));
            assert!(pos.re >= -1e-12 && pos.im.abs() < 1e-12);
            let beta = state.dressing_automorphism(&a);
            assert!((state.reference.expectation(&beta) - v).norm() < 1e-12);
        }
        let bare = super_adiabatic_state(&engine, 0.5, 0.0, 0.0, 2).unwrap();
        let a = s.space().number(1);
        assert!((bare.expectation(&a) - bare.reference.expectation(&a)).norm() < 1e-15);
    }

    #[test]
    fn stationary_unperturbed_drift_vanishes() {
        let s = chain(Ramp::constant(1.0), 1.0);
        let engine = ExpansionEngine::new(&s, ExpansionConfig::default()).unwrap();
        let a = s.space().number(1);
        let r = drift(&engine, 0.0, 0.3, 1, 0.0, 1.0, &[a.clone()], &opts()).unwrap();
        assert!(r.drift[0] < 1e-9, "{}", r.drift[0]);
        let same = drift(&engine, 0.2, 0.3, 2, 0.4, 0.4, &[a], &opts()).unwrap();
        assert_eq!(same.drift[0], 0.0);
    }

    #[test]
    fn neass_requires_constant_schedule() {
        let s = chain(Ramp::Linear { offset: 1.0, slope: 0.5 }, 1.0);
        let engine = ExpansionEngine::new(&s, ExpansionConfig::default()).unwrap();
        let r = neass_drift(&engine, 0.1, 1, 0.0, &[1.0], &[s.space().number(0)], &opts());
        assert!(matches!(r, Err(NeassError::Usage(_))));
    }

    #[test]
    fn neass_state_is_independent_of_eta() {
        let s = chain(Ramp::constant(1.0), 1.0);
        let engine = ExpansionEngine::new(&s, ExpansionConfig::default()).unwrap();
        let a = s.space().number(2);
        let v1 = super_adiabatic_state(&engine, 0.0, 0.2, 0.1, 3).unwrap().expectation(&a);
        let v2 = super_adiabatic_state(&engine, 0.0, 0.2, 0.7, 3).unwrap().expectation(&a);
        assert!((v1 - v2).norm() < 1e-10);
        let r0 = neass_drift(&engine, 0.0, 2, 0.0, &[3.0], &[a], &opts()).unwrap();
        assert!(r0[0].drift[0] < 1e-9);
    }

    #[test]
    fn first_order_dressing_beats_bare_state() {
        let s = chain(Ramp::Smoothstep { t0: 0.0, t1: 1.0, from: 0.8, to: 1.4 }, 0.0);
        let engine = ExpansionEngine::new(&s, ExpansionConfig { mask: Mask::EtaOnly, ..Default::default() }).unwrap();
        // For a real Hamiltonian the first-order response shows up in currents, not densities.
        let hop = &s.space().creation(1, 0) * &s.space().annihilation(2, 0);
        let a = linalg::scale(&(&hop - &linalg::adjoint(&hop)), C64::new(0.0, 1.0));
        let d0 = drift(&engine, 0.0, 0.05, 0, 0.0, 0.5, &[a.clone()], &opts()).unwrap().drift[0];
        let d1 = drift(&engine, 0.0, 0.05, 1, 0.0, 0.5, &[a], &opts()).unwrap().drift[0];
        assert!(d1 < d0, "{d0} {d1}");
    }

    #[test]
    fn sector_restriction_agrees_with_full_space() {
        // The generator and the ground state live in one particle-number sector.
        let s = chain(Ramp::Smoothstep { t0: 0.0, t1: 1.0, from: 0.8, to: 1.4 }, 1.0);
        let engine = ExpansionEngine::new(&s, ExpansionConfig::default()).unwrap();
        let state = super_adiabatic_state(&engine, 0.5, 0.2, 0.1, 2).unwrap();
        let psi = &state.reference.vectors;
        let n_ground = (0..s.dim()).find(|&b| psi[(b, 0)].norm() > 1e-6).map(|b| b.count_ones()).unwrap();
        let sector: Vec<usize> = (0..s.dim()).filter(|b| b.count_ones() == n_ground).collect();
        let restrict =
            |m: &Matrix, cols: usize| {
                Matrix::from_fn(sector.len(), cols, |r, c| {
                    if cols == 1 {
                        m[(sector[r], 0)]
                    } else {
                        m[(sector[r], sector[c])]
                    }
                })
            };
        let s_sec = restrict(&state.dressing, sector.len());
        let psi_sec = restrict(psi, 1);
        let rotated = &linalg::expm_hermitian(&s_sec, 1.0) * &psi_sec;
        let local = GroundStateFunctional::vector_state(rotated);
        let a = &s.space().creation(1, 0) * &s.space().annihilation(2, 0);
        let a_sec = restrict(&a, sector.len());
        assert!((local.expectation(&a_sec) - state.expectation(&a)).norm() < 1e-10);
    }
}
