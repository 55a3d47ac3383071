//! Time-dependent Hamiltonians `H_t + ε (H¹_t + V_t)` built from ramped local terms.

use serde::{Deserialize, Serialize};

use super::ramp::Ramp;
use crate::caralg::FockSpace;
use crate::interaction::{Interaction, LipschitzPotential};
use crate::linalg::{self, Matrix};
use crate::spectral;
use crate::{NeassError, Result};

/// One local term `f(t) X` of a schedule.
#[derive(Clone, Debug)]
pub struct ScheduleTerm {
    pub sites: Vec<usize>,
    pub matrix: Matrix,
    pub ramp: Ramp,
}

/// Lipschitz potential with a time profile, `V_t = f(t) V`.
#[derive(Clone, Debug)]
pub struct RampedPotential {
    pub potential: LipschitzPotential,
    pub ramp: Ramp,
}

/// Global matrices grouped by ramp: `Σ_g f_g(t) M_g`.
#[derive(Clone, Debug, Default)]
pub struct RampedSum {
    pub groups: Vec<(Ramp, Matrix)>,
}

impl RampedSum {
    fn push(&mut self, ramp: &Ramp, m: &Matrix, scale: f64) {
        if let Some((_, acc)) = self.groups.iter_mut().find(|(r, _)| r == ramp) {
            linalg::add_scaled_real(acc, scale, m);
        } else {
            self.groups.push((ramp.clone(), linalg::scale_real(m, scale)));
        }
    }

    /// `Σ_g f_g^{(k)}(t) M_g`
    pub fn derivative(&self, dim: usize, t: f64, k: usize) -> Matrix {
        let mut out = linalg::zeros(dim);
        for (r, m) in &self.groups {
            let c = r.derivative(t, k);
            if c != 0.0 {
                linalg::add_scaled_real(&mut out, c, m);
            }
        }
        out
    }

    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        self.groups.iter().map(|(r, _)| r.value(t)).collect()
    }

    fn merged(&self, other: &RampedSum, scale: f64) -> RampedSum {
        let mut out = self.clone();
        for (r, m) in &other.groups {
            out.push(r, m, scale);
        }
        out
    }
}

/// Serializable summary of the time window and localization region.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScheduleWindow {
    pub start: f64,
    pub end: f64,
}

/// A driven lattice Hamiltonian on a finite Fock space.
#[derive(Clone, Debug)]
pub struct Schedule {
    space: FockSpace,
    hamiltonian: Vec<ScheduleTerm>,
    perturbation: Vec<ScheduleTerm>,
    potential: Option<RampedPotential>,
    window: ScheduleWindow,
    region: Vec<usize>,
    h_sum: RampedSum,
    p_sum: RampedSum,
}

impl Schedule {
    /// Validates every term (self-adjoint, gauge-invariant, supported on its
    /// sites) and precomputes the global matrices.
    pub fn new(
        space: FockSpace,
        hamiltonian: Vec<ScheduleTerm>,
        perturbation: Vec<ScheduleTerm>,
        potential: Option<RampedPotential>,
        window: (f64, f64),
        region: Option<Vec<usize>>,
    ) -> Result<Self> {
        if !(window.0.is_finite() && window.1.is_finite() && window.0 <= window.1) {
            return Err(NeassError::Validation(format!("invalid time window {window:?}")));
        }
        if hamiltonian.is_empty() {
            return Err(NeassError::Validation("schedule has no Hamiltonian terms".into()));
        }
        let n_sites = space.num_sites();
        for (kind, terms) in [("hamiltonian", &hamiltonian), ("perturbation", &perturbation)] {
            for (idx, term) in terms.iter().enumerate() {
                Interaction::from_terms(&space, vec![(term.sites.clone(), term.matrix.clone())])
                    .map_err(|e| NeassError::Validation(format!("{kind}[{idx}]: {e}")))?;
            }
        }
        if let Some(v) = &potential {
            if v.potential.values.len() != n_sites {
                return Err(NeassError::Validation(format!(
                    "potential has {} values for {} sites",
                    v.potential.values.len(),
                    n_sites
                )));
            }
        }
        let region = match region {
            Some(mut r) => {
                r.sort_unstable();
                r.dedup();
                if let Some(&bad) = r.iter().find(|&&x| x >= n_sites) {
                    return Err(NeassError::Validation(format!("region site {bad} out of range")));
                }
                r
            }
            None => (0..n_sites).collect(),
        };
        let mut h_sum = RampedSum::default();
        for term in &hamiltonian {
            h_sum.push(&term.ramp, &term.matrix, 1.0);
        }
        let mut p_sum = RampedSum::default();
        for term in &perturbation {
            p_sum.push(&term.ramp, &term.matrix, 1.0);
        }
        if let Some(v) = &potential {
            p_sum.push(&v.ramp, &v.potential.global(&space), 1.0);
        }
        Ok(Self {
            space,
            hamiltonian,
            perturbation,
            potential,
            window: ScheduleWindow { start: window.0, end: window.1 },
            region,
            h_sum,
            p_sum,
        })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn window(&self) -> (f64, f64) {
        (self.window.start, self.window.end)
    }

    pub fn region(&self) -> &[usize] {
        &self.region
    }

    pub fn hamiltonian_terms(&self) -> &[ScheduleTerm] {
        &self.hamiltonian
    }

    pub fn perturbation_terms(&self) -> &[ScheduleTerm] {
        &self.perturbation
    }

    pub fn potential(&self) -> Option<&RampedPotential> {
        self.potential.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `H_t`
    pub fn h(&self, t: f64) -> Matrix {
        self.h_sum.derivative(self.dim(), t, 0)
    }

    /// `d^k H_t / dt^k`
    pub fn h_derivative(&self, t: f64, k: usize) -> Matrix {
        self.h_sum.derivative(self.dim(), t, k)
    }

    /// `H¹_t + V_t`
    pub fn perturbation(&self, t: f64) -> Matrix {
        self.p_sum.derivative(self.dim(), t, 0)
    }

    /// Grouped form of `H_t + ε (H¹_t + V_t)` for the propagators.
    pub fn generator(&self, eps: f64) -> RampedSum {
        if eps == 0.0 {
            self.h_sum.clone()
        } else {
            self.h_sum.merged(&self.p_sum, eps)
        }
    }

    /// `H_t` as an interaction.
    pub fn h_interaction(&self, t: f64) -> Interaction {
        ramped_interaction(&self.hamiltonian, t)
    }

    /// `(H¹_t, V_t)` in interaction form.
    pub fn perturbation_interaction(&self, t: f64) -> (Interaction, Option<LipschitzPotential>) {
        let v = self.potential.as_ref().map(|p| p.potential.scaled(p.ramp.value(t)));
        (ramped_interaction(&self.perturbation, t), v)
    }

    /// True if neither `H` nor the perturbation changes on `[a, b]`.
    pub fn is_constant_on(&self, a: f64, b: f64) -> bool {
        self.h_sum.groups.iter().chain(self.p_sum.groups.iter()).all(|(r, _)| r.is_constant_on(a, b))
    }

    pub fn is_constant(&self) -> bool {
        self.is_constant_on(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// The autonomous schedule with every ramp frozen at time `t`.
    pub fn frozen(&self, t: f64) -> Schedule {
        let freeze = |terms: &[ScheduleTerm]| {
            terms
                .iter()
                .map(|s| ScheduleTerm { sites: s.sites.clone(), matrix: s.matrix.clone(), ramp: s.ramp.frozen(t) })
                .collect::<Vec<_>>()
        };
        let potential =
            self.potential.as_ref().map(|p| RampedPotential { potential: p.potential.clone(), ramp: p.ramp.frozen(t) });
        Schedule::new(
            self.space.clone(),
            freeze(&self.hamiltonian),
            freeze(&self.perturbation),
            potential,
            self.window(),
            Some(self.region.clone()),
        )
        .expect("freezing preserves validity")
    }

    /// Checks the localization assumptions relative to the region `L`:
    /// time-dependent `H` terms and all `H¹` terms lie inside `L`, and `V` is
    /// constant on every connected component of the complement.
    pub fn check_localization(&self) -> Result<()> {
        let inside = |sites: &[usize]| sites.iter().all(|s| self.region.binary_search(s).is_ok());
        let (a, b) = self.window();
        for (idx, term) in self.hamiltonian.iter().enumerate() {
            if !term.ramp.is_constant_on(a, b) && !inside(&term.sites) {
                return Err(NeassError::Validation(format!("hamiltonian[{idx}] is time-dependent outside the region")));
            }
        }
        for (idx, term) in self.perturbation.iter().enumerate() {
            if !inside(&term.sites) {
                return Err(NeassError::Validation(format!("perturbation[{idx}] leaves the region")));
            }
        }
        if let Some(v) = &self.potential {
            let geo = self.space.geometry();
            let outside: Vec<usize> = (0..geo.num_sites()).filter(|x| self.region.binary_search(x).is_err()).collect();
            for &x in &outside {
                for &y in &outside {
                    if geo.distance(x, y) == 1 && v.potential.values[x] != v.potential.values[y] {
                        // Adjacent outside sites share a component.
                        return Err(NeassError::Validation(format!(
                            "potential varies between sites {x} and {y} outside the region"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `min(1, min_t g_raw(t))` over `samples + 1` evenly spaced times of the
    /// window. A closed gap at any sample is a `Gap` error.
    pub fn path_filter_gap(&self, samples: usize) -> Result<f64> {
        let (a, b) = self.window();
        let n = if self.is_constant_on(a, b) { 0 } else { samples.max(1) };
        let mut g: f64 = 1.0;
        for k in 0..=n {
            let t = if n == 0 { a } else { a + (b - a) * k as f64 / n as f64 };
            let spec = spectral::diagonalize(&self.h(t))?;
            let raw = spec
                .gap_raw
                .ok_or_else(|| NeassError::Gap(format!("no spectral gap above the ground sector at t = {t}")))?;
            g = g.min(raw);
        }
        Ok(g)
    }
}

fn ramped_interaction(terms: &[ScheduleTerm], t: f64) -> Interaction {
    let mut out = Interaction::new();
    for term in terms {
        let c = term.ramp.value(t);
        if c != 0.0 {
            out.add_term(term.sites.clone(), linalg::scale_real(&term.matrix, c));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caralg::LatticeGeometry;

    fn hopping(space: &FockSpace, x: usize, y: usize) -> Matrix {
        let a = space.creation(x, 0) * space.annihilation(y, 0);
        -(&a + a.adjoint())
    }

    fn two_site(ramp: Ramp) -> Schedule {
        let space = FockSpace::new(LatticeGeometry::chain(2, 1).unwrap()).unwrap();
        let h = vec![ScheduleTerm { sites: vec![0, 1], matrix: hopping(&space, 0, 1), ramp }];
        let p = vec![ScheduleTerm { sites: vec![0], matrix: space.number(0), ramp: Ramp::constant(1.0) }];
        Schedule::new(space, h, p, None, (0.0, 1.0), None).unwrap()
    }

    #[test]
    fn derivative_matches_ramp() {
        let s = two_site(Ramp::Linear { offset: 1.0, slope: 0.5 });
        let d = s.h_derivative(0.3, 1);
        let expect = linalg::scale_real(&s.h(0.0), 0.5);
        assert!(linalg::max_abs(&(&d - &expect)) < 1e-15);
        assert!(!s.is_constant());
        assert!(s.frozen(0.2).is_constant());
    }

    #[test]
    fn generator_includes_scaled_perturbation() {
        let s = two_site(Ramp::constant(1.0));
        let g = s.generator(0.25);
        let m = g.derivative(s.dim(), 0.0, 0);
        let expect = &s.h(0.0) + linalg::scale_real(&s.perturbation(0.0), 0.25);
        assert!(linalg::max_abs(&(&m - &expect)) < 1e-15);
    }

    #[test]
    fn rejects_non_gauge_invariant_term() {
        let space = FockSpace::new(LatticeGeometry::chain(2, 1).unwrap()).unwrap();
        let bad = &space.creation(0, 0) + &space.annihilation(0, 0);
        let h = vec![ScheduleTerm { sites: vec![0], matrix: bad, ramp: Ramp::constant(1.0) }];
        assert!(matches!(Schedule::new(space, h, vec![], None, (0.0, 1.0), None), Err(NeassError::Validation(_))));
    }

    #[test]
    fn localization_check() {
        let space = FockSpace::new(LatticeGeometry::chain(3, 1).unwrap()).unwrap();
        let h = vec![ScheduleTerm {
            sites: vec![1, 2],
            matrix: hopping(&space, 1, 2),
            ramp: Ramp::Linear { offset: 1.0, slope: 1.0 },
        }];
        let s = Schedule::new(space.clone(), h.clone(), vec![], None, (0.0, 1.0), Some(vec![0, 1])).unwrap();
        assert!(s.check_localization().is_err());
        let s = Schedule::new(space, h, vec![], None, (0.0, 1.0), Some(vec![1, 2])).unwrap();
        assert!(s.check_localization().is_ok());
    }

    #[test]
    fn closed_gap_is_reported() {
        // A zero Hamiltonian: every state is a ground state.
        let space = FockSpace::new(LatticeGeometry::chain(1, 1).unwrap()).unwrap();
        let h = vec![ScheduleTerm { sites: vec![0], matrix: space.zero(), ramp: Ramp::constant(1.0) }];
        let s = Schedule::new(space, h, vec![], None, (0.0, 1.0), None).unwrap();
        assert!(matches!(s.path_filter_gap(4), Err(NeassError::Gap(_))));
    }
}
