//! Seeded randomized checks of the conditional-expectation laws and the
//! quasi-locality inequalities, counted as violations per family.

use neass_core::caralg::{self, FockSpace, LatticeGeometry, OperatorKind, Parity};
use neass_core::interaction::{self, bounds, Interaction, LipschitzPotential};
use neass_core::linalg::{self, Matrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` for inequalities, largest residual for identities.
    pub worst: f64,
}

fn diff(a: &Matrix, b: &Matrix) -> f64 {
    linalg::max_abs(&(a - b))
}

/// Chains with at most six modes.
fn random_space(rng: &mut ChaCha8Rng) -> FockSpace {
    let shapes = [(2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (2, 2), (3, 2)];
    let (sites, flavors) = shapes[rng.random_range(0..shapes.len())];
    FockSpace::new(LatticeGeometry::chain(sites, flavors).expect("valid chain")).expect("small space")
}

fn random_subset(rng: &mut ChaCha8Rng, sites: usize) -> Vec<usize> {
    loop {
        let s: Vec<usize> = (0..sites).filter(|_| rng.random_bool(0.5)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

fn all_sites(space: &FockSpace) -> Vec<usize> {
    (0..space.num_sites()).collect()
}

/// Hermitian gauge-invariant terms on singletons, nearest-neighbour pairs and
/// some next-nearest pairs.
pub fn random_interaction(space: &FockSpace, rng: &mut ChaCha8Rng) -> Interaction {
    let n = space.num_sites();
    let mut phi = Interaction::new();
    for x in 0..n {
        let mut supports = vec![vec![x]];
        if x + 1 < n {
            supports.push(vec![x, x + 1]);
        }
        if x + 2 < n && rng.random_bool(0.5) {
            supports.push(vec![x, x + 2]);
        }
        for sites in supports {
            let amp = rng.random_range(0.1..1.0);
            let op = space.random_local_operator(rng, &sites, OperatorKind::HermitianGaugeInvariant);
            phi.add_term(sites, linalg::scale_real(&op, amp));
        }
    }
    phi
}

fn random_potential(space: &FockSpace, rng: &mut ChaCha8Rng) -> LipschitzPotential {
    LipschitzPotential::new((0..space.num_sites()).map(|_| rng.random_range(-1.0..1.0)).collect())
}

struct Tally {
    name: &'static str,
    instances: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, instances: 0, violations: 0, worst: 0.0 }
    }

    /// Records an identity residual against an absolute tolerance.
    fn identity(&mut self, residual: f64, tol: f64) {
        self.worst = self.worst.max(residual);
        if !(residual <= tol) {
            self.violations += 1;
        }
    }

    /// Records `lhs <= rhs` with a relative rounding allowance.
    fn bound(&mut self, lhs: f64, rhs: f64) {
        if rhs > 0.0 {
            self.worst = self.worst.max(lhs / rhs);
        }
        if !(lhs <= rhs * (1.0 + 1e-12) + 1e-14) {
            self.violations += 1;
        }
    }

    fn finish(self) -> FamilyReport {
        FamilyReport { name: self.name, instances: self.instances, violations: self.violations, worst: self.worst }
    }
}

/// Defining property, bimodule property, tower law, positivity, unitality,
/// contraction and parity preservation of `E_M`.
pub fn conditional_expectation_laws(instances: usize, seed: u64) -> FamilyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("conditional expectation laws");
    for _ in 0..instances {
        t.instances += 1;
        let sp = random_space(&mut rng);
        let n = sp.num_sites();
        let m1 = random_subset(&mut rng, n);
        let m2 = random_subset(&mut rng, n);
        let a = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Any);
        let b = sp.random_local_operator(&mut rng, &m1, OperatorKind::Any);
        let c = sp.random_local_operator(&mut rng, &m1, OperatorKind::Any);
        let e = caralg::conditional_expectation(&sp, &a, &m1);

        let pairing = (linalg::trace_of_product(&a, &b) - linalg::trace_of_product(&e, &b)).norm() / sp.dim() as f64;
        t.identity(pairing, 1e-12);
        let lhs = caralg::conditional_expectation(&sp, &(&b * &a * &c), &m1);
        let rhs = &b * &e * &c;
        t.identity(diff(&lhs, &rhs), 1e-10);

        let inter: Vec<usize> = m1.iter().copied().filter(|x| m2.contains(x)).collect();
        let composed = caralg::conditional_expectation(&sp, &caralg::conditional_expectation(&sp, &a, &m2), &m1);
        let direct = if inter.is_empty() {
            linalg::scale(&sp.identity(), caralg::tracial_state(&a))
        } else {
            caralg::conditional_expectation(&sp, &a, &inter)
        };
        t.identity(diff(&composed, &direct), 1e-12);

        let pos = linalg::adjoint(&a) * &a;
        let e_pos = linalg::hermitian_part(&caralg::conditional_expectation(&sp, &pos, &m1));
        let min = linalg::eigvalsh(&e_pos).into_iter().fold(f64::INFINITY, f64::min);
        t.identity((-min).max(0.0), 1e-10 * linalg::op_norm(&pos));
        t.identity(diff(&caralg::conditional_expectation(&sp, &sp.identity(), &m1), &sp.identity()), 1e-15);
        t.bound(linalg::op_norm(&e), linalg::op_norm(&a));

        let even = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Even);
        let pe = caralg::parity_of(&caralg::conditional_expectation(&sp, &even, &m1));
        t.identity(if pe == Parity::Even { 0.0 } else { 1.0 }, 0.0);
    }
    t.finish()
}

/// `‖[A, B]‖ <= 4^{ν+m+3} ‖A‖_{ν+m,y} ‖B‖_{ν+m,x} / (1 + ‖x - y‖)^m` for even `A, B`.
pub fn commutator_decay(instances: usize, seed: u64) -> FamilyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("commutator decay bound");
    for _ in 0..instances {
        t.instances += 1;
        let sites = rng.random_range(3..7);
        let sp = FockSpace::new(LatticeGeometry::chain(sites, 1).expect("valid chain")).expect("small space");
        let (nu, m) = (rng.random_range(0..3u32), rng.random_range(0..3u32));
        let y = rng.random_range(0..sites);
        let x = rng.random_range(0..sites);
        let mut localized = |c: usize| {
            let near: Vec<usize> = (c.saturating_sub(1)..(c + 2).min(sites)).collect();
            let far: Vec<usize> = (c.saturating_sub(2)..(c + 3).min(sites)).collect();
            let mut op = sp.random_local_operator(&mut rng, &[c], OperatorKind::Even);
            linalg::add_scaled_real(&mut op, 0.3, &sp.random_local_operator(&mut rng, &near, OperatorKind::Even));
            linalg::add_scaled_real(&mut op, 0.05, &sp.random_local_operator(&mut rng, &far, OperatorKind::Even));
            op
        };
        let a = localized(y);
        let b = localized(x);
        let lhs = linalg::op_norm(&linalg::commutator(&a, &b));
        let rhs = bounds::commutator_bound(
            nu,
            m,
            caralg::localization_norm(&sp, &a, nu + m, y),
            caralg::localization_norm(&sp, &b, nu + m, x),
            sp.geometry().distance(x, y),
        );
        t.bound(lhs, rhs);
    }
    t.finish()
}

/// `‖Φ_x‖_{ν,x} <= 3 ‖Φ‖_ν` for every zero-chain piece, and `Σ_x Φ_x = Σ_M Φ(M)`.
pub fn zero_chain_bound(instances: usize, seed: u64) -> FamilyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("zero chain bound");
    for _ in 0..instances {
        t.instances += 1;
        let sp = random_space(&mut rng);
        let nu = rng.random_range(0..4u32);
        let phi = random_interaction(&sp, &mut rng);
        let chain = interaction::zero_chain(&sp, &phi);
        t.identity(diff(&chain.global(&sp), &phi.global(&sp)), 1e-12);
        let norm = interaction::interaction_norm(&sp, &phi, nu);
        for x in 0..sp.num_sites() {
            if let Some(px) = chain.get(x) {
                t.bound(caralg::localization_norm(&sp, px, nu, x), 3.0 * norm);
            }
        }
    }
    t.finish()
}

/// `‖i[Ψ + V, Φ]‖_ν <= 2^{d+2} ‖Ψ‖_{ν+d} ‖Φ‖_{ν+d} + 3 C_v ‖Φ‖_{ν+d+2}`.
pub fn commutator_interaction_bound(instances: usize, seed: u64) -> FamilyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("commutator interaction bound");
    for _ in 0..instances {
        t.instances += 1;
        let sites = rng.random_range(2..6);
        let sp = FockSpace::new(LatticeGeometry::chain(sites, 1).expect("valid chain")).expect("small space");
        let nu = rng.random_range(0..3u32);
        let psi = random_interaction(&sp, &mut rng);
        let phi = random_interaction(&sp, &mut rng);
        let v = rng.random_bool(0.5).then(|| random_potential(&sp, &mut rng));
        let comm = interaction::commutator_interaction(&sp, &psi, v.as_ref(), &phi).expect("self-adjoint inputs");
        let mut h = psi.global(&sp);
        if let Some(v) = &v {
            h += v.global(&sp);
        }
        let expect = linalg::scale(&linalg::commutator(&h, &phi.global(&sp)), C64::new(0.0, 1.0));
        t.identity(diff(&comm.global(&sp), &expect), 1e-10);
        t.bound(
            interaction::interaction_norm(&sp, &comm, nu),
            bounds::commutator_interaction_bound(&sp, &psi, v.as_ref(), &phi, nu),
        );
    }
    t.finish()
}

/// `Σ_M [Φ(M) + V(M), A] = Σ_x [Φ_x + V_x, A]` and the bound on its ν-norm.
pub fn sum_representation(instances: usize, seed: u64) -> FamilyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("sum representation");
    for _ in 0..instances {
        t.instances += 1;
        let sites = rng.random_range(2..6);
        let sp = FockSpace::new(LatticeGeometry::chain(sites, 1).expect("valid chain")).expect("small space");
        let nu = rng.random_range(0..3u32);
        let phi = random_interaction(&sp, &mut rng);
        let v = rng.random_bool(0.5).then(|| random_potential(&sp, &mut rng));
        let x = rng.random_range(0..sites);
        let near: Vec<usize> = (x.saturating_sub(1)..(x + 2).min(sites)).collect();
        let a = sp.random_local_operator(&mut rng, &near, OperatorKind::GaugeInvariant);
        let direct = interaction::liouvillian_apply(&sp, &phi, v.as_ref(), &a);
        let chain = interaction::zero_chain(&sp, &phi);
        let summed = interaction::liouvillian_apply_chain(&sp, &chain, v.as_ref(), &a);
        t.identity(diff(&direct, &summed), 1e-10);
        t.bound(
            caralg::localization_norm(&sp, &direct, nu, x),
            bounds::sum_representation_bound(&sp, &phi, v.as_ref(), &a, nu, x),
        );
    }
    t.finish()
}

/// All families with `instances` draws each.
pub fn all(instances: usize, seed: u64) -> Vec<FamilyReport> {
    vec![
        conditional_expectation_laws(instances, seed),
        commutator_decay(instances, seed.wrapping_add(1)),
        zero_chain_bound(instances, seed.wrapping_add(2)),
        commutator_interaction_bound(instances, seed.wrapping_add(3)),
        sum_representation(instances, seed.wrapping_add(4)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sample_has_no_violations() {
        for r in all(8, 5) {
            assert_eq!(r.instances, 8, "{}", r.name);
            assert_eq!(r.violations, 0, "{}: worst {}", r.name, r.worst);
        }
    }

    #[test]
    fn a_broken_bound_is_counted() {
        let mut t = Tally::new("x");
        t.bound(2.0, 1.0);
        t.identity(1e-3, 1e-6);
        t.identity(0.0, 1e-6);
        assert_eq!(t.violations, 2);
        assert_eq!(t.worst, 2.0);
    }
}
