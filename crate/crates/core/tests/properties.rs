//! Randomized checks of the algebraic laws and quasi-locality bounds.

use neass_core::caralg::{self, FockSpace, LatticeGeometry, OperatorKind, Parity};
use neass_core::interaction::{self, bounds, Interaction, LipschitzPotential};
use neass_core::linalg::{self, Matrix, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(sites: usize, flavors: usize) -> FockSpace {
    FockSpace::new(LatticeGeometry::chain(sites, flavors).unwrap()).unwrap()
}

/// Chains with at most six modes: (sites, flavors).
fn geometry() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![Just((2, 1)), Just((3, 1)), Just((4, 1)), Just((5, 1)), Just((6, 1)), Just((2, 2)), Just((3, 2))]
}

/// A non-empty proper or full site subset encoded as a bitmask.
fn subset_of(mask: u32, sites: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..sites).filter(|x| mask & (1 << x) != 0).collect();
    if s.is_empty() {
        s.push(mask as usize % sites);
    }
    s
}

fn diff(a: &Matrix, b: &Matrix) -> f64 {
    linalg::max_abs(&(a - b))
}

fn all_sites(space: &FockSpace) -> Vec<usize> {
    (0..space.num_sites()).collect()
}

/// Random finite-range interaction with Hermitian gauge-invariant terms on
/// singletons, nearest-neighbour pairs and some next-nearest pairs.
fn random_interaction(space: &FockSpace, rng: &mut ChaCha8Rng) -> Interaction {
    let n = space.num_sites();
    let mut phi = Interaction::new();
    for x in 0..n {
        let mut add = |sites: Vec<usize>, rng: &mut ChaCha8Rng| {
            let amp = rng.random_range(0.1..1.0);
            let op = space.random_local_operator(rng, &sites, OperatorKind::HermitianGaugeInvariant);
            phi.add_term(sites, linalg::scale_real(&op, amp));
        };
        add(vec![x], rng);
        if x + 1 < n {
            add(vec![x, x + 1], rng);
        }
        if x + 2 < n && rng.random_bool(0.5) {
            add(vec![x, x + 2], rng);
        }
    }
    phi
}

fn random_potential(space: &FockSpace, rng: &mut ChaCha8Rng) -> LipschitzPotential {
    LipschitzPotential::new((0..space.num_sites()).map(|_| rng.random_range(-1.0..1.0)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn conditional_expectation_is_the_trace_preserving_projection(
        (sites, flavors) in geometry(), mask in 1u32..64, seed in any::<u64>()
    ) {
        let sp = space(sites, flavors);
        let region = subset_of(mask, sites);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Any);
        let b = sp.random_local_operator(&mut rng, &region, OperatorKind::Any);
        let e = caralg::conditional_expectation(&sp, &a, &region);
        let lhs = linalg::trace_of_product(&a, &b);
        let rhs = linalg::trace_of_product(&e, &b);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * sp.dim() as f64);
        // Idempotent and the identity on A_M.
        prop_assert!(diff(&caralg::conditional_expectation(&sp, &e, &region), &e) < 1e-12);
        prop_assert!(diff(&caralg::conditional_expectation(&sp, &b, &region), &b) < 1e-12);
    }

    #[test]
    fn conditional_expectation_is_a_bimodule_map(
        (sites, flavors) in geometry(), mask in 1u32..64, seed in any::<u64>()
    ) {
        let sp = space(sites, flavors);
        let region = subset_of(mask, sites);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sp.random_local_operator(&mut rng, &region, OperatorKind::Any);
        let c = sp.random_local_operator(&mut rng, &region, OperatorKind::Any);
        let b = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Any);
        let lhs = caralg::conditional_expectation(&sp, &(&a * &b * &c), &region);
        let rhs = &a * caralg::conditional_expectation(&sp, &b, &region) * &c;
        prop_assert!(diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn conditional_expectations_compose_to_the_intersection(
        (sites, flavors) in geometry(), m1 in 1u32..64, m2 in 1u32..64, seed in any::<u64>()
    ) {
        let sp = space(sites, flavors);
        let r1 = subset_of(m1, sites);
        let r2 = subset_of(m2, sites);
        let inter: Vec<usize> = r1.iter().copied().filter(|x| r2.contains(x)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Any);
        let composed = caralg::conditional_expectation(&sp, &caralg::conditional_expectation(&sp, &a, &r2), &r1);
        let direct = if inter.is_empty() {
            linalg::scale(&sp.identity(), caralg::tracial_state(&a))
        } else {
            caralg::conditional_expectation(&sp, &a, &inter)
        };
        prop_assert!(diff(&composed, &direct) < 1e-12);
    }

    #[test]
    fn conditional_expectation_is_positive_unital_and_contractive(
        (sites, flavors) in geometry(), mask in 1u32..64, seed in any::<u64>()
    ) {
        let sp = space(sites, flavors);
        let region = subset_of(mask, sites);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Any);
        let pos = a.adjoint() * &a;
        let e_pos = caralg::conditional_expectation(&sp, &pos, &region);
        let min = linalg::eigvalsh(&linalg::hermitian_part(&e_pos)).into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-10 * linalg::op_norm(&pos));
        prop_assert!(diff(&caralg::conditional_expectation(&sp, &sp.identity(), &region), &sp.identity()) < 1e-15);
        let e = caralg::conditional_expectation(&sp, &a, &region);
        prop_assert!(linalg::op_norm(&e) <= linalg::op_norm(&a) * (1.0 + 1e-12));
    }

    #[test]
    fn conditional_expectation_preserves_even_operators(
        (sites, flavors) in geometry(), mask in 1u32..64, seed in any::<u64>()
    ) {
        let sp = space(sites, flavors);
        let region = subset_of(mask, sites);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Even);
        let e = caralg::conditional_expectation(&sp, &a, &region);
        prop_assert!(caralg::parity_of(&e) != Parity::Odd);
        prop_assert!(caralg::parity_of(&e) != Parity::Mixed);
    }

    #[test]
    fn commutators_of_localized_operators_obey_the_decay_bound(
        sites in 3usize..7, nu in 0u32..3, m in 0u32..3, seed in any::<u64>()
    ) {
        let sp = space(sites, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = rng.random_range(0..sites);
        let x = rng.random_range(0..sites);
        // Each operator is a sum of a local piece and a weaker piece spread out further.
        let localized = |c: usize, rng: &mut ChaCha8Rng| {
            let near: Vec<usize> = (c.saturating_sub(1)..(c + 2).min(sites)).collect();
            let far: Vec<usize> = (c.saturating_sub(2)..(c + 3).min(sites)).collect();
            let mut op = sp.random_local_operator(rng, &[c], OperatorKind::Even);
            linalg::add_scaled_real(&mut op, 0.3, &sp.random_local_operator(rng, &near, OperatorKind::Even));
            linalg::add_scaled_real(&mut op, 0.05, &sp.random_local_operator(rng, &far, OperatorKind::Even));
            op
        };
        let a = localized(y, &mut rng);
        let b = localized(x, &mut rng);
        let lhs = linalg::op_norm(&linalg::commutator(&a, &b));
        let a_n = caralg::localization_norm(&sp, &a, nu + m, y);
        let b_n = caralg::localization_norm(&sp, &b, nu + m, x);
        let rhs = bounds::commutator_bound(nu, m, a_n, b_n, sp.geometry().distance(x, y));
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }

    #[test]
    fn zero_chain_pieces_are_bounded_by_the_interaction_norm(
        (sites, flavors) in geometry(), nu in 0u32..4, seed in any::<u64>()
    ) {
        let sp = space(sites, flavors);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_interaction(&sp, &mut rng);
        let chain = interaction::zero_chain(&sp, &phi);
        prop_assert!(diff(&chain.global(&sp), &phi.global(&sp)) < 1e-12);
        let norm = interaction::interaction_norm(&sp, &phi, nu);
        for x in 0..sites {
            if let Some(px) = chain.get(x) {
                let lhs = caralg::localization_norm(&sp, px, nu, x);
                prop_assert!(lhs <= 3.0 * norm * (1.0 + 1e-12), "site {x}: {lhs} > 3 * {norm}");
            }
        }
    }

    #[test]
    fn commutator_interactions_obey_their_norm_bound(
        sites in 2usize..6, nu in 0u32..3, with_potential in any::<bool>(), seed in any::<u64>()
    ) {
        let sp = space(sites, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_interaction(&sp, &mut rng);
        let phi = random_interaction(&sp, &mut rng);
        let v = with_potential.then(|| random_potential(&sp, &mut rng));
        let comm = interaction::commutator_interaction(&sp, &psi, v.as_ref(), &phi).unwrap();
        // The interaction sums to the global commutator.
        let mut h = psi.global(&sp);
        if let Some(v) = &v {
            h += v.global(&sp);
        }
        let expect = linalg::scale(&linalg::commutator(&h, &phi.global(&sp)), C64::new(0.0, 1.0));
        prop_assert!(diff(&comm.global(&sp), &expect) < 1e-10);
        let lhs = interaction::interaction_norm(&sp, &comm, nu);
        let rhs = bounds::commutator_interaction_bound(&sp, &psi, v.as_ref(), &phi, nu);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }

    #[test]
    fn sum_representation_matches_and_is_bounded(
        sites in 2usize..6, nu in 0u32..3, with_potential in any::<bool>(), seed in any::<u64>()
    ) {
        let sp = space(sites, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_interaction(&sp, &mut rng);
        let v = with_potential.then(|| random_potential(&sp, &mut rng));
        let x = rng.random_range(0..sites);
        let near: Vec<usize> = (x.saturating_sub(1)..(x + 2).min(sites)).collect();
        let a = sp.random_local_operator(&mut rng, &near, OperatorKind::GaugeInvariant);
        let direct = interaction::liouvillian_apply(&sp, &phi, v.as_ref(), &a);
        let chain = interaction::zero_chain(&sp, &phi);
        let summed = interaction::liouvillian_apply_chain(&sp, &chain, v.as_ref(), &a);
        prop_assert!(diff(&direct, &summed) < 1e-10);
        let lhs = caralg::localization_norm(&sp, &direct, nu, x);
        let rhs = bounds::sum_representation_bound(&sp, &phi, v.as_ref(), &a, nu, x);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }

    #[test]
    fn commutator_interaction_derivation_reorders_over_the_zero_chain(
        sites in 2usize..6, with_potential in any::<bool>(), seed in any::<u64>()
    ) {
        let sp = space(sites, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_interaction(&sp, &mut rng);
        let phi = random_interaction(&sp, &mut rng);
        let v = with_potential.then(|| random_potential(&sp, &mut rng));
        let a = sp.random_local_operator(&mut rng, &all_sites(&sp), OperatorKind::Even);
        let comm = interaction::commutator_interaction(&sp, &psi, v.as_ref(), &phi).unwrap();
        let lhs = interaction::liouvillian_apply(&sp, &comm, None, &a);
        let chain = interaction::zero_chain(&sp, &phi);
        let mut rhs = sp.zero();
        for x in 0..sites {
            if let Some(px) = chain.get(x) {
                let inner = interaction::liouvillian_apply(&sp, &psi, v.as_ref(), px);
                linalg::add_scaled(&mut rhs, C64::new(0.0, 1.0), &linalg::commutator(&inner, &a));
            }
        }
        prop_assert!(diff(&lhs, &rhs) < 1e-10);
    }
}
