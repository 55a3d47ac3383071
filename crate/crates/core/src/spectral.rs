//! Exact diagonalization, the filter function `Ŵ`, the inverse Liouvillian
//! and the off-diagonal part, all as spectral maps in the eigenbasis of `H`.
//!
//! With `Δ = E' - E` the two kernels are
//!
//! ```text
//! I(B)_{EE'}  = -√(2π) Ŵ(Δ) / (E - E') · B_{EE'}
//! OD(B)_{EE'} =  i √(2π) Ŵ(Δ) · B_{EE'}
//! ```
//!
//! and both vanish on degenerate pairs, so `-i[H, I(B)] = OD(B)` holds
//! entry by entry.

use rand::Rng;
use serde::Serialize;

use crate::caralg::{FockSpace, OperatorKind};
use crate::dynamics::Schedule;
use crate::error::{NeassError, Result};
use crate::interaction::{Interaction, ZeroChain};
use crate::linalg::{self, Matrix, C64, ZERO};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Relative tolerance deciding that two eigenvalues are degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, phase-fixed.
    pub eigenvectors: Matrix,
    pub ground_dim: usize,
    /// `E_{ground_dim} - E_0`, `None` if the spectrum is a single level.
    pub gap_raw: Option<f64>,
    pub degeneracy_tol: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `g = min(g_raw, 1)`
    pub fn effective_gap(&self) -> Option<f64> {
        self.gap_raw.map(|g| g.min(1.0))
    }

    pub fn require_gap(&self) -> Result<f64> {
        match self.effective_gap() {
            Some(g) if g > 0.0 => Ok(g),
            _ => Err(NeassError::Gap("the spectrum has no gap above the ground sector".into())),
        }
    }

    /// The ground-sector eigenvectors as a `dim x ground_dim` matrix.
    pub fn ground_vectors(&self) -> Matrix {
        let n = self.dim();
        Matrix::from_fn(n, self.ground_dim, |i, j| self.eigenvectors[(i, j)])
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `V^† B V`
    pub fn to_eigenbasis(&self, b: &Matrix) -> Matrix {
        linalg::conjugate_adjoint(&self.eigenvectors, b)
    }

    /// `V B V^†`
    pub fn from_eigenbasis(&self, b: &Matrix) -> Matrix {
        linalg::conjugate(&self.eigenvectors, b)
    }

    fn degenerate(&self, r: usize, c: usize) -> bool {
        (self.eigenvalues[r] - self.eigenvalues[c]).abs() <= self.degeneracy_tol
    }

    /// Applies a kernel `k(E, E')` entrywise in the eigenbasis; degenerate
    /// pairs are mapped to zero.
    pub fn apply_kernel(&self, b: &Matrix, kernel: impl Fn(f64, f64) -> C64) -> Matrix {
        let bt = self.to_eigenbasis(b);
        let n = self.dim();
        let out = Matrix::from_fn(n, n, |r, c| {
            if self.degenerate(r, c) {
                ZERO
            } else {
                kernel(self.eigenvalues[r], self.eigenvalues[c]) * bt[(r, c)]
            }
        });
        self.from_eigenbasis(&out)
    }
}

/// Full eigendecomposition with deterministic ordering and phases.
///
/// Eigenvalues ascend; each eigenvector's largest-magnitude component is made
/// real positive; inside an exactly degenerate cluster the vectors are sorted
/// lexicographically on their components rounded to 1e-8.
pub fn diagonalize(h: &Matrix) -> Result<SpectralData> {
    let scale = linalg::max_abs(h).max(1.0);
    if linalg::hermitian_deviation(h) > 1e-10 * scale {
        return Err(NeassError::Validation("diagonalize needs a self-adjoint matrix".into()));
    }
    let hh = linalg::hermitian_part(h);
    let (vals, mut vecs) = linalg::eigh(&hh);
    let n = vals.len();
    for j in 0..n {
        let col = vecs.col_as_slice(j);
        let max = col.iter().fold(0.0f64, |m, x| m.max(x.norm()));
        let pivot = col.iter().position(|x| x.norm() >= max * (1.0 - 1e-9)).unwrap_or(0);
        let phase = col[pivot].conj() / col[pivot].norm();
        for x in vecs.col_as_slice_mut(j) {
            *x *= phase;
        }
    }
    let norm = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = DEGENERACY_RTOL * norm.max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[end] - vals[start] <= tol {
            end += 1;
        }
        if end - start > 1 {
            let key = |j: usize| -> Vec<(i64, i64)> {
                vecs.col_as_slice(j)
                    .iter()
                    .map(|x| ((x.re * 1e8).round() as i64, (x.im * 1e8).round() as i64))
                    .collect()
            };
            order[start..end].sort_by_key(|&j| key(j));
        }
        start = end;
    }
    let eigenvectors = Matrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    let eigenvalues: Vec<f64> = order.iter().map(|&j| vals[j]).collect();
    let ground_dim = eigenvalues.iter().take_while(|&&e| e - eigenvalues[0] <= tol).count();
    let gap_raw = (ground_dim < n).then(|| eigenvalues[ground_dim] - eigenvalues[0]);
    Ok(SpectralData { eigenvalues, eigenvectors, ground_dim, gap_raw, degeneracy_tol: tol })
}

/// Odd filter with `Ŵ(k) = -i / (√(2π) k)` for `|k| >= g`, linear inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FilterFunction {
    pub gap: f64,
}

impl FilterFunction {
    pub fn new(gap: f64) -> Result<Self> {
        if gap > 0.0 && gap.is_finite() {
            Ok(Self { gap })
        } else {
            Err(NeassError::Gap(format!("filter gap must be positive, got {gap}")))
        }
    }

    /// Filter for the effective gap of `spec`.
    pub fn for_spectrum(spec: &SpectralData) -> Result<Self> {
        Self::new(spec.require_gap()?)
    }

    pub fn hat(&self, k: f64) -> C64 {
        let g = self.gap;
        if k.abs() >= g {
            C64::new(0.0, -1.0 / (SQRT_2PI * k))
        } else {
            C64::new(0.0, -k / (SQRT_2PI * g * g))
        }
    }
}

pub fn filter_hat(filter: &FilterFunction, k: f64) -> C64 {
    filter.hat(k)
}

/// Inverse Liouvillian of `B = L_Ψ H` with the filter of the spectrum's own gap.
pub fn inverse_liouvillian(spec: &SpectralData, b: &Matrix) -> Result<Matrix> {
    Ok(inverse_liouvillian_with(spec, &FilterFunction::for_spectrum(spec)?, b))
}

pub fn inverse_liouvillian_with(spec: &SpectralData, filter: &FilterFunction, b: &Matrix) -> Matrix {
    spec.apply_kernel(b, |e, ep| filter.hat(ep - e) * (-SQRT_2PI / (e - ep)))
}

/// Off-diagonal part of `B = L_Ψ H`; for self-adjoint `Ψ` it is the global
/// operator of `Ψ^OD`.
pub fn off_diagonal_part(spec: &SpectralData, b: &Matrix) -> Result<Matrix> {
    Ok(off_diagonal_part_with(spec, &FilterFunction::for_spectrum(spec)?, b))
}

pub fn off_diagonal_part_with(spec: &SpectralData, filter: &FilterFunction, b: &Matrix) -> Matrix {
    spec.apply_kernel(b, |e, ep| filter.hat(ep - e) * C64::new(0.0, SQRT_2PI))
}

/// Per-anchor quasi-local decomposition of `I(Ψ)`.
///
/// For each anchor `x` of the zero chain of `H`, `I_x = I([Ψ, H_x])` is split
/// into the telescoping terms `(E_{B_k(x)} - E_{B_{k-1}(x)}) I_x` placed on
/// `B_k(x)`. The terms of one anchor sum back to `I_x` exactly, and all
/// anchors together give `I([Ψ, H])`.
pub fn inverse_liouvillian_interaction(
    space: &FockSpace,
    spec: &SpectralData,
    filter: &FilterFunction,
    psi_global: &Matrix,
    h_chain: &ZeroChain,
) -> Interaction {
    let geo = space.geometry();
    let mut out = Interaction::new();
    for (&x, hx) in &h_chain.pieces {
        let ix = inverse_liouvillian_with(spec, filter, &linalg::commutator(psi_global, hx));
        let mut prev: Option<Matrix> = None;
        let mut prev_ball: Vec<usize> = Vec::new();
        for k in 0..=geo.diameter() {
            let ball = geo.ball(x, k);
            if ball == prev_ball {
                continue;
            }
            let ek = if ball.len() == geo.num_sites() {
                ix.clone()
            } else {
                crate::caralg::conditional_expectation(space, &ix, &ball)
            };
            let term = match &prev {
                Some(p) => &ek - p,
                None => ek.clone(),
            };
            if !linalg::is_zero(&term) {
                out.add_term(ball.clone(), term);
            }
            let full = ball.len() == geo.num_sites();
            prev = Some(ek);
            prev_ball = ball;
            if full {
                break;
            }
        }
    }
    out
}

/// Ground-sector state `ω(A) = tr(ρ A)` with `ρ = Σ_j w_j |ψ_j><ψ_j|`.
#[derive(Clone, Debug)]
pub struct GroundStateFunctional {
    /// `dim x k` matrix of orthonormal state vectors.
    pub vectors: Matrix,
    pub weights: Vec<f64>,
}

impl GroundStateFunctional {
    /// Normalized projector onto the ground sector.
    pub fn ground_projector(spec: &SpectralData) -> Self {
        let k = spec.ground_dim;
        Self { vectors: spec.ground_vectors(), weights: vec![1.0 / k as f64; k] }
    }

    /// Pure state of a single normalized vector.
    pub fn vector_state(psi: Matrix) -> Self {
        assert_eq!(psi.ncols(), 1);
        Self { vectors: psi, weights: vec![1.0] }
    }

    pub fn mixture(vectors: Matrix, weights: Vec<f64>) -> Self {
        assert_eq!(vectors.ncols(), weights.len());
        Self { vectors, weights }
    }

    pub fn expectation(&self, a: &Matrix) -> C64 {
        let av = a * &self.vectors;
        let mut acc = ZERO;
        for (j, w) in self.weights.iter().enumerate() {
            let v = self.vectors.col_as_slice(j);
            let avj = av.col_as_slice(j);
            let dot: C64 = v.iter().zip(avj).map(|(x, y)| x.conj() * y).sum();
            acc += dot * *w;
        }
        acc
    }

    pub fn density_matrix(&self) -> Matrix {
        let n = self.vectors.nrows();
        let mut rho = Matrix::zeros(n, n);
        for (j, w) in self.weights.iter().enumerate() {
            let v = self.vectors.col_as_slice(j);
            for c in 0..n {
                for r in 0..n {
                    rho[(r, c)] += v[r] * v[c].conj() * *w;
                }
            }
        }
        rho
    }
}

/// `ω(A^* L_H A) - g (ω(A^* A) - |ω(A)|^2)`
pub fn gap_condition_slack(omega: &GroundStateFunctional, h: &Matrix, g: f64, a: &Matrix) -> f64 {
    let adj = linalg::adjoint(a);
    let lhs = omega.expectation(&(&adj * &linalg::commutator(h, a))).re;
    let var = omega.expectation(&(&adj * a)).re - omega.expectation(a).norm_sqr();
    lhs - g * var
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub samples: usize,
    pub min_slack: f64,
    pub slacks: Vec<f64>,
}

/// Evaluates the gap inequality on `samples` random local operators.
pub fn gap_condition_check<R: Rng + ?Sized>(
    space: &FockSpace,
    omega: &GroundStateFunctional,
    h: &Matrix,
    g: f64,
    samples: usize,
    rng: &mut R,
) -> GapReport {
    let slacks: Vec<f64> = (0..samples)
        .map(|_| {
            let region = random_region(space, rng, 3);
            let a = space.random_local_operator(rng, &region, OperatorKind::Any);
            gap_condition_slack(omega, h, g, &a)
        })
        .collect();
    let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    GapReport { gap: g, samples, min_slack, slacks }
}

/// A random connected-ish region: a random site and its nearest neighbours,
/// `1..=max_sites` sites in total.
pub fn random_region<R: Rng + ?Sized>(space: &FockSpace, rng: &mut R, max_sites: usize) -> Vec<usize> {
    let geo = space.geometry();
    let n = geo.num_sites();
    let x = rng.random_range(0..n);
    let size = rng.random_range(1..=max_sites.min(n));
    let mut by_distance: Vec<usize> = (0..n).collect();
    by_distance.sort_by_key(|&y| (geo.distance(x, y), y));
    let mut region: Vec<usize> = by_distance.into_iter().take(size).collect();
    region.sort_unstable();
    region
}

/// `|d/dt ω_t(A) + i ω_t([I(Ḣ_t), A])|` with a central difference of step `h`
/// for the ground-projector states `ω_t` of the schedule.
pub fn spectral_flow_check(schedule: &Schedule, t: f64, a: &Matrix, h: f64) -> Result<f64> {
    let state_at = |s: f64| -> Result<C64> {
        let spec = diagonalize(&schedule.h(s))?;
        spec.require_gap()?;
        Ok(GroundStateFunctional::ground_projector(&spec).expectation(a))
    };
    let lhs = (state_at(t + h)? - state_at(t - h)?) / (2.0 * h);
    let hm = schedule.h(t);
    let spec = diagonalize(&hm)?;
    let filter = FilterFunction::for_spectrum(&spec)?;
    let ih = inverse_liouvillian_with(&spec, &filter, &linalg::commutator(&schedule.h_derivative(t, 1), &hm));
    let omega = GroundStateFunctional::ground_projector(&spec);
    let rhs = omega.expectation(&linalg::commutator(&ih, a)) * C64::new(0.0, 1.0);
    Ok((lhs + rhs).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caralg::LatticeGeometry;
    use crate::linalg::{max_abs, I};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_level() -> SpectralData {
        diagonalize(&linalg::diagonal(&[0.0, 1.0])).unwrap()
    }

    fn unit(r: usize, c: usize) -> Matrix {
        Matrix::from_fn(2, 2, |i, j| if (i, j) == (r, c) { C64::new(1.0, 0.0) } else { ZERO })
    }

    #[test]
    fn filter_values() {
        let f = FilterFunction::new(0.5).unwrap();
        let k = 1.0;
        assert!((f.hat(k) - C64::new(0.0, -1.0 / (SQRT_2PI * k))).norm() < 1e-15);
        assert_eq!(f.hat(0.0), ZERO);
        for k in [0.1, 0.3, 0.5, 2.0] {
            assert!((f.hat(-k) + f.hat(k)).norm() < 1e-15);
        }
        let below = f.hat(0.5 - 1e-12);
        assert!((below - f.hat(0.5)).norm() < 1e-10);
        assert!(FilterFunction::new(0.0).is_err());
    }

    #[test]
    fn two_level_hand_values() {
        let spec = two_level();
        assert_eq!(spec.ground_dim, 1);
        assert_eq!(spec.effective_gap(), Some(1.0));
        let b = unit(0, 1);
        let ib = inverse_liouvillian(&spec, &b).unwrap();
        assert!(max_abs(&(&ib - &linalg::scale(&b, -I))) < 1e-15);
        let od = off_diagonal_part(&spec, &b).unwrap();
        assert!(max_abs(&(&od - &b)) < 1e-15);
        // Ψ = σx: B = [σx, H], I(B) = σy and the corrected term vanishes.
        let sx = &unit(0, 1) + &unit(1, 0);
        let h = linalg::diagonal(&[0.0, 1.0]);
        let bx = linalg::commutator(&sx, &h);
        let sy = Matrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => ZERO,
        });
        assert!(max_abs(&(&inverse_liouvillian(&spec, &bx).unwrap() - &sy)) < 1e-15);
        assert!(max_abs(&(&off_diagonal_part(&spec, &bx).unwrap() - &sx)) < 1e-15);
    }

    #[test]
    fn diagonal_inputs_are_annihilated() {
        let spec = two_level();
        let d = linalg::diagonal(&[0.3, -2.0]);
        assert_eq!(max_abs(&inverse_liouvillian(&spec, &d).unwrap()), 0.0);
        assert_eq!(max_abs(&off_diagonal_part(&spec, &d).unwrap()), 0.0);
    }

    #[test]
    fn degenerate_spectrum_has_no_gap() {
        let spec = diagonalize(&linalg::zeros(4)).unwrap();
        assert_eq!(spec.ground_dim, 4);
        assert!(spec.gap_raw.is_none());
        assert!(matches!(inverse_liouvillian(&spec, &linalg::identity(4)), Err(NeassError::Gap(_))));
        assert!(diagonalize(&linalg::scale(&linalg::identity(2), I)).is_err());
    }

    #[test]
    fn onsite_spectrum_is_sum_of_occupied_potentials() {
        let space = FockSpace::new(LatticeGeometry::chain(3, 1).unwrap()).unwrap();
        let v = [0.5, -1.0, 2.0];
        let mut h = space.zero();
        for (x, vx) in v.iter().enumerate() {
            linalg::add_scaled_real(&mut h, *vx, &space.number(x));
        }
        let spec = diagonalize(&h).unwrap();
        let mut expect: Vec<f64> =
            (0..8usize).map(|b| (0..3).filter(|x| b >> x & 1 == 1).map(|x| v[x]).sum()).collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in spec.eigenvalues.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_site_hopping_single_particle_energies() {
        // -(a*_1 a_2 + h.c.): one-particle sector has energies -1, +1, the
        // empty and full states sit at 0.
        let space = FockSpace::new(LatticeGeometry::chain(2, 1).unwrap()).unwrap();
        let hop = space.creation(0, 0) * space.annihilation(1, 0);
        let h = linalg::scale_real(&(&hop + &linalg::adjoint(&hop)), -1.0);
        let spec = diagonalize(&h).unwrap();
        let expect = [-1.0, 0.0, 0.0, 1.0];
        for (a, b) in spec.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(spec.ground_dim, 1);
        assert!((spec.gap_raw.unwrap() - 1.0).abs() < 1e-14);
        let v = &h * &spec.eigenvectors;
        let w = Matrix::from_fn(4, 4, |i, j| spec.eigenvectors[(i, j)] * spec.eigenvalues[j]);
        assert!(max_abs(&(&v - &w)) < 1e-12);
    }

    #[test]
    fn identity_and_self_adjointness_on_random_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = linalg::random_hermitian(&mut rng, 16);
        let spec = diagonalize(&h).unwrap();
        for _ in 0..5 {
            let b = linalg::random_complex_matrix(&mut rng, 16, 16);
            let ib = inverse_liouvillian(&spec, &b).unwrap();
            let lhs = linalg::scale(&linalg::commutator(&h, &ib), -I);
            let od = off_diagonal_part(&spec, &b).unwrap();
            assert!(linalg::op_norm(&(&lhs - &od)) < 1e-10 * linalg::op_norm(&b));
        }
        let psi = linalg::random_hermitian(&mut rng, 16);
        let bpsi = linalg::commutator(&psi, &h);
        assert!(linalg::hermitian_deviation(&inverse_liouvillian(&spec, &bpsi).unwrap()) < 1e-12);
        assert!(linalg::hermitian_deviation(&off_diagonal_part(&spec, &bpsi).unwrap()) < 1e-12);
        // OD kills anything commuting with H.
        let f = &linalg::scale_real(&h, 2.0) + &(&h * &h);
        assert!(max_abs(&off_diagonal_part(&spec, &linalg::commutator(&f, &h)).unwrap()) < 1e-10);
    }

    #[test]
    fn gap_condition_holds_and_fails_as_expected() {
        let space = FockSpace::new(LatticeGeometry::chain(2, 1).unwrap()).unwrap();
        let hop = space.creation(0, 0) * space.annihilation(1, 0);
        let h = &linalg::scale_real(&(&hop + &linalg::adjoint(&hop)), -1.0)
            + &linalg::scale_real(&space.total_number(), 0.5);
        let spec = diagonalize(&h).unwrap();
        let omega = GroundStateFunctional::ground_projector(&spec);
        let g = spec.gap_raw.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let report = gap_condition_check(&space, &omega, &h, g, 50, &mut rng);
        assert!(report.min_slack >= -1e-10);
        assert!(gap_condition_slack(&omega, &h, g, &space.identity()).abs() < 1e-12);
        // Transition operator to the first excited state violates g' > g.
        let v = &spec.eigenvectors;
        let e1 = spec.ground_dim;
        let t = Matrix::from_fn(4, 4, |r, c| v[(r, e1)] * v[(c, 0)].conj());
        assert!(gap_condition_slack(&omega, &h, g * 1.5, &t) < -1e-3);
    }

    #[test]
    fn interaction_decomposition_reconstructs() {
        use crate::interaction::{zero_chain, Interaction};
        let space = FockSpace::new(LatticeGeometry::chain(4, 1).unwrap()).unwrap();
        let mut h_int = Interaction::new();
        for x in 0..3 {
            let hop = space.creation(x, 0) * space.annihilation(x + 1, 0);
            let t = if x % 2 == 0 { 1.3 } else { 0.7 };
            h_int.add_term(vec![x, x + 1], linalg::scale_real(&(&hop + &linalg::adjoint(&hop)), -t));
        }
        let h = h_int.global(&space);
        let spec = diagonalize(&h).unwrap();
        let filter = FilterFunction::for_spectrum(&spec).unwrap();
        let chain = zero_chain(&space, &h_int);
        let psi = &space.number(1) * &space.number(2);
        let it = inverse_liouvillian_interaction(&space, &spec, &filter, &psi, &chain);
        let global = inverse_liouvillian_with(&spec, &filter, &linalg::commutator(&psi, &h));
        assert!(max_abs(&(&it.global(&space) - &global)) < 1e-12);
        it.validate(&space).unwrap();
        let zero = inverse_liouvillian_interaction(&space, &spec, &filter, &space.zero(), &chain);
        assert!(zero.is_empty());
    }

    fn ramped_chain(ramp: crate::dynamics::Ramp, with_number: bool) -> Schedule {
        use crate::dynamics::{Ramp, ScheduleTerm};
        let space = FockSpace::new(LatticeGeometry::chain(4, 1).unwrap()).unwrap();
        let mut h = Vec::new();
        for x in 0..3 {
            let a = space.creation(x, 0) * space.annihilation(x + 1, 0);
            let r = if x == 1 && !with_number { ramp.clone() } else { Ramp::constant(if x == 1 { 0.6 } else { 1.0 }) };
            h.push(ScheduleTerm { sites: vec![x, x + 1], matrix: -(&a + a.adjoint()), ramp: r });
        }
        if with_number {
            for x in 0..4 {
                h.push(ScheduleTerm { sites: vec![x], matrix: space.number(x), ramp: ramp.clone() });
            }
        }
        h.push(ScheduleTerm {
            sites: vec![0],
            matrix: linalg::scale_real(&space.number(0), 0.3),
            ramp: Ramp::constant(1.0),
        });
        Schedule::new(space, h, vec![], None, (0.0, 1.0), None).unwrap()
    }

    #[test]
    fn spectral_flow_matches_derivative_of_ground_state() {
        use crate::dynamics::Ramp;
        let smooth = Ramp::Smoothstep { t0: 0.0, t1: 1.0, from: 0.6, to: 1.4 };
        let s = ramped_chain(smooth.clone(), false);
        let space = s.space();
        let a = &space.creation(1, 0) * &space.annihilation(2, 0);
        let a = &a + &linalg::adjoint(&a);
        let r1 = spectral_flow_check(&s, 0.4, &a, 1e-3).unwrap();
        let r2 = spectral_flow_check(&s, 0.4, &a, 5e-4).unwrap();
        assert!(r1 <= 1e-5 * linalg::op_norm(&a), "{r1}");
        assert!(r2 < r1 / 2.0 || r2 < 1e-10, "{r1} {r2}");

        let frozen = s.frozen(0.4);
        assert!(spectral_flow_check(&frozen, 0.4, &a, 1e-3).unwrap() < 1e-12);
        // A chemical-potential ramp commutes with everything gauge-invariant.
        let mu = ramped_chain(Ramp::Linear { offset: 0.0, slope: 0.05 }, true);
        assert!(spectral_flow_check(&mu, 0.4, &a, 1e-3).unwrap() < 1e-10);
    }
}
