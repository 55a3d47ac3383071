//! Interactions on a finite lattice: maps from site subsets to local
//! self-adjoint, gauge-invariant operators, plus Lipschitz potentials.
//!
//! Subsets are canonical sorted site-index lists. Every term is stored as a
//! full Fock-space matrix, which keeps commutators and conditional
//! expectations uniform at desk-scale sizes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::caralg::{self, FockSpace, LatticeGeometry};
use crate::error::{NeassError, Result};
use crate::linalg::{self, Matrix, C64, I};

pub type Subset = Vec<usize>;

fn canonical(mut sites: Subset) -> Subset {
    sites.sort_unstable();
    sites.dedup();
    sites
}

/// Map `M -> Φ(M)`. Terms with the same subset are summed on insertion.
#[derive(Clone, Debug, Default)]
pub struct Interaction {
    terms: BTreeMap<Subset, Matrix>,
}

impl Interaction {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds and validates: every term must be self-adjoint, gauge-invariant
    /// and supported in its subset.
    pub fn from_terms(space: &FockSpace, terms: Vec<(Subset, Matrix)>) -> Result<Self> {
        let mut out = Self::new();
        for (sites, m) in terms {
            out.add_term(sites, m);
        }
        out.validate(space)?;
        Ok(out)
    }

    /// Adds `m` to `Φ(sites)` without validation.
    pub fn add_term(&mut self, sites: Subset, m: Matrix) {
        let key = canonical(sites);
        match self.terms.get_mut(&key) {
            Some(existing) => linalg::add_scaled_real(existing, 1.0, &m),
            None => {
                self.terms.insert(key, m);
            }
        }
    }

    pub fn validate(&self, space: &FockSpace) -> Result<()> {
        for (sites, m) in &self.terms {
            if sites.is_empty() {
                return Err(NeassError::Validation("interaction term on the empty set".into()));
            }
            if let Some(&bad) = sites.iter().find(|&&s| s >= space.num_sites()) {
                return Err(NeassError::Validation(format!(
                    "interaction term references site {bad} outside the lattice"
                )));
            }
            let scale = linalg::max_abs(m).max(1.0);
            if linalg::hermitian_deviation(m) > 1e-10 * scale {
                return Err(NeassError::Validation(format!("term on {sites:?} is not self-adjoint")));
            }
            if !caralg::is_gauge_invariant(m) {
                return Err(NeassError::Validation(format!("term on {sites:?} is not gauge-invariant")));
            }
            let e = caralg::conditional_expectation(space, m, sites);
            if linalg::max_abs(&(m - &e)) > 1e-10 * scale {
                return Err(NeassError::Validation(format!("term on {sites:?} is not supported in its subset")));
            }
        }
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Subset, &Matrix)> {
        self.terms.iter()
    }

    pub fn term(&self, sites: &[usize]) -> Option<&Matrix> {
        self.terms.get(sites)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ_M Φ(M)` as one matrix.
    pub fn global(&self, space: &FockSpace) -> Matrix {
        let mut out = space.zero();
        for m in self.terms.values() {
            linalg::add_scaled_real(&mut out, 1.0, m);
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { terms: self.terms.iter().map(|(k, m)| (k.clone(), linalg::scale_real(m, c))).collect() }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, m) in &other.terms {
            out.add_term(k.clone(), m.clone());
        }
        out
    }

    /// Drops terms that are exactly zero.
    pub fn pruned(mut self) -> Self {
        self.terms.retain(|_, m| !linalg::is_zero(m));
        self
    }
}

/// On-site potential `V({x}) = v(x) n_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzPotential {
    pub values: Vec<f64>,
}

impl LipschitzPotential {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// `v(x) = field · x + offset`.
    pub fn linear(geometry: &LatticeGeometry, field: [f64; 2], offset: f64) -> Self {
        let values =
            geometry.sites().iter().map(|c| field[0] * c[0] as f64 + field[1] * c[1] as f64 + offset).collect();
        Self { values }
    }

    /// Smallest `C_v` with `|v(x) - v(y)| <= C_v ‖x - y‖`, found exhaustively.
    pub fn lipschitz_constant(&self, geometry: &LatticeGeometry) -> f64 {
        let n = self.values.len();
        let mut c = 0.0f64;
        for x in 0..n {
            for y in x + 1..n {
                let d = geometry.distance(x, y) as f64;
                c = c.max((self.values[x] - self.values[y]).abs() / d);
            }
        }
        c
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn global(&self, space: &FockSpace) -> Matrix {
        let dim = space.dim();
        let geo = space.geometry();
        let masks: Vec<u64> = (0..geo.num_sites()).map(|x| geo.mode_mask(&[x])).collect();
        let diag: Vec<f64> = (0..dim)
            .map(|b| masks.iter().zip(&self.values).map(|(m, v)| v * ((b as u64) & m).count_ones() as f64).sum())
            .collect();
        linalg::diagonal(&diag)
    }

    /// The potential as an ordinary interaction of singleton terms.
    pub fn as_interaction(&self, space: &FockSpace) -> Interaction {
        let mut out = Interaction::new();
        for (x, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                out.add_term(vec![x], linalg::scale_real(&space.number(x), *v));
            }
        }
        out
    }
}

/// `‖Φ‖_ν = max_x Σ_{M ∋ x} (1 + diam M)^ν ‖Φ(M)‖`
pub fn interaction_norm(space: &FockSpace, phi: &Interaction, nu: u32) -> f64 {
    interaction_norm_table(space, phi, &[nu])[0]
}

/// `‖Φ‖_ν` for several ν, reusing the term norms.
pub fn interaction_norm_table(space: &FockSpace, phi: &Interaction, nus: &[u32]) -> Vec<f64> {
    let geo = space.geometry();
    let terms: Vec<(&Subset, f64, f64)> =
        phi.terms().map(|(m, op)| (m, (1 + geo.diameter_of(m)) as f64, linalg::op_norm(op))).collect();
    nus.iter()
        .map(|&nu| {
            (0..geo.num_sites())
                .map(|x| {
                    terms
                        .iter()
                        .filter(|(m, _, _)| m.binary_search(&x).is_ok())
                        .map(|(_, d, n)| d.powi(nu as i32) * n)
                        .sum::<f64>()
                })
                .fold(0.0f64, f64::max)
        })
        .collect()
}

/// Center `C(M) ∈ M`: the point closest (Euclidean) to the center of mass.
///
/// Ties go to the point larger than the center of mass in d = 1, and to the
/// smallest polar angle of `C(M) - cm(M)` in `[0, 2π)` in d = 2. All
/// comparisons are exact in integers via `|M| x - Σ_M y`.
pub fn center(geometry: &LatticeGeometry, subset: &[usize]) -> Result<usize> {
    if subset.is_empty() {
        return Err(NeassError::Argument("the center of the empty set is undefined".into()));
    }
    let k = subset.len() as i64;
    let mut sum = [0i64; 2];
    for &s in subset {
        let c = geometry.coord(s);
        sum[0] += c[0];
        sum[1] += c[1];
    }
    let offset = |s: usize| {
        let c = geometry.coord(s);
        [k * c[0] - sum[0], k * c[1] - sum[1]]
    };
    let dist2 = |w: [i64; 2]| w[0] * w[0] + w[1] * w[1];
    let best = subset.iter().map(|&s| dist2(offset(s))).min().unwrap_or(0);
    let mut candidates: Vec<usize> = subset.iter().copied().filter(|&s| dist2(offset(s)) == best).collect();
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    if geometry.dimension() == 1 {
        return Ok(*candidates.iter().find(|&&s| offset(s)[0] > 0).unwrap_or(&candidates[0]));
    }
    candidates.sort_by(|&a, &b| polar_order(offset(a), offset(b)));
    Ok(candidates[0])
}

/// Orders nonzero integer vectors by polar angle in `[0, 2π)`.
fn polar_order(a: [i64; 2], b: [i64; 2]) -> std::cmp::Ordering {
    let half = |w: [i64; 2]| if w[1] > 0 || (w[1] == 0 && w[0] > 0) { 0 } else { 1 };
    half(a).cmp(&half(b)).then_with(|| {
        let cross = a[0] * b[1] - a[1] * b[0];
        0.cmp(&cross)
    })
}

/// `x -> Φ_x = Σ_{C(M) = x} Φ(M)`.
#[derive(Clone, Debug, Default)]
pub struct ZeroChain {
    pub pieces: BTreeMap<usize, Matrix>,
}

impl ZeroChain {
    pub fn get(&self, x: usize) -> Option<&Matrix> {
        self.pieces.get(&x)
    }

    pub fn global(&self, space: &FockSpace) -> Matrix {
        let mut out = space.zero();
        for m in self.pieces.values() {
            linalg::add_scaled_real(&mut out, 1.0, m);
        }
        out
    }
}

pub fn zero_chain(space: &FockSpace, phi: &Interaction) -> ZeroChain {
    let mut pieces: BTreeMap<usize, Matrix> = BTreeMap::new();
    for (m, op) in phi.terms() {
        let x = center(space.geometry(), m).expect("interaction subsets are nonempty");
        match pieces.get_mut(&x) {
            Some(acc) => linalg::add_scaled_real(acc, 1.0, op),
            None => {
                pieces.insert(x, op.clone());
            }
        }
    }
    ZeroChain { pieces }
}

/// `L_{Φ+V} A = Σ_M [Φ(M) + V(M), A]`
pub fn liouvillian_apply(
    space: &FockSpace,
    phi: &Interaction,
    potential: Option<&LipschitzPotential>,
    a: &Matrix,
) -> Matrix {
    let mut out = space.zero();
    for (_, op) in phi.terms() {
        linalg::add_scaled_real(&mut out, 1.0, &linalg::commutator(op, a));
    }
    if let Some(v) = potential {
        for (x, vx) in v.values.iter().enumerate() {
            if *vx != 0.0 {
                linalg::add_scaled_real(&mut out, *vx, &number_commutator(space, x, a));
            }
        }
    }
    out
}

/// The same derivation summed over the zero chain: `Σ_x [Φ_x + V_x, A]`.
pub fn liouvillian_apply_chain(
    space: &FockSpace,
    chain: &ZeroChain,
    potential: Option<&LipschitzPotential>,
    a: &Matrix,
) -> Matrix {
    let mut out = space.zero();
    for x in 0..space.num_sites() {
        if let Some(px) = chain.get(x) {
            linalg::add_scaled_real(&mut out, 1.0, &linalg::commutator(px, a));
        }
        if let Some(v) = potential {
            if v.values[x] != 0.0 {
                linalg::add_scaled_real(&mut out, v.values[x], &number_commutator(space, x, a));
            }
        }
    }
    out
}

/// `[n_x, A]` using that `n_x` is diagonal.
fn number_commutator(space: &FockSpace, x: usize, a: &Matrix) -> Matrix {
    let mask = space.geometry().mode_mask(&[x]);
    let occ = |b: usize| ((b as u64) & mask).count_ones() as f64;
    let n = a.nrows();
    Matrix::from_fn(n, n, |r, c| a[(r, c)] * (occ(r) - occ(c)))
}

/// The interaction `i[Φ + V, Ψ](M) = i Σ_{M1 ∪ M2 = M} [Φ(M1) + V(M1), Ψ(M2)]`.
///
/// Pairs with disjoint supports are skipped: all terms are even, so they
/// commute exactly.
pub fn commutator_interaction(
    space: &FockSpace,
    phi: &Interaction,
    potential: Option<&LipschitzPotential>,
    psi: &Interaction,
) -> Result<Interaction> {
    for (name, it) in [("first", phi), ("second", psi)] {
        for (m, op) in it.terms() {
            if linalg::hermitian_deviation(op) > 1e-10 * linalg::max_abs(op).max(1.0) {
                return Err(NeassError::Validation(format!("{name} argument has a non-self-adjoint term on {m:?}")));
            }
        }
    }
    let mut out = Interaction::new();
    for (m1, a) in phi.terms() {
        for (m2, b) in psi.terms() {
            if !intersects(m1, m2) {
                continue;
            }
            let union: Subset = m1.iter().chain(m2.iter()).copied().collect();
            out.add_term(union, linalg::scale(&linalg::commutator(a, b), I));
        }
    }
    if let Some(v) = potential {
        for (m2, b) in psi.terms() {
            let mut acc = space.zero();
            for &x in m2 {
                if v.values[x] != 0.0 {
                    linalg::add_scaled(&mut acc, C64::new(0.0, v.values[x]), &number_commutator(space, x, b));
                }
            }
            out.add_term(m2.clone(), acc);
        }
    }
    Ok(out.pruned())
}

fn intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    false
}

/// `sup_x ‖Φ_x‖_{ν,x} (1 + d(x, L))^m`, the finite-volume L-localization diagnostic.
pub fn l_localization_profile(space: &FockSpace, phi: &Interaction, region: &[usize], nu: u32, m: u32) -> f64 {
    let chain = zero_chain(space, phi);
    let geo = space.geometry();
    chain
        .pieces
        .iter()
        .map(|(&x, px)| {
            let d = geo.distance_to_set(x, region).unwrap_or(0) as f64;
            caralg::localization_norm(space, px, nu, x) * (1.0 + d).powi(m as i32)
        })
        .fold(0.0f64, f64::max)
}

/// Right-hand sides of the quasi-locality inequalities, with the explicit
/// constants from their proofs, truncated to the finite lattice.
pub mod bounds {
    use super::*;

    /// `4^{ν+m+3} ‖A‖_{ν+m,y} ‖B‖_{ν+m,x} / (1 + ‖x - y‖)^m`
    pub fn commutator_bound(nu: u32, m: u32, a_norm_y: f64, b_norm_x: f64, distance_xy: usize) -> f64 {
        4f64.powi((nu + m + 3) as i32) * a_norm_y * b_norm_x / ((1 + distance_xy) as f64).powi(m as i32)
    }

    /// `‖i[Ψ + V, Φ]‖_ν ≤ 2^{d+2} ‖Ψ‖_{ν+d} ‖Φ‖_{ν+d} + 3 C_v ‖Φ‖_{ν+d+2}`
    pub fn commutator_interaction_bound(
        space: &FockSpace,
        psi: &Interaction,
        potential: Option<&LipschitzPotential>,
        phi: &Interaction,
        nu: u32,
    ) -> f64 {
        let d = space.geometry().dimension() as u32;
        let psi_n = interaction_norm(space, psi, nu + d);
        let phi_n = interaction_norm_table(space, phi, &[nu + d, nu + d + 2]);
        let c_v = potential.map(|v| v.lipschitz_constant(space.geometry())).unwrap_or(0.0);
        2f64.powi((d + 2) as i32) * psi_n * phi_n[0] + 3.0 * c_v * phi_n[1]
    }

    /// Bound on `‖L_{Φ+V} A‖_{ν,x}` for gauge-invariant `A`:
    /// `4^{ν+d+4} 3 ‖Φ‖_{ν+d+1} ‖A‖_{ν+d+1,x} Σ_z (1+‖z-x‖)^{-(d+1)}
    ///  + 4^{ν+d+5} ‖n_0‖ Σ_z ‖z-x‖ (1+‖z-x‖)^{-(d+2)} C_v ‖A‖_{ν+d+2,x}`.
    pub fn sum_representation_bound(
        space: &FockSpace,
        phi: &Interaction,
        potential: Option<&LipschitzPotential>,
        a: &Matrix,
        nu: u32,
        x: usize,
    ) -> f64 {
        let geo = space.geometry();
        let d = geo.dimension() as u32;
        let phi_n = interaction_norm(space, phi, nu + d + 1);
        let prof = caralg::localization_profile(space, a, x);
        let (s1, s2) = (0..geo.num_sites()).fold((0.0, 0.0), |(s1, s2), z| {
            let r = geo.distance(z, x) as f64;
            (s1 + (1.0 + r).powi(-((d + 1) as i32)), s2 + r * (1.0 + r).powi(-((d + 2) as i32)))
        });
        let n0 = geo.flavors() as f64;
        let c_v = potential.map(|v| v.lipschitz_constant(geo)).unwrap_or(0.0);
        4f64.powi((nu + d + 4) as i32) * 3.0 * phi_n * prof.norm_nu(nu + d + 1) * s1
            + 4f64.powi((nu + d + 5) as i32) * n0 * s2 * c_v * prof.norm_nu(nu + d + 2)
    }
}
