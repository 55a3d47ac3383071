//! Finite-lattice fermionic Fock space and the CAR algebra on it.
//!
//! Modes are ordered lexicographically by (site, flavor) and mode `j` is bit
//! `j` of the occupation-number basis index. Annihilators carry the
//! Jordan-Wigner string of all lower modes:
//! `a_j |b> = (-1)^{sum_{i<j} b_i} |b - e_j>`.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NeassError, Result};
use crate::linalg::{self, Matrix, C64, ZERO};

/// Default ceiling on the number of modes (2^14 basis states).
pub const DEFAULT_MODE_BUDGET: usize = 14;

pub type Coord = [i64; 2];

/// Finite subset of Z^d (d = 1 or 2) with `flavors` modes per site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    dimension: usize,
    sites: Vec<Coord>,
    flavors: usize,
}

impl LatticeGeometry {
    pub fn new(dimension: usize, sites: Vec<Coord>, flavors: usize) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(NeassError::Argument(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if flavors == 0 {
            return Err(NeassError::Argument("flavors per site must be at least 1".into()));
        }
        if sites.is_empty() {
            return Err(NeassError::Argument("lattice needs at least one site".into()));
        }
        if dimension == 1 && sites.iter().any(|c| c[1] != 0) {
            return Err(NeassError::Argument("1d sites must have a zero second coordinate".into()));
        }
        let distinct: BTreeSet<Coord> = sites.iter().copied().collect();
        if distinct.len() != sites.len() {
            return Err(NeassError::Argument("lattice sites must be distinct".into()));
        }
        Ok(Self { dimension, sites, flavors })
    }

    /// Open chain `0, 1, ..., len - 1`.
    pub fn chain(len: usize, flavors: usize) -> Result<Self> {
        Self::new(1, (0..len as i64).map(|x| [x, 0]).collect(), flavors)
    }

    /// `width x height` rectangle in Z^2, row-major site order.
    pub fn rectangle(width: usize, height: usize, flavors: usize) -> Result<Self> {
        let mut sites = Vec::with_capacity(width * height);
        for y in 0..height as i64 {
            for x in 0..width as i64 {
                sites.push([x, y]);
            }
        }
        Self::new(2, sites, flavors)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn flavors(&self) -> usize {
        self.flavors
    }

    pub fn sites(&self) -> &[Coord] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_modes(&self) -> usize {
        self.sites.len() * self.flavors
    }

    pub fn coord(&self, site: usize) -> Coord {
        self.sites[site]
    }

    pub fn site_index(&self, coord: Coord) -> Option<usize> {
        self.sites.iter().position(|c| *c == coord)
    }

    /// Maximum-norm distance between two sites (by index).
    pub fn distance(&self, x: usize, y: usize) -> usize {
        let (a, b) = (self.sites[x], self.sites[y]);
        (a[0] - b[0]).unsigned_abs().max((a[1] - b[1]).unsigned_abs()) as usize
    }

    /// Diameter of a subset in the maximum norm; 0 for empty or singletons.
    pub fn diameter_of(&self, subset: &[usize]) -> usize {
        let mut d = 0;
        for (i, &x) in subset.iter().enumerate() {
            for &y in &subset[i + 1..] {
                d = d.max(self.distance(x, y));
            }
        }
        d
    }

    pub fn diameter(&self) -> usize {
        let all: Vec<usize> = (0..self.num_sites()).collect();
        self.diameter_of(&all)
    }

    /// Distance from a site to a set; `None` for the empty set.
    pub fn distance_to_set(&self, x: usize, set: &[usize]) -> Option<usize> {
        set.iter().map(|&y| self.distance(x, y)).min()
    }

    /// Sites of the box of side length 2k around `x`, i.e. max-norm ball.
    pub fn ball(&self, x: usize, k: usize) -> Vec<usize> {
        (0..self.num_sites()).filter(|&y| self.distance(x, y) <= k).collect()
    }

    /// Mode index of flavor `flavor` at `site`.
    pub fn mode(&self, site: usize, flavor: usize) -> usize {
        site * self.flavors + flavor
    }

    /// Bitmask of all modes living on `sites`.
    pub fn mode_mask(&self, sites: &[usize]) -> u64 {
        let mut mask = 0u64;
        for &s in sites {
            for f in 0..self.flavors {
                mask |= 1 << self.mode(s, f);
            }
        }
        mask
    }
}

/// Fock space over a lattice geometry, acting as the factory for CAR operators.
#[derive(Clone, Debug)]
pub struct FockSpace {
    geometry: LatticeGeometry,
    dim: usize,
}

impl FockSpace {
    pub fn new(geometry: LatticeGeometry) -> Result<Self> {
        Self::with_budget(geometry, DEFAULT_MODE_BUDGET)
    }

    pub fn with_budget(geometry: LatticeGeometry, budget: usize) -> Result<Self> {
        let modes = geometry.num_modes();
        if modes > budget || modes > 30 {
            return Err(NeassError::Size { modes, budget });
        }
        Ok(Self { dim: 1 << modes, geometry })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_modes(&self) -> usize {
        self.geometry.num_modes()
    }

    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    pub fn identity(&self) -> Matrix {
        linalg::identity(self.dim)
    }

    pub fn zero(&self) -> Matrix {
        linalg::zeros(self.dim)
    }

    /// Annihilator of a single mode.
    pub fn annihilation_mode(&self, mode: usize) -> Matrix {
        let mut m = self.zero();
        let bit = 1usize << mode;
        let lower = bit - 1;
        for b in 0..self.dim {
            if b & bit != 0 {
                let sign = if (b & lower).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(b ^ bit, b)] = C64::new(sign, 0.0);
            }
        }
        m
    }

    pub fn creation_mode(&self, mode: usize) -> Matrix {
        linalg::adjoint(&self.annihilation_mode(mode))
    }

    pub fn number_mode(&self, mode: usize) -> Matrix {
        let bit = 1usize << mode;
        let diag: Vec<f64> = (0..self.dim).map(|b| if b & bit != 0 { 1.0 } else { 0.0 }).collect();
        linalg::diagonal(&diag)
    }

    /// `a_{x,i}`
    pub fn annihilation(&self, site: usize, flavor: usize) -> Matrix {
        self.annihilation_mode(self.geometry.mode(site, flavor))
    }

    /// `a*_{x,i}`
    pub fn creation(&self, site: usize, flavor: usize) -> Matrix {
        self.creation_mode(self.geometry.mode(site, flavor))
    }

    /// `n_x = sum_i a*_{x,i} a_{x,i}`
    pub fn number(&self, site: usize) -> Matrix {
        let mask = self.geometry.mode_mask(&[site]);
        let diag: Vec<f64> = (0..self.dim).map(|b| ((b as u64) & mask).count_ones() as f64).collect();
        linalg::diagonal(&diag)
    }

    pub fn number_flavor(&self, site: usize, flavor: usize) -> Matrix {
        self.number_mode(self.geometry.mode(site, flavor))
    }

    /// Total particle number `N`.
    pub fn total_number(&self) -> Matrix {
        let diag: Vec<f64> = (0..self.dim).map(|b| b.count_ones() as f64).collect();
        linalg::diagonal(&diag)
    }

    /// The parity unitary `g_pi = (-1)^N`.
    pub fn parity_unitary(&self) -> Matrix {
        let diag: Vec<f64> = (0..self.dim).map(|b| if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 }).collect();
        linalg::diagonal(&diag)
    }

    /// Ordered product of single-mode factors, leftmost factor acting last.
    pub fn monomial(&self, factors: &[(usize, ModeFactor)]) -> Matrix {
        let mut m = self.zero();
        for b in 0..self.dim {
            let mut state = b;
            let mut sign = 1.0;
            let mut alive = true;
            for &(mode, f) in factors.iter().rev() {
                match apply_factor(mode, f, state) {
                    Some((s, sg)) => {
                        state = s;
                        sign *= sg;
                    }
                    None => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive {
                m[(state, b)] += C64::new(sign, 0.0);
            }
        }
        m
    }

    /// All `4^k` ordered monomials over the modes of `sites`, each mode taking
    /// one of identity, `a`, `a*`, `n`. They span `A_M`.
    pub fn monomial_basis(&self, sites: &[usize]) -> Vec<(Vec<(usize, ModeFactor)>, Matrix)> {
        let modes = self.modes_of(sites);
        let k = modes.len();
        let mut out = Vec::with_capacity(1 << (2 * k));
        for code in 0..(1usize << (2 * k)) {
            let factors: Vec<(usize, ModeFactor)> = modes
                .iter()
                .enumerate()
                .filter_map(|(i, &mode)| {
                    let f = match (code >> (2 * i)) & 3 {
                        0 => return None,
                        1 => ModeFactor::Annihilate,
                        2 => ModeFactor::Create,
                        _ => ModeFactor::Number,
                    };
                    Some((mode, f))
                })
                .collect();
            let m = self.monomial(&factors);
            out.push((factors, m));
        }
        out
    }

    pub fn modes_of(&self, sites: &[usize]) -> Vec<usize> {
        let mut modes: Vec<usize> = sites
            .iter()
            .flat_map(|&s| (0..self.geometry.flavors).map(move |f| (s, f)))
            .map(|(s, f)| self.geometry.mode(s, f))
            .collect();
        modes.sort_unstable();
        modes.dedup();
        modes
    }

    /// Random element of `A_M` drawn as a complex Gaussian combination of the
    /// monomials over `sites` that match `kind`.
    pub fn random_local_operator<R: Rng + ?Sized>(&self, rng: &mut R, sites: &[usize], kind: OperatorKind) -> Matrix {
        let basis = self.monomial_basis(sites);
        let mut out = self.zero();
        let mut count = 0usize;
        for (factors, m) in &basis {
            if !kind.admits(factors) {
                continue;
            }
            count += 1;
            let c = linalg::random_complex(rng);
            linalg::add_scaled(&mut out, c, m);
        }
        if count > 0 {
            out = linalg::scale_real(&out, 1.0 / (count as f64).sqrt());
        }
        if kind.hermitian() {
            out = linalg::hermitian_part(&out);
        }
        out
    }
}

/// One factor of a monomial acting on a single mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeFactor {
    Create,
    Annihilate,
    Number,
}

fn apply_factor(mode: usize, f: ModeFactor, state: usize) -> Option<(usize, f64)> {
    let bit = 1usize << mode;
    let occupied = state & bit != 0;
    let string = if (state & (bit - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    match f {
        ModeFactor::Number => occupied.then_some((state, 1.0)),
        ModeFactor::Annihilate => occupied.then_some((state ^ bit, string)),
        ModeFactor::Create => (!occupied).then_some((state ^ bit, string)),
    }
}

/// Which monomials a random local operator may contain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Any,
    Even,
    GaugeInvariant,
    HermitianEven,
    HermitianGaugeInvariant,
}

impl OperatorKind {
    fn admits(self, factors: &[(usize, ModeFactor)]) -> bool {
        let creates = factors.iter().filter(|(_, f)| *f == ModeFactor::Create).count();
        let annihilates = factors.iter().filter(|(_, f)| *f == ModeFactor::Annihilate).count();
        match self {
            OperatorKind::Any => true,
            OperatorKind::Even | OperatorKind::HermitianEven => (creates + annihilates) % 2 == 0,
            OperatorKind::GaugeInvariant | OperatorKind::HermitianGaugeInvariant => creates == annihilates,
        }
    }

    fn hermitian(self) -> bool {
        matches!(self, OperatorKind::HermitianEven | OperatorKind::HermitianGaugeInvariant)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// Dense operator on the Fock space together with its algebraic metadata.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub matrix: Matrix,
    /// Smallest site set `M` found with `E_M(A) = A`.
    pub support: Vec<usize>,
    pub parity: Parity,
    pub gauge_invariant: bool,
}

impl FockOperator {
    /// Wraps a matrix and computes parity, gauge and support metadata.
    pub fn analyze(space: &FockSpace, matrix: Matrix) -> Self {
        let parity = parity_of(&matrix);
        let gauge_invariant = is_gauge_invariant(&matrix);
        let support = support(space, &matrix);
        Self { matrix, support, parity, gauge_invariant }
    }
}

fn entry_tolerance(a: &Matrix) -> f64 {
    1e-12 * linalg::max_abs(a).max(1.0)
}

/// Classifies a matrix by how it transforms under `g_pi`.
pub fn parity_of(a: &Matrix) -> Parity {
    let tol = entry_tolerance(a);
    let n = a.nrows();
    let (mut even, mut odd) = (false, false);
    for b in 0..n {
        for r in 0..n {
            if a[(r, b)].norm() > tol {
                if (r.count_ones() + b.count_ones()) % 2 == 0 {
                    even = true;
                } else {
                    odd = true;
                }
            }
        }
    }
    match (even, odd) {
        (_, false) => Parity::Even,
        (false, true) => Parity::Odd,
        (true, true) => Parity::Mixed,
    }
}

/// True if the matrix commutes with the total number operator.
pub fn is_gauge_invariant(a: &Matrix) -> bool {
    let tol = entry_tolerance(a);
    let n = a.nrows();
    (0..n).all(|b| (0..n).all(|r| r.count_ones() == b.count_ones() || a[(r, b)].norm() <= tol))
}

/// `g_phi(A) = e^{i phi N} A e^{-i phi N}`.
pub fn gauge_transform(a: &Matrix, phi: f64) -> Matrix {
    let n = a.nrows();
    Matrix::from_fn(n, n, |r, b| {
        let dn = r.count_ones() as f64 - b.count_ones() as f64;
        a[(r, b)] * C64::from_polar(1.0, phi * dn)
    })
}

/// The tracial state `tr(A) / 2^m`.
pub fn tracial_state(a: &Matrix) -> C64 {
    linalg::trace(a) / a.nrows() as f64
}

/// Exact conditional expectation `E_M` onto the subalgebra of the sites `region`.
///
/// Every mode `k` outside the region is traced out by two twirls: first by the
/// local parity `1 - 2 n_k` (kills entries that change the occupation of `k`),
/// then by the Jordan-Wigner-dressed flip `X_k prod_{j>k} Z_j`. The composite
/// is the orthogonal projection in the tracial inner product.
pub fn conditional_expectation(space: &FockSpace, a: &Matrix, region: &[usize]) -> Matrix {
    let keep = space.geometry().mode_mask(region);
    let mut cur = a.clone();
    for k in 0..space.num_modes() {
        if keep & (1 << k) != 0 {
            continue;
        }
        cur = trace_out_mode(&cur, k);
    }
    cur
}

fn trace_out_mode(a: &Matrix, k: usize) -> Matrix {
    let n = a.nrows();
    let bit = 1usize << k;
    let mut out = Matrix::zeros(n, n);
    for b in 0..n {
        for r in 0..n {
            if (r ^ b) & bit != 0 {
                continue;
            }
            let sign = if ((r ^ b) >> (k + 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[(r, b)] = (a[(r, b)] + a[(r ^ bit, b ^ bit)] * sign) * 0.5;
        }
    }
    out
}

/// Sites `x` with `E_{Λ \ {x}}(A) != A`, up to a relative entry tolerance.
pub fn support(space: &FockSpace, a: &Matrix) -> Vec<usize> {
    let tol = entry_tolerance(a);
    let all: Vec<usize> = (0..space.num_sites()).collect();
    all.iter()
        .copied()
        .filter(|&x| {
            let rest: Vec<usize> = all.iter().copied().filter(|&y| y != x).collect();
            let e = conditional_expectation(space, a, &rest);
            linalg::max_abs(&(a - &e)) > tol
        })
        .collect()
}

/// Residuals `‖A - E_{B_k(x)} A‖` for `k = 0 ..= diam(Λ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalizationProfile {
    pub site: usize,
    pub norm: f64,
    pub residuals: Vec<f64>,
}

impl LocalizationProfile {
    /// `‖A‖_{ν,x} = ‖A‖ + max_k ‖A - E_{B_k(x)} A‖ (1 + k)^ν`
    pub fn norm_nu(&self, nu: u32) -> f64 {
        let sup =
            self.residuals.iter().enumerate().map(|(k, r)| r * ((1 + k) as f64).powi(nu as i32)).fold(0.0f64, f64::max);
        self.norm + sup
    }
}

pub fn localization_profile(space: &FockSpace, a: &Matrix, x: usize) -> LocalizationProfile {
    let geo = space.geometry();
    let diam = geo.diameter();
    let reach = (0..geo.num_sites()).map(|y| geo.distance(x, y)).max().unwrap_or(0);
    let mut residuals = Vec::with_capacity(diam + 1);
    for k in 0..=diam {
        if k >= reach {
            // The ball already covers Λ and E is the identity map.
            residuals.push(0.0);
            continue;
        }
        let e = conditional_expectation(space, a, &geo.ball(x, k));
        residuals.push(linalg::op_norm(&(a - &e)));
    }
    LocalizationProfile { site: x, norm: linalg::op_norm(a), residuals }
}

/// The x-pinned norm `‖A‖_{ν,x}`.
pub fn localization_norm(space: &FockSpace, a: &Matrix, nu: u32, x: usize) -> f64 {
    localization_profile(space, a, x).norm_nu(nu)
}

/// The unpinned norm `‖A‖_ν = min_x ‖A‖_{ν,x}`, with the minimizing site.
pub fn min_localization_norm(space: &FockSpace, a: &Matrix, nu: u32) -> (usize, f64) {
    (0..space.num_sites()).map(|x| (x, localization_norm(space, a, nu, x))).fold((0, f64::INFINITY), |best, cur| {
        if cur.1 < best.1 {
            cur
        } else {
            best
        }
    })
}

/// True if `a` is a multiple of the identity up to a relative entry tolerance.
pub fn is_identity_multiple(a: &Matrix) -> bool {
    let n = a.nrows();
    let c = a[(0, 0)];
    let tol = entry_tolerance(a);
    (0..n).all(|b| (0..n).all(|r| (a[(r, b)] - if r == b { c } else { ZERO }).norm() <= tol))
}

/// Unit used in tests and reports: `tr(A^† A)/dim`.
pub fn tracial_norm_sq(a: &Matrix) -> f64 {
    (linalg::hs_inner(a, a) / a.nrows() as f64).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{anticommutator, max_abs, ONE};
    use faer::linalg::solvers::Solve;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(len: usize, flavors: usize) -> FockSpace {
        FockSpace::new(LatticeGeometry::chain(len, flavors).unwrap()).unwrap()
    }

    /// Independent oracle: tracial projection onto the span of the monomial
    /// basis, solved through its Gram matrix.
    fn monomial_projection(space: &FockSpace, a: &Matrix, region: &[usize]) -> Matrix {
        let basis: Vec<Matrix> = space.monomial_basis(region).into_iter().map(|(_, m)| m).collect();
        let k = basis.len();
        let gram = Matrix::from_fn(k, k, |i, j| linalg::hs_inner(&basis[i], &basis[j]));
        let rhs = Matrix::from_fn(k, 1, |i, _| linalg::hs_inner(&basis[i], a));
        let coeffs = gram.full_piv_lu().solve(&rhs);
        let mut out = space.zero();
        for (i, m) in basis.iter().enumerate() {
            linalg::add_scaled(&mut out, coeffs[(i, 0)], m);
        }
        out
    }

    #[test]
    fn car_relations() {
        let space = chain(3, 2);
        let m = space.num_modes();
        let id = space.identity();
        for i in 0..m {
            for j in 0..m {
                let ai = space.annihilation_mode(i);
                let aj = space.annihilation_mode(j);
                let adj = space.creation_mode(j);
                assert_eq!(max_abs(&anticommutator(&ai, &aj)), 0.0);
                let expect = if i == j { id.clone() } else { space.zero() };
                assert_eq!(max_abs(&(&anticommutator(&ai, &adj) - &expect)), 0.0);
            }
        }
    }

    #[test]
    fn number_operator_spectrum() {
        let space = chain(2, 3);
        let n0 = space.number(0);
        let mut vals: Vec<i64> = linalg::eigvalsh(&n0).iter().map(|v| v.round() as i64).collect();
        vals.dedup();
        assert_eq!(vals, vec![0, 1, 2, 3]);
        let sum = &(space.creation(0, 0) * space.annihilation(0, 0))
            + &(&(space.creation(0, 1) * space.annihilation(0, 1))
                + &(space.creation(0, 2) * space.annihilation(0, 2)));
        assert_eq!(max_abs(&(&sum - &n0)), 0.0);
    }

    #[test]
    fn size_budget_enforced() {
        let geo = LatticeGeometry::chain(8, 2).unwrap();
        assert!(matches!(FockSpace::new(geo), Err(NeassError::Size { modes: 16, budget: 14 })));
    }

    #[test]
    fn gauge_examples() {
        let space = chain(3, 1);
        let n1 = space.number(1);
        assert_eq!(max_abs(&(&gauge_transform(&n1, 0.7) - &n1)), 0.0);
        let a0 = space.annihilation(0, 0);
        let g = gauge_transform(&a0, std::f64::consts::PI);
        assert!(max_abs(&(&g + &a0)) < 1e-15);
        let hop = space.creation(0, 0) * space.annihilation(2, 0);
        assert!(max_abs(&(&gauge_transform(&hop, 1.3) - &hop)) < 1e-15);
        assert_eq!(parity_of(&a0), Parity::Odd);
        assert_eq!(parity_of(&hop), Parity::Even);
        assert!(is_gauge_invariant(&hop));
        assert!(!is_gauge_invariant(&(&a0 * &space.annihilation(1, 0))));
    }

    #[test]
    fn tracial_state_examples() {
        let space = chain(3, 1);
        assert_eq!(tracial_state(&space.identity()), ONE);
        let n = space.creation(1, 0) * space.annihilation(1, 0);
        assert!((tracial_state(&n) - C64::new(0.5, 0.0)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = linalg::random_complex_matrix(&mut rng, 8, 8);
        let b = linalg::random_complex_matrix(&mut rng, 8, 8);
        assert!((tracial_state(&(&a * &b)) - tracial_state(&(&b * &a))).norm() < 1e-12);
    }

    #[test]
    fn conditional_expectation_examples() {
        let space = chain(3, 1);
        let n1 = space.number(1);
        let e = conditional_expectation(&space, &n1, &[]);
        assert_eq!(max_abs(&(&e - &linalg::scale_real(&space.identity(), 0.5))), 0.0);
        let hop = &(space.creation(0, 0) * space.annihilation(1, 0)) + &n1;
        let kept = conditional_expectation(&space, &hop, &[0, 1]);
        assert!(max_abs(&(&kept - &hop)) < 1e-15);
        // An odd operator on a traced-out site has no component in A_M.
        let odd = space.annihilation(2, 0);
        assert_eq!(max_abs(&conditional_expectation(&space, &odd, &[0, 1])), 0.0);
    }

    #[test]
    fn conditional_expectation_matches_monomial_oracle() {
        let space = chain(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = linalg::random_complex_matrix(&mut rng, 8, 8);
        for region in [vec![], vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2], vec![0, 1, 2]] {
            let fast = conditional_expectation(&space, &a, &region);
            let oracle = monomial_projection(&space, &a, &region);
            assert!(max_abs(&(&fast - &oracle)) < 1e-12, "region {region:?}");
        }
        let space = chain(2, 2);
        let a = linalg::random_complex_matrix(&mut rng, 16, 16);
        let fast = conditional_expectation(&space, &a, &[1]);
        let oracle = monomial_projection(&space, &a, &[1]);
        assert!(max_abs(&(&fast - &oracle)) < 1e-12);
    }

    #[test]
    fn pairing_property_against_monomial_basis() {
        let space = chain(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = linalg::random_complex_matrix(&mut rng, 16, 16);
        let region = [1, 3];
        let e = conditional_expectation(&space, &a, &region);
        for (_, b) in space.monomial_basis(&region) {
            let lhs = tracial_state(&(&a * &b));
            let rhs = tracial_state(&(&e * &b));
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn support_detection() {
        let space = chain(4, 1);
        let hop =
            &(space.creation(1, 0) * space.annihilation(3, 0)) + &(space.creation(3, 0) * space.annihilation(1, 0));
        let op = FockOperator::analyze(&space, hop);
        assert_eq!(op.support, vec![1, 3]);
        assert_eq!(op.parity, Parity::Even);
        assert!(op.gauge_invariant);
        assert!(support(&space, &space.identity()).is_empty());
    }

    #[test]
    fn localization_norm_examples() {
        let space = chain(4, 1);
        let id = space.identity();
        for nu in 0..3 {
            for x in 0..4 {
                assert!((localization_norm(&space, &id, nu, x) - 1.0).abs() < 1e-12);
            }
        }
        let n2 = space.number(2);
        assert!((localization_norm(&space, &n2, 3, 2) - 1.0).abs() < 1e-12);
        // Brute-force oracle: evaluate every ball explicitly.
        let x = 0;
        let nu = 2;
        let mut sup = 0.0f64;
        for k in 0..=space.geometry().diameter() {
            let e = conditional_expectation(&space, &n2, &space.geometry().ball(x, k));
            sup = sup.max(linalg::op_norm(&(&n2 - &e)) * ((1 + k) as f64).powi(nu));
        }
        assert!((localization_norm(&space, &n2, nu as u32, x) - (1.0 + sup)).abs() < 1e-12);
        // n_2 - E_{B_k(0)} n_2 = n_2 - 1/2 for k < 2, so the sup is (1/2)*2^2.
        assert!((sup - 2.0).abs() < 1e-12);
        let (xmin, vmin) = min_localization_norm(&space, &n2, 2);
        assert_eq!(xmin, 2);
        assert!((vmin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_balls_and_distances() {
        let geo = LatticeGeometry::rectangle(3, 2, 1).unwrap();
        assert_eq!(geo.distance(0, 5), 2);
        assert_eq!(geo.ball(0, 1), vec![0, 1, 3, 4]);
        assert_eq!(geo.diameter(), 2);
        assert!(LatticeGeometry::new(1, vec![[0, 0], [0, 0]], 1).is_err());
    }
}
