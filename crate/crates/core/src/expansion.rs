//! Order-by-order construction of the dressing generator
//! `S = Σ_{j≥1} Σ_{i≤j} ε^i η^{j-i} K^{j,i}`.
//!
//! Each order is read off from the bigraded expansion of the dressed
//! generator
//!
//! ```text
//! F = Σ_k (1/k!) ad(iS)^k (H + εP) - η Σ_k 1/(k+1)! ad(iS)^k Ṡ + η I(Ḣ),
//! ad(iS) X = i[S, X],  P = H¹ + V,
//! ```
//!
//! with `S` truncated below the current order: `L^{j,i}` is the coefficient
//! of `ε^i η^{j-i}`, and `K^{j,i} = -I([L^{j,i}, H])`. Time derivatives of
//! lower orders use central differences with one Richardson step, memoized
//! per time so that the snapshots needed at order 3 are computed once.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::dynamics::Schedule;
use crate::interaction::{commutator_interaction, zero_chain, Interaction};
use crate::linalg::{self, Matrix, C64, I};
use crate::spectral::{self, FilterFunction, GroundStateFunctional, SpectralData};
use crate::{NeassError, Result};

/// Which `(j, i)` coefficients are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mask {
    #[default]
    Full,
    /// Only `i = 0`: the unperturbed adiabatic expansion (`ε = 0`).
    EtaOnly,
    /// Only `i = j`: the static perturbative expansion (`η = 0`).
    EpsOnly,
}

impl Mask {
    pub fn keeps(self, j: usize, i: usize) -> bool {
        match self {
            Mask::Full => i <= j,
            Mask::EtaOnly => i == 0,
            Mask::EpsOnly => i == j,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExpansionConfig {
    /// Highest order `n` the engine will be asked for.
    pub order: usize,
    /// Base step `h` of the central differences (Richardson pairs `h, h/2`).
    pub fd_step: f64,
    pub mask: Mask,
    /// Fixed filter gap; if absent it is sampled along the schedule window.
    pub filter_gap: Option<f64>,
    pub gap_samples: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self { order: 2, fd_step: 1e-3, mask: Mask::Full, filter_gap: None, gap_samples: 32 }
    }
}

/// Everything at a single time that does not depend on the expansion order.
#[derive(Debug)]
pub struct Snapshot {
    pub t: f64,
    pub h: Matrix,
    pub h_dot: Matrix,
    pub perturbation: Matrix,
    pub spec: SpectralData,
    pub filter: FilterFunction,
    /// `I(Ḣ)` as a global operator, `I([Ḣ, H])`.
    pub i_hdot: Matrix,
}

impl Snapshot {
    pub fn ground_state(&self) -> GroundStateFunctional {
        GroundStateFunctional::ground_projector(&self.spec)
    }

    /// `-I([L, H])`
    pub fn solve(&self, l: &Matrix) -> Matrix {
        let b = linalg::commutator(l, &self.h);
        linalg::scale_real(&spectral::inverse_liouvillian_with(&self.spec, &self.filter, &b), -1.0)
    }
}

/// Coefficients `K^{j,i}` and `L^{j,i}` at one time, for `1 <= j <= order`.
/// Index `[j][i]`; row 0 is unused. Entries outside the mask are `None`.
#[derive(Clone, Debug)]
pub struct KTable {
    pub t: f64,
    pub order: usize,
    pub k: Vec<Vec<Option<Matrix>>>,
    pub l: Vec<Vec<Option<Matrix>>>,
    /// `d/dt K^{j,i}` for `j < order`.
    pub k_dot: Vec<Vec<Option<Matrix>>>,
    /// Richardson error estimate (max-abs) per entry of `k_dot`.
    pub k_dot_error: Vec<Vec<f64>>,
}

impl KTable {
    fn empty(t: f64) -> Self {
        Self { t, order: 0, k: vec![vec![]], l: vec![vec![]], k_dot: vec![vec![]], k_dot_error: vec![vec![]] }
    }

    pub fn get(&self, j: usize, i: usize) -> Option<&Matrix> {
        self.k.get(j).and_then(|row| row.get(i)).and_then(|m| m.as_ref())
    }

    pub fn get_l(&self, j: usize, i: usize) -> Option<&Matrix> {
        self.l.get(j).and_then(|row| row.get(i)).and_then(|m| m.as_ref())
    }

    /// `S = Σ_{j<=n} Σ_i ε^i η^{j-i} K^{j,i}`
    pub fn assemble(&self, eps: f64, eta: f64, n: usize) -> Result<Matrix> {
        if n > self.order {
            return Err(NeassError::Sequencing(format!("order {n} requested from a table of order {}", self.order)));
        }
        let dim = self.k.iter().flatten().flatten().next().map(|m| m.nrows());
        let Some(dim) = dim else {
            return Ok(Matrix::zeros(0, 0));
        };
        let mut s = linalg::zeros(dim);
        for j in 1..=n {
            for i in 0..=j {
                if let Some(k) = self.get(j, i) {
                    let c = eps.powi(i as i32) * eta.powi((j - i) as i32);
                    if c != 0.0 {
                        linalg::add_scaled_real(&mut s, c, k);
                    }
                }
            }
        }
        Ok(s)
    }

    /// Largest Richardson error estimate over all stored derivatives.
    pub fn max_derivative_error(&self) -> f64 {
        self.k_dot_error.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// The generator `S` for fixed `(ε, η)` and order `n`.
#[derive(Clone, Debug)]
pub struct DressingGenerator {
    pub table: Arc<KTable>,
    pub eps: f64,
    pub eta: f64,
    pub order: usize,
}

impl DressingGenerator {
    pub fn matrix(&self, dim: usize) -> Result<Matrix> {
        if self.order == 0 {
            return Ok(linalg::zeros(dim));
        }
        self.table.assemble(self.eps, self.eta, self.order)
    }
}

/// Polynomial in `(ε, η)` with matrix coefficients, keyed by `(ε power, η power)`.
type Poly = BTreeMap<(usize, usize), Matrix>;

fn poly_add(dst: &mut Poly, key: (usize, usize), c: C64, m: &Matrix) {
    match dst.get_mut(&key) {
        Some(acc) => linalg::add_scaled(acc, c, m),
        None => {
            dst.insert(key, linalg::scale(m, c));
        }
    }
}

/// `i[S, X]` truncated at total degree `max_deg`.
fn ad_is(s: &Poly, x: &Poly, max_deg: usize) -> Poly {
    let mut out = Poly::new();
    for (&(si, se), sm) in s {
        for (&(xi, xe), xm) in x {
            if si + se + xi + xe <= max_deg {
                poly_add(&mut out, (si + xi, se + xe), I, &linalg::commutator(sm, xm));
            }
        }
    }
    out
}

/// Coefficients `L^{j,·}` of total degree `j`, given `K` and `K̇` for all
/// orders below `j`.
pub fn collect_order(snap: &Snapshot, lower: &KTable, j: usize, mask: Mask) -> Result<Vec<Option<Matrix>>> {
    if j == 0 || lower.order + 1 != j || lower.k_dot.len() < j {
        return Err(NeassError::Sequencing(format!(
            "order {j} needs orders 1..{} and their time derivatives; have order {}",
            j - 1,
            lower.order
        )));
    }
    let mut s = Poly::new();
    let mut s_dot = Poly::new();
    for l in 1..j {
        for i in 0..=l {
            if let Some(k) = lower.get(l, i) {
                s.insert((i, l - i), k.clone());
            }
            if let Some(kd) = lower.k_dot[l].get(i).and_then(|m| m.as_ref()) {
                // η Ṡ: one more power of η.
                s_dot.insert((i, l - i + 1), kd.clone());
            }
        }
    }
    let one = C64::new(1.0, 0.0);
    let mut f = Poly::new();
    // Σ_k (1/k!) ad(iS)^k (H + εP)
    let mut cur = Poly::new();
    cur.insert((0, 0), snap.h.clone());
    if mask != Mask::EtaOnly {
        cur.insert((1, 0), snap.perturbation.clone());
    }
    let mut k = 0usize;
    while !cur.is_empty() {
        let fact: f64 = (1..=k).map(|x| x as f64).product();
        for (&key, m) in &cur {
            poly_add(&mut f, key, one / fact, m);
        }
        k += 1;
        cur = ad_is(&s, &cur, j);
    }
    if mask != Mask::EpsOnly {
        // -Σ_k 1/(k+1)! ad(iS)^k (ηṠ)
        let mut cur = s_dot.clone();
        cur.retain(|&(i, e), _| i + e <= j);
        let mut k = 0usize;
        while !cur.is_empty() {
            let fact: f64 = (1..=k + 1).map(|x| x as f64).product();
            for (&key, m) in &cur {
                poly_add(&mut f, key, -one / fact, m);
            }
            k += 1;
            cur = ad_is(&s, &cur, j);
        }
        // η I(Ḣ)
        poly_add(&mut f, (0, 1), one, &snap.i_hdot);
    }
    Ok((0..=j)
        .map(|i| {
            if !mask.keeps(j, i) {
                return None;
            }
            Some(f.remove(&(i, j - i)).unwrap_or_else(|| linalg::zeros(snap.h.nrows())))
        })
        .collect())
}

/// Memoizing engine over one schedule. Tables depend only on `t`, so a
/// single engine serves every `(ε, η)`.
pub struct ExpansionEngine<'a> {
    schedule: &'a Schedule,
    config: ExpansionConfig,
    filter_gap: f64,
    snapshots: Mutex<HashMap<u64, Arc<Snapshot>>>,
    tables: Mutex<HashMap<u64, Arc<KTable>>>,
}

impl<'a> ExpansionEngine<'a> {
    pub fn new(schedule: &'a Schedule, config: ExpansionConfig) -> Result<Self> {
        if !(config.fd_step > 0.0) {
            return Err(NeassError::Argument(format!(
                "finite-difference step must be positive, got {}",
                config.fd_step
            )));
        }
        let filter_gap = match config.filter_gap {
            Some(g) if g > 0.0 => g,
            Some(g) => return Err(NeassError::Argument(format!("filter gap must be positive, got {g}"))),
            None => schedule.path_filter_gap(config.gap_samples)?,
        };
        Ok(Self {
            schedule,
            config,
            filter_gap,
            snapshots: Mutex::new(HashMap::new()),
            tables: Mutex::new(HashMap::new()),
        })
    }

    pub fn schedule(&self) -> &Schedule {
        self.schedule
    }

    pub fn config(&self) -> &ExpansionConfig {
        &self.config
    }

    pub fn filter_gap(&self) -> f64 {
        self.filter_gap
    }

    /// Number of distinct times diagonalized so far.
    pub fn snapshot_count(&self) -> usize {
        self.snapshots.lock().expect("snapshot cache").len()
    }

    pub fn snapshot(&self, t: f64) -> Result<Arc<Snapshot>> {
        if let Some(s) = self.snapshots.lock().expect("snapshot cache").get(&t.to_bits()) {
            return Ok(s.clone());
        }
        let h = self.schedule.h(t);
        let spec = spectral::diagonalize(&h)?;
        let raw = spec
            .gap_raw
            .ok_or_else(|| NeassError::Gap(format!("no spectral gap above the ground sector at t = {t}")))?;
        let filter = FilterFunction::new(self.filter_gap.min(raw))?;
        let h_dot = self.schedule.h_derivative(t, 1);
        let i_hdot = if linalg::is_zero(&h_dot) {
            linalg::zeros(h.nrows())
        } else {
            spectral::inverse_liouvillian_with(&spec, &filter, &linalg::commutator(&h_dot, &h))
        };
        let snap =
            Arc::new(Snapshot { t, perturbation: self.schedule.perturbation(t), h, h_dot, spec, filter, i_hdot });
        let mut cache = self.snapshots.lock().expect("snapshot cache");
        Ok(cache.entry(t.to_bits()).or_insert(snap).clone())
    }

    /// Table of orders `1..=order` at `t`. The returned table may hold more orders.
    pub fn table(&self, t: f64, order: usize) -> Result<Arc<KTable>> {
        if let Some(tab) = self.tables.lock().expect("table cache").get(&t.to_bits()) {
            if tab.order >= order {
                return Ok(tab.clone());
            }
        }
        if order == 0 {
            return Ok(Arc::new(KTable::empty(t)));
        }
        let lower = self.table(t, order - 1)?;
        if lower.order >= order {
            return Ok(lower);
        }
        let mut next = (*lower).clone();
        let j = order;
        if j >= 2 {
            // Derivatives of order j-1, needed by order j.
            let (dots, errs) = self.time_derivative(t, j - 1)?;
            next.k_dot.push(dots);
            next.k_dot_error.push(errs);
        }
        let snap = self.snapshot(t)?;
        let l = collect_order(&snap, &next, j, self.config.mask)?;
        let k = l.iter().map(|m| m.as_ref().map(|m| snap.solve(m))).collect();
        next.l.push(l);
        next.k.push(k);
        next.order = j;
        let next = Arc::new(next);
        let mut cache = self.tables.lock().expect("table cache");
        let entry = cache.entry(t.to_bits()).or_insert_with(|| next.clone());
        if entry.order < next.order {
            *entry = next.clone();
        }
        Ok(next)
    }

    /// `d/dt K^{j,·}(t)` by `(4 D(h/2) - D(h)) / 3` with central differences `D`,
    /// together with the max-abs size of the Richardson correction.
    pub fn time_derivative(&self, t: f64, j: usize) -> Result<(Vec<Option<Matrix>>, Vec<f64>)> {
        let h = self.config.fd_step;
        let tp = self.table(t + h, j)?;
        let tm = self.table(t - h, j)?;
        let tp2 = self.table(t + h / 2.0, j)?;
        let tm2 = self.table(t - h / 2.0, j)?;
        let mut dots = Vec::with_capacity(j + 1);
        let mut errs = Vec::with_capacity(j + 1);
        for i in 0..=j {
            match (tp.get(j, i), tm.get(j, i), tp2.get(j, i), tm2.get(j, i)) {
                (Some(a), Some(b), Some(c), Some(d)) => {
                    let d1 = linalg::scale_real(&(a - b), 1.0 / (2.0 * h));
                    let d2 = linalg::scale_real(&(c - d), 1.0 / h);
                    let r = linalg::scale_real(&(linalg::scale_real(&d2, 4.0) - &d1), 1.0 / 3.0);
                    errs.push(linalg::max_abs(&(&r - &d2)));
                    dots.push(Some(r));
                }
                _ => {
                    errs.push(0.0);
                    dots.push(None);
                }
            }
        }
        Ok((dots, errs))
    }

    pub fn generator(&self, t: f64, eps: f64, eta: f64, order: usize) -> Result<DressingGenerator> {
        Ok(DressingGenerator { table: self.table(t, order)?, eps, eta, order })
    }

    /// `S_t` for `(ε, η)` at order `n`.
    pub fn dressing(&self, t: f64, eps: f64, eta: f64, n: usize) -> Result<Matrix> {
        if n == 0 {
            return Ok(linalg::zeros(self.schedule.dim()));
        }
        self.table(t, n)?.assemble(eps, eta, n)
    }

    /// `|ω_t(i[C, A])|` with `C = L^{j,i} + i[K^{j,i}, H]`; vanishes when
    /// `K^{j,i}` solves its order. With `omit_solution` the `K` part is left
    /// out, which should leave a visible residual.
    pub fn cancellation_residual(&self, t: f64, j: usize, i: usize, a: &Matrix, omit_solution: bool) -> Result<f64> {
        let tab = self.table(t, j)?;
        let snap = self.snapshot(t)?;
        let l = tab.get_l(j, i).ok_or_else(|| NeassError::Argument(format!("coefficient ({j}, {i}) is masked out")))?;
        let mut c = l.clone();
        if !omit_solution {
            let k = tab.get(j, i).expect("solved with its source");
            linalg::add_scaled(&mut c, I, &linalg::commutator(k, &snap.h));
        }
        let omega = snap.ground_state();
        Ok(omega.expectation(&linalg::scale(&linalg::commutator(&c, a), I)).norm())
    }

    /// Recomputes `L^{2,2}` through the interaction calculus (per-anchor
    /// `K^{1,1}` and commutator interactions) and returns the max-abs
    /// difference to the global-matrix value.
    pub fn interaction_shadow_second_order(&self, t: f64) -> Result<f64> {
        if !Mask::keeps(self.config.mask, 2, 2) {
            return Err(NeassError::Argument("the (2, 2) coefficient is masked out".into()));
        }
        let space = self.schedule.space();
        let snap = self.snapshot(t)?;
        let h_int = self.schedule.h_interaction(t);
        let (h1, v) = self.schedule.perturbation_interaction(t);
        let chain = zero_chain(space, &h_int);
        let k11: Interaction =
            spectral::inverse_liouvillian_interaction(space, &snap.spec, &snap.filter, &snap.perturbation, &chain)
                .scaled(-1.0);
        let ikh = commutator_interaction(space, &k11, None, &h_int)?;
        let double = commutator_interaction(space, &k11, None, &ikh)?;
        let ikp = commutator_interaction(space, &h1, v.as_ref(), &k11)?;
        let shadow = double.scaled(0.5).plus(&ikp.scaled(-1.0));
        let global = shadow.global(space);
        let tab = self.table(t, 2)?;
        let l22 = tab.get_l(2, 2).expect("unmasked");
        Ok(linalg::max_abs(&(&global - l22)))
    }
}
