//! Commutator growth `‖[𝔘_{s,t} A, B]‖` over a (time, distance) grid and a
//! light-cone fit of the form `f(t) / (1 + max(0, d^{1/κ} - v|t-s|/η))^ν`.

use serde::{Deserialize, Serialize};

use super::propagate::{propagator, IntegratorOptions};
use super::schedule::Schedule;
use crate::caralg::{parity_of, support, Parity};
use crate::linalg::{self, Matrix, C64};
use crate::{NeassError, Result};

/// A probe operator `B` at a given distance from `A`.
#[derive(Clone, Debug)]
pub struct ProbeTarget {
    pub distance: usize,
    pub operator: Matrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LightConeFit {
    pub kappa: f64,
    pub nu: f64,
    pub velocity: f64,
    /// RMS residual of the log-norms.
    pub rms_log_residual: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LiebRobinsonReport {
    pub times: Vec<f64>,
    pub distances: Vec<usize>,
    /// `norms[time][distance]`
    pub norms: Vec<Vec<f64>>,
    pub bound: f64,
    /// Per time: whether the norm is non-increasing in distance.
    pub monotone: Vec<bool>,
    pub fit: Option<LightConeFit>,
}

/// `‖[𝔘_{s,t} A, B]‖` for every `t` in `times` and every target.
///
/// `A` must be even and its support disjoint from every target's support.
pub fn lieb_robinson_probe(
    schedule: &Schedule,
    eps: f64,
    eta: f64,
    s: f64,
    a: &Matrix,
    targets: &[ProbeTarget],
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<LiebRobinsonReport> {
    let space = schedule.space();
    if parity_of(a) != Parity::Even {
        return Err(NeassError::Usage("the evolved observable must be even".into()));
    }
    let supp_a = support(space, a);
    for target in targets {
        let supp_b = support(space, &target.operator);
        if supp_b.iter().any(|x| supp_a.contains(x)) {
            return Err(NeassError::Usage(format!(
                "target at distance {} overlaps the support of the evolved observable",
                target.distance
            )));
        }
    }
    let norm_a = linalg::op_norm(a);
    let bound = 2.0 * norm_a * targets.iter().map(|t| linalg::op_norm(&t.operator)).fold(0.0, f64::max);
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let evolved = if t == s {
            a.clone()
        } else if schedule.is_constant_on(s.min(t), s.max(t)) {
            // Exact exponential of the frozen generator.
            let g = schedule.generator(eps).derivative(schedule.dim(), s, 0);
            let u = linalg::expm_hermitian(&g, (t - s) / eta);
            linalg::conjugate_adjoint(&u, a)
        } else {
            propagator(schedule, eps, eta, s, t, opts)?.heisenberg(a)
        };
        let row = targets
            .iter()
            .map(|target| {
                let c = linalg::commutator(&evolved, &target.operator);
                commutator_norm(&c)
            })
            .collect::<Vec<_>>();
        norms.push(row);
    }
    let monotone = norms.iter().map(|row| row.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-14)).collect();
    let distances: Vec<usize> = targets.iter().map(|t| t.distance).collect();
    let fit = fit_light_cone(times, &distances, &norms, s, eta);
    Ok(LiebRobinsonReport { times: times.to_vec(), distances, norms, bound, monotone, fit })
}

/// Operator norm; uses the Hermitian route when `i C` is Hermitian.
fn commutator_norm(c: &Matrix) -> f64 {
    let ic = linalg::scale(c, C64::new(0.0, 1.0));
    if linalg::hermitian_deviation(&ic) <= 1e-12 * linalg::max_abs(&ic).max(1e-300) {
        let vals = linalg::eigvalsh(&linalg::hermitian_part(&ic));
        vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        linalg::op_norm(c)
    }
}

/// Grid search over `(κ, v)` with per-time prefactors and `ν` by least squares.
fn fit_light_cone(times: &[f64], distances: &[usize], norms: &[Vec<f64>], s: f64, eta: f64) -> Option<LightConeFit> {
    const FLOOR: f64 = 1e-13;
    let rows: Vec<(usize, usize, f64)> = norms
        .iter()
        .enumerate()
        .flat_map(|(ti, row)| row.iter().enumerate().map(move |(di, &v)| (ti, di, v)))
        .filter(|&(ti, _, v)| v > FLOOR && times[ti] != s)
        .collect();
    if rows.len() < 3 {
        return None;
    }
    let kappas = [0.5, 1.0, 2.0];
    let velocities: Vec<f64> = (0..41).map(|k| 0.1 * 10f64.powf(k as f64 / 20.0)).collect();
    let time_ids: Vec<usize> = {
        let mut v: Vec<usize> = rows.iter().map(|r| r.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut best: Option<LightConeFit> = None;
    for &kappa in &kappas {
        for &v in &velocities {
            // Model: log N = c_t - ν x, x = log(1 + max(0, d^{1/κ} - v|t-s|/η)).
            let x = |ti: usize, di: usize| {
                let reach = v * (times[ti] - s).abs() / eta;
                (1.0 + ((distances[di] as f64).powf(1.0 / kappa) - reach).max(0.0)).ln()
            };
            // Eliminate c_t by centering per time, then ν = -Σ xy / Σ xx.
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            let mut centered = Vec::new();
            for &tid in &time_ids {
                let pts: Vec<(f64, f64)> =
                    rows.iter().filter(|r| r.0 == tid).map(|&(ti, di, val)| (x(ti, di), val.ln())).collect();
                let n = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
                for (px, py) in pts {
                    sxx += (px - mx) * (px - mx);
                    sxy += (px - mx) * (py - my);
                    centered.push((px - mx, py - my));
                }
            }
            let nu = if sxx > 0.0 { (-sxy / sxx).max(0.0) } else { 0.0 };
            let rss: f64 = centered.iter().map(|(cx, cy)| (cy + nu * cx).powi(2)).sum();
            let rms = (rss / centered.len() as f64).sqrt();
            if best.as_ref().is_none_or(|b| rms < b.rms_log_residual) {
                best = Some(LightConeFit { kappa, nu, velocity: v, rms_log_residual: rms, points: rows.len() });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caralg::{FockSpace, LatticeGeometry};
    use crate::dynamics::{Ramp, ScheduleTerm};

    fn chain(len: usize) -> Schedule {
        let space = FockSpace::new(LatticeGeometry::chain(len, 1).unwrap()).unwrap();
        let h = (0..len - 1)
            .map(|x| {
                let a = space.creation(x, 0) * space.annihilation(x + 1, 0);
                ScheduleTerm { sites: vec![x, x + 1], matrix: -(&a + a.adjoint()), ramp: Ramp::constant(1.0) }
            })
            .collect();
        Schedule::new(space, h, vec![], None, (0.0, 1.0), None).unwrap()
    }

    #[test]
    fn decay_in_distance_at_short_time() {
        let s = chain(8);
        let space = s.space();
        let a = space.number(0);
        let targets: Vec<ProbeTarget> =
            (1..8).map(|d| ProbeTarget { distance: d, operator: space.number(d) }).collect();
        let r = lieb_robinson_probe(&s, 0.0, 1.0, 0.0, &a, &targets, &[0.0, 0.5, 1.0], &IntegratorOptions::default())
            .unwrap();
        assert!(r.norms[0].iter().all(|&v| v == 0.0));
        assert!(r.monotone[1] && r.monotone[2]);
        for row in &r.norms {
            assert!(row.iter().all(|&v| v <= r.bound + 1e-12));
        }
        assert!(r.fit.is_some());
    }

    #[test]
    fn rejects_overlap_and_odd_observables() {
        let s = chain(3);
        let space = s.space();
        let t = [ProbeTarget { distance: 0, operator: space.number(0) }];
        let o = IntegratorOptions::default();
        assert!(matches!(
            lieb_robinson_probe(&s, 0.0, 1.0, 0.0, &space.number(0), &t, &[1.0], &o),
            Err(NeassError::Usage(_))
        ));
        let t = [ProbeTarget { distance: 2, operator: space.number(2) }];
        assert!(matches!(
            lieb_robinson_probe(&s, 0.0, 1.0, 0.0, &space.annihilation(0, 0), &t, &[1.0], &o),
            Err(NeassError::Usage(_))
        ));
    }
}
