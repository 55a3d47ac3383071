//! Named check groups over the bundled scenarios, one report per criterion.

use std::time::Instant;

use neass_core::caralg::OperatorKind;
use neass_core::dynamics::{lieb_robinson_probe, IntegratorOptions, ProbeTarget, Schedule};
use neass_core::expansion::{ExpansionConfig, ExpansionEngine};
use neass_core::linalg::{self, Matrix, C64};
use neass_core::spectral::{self, GroundStateFunctional};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::norms;
use crate::run;
use crate::scenario::Experiment;
use crate::scenario::Scenario;

pub const SSH_RAMP: &str = include_str!("../scenarios/ssh_ramp.json");
pub const NEASS_SSH: &str = include_str!("../scenarios/neass_ssh.json");

/// Time at which the driven reference model is frozen for static checks.
pub const REFERENCE_TIME: f64 = 1.0;

pub const SUITES: [(&str, &[&str]); 6] = [
    ("norms", &["A7"]),
    ("spectral", &["A1", "A2"]),
    ("expansion", &["A5", "A6", "A8"]),
    ("adiabatic", &["A3"]),
    ("neass", &["A4"]),
    ("lr", &["A9"]),
];

pub const CRITERIA: [&str; 9] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9"];

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckReport {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} ({:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.detail
        )
    }
}

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Criterion ids of a suite, or `None` for an unknown name.
pub fn suite_criteria(name: &str) -> Option<&'static [&'static str]> {
    SUITES.iter().find(|(n, _)| *n == name).map(|(_, c)| *c)
}

pub fn reference_scenario() -> Scenario {
    Scenario::from_json(SSH_RAMP).expect("bundled scenario is valid")
}

pub fn neass_scenario() -> Scenario {
    Scenario::from_json(NEASS_SSH).expect("bundled scenario is valid")
}

/// Driven 8-site reference schedule.
pub fn reference_schedule() -> Schedule {
    reference_scenario().build_model(None).expect("bundled model builds").schedule
}

pub fn run_criterion(id: &str) -> Option<CheckReport> {
    let started = Instant::now();
    let (title, outcome) = match id {
        "A1" => ("spectral identity", a1_spectral_identity()),
        "A2" => ("ground-state machinery", a2_ground_state()),
        "A3" => ("adiabatic scaling", scenario_check(reference_scenario())),
        "A4" => ("stationary-state scaling", scenario_check(neass_scenario())),
        "A5" => ("order-by-order cancellation", a5_cancellation()),
        "A6" => ("golden formulas", a6_golden()),
        "A7" => ("norm and algebra properties", a7_norms()),
        "A8" => ("vanishing perturbation and stationarity", a8_specializations()),
        "A9" => ("Lieb-Robinson probe", a9_lieb_robinson()),
        _ => return None,
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(CheckReport {
        id: id.to_string(),
        title: title.to_string(),
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    })
}

type Outcome = neass_core::Result<(bool, String)>;

fn random_b(space: &neass_core::caralg::FockSpace, rng: &mut ChaCha8Rng, k: usize) -> Matrix {
    if k % 2 == 0 {
        let region = spectral::random_region(space, rng, 3);
        space.random_local_operator(rng, &region, OperatorKind::Any)
    } else {
        linalg::random_complex_matrix(rng, space.dim(), space.dim())
    }
}

/// `-i[H, I(B)] = OD(B)` for 100 random `B`, half local and half dense.
fn a1_spectral_identity() -> Outcome {
    let s = reference_schedule();
    let h = s.h(REFERENCE_TIME);
    let spec = spectral::diagonalize(&h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let b = random_b(s.space(), &mut rng, k);
        let ib = spectral::inverse_liouvillian(&spec, &b)?;
        let lhs = linalg::scale(&linalg::commutator(&h, &ib), C64::new(0.0, -1.0));
        let od = spectral::off_diagonal_part(&spec, &b)?;
        worst = worst.max(linalg::op_norm(&(&lhs - &od)) / linalg::op_norm(&b));
    }
    Ok((worst <= 1e-10, format!("max residual / ‖B‖ = {worst:.2e} over 100 B (need <= 1e-10)")))
}

/// `ω(L_H A) = 0` and the gap inequality on 200 local `A`, and
/// `ω(L_Ψ A) = ω(L_{Ψ^OD} A)` on 50 random `(Ψ, A)`.
fn a2_ground_state() -> Outcome {
    let s = reference_schedule();
    let space = s.space();
    let h = s.h(REFERENCE_TIME);
    let spec = spectral::diagonalize(&h)?;
    let g = spec.require_gap()?;
    let omega = GroundStateFunctional::ground_projector(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut stationarity = 0.0f64;
    for _ in 0..200 {
        let region = spectral::random_region(space, &mut rng, 3);
        let a = space.random_local_operator(&mut rng, &region, OperatorKind::Any);
        stationarity = stationarity.max(omega.expectation(&linalg::commutator(&h, &a)).norm());
    }
    let gap = spectral::gap_condition_check(space, &omega, &h, g, 200, &mut rng);
    let mut od = 0.0f64;
    for _ in 0..50 {
        let psi = norms::random_interaction(space, &mut rng).global(space);
        let region = spectral::random_region(space, &mut rng, 3);
        let a = space.random_local_operator(&mut rng, &region, OperatorKind::Any);
        // Ψ^OD is the off-diagonal part of `L_Ψ H = [Ψ, H]`.
        let psi_od = spectral::off_diagonal_part(&spec, &linalg::commutator(&psi, &h))?;
        let lhs = omega.expectation(&linalg::commutator(&psi, &a));
        let rhs = omega.expectation(&linalg::commutator(&psi_od, &a));
        od = od.max((lhs - rhs).norm());
    }
    let passed = stationarity <= 1e-10 && gap.min_slack >= -1e-10 && od <= 1e-9;
    Ok((
        passed,
        format!(
            "max |ω(L_H A)| = {stationarity:.2e}, min gap slack = {:.2e} (g = {g:.4}), max |ω(L_Ψ A) - ω(L_Ψ^OD A)| = {od:.2e}",
            gap.min_slack
        ),
    ))
}

/// Runs a bundled scenario and reports its criteria.
fn scenario_check(sc: Scenario) -> Outcome {
    let result = run::execute(&sc, rayon::current_num_threads())
        .map_err(|e| neass_core::NeassError::Validation(e.to_string()))?;
    let mut parts: Vec<String> = result
        .fits
        .iter()
        .filter(|f| f.min_slope.is_some())
        .map(|f| match &f.fit {
            Some(fit) => format!("n={} slope {:.2} (>= {:.1})", f.order, fit.slope, f.min_slope.unwrap_or(0.0)),
            None => format!("n={} {}", f.order, f.fit_error.as_deref().unwrap_or("no fit")),
        })
        .collect();
    if sc.experiment == Experiment::Neass {
        let worst = result.records.iter().filter_map(|r| r.eta_independence).fold(0.0, f64::max);
        parts.push(format!("η-independence {worst:.1e}"));
    }
    let failed: Vec<&str> = result.criteria.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        parts.push(format!("failed: {}", failed.join(", ")));
    }
    Ok((result.passed, parts.join("; ")))
}

/// Cancellation residuals for every `(j, i)` with `j <= 3`, plus the negative
/// control with `K` left out.
fn a5_cancellation() -> Outcome {
    let s = reference_schedule();
    let space = s.space();
    let engine = ExpansionEngine::new(&s, ExpansionConfig { order: 3, ..Default::default() })?;
    let t = REFERENCE_TIME;
    let tab = engine.table(t, 3)?;
    let snap = engine.snapshot(t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let samples: Vec<Matrix> = (0..50)
        .map(|_| {
            let region = spectral::random_region(space, &mut rng, 3);
            space.random_local_operator(&mut rng, &region, OperatorKind::Any)
        })
        .collect();
    let mut worst = 0.0f64;
    let mut weakest_control = f64::INFINITY;
    for j in 1..=3 {
        for i in 0..=j {
            let (Some(l), Some(k)) = (tab.get_l(j, i), tab.get(j, i)) else { continue };
            let mut c = l.clone();
            linalg::add_scaled(&mut c, C64::new(0.0, 1.0), &linalg::commutator(k, &snap.h));
            let c_norm = linalg::op_norm(&c);
            let mut control = 0.0f64;
            for a in &samples {
                let scale = c_norm * linalg::op_norm(a);
                if scale == 0.0 {
                    continue;
                }
                worst = worst.max(engine.cancellation_residual(t, j, i, a, false)? / scale);
                control = control.max(engine.cancellation_residual(t, j, i, a, true)? / scale);
            }
            weakest_control = weakest_control.min(control);
        }
    }
    Ok((
        worst <= 1e-9 && weakest_control > 1e-3,
        format!(
            "max residual / scale = {worst:.2e} (need <= 1e-9); weakest control = {weakest_control:.2e} (need > 1e-3)"
        ),
    ))
}

/// Collector output against closed forms built from spectral primitives only.
fn a6_golden() -> Outcome {
    let s = reference_schedule();
    let engine = ExpansionEngine::new(&s, ExpansionConfig { order: 2, ..Default::default() })?;
    let t = REFERENCE_TIME;
    let tab = engine.table(t, 2)?;
    let snap = engine.snapshot(t)?;
    let (h, p) = (&snap.h, &snap.perturbation);
    let i = C64::new(0.0, 1.0);
    let comm = linalg::commutator;
    let inv = |b: &Matrix| spectral::inverse_liouvillian_with(&snap.spec, &snap.filter, b);
    let od = |b: &Matrix| spectral::off_diagonal_part_with(&snap.spec, &snap.filter, b);
    // C = L - OD([L, H]) for a source L.
    let cancelled = |l: &Matrix| l - &od(&comm(l, h));
    let collector_c = |j: usize, i_: usize| -> Matrix {
        let mut c = tab.get_l(j, i_).expect("unmasked").clone();
        linalg::add_scaled(&mut c, i, &comm(tab.get(j, i_).expect("unmasked"), h));
        c
    };

    let c11 = cancelled(p);
    let c10 = cancelled(&inv(&comm(&snap.h_dot, h)));
    let k11 = linalg::scale_real(&inv(&comm(p, h)), -1.0);
    let l22 = &linalg::scale_real(&comm(&k11, &comm(&k11, h)), -0.5) + &linalg::scale(&comm(&k11, p), i);
    let c22 = cancelled(&l22);
    let errs = [
        ("C11", linalg::op_norm(&(&collector_c(1, 1) - &c11))),
        ("C10", linalg::op_norm(&(&collector_c(1, 0) - &c10))),
        ("C22", linalg::op_norm(&(&collector_c(2, 2) - &c22))),
    ];
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    Ok((worst <= 1e-12, format!("{detail} (need <= 1e-12)")))
}

fn a7_norms() -> Outcome {
    let reports = norms::all(100, 707);
    let passed = reports.iter().all(|r| r.violations == 0 && r.instances == 100);
    let detail = reports
        .iter()
        .map(|r| format!("{}: {}/{} violations", r.name, r.violations, r.instances))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((passed, detail))
}

/// Exact zeros: the whole table on a frozen unperturbed schedule, and the
/// `i < j` entries on a constant perturbed schedule.
fn a8_specializations() -> Outcome {
    let mut frozen = neass_scenario();
    if let Some(crate::scenario::Template::SshRamp { interaction, field, .. }) = &mut frozen.model.template {
        *interaction = 0.0;
        *field = 0.0;
    }
    let frozen = frozen.build_model(None).map_err(|e| neass_core::NeassError::Validation(e.to_string()))?.schedule;
    let engine = ExpansionEngine::new(&frozen, ExpansionConfig { order: 3, ..Default::default() })?;
    let tab = engine.table(1.0, 3)?;
    let mut frozen_max = 0.0f64;
    for j in 1..=3 {
        for i in 0..=j {
            frozen_max = frozen_max.max(tab.get(j, i).map(linalg::max_abs).unwrap_or(0.0));
        }
    }

    let constant =
        neass_scenario().build_model(None).map_err(|e| neass_core::NeassError::Validation(e.to_string()))?.schedule;
    let engine = ExpansionEngine::new(&constant, ExpansionConfig { order: 3, ..Default::default() })?;
    let tab = engine.table(1.0, 3)?;
    let mut below = 0.0f64;
    let mut diagonal = f64::INFINITY;
    for j in 1..=3 {
        for i in 0..=j {
            let m = tab.get(j, i).map(linalg::max_abs).unwrap_or(0.0);
            if i < j {
                below = below.max(m);
            } else {
                diagonal = diagonal.min(m);
            }
        }
    }
    Ok((
        frozen_max == 0.0 && below == 0.0 && diagonal > 0.0,
        format!(
            "frozen unperturbed max |K| = {frozen_max:e}; constant schedule max |K^(j,i<j)| = {below:e}, min |K^(j,j)| = {diagonal:.2e}"
        ),
    ))
}

/// Commutator growth on a 10-site frozen chain from the left edge.
fn a9_lieb_robinson() -> Outcome {
    let mut sc = neass_scenario();
    sc.geometry = crate::scenario::GeometrySpec::Chain { sites: 10, flavors: 1 };
    let s = sc.build_model(None).map_err(|e| neass_core::NeassError::Validation(e.to_string()))?.schedule;
    let space = s.space();
    let a = space.number(0);
    let targets: Vec<ProbeTarget> =
        (1..space.num_sites()).map(|d| ProbeTarget { distance: d, operator: space.number(d) }).collect();
    let times = [0.25, 0.5, 1.0, 2.0];
    let report = lieb_robinson_probe(&s, 0.0, 1.0, 0.0, &a, &targets, &times, &IntegratorOptions::default())?;
    let short = 1;
    let within = report.norms.iter().flatten().all(|&n| n <= report.bound * (1.0 + 1e-12));
    let fit = report
        .fit
        .as_ref()
        .map(|f| {
            format!(
                "κ = {}, ν = {:.2}, v = {:.2}, rms log residual {:.2}",
                f.kappa, f.nu, f.velocity, f.rms_log_residual
            )
        })
        .unwrap_or_else(|| "no light-cone fit".to_string());
    let monotone = report.monotone[short];
    Ok((
        monotone && within && report.fit.is_some(),
        format!(
            "t = {}: monotone {monotone}, norms {:.1e} .. {:.1e}; within 2‖A‖‖B‖: {within}; {fit}",
            times[short],
            report.norms[short][0],
            report.norms[short].last().copied().unwrap_or(0.0)
        ),
    ))
}
