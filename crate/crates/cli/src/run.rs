//! Grid execution: one drift evaluation per grid point, then slope fits and
//! the pass/fail criteria.

use std::time::Instant;

use neass_core::dynamics::{drift_trajectory, neass_drift, ToleranceBudget};
use neass_core::expansion::{ExpansionConfig, ExpansionEngine};
use neass_core::linalg;
use neass_core::NeassError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fit::{fit_slope, SlopeFit};
use crate::scenario::{DriftMetric, Experiment, Model, Scenario, ScenarioError};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// Deviation allowed between stationary dressed-state values at different η.
pub const ETA_INDEPENDENCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub size_index: usize,
    pub sites: usize,
    pub order: usize,
    pub eps: f64,
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    GapError,
    Stiffness,
    Error,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub name: String,
    pub drift_final: f64,
    pub drift_sup: f64,
    /// Dressed expectation at the final time.
    pub dressed: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(flatten)]
    pub point: GridPoint,
    pub status: PointStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggested_eta_floor: Option<f64>,
    pub observables: Vec<ObservableRecord>,
    /// Raw spectral gap at the final time.
    pub gap: Option<f64>,
    /// Filter gap of the expansion engine.
    pub filter_gap: Option<f64>,
    /// `‖S_t‖` of the dressing generator at the final time.
    pub dressing_norm: Option<f64>,
    pub budget: Option<ToleranceBudget>,
    /// Largest deviation of stationary dressed values across the η grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_independence: Option<f64>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl PointRecord {
    fn failed(point: GridPoint, err: &NeassError) -> Self {
        let (status, floor) = match err {
            NeassError::Gap(_) => (PointStatus::GapError, None),
            NeassError::Stiffness { suggested_eta_floor, .. } => (PointStatus::Stiffness, Some(*suggested_eta_floor)),
            _ => (PointStatus::Error, None),
        };
        Self {
            point,
            status,
            message: Some(err.to_string()),
            suggested_eta_floor: floor,
            observables: Vec::new(),
            gap: None,
            filter_gap: None,
            dressing_norm: None,
            budget: None,
            eta_independence: None,
            wall_seconds: 0.0,
        }
    }

    /// The summary drift of one observable under `metric`.
    pub fn drift(&self, k: usize, metric: DriftMetric) -> f64 {
        let o = &self.observables[k];
        match metric {
            DriftMetric::Final => o.drift_final,
            DriftMetric::Sup => o.drift_sup,
        }
    }

    /// The largest summary drift over all observables.
    pub fn drift_max(&self, metric: DriftMetric) -> f64 {
        (0..self.observables.len()).map(|k| self.drift(k, metric)).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesFit {
    pub id: String,
    /// Series sharing a group differ only in the observable.
    pub group: String,
    pub sites: usize,
    pub order: usize,
    /// Fixed ε of an η series; absent for ε series.
    pub eps: Option<f64>,
    /// Observable name, or `max` for the largest drift over all observables.
    pub observable: String,
    pub x_label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<SlopeFit>,
    pub fit_error: Option<String>,
    /// Asserted lower bound on the slope, when this series is asserted.
    pub min_slope: Option<f64>,
}

impl SeriesFit {
    pub fn passed(&self) -> Option<bool> {
        let min = self.min_slope?;
        Some(self.fit.as_ref().is_some_and(|f| f.slope >= min && f.floor_limited.is_empty()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Environment {
    pub package_version: String,
    pub threads: usize,
    pub seed: u64,
    pub os: String,
    pub arch: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub scenario_name: String,
    pub scenario_hash: String,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
    pub environment: Environment,
    pub scenario: Scenario,
    pub sample_times: Vec<f64>,
    pub records: Vec<PointRecord>,
    pub fits: Vec<SeriesFit>,
    pub criteria: Vec<Criterion>,
    pub passed: bool,
}

impl RunResult {
    pub fn numerical_failures(&self) -> usize {
        self.records.iter().filter(|r| matches!(r.status, PointStatus::GapError | PointStatus::Stiffness)).count()
    }

    pub fn other_failures(&self) -> usize {
        self.records.iter().filter(|r| r.status == PointStatus::Error).count()
    }
}

/// All grid points in canonical order: size, order, ε, then η.
/// Stationary-state scenarios evaluate at η = 1 and use the η grid only for
/// the independence check, so they have no η axis.
pub fn plan(scenario: &Scenario) -> Result<Vec<GridPoint>, ScenarioError> {
    let mut out = Vec::new();
    for (size_index, size) in scenario.sizes().into_iter().enumerate() {
        let sites = scenario
            .geometry
            .build(size)
            .map_err(|e| ScenarioError::Invalid { pointer: "/geometry".into(), message: e.to_string() })?;
        let etas: Vec<f64> = match scenario.experiment {
            Experiment::Adiabatic => scenario.sweep.eta.clone(),
            Experiment::Neass => vec![1.0],
        };
        for &order in &scenario.orders {
            for &eps in &scenario.sweep.eps {
                for &eta in &etas {
                    out.push(GridPoint { index: out.len(), size_index, sites: sites.num_sites(), order, eps, eta });
                }
            }
        }
    }
    Ok(out)
}

/// Runs every grid point on the current rayon pool and merges by grid index.
pub fn execute(scenario: &Scenario, threads: usize) -> Result<RunResult, ScenarioError> {
    let points = plan(scenario)?;
    let models: Vec<Model> = scenario.sizes().into_iter().map(|s| scenario.build_model(s)).collect::<Result<_, _>>()?;
    let max_order = scenario.orders.iter().copied().max().unwrap_or(0).max(1);
    let config = ExpansionConfig { order: max_order, fd_step: scenario.tolerances.fd_step, ..Default::default() };
    let engines: Vec<Result<ExpansionEngine, NeassError>> =
        models.iter().map(|m| ExpansionEngine::new(&m.schedule, config.clone())).collect();

    let mut records: Vec<PointRecord> = points
        .par_iter()
        .map(|p| {
            let started = Instant::now();
            let mut rec = match &engines[p.size_index] {
                Ok(engine) => evaluate(scenario, &models[p.size_index], engine, p)
                    .unwrap_or_else(|e| PointRecord::failed(p.clone(), &e)),
                Err(e) => PointRecord::failed(p.clone(), e),
            };
            rec.wall_seconds = started.elapsed().as_secs_f64();
            rec
        })
        .collect();
    records.sort_by_key(|r| r.point.index);

    let fits = fit_series(scenario, &models, &records);
    let criteria = criteria(scenario, &records, &fits);
    let passed = criteria.iter().all(|c| c.passed);
    Ok(RunResult {
        schema_version: RESULTS_SCHEMA_VERSION,
        scenario_name: scenario.name.clone(),
        scenario_hash: scenario.hash(),
        timestamp: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        environment: Environment {
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            seed: scenario.seed,
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        },
        scenario: scenario.clone(),
        sample_times: scenario.sample_times(),
        records,
        fits,
        criteria,
        passed,
    })
}

fn evaluate(
    scenario: &Scenario,
    model: &Model,
    engine: &ExpansionEngine,
    p: &GridPoint,
) -> Result<PointRecord, NeassError> {
    let times = scenario.sample_times();
    let t0 = scenario.times.t0;
    let t_end = *times.last().expect("at least one sample time");
    let obs: Vec<_> = model.observables.iter().map(|(_, m)| m.clone()).collect();
    let opts = scenario.integrator();
    let reports = match scenario.experiment {
        Experiment::Adiabatic => drift_trajectory(engine, p.eps, p.eta, p.order, t0, &times, &obs, &opts)?,
        Experiment::Neass => neass_drift(engine, p.eps, p.order, t0, &times, &obs, &opts)?,
    };
    let last = reports.last().expect("one report per sample time");
    let observables = model
        .observables
        .iter()
        .enumerate()
        .map(|(k, (name, _))| ObservableRecord {
            name: name.clone(),
            drift_final: last.drift[k],
            drift_sup: reports.iter().map(|r| r.drift[k]).fold(0.0, f64::max),
            dressed: last.dressed[k],
        })
        .collect();
    let snap = engine.snapshot(t_end)?;
    let s = engine.dressing(t_end, p.eps, p.eta, p.order)?;
    let eta_independence = match scenario.experiment {
        Experiment::Neass => Some(eta_independence(engine, model, t0, p.eps, p.order, &scenario.sweep.eta)?),
        Experiment::Adiabatic => None,
    };
    Ok(PointRecord {
        point: p.clone(),
        status: PointStatus::Ok,
        message: None,
        suggested_eta_floor: None,
        observables,
        gap: snap.spec.gap_raw,
        filter_gap: Some(engine.filter_gap()),
        dressing_norm: Some(linalg::op_norm(&s)),
        budget: Some(last.budget),
        eta_independence,
        wall_seconds: 0.0,
    })
}

/// `max_{η, A} |ω^{ε,η}_{t0}(A) - ω^{ε,1}_{t0}(A)|` over the η grid.
fn eta_independence(
    engine: &ExpansionEngine,
    model: &Model,
    t0: f64,
    eps: f64,
    order: usize,
    etas: &[f64],
) -> Result<f64, NeassError> {
    let reference = neass_core::dynamics::super_adiabatic_state(engine, t0, eps, 1.0, order)?;
    let mut worst = 0.0f64;
    for &eta in etas {
        let state = neass_core::dynamics::super_adiabatic_state(engine, t0, eps, eta, order)?;
        for (_, a) in &model.observables {
            worst = worst.max((state.expectation(a) - reference.expectation(a)).norm());
        }
    }
    Ok(worst)
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// One series per (size, order, [ε,] observable or `max`).
fn fit_series(scenario: &Scenario, models: &[Model], records: &[PointRecord]) -> Vec<SeriesFit> {
    let metric = scenario.times.metric;
    let floor = scenario.tolerances.floor;
    let tol = scenario.assertions.slope_tolerance;
    let mut out = Vec::new();
    for (size_index, model) in models.iter().enumerate() {
        let sites = model.space().num_sites();
        for &order in &scenario.orders {
            let groups: Vec<(Option<f64>, Vec<&PointRecord>)> = match scenario.experiment {
                Experiment::Adiabatic => scenario
                    .sweep
                    .eps
                    .iter()
                    .map(|&eps| {
                        let rs = records
                            .iter()
                            .filter(|r| {
                                r.point.size_index == size_index && r.point.order == order && r.point.eps == eps
                            })
                            .collect();
                        (Some(eps), rs)
                    })
                    .collect(),
                Experiment::Neass => {
                    let rs = records
                        .iter()
                        .filter(|r| r.point.size_index == size_index && r.point.order == order && r.point.eps > 0.0)
                        .collect();
                    vec![(None, rs)]
                }
            };
            for (eps, rs) in groups {
                let x_of = |r: &PointRecord| match scenario.experiment {
                    Experiment::Adiabatic => r.point.eta,
                    Experiment::Neass => r.point.eps,
                };
                let x_label = match scenario.experiment {
                    Experiment::Adiabatic => "eta",
                    Experiment::Neass => "eps",
                };
                // Slopes are only asserted where the bound reduces to a single power.
                let asserted = scenario.assertions.slopes
                    && match scenario.experiment {
                        Experiment::Adiabatic => eps == Some(0.0),
                        Experiment::Neass => true,
                    };
                let ok: Vec<&PointRecord> = rs.iter().copied().filter(|r| r.status == PointStatus::Ok).collect();
                let mut names: Vec<(String, Option<usize>)> =
                    model.observables.iter().enumerate().map(|(k, (n, _))| (n.clone(), Some(k))).collect();
                names.push(("max".to_string(), None));
                for (name, k) in names {
                    let points: Vec<(f64, f64)> = ok
                        .iter()
                        .map(|r| (x_of(r), k.map(|k| r.drift(k, metric)).unwrap_or_else(|| r.drift_max(metric))))
                        .collect();
                    let seed = scenario.seed ^ (out.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                    let (fit, fit_error) = if ok.len() < rs.len() {
                        (None, Some(format!("{} of {} grid points failed", rs.len() - ok.len(), rs.len())))
                    } else {
                        match fit_slope(&points, floor, scenario.assertions.bootstrap, seed) {
                            Ok(f) => (Some(f), None),
                            Err(e) => (None, Some(e.to_string())),
                        }
                    };
                    let group = match eps {
                        Some(e) => format!("L{sites}_n{order}_eps{}", fmt_num(e)),
                        None => format!("L{sites}_n{order}"),
                    };
                    out.push(SeriesFit {
                        id: format!("{group}_{name}"),
                        group,
                        sites,
                        order,
                        eps,
                        observable: name.clone(),
                        x_label: x_label.to_string(),
                        points,
                        fit,
                        fit_error,
                        min_slope: (asserted && k.is_none()).then_some(order as f64 + 1.0 - tol),
                    });
                }
            }
        }
    }
    out
}

fn criteria(scenario: &Scenario, records: &[PointRecord], fits: &[SeriesFit]) -> Vec<Criterion> {
    let mut out = Vec::new();
    for f in fits {
        if let Some(passed) = f.passed() {
            let detail = match (&f.fit, &f.fit_error) {
                (Some(fit), _) if !fit.floor_limited.is_empty() => {
                    format!("slope {:.3} with {} floor-limited points (need none)", fit.slope, fit.floor_limited.len())
                }
                (Some(fit), _) => format!(
                    "slope {:.3} [{:.3}, {:.3}], need >= {:.2}",
                    fit.slope,
                    fit.ci[0],
                    fit.ci[1],
                    f.min_slope.unwrap_or(0.0)
                ),
                (None, Some(e)) => format!("no fit: {e}"),
                (None, None) => "no fit".to_string(),
            };
            out.push(Criterion { name: format!("slope {}", f.id), passed, detail });
        }
    }
    if scenario.experiment == Experiment::Neass {
        let worst = records.iter().filter_map(|r| r.eta_independence).fold(0.0, f64::max);
        let all = records.iter().all(|r| r.status != PointStatus::Ok || r.eta_independence.is_some());
        out.push(Criterion {
            name: "eta independence".to_string(),
            passed: all && worst <= ETA_INDEPENDENCE_TOL,
            detail: format!("max deviation {worst:.3e}, need <= {ETA_INDEPENDENCE_TOL:e}"),
        });
    }
    let failed = records.iter().filter(|r| r.status != PointStatus::Ok).count();
    out.push(Criterion {
        name: "grid points".to_string(),
        passed: failed == 0,
        detail: format!("{} of {} evaluated", records.len() - failed, records.len()),
    });
    out
}
