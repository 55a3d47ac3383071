//! Scenario documents: schema, validation and model construction.
//!
//! A scenario is a JSON object. Unknown keys are rejected. Validation errors
//! carry a JSON pointer to the offending key.

use std::path::Path;

use neass_core::caralg::{FockSpace, LatticeGeometry};
use neass_core::dynamics::{IntegratorOptions, Ramp, RampedPotential, Schedule, ScheduleTerm};
use neass_core::expr;
use neass_core::interaction::LipschitzPotential;
use neass_core::linalg::{self, Matrix, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
}

fn invalid(pointer: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { pointer: pointer.into(), message: message.into() }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub experiment: Experiment,
    pub geometry: GeometrySpec,
    pub model: ModelSpec,
    /// Interval `[t0, t1]` on which the schedule is defined.
    pub interval: [f64; 2],
    #[serde(default)]
    pub region: Option<Vec<usize>>,
    /// Expansion orders `n` to sweep.
    pub orders: Vec<usize>,
    pub sweep: Sweep,
    pub times: TimeSpec,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub assertions: Assertions,
}

/// What each grid point measures.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Drift of the dressed state along a driven schedule; slopes fitted in η.
    Adiabatic,
    /// Drift of the stationary dressed state under `𝔘^{ε,1}`; slopes fitted in ε.
    Neass,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Chain {
        sites: usize,
        #[serde(default = "one")]
        flavors: usize,
    },
    Rectangle {
        width: usize,
        height: usize,
        #[serde(default = "one")]
        flavors: usize,
    },
}

fn one() -> usize {
    1
}

impl GeometrySpec {
    pub fn build(&self, size_override: Option<usize>) -> neass_core::Result<LatticeGeometry> {
        match *self {
            GeometrySpec::Chain { sites, flavors } => LatticeGeometry::chain(size_override.unwrap_or(sites), flavors),
            GeometrySpec::Rectangle { width, height, flavors } => LatticeGeometry::rectangle(width, height, flavors),
        }
    }
}

/// Either a named template or explicit term lists.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub template: Option<Template>,
    #[serde(default)]
    pub hamiltonian: Vec<TermSpec>,
    #[serde(default)]
    pub perturbation: Vec<TermSpec>,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Template {
    /// Open spinless chain with hoppings `t + (-1)^x δ(t)` on bond `(x, x+1)`,
    /// staggered mass `Δ (-1)^x n_x`, perturbation `U Σ n_x n_{x+1}` and the
    /// centered linear potential `F (x - (L-1)/2) n_x`.
    SshRamp {
        #[serde(default = "unit")]
        hopping: f64,
        dimerization: Ramp,
        #[serde(default)]
        mass: f64,
        #[serde(default)]
        interaction: f64,
        #[serde(default)]
        field: f64,
    },
}

fn unit() -> f64 {
    1.0
}

/// One Hamiltonian or perturbation term, `f(t) · expr`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub expr: String,
    #[serde(default = "constant_one")]
    pub ramp: Ramp,
}

fn constant_one() -> Ramp {
    Ramp::constant(1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// Explicit per-site values; mutually exclusive with `field`.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub field: Option<[f64; 2]>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "constant_one")]
    pub ramp: Ramp,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
    /// Chain lengths; only for chain geometries with a template model.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t0: f64,
    pub t: f64,
    /// Number of equally spaced sample times in `(t0, t]`.
    #[serde(default = "one")]
    pub samples: usize,
    #[serde(default)]
    pub metric: DriftMetric,
}

/// Which number summarizes the drift trajectory of a grid point.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DriftMetric {
    /// The value at `t`.
    #[default]
    Final,
    /// The maximum over all sample times.
    Sup,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Density { site: usize },
    Current { bond: [usize; 2] },
    Expr { name: String, expr: String },
}

impl ObservableSpec {
    pub fn name(&self) -> String {
        match self {
            ObservableSpec::Density { site } => format!("n{site}"),
            ObservableSpec::Current { bond } => format!("j{}_{}", bond[0], bond[1]),
            ObservableSpec::Expr { name, .. } => name.clone(),
        }
    }

    fn sites(&self) -> Vec<usize> {
        match self {
            ObservableSpec::Density { site } => vec![*site],
            ObservableSpec::Current { bond } => bond.to_vec(),
            ObservableSpec::Expr { .. } => vec![],
        }
    }

    pub fn build(&self, space: &FockSpace) -> neass_core::Result<Matrix> {
        match self {
            ObservableSpec::Density { site } => Ok(space.number(*site)),
            ObservableSpec::Current { bond } => Ok(bond_current(space, bond[0], bond[1])),
            ObservableSpec::Expr { expr: src, .. } => expr::build(space, src),
        }
    }
}

/// `i (a*_x a_y - a*_y a_x)` summed over flavors.
pub fn bond_current(space: &FockSpace, x: usize, y: usize) -> Matrix {
    let mut out = space.zero();
    for f in 0..space.geometry().flavors() {
        let hop = space.creation(x, f) * space.annihilation(y, f);
        linalg::add_scaled(&mut out, C64::new(0.0, 1.0), &(&hop - &linalg::adjoint(&hop)));
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_integrator")]
    pub integrator: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Drift values at or below this are floor-limited and left out of fits.
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_integrator() -> f64 {
    1e-12
}

fn default_fd_step() -> f64 {
    1e-3
}

fn default_floor() -> f64 {
    1e-12
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { integrator: default_integrator(), fd_step: default_fd_step(), floor: default_floor() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    /// Assert fitted slopes of at least `n + 1 - slope_tolerance`.
    #[serde(default = "yes")]
    pub slopes: bool,
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn yes() -> bool {
    true
}

fn default_slope_tolerance() -> f64 {
    0.3
}

fn default_bootstrap() -> usize {
    1000
}

impl Default for Assertions {
    fn default() -> Self {
        Self { slopes: true, slope_tolerance: default_slope_tolerance(), bootstrap: default_bootstrap() }
    }
}

/// A scenario resolved for one lattice size.
pub struct Model {
    pub schedule: Schedule,
    pub observables: Vec<(String, Matrix)>,
}

impl Model {
    pub fn space(&self) -> &FockSpace {
        self.schedule.space()
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = json_pointer(e.path());
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() {
                ScenarioError::Syntax { line: inner.line(), column: inner.column(), message: inner.to_string() }
            } else {
                invalid(pointer, inner.to_string())
            }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn sizes(&self) -> Vec<Option<usize>> {
        match &self.sweep.sizes {
            Some(s) => s.iter().map(|&l| Some(l)).collect(),
            None => vec![None],
        }
    }

    /// Sample times `t0 + k (t - t0) / samples`, `k = 1..=samples`.
    pub fn sample_times(&self) -> Vec<f64> {
        let TimeSpec { t0, t, samples, .. } = self.times;
        (1..=samples).map(|k| t0 + (t - t0) * k as f64 / samples as f64).collect()
    }

    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions { tol: self.tolerances.integrator, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(invalid("/schema_version", format!("expected {SCENARIO_SCHEMA_VERSION}")));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(invalid("/name", "must be a non-empty identifier of [A-Za-z0-9_-]"));
        }
        let [a, b] = self.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid("/interval", "must be finite with t0 < t1"));
        }
        if self.orders.is_empty() {
            return Err(invalid("/orders", "must be non-empty"));
        }
        if let Some(k) = self.orders.iter().position(|&n| n > 4) {
            return Err(invalid(format!("/orders/{k}"), "orders above 4 are not supported"));
        }
        self.validate_grid("/sweep/eps", &self.sweep.eps, 0.0, 1.0, true)?;
        self.validate_grid("/sweep/eta", &self.sweep.eta, 0.0, 1.0, false)?;
        if let Some(sizes) = &self.sweep.sizes {
            if sizes.is_empty() {
                return Err(invalid("/sweep/sizes", "must be non-empty when present"));
            }
            if !matches!(self.geometry, GeometrySpec::Chain { .. }) || self.model.template.is_none() {
                return Err(invalid("/sweep/sizes", "size sweeps need a chain geometry and a template model"));
            }
            if let Some(k) = sizes.iter().position(|&l| l < 2) {
                return Err(invalid(format!("/sweep/sizes/{k}"), "chains need at least 2 sites"));
            }
        }
        let ts = &self.times;
        if !(ts.t0 >= a && ts.t <= b && ts.t0 <= ts.t) {
            return Err(invalid("/times", "need interval[0] <= t0 <= t <= interval[1]"));
        }
        if ts.samples == 0 {
            return Err(invalid("/times/samples", "must be positive"));
        }
        for (key, v) in [
            ("integrator", self.tolerances.integrator),
            ("fd_step", self.tolerances.fd_step),
            ("floor", self.tolerances.floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("/tolerances/{key}"), "must be positive"));
            }
        }
        if !(self.assertions.slope_tolerance >= 0.0) {
            return Err(invalid("/assertions/slope_tolerance", "must be non-negative"));
        }
        if self.assertions.bootstrap == 0 {
            return Err(invalid("/assertions/bootstrap", "must be positive"));
        }
        self.validate_model()?;
        // Build every size once so expression and site errors surface here.
        for size in self.sizes() {
            let m = self.build_model(size)?;
            if self.experiment == Experiment::Neass && !m.schedule.is_constant_on(ts.t0, ts.t) {
                return Err(invalid("/model", "a neass experiment needs a schedule constant on [t0, t]"));
            }
        }
        Ok(())
    }

    fn validate_grid(
        &self,
        pointer: &str,
        grid: &[f64],
        lo: f64,
        hi: f64,
        closed_lo: bool,
    ) -> Result<(), ScenarioError> {
        if grid.is_empty() {
            return Err(invalid(pointer, "grid must be non-empty"));
        }
        for (k, &v) in grid.iter().enumerate() {
            let ok = v.is_finite() && v <= hi && if closed_lo { v >= lo } else { v > lo };
            if !ok {
                let open = if closed_lo { "[" } else { "(" };
                return Err(invalid(format!("{pointer}/{k}"), format!("must lie in {open}{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn validate_model(&self) -> Result<(), ScenarioError> {
        let m = &self.model;
        let explicit = !m.hamiltonian.is_empty() || !m.perturbation.is_empty() || m.potential.is_some();
        match (&m.template, explicit) {
            (Some(_), true) => {
                return Err(invalid("/model", "use either a template or explicit terms, not both"));
            }
            (None, false) => return Err(invalid("/model/hamiltonian", "an explicit model needs at least one term")),
            _ => {}
        }
        if let Some(Template::SshRamp { .. }) = &m.template {
            if !matches!(self.geometry, GeometrySpec::Chain { flavors: 1, .. }) {
                return Err(invalid("/model/template", "ssh_ramp needs a single-flavor chain"));
            }
        }
        if let Some(p) = &m.potential {
            if p.values.is_some() == p.field.is_some() {
                return Err(invalid("/model/potential", "give exactly one of `values` and `field`"));
            }
        }
        Ok(())
    }

    /// Builds the schedule and observables, for `size` sites when sweeping sizes.
    pub fn build_model(&self, size: Option<usize>) -> Result<Model, ScenarioError> {
        let geo = self.geometry.build(size).map_err(|e| invalid("/geometry", e.to_string()))?;
        let n_sites = geo.num_sites();
        let space = FockSpace::new(geo).map_err(|e| invalid("/geometry", e.to_string()))?;
        let (h, p, v) = match &self.model.template {
            Some(t) => template_terms(&space, t),
            None => self.explicit_terms(&space)?,
        };
        if let Some(region) = &self.region {
            if let Some(k) = region.iter().position(|&x| x >= n_sites) {
                return Err(invalid(format!("/region/{k}"), format!("site outside the lattice of {n_sites} sites")));
            }
        }
        let schedule = Schedule::new(space, h, p, v, (self.interval[0], self.interval[1]), self.region.clone())
            .map_err(|e| invalid("/model", e.to_string()))?;
        let specs = if self.observables.is_empty() { default_observables(n_sites) } else { self.observables.clone() };
        let mut observables = Vec::with_capacity(specs.len());
        for (k, spec) in specs.iter().enumerate() {
            if let Some(&x) = spec.sites().iter().find(|&&x| x >= n_sites) {
                return Err(invalid(format!("/observables/{k}"), format!("site {x} outside the lattice")));
            }
            let m =
                spec.build(schedule.space()).map_err(|e| invalid(format!("/observables/{k}/expr"), e.to_string()))?;
            observables.push((spec.name(), m));
        }
        Ok(Model { schedule, observables })
    }

    fn explicit_terms(
        &self,
        space: &FockSpace,
    ) -> Result<(Vec<ScheduleTerm>, Vec<ScheduleTerm>, Option<RampedPotential>), ScenarioError> {
        let terms = |key: &str, list: &[TermSpec]| -> Result<Vec<ScheduleTerm>, ScenarioError> {
            list.iter()
                .enumerate()
                .map(|(k, t)| {
                    let pointer = format!("/model/{key}/{k}/expr");
                    let e = expr::parse(&t.expr).map_err(|e| invalid(&pointer, e.to_string()))?;
                    let matrix = e.evaluate(space).map_err(|e| invalid(&pointer, e.to_string()))?;
                    let sites = e.sites(space).map_err(|e| invalid(&pointer, e.to_string()))?;
                    if sites.is_empty() {
                        return Err(invalid(&pointer, "term acts on no site"));
                    }
                    Ok(ScheduleTerm { sites, matrix, ramp: t.ramp.clone() })
                })
                .collect()
        };
        let h = terms("hamiltonian", &self.model.hamiltonian)?;
        let p = terms("perturbation", &self.model.perturbation)?;
        let v = match &self.model.potential {
            None => None,
            Some(spec) => {
                let potential = match (&spec.values, spec.field) {
                    (Some(values), _) => {
                        if values.len() != space.num_sites() {
                            return Err(invalid(
                                "/model/potential/values",
                                format!("expected {} values", space.num_sites()),
                            ));
                        }
                        LipschitzPotential::new(values.clone())
                    }
                    (None, Some(field)) => LipschitzPotential::linear(space.geometry(), field, spec.offset),
                    (None, None) => unreachable!("checked in validate_model"),
                };
                Some(RampedPotential { potential, ramp: spec.ramp.clone() })
            }
        };
        Ok((h, p, v))
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

/// Density at the central site and the current on the central bond.
pub fn default_observables(n_sites: usize) -> Vec<ObservableSpec> {
    let c = (n_sites / 2).saturating_sub(1);
    let mut out = vec![ObservableSpec::Density { site: c }];
    if c + 1 < n_sites {
        out.push(ObservableSpec::Current { bond: [c, c + 1] });
    }
    out
}

fn hopping(space: &FockSpace, x: usize, y: usize) -> Matrix {
    let a = space.creation(x, 0) * space.annihilation(y, 0);
    linalg::scale_real(&(&a + &linalg::adjoint(&a)), -1.0)
}

fn template_terms(space: &FockSpace, t: &Template) -> (Vec<ScheduleTerm>, Vec<ScheduleTerm>, Option<RampedPotential>) {
    match t {
        Template::SshRamp { hopping: t0, dimerization, mass, interaction, field } => {
            let l = space.num_sites();
            let stagger = |x: usize| if x % 2 == 0 { 1.0 } else { -1.0 };
            let mut h = Vec::new();
            for x in 0..l - 1 {
                let hop = hopping(space, x, x + 1);
                h.push(ScheduleTerm {
                    sites: vec![x, x + 1],
                    matrix: linalg::scale_real(&hop, *t0),
                    ramp: Ramp::constant(1.0),
                });
                h.push(ScheduleTerm {
                    sites: vec![x, x + 1],
                    matrix: linalg::scale_real(&hop, stagger(x)),
                    ramp: dimerization.clone(),
                });
            }
            if *mass != 0.0 {
                for x in 0..l {
                    h.push(ScheduleTerm {
                        sites: vec![x],
                        matrix: linalg::scale_real(&space.number(x), mass * stagger(x)),
                        ramp: Ramp::constant(1.0),
                    });
                }
            }
            let p = if *interaction != 0.0 {
                (0..l - 1)
                    .map(|x| ScheduleTerm {
                        sites: vec![x, x + 1],
                        matrix: linalg::scale_real(&(space.number(x) * space.number(x + 1)), *interaction),
                        ramp: Ramp::constant(1.0),
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let v = (*field != 0.0).then(|| RampedPotential {
                potential: LipschitzPotential::linear(space.geometry(), [*field, 0.0], -field * (l as f64 - 1.0) / 2.0),
                ramp: Ramp::constant(1.0),
            });
            (h, p, v)
        }
    }
}
