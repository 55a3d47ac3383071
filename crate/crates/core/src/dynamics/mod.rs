//! Driven schedules, propagators, dressed states and the drift functional.

mod lieb_robinson;
mod propagate;
mod ramp;
mod schedule;
mod state;

pub use lieb_robinson::{lieb_robinson_probe, LiebRobinsonReport, LightConeFit, ProbeTarget};
pub use propagate::{evolve_columns, propagator, Backend, IntegratorOptions, Propagator, StepLog};
pub use ramp::{Jet, Ramp};
pub use schedule::{RampedPotential, RampedSum, Schedule, ScheduleTerm, ScheduleWindow};
pub use state::{
    drift, drift_trajectory, neass_drift, super_adiabatic_state, DriftReport, SuperAdiabaticState, ToleranceBudget,
};
