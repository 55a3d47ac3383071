//! Scenario runner, suites and slope fitting behind the `neass` binary.

pub mod fit;
pub mod norms;
pub mod output;
pub mod run;
pub mod scenario;
pub mod suites;
