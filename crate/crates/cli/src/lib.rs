//! Scenario runners and file-level tools behind the `kme-dyn` binary.

pub mod config;
pub mod io;
pub mod scenarios;

pub use config::{Overrides, ScenarioConfig};
pub use scenarios::run;
