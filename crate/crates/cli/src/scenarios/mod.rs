//! Scenario runners. Each `run_*` computes results in memory; [`run`] also
//! writes the CSV outputs and `manifest.json` into the configured directory.

use std::path::Path;

use anyhow::Result;

use crate::config::ScenarioConfig;
use crate::io;

pub mod arx_fit;
pub mod mmd;
pub mod ode_gmm;
pub mod propagate;
pub mod reduced_prop;

pub use arx_fit::{run_arx_fit, ArxFitReport};
pub use mmd::{median_bandwidth, mmd_distance};
pub use ode_gmm::{run_ode_gmm, OdeGmmReport};
pub use propagate::run_propagate;
pub use reduced_prop::{run_reduced_prop, ErrorRow, ReducedPropReport, SummaryRow};

/// One point of a distance curve. `value` is the RKHS distance (not squared).
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceRow {
    pub time: f64,
    pub kernel: String,
    pub value: f64,
    pub series: String,
}

pub fn write_distances(path: &Path, rows: &[DistanceRow]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(["time", "kernel", "value", "series"])?;
    for r in rows {
        w.write_record([r.time.to_string(), r.kernel.clone(), r.value.to_string(), r.series.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a scenario, writes its outputs, and returns a short text summary.
pub fn run(cfg: &ScenarioConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let out = cfg.out();
    io::create_out(out)?;
    let lines = match cfg {
        ScenarioConfig::OdeGmm(c) => ode_gmm::run_and_write(c, out)?,
        ScenarioConfig::ArxFit(c) => arx_fit::run_and_write(c, out)?,
        ScenarioConfig::ReducedProp(c) => reduced_prop::run_and_write(c, out)?,
        ScenarioConfig::Propagate(c) => propagate::run_and_write(c, out)?,
    };
    io::write_manifest(cfg)?;
    Ok(lines)
}
