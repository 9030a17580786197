use std::path::Path;

use anyhow::Result;
use kmedyn::{
    draw_parameters, linear_ode, mmd_over_time, moment_match_gaussian, propagate_direct, PointSet, StatePoint,
    SystemModel, TrajectoryEnsemble,
};

use super::{write_distances, DistanceRow};
use crate::config::OdeGmmConfig;
use crate::io;

pub struct OdeGmmReport {
    /// Series `gmm_vs_gaussian`, one curve per configured kernel.
    pub distances: Vec<DistanceRow>,
    /// Strided by `output_every`.
    pub gmm: TrajectoryEnsemble,
    pub gaussian: TrajectoryEnsemble,
    pub gmm_parameters: PointSet,
    pub gaussian_parameters: PointSet,
}

pub fn run_ode_gmm(cfg: &OdeGmmConfig) -> Result<OdeGmmReport> {
    cfg.validate()?;
    let gauss = moment_match_gaussian(&cfg.parameter_law)?;
    let sys: SystemModel = linear_ode(cfg.t0, cfg.t_end, cfg.step, cfg.method)?.into();
    let x0 = StatePoint::scalar(cfg.x0)?;
    let (s_gmm, s_gauss) = (cfg.seed.derive(1), cfg.seed.derive(2));
    log::info!("propagating {} realizations per law", cfg.n);
    let gmm = propagate_direct(&sys, &x0, Some(&cfg.parameter_law), cfg.n, s_gmm)?.every(cfg.output_every);
    let gaussian = propagate_direct(&sys, &x0, Some(&gauss), cfg.n, s_gauss)?.every(cfg.output_every);
    let mut distances = Vec::new();
    for k in &cfg.kernels {
        log::info!("distance curve for {k}");
        for (time, value) in mmd_over_time(&gmm, &gaussian, k)? {
            distances.push(DistanceRow {
                time,
                kernel: k.to_string(),
                value,
                series: "gmm_vs_gaussian".into(),
            });
        }
    }
    Ok(OdeGmmReport {
        distances,
        gmm,
        gaussian,
        gmm_parameters: draw_parameters(&cfg.parameter_law, cfg.n, s_gmm)?,
        gaussian_parameters: draw_parameters(&gauss, cfg.n, s_gauss)?,
    })
}

/// Equal-width bins over the pooled range of both samples.
fn write_histogram(path: &Path, series: &[(&str, &PointSet)], bins: usize) -> Result<()> {
    let all = || series.iter().flat_map(|(_, s)| s.as_flat().iter().copied());
    let (mut lo, mut hi) = (all().fold(f64::INFINITY, f64::min), all().fold(f64::NEG_INFINITY, f64::max));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut w = io::csv_writer(path)?;
    w.write_record(["series", "bin", "lower", "upper", "count"])?;
    for (name, s) in series {
        let mut counts = vec![0usize; bins];
        for &v in s.as_flat() {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let lower = lo + width * b as f64;
            let upper = if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 };
            w.write_record([name.to_string(), b.to_string(), lower.to_string(), upper.to_string(), c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(super) fn run_and_write(cfg: &OdeGmmConfig, out: &Path) -> Result<Vec<String>> {
    let r = run_ode_gmm(cfg)?;
    write_distances(&out.join("distances.csv"), &r.distances)?;
    write_histogram(
        &out.join("histogram.csv"),
        &[("gmm", &r.gmm_parameters), ("gaussian", &r.gaussian_parameters)],
        cfg.histogram_bins,
    )?;
    if cfg.write_ensembles {
        io::write_ensemble(&out.join("ensemble_gmm.csv"), &r.gmm)?;
        io::write_ensemble(&out.join("ensemble_gaussian.csv"), &r.gaussian)?;
    }
    let t_last = *r.gmm.times().last().expect("nonempty grid");
    Ok(r.distances
        .iter()
        .filter(|d| d.time == t_last)
        .map(|d| format!("t={} {}: {}", d.time, d.kernel, d.value))
        .collect())
}
