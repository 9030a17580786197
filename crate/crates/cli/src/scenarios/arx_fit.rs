use std::path::Path;

use anyhow::Result;
use kmedyn::{embed_slice, propagate_direct, CachedEmbedding, StatePoint, TrajectoryEnsemble};

use super::{write_distances, DistanceRow};
use crate::config::ArxFitConfig;
use crate::io;

pub struct ArxFitReport {
    /// Series `pve`, `lsq` and optionally `baseline`, each against the truth.
    pub distances: Vec<DistanceRow>,
    /// Mean distance over output times after the first.
    pub mean_pve: f64,
    pub mean_lsq: f64,
    pub mean_baseline: Option<f64>,
    pub ensembles: Vec<(String, TrajectoryEnsemble)>,
}

pub fn run_arx_fit(cfg: &ArxFitConfig) -> Result<ArxFitReport> {
    cfg.validate()?;
    let x0 = StatePoint::new(cfg.x0.to_vec())?;
    let mut runs = vec![
        ("truth", &cfg.truth, cfg.seed.derive(1)),
        ("pve", &cfg.pve, cfg.seed.derive(2)),
        ("lsq", &cfg.lsq, cfg.seed.derive(3)),
    ];
    if cfg.baseline {
        runs.push(("baseline", &cfg.truth, cfg.seed.derive(4)));
    }
    let mut ensembles = Vec::new();
    for (name, law, seed) in runs {
        log::info!("simulating {name} model");
        let ens = propagate_direct(&cfg.system(law)?, &x0, None, cfg.n, seed)?.every(cfg.output_every);
        ensembles.push((name.to_string(), ens));
    }
    let truth = &ensembles[0].1;
    let label = cfg.kernel.to_string();
    let mut distances = Vec::new();
    let mut sums = vec![0.0; ensembles.len()];
    for (t, &time) in truth.times().iter().enumerate() {
        let reference = CachedEmbedding::new(embed_slice(truth, t, cfg.kernel)?)?;
        for (k, (name, ens)) in ensembles.iter().enumerate().skip(1) {
            let value = reference.dist_sq(&embed_slice(ens, t, cfg.kernel)?)?.sqrt();
            if t > 0 {
                sums[k] += value;
            }
            distances.push(DistanceRow {
                time,
                kernel: label.clone(),
                value,
                series: name.clone(),
            });
        }
    }
    let count = (truth.times().len() - 1).max(1) as f64;
    Ok(ArxFitReport {
        distances,
        mean_pve: sums[1] / count,
        mean_lsq: sums[2] / count,
        mean_baseline: cfg.baseline.then(|| sums[3] / count),
        ensembles,
    })
}

pub(super) fn run_and_write(cfg: &ArxFitConfig, out: &Path) -> Result<Vec<String>> {
    let r = run_arx_fit(cfg)?;
    write_distances(&out.join("distances.csv"), &r.distances)?;
    let mut summary = vec![("pve", r.mean_pve), ("lsq", r.mean_lsq)];
    if let Some(b) = r.mean_baseline {
        summary.push(("baseline", b));
    }
    let mut w = io::csv_writer(&out.join("distance_summary.csv"))?;
    w.write_record(["series", "kernel", "mean"])?;
    for (name, mean) in &summary {
        w.write_record([name.to_string(), cfg.kernel.to_string(), mean.to_string()])?;
    }
    w.flush()?;
    if cfg.write_ensembles {
        for (name, ens) in &r.ensembles {
            io::write_ensemble(&out.join(format!("ensemble_{name}.csv")), ens)?;
        }
    }
    Ok(summary
        .iter()
        .map(|(name, mean)| format!("time-averaged distance {name}: {mean}"))
        .collect())
}
