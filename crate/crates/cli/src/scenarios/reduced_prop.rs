use std::path::Path;

use anyhow::Result;
use kmedyn::{
    approximation_error, propagate_direct, propagate_reduced, Expansion, StatePoint, SystemModel,
};

use crate::config::ReducedPropConfig;
use crate::io;

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub method: &'static str,
    pub size: usize,
    pub repetition: usize,
    /// Squared RKHS distance to the reference at the final step.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: &'static str,
    pub size: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single repetition).
    pub std: f64,
}

pub struct ReducedPropReport {
    pub errors: Vec<ErrorRow>,
    pub summary: Vec<SummaryRow>,
    pub reference: Expansion,
    /// `(size, repetition, expansions per step)` of the reduced method.
    pub reduced_sets: Vec<(usize, usize, Vec<Expansion>)>,
}

impl ReducedPropReport {
    pub fn summary_for(&self, method: &str, size: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method && r.size == size)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_reduced_prop(cfg: &ReducedPropConfig) -> Result<ReducedPropReport> {
    cfg.validate()?;
    let disc = cfg.system()?;
    let sys: SystemModel = disc.clone().into();
    let x0 = StatePoint::new(cfg.x0.clone())?;
    let last = cfg.steps;
    let reference_ens = propagate_direct(&sys, &x0, None, cfg.reference_size, cfg.seed.derive(0))?;
    let reference = Expansion::uniform(cfg.kernel, reference_ens.slice(last).clone())?;
    let mut errors = Vec::new();
    let mut reduced_sets = Vec::new();
    for &size in &cfg.sizes {
        log::info!("size {size}");
        for rep in 0..cfg.repetitions {
            let direct = propagate_direct(&sys, &x0, None, size, cfg.seed.derive(1).derive(rep as u64))?;
            let e = Expansion::uniform(cfg.kernel, direct.slice(last).clone())?;
            errors.push(ErrorRow {
                method: "direct",
                size,
                repetition: rep,
                error: approximation_error(&e, &reference)?,
            });
        }
        for rep in 0..cfg.repetitions {
            let exps = propagate_reduced(
                &disc,
                &x0,
                &cfg.reduced(size),
                cfg.steps,
                cfg.kernel,
                cfg.seed.derive(2).derive(rep as u64),
            )?;
            errors.push(ErrorRow {
                method: "reduced",
                size,
                repetition: rep,
                error: approximation_error(&exps[last], &reference)?,
            });
            reduced_sets.push((size, rep, exps));
        }
    }
    let mut summary = Vec::new();
    for method in ["direct", "reduced"] {
        for &size in &cfg.sizes {
            let v: Vec<f64> = errors
                .iter()
                .filter(|r| r.method == method && r.size == size)
                .map(|r| r.error)
                .collect();
            let (mean, std) = mean_std(&v);
            summary.push(SummaryRow { method, size, mean, std });
        }
    }
    Ok(ReducedPropReport {
        errors,
        summary,
        reference,
        reduced_sets,
    })
}

pub(super) fn run_and_write(cfg: &ReducedPropConfig, out: &Path) -> Result<Vec<String>> {
    let r = run_reduced_prop(cfg)?;
    let mut w = io::csv_writer(&out.join("errors.csv"))?;
    w.write_record(["method", "size", "seed", "error"])?;
    for e in &r.errors {
        w.write_record([e.method.to_string(), e.size.to_string(), e.repetition.to_string(), e.error.to_string()])?;
    }
    w.flush()?;
    let mut w = io::csv_writer(&out.join("error_summary.csv"))?;
    w.write_record(["method", "size", "mean", "std"])?;
    for s in &r.summary {
        w.write_record([s.method.to_string(), s.size.to_string(), s.mean.to_string(), s.std.to_string()])?;
    }
    w.flush()?;
    if cfg.write_reduced_sets {
        let dim = cfg.x0.len();
        let mut w = io::csv_writer(&out.join("reduced_sets.csv"))?;
        let mut header: Vec<String> = ["step", "size", "seed", "point"].map(String::from).to_vec();
        header.extend((0..dim).map(|k| format!("x{k}")));
        header.push("weight".into());
        w.write_record(&header)?;
        for (size, rep, exps) in &r.reduced_sets {
            for (step, e) in exps.iter().enumerate() {
                for (i, (row, wt)) in e.points().rows().zip(e.weights()).enumerate() {
                    let mut rec = vec![step.to_string(), size.to_string(), rep.to_string(), i.to_string()];
                    rec.extend(row.iter().map(f64::to_string));
                    rec.push(wt.to_string());
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
    }
    Ok(r.summary
        .iter()
        .map(|s| format!("{} size {}: mean {} std {}", s.method, s.size, s.mean, s.std))
        .collect())
}
