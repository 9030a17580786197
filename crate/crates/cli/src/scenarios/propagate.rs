use std::path::Path;

use anyhow::{bail, Result};
use kmedyn::{propagate_direct, propagate_reduced, Expansion, StatePoint, SystemModel, TrajectoryEnsemble};

use crate::config::{Algorithm, PropagateConfig};
use crate::io;

pub enum Propagated {
    Direct(TrajectoryEnsemble),
    Reduced(Vec<Expansion>),
}

pub fn run_propagate(cfg: &PropagateConfig) -> Result<Propagated> {
    cfg.validate()?;
    let sys = cfg.system.build()?;
    let x0 = StatePoint::new(cfg.x0.clone())?;
    Ok(match cfg.algorithm {
        Algorithm::Direct => Propagated::Direct(propagate_direct(&sys, &x0, cfg.parameter_law.as_ref(), cfg.n, cfg.seed)?),
        Algorithm::Reduced => {
            let SystemModel::Discrete(mut d) = sys else {
                bail!("reduced-set propagation is only defined for discrete systems")
            };
            if let Some(law) = &cfg.parameter_law {
                let mut noise = d.noise().clone();
                noise.law = law.clone();
                d = d.with_noise(noise)?;
            }
            let horizon = d.horizon();
            Propagated::Reduced(propagate_reduced(&d, &x0, &cfg.reduced, horizon, cfg.kernel, cfg.seed)?)
        }
    })
}

pub(super) fn run_and_write(cfg: &PropagateConfig, out: &Path) -> Result<Vec<String>> {
    let path = out.join("propagation.csv");
    match run_propagate(cfg)? {
        Propagated::Direct(ens) => {
            io::write_ensemble_long(&path, &ens)?;
            Ok(vec![format!("{} realizations over {} time points", ens.realizations(), ens.times().len())])
        }
        Propagated::Reduced(exps) => {
            io::write_expansions_long(&path, &exps)?;
            Ok(vec![format!("{} steps, final expansion size {}", exps.len() - 1, exps.last().map_or(0, |e| e.len()))])
        }
    }
}
