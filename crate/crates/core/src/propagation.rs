//! Pushing uncertainty through dynamics.
//!
//! * [`propagate_direct`]: sample realizations, evolve each one deterministically,
//!   embed the states with uniform weights (the diagonal estimator).
//! * [`ustat_step`] + [`reduce`] = one step of [`propagate_reduced`]: expand the
//!   current embedding over a shared set of noise draws, then compress it back to
//!   at most `N_R` points by re-solving the weights.
//!
//! Randomness is pre-assigned to sub-streams (per realization, per step) before
//! any parallel work, so results depend only on inputs and seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DiscreteSystem, SystemModel, TrajectoryEnsemble};
use crate::embedding::{rkhs_dist_sq, Expansion};
use crate::error::{Error, Result};
use crate::kernels::{gram_self, gram_vec, KernelSpec};
use crate::points::{PointSet, StatePoint};
use crate::rng::RngSeed;
use crate::scalar::Scalar;
use crate::uncertainty::{Cadence, NoiseProcess, UncertaintySpec};

/// How reduced-set expansion points are picked from the full expansion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Uniform subsampling without replacement.
    #[default]
    Uniform,
    /// Without replacement, with probability proportional to `|weight|`.
    WeightProportional,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ridge<T: Scalar = f64> {
    /// `max(1e-8, 100ε) · trace(K_ZZ) / |Z|`; the floor only matters for `f32`.
    Auto,
    Fixed(T),
}

impl<T: Scalar> From<Option<T>> for Ridge<T> {
    fn from(v: Option<T>) -> Self {
        v.map_or(Ridge::Auto, Ridge::Fixed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct ReducedSetConfig<T: Scalar = f64> {
    /// `N_R`.
    pub target_size: usize,
    /// `N_ξ`, noise draws per step.
    pub noise_draws: usize,
    /// `None` selects [`Ridge::Auto`].
    #[serde(default)]
    pub ridge: Option<T>,
    #[serde(default)]
    pub selection: Selection,
}

impl<T: Scalar> ReducedSetConfig<T> {
    pub fn new(target_size: usize, noise_draws: usize) -> Self {
        Self {
            target_size,
            noise_draws,
            ridge: None,
            selection: Selection::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_size == 0 || self.noise_draws == 0 {
            return Err(Error::InvalidArgument(
                "reduced-set size and noise draws must be >= 1".into(),
            ));
        }
        if let Some(l) = self.ridge {
            if !(l >= T::zero()) || !l.is_finite() {
                return Err(Error::InvalidArgument(format!("ridge {l} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn realization_results<T: Scalar>(results: Vec<Result<Vec<T>>>) -> Result<Vec<Vec<T>>> {
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| e.at_realization(i)))
        .collect()
}

/// One noise path of `horizon` rows drawn from `rng`.
fn noise_path<T: Scalar, R: rand::Rng + ?Sized>(process: &NoiseProcess<T>, horizon: usize, rng: &mut R) -> Result<PointSet<T>> {
    let dim = process.dim();
    let mut data = Vec::with_capacity(horizon * dim);
    match process.cadence {
        Cadence::PerStep => {
            for t in 0..horizon {
                process.draw_into(rng, T::from_usize_lossy(t), &mut data);
            }
        }
        Cadence::Once => {
            let mut base = Vec::with_capacity(dim);
            process.law.draw_into(rng, &mut base);
            for t in 0..horizon {
                let tt = T::from_usize_lossy(t);
                match &process.drift {
                    Some(rate) => data.extend(base.iter().zip(rate).map(|(&b, &r)| b + r * tt)),
                    None => data.extend_from_slice(&base),
                }
            }
        }
    }
    PointSet::new(dim, data)
}

/// The `n` constant parameters used by [`propagate_direct`] for a continuous
/// system: draw `i` comes from sub-stream `i` of `seed`.
pub fn draw_parameters<T: Scalar>(law: &UncertaintySpec<T>, n: usize, seed: RngSeed) -> Result<PointSet<T>> {
    let mut data = Vec::with_capacity(n * law.dim());
    for i in 0..n {
        law.draw_into(&mut seed.stream(i as u64), &mut data);
    }
    PointSet::new(law.dim(), data)
}

/// Direct (diagonal) propagation of `n` realizations.
///
/// Continuous systems need `law`, the distribution of the constant parameter ξ.
/// Discrete systems use their own noise process; a `law` given here replaces the
/// process's base law (drift and cadence are kept). Realization `i` draws from
/// sub-stream `i` of `seed`. The ensemble carries uniform weights.
pub fn propagate_direct<T: Scalar>(
    sys: &SystemModel<T>,
    x0: &StatePoint<T>,
    law: Option<&UncertaintySpec<T>>,
    n: usize,
    seed: RngSeed,
) -> Result<TrajectoryEnsemble<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("realization count must be >= 1".into()));
    }
    let dim = x0.dim();
    match sys {
        SystemModel::Continuous(c) => {
            let law = law.ok_or_else(|| {
                Error::InvalidArgument("continuous propagation needs a parameter law".into())
            })?;
            let params = draw_parameters(law, n, seed)?;
            let trajs: Vec<Result<Vec<T>>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut out = Vec::with_capacity((c.steps() + 1) * dim);
                    c.integrate_flat(x0.as_slice(), params.row(i), &mut out)?;
                    Ok(out)
                })
                .collect();
            let trajs = realization_results(trajs)?;
            TrajectoryEnsemble::from_trajectories(c.times(), dim, &trajs, None)
        }
        SystemModel::Discrete(d) => {
            let mut process = d.noise().clone();
            if let Some(l) = law {
                process.law = l.clone();
                process.validate()?;
            }
            let trajs: Vec<Result<Vec<T>>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut rng = seed.stream(i as u64);
                    let path = noise_path(&process, d.horizon(), &mut rng)?;
                    let mut out = Vec::with_capacity((d.horizon() + 1) * dim);
                    d.iterate_flat(x0.as_slice(), &path, &mut out)?;
                    Ok(out)
                })
                .collect();
            let trajs = realization_results(trajs)?;
            TrajectoryEnsemble::from_trajectories(d.times(), dim, &trajs, None)
        }
    }
}

/// Expands `current` over `N_ξ` noise draws shared by every expansion point:
/// points `f(t, x_i, ξ_j)` with weights `α_i / N_ξ`, so total mass is preserved.
///
/// The draws for step `t` come from sub-stream `t` of `seed`.
pub fn ustat_step<T: Scalar>(
    current: &Expansion<T>,
    sys: &DiscreteSystem<T>,
    t: usize,
    noise_draws: usize,
    seed: RngSeed,
) -> Result<Expansion<T>> {
    if noise_draws == 0 {
        return Err(Error::InvalidArgument("noise draws must be >= 1".into()));
    }
    if sys.noise().cadence == Cadence::Once {
        return Err(Error::InvalidArgument(
            "reduced-set propagation needs per-step noise".into(),
        ));
    }
    let noise = sys
        .noise()
        .sample_at_with(&mut seed.stream(t as u64), noise_draws, T::from_usize_lossy(t))?;
    let src = current.points();
    let rows: Vec<Result<Vec<T>>> = (0..src.len())
        .into_par_iter()
        .map(|i| {
            let xi = src.row(i);
            let mut out = Vec::with_capacity(noise_draws * xi.len());
            for w in noise.rows() {
                out.extend(sys.apply(t, xi, w)?);
            }
            Ok(out)
        })
        .collect();
    let dim = src.dim();
    let mut data = Vec::with_capacity(src.len() * noise_draws * dim);
    for r in rows {
        data.extend(r?);
    }
    let scale = T::from_usize_lossy(noise_draws);
    let weights = current
        .weights()
        .iter()
        .flat_map(|&a| std::iter::repeat_n(a / scale, noise_draws))
        .collect();
    Expansion::new(*current.kernel(), PointSet::new(dim, data)?, weights)
}

fn select_indices<T: Scalar>(full: &Expansion<T>, n_r: usize, selection: Selection, seed: RngSeed) -> Result<Vec<usize>> {
    let n = full.len();
    let mut rng = seed.rng();
    let mut idx = match selection {
        Selection::Uniform => rand::seq::index::sample(&mut rng, n, n_r).into_vec(),
        Selection::WeightProportional => {
            let w: Vec<f64> = full.weights().iter().map(|w| w.abs().as_f64()).collect();
            rand::seq::index::sample_weighted(&mut rng, n, |i| w[i], n_r)
                .map_err(|e| Error::InvalidArgument(format!("weighted selection failed: {e}")))?
                .into_vec()
        }
    };
    idx.sort_unstable();
    // identical rows add nothing to the span and make K_ZZ singular
    let pts = full.points();
    let mut kept: Vec<usize> = Vec::with_capacity(idx.len());
    for i in idx {
        if !kept.iter().any(|&k| pts.row(k) == pts.row(i)) {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Reduced-set approximation of `full` with uniformly subsampled expansion points.
///
/// See [`reduce_with`].
pub fn reduce<T: Scalar>(full: &Expansion<T>, n_r: usize, ridge: Ridge<T>, seed: RngSeed) -> Result<Expansion<T>> {
    reduce_with(full, n_r, ridge, Selection::Uniform, seed)
}

/// Picks `n_r` points `Z` of `full` and solves `(K_ZZ + λI) α = K_ZF β`.
///
/// At `λ = 0` this is the exact minimizer of `‖Σ α_i k(z_i, ·) − μ_full‖²` over
/// the weights for that `Z`. Weights are unconstrained. Exact duplicate rows in
/// `Z` are kept once, so the result may have fewer than `n_r` points. If the
/// factorization fails, the solve is retried once with `λ + 1e-10 · trace/|Z|`
/// (`1e3ε` in place of `1e-10` for `f32`).
pub fn reduce_with<T: Scalar>(
    full: &Expansion<T>,
    n_r: usize,
    ridge: Ridge<T>,
    selection: Selection,
    seed: RngSeed,
) -> Result<Expansion<T>> {
    if n_r == 0 || n_r > full.len() {
        return Err(Error::InvalidArgument(format!(
            "reduced size {n_r} must be in 1..={}",
            full.len()
        )));
    }
    let idx = select_indices(full, n_r, selection, seed)?;
    let z = full.points().select(&idx);
    let kernel = full.kernel();
    let mut k = gram_self(kernel, &z)?;
    let rhs = gram_vec(kernel, &z, full.points(), full.weights())?;
    let mean_diag = k.trace() / T::from_usize_lossy(z.len());
    let lambda = match ridge {
        Ridge::Auto => T::c(1e-8).max(T::c(100.0) * T::epsilon()) * mean_diag,
        Ridge::Fixed(l) => {
            if !(l >= T::zero()) || !l.is_finite() {
                return Err(Error::InvalidArgument(format!("ridge {l} must be finite and >= 0")));
            }
            l
        }
    };
    k.add_diagonal(lambda);
    let alpha = match k.cholesky() {
        Ok(ch) => ch.solve(&rhs),
        Err(Error::NotPositiveDefinite) => {
            let extra = T::c(1e-10).max(T::c(1e3) * T::epsilon()) * mean_diag.max(T::min_positive_value());
            k.add_diagonal(extra);
            match k.cholesky() {
                Ok(ch) => {
                    log::debug!("reduced-set solve retried with ridge {}", lambda + extra);
                    ch.solve(&rhs)
                }
                Err(_) => {
                    return Err(Error::Singular {
                        ridge: (lambda + extra).as_f64(),
                    })
                }
            }
        }
        Err(e) => return Err(e),
    };
    Expansion::new(*kernel, z, alpha)
}

/// Recursive reduced-set propagation from the point mass at `x0`.
///
/// Returns `horizon + 1` expansions (step 0 is `{(x0, 1)}`); each has at most
/// `N_R` points.
pub fn propagate_reduced<T: Scalar>(
    sys: &DiscreteSystem<T>,
    x0: &StatePoint<T>,
    cfg: &ReducedSetConfig<T>,
    horizon: usize,
    kernel: KernelSpec<T>,
    seed: RngSeed,
) -> Result<Vec<Expansion<T>>> {
    cfg.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let noise_seed = seed.derive(0);
    let reduce_seed = seed.derive(1);
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(Expansion::singleton(kernel, x0, T::one())?);
    for t in 0..horizon {
        let current = out.last().expect("nonempty");
        let step = || -> Result<Expansion<T>> {
            let full = ustat_step(current, sys, t, cfg.noise_draws, noise_seed)?;
            let n_r = cfg.target_size.min(full.len());
            reduce_with(&full, n_r, cfg.ridge.into(), cfg.selection, reduce_seed.derive(t as u64))
        };
        let next = step().map_err(|e| e.at_step(t))?;
        out.push(next);
    }
    Ok(out)
}

/// `‖μ_candidate − μ_reference‖²_H`.
pub fn approximation_error<T: Scalar>(candidate: &Expansion<T>, reference: &Expansion<T>) -> Result<T> {
    rkhs_dist_sq(candidate, reference)
}
