//! Kernel mean embeddings for propagating uncertainty through dynamical systems.
//!
//! Distributions over states are represented by weighted kernel expansions
//! ([`Expansion`]) and compared with the RKHS distance (MMD). Two propagation
//! schemes are provided: direct sampling of realizations ([`propagate_direct`])
//! and recursive reduced-set propagation of the embedding itself
//! ([`propagate_reduced`]).
//!
//! All numeric types are generic over [`Scalar`] (`f32` or `f64`), defaulting to
//! `f64`. `*32` aliases name the single-precision variants.
//!
//! ```
//! use kmedyn::{embed_uniform, rkhs_dist_sq, KernelSpec, StatePoint};
//!
//! let k = KernelSpec::gaussian(1.0).unwrap();
//! let a = embed_uniform(&[StatePoint::scalar(0.0).unwrap()], k).unwrap();
//! let b = embed_uniform(&[StatePoint::scalar(1.0).unwrap()], k).unwrap();
//! let d = rkhs_dist_sq(&a, &b).unwrap();
//! assert!((d - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-15);
//! ```

pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod points;
pub mod propagation;
pub mod rng;
pub mod scalar;
pub mod uncertainty;

pub use dynamics::{
    arx_spectral_radius, builtin_arx, linear_ode, random_walk, random_walk_drift, sine_input,
    ContinuousSystem, DiscreteSystem, Input, Method, Rhs, StepMap, SystemModel, TrajectoryEnsemble,
    BLOW_UP_NORM,
};
pub use embedding::{
    embed_slice, embed_uniform, mmd_over_time, rkhs_dist_sq, rkhs_dist_sq_fast, rkhs_inner,
    rkhs_norm_sq, CachedEmbedding, Expansion,
};
pub use error::{Error, Result};
pub use kernels::{bilinear, eval_kernel, gram, gram_self, gram_vec, quadratic, FeatureMap, KernelSpec};
pub use linalg::{Cholesky, Matrix};
pub use points::{PointSet, StatePoint};
pub use propagation::{
    approximation_error, draw_parameters, propagate_direct, propagate_reduced, reduce, reduce_with, ustat_step,
    ReducedSetConfig, Ridge, Selection,
};
pub use rng::RngSeed;
pub use scalar::Scalar;
pub use uncertainty::{moment_match_gaussian, Cadence, GmmComponent, NoiseProcess, UncertaintySpec};

pub type StatePoint32 = StatePoint<f32>;
pub type PointSet32 = PointSet<f32>;
pub type Matrix32 = Matrix<f32>;
pub type KernelSpec32 = KernelSpec<f32>;
pub type Expansion32 = Expansion<f32>;
pub type UncertaintySpec32 = UncertaintySpec<f32>;
pub type NoiseProcess32 = NoiseProcess<f32>;
pub type ContinuousSystem32 = ContinuousSystem<f32>;
pub type DiscreteSystem32 = DiscreteSystem<f32>;
pub type SystemModel32 = SystemModel<f32>;
pub type TrajectoryEnsemble32 = TrajectoryEnsemble<f32>;
pub type ReducedSetConfig32 = ReducedSetConfig<f32>;
