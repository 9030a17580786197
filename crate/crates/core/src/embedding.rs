//! Kernel mean embeddings held as weighted kernel expansions, and RKHS distances
//! between them.
//!
//! An [`Expansion`] represents `μ = Σ_i α_i k(x_i, ·)`. Weights may be signed and
//! need not sum to one, so reduced-set expansions fit the same type as plain
//! sample averages. Squared distances use the biased (V-statistic) form
//! `αᵀK_aa α − 2 αᵀK_ab β + βᵀK_bb β`, which is exactly `‖μ_a − μ_b‖²`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryEnsemble;
use crate::error::{Error, Result};
use crate::kernels::{bilinear, gram_vec, quadratic, KernelSpec};
use crate::points::{PointSet, StatePoint};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Expansion<T: Scalar = f64> {
    kernel: KernelSpec<T>,
    points: PointSet<T>,
    weights: Vec<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct ExpansionRecord<T: Scalar> {
    kernel: KernelSpec<T>,
    points: PointSet<T>,
    weights: Vec<T>,
}

impl<'de, T: Scalar> Deserialize<'de> for Expansion<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ExpansionRecord::deserialize(d)?;
        Expansion::new(r.kernel, r.points, r.weights).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> Expansion<T> {
    pub fn new(kernel: KernelSpec<T>, points: PointSet<T>, weights: Vec<T>) -> Result<Self> {
        kernel.validate()?;
        if points.is_empty() {
            return Err(Error::Empty("expansion points"));
        }
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("expansion weights"));
        }
        Ok(Self {
            kernel,
            points,
            weights,
        })
    }

    /// Expansion with weights exactly `1/N`.
    pub fn uniform(kernel: KernelSpec<T>, points: PointSet<T>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Empty("samples"));
        }
        let w = T::one() / T::from_usize_lossy(n);
        Self::new(kernel, points, vec![w; n])
    }

    pub fn singleton(kernel: KernelSpec<T>, point: &StatePoint<T>, weight: T) -> Result<Self> {
        Self::new(kernel, PointSet::from_points(std::slice::from_ref(point))?, vec![weight])
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn points(&self) -> &PointSet<T> {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Evaluates the embedding as a function, `μ(y) = Σ_i α_i k(x_i, y)`.
    pub fn evaluate(&self, y: &[T]) -> Result<T> {
        let mut acc = T::zero();
        for (x, &w) in self.points.rows().zip(&self.weights) {
            acc += w * self.kernel.eval(x, y)?;
        }
        Ok(acc)
    }

    /// Writes `point,x0,..,x{d-1},weight` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "point")?;
        for k in 0..self.dim() {
            write!(out, ",x{k}")?;
        }
        writeln!(out, ",weight")?;
        for (i, (r, w)) in self.points.rows().zip(&self.weights).enumerate() {
            write!(out, "{i}")?;
            for v in r {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{w}")?;
        }
        Ok(())
    }
}

/// Uniform-weight embedding `(1/N) Σ k(x_i, ·)` of a sample.
pub fn embed_uniform<T: Scalar>(samples: &[StatePoint<T>], kernel: KernelSpec<T>) -> Result<Expansion<T>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    Expansion::uniform(kernel, PointSet::from_points(samples)?)
}

fn check_compatible<T: Scalar>(a: &Expansion<T>, b: &Expansion<T>) -> Result<()> {
    if a.kernel != b.kernel {
        return Err(Error::KernelMismatch);
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

fn clamp_dist<T: Scalar>(d: T) -> T {
    if d < T::zero() {
        if d < T::c(-1e-9) {
            log::warn!("squared RKHS distance {d} clamped to zero; Gram terms are ill-conditioned");
        }
        T::zero()
    } else {
        d
    }
}

fn combine<T: Scalar>(aa: T, ab: T, bb: T) -> T {
    clamp_dist(aa - T::c(2.0) * ab + bb)
}

/// `⟨μ_a, μ_b⟩_H = αᵀ K_ab β`.
pub fn rkhs_inner<T: Scalar>(a: &Expansion<T>, b: &Expansion<T>) -> Result<T> {
    check_compatible(a, b)?;
    bilinear(&a.kernel, &a.points, &a.weights, &b.points, &b.weights)
}

/// `‖μ_a‖²_H = αᵀ K_aa α`.
pub fn rkhs_norm_sq<T: Scalar>(a: &Expansion<T>) -> Result<T> {
    let q = quadratic(&a.kernel, &a.points, &a.weights)?;
    Ok(q.max(T::zero()))
}

/// `‖μ_a − μ_b‖²_H` (V-statistic MMD² for uniform weights).
///
/// Evaluated as `Σ α_i r(a_i) − Σ β_j r(b_j)` with the witness
/// `r = Σ α k(a, ·) − Σ β k(b, ·)`, so identical expansions give exactly 0 and
/// swapping the arguments gives exactly the same value.
pub fn rkhs_dist_sq<T: Scalar>(a: &Expansion<T>, b: &Expansion<T>) -> Result<T> {
    check_compatible(a, b)?;
    let k = &a.kernel;
    let witness = |at: &PointSet<T>| -> Result<Vec<T>> {
        let pa = gram_vec(k, at, &a.points, &a.weights)?;
        let pb = gram_vec(k, at, &b.points, &b.weights)?;
        Ok(pa.iter().zip(&pb).map(|(&x, &y)| x - y).collect())
    };
    let ra = witness(&a.points)?;
    let rb = witness(&b.points)?;
    Ok(clamp_dist(dot(&a.weights, &ra) - dot(&b.weights, &rb)))
}

/// Same quantity as [`rkhs_dist_sq`], computed through an explicit feature map
/// when the kernel has one (linear, polynomial); cost is then linear in the
/// number of points. Otherwise uses `αᵀKα − 2αᵀKβ + βᵀKβ` over upper triangles,
/// about half the kernel evaluations of [`rkhs_dist_sq`] but with more
/// cancellation when the distance is tiny.
pub fn rkhs_dist_sq_fast<T: Scalar>(a: &Expansion<T>, b: &Expansion<T>) -> Result<T> {
    check_compatible(a, b)?;
    match a.kernel.feature_map(a.dim()) {
        Some(fm) => {
            let ma = fm.mean_embedding(&a.points, &a.weights);
            let mb = fm.mean_embedding(&b.points, &b.weights);
            let diff: Vec<T> = ma.iter().zip(&mb).map(|(&x, &y)| x - y).collect();
            Ok(dot(&diff, &diff))
        }
        None if a.points == b.points && a.weights == b.weights => Ok(T::zero()),
        None => {
            let aa = quadratic(&a.kernel, &a.points, &a.weights)?;
            let bb = quadratic(&b.kernel, &b.points, &b.weights)?;
            let ab = bilinear(&a.kernel, &a.points, &a.weights, &b.points, &b.weights)?;
            Ok(combine(aa, ab, bb))
        }
    }
}

/// An expansion with its squared norm computed once, for repeated distance
/// queries against a fixed (typically large) reference.
#[derive(Clone, Debug)]
pub struct CachedEmbedding<T: Scalar = f64> {
    expansion: Expansion<T>,
    norm_sq: T,
}

impl<T: Scalar> CachedEmbedding<T> {
    pub fn new(expansion: Expansion<T>) -> Result<Self> {
        let norm_sq = quadratic(&expansion.kernel, &expansion.points, &expansion.weights)?;
        Ok(Self { expansion, norm_sq })
    }

    pub fn expansion(&self) -> &Expansion<T> {
        &self.expansion
    }

    pub fn norm_sq(&self) -> T {
        self.norm_sq
    }

    pub fn dist_sq(&self, other: &Expansion<T>) -> Result<T> {
        check_compatible(&self.expansion, other)?;
        let oo = quadratic(&other.kernel, &other.points, &other.weights)?;
        let ab = rkhs_inner(other, &self.expansion)?;
        Ok(combine(oo, ab, self.norm_sq))
    }
}

/// Embedding of one time slice of an ensemble (its weights, or uniform).
pub fn embed_slice<T: Scalar>(
    ens: &TrajectoryEnsemble<T>,
    t: usize,
    kernel: KernelSpec<T>,
) -> Result<Expansion<T>> {
    let pts = ens.slice(t).clone();
    match ens.weights() {
        Some(w) => Expansion::new(kernel, pts, w.to_vec()),
        None => Expansion::uniform(kernel, pts),
    }
}

/// RKHS distance (not squared) between two ensembles at every shared time.
///
/// Linear and polynomial kernels go through their feature maps; other kernels
/// through streamed Gram sums.
pub fn mmd_over_time<T: Scalar>(
    a: &TrajectoryEnsemble<T>,
    b: &TrajectoryEnsemble<T>,
    kernel: &KernelSpec<T>,
) -> Result<Vec<(T, T)>> {
    kernel.validate()?;
    if a.times().len() != b.times().len() {
        return Err(Error::TimeGridMismatch);
    }
    for (&ta, &tb) in a.times().iter().zip(b.times()) {
        let scale = T::one().max(ta.abs());
        if (ta - tb).abs() > T::c(1e-12) * scale {
            return Err(Error::TimeGridMismatch);
        }
    }
    (0..a.times().len())
        .map(|t| {
            let ea = embed_slice(a, t, *kernel)?;
            let eb = embed_slice(b, t, *kernel)?;
            let d2 = rkhs_dist_sq_fast(&ea, &eb).map_err(|e| e.at_step(t))?;
            Ok((a.times()[t], d2.sqrt()))
        })
        .collect()
}
