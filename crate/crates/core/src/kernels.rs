//! Positive definite kernels on `R^d`, Gram matrices and streamed kernel sums.
//!
//! | kind          | k(x, y)                        | embedding keeps      |
//! |---------------|--------------------------------|----------------------|
//! | `linear`      | xᵀy                            | mean                 |
//! | `polynomial`  | (xᵀy + 1)^p                    | moments up to order p|
//! | `gaussian`    | exp(-‖x - y‖² / (2σ²))         | full distribution    |
//! | `exponential` | exp(xᵀy)                       | full distribution    |
//!
//! The Gaussian bandwidth σ enters as `2σ²` in the denominator.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::points::{PointSet, StatePoint};
use crate::scalar::{dot, sq_dist, Scalar};

/// Serialized form: `{"kind": "gaussian", "bandwidth": 0.5}`,
/// `{"kind": "polynomial", "degree": 3}`, `{"kind": "linear"}`,
/// `{"kind": "exponential"}` (optionally with `"cap"`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "KernelRecord<T>",
    into = "KernelRecord<T>",
    bound = "T: Scalar"
)]
pub enum KernelSpec<T: Scalar = f64> {
    Linear,
    Polynomial { degree: u32 },
    Gaussian { bandwidth: T },
    /// `cap` bounds the inner product before exponentiation; `None` uses
    /// [`Scalar::EXP_CAP`] (700 for `f64`).
    Exponential { cap: Option<T> },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
enum KernelRecord<T: Scalar> {
    Linear,
    Polynomial {
        degree: u32,
    },
    Gaussian {
        bandwidth: T,
    },
    Exponential {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<T>,
    },
}

impl<T: Scalar> TryFrom<KernelRecord<T>> for KernelSpec<T> {
    type Error = Error;
    fn try_from(r: KernelRecord<T>) -> Result<Self> {
        let spec = match r {
            KernelRecord::Linear => KernelSpec::Linear,
            KernelRecord::Polynomial { degree } => KernelSpec::Polynomial { degree },
            KernelRecord::Gaussian { bandwidth } => KernelSpec::Gaussian { bandwidth },
            KernelRecord::Exponential { cap } => KernelSpec::Exponential { cap },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl<T: Scalar> From<KernelSpec<T>> for KernelRecord<T> {
    fn from(s: KernelSpec<T>) -> Self {
        match s {
            KernelSpec::Linear => KernelRecord::Linear,
            KernelSpec::Polynomial { degree } => KernelRecord::Polynomial { degree },
            KernelSpec::Gaussian { bandwidth } => KernelRecord::Gaussian { bandwidth },
            KernelSpec::Exponential { cap } => KernelRecord::Exponential { cap },
        }
    }
}

impl<T: Scalar> fmt::Display for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree } => write!(f, "polynomial({degree})"),
            KernelSpec::Gaussian { bandwidth } => write!(f, "gaussian({bandwidth})"),
            KernelSpec::Exponential { .. } => write!(f, "exponential"),
        }
    }
}

impl<T: Scalar> KernelSpec<T> {
    pub fn linear() -> Self {
        KernelSpec::Linear
    }

    pub fn polynomial(degree: u32) -> Result<Self> {
        let s = KernelSpec::Polynomial { degree };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(bandwidth: T) -> Result<Self> {
        let s = KernelSpec::Gaussian { bandwidth };
        s.validate()?;
        Ok(s)
    }

    pub fn exponential() -> Self {
        KernelSpec::Exponential { cap: None }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree } if degree < 1 => Err(Error::InvalidKernel(
                "polynomial degree must be >= 1".into(),
            )),
            KernelSpec::Gaussian { bandwidth } if !(bandwidth > T::zero() && bandwidth.is_finite()) => {
                Err(Error::InvalidKernel(format!(
                    "gaussian bandwidth must be positive and finite, got {bandwidth}"
                )))
            }
            KernelSpec::Exponential { cap: Some(cap) } if !(cap.is_finite()) => {
                Err(Error::InvalidKernel("exponential cap must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    fn exp_cap(&self) -> T {
        match *self {
            KernelSpec::Exponential { cap: Some(c) } => c,
            _ => T::c(T::EXP_CAP),
        }
    }

    /// Evaluates the kernel on raw coordinate slices of equal length.
    #[inline]
    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        self.eval_same_dim(x, y)
    }

    #[inline]
    fn eval_same_dim(&self, x: &[T], y: &[T]) -> Result<T> {
        Prepared::new(self).eval(x, y)
    }

    /// Explicit finite feature map, when the kernel has one of modest size.
    ///
    /// `k(x, y) = φ(x)ᵀφ(y)` exactly for linear and polynomial kernels.
    pub fn feature_map(&self, dim: usize) -> Option<FeatureMap<T>> {
        const MAX_FEATURES: usize = 4096;
        match *self {
            KernelSpec::Linear => {
                let terms = (0..dim)
                    .map(|i| {
                        let mut e = vec![0u32; dim];
                        e[i] = 1;
                        (e, T::one())
                    })
                    .collect();
                Some(FeatureMap { dim, terms })
            }
            KernelSpec::Polynomial { degree } => {
                if binomial(dim + degree as usize, degree as usize) > MAX_FEATURES as f64 {
                    return None;
                }
                let mut terms = Vec::new();
                let mut current = vec![0u32; dim];
                multi_indices(0, degree, &mut current, &mut |e| {
                    // coefficient p! / ((p - |e|)! Π e_i!) of (xᵀy + 1)^p
                    let total: u32 = e.iter().sum();
                    let mut c = factorial(degree) / factorial(degree - total);
                    for &ei in e {
                        c /= factorial(ei);
                    }
                    terms.push((e.to_vec(), T::c(c.sqrt())));
                });
                Some(FeatureMap { dim, terms })
            }
            _ => None,
        }
    }
}

/// Kernel with its constants precomputed, for inner loops.
#[derive(Clone, Copy)]
enum Prepared<T: Scalar> {
    Linear,
    Polynomial(u32),
    /// `-1 / (2σ²)`.
    Gaussian(T),
    Exponential(T),
}

impl<T: Scalar> Prepared<T> {
    fn new(spec: &KernelSpec<T>) -> Self {
        match *spec {
            KernelSpec::Linear => Prepared::Linear,
            KernelSpec::Polynomial { degree } => Prepared::Polynomial(degree),
            KernelSpec::Gaussian { bandwidth } => Prepared::Gaussian(-(T::c(2.0) * bandwidth * bandwidth).recip()),
            KernelSpec::Exponential { .. } => Prepared::Exponential(spec.exp_cap()),
        }
    }

    #[inline(always)]
    fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        match *self {
            Prepared::Linear => Ok(dot(x, y)),
            Prepared::Polynomial(degree) => Ok(poly(dot(x, y), degree)),
            Prepared::Gaussian(scale) => Ok((sq_dist(x, y) * scale).exp()),
            Prepared::Exponential(cap) => {
                let ip = dot(x, y);
                if ip > cap {
                    return Err(Error::KernelOverflow {
                        value: ip.as_f64(),
                        cap: cap.as_f64(),
                    });
                }
                Ok(ip.exp())
            }
        }
    }
}

#[inline]
fn poly<T: Scalar>(ip: T, degree: u32) -> T {
    let base = ip + T::one();
    match i32::try_from(degree) {
        Ok(p) => base.powi(p),
        Err(_) => base.powf(T::c(degree as f64)),
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn multi_indices(pos: usize, budget: u32, cur: &mut [u32], f: &mut impl FnMut(&[u32])) {
    if pos == cur.len() {
        f(cur);
        return;
    }
    for e in 0..=budget {
        cur[pos] = e;
        multi_indices(pos + 1, budget - e, cur, f);
    }
    cur[pos] = 0;
}

/// Weighted monomial features `φ_e(x) = c_e · Π x_i^{e_i}`.
#[derive(Clone, Debug)]
pub struct FeatureMap<T: Scalar = f64> {
    dim: usize,
    terms: Vec<(Vec<u32>, T)>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim);
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&p, &xi)| acc * xi.powi(p as i32))
            })
            .collect()
    }

    /// `Σ_i w_i φ(x_i)`: the embedding's coordinates in feature space.
    pub fn mean_embedding(&self, points: &PointSet<T>, weights: &[T]) -> Vec<T> {
        let mut acc = vec![T::zero(); self.len()];
        for (r, &w) in points.rows().zip(weights) {
            for (a, f) in acc.iter_mut().zip(self.apply(r)) {
                *a += w * f;
            }
        }
        acc
    }
}

/// k(x, y) for two state points.
pub fn eval_kernel<T: Scalar>(
    spec: &KernelSpec<T>,
    x: &StatePoint<T>,
    y: &StatePoint<T>,
) -> Result<T> {
    spec.validate()?;
    spec.eval(x.as_slice(), y.as_slice())
}

fn check_sets<T: Scalar>(xs: &PointSet<T>, ys: &PointSet<T>) -> Result<()> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("gram point list"));
    }
    if xs.dim() != ys.dim() {
        return Err(Error::DimensionMismatch {
            expected: xs.dim(),
            found: ys.dim(),
        });
    }
    Ok(())
}

fn first_error(results: Vec<Result<()>>) -> Result<()> {
    results.into_iter().collect()
}

/// Gram matrix `K_ij = k(X_i, Y_j)`; uses [`gram_self`] when `xs` and `ys` are the same set.
pub fn gram<T: Scalar>(spec: &KernelSpec<T>, xs: &PointSet<T>, ys: &PointSet<T>) -> Result<Matrix<T>> {
    if std::ptr::eq(xs, ys) {
        return gram_self(spec, xs);
    }
    spec.validate()?;
    let k = Prepared::new(spec);
    check_sets(xs, ys)?;
    let cols = ys.len();
    let mut data = vec![T::zero(); xs.len() * cols];
    let status = data
        .par_chunks_mut(cols)
        .enumerate()
        .map(|(i, row)| {
            let xi = xs.row(i);
            for (j, out) in row.iter_mut().enumerate() {
                *out = k.eval(xi, ys.row(j))?;
            }
            Ok(())
        })
        .collect();
    first_error(status)?;
    Matrix::from_row_major(xs.len(), cols, data)
}

/// Symmetric Gram matrix of one set: upper triangle computed, then mirrored.
pub fn gram_self<T: Scalar>(spec: &KernelSpec<T>, xs: &PointSet<T>) -> Result<Matrix<T>> {
    spec.validate()?;
    let k = Prepared::new(spec);
    check_sets(xs, xs)?;
    let n = xs.len();
    let upper: Vec<Result<Vec<T>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = xs.row(i);
            (i..n).map(|j| k.eval(xi, xs.row(j))).collect()
        })
        .collect();
    let mut m = Matrix::zeros(n, n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            m[(i, i + off)] = v;
            m[(i + off, i)] = v;
        }
    }
    Ok(m)
}

/// `K_XY w` without materializing the Gram matrix.
pub fn gram_vec<T: Scalar>(
    spec: &KernelSpec<T>,
    xs: &PointSet<T>,
    ys: &PointSet<T>,
    w: &[T],
) -> Result<Vec<T>> {
    spec.validate()?;
    let k = Prepared::new(spec);
    check_sets(xs, ys)?;
    if w.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: ys.len(),
            found: w.len(),
        });
    }
    (0..xs.len())
        .into_par_iter()
        .map(|i| {
            let xi = xs.row(i);
            let mut acc = T::zero();
            for (j, &wj) in w.iter().enumerate() {
                acc += wj * k.eval(xi, ys.row(j))?;
            }
            Ok(acc)
        })
        .collect()
}

/// `aᵀ K_XY b`, streamed; row sums are reduced in index order.
pub fn bilinear<T: Scalar>(
    spec: &KernelSpec<T>,
    xs: &PointSet<T>,
    a: &[T],
    ys: &PointSet<T>,
    b: &[T],
) -> Result<T> {
    if a.len() != xs.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: a.len(),
        });
    }
    let kb = gram_vec(spec, xs, ys, b)?;
    Ok(dot(a, &kb))
}

/// `aᵀ K_XX a`, using the upper triangle only.
pub fn quadratic<T: Scalar>(spec: &KernelSpec<T>, xs: &PointSet<T>, a: &[T]) -> Result<T> {
    spec.validate()?;
    let k = Prepared::new(spec);
    check_sets(xs, xs)?;
    if a.len() != xs.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: a.len(),
        });
    }
    let n = xs.len();
    let rows: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = xs.row(i);
            let mut off = T::zero();
            for j in (i + 1)..n {
                off += a[j] * k.eval(xi, xs.row(j))?;
            }
            let diag = k.eval(xi, xi)?;
            Ok(a[i] * (a[i] * diag + T::c(2.0) * off))
        })
        .collect();
    let mut total = T::zero();
    for r in rows {
        total += r?;
    }
    Ok(total)
}
