//! Uncertainty descriptions and their seeded samplers.
//!
//! A [`UncertaintySpec`] is validated when it is built (or deserialized), so a
//! non positive definite covariance fails there rather than at sampling time.
//! A [`NoiseProcess`] reuses a spec as a per-step law with an optional linear
//! drift `+ rate · t`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::points::PointSet;
use crate::rng::RngSeed;
use crate::scalar::{norm, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct GmmComponent<T: Scalar = f64> {
    pub weight: T,
    pub mean: Vec<T>,
    pub covariance: Matrix<T>,
    chol: Cholesky<T>,
}

/// Validated distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRecord<T>", into = "LawRecord<T>", bound = "T: Scalar")]
pub enum UncertaintySpec<T: Scalar = f64> {
    Gaussian {
        mean: Vec<T>,
        covariance: Matrix<T>,
        chol: Cholesky<T>,
    },
    Gmm {
        components: Vec<GmmComponent<T>>,
    },
    UniformBox {
        lower: Vec<T>,
        upper: Vec<T>,
    },
    /// Uniform over `{c + L u : ‖u‖ ≤ 1}` with `shape = L Lᵀ`.
    Ellipsoid {
        center: Vec<T>,
        shape: Matrix<T>,
        chol: Cholesky<T>,
    },
    /// Degenerate law concentrated on one value.
    Point { value: Vec<T> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
struct ComponentRecord<T: Scalar> {
    weight: T,
    mean: Vec<T>,
    covariance: Vec<Vec<T>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar", deny_unknown_fields)]
enum LawRecord<T: Scalar> {
    Gaussian { mean: Vec<T>, covariance: Vec<Vec<T>> },
    Gmm { components: Vec<ComponentRecord<T>> },
    UniformBox { lower: Vec<T>, upper: Vec<T> },
    Ellipsoid { center: Vec<T>, shape: Vec<Vec<T>> },
    Point { value: Vec<T> },
}

impl<T: Scalar> TryFrom<LawRecord<T>> for UncertaintySpec<T> {
    type Error = Error;
    fn try_from(r: LawRecord<T>) -> Result<Self> {
        match r {
            LawRecord::Gaussian { mean, covariance } => {
                let cov = Matrix::from_rows(&covariance)?;
                if cov.as_slice().iter().all(|v| *v == T::zero()) {
                    return Self::point(mean);
                }
                Self::gaussian(mean, cov)
            }
            LawRecord::Gmm { components } => Self::gmm(
                components
                    .into_iter()
                    .map(|c| Ok((c.weight, c.mean, Matrix::from_rows(&c.covariance)?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            LawRecord::UniformBox { lower, upper } => Self::uniform_box(lower, upper),
            LawRecord::Ellipsoid { center, shape } => Self::ellipsoid(center, Matrix::from_rows(&shape)?),
            LawRecord::Point { value } => Self::point(value),
        }
    }
}

impl<T: Scalar> From<UncertaintySpec<T>> for LawRecord<T> {
    fn from(s: UncertaintySpec<T>) -> Self {
        match s {
            UncertaintySpec::Gaussian { mean, covariance, .. } => LawRecord::Gaussian {
                mean,
                covariance: covariance.to_rows(),
            },
            UncertaintySpec::Gmm { components } => LawRecord::Gmm {
                components: components
                    .into_iter()
                    .map(|c| ComponentRecord {
                        weight: c.weight,
                        mean: c.mean,
                        covariance: c.covariance.to_rows(),
                    })
                    .collect(),
            },
            UncertaintySpec::UniformBox { lower, upper } => LawRecord::UniformBox { lower, upper },
            UncertaintySpec::Ellipsoid { center, shape, .. } => LawRecord::Ellipsoid {
                center,
                shape: shape.to_rows(),
            },
            UncertaintySpec::Point { value } => LawRecord::Point { value },
        }
    }
}

fn check_vector<T: Scalar>(v: &[T], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidLaw(format!("{what} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidLaw(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn spd_factor<T: Scalar>(m: &Matrix<T>, dim: usize, what: &str) -> Result<Cholesky<T>> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::InvalidLaw(format!(
            "{what} must be {dim}x{dim}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.is_symmetric(T::c(1e-12)) {
        return Err(Error::InvalidLaw(format!("{what} is not symmetric")));
    }
    m.cholesky()
        .map_err(|_| Error::InvalidLaw(format!("{what} is not positive definite")))
}

fn standard_normals<T: Scalar, R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<T> {
    (0..d)
        .map(|_| T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)))
        .collect()
}

impl<T: Scalar> UncertaintySpec<T> {
    pub fn gaussian(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        check_vector(&mean, "mean")?;
        let chol = spd_factor(&covariance, mean.len(), "covariance")?;
        Ok(UncertaintySpec::Gaussian {
            mean,
            covariance,
            chol,
        })
    }

    /// Scalar Gaussian from mean and variance.
    pub fn normal(mean: T, variance: T) -> Result<Self> {
        Self::gaussian(vec![mean], Matrix::from_row_major(1, 1, vec![variance])?)
    }

    pub fn gmm(components: Vec<(T, Vec<T>, Matrix<T>)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidLaw("mixture has no components".into()));
        }
        let dim = components[0].1.len();
        let mut total = T::zero();
        let mut out = Vec::with_capacity(components.len());
        for (w, mean, cov) in components {
            if !(w > T::zero() && w.is_finite()) {
                return Err(Error::InvalidLaw(format!("mixture weight {w} is not positive")));
            }
            check_vector(&mean, "component mean")?;
            if mean.len() != dim {
                return Err(Error::InvalidLaw("mixture components differ in dimension".into()));
            }
            let chol = spd_factor(&cov, dim, "component covariance")?;
            total += w;
            out.push(GmmComponent {
                weight: w,
                mean,
                covariance: cov,
                chol,
            });
        }
        if (total - T::one()).abs() > T::c(1e-12) {
            return Err(Error::InvalidLaw(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(UncertaintySpec::Gmm { components: out })
    }

    /// Scalar mixture from `(weight, mean, std_dev)` triples.
    pub fn scalar_gmm(components: &[(T, T, T)]) -> Result<Self> {
        Self::gmm(
            components
                .iter()
                .map(|&(w, m, s)| Ok((w, vec![m], Matrix::from_row_major(1, 1, vec![s * s])?)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn uniform_box(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_vector(&lower, "lower bound")?;
        check_vector(&upper, "upper bound")?;
        if lower.len() != upper.len() {
            return Err(Error::InvalidLaw("box bounds differ in dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidLaw("box requires lower < upper componentwise".into()));
        }
        Ok(UncertaintySpec::UniformBox { lower, upper })
    }

    pub fn ellipsoid(center: Vec<T>, shape: Matrix<T>) -> Result<Self> {
        check_vector(&center, "center")?;
        let chol = spd_factor(&shape, center.len(), "ellipsoid shape")?;
        Ok(UncertaintySpec::Ellipsoid { center, shape, chol })
    }

    pub fn point(value: Vec<T>) -> Result<Self> {
        check_vector(&value, "point value")?;
        Ok(UncertaintySpec::Point { value })
    }

    pub fn dim(&self) -> usize {
        match self {
            UncertaintySpec::Gaussian { mean, .. } => mean.len(),
            UncertaintySpec::Gmm { components } => components[0].mean.len(),
            UncertaintySpec::UniformBox { lower, .. } => lower.len(),
            UncertaintySpec::Ellipsoid { center, .. } => center.len(),
            UncertaintySpec::Point { value } => value.len(),
        }
    }

    /// Analytic mean of the law.
    pub fn mean(&self) -> Vec<T> {
        match self {
            UncertaintySpec::Gaussian { mean, .. } => mean.clone(),
            UncertaintySpec::Gmm { components } => {
                let mut m = vec![T::zero(); self.dim()];
                for c in components {
                    for (acc, &v) in m.iter_mut().zip(&c.mean) {
                        *acc += c.weight * v;
                    }
                }
                m
            }
            UncertaintySpec::UniformBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| (l + u) / T::c(2.0))
                .collect(),
            UncertaintySpec::Ellipsoid { center, .. } => center.clone(),
            UncertaintySpec::Point { value } => value.clone(),
        }
    }

    /// Appends one draw to `out`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<T>) {
        match self {
            UncertaintySpec::Gaussian { mean, chol, .. } => {
                let z = standard_normals(rng, mean.len());
                out.extend(mean.iter().zip(chol.transform(&z)).map(|(&m, v)| m + v));
            }
            UncertaintySpec::Gmm { components } => {
                let u = T::c(rng.random::<f64>());
                let mut acc = T::zero();
                let mut chosen = &components[components.len() - 1];
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                let z = standard_normals(rng, chosen.mean.len());
                out.extend(
                    chosen
                        .mean
                        .iter()
                        .zip(chosen.chol.transform(&z))
                        .map(|(&m, v)| m + v),
                );
            }
            UncertaintySpec::UniformBox { lower, upper } => {
                out.extend(
                    lower
                        .iter()
                        .zip(upper)
                        .map(|(&l, &u)| l + (u - l) * T::c(rng.random::<f64>())),
                );
            }
            UncertaintySpec::Ellipsoid { center, chol, .. } => {
                let d = center.len();
                let mut g: Vec<T> = standard_normals(rng, d);
                let mut len = norm(&g);
                while !(len > T::zero()) {
                    g = standard_normals(rng, d);
                    len = norm(&g);
                }
                let radius = T::c(rng.random::<f64>().powf(1.0 / d as f64));
                let u: Vec<T> = g.iter().map(|&v| v / len * radius).collect();
                out.extend(center.iter().zip(chol.transform(&u)).map(|(&c, v)| c + v));
            }
            UncertaintySpec::Point { value } => out.extend_from_slice(value),
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<PointSet<T>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            self.draw_into(rng, &mut data);
        }
        PointSet::new(self.dim(), data)
    }

    /// `n` i.i.d. draws from the root stream of `seed`.
    pub fn sample(&self, n: usize, seed: RngSeed) -> Result<PointSet<T>> {
        self.sample_with(&mut seed.rng(), n)
    }
}

/// Gaussian with the same first two raw moments as a scalar mixture:
/// `m = Σ w_i m_i`, `σ² = Σ w_i (σ_i² + m_i²) − m²`.
pub fn moment_match_gaussian<T: Scalar>(gmm: &UncertaintySpec<T>) -> Result<UncertaintySpec<T>> {
    let UncertaintySpec::Gmm { components } = gmm else {
        return Err(Error::InvalidLaw("moment matching expects a mixture".into()));
    };
    if gmm.dim() != 1 {
        return Err(Error::InvalidLaw("moment matching supports scalar mixtures only".into()));
    }
    let mut m = T::zero();
    let mut second = T::zero();
    for c in components {
        let (mi, vi) = (c.mean[0], c.covariance[(0, 0)]);
        m += c.weight * mi;
        second += c.weight * (vi + mi * mi);
    }
    let var = second - m * m;
    if !(var > T::zero()) {
        return Err(Error::InvalidLaw(format!("moment-matched variance {var} is not positive")));
    }
    UncertaintySpec::normal(m, var)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// A fresh draw at every step.
    #[default]
    PerStep,
    /// One draw per trajectory, held for all steps.
    Once,
}

/// A law used per time step, optionally shifted by `drift · t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", deny_unknown_fields)]
pub struct NoiseProcess<T: Scalar = f64> {
    pub law: UncertaintySpec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<T>>,
    #[serde(default)]
    pub cadence: Cadence,
}

impl<T: Scalar> NoiseProcess<T> {
    pub fn new(law: UncertaintySpec<T>) -> Self {
        Self {
            law,
            drift: None,
            cadence: Cadence::PerStep,
        }
    }

    pub fn with_drift(mut self, rate: Vec<T>) -> Result<Self> {
        if rate.len() != self.law.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.law.dim(),
                found: rate.len(),
            });
        }
        check_vector(&rate, "drift")?;
        self.drift = Some(rate);
        Ok(self)
    }

    pub fn with_cadence(mut self, cadence: Cadence) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.drift {
            if d.len() != self.law.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.law.dim(),
                    found: d.len(),
                });
            }
        }
        Ok(())
    }

    /// Appends one draw at time `t`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, t: T, out: &mut Vec<T>) {
        let start = out.len();
        self.law.draw_into(rng, out);
        if let Some(rate) = &self.drift {
            for (v, &r) in out[start..].iter_mut().zip(rate) {
                *v += r * t;
            }
        }
    }

    pub fn sample_at_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, t: T) -> Result<PointSet<T>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            self.draw_into(rng, t, &mut data);
        }
        PointSet::new(self.dim(), data)
    }

    /// `n` i.i.d. draws of the step-`t` noise from the root stream of `seed`.
    pub fn sample_at(&self, n: usize, seed: RngSeed, t: T) -> Result<PointSet<T>> {
        self.sample_at_with(&mut seed.rng(), n, t)
    }
}
